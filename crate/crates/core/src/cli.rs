//! Command-line front end. Every stage reads and writes plain files so the
//! pipeline can be run stepwise or in one `summarize` call.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::detect::PatternSet;
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_at, sweep, threshold_grid, write_sweep_csv, GroundTruth};
use crate::generate::{write_corpus, PatternMix, ScenarioSpec};
use crate::group::{group_objects, GroupingMode, GroupingResult};
use crate::model::{load_code_model, CodeModel};
use crate::ranking::{build_ranking, profile_objects, read_rank_csv, write_rank_csv, Ranking, RankingConfig};
use crate::summarize::{summarize, Format, Level, SummarizeOptions};
use crate::trace::{Progress, Trace, TraceReader};

pub const THREADS_ENV: &str = "CONCEPT_LENS_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "concept-lens",
    version,
    about = "Summarized sequence diagrams from execution traces"
)]
struct Cli {
    /// Log verbosity on standard error (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Print loading heartbeats on standard error.
    #[arg(long, global = true)]
    progress: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect meta patterns in a code model.
    Detect {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        out: Out,
    },
    /// Group objects of a trace by detected patterns.
    Group {
        #[command(flatten)]
        inputs: GroupInputs,
        #[command(flatten)]
        out: Out,
    },
    /// Profile and rank the objects of a trace.
    Rank {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        ranking: RankingArgs,
        #[command(flatten)]
        out: Out,
    },
    /// Emit a summarized sequence diagram.
    Summarize {
        #[command(flatten)]
        inputs: PipelineInputs,
        /// Importance threshold; objects ranked strictly above it are shown.
        #[arg(long, default_value_t = 0.0)]
        it: f64,
        #[arg(long, default_value = "class")]
        level: Level,
        #[arg(long, default_value = "plantuml")]
        format: Format,
        /// Show calls from undisplayed objects as coming from EXTERNAL.
        #[arg(long)]
        include_external: bool,
        /// Emit return messages.
        #[arg(long)]
        returns: bool,
        #[command(flatten)]
        out: Out,
    },
    /// Score displayed groups against a ground truth (JSON report).
    Evaluate {
        #[command(flatten)]
        inputs: PipelineInputs,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        it: f64,
        #[command(flatten)]
        out: Out,
    },
    /// Evaluate over a grid of thresholds (CSV: it,lifelines,f,recall).
    Sweep {
        #[command(flatten)]
        inputs: PipelineInputs,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',', conflicts_with = "steps")]
        grid: Option<Vec<f64>>,
        /// Evenly spaced thresholds from the top importance down to zero.
        #[arg(long, default_value_t = 11)]
        steps: usize,
        #[command(flatten)]
        out: Out,
    },
    /// Generate a synthetic corpus with oracle groups and ground truth.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct Out {
    /// Output file (standard output when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GroupInputs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    /// Pattern file from `detect`; detected from the model when omitted.
    #[arg(long)]
    patterns: Option<PathBuf>,
    #[arg(long, default_value = "mpd")]
    mode: GroupingMode,
}

#[derive(Debug, Args)]
struct PipelineInputs {
    #[command(flatten)]
    group: GroupInputs,
    /// Groups file from `group`; computed when omitted.
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Rank file from `rank`; computed when omitted.
    #[arg(long)]
    rank: Option<PathBuf>,
    #[command(flatten)]
    ranking: RankingArgs,
}

#[derive(Debug, Args)]
struct RankingArgs {
    /// Captured objects living shorter than this fraction of the longest
    /// lifetime are temporary.
    #[arg(long, default_value_t = 0.5)]
    long_lived: f64,
    /// Reference-escaping objects living shorter than this fraction are
    /// temporary.
    #[arg(long, default_value_t = 0.1)]
    short_lived: f64,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Scenario spec (JSON); flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Instance counts, e.g. `uni=1,rcon_1n=2,con_11=0`.
    #[arg(long, value_delimiter = ',')]
    mix: Option<Vec<String>>,
    /// Depth range `MIN:MAX`.
    #[arg(long)]
    depth: Option<String>,
    /// Fan-out range `MIN:MAX`.
    #[arg(long)]
    fan_out: Option<String>,
    #[arg(long)]
    delegation: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    variant_rate: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 on a
/// usage error, 2 when an input cannot be read or is malformed.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return 1;
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => 1,
                _ => 2,
            }
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize =
        value.parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got '{value}'"))
        })?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn write_out(out: &Out, text: &[u8]) -> Result<()> {
    match &out.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(text)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn load_trace(path: &Path, progress: bool) -> Result<Trace> {
    let trace = if progress {
        let mut report = |n: usize| eprintln!("loaded {n} events");
        TraceReader::with_progress(Progress {
            interval: 1_000_000,
            report: &mut report,
        })
        .load(path)?
    } else {
        TraceReader::default().load(path)?
    };
    if progress {
        eprintln!("loaded {} events, {} objects", trace.len(), trace.objects().len());
    }
    Ok(trace)
}

fn ranking_config(args: &RankingArgs) -> Result<RankingConfig> {
    let config = RankingConfig {
        long_lived: args.long_lived,
        short_lived: args.short_lived,
    };
    config.validate()?;
    Ok(config)
}

struct Loaded {
    model: CodeModel,
    trace: Trace,
    patterns: PatternSet,
}

fn load_group_inputs(inputs: &GroupInputs, progress: bool) -> Result<Loaded> {
    let model = load_code_model(&inputs.model)?;
    let patterns = match &inputs.patterns {
        Some(p) => PatternSet::load(p, &model)?,
        None => PatternSet::detect(&model),
    };
    let trace = load_trace(&inputs.trace, progress)?;
    Ok(Loaded { model, trace, patterns })
}

struct Pipeline {
    loaded: Loaded,
    grouping: GroupingResult,
    ranking: Ranking,
}

fn load_pipeline(inputs: &PipelineInputs, progress: bool) -> Result<Pipeline> {
    let config = ranking_config(&inputs.ranking)?;
    let loaded = load_group_inputs(&inputs.group, progress)?;
    let grouping = match &inputs.groups {
        Some(g) => GroupingResult::load(g, &loaded.trace, &loaded.patterns)?,
        None => group_objects(&loaded.trace, &loaded.model, &loaded.patterns, inputs.group.mode),
    };
    let profiles = match &inputs.rank {
        Some(r) => {
            let text = fs::read_to_string(r).map_err(|e| Error::io(r, e))?;
            read_rank_csv(&text, &r.display().to_string(), &loaded.trace)?
        }
        None => profile_objects(&loaded.trace, &config),
    };
    Ok(Pipeline {
        ranking: build_ranking(&profiles),
        loaded,
        grouping,
    })
}

fn check_threshold(it: f64) -> Result<()> {
    if it.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("--it must be finite, got {it}")))
    }
}

fn parse_range(flag: &str, s: &str) -> Result<[usize; 2]> {
    let bad = || Error::InvalidArgument(format!("--{flag} expects MIN:MAX, got '{s}'"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok([
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ])
}

fn apply_mix(mix: &mut PatternMix, items: &[String]) -> Result<()> {
    for item in items {
        let bad = || Error::InvalidArgument(format!("--mix expects NAME=COUNT, got '{item}'"));
        let (k, v) = item.split_once('=').ok_or_else(bad)?;
        let v: usize = v.trim().parse().map_err(|_| bad())?;
        let slot = match k.trim() {
            "uni" => &mut mix.uni,
            "runi_11" => &mut mix.runi_11,
            "runi_1n" => &mut mix.runi_1n,
            "rcon_11" => &mut mix.rcon_11,
            "rcon_1n" => &mut mix.rcon_1n,
            "con_11" => &mut mix.con_11,
            "con_1n" => &mut mix.con_1n,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown pattern kind '{other}' in --mix"
                )))
            }
        };
        *slot = v;
    }
    Ok(())
}

fn generate_spec(args: &GenerateArgs) -> Result<ScenarioSpec> {
    let mut spec = match &args.spec {
        Some(p) => ScenarioSpec::load(p)?,
        None => ScenarioSpec::default(),
    };
    if let Some(v) = args.seed {
        spec.seed = v;
    }
    if let Some(items) = &args.mix {
        apply_mix(&mut spec.patterns, items)?;
    }
    if let Some(s) = &args.depth {
        spec.depth = parse_range("depth", s)?;
    }
    if let Some(s) = &args.fan_out {
        spec.fan_out = parse_range("fan-out", s)?;
    }
    if let Some(v) = args.delegation {
        spec.delegation = v;
    }
    if let Some(v) = args.threads {
        spec.threads = v;
    }
    if let Some(v) = args.noise {
        spec.noise = v;
    }
    if let Some(v) = args.rounds {
        spec.rounds = v;
    }
    if let Some(v) = args.variant_rate {
        spec.variant_rate = v;
    }
    spec.validate()?;
    Ok(spec)
}

fn execute(cli: &Cli) -> Result<()> {
    let progress = cli.progress;
    match &cli.command {
        Command::Detect { model, out } => {
            let model = load_code_model(model)?;
            let patterns = PatternSet::detect(&model);
            log::info!("{} meta patterns", patterns.patterns.len());
            write_out(out, patterns.to_json(&model).as_bytes())
        }
        Command::Group { inputs, out } => {
            let l = load_group_inputs(inputs, progress)?;
            let grouping = group_objects(&l.trace, &l.model, &l.patterns, inputs.mode);
            log::info!("{} groups", grouping.groups.len());
            write_out(out, grouping.to_json(&l.trace, &l.model, &l.patterns).as_bytes())
        }
        Command::Rank { trace, ranking, out } => {
            let config = ranking_config(ranking)?;
            let trace = load_trace(trace, progress)?;
            let profiles = profile_objects(&trace, &config);
            let mut buf = Vec::new();
            write_rank_csv(&profiles, &mut buf)?;
            write_out(out, &buf)
        }
        Command::Summarize {
            inputs,
            it,
            level,
            format,
            include_external,
            returns,
            out,
        } => {
            check_threshold(*it)?;
            let p = load_pipeline(inputs, progress)?;
            let options = SummarizeOptions {
                threshold: *it,
                level: *level,
                include_external: *include_external,
                returns: *returns,
            };
            let l = &p.loaded;
            let diagram = summarize(&l.trace, &l.model, &l.patterns, &p.grouping, &p.ranking, &options);
            log::info!(
                "{} lifelines, {} messages",
                diagram.lifelines.len(),
                diagram.messages.len()
            );
            write_out(out, diagram.render(*format).as_bytes())
        }
        Command::Evaluate {
            inputs,
            ground_truth,
            it,
            out,
        } => {
            check_threshold(*it)?;
            let truth = GroundTruth::load(ground_truth)?;
            let p = load_pipeline(inputs, progress)?;
            let report = evaluate_at(&p.loaded.trace, &p.ranking, &p.grouping, &truth, *it)?;
            let mut text = serde_json::to_string_pretty(&report).expect("report serialize");
            text.push('\n');
            write_out(out, text.as_bytes())
        }
        Command::Sweep {
            inputs,
            ground_truth,
            grid,
            steps,
            out,
        } => {
            let truth = GroundTruth::load(ground_truth)?;
            let p = load_pipeline(inputs, progress)?;
            let grid = match grid {
                Some(g) => g.clone(),
                None => threshold_grid(&p.ranking, *steps),
            };
            let rows = sweep(&p.loaded.trace, &p.ranking, &p.grouping, &truth, &grid)?;
            let mut buf = Vec::new();
            write_sweep_csv(&rows, &mut buf)?;
            write_out(out, &buf)
        }
        Command::Generate(args) => {
            let spec = generate_spec(args)?;
            let files = write_corpus(&spec, &args.out)?;
            if progress {
                eprintln!(
                    "wrote {} events, {} objects to {}",
                    files.stats.events,
                    files.stats.objects,
                    args.out.display()
                );
            }
            let spec_path = args.out.join("spec.json");
            let mut f = File::create(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
            let mut text = serde_json::to_string_pretty(&spec).expect("spec serialize");
            text.push('\n');
            f.write_all(text.as_bytes()).map_err(|e| Error::io(&spec_path, e))
        }
    }
}
