//! Clustering quality of displayed groups against a reference set of
//! concepts, and threshold sweeps.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupingResult;
use crate::ranking::Ranking;
use crate::summarize::{displayed_groups, DisplayGroup, Level};
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub concept_name: String,
    pub types: Vec<String>,
}

/// Reference set: named concepts, each a set of type names.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundTruth {
    pub concepts: Vec<Concept>,
}

impl GroundTruth {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let concepts: Vec<Concept> = serde_json::from_str(text)
            .map_err(|e| Error::parse(origin, format!("{}:{}", e.line(), e.column()), e.to_string()))?;
        for (i, c) in concepts.iter().enumerate() {
            if c.types.is_empty() {
                return Err(Error::integrity(
                    origin,
                    format!("[{i}].types"),
                    format!("concept '{}' has no types", c.concept_name),
                ));
            }
        }
        Ok(Self { concepts })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.concepts).expect("ground truth serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConceptMatch {
    pub concept: String,
    /// Index into the evaluated group list of the best F match.
    pub matched_group: Option<usize>,
    pub recall: f64,
    pub precision: f64,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub f: f64,
    pub recall: f64,
    pub lifeline_count: usize,
    pub matches: Vec<ConceptMatch>,
}

/// `(recall, precision, f)` of group `t` for concept `r`.
pub fn pair_scores(r: &BTreeSet<String>, t: &BTreeSet<String>) -> (f64, f64, f64) {
    let common = r.intersection(t).count() as f64;
    let recall = if r.is_empty() { 0.0 } else { common / r.len() as f64 };
    let precision = if t.is_empty() { 0.0 } else { common / t.len() as f64 };
    let f = if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    };
    (recall, precision, f)
}

/// Weighted best-match F and Recall of `groups` (type-name sets).
pub fn evaluate(groups: &[BTreeSet<String>], truth: &GroundTruth) -> Result<EvaluationReport> {
    let concepts: Vec<BTreeSet<String>> = truth
        .concepts
        .iter()
        .map(|c| c.types.iter().cloned().collect())
        .collect();
    let n: usize = concepts.iter().map(BTreeSet::len).sum();
    if n == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let mut f = 0.0;
    let mut recall = 0.0;
    let mut matches = Vec::with_capacity(concepts.len());
    for (c, r) in truth.concepts.iter().zip(&concepts) {
        let weight = r.len() as f64;
        let mut best: Option<(usize, (f64, f64, f64))> = None;
        let mut best_recall = 0.0f64;
        for (j, t) in groups.iter().enumerate() {
            let s = pair_scores(r, t);
            best_recall = best_recall.max(s.0);
            if best.is_none_or(|(_, b)| s.2 > b.2) {
                best = Some((j, s));
            }
        }
        let (rc, pr, fm) = best.map_or((0.0, 0.0, 0.0), |(_, s)| s);
        f += weight * fm;
        recall += weight * best_recall;
        matches.push(ConceptMatch {
            concept: c.concept_name.clone(),
            matched_group: best.map(|(j, _)| j),
            recall: rc,
            precision: pr,
            f: fm,
        });
    }
    Ok(EvaluationReport {
        f: f / n as f64,
        recall: recall / n as f64,
        lifeline_count: groups.len(),
        matches,
    })
}

pub fn type_sets(trace: &Trace, groups: &[DisplayGroup]) -> Vec<BTreeSet<String>> {
    groups
        .iter()
        .map(|g| g.type_names(trace).into_iter().map(str::to_string).collect())
        .collect()
}

/// Evaluates the class-level groups displayed at `threshold`.
pub fn evaluate_at(
    trace: &Trace,
    ranking: &Ranking,
    grouping: &GroupingResult,
    truth: &GroundTruth,
    threshold: f64,
) -> Result<EvaluationReport> {
    let groups = displayed_groups(trace, ranking, grouping, threshold, Level::Class);
    evaluate(&type_sets(trace, &groups), truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub lifelines: usize,
    pub f: f64,
    pub recall: f64,
}

/// `steps` thresholds evenly spaced from the top importance down to zero.
pub fn threshold_grid(ranking: &Ranking, steps: usize) -> Vec<f64> {
    let top = ranking.entries.first().map_or(0.0, |e| e.importance);
    match steps {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..steps)
            .map(|k| top * (steps - 1 - k) as f64 / (steps - 1) as f64)
            .collect(),
    }
}

/// One row per distinct threshold, highest threshold first.
pub fn sweep(
    trace: &Trace,
    ranking: &Ranking,
    grouping: &GroupingResult,
    truth: &GroundTruth,
    grid: &[f64],
) -> Result<Vec<SweepRow>> {
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("thresholds must be finite".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| b.total_cmp(a));
    grid.dedup();
    grid.par_iter()
        .map(|&threshold| {
            let report = evaluate_at(trace, ranking, grouping, truth, threshold)?;
            Ok(SweepRow {
                threshold,
                lifelines: report.lifeline_count,
                f: report.f,
                recall: report.recall,
            })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("writing sweep csv: {e}"));
    w.write_record(["it", "lifelines", "f", "recall"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.threshold.to_string(),
            r.lifelines.to_string(),
            r.f.to_string(),
            r.recall.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("writing sweep csv: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn truth(cs: &[&[&str]]) -> GroundTruth {
        GroundTruth {
            concepts: cs
                .iter()
                .enumerate()
                .map(|(i, ts)| Concept {
                    concept_name: format!("c{i}"),
                    types: ts.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn perfect_clustering() {
        let gt = truth(&[&["A", "B"], &["C"]]);
        let r = evaluate(&[set(&["C"]), set(&["A", "B"])], &gt).unwrap();
        assert_eq!((r.f, r.recall), (1.0, 1.0));
        assert_eq!(r.matches[0].matched_group, Some(1));
    }

    #[test]
    fn hand_computed_example() {
        let gt = truth(&[&["A", "B", "C"], &["D"]]);
        let r = evaluate(&[set(&["A", "B"]), set(&["D", "E"])], &gt).unwrap();
        let f = 0.75 * 0.8 + 0.25 * (2.0 / 3.0);
        assert!((r.f - f).abs() < 1e-12);
        assert!((r.recall - 0.75).abs() < 1e-12);
    }

    #[test]
    fn power_set_reaches_one() {
        let types = ["A", "B", "C"];
        let mut ts = Vec::new();
        for mask in 1u32..8 {
            ts.push(
                types
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, t)| t.to_string())
                    .collect(),
            );
        }
        let r = evaluate(&ts, &truth(&[&["A", "C"], &["B"]])).unwrap();
        assert_eq!(r.f, 1.0);
    }

    #[test]
    fn empty_inputs() {
        let r = evaluate(&[], &truth(&[&["A"]])).unwrap();
        assert_eq!((r.f, r.recall, r.matches[0].matched_group), (0.0, 0.0, None));
        assert!(matches!(
            evaluate(&[set(&["A"])], &GroundTruth::default()),
            Err(Error::EmptyGroundTruth)
        ));
    }

    #[test]
    fn disjoint_pair_scores_zero() {
        assert_eq!(pair_scores(&set(&["A"]), &set(&["B"])), (0.0, 0.0, 0.0));
    }

    #[test]
    fn ground_truth_file() {
        let text = r#"[{"concept_name": "fs", "types": ["Dir", "File"]}]"#;
        let gt = GroundTruth::from_json(text, "gt.json").unwrap();
        assert_eq!(GroundTruth::from_json(&gt.to_json(), "x").unwrap(), gt);
        let bad = r#"[{"concept_name": "x", "types": []}]"#;
        assert!(matches!(
            GroundTruth::from_json(bad, "gt.json"),
            Err(Error::Integrity { .. })
        ));
    }

    #[test]
    fn grid_spacing() {
        let ranking = Ranking {
            entries: vec![crate::ranking::RankEntry {
                object: crate::trace::ObjId(0),
                importance: 4.0,
            }],
        };
        assert_eq!(threshold_grid(&ranking, 5), [4.0, 3.0, 2.0, 1.0, 0.0]);
        assert_eq!(threshold_grid(&ranking, 1), [0.0]);
    }

    #[test]
    fn sweep_csv_shape() {
        let rows = [SweepRow {
            threshold: 0.5,
            lifelines: 2,
            f: 1.0,
            recall: 0.75,
        }];
        let mut out = Vec::new();
        write_sweep_csv(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "it,lifelines,f,recall\n0.5,2,1,0.75\n");
    }
}
