#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use concept_lens::ranking::EscapeState;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_concept-lens"))
}

pub fn run(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("CONCEPT_LENS_THREADS", n.to_string()),
        None => cmd.env_remove("CONCEPT_LENS_THREADS"),
    };
    cmd.output().expect("spawn concept-lens")
}

pub fn stdout(args: &[&str]) -> String {
    let out = run(args, None);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Weighted best-match F and Recall, straight double loop.
pub fn brute_force_scores(rs: &[BTreeSet<String>], ts: &[BTreeSet<String>]) -> (f64, f64) {
    let total: usize = rs.iter().map(|r| r.len()).sum();
    let mut f_sum = 0.0;
    let mut recall_sum = 0.0;
    for r in rs {
        let mut best_f = 0.0f64;
        let mut best_recall = 0.0f64;
        for t in ts {
            let mut common = 0usize;
            for x in r {
                if t.contains(x) {
                    common += 1;
                }
            }
            let recall = common as f64 / r.len() as f64;
            let precision = if t.is_empty() {
                0.0
            } else {
                common as f64 / t.len() as f64
            };
            let f = if common == 0 {
                0.0
            } else {
                2.0 * recall * precision / (recall + precision)
            };
            best_f = best_f.max(f);
            best_recall = best_recall.max(recall);
        }
        f_sum += r.len() as f64 * best_f;
        recall_sum += r.len() as f64 * best_recall;
    }
    (f_sum / total as f64, recall_sum / total as f64)
}

pub fn direct_importance(w: u64, r: u64, i: u64) -> f64 {
    if w * r * i == 0 {
        return 0.0;
    }
    let (w, r, i) = (w as f64, r as f64, i as f64);
    3.0 * w * r * i / (r * i + w * i + w * r)
}

pub fn direct_is_temporary(state: EscapeState, lifetime: u64, max: u64, long: f64, short: f64) -> bool {
    match state {
        EscapeState::GlobalEscape => false,
        EscapeState::ReferenceEscape => (lifetime as f64) < short * max as f64,
        EscapeState::Captured => (lifetime as f64) < long * max as f64,
    }
}

/// Escape states by fixed-point iteration over the edge list.
/// `None` owners are static fields.
pub fn escape_oracle(n: usize, writes: &[(Option<usize>, usize)]) -> Vec<EscapeState> {
    let mut state = vec![EscapeState::Captured; n];
    for &(owner, value) in writes {
        match owner {
            None => state[value] = EscapeState::GlobalEscape,
            Some(o) if o != value => state[value] = state[value].max(EscapeState::ReferenceEscape),
            Some(_) => {}
        }
    }
    loop {
        let mut changed = false;
        for &(owner, value) in writes {
            if let Some(o) = owner {
                if state[o] == EscapeState::GlobalEscape && state[value] != EscapeState::GlobalEscape {
                    state[value] = EscapeState::GlobalEscape;
                    changed = true;
                }
            }
        }
        if !changed {
            return state;
        }
    }
}

pub fn names(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}
