mod common;

use std::collections::BTreeSet;

use concept_lens::detect::PatternSet;
use concept_lens::evaluate::{evaluate, sweep, threshold_grid, Concept, GroundTruth};
use concept_lens::generate::{generate, ExpectedPattern, OracleGroup, PatternMix, ScenarioSpec};
use concept_lens::group::{group_objects, GroupingMode};
use concept_lens::ranking::{
    build_ranking, compute_importance, escape_states_from_writes, mark_temporaries, profile_objects, EscapeState,
    ObjectProfile, RankingConfig,
};
use concept_lens::trace::{ObjId, Owner, Trace};
use proptest::prelude::*;

use common::{brute_force_scores, direct_importance, direct_is_temporary, escape_oracle};

const ALPHABET: [&str; 8] = ["A", "B", "C", "D", "E", "F", "G", "H"];

fn type_set(max: usize) -> impl Strategy<Value = BTreeSet<String>> {
    prop::collection::btree_set(0..ALPHABET.len(), 1..=max)
        .prop_map(|ix| ix.into_iter().map(|i| ALPHABET[i].to_string()).collect())
}

fn to_truth(rs: &[BTreeSet<String>]) -> GroundTruth {
    GroundTruth {
        concepts: rs
            .iter()
            .enumerate()
            .map(|(i, r)| Concept {
                concept_name: format!("c{i}"),
                types: r.iter().cloned().collect(),
            })
            .collect(),
    }
}

fn state() -> impl Strategy<Value = EscapeState> {
    prop_oneof![
        Just(EscapeState::Captured),
        Just(EscapeState::ReferenceEscape),
        Just(EscapeState::GlobalEscape)
    ]
}

fn profile() -> impl Strategy<Value = ObjectProfile> {
    (state(), 0u64..1000, 0u64..20, 0u64..20, 0u64..20).prop_map(|(s, life, w, r, i)| ObjectProfile {
        object: ObjId(0),
        id: String::new(),
        type_name: String::new(),
        escape_state: s,
        lifetime: life,
        write_freq: w,
        read_freq: r,
        invoke_freq: i,
        importance: -1.0,
        is_temporary: false,
    })
}

fn writes(n: usize) -> impl Strategy<Value = Vec<(Option<usize>, usize)>> {
    prop::collection::vec((prop::option::weighted(0.9, 0..n), 0..n), 0..40)
}

fn owner(o: Option<usize>) -> Owner {
    o.map_or(Owner::Static, |o| Owner::Object(ObjId(o as u32)))
}

fn spec() -> impl Strategy<Value = ScenarioSpec> {
    (
        any::<u64>(),
        prop::array::uniform7(0usize..3),
        (1usize..4, 0usize..2),
        (1usize..4, 0usize..2),
        prop::sample::select(vec![0.0, 0.5, 1.0]),
        1usize..5,
        (0.0f64..0.6, 1usize..4, 0.0f64..1.0),
    )
        .prop_filter("at least one instance", |(_, m, ..)| m.iter().any(|&c| c > 0))
        .prop_map(
            |(seed, m, (d0, dd), (f0, fd), delegation, threads, (noise, rounds, variant_rate))| ScenarioSpec {
                seed,
                patterns: PatternMix {
                    uni: m[0],
                    runi_11: m[1],
                    runi_1n: m[2],
                    rcon_11: m[3],
                    rcon_1n: m[4],
                    con_11: m[5],
                    con_1n: m[6],
                },
                depth: [d0, d0 + dd],
                fan_out: [f0, f0 + fd],
                delegation,
                threads,
                noise,
                rounds,
                variant_rate,
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn evaluator_matches_brute_force(
        rs in prop::collection::vec(type_set(4), 1..5),
        ts in prop::collection::vec(type_set(5), 0..6),
    ) {
        let report = evaluate(&ts, &to_truth(&rs)).unwrap();
        let (f, recall) = brute_force_scores(&rs, &ts);
        prop_assert!((report.f - f).abs() < 1e-12);
        prop_assert!((report.recall - recall).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&report.f) && (0.0..=1.0).contains(&report.recall));
    }

    #[test]
    fn covering_groups_score_one(rs in prop::collection::vec(type_set(4), 1..5), extra in prop::collection::vec(type_set(3), 0..3)) {
        let mut ts = rs.clone();
        ts.extend(extra);
        let report = evaluate(&ts, &to_truth(&rs)).unwrap();
        prop_assert_eq!(report.f, 1.0);
        prop_assert_eq!(report.recall, 1.0);
    }

    #[test]
    fn importance_and_temporaries_match_formula(
        mut ps in prop::collection::vec(profile(), 1..30),
        long in 0.0f64..=1.0,
        frac in 0.0f64..=1.0,
    ) {
        let config = RankingConfig { long_lived: long, short_lived: long * frac };
        compute_importance(&mut ps);
        mark_temporaries(&mut ps, &config);
        let max = ps.iter().map(|p| p.lifetime).max().unwrap();
        for p in &ps {
            prop_assert!((p.importance - direct_importance(p.write_freq, p.read_freq, p.invoke_freq)).abs() < 1e-12);
            prop_assert_eq!(
                p.is_temporary,
                direct_is_temporary(p.escape_state, p.lifetime, max, config.long_lived, config.short_lived)
            );
        }
    }

    #[test]
    fn escape_states_match_fixed_point(ws in writes(12)) {
        let got = escape_states_from_writes(12, ws.iter().map(|&(o, v)| (owner(o), ObjId(v as u32))));
        prop_assert_eq!(got, escape_oracle(12, &ws));
    }

    #[test]
    fn escape_states_only_rise(ws in writes(10)) {
        let mut prev = vec![EscapeState::Captured; 10];
        for k in 0..=ws.len() {
            let now = escape_states_from_writes(10, ws[..k].iter().map(|&(o, v)| (owner(o), ObjId(v as u32))));
            for (a, b) in prev.iter().zip(&now) {
                prop_assert!(a <= b);
            }
            prev = now;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn grouper_matches_generator_oracle(spec in spec()) {
        let s = generate(&spec).unwrap();
        let trace = Trace::from_text(&s.trace_text()).unwrap();
        prop_assert_eq!(trace.auto_closed(), 0);
        let patterns = PatternSet::detect(&s.model);
        prop_assert_eq!(ExpectedPattern::from_patterns(&patterns, &s.model), s.expected_patterns.clone());
        for mode in [GroupingMode::Mp, GroupingMode::MpD] {
            let g = group_objects(&trace, &s.model, &patterns, mode);
            for grp in &g.groups {
                prop_assert!(!grp.members.is_empty());
                for other in g.groups.iter().filter(|o| o.pattern == grp.pattern && o.id != grp.id) {
                    let a: BTreeSet<_> = grp.members.iter().collect();
                    let b: BTreeSet<_> = other.members.iter().collect();
                    prop_assert!(!(a.is_subset(&b)), "{} within {}", grp.id, other.id);
                }
            }
            let got = OracleGroup::from_grouping(&g, &trace, &s.model, &patterns);
            prop_assert_eq!(got, s.oracle(mode).to_vec(), "{}", mode);
        }
    }

    #[test]
    fn lowering_threshold_never_hurts(spec in spec()) {
        let s = generate(&spec).unwrap();
        let trace = Trace::from_text(&s.trace_text()).unwrap();
        let patterns = PatternSet::detect(&s.model);
        let grouping = group_objects(&trace, &s.model, &patterns, GroupingMode::MpD);
        let ranking = build_ranking(&profile_objects(&trace, &RankingConfig::default()));
        let rows = sweep(&trace, &ranking, &grouping, &s.ground_truth, &threshold_grid(&ranking, 12)).unwrap();
        for w in rows.windows(2) {
            prop_assert!(w[0].threshold > w[1].threshold);
            prop_assert!(w[0].lifelines <= w[1].lifelines);
            prop_assert!(w[0].f <= w[1].f);
            prop_assert!(w[0].recall <= w[1].recall);
        }
    }
}
