//! Core-object identification: escape states, temporaries, importance and
//! the importance-based ranking.

use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{EventKind, ObjId, Owner, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EscapeState {
    Captured,
    ReferenceEscape,
    GlobalEscape,
}

impl fmt::Display for EscapeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EscapeState::Captured => "Captured",
            EscapeState::ReferenceEscape => "ReferenceEscape",
            EscapeState::GlobalEscape => "GlobalEscape",
        })
    }
}

impl FromStr for EscapeState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "Captured" => Ok(EscapeState::Captured),
            "ReferenceEscape" => Ok(EscapeState::ReferenceEscape),
            "GlobalEscape" => Ok(EscapeState::GlobalEscape),
            other => Err(format!("unknown escape state '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectProfile {
    pub object: ObjId,
    pub id: String,
    pub type_name: String,
    pub escape_state: EscapeState,
    pub lifetime: u64,
    pub write_freq: u64,
    pub read_freq: u64,
    pub invoke_freq: u64,
    pub importance: f64,
    pub is_temporary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingConfig {
    /// Fraction of the longest lifetime below which a captured object is
    /// temporary.
    pub long_lived: f64,
    /// Same, for objects referenced only from non-static objects.
    pub short_lived: f64,
}

impl Default for RankingConfig {
    fn default() -> Self {
        Self {
            long_lived: 0.5,
            short_lived: 0.1,
        }
    }
}

impl RankingConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| (0.0..=1.0).contains(&x);
        if !ok(self.long_lived) || !ok(self.short_lived) || self.short_lived > self.long_lived {
            return Err(Error::InvalidArgument(format!(
                "lifetime thresholds must satisfy 0 <= short ({}) <= long ({}) <= 1",
                self.short_lived, self.long_lived
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEntry {
    pub object: ObjId,
    pub importance: f64,
}

/// Non-temporary objects, most important first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ranking {
    pub entries: Vec<RankEntry>,
}

impl Ranking {
    /// Entries strictly above `threshold`.
    pub fn above(&self, threshold: f64) -> impl Iterator<Item = &RankEntry> {
        self.entries.iter().take_while(move |e| e.importance > threshold)
    }
}

/// Escape states from a flow-insensitive reference graph built from field
/// writes. `writes` yields `(owner, stored value)` pairs.
pub fn escape_states_from_writes(
    object_count: usize,
    writes: impl IntoIterator<Item = (Owner, ObjId)>,
) -> Vec<EscapeState> {
    let mut state = vec![EscapeState::Captured; object_count];
    let mut edges: Vec<Vec<u32>> = vec![Vec::new(); object_count];
    let mut roots = Vec::new();
    for (owner, value) in writes {
        match owner {
            Owner::Static => roots.push(value),
            Owner::Object(o) => {
                if o != value {
                    state[value.0 as usize] = EscapeState::ReferenceEscape;
                }
                edges[o.0 as usize].push(value.0);
            }
        }
    }
    let mut queue: VecDeque<u32> = VecDeque::new();
    for r in roots {
        if state[r.0 as usize] != EscapeState::GlobalEscape {
            state[r.0 as usize] = EscapeState::GlobalEscape;
            queue.push_back(r.0);
        }
    }
    while let Some(o) = queue.pop_front() {
        for &v in &edges[o as usize] {
            if state[v as usize] != EscapeState::GlobalEscape {
                state[v as usize] = EscapeState::GlobalEscape;
                queue.push_back(v);
            }
        }
    }
    state
}

pub fn assign_escape_states(trace: &Trace) -> Vec<EscapeState> {
    let writes = trace.events().iter().filter_map(|e| match e.kind {
        EventKind::FieldWrite {
            owner, value: Some(v), ..
        } => Some((owner, v)),
        _ => None,
    });
    escape_states_from_writes(trace.objects().len(), writes)
}

/// Harmonic mean of the three frequencies; zero if any of them is zero.
pub fn harmonic_importance(write: u64, read: u64, invoke: u64) -> f64 {
    if write == 0 || read == 0 || invoke == 0 {
        return 0.0;
    }
    3.0 / (1.0 / write as f64 + 1.0 / read as f64 + 1.0 / invoke as f64)
}

/// Access counts received from other objects. Accesses issued outside any
/// traced frame count as coming from another object.
fn access_counts(trace: &Trace) -> Vec<[u64; 3]> {
    let mut counts = vec![[0u64; 3]; trace.objects().len()];
    for (i, e) in trace.events().iter().enumerate() {
        let (target, slot) = match e.kind {
            EventKind::FieldWrite {
                owner: Owner::Object(o),
                ..
            } => (o, 0),
            EventKind::FieldRead { owner, .. } => (owner, 1),
            EventKind::Entry { object, .. } => (object, 2),
            _ => continue,
        };
        if trace.caller_of(i) != Some(target) {
            counts[target.0 as usize][slot] += 1;
        }
    }
    counts
}

/// Profiles for every object that appears in at least one event, with
/// importance computed and temporaries marked.
pub fn profile_objects(trace: &Trace, config: &RankingConfig) -> Vec<ObjectProfile> {
    let escape = assign_escape_states(trace);
    let counts = access_counts(trace);
    let mut profiles: Vec<ObjectProfile> = trace
        .objects()
        .iter()
        .enumerate()
        .filter(|(_, info)| info.first_seq.is_some())
        .map(|(i, info)| {
            let [w, r, m] = counts[i];
            ObjectProfile {
                object: ObjId(i as u32),
                id: info.id.clone(),
                type_name: info.type_name.clone(),
                escape_state: escape[i],
                lifetime: info.lifetime(),
                write_freq: w,
                read_freq: r,
                invoke_freq: m,
                importance: 0.0,
                is_temporary: false,
            }
        })
        .collect();
    compute_importance(&mut profiles);
    mark_temporaries(&mut profiles, config);
    profiles
}

pub fn compute_importance(profiles: &mut [ObjectProfile]) {
    for p in profiles {
        p.importance = harmonic_importance(p.write_freq, p.read_freq, p.invoke_freq);
    }
}

pub fn is_temporary(state: EscapeState, lifetime: u64, lifetime_max: u64, config: &RankingConfig) -> bool {
    let lifetime = lifetime as f64;
    let max = lifetime_max as f64;
    match state {
        EscapeState::Captured => lifetime < max * config.long_lived,
        EscapeState::ReferenceEscape => lifetime < max * config.short_lived,
        EscapeState::GlobalEscape => false,
    }
}

pub fn mark_temporaries(profiles: &mut [ObjectProfile], config: &RankingConfig) {
    let max = profiles.iter().map(|p| p.lifetime).max().unwrap_or(0);
    for p in profiles {
        p.is_temporary = is_temporary(p.escape_state, p.lifetime, max, config);
    }
}

/// Sorts non-temporary objects by importance, descending; ties broken by
/// type name, then object id.
pub fn build_ranking(profiles: &[ObjectProfile]) -> Ranking {
    let mut kept: Vec<&ObjectProfile> = profiles.iter().filter(|p| !p.is_temporary).collect();
    kept.sort_by(|a, b| {
        b.importance
            .total_cmp(&a.importance)
            .then_with(|| a.type_name.cmp(&b.type_name))
            .then_with(|| a.id.cmp(&b.id))
    });
    Ranking {
        entries: kept
            .into_iter()
            .map(|p| RankEntry {
                object: p.object,
                importance: p.importance,
            })
            .collect(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RankRow {
    object: String,
    #[serde(rename = "type")]
    type_name: String,
    escape_state: String,
    lifetime: u64,
    write_freq: u64,
    read_freq: u64,
    invoke_freq: u64,
    importance: f64,
    is_temporary: bool,
}

pub fn write_rank_csv(profiles: &[ObjectProfile], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in profiles {
        w.serialize(RankRow {
            object: p.id.clone(),
            type_name: p.type_name.clone(),
            escape_state: p.escape_state.to_string(),
            lifetime: p.lifetime,
            write_freq: p.write_freq,
            read_freq: p.read_freq,
            invoke_freq: p.invoke_freq,
            importance: p.importance,
            is_temporary: p.is_temporary,
        })
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io("<rank csv>", e))?;
    Ok(())
}

/// Reads a rank CSV back, resolving object ids against `trace`.
pub fn read_rank_csv(text: &str, origin: &str, trace: &Trace) -> Result<Vec<ObjectProfile>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<RankRow>().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(origin, line, e.to_string()))?;
        let object = trace.object_id(&row.object).ok_or_else(|| {
            Error::integrity(
                origin,
                format!("line {line}"),
                format!("unknown object '{}'", row.object),
            )
        })?;
        let escape_state = row
            .escape_state
            .parse()
            .map_err(|e: String| Error::parse(origin, line, e))?;
        out.push(ObjectProfile {
            object,
            id: row.object,
            type_name: row.type_name,
            escape_state,
            lifetime: row.lifetime,
            write_freq: row.write_freq,
            read_freq: row.read_freq,
            invoke_freq: row.invoke_freq,
            importance: row.importance,
            is_temporary: row.is_temporary,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(id: &str, ty: &str, importance: f64, temporary: bool) -> ObjectProfile {
        ObjectProfile {
            object: ObjId(id.as_bytes()[0] as u32),
            id: id.into(),
            type_name: ty.into(),
            escape_state: EscapeState::Captured,
            lifetime: 0,
            write_freq: 0,
            read_freq: 0,
            invoke_freq: 0,
            importance,
            is_temporary: temporary,
        }
    }

    #[test]
    fn escape_states() {
        let text = "\
O g G
O r R
O c C
O h H
E 1 m G#run g
W 2 m STATIC App.main g
W 3 m g G.child h
W 4 m c C.ref r
X 5 m G#run g
";
        let t = Trace::from_text(text).unwrap();
        let s = assign_escape_states(&t);
        let id = |x: &str| t.object_id(x).unwrap().0 as usize;
        assert_eq!(s[id("g")], EscapeState::GlobalEscape);
        // reachable from a static root through g
        assert_eq!(s[id("h")], EscapeState::GlobalEscape);
        assert_eq!(s[id("r")], EscapeState::ReferenceEscape);
        assert_eq!(s[id("c")], EscapeState::Captured);
    }

    #[test]
    fn temporaries() {
        let cfg = RankingConfig::default();
        assert!(is_temporary(EscapeState::Captured, 30, 100, &cfg));
        assert!(!is_temporary(EscapeState::GlobalEscape, 0, 100, &cfg));
        assert!(!is_temporary(EscapeState::ReferenceEscape, 20, 100, &cfg));
        assert!(is_temporary(EscapeState::ReferenceEscape, 9, 100, &cfg));
        assert!(!is_temporary(EscapeState::Captured, 50, 100, &cfg));
    }

    #[test]
    fn importance_values() {
        assert_eq!(harmonic_importance(2, 2, 2), 2.0);
        assert!((harmonic_importance(1, 2, 4) - 12.0 / 7.0).abs() < 1e-12);
        assert_eq!(harmonic_importance(0, 5, 5), 0.0);
    }

    #[test]
    fn ranking_order_and_ties() {
        let ps = vec![
            profile("c", "T", 1.0, false),
            profile("a", "T", 5.0, false),
            profile("b", "T", 3.0, false),
        ];
        let ids = |r: &Ranking| r.entries.iter().map(|e| e.object.0 as u8 as char).collect::<String>();
        assert_eq!(ids(&build_ranking(&ps)), "abc");

        let ps = vec![
            profile("c", "T", 1.0, false),
            profile("a", "T", 5.0, false),
            profile("b", "T", 3.0, true),
        ];
        assert_eq!(ids(&build_ranking(&ps)), "ac");

        let ps = vec![
            profile("b", "T", 2.0, false),
            profile("a", "T", 2.0, false),
            profile("c", "S", 2.0, false),
        ];
        assert_eq!(ids(&build_ranking(&ps)), "cab");
    }

    #[test]
    fn self_accesses_do_not_count() {
        let text = "\
O a A
O b B
E 1 m A#run a
W 2 m a A.x -
R 3 m a A.x
E 4 m A#helper a
X 5 m A#helper a
W 6 m b B.x -
R 7 m b B.x
E 8 m B#get b
X 9 m B#get b
X 10 m A#run a
";
        let t = Trace::from_text(text).unwrap();
        let ps = profile_objects(&t, &RankingConfig::default());
        let a = &ps[0];
        let b = &ps[1];
        // a's only foreign access is the external call into run
        assert_eq!((a.write_freq, a.read_freq, a.invoke_freq), (0, 0, 1));
        assert_eq!((b.write_freq, b.read_freq, b.invoke_freq), (1, 1, 1));
        assert_eq!(b.importance, 1.0);
    }

    #[test]
    fn rank_csv_round_trip() {
        let text = "O a A\nO b B\nE 1 m A#run a\nW 2 m a A.b b\nR 3 m b B.x\nE 4 m B#f b\nX 5 m B#f b\nX 6 m A#run a\n";
        let t = Trace::from_text(text).unwrap();
        let ps = profile_objects(&t, &RankingConfig::default());
        let mut buf = Vec::new();
        write_rank_csv(&ps, &mut buf).unwrap();
        let back = read_rank_csv(std::str::from_utf8(&buf).unwrap(), "r.csv", &t).unwrap();
        assert_eq!(ps, back);
    }

    #[test]
    fn config_validation() {
        assert!(RankingConfig::default().validate().is_ok());
        let bad = RankingConfig {
            long_lived: 0.1,
            short_lived: 0.5,
        };
        assert!(bad.validate().is_err());
    }
}
