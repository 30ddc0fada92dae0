//! Object grouping: builds soft clusters of template/hook (and optionally
//! delegate) objects for every detected meta pattern.
//!
//! For each activation of a pattern's template method a seed is computed
//! from the activation's slice of its own thread. Seeds that share template
//! object and pattern are unioned, empty groups are dropped, and a group
//! strictly contained in another group of the same pattern is removed.
//!
//! Recursive patterns walk a chain of template/hook calls: a callee joins
//! the group while every non-self-call frame above it on the slice's call
//! stack is a chain method. Activations of the same pattern that the outer
//! walk already reached through the chain are not walked again; their seed
//! is contained in the outer one.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{Category, MetaPattern, PatternSet};
use crate::error::{Error, Result};
use crate::model::{CodeModel, MethodIdx, TypeIdx};
use crate::trace::{EventKind, MethodSym, ObjId, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum GroupingMode {
    /// Chains may only contain template/hook methods.
    #[serde(rename = "mp")]
    Mp,
    /// Chains may also contain delegate methods sharing a hook's name.
    #[default]
    #[serde(rename = "mpd")]
    MpD,
}

impl fmt::Display for GroupingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupingMode::Mp => "mp",
            GroupingMode::MpD => "mpd",
        })
    }
}

impl FromStr for GroupingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mp" => Ok(GroupingMode::Mp),
            "mpd" => Ok(GroupingMode::MpD),
            other => Err(format!("unknown grouping mode '{other}' (expected mp or mpd)")),
        }
    }
}

/// Resolution of trace method ids against the code model.
#[derive(Debug, Clone)]
pub struct MethodInfo {
    pub model: Option<MethodIdx>,
    pub declaring_type: Option<TypeIdx>,
    /// Interned simple name; overloads share it.
    pub name: u32,
    pub display_name: String,
}

#[derive(Debug, Clone)]
pub struct MethodTable {
    infos: Vec<MethodInfo>,
    names: HashMap<String, u32>,
    unresolved: usize,
}

impl MethodTable {
    pub fn new(trace: &Trace, model: &CodeModel) -> Self {
        let mut names: HashMap<String, u32> = HashMap::new();
        let mut intern = |s: &str| -> u32 {
            let n = names.len() as u32;
            *names.entry(s.to_string()).or_insert(n)
        };
        let mut unresolved = 0;
        let infos = trace
            .method_syms()
            .map(|(_, id)| match model.find_method(id) {
                Some(m) => {
                    let decl = model.method(m);
                    MethodInfo {
                        model: Some(m),
                        declaring_type: Some(model.method_type(m)),
                        name: intern(&decl.name),
                        display_name: decl.name.clone(),
                    }
                }
                None => {
                    unresolved += 1;
                    let simple = id.rsplit_once('#').map_or(id, |(_, n)| n);
                    MethodInfo {
                        model: None,
                        declaring_type: None,
                        name: intern(simple),
                        display_name: simple.to_string(),
                    }
                }
            })
            .collect();
        if unresolved > 0 {
            log::warn!("{unresolved} trace method id(s) not found in the code model");
        }
        Self {
            infos,
            names,
            unresolved,
        }
    }

    pub fn info(&self, m: MethodSym) -> &MethodInfo {
        &self.infos[m.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.infos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.infos.is_empty()
    }

    pub fn unresolved(&self) -> usize {
        self.unresolved
    }

    fn name_id(&self, name: &str) -> Option<u32> {
        self.names.get(name).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSeed {
    pub template_object: ObjId,
    pub pattern: usize,
    pub members: BTreeSet<ObjId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectGroup {
    pub id: String,
    /// Index into the pattern set the grouping ran on.
    pub pattern: usize,
    pub template_object: ObjId,
    /// Sorted.
    pub members: Vec<ObjId>,
}

impl ObjectGroup {
    pub fn contains(&self, o: ObjId) -> bool {
        self.members.binary_search(&o).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupingResult {
    pub mode: GroupingMode,
    pub groups: Vec<ObjectGroup>,
}

/// Per-pattern lookup tables over trace method symbols.
struct PatternView {
    category: Category,
    /// Symbols that execute the template method.
    templates: Vec<MethodSym>,
    /// Same name as some hook.
    hook_named: Vec<bool>,
    /// Chain membership under the active mode.
    chain: Vec<bool>,
    /// Same name and declaring type as some hook (connection message test).
    hook_exact: Vec<bool>,
}

impl PatternView {
    fn new(p: &MetaPattern, model: &CodeModel, table: &MethodTable, mode: GroupingMode) -> Self {
        let hook_names: HashSet<u32> = p
            .hooks
            .methods
            .iter()
            .filter_map(|h| table.name_id(&model.method(*h).name))
            .collect();
        let hook_pairs: HashSet<(u32, TypeIdx)> = p
            .hooks
            .methods
            .iter()
            .filter_map(|h| Some((table.name_id(&model.method(*h).name)?, model.method_type(*h))))
            .collect();
        let n = table.len();
        let mut templates = Vec::new();
        let mut hook_named = vec![false; n];
        let mut hook_exact = vec![false; n];
        for i in 0..n {
            let info = table.info(MethodSym(i as u32));
            if info.model == Some(p.template_method) {
                templates.push(MethodSym(i as u32));
            }
            hook_named[i] = hook_names.contains(&info.name);
            hook_exact[i] = info
                .declaring_type
                .is_some_and(|t| hook_pairs.contains(&(info.name, t)));
        }
        let chain = match mode {
            GroupingMode::Mp => hook_exact.clone(),
            GroupingMode::MpD => hook_named.clone(),
        };
        Self {
            category: p.ptype.category,
            templates,
            hook_named,
            chain,
            hook_exact,
        }
    }

    fn method(&self, trace: &Trace, idx: usize) -> usize {
        trace.event(idx).method().expect("entry event").0 as usize
    }
}

/// Walks back over self-calls to the innermost enclosing entry that is not
/// a self-call.
pub fn rewind_self_calls(trace: &Trace, mut idx: usize) -> usize {
    while trace.is_self_call(idx) {
        idx = trace.parent(idx).expect("self-call has a parent");
    }
    idx
}

struct ChainWalk<'a> {
    targets: &'a HashSet<usize>,
    covered: &'a mut HashSet<usize>,
}

/// Chain traversal seed for the activation starting at entry `entry`.
fn chain_seed(
    trace: &Trace,
    view: &PatternView,
    entry: usize,
    include_initial: bool,
    mut walk: Option<ChainWalk<'_>>,
) -> Vec<ObjId> {
    let mut members = Vec::new();
    let template_object = trace.event(entry).callee().expect("entry event");
    if include_initial && view.hook_named[view.method(trace, entry)] {
        members.push(template_object);
    }
    let list = trace.thread_events(trace.event(entry).thread);
    let span = trace.activation_span(entry);
    let mut stack: Vec<bool> = Vec::new();
    let mut blockers = 0usize;
    for &i in &list[span.start + 1..span.end] {
        let i = i as usize;
        match trace.event(i).kind {
            EventKind::Entry { method, object, .. } => {
                let is_self = trace.is_self_call(i);
                let blocks = !is_self && !view.chain[method.0 as usize];
                stack.push(blocks);
                if blocks {
                    blockers += 1;
                }
                if blockers == 0 {
                    members.push(object);
                    if let Some(w) = walk.as_mut() {
                        if !is_self && w.targets.contains(&i) {
                            w.covered.insert(i);
                        }
                    }
                }
            }
            EventKind::Exit { .. } => {
                if let Some(true) = stack.pop() {
                    blockers -= 1;
                }
            }
            _ => {}
        }
    }
    members
}

/// Hook receivers addressed directly by the template object inside the
/// activation (MP connection rule).
fn connection_seed(trace: &Trace, view: &PatternView, entry: usize) -> Vec<ObjId> {
    let template_object = trace.event(entry).callee().expect("entry event");
    let list = trace.thread_events(trace.event(entry).thread);
    let span = trace.activation_span(entry);
    let mut members = Vec::new();
    for &i in &list[span.start + 1..span.end] {
        let i = i as usize;
        if let EventKind::Entry { method, object, .. } = trace.event(i).kind {
            if view.hook_exact[method.0 as usize] && trace.caller_of(i) == Some(template_object) {
                members.push(object);
            }
        }
    }
    members
}

/// Seed for one activation of a recursive pattern.
pub fn seed_recursive(
    trace: &Trace,
    model: &CodeModel,
    table: &MethodTable,
    entry: usize,
    pattern: &MetaPattern,
    pattern_index: usize,
    mode: GroupingMode,
) -> GroupSeed {
    let view = PatternView::new(pattern, model, table, mode);
    let start = rewind_self_calls(trace, entry);
    let members = chain_seed(trace, &view, start, true, None);
    GroupSeed {
        template_object: trace.event(start).callee().expect("entry event"),
        pattern: pattern_index,
        members: members.into_iter().collect(),
    }
}

/// Seed for one activation of a connection pattern.
pub fn seed_connection(
    trace: &Trace,
    model: &CodeModel,
    table: &MethodTable,
    entry: usize,
    pattern: &MetaPattern,
    pattern_index: usize,
    mode: GroupingMode,
) -> GroupSeed {
    let view = PatternView::new(pattern, model, table, mode);
    let (template_object, members) = connection_members(trace, &view, entry, mode);
    GroupSeed {
        template_object,
        pattern: pattern_index,
        members: members.into_iter().collect(),
    }
}

fn connection_members(trace: &Trace, view: &PatternView, entry: usize, mode: GroupingMode) -> (ObjId, Vec<ObjId>) {
    match mode {
        GroupingMode::Mp => (
            trace.event(entry).callee().expect("entry event"),
            connection_seed(trace, view, entry),
        ),
        GroupingMode::MpD => {
            let start = rewind_self_calls(trace, entry);
            let template_object = trace.event(start).callee().expect("entry event");
            let mut members = chain_seed(trace, view, start, false, None);
            members.retain(|o| *o != template_object);
            (template_object, members)
        }
    }
}

struct Accumulated {
    template_object: ObjId,
    first: usize,
    members: BTreeSet<ObjId>,
}

fn group_one_pattern(
    trace: &Trace,
    view: &PatternView,
    entries: &HashMap<MethodSym, Vec<u32>>,
    mode: GroupingMode,
) -> Vec<Accumulated> {
    if view.category == Category::Unification {
        return Vec::new();
    }
    let mut activations: Vec<usize> = view
        .templates
        .iter()
        .filter_map(|s| entries.get(s))
        .flatten()
        .map(|&i| i as usize)
        .collect();
    activations.sort_unstable();

    let mut by_template: HashMap<ObjId, Accumulated> = HashMap::new();
    let mut add = |template_object: ObjId, first: usize, members: Vec<ObjId>| {
        let acc = by_template.entry(template_object).or_insert_with(|| Accumulated {
            template_object,
            first,
            members: BTreeSet::new(),
        });
        acc.first = acc.first.min(first);
        acc.members.extend(members);
    };

    if view.category.is_recursive() {
        let mut targets: Vec<usize> = activations.iter().map(|&a| rewind_self_calls(trace, a)).collect();
        targets.sort_unstable();
        targets.dedup();
        let target_set: HashSet<usize> = targets.iter().copied().collect();
        let mut covered: HashSet<usize> = HashSet::new();
        for &t in &targets {
            if covered.contains(&t) {
                continue;
            }
            let walk = ChainWalk {
                targets: &target_set,
                covered: &mut covered,
            };
            let members = chain_seed(trace, view, t, true, Some(walk));
            add(trace.event(t).callee().expect("entry event"), t, members);
        }
    } else {
        let mut seen: HashSet<usize> = HashSet::new();
        for &a in &activations {
            let key = match mode {
                GroupingMode::Mp => a,
                GroupingMode::MpD => rewind_self_calls(trace, a),
            };
            if !seen.insert(key) {
                continue;
            }
            let (template_object, members) = connection_members(trace, view, a, mode);
            add(template_object, key, members);
        }
    }

    let mut groups: Vec<Accumulated> = by_template.into_values().filter(|g| !g.members.is_empty()).collect();
    groups.sort_by_key(|g| (g.first, g.template_object));
    prune(groups)
}

/// Drops duplicate member sets (keeping the earliest) and strict subsets.
fn prune(groups: Vec<Accumulated>) -> Vec<Accumulated> {
    let mut unique: Vec<Accumulated> = Vec::with_capacity(groups.len());
    let mut seen: HashSet<Vec<ObjId>> = HashSet::new();
    for g in groups {
        if seen.insert(g.members.iter().copied().collect()) {
            unique.push(g);
        }
    }
    // index: object -> groups containing it
    let mut containing: HashMap<ObjId, Vec<usize>> = HashMap::new();
    for (i, g) in unique.iter().enumerate() {
        for o in &g.members {
            containing.entry(*o).or_default().push(i);
        }
    }
    let keep: Vec<bool> = unique
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let first = g.members.iter().next().expect("non-empty");
            !containing[first].iter().any(|&j| {
                j != i && unique[j].members.len() > g.members.len() && g.members.is_subset(&unique[j].members)
            })
        })
        .collect();
    unique
        .into_iter()
        .zip(keep)
        .filter_map(|(g, k)| k.then_some(g))
        .collect()
}

/// Groups objects for every pattern. Patterns are processed in parallel;
/// the output order depends only on the inputs.
pub fn group_objects(trace: &Trace, model: &CodeModel, patterns: &PatternSet, mode: GroupingMode) -> GroupingResult {
    let table = MethodTable::new(trace, model);
    let views: Vec<PatternView> = patterns
        .patterns
        .iter()
        .map(|p| PatternView::new(p, model, &table, mode))
        .collect();

    let wanted: HashSet<MethodSym> = views.iter().flat_map(|v| v.templates.iter().copied()).collect();
    let mut entries: HashMap<MethodSym, Vec<u32>> = HashMap::new();
    if !wanted.is_empty() {
        for (i, e) in trace.events().iter().enumerate() {
            if let EventKind::Entry { method, .. } = e.kind {
                if wanted.contains(&method) {
                    entries.entry(method).or_default().push(i as u32);
                }
            }
        }
    }

    let per_pattern: Vec<Vec<Accumulated>> = views
        .par_iter()
        .map(|v| group_one_pattern(trace, v, &entries, mode))
        .collect();

    let mut groups = Vec::new();
    for (p, accs) in per_pattern.into_iter().enumerate() {
        for acc in accs {
            groups.push(ObjectGroup {
                id: format!("g{}", groups.len() + 1),
                pattern: p,
                template_object: acc.template_object,
                members: acc.members.into_iter().collect(),
            });
        }
    }
    GroupingResult { mode, groups }
}

// ---------------------------------------------------------------------------
// Groups file

#[derive(Debug, Serialize, Deserialize)]
struct GroupsFile {
    mode: GroupingMode,
    groups: Vec<GroupEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GroupEntry {
    id: String,
    pattern: String,
    template_method: String,
    template_object: String,
    members: Vec<String>,
}

impl GroupingResult {
    pub fn to_json(&self, trace: &Trace, model: &CodeModel, patterns: &PatternSet) -> String {
        let file = GroupsFile {
            mode: self.mode,
            groups: self
                .groups
                .iter()
                .map(|g| GroupEntry {
                    id: g.id.clone(),
                    pattern: PatternSet::pattern_id(g.pattern),
                    template_method: model.method(patterns.patterns[g.pattern].template_method).id.clone(),
                    template_object: trace.object(g.template_object).id.clone(),
                    members: g.members.iter().map(|o| trace.object(*o).id.clone()).collect(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("groups serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str, trace: &Trace, patterns: &PatternSet) -> Result<Self> {
        let file: GroupsFile = serde_json::from_str(text)
            .map_err(|e| Error::parse(origin, format!("{}:{}", e.line(), e.column()), e.to_string()))?;
        let obj = |i: usize, id: &str| {
            trace
                .object_id(id)
                .ok_or_else(|| Error::integrity(origin, format!("groups[{i}]"), format!("unknown object '{id}'")))
        };
        let mut groups = Vec::with_capacity(file.groups.len());
        for (i, g) in file.groups.iter().enumerate() {
            let pattern = g
                .pattern
                .strip_prefix('p')
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|n| *n >= 1 && *n <= patterns.patterns.len())
                .map(|n| n - 1)
                .ok_or_else(|| {
                    Error::integrity(
                        origin,
                        format!("groups[{i}].pattern"),
                        format!("unknown pattern '{}'", g.pattern),
                    )
                })?;
            let mut members = g.members.iter().map(|m| obj(i, m)).collect::<Result<Vec<_>>>()?;
            members.sort_unstable();
            members.dedup();
            groups.push(ObjectGroup {
                id: g.id.clone(),
                pattern,
                template_object: obj(i, &g.template_object)?,
                members,
            });
        }
        Ok(Self {
            mode: file.mode,
            groups,
        })
    }

    pub fn load(path: impl AsRef<Path>, trace: &Trace, patterns: &PatternSet) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string(), trace, patterns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS_MODEL: &str = include_str!("../tests/fixtures/fs/model.json");
    const FS_TRACE: &str = include_str!("../tests/fixtures/fs/trace.txt");

    fn ids(trace: &Trace, g: &ObjectGroup) -> Vec<String> {
        g.members.iter().map(|o| trace.object(*o).id.clone()).collect()
    }

    fn run(model: &str, trace: &str, mode: GroupingMode) -> (CodeModel, Trace, PatternSet, GroupingResult) {
        let m = CodeModel::from_json(model, "model.json").unwrap();
        let t = Trace::from_text(trace).unwrap();
        let p = PatternSet::detect(&m);
        let g = group_objects(&t, &m, &p, mode);
        (m, t, p, g)
    }

    #[test]
    fn file_system_mp() {
        let (_, t, p, g) = run(FS_MODEL, FS_TRACE, GroupingMode::Mp);
        assert_eq!(p.patterns.len(), 1);
        assert_eq!(g.groups.len(), 1);
        assert_eq!(ids(&t, &g.groups[0]), ["d1", "d2", "f1", "f2"]);
        assert_eq!(t.object(g.groups[0].template_object).id, "d1");
        assert_eq!(g.groups[0].id, "g1");
    }

    #[test]
    fn file_system_mpd_absorbs_delegate() {
        let (_, t, _, g) = run(FS_MODEL, FS_TRACE, GroupingMode::MpD);
        assert_eq!(g.groups.len(), 1);
        assert_eq!(ids(&t, &g.groups[0]), ["d1", "d2", "f1", "f2", "b"]);
    }

    const OBSERVER: &str = r#"{
      "types": [
        {"id": "Model", "name": "Model", "kind": "class"},
        {"id": "View", "name": "View", "kind": "interface"},
        {"id": "Chart", "name": "Chart", "kind": "class", "supertype_ids": ["View"]},
        {"id": "Table", "name": "Table", "kind": "class", "supertype_ids": ["View"]},
        {"id": "Log", "name": "Log", "kind": "class"}
      ],
      "methods": [
        {"id": "Model#notify", "name": "notify", "declaring_type": "Model"},
        {"id": "View#update", "name": "update", "declaring_type": "View"},
        {"id": "Chart#update", "name": "update", "declaring_type": "Chart", "overrides": ["View#update"]},
        {"id": "Table#update", "name": "update", "declaring_type": "Table", "overrides": ["View#update"]},
        {"id": "Log#write", "name": "write", "declaring_type": "Log"}
      ],
      "fields": [
        {"id": "Model.views", "name": "views", "declaring_type": "Model", "declared_type": "View", "is_collection": true}
      ],
      "invocations": [
        {"caller_method": "Model#notify", "callee_method": "View#update", "receiver_kind": "other"}
      ]
    }"#;

    #[test]
    fn observer_activations_unify() {
        let trace = "\
O m Model
O v1 Chart
O v2 Table
O v3 Chart
E 1 main Model#notify m
E 2 main Chart#update v1
X 3 main Chart#update v1
E 4 main Table#update v2
X 5 main Table#update v2
X 6 main Model#notify m
E 7 main Model#notify m
E 8 main Chart#update v3
X 9 main Chart#update v3
X 10 main Model#notify m
";
        for mode in [GroupingMode::Mp, GroupingMode::MpD] {
            let (_, t, p, g) = run(OBSERVER, trace, mode);
            assert_eq!(p.patterns[0].ptype.short_name(), "1N-Con");
            assert_eq!(g.groups.len(), 1, "{mode}");
            assert_eq!(ids(&t, &g.groups[0]), ["v1", "v2", "v3"]);
            assert_eq!(t.object(g.groups[0].template_object).id, "m");
        }
    }

    #[test]
    fn connection_mp_requires_direct_message_from_template_object() {
        // v1 forwards update to v2; in MP only v1 is addressed by m
        let trace = "\
O m Model
O v1 Chart
O v2 Table
E 1 main Model#notify m
E 2 main Chart#update v1
E 3 main Table#update v2
X 4 main Table#update v2
X 5 main Chart#update v1
X 6 main Model#notify m
";
        let (_, t, _, g) = run(OBSERVER, trace, GroupingMode::Mp);
        assert_eq!(ids(&t, &g.groups[0]), ["v1"]);
        let (_, t, _, g) = run(OBSERVER, trace, GroupingMode::MpD);
        assert_eq!(ids(&t, &g.groups[0]), ["v1", "v2"]);
    }

    #[test]
    fn chain_interrupted_by_other_call() {
        let trace = "\
O m Model
O v1 Chart
O l Log
O v2 Table
E 1 main Model#notify m
E 2 main Log#write l
E 3 main Table#update v2
X 4 main Table#update v2
X 5 main Log#write l
E 6 main Chart#update v1
X 7 main Chart#update v1
X 8 main Model#notify m
";
        let (_, t, _, g) = run(OBSERVER, trace, GroupingMode::MpD);
        assert_eq!(ids(&t, &g.groups[0]), ["v1"]);
    }

    #[test]
    fn differently_named_template_excludes_first_receiver() {
        let model = r#"{
          "types": [
            {"id": "Node", "name": "Node", "kind": "class"},
            {"id": "Leaf", "name": "Leaf", "kind": "class", "supertype_ids": ["Node"]},
            {"id": "Tree", "name": "Tree", "kind": "class", "supertype_ids": ["Node"]}
          ],
          "methods": [
            {"id": "Node#size", "name": "size", "declaring_type": "Node"},
            {"id": "Leaf#size", "name": "size", "declaring_type": "Leaf", "overrides": ["Node#size"]},
            {"id": "Tree#size", "name": "size", "declaring_type": "Tree", "overrides": ["Node#size"]},
            {"id": "Tree#computeAll", "name": "computeAll", "declaring_type": "Tree"}
          ],
          "fields": [
            {"id": "Tree.kids", "name": "kids", "declaring_type": "Tree", "declared_type": "Node", "is_collection": true}
          ],
          "invocations": [
            {"caller_method": "Tree#computeAll", "callee_method": "Node#size", "receiver_kind": "other"}
          ]
        }"#;
        let trace = "\
O t Tree
O x Leaf
O y Leaf
E 1 main Tree#computeAll t
E 2 main Leaf#size x
X 3 main Leaf#size x
E 4 main Leaf#size y
X 5 main Leaf#size y
X 6 main Tree#computeAll t
";
        let (_, t, p, g) = run(model, trace, GroupingMode::Mp);
        assert_eq!(p.patterns.len(), 1);
        assert!(p.patterns[0].ptype.category.is_recursive());
        assert_eq!(ids(&t, &g.groups[0]), ["x", "y"]);
    }

    #[test]
    fn other_threads_do_not_leak_into_a_seed() {
        let trace = "\
O m Model
O v1 Chart
O v2 Table
E 1 t1 Model#notify m
E 2 t2 Table#update v2
E 3 t1 Chart#update v1
X 4 t2 Table#update v2
X 5 t1 Chart#update v1
X 6 t1 Model#notify m
";
        for mode in [GroupingMode::Mp, GroupingMode::MpD] {
            let (_, t, _, g) = run(OBSERVER, trace, mode);
            assert_eq!(ids(&t, &g.groups[0]), ["v1"]);
        }
    }

    #[test]
    fn groups_json_round_trip() {
        let (m, t, p, g) = run(FS_MODEL, FS_TRACE, GroupingMode::MpD);
        let text = g.to_json(&t, &m, &p);
        let back = GroupingResult::from_json(&text, "g.json", &t, &p).unwrap();
        assert_eq!(back, g);
        assert!(text.contains("\"mode\": \"mpd\""));
    }

    #[test]
    fn unknown_object_in_groups_file() {
        let (_, t, p, _) = run(FS_MODEL, FS_TRACE, GroupingMode::Mp);
        let text = r#"{"mode": "mp", "groups": [{"id": "g1", "pattern": "p1",
            "template_method": "Dir#getDiskUsage", "template_object": "d1", "members": ["ghost"]}]}"#;
        let err = GroupingResult::from_json(text, "g.json", &t, &p).unwrap_err();
        assert!(matches!(err, Error::Integrity { .. }), "{err}");
    }

    #[test]
    fn unification_patterns_yield_no_groups() {
        let model = r#"{
          "types": [
            {"id": "Base", "name": "Base", "kind": "class"},
            {"id": "Sub", "name": "Sub", "kind": "class", "supertype_ids": ["Base"]}
          ],
          "methods": [
            {"id": "Base#run", "name": "run", "declaring_type": "Base"},
            {"id": "Base#step", "name": "step", "declaring_type": "Base"},
            {"id": "Sub#step", "name": "step", "declaring_type": "Sub", "overrides": ["Base#step"]}
          ],
          "invocations": [
            {"caller_method": "Base#run", "callee_method": "Base#step", "receiver_kind": "this_or_super"}
          ]
        }"#;
        let trace = "\
O s Sub
E 1 main Base#run s
E 2 main Sub#step s
X 3 main Sub#step s
X 4 main Base#run s
";
        let (_, _, p, g) = run(model, trace, GroupingMode::MpD);
        assert_eq!(p.patterns[0].ptype.short_name(), "Uni");
        assert!(g.groups.is_empty());
    }
}
