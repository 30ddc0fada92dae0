//! Summarized sequence diagrams: selects groups holding important objects,
//! optionally merges them to class level, routes every call to a lifeline
//! and keeps only inter-lifeline messages.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::Serialize;

use crate::detect::PatternSet;
use crate::group::{GroupingResult, MethodTable};
use crate::model::CodeModel;
use crate::ranking::Ranking;
use crate::trace::{EventKind, ObjId, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Instance,
    #[default]
    Class,
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "instance" => Ok(Level::Instance),
            "class" => Ok(Level::Class),
            other => Err(format!("unknown level '{other}' (expected instance or class)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    PlantUml,
    Mermaid,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plantuml" => Ok(Format::PlantUml),
            "mermaid" => Ok(Format::Mermaid),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected plantuml, mermaid or json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummarizeOptions {
    pub threshold: f64,
    pub level: Level,
    pub include_external: bool,
    pub returns: bool,
}

impl Default for SummarizeOptions {
    fn default() -> Self {
        Self {
            threshold: 0.0,
            level: Level::Class,
            include_external: false,
            returns: false,
        }
    }
}

/// A group chosen for display.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisplayGroup {
    /// Group id from the grouping, or `s:<object>` for a singleton.
    pub key: String,
    /// Sorted.
    pub members: Vec<ObjId>,
    /// Patterns the constituent groups were built for.
    pub patterns: BTreeSet<usize>,
}

impl DisplayGroup {
    pub fn type_names<'t>(&self, trace: &'t Trace) -> BTreeSet<&'t str> {
        self.members
            .iter()
            .map(|o| trace.object(*o).type_name.as_str())
            .collect()
    }
}

/// Groups containing an object ranked above `threshold`, plus a singleton
/// for every such object that no group contains. Groups keep grouping
/// order; singletons follow in ranking order.
pub fn select_important_groups(
    trace: &Trace,
    ranking: &Ranking,
    threshold: f64,
    grouping: &GroupingResult,
) -> Vec<DisplayGroup> {
    let mut containing: HashMap<ObjId, Vec<usize>> = HashMap::new();
    for (i, g) in grouping.groups.iter().enumerate() {
        for o in &g.members {
            containing.entry(*o).or_default().push(i);
        }
    }
    let mut chosen = vec![false; grouping.groups.len()];
    let mut singletons = Vec::new();
    for entry in ranking.above(threshold) {
        match containing.get(&entry.object) {
            Some(gs) => gs.iter().for_each(|&g| chosen[g] = true),
            None => singletons.push(entry.object),
        }
    }
    let mut out: Vec<DisplayGroup> = grouping
        .groups
        .iter()
        .zip(&chosen)
        .filter(|(_, c)| **c)
        .map(|(g, _)| DisplayGroup {
            key: g.id.clone(),
            members: g.members.clone(),
            patterns: BTreeSet::from([g.pattern]),
        })
        .collect();
    out.extend(singletons.into_iter().map(|o| DisplayGroup {
        key: format!("s:{}", trace.object(o).id),
        members: vec![o],
        patterns: BTreeSet::new(),
    }));
    out
}

/// Unions groups whose member type-name sets are equal. The merged group
/// takes the position of its first constituent and the smallest key.
pub fn to_class_level(trace: &Trace, groups: Vec<DisplayGroup>) -> Vec<DisplayGroup> {
    let mut slot: HashMap<Vec<String>, usize> = HashMap::new();
    let mut out: Vec<DisplayGroup> = Vec::new();
    for g in groups {
        let types: Vec<String> = g.type_names(trace).into_iter().map(str::to_string).collect();
        match slot.get(&types) {
            Some(&i) => {
                let m = &mut out[i];
                if g.key < m.key {
                    m.key = g.key;
                }
                let members: BTreeSet<ObjId> = m.members.iter().chain(&g.members).copied().collect();
                m.members = members.into_iter().collect();
                m.patterns.extend(g.patterns);
            }
            None => {
                slot.insert(types, out.len());
                out.push(g);
            }
        }
    }
    out
}

/// Selection followed by the class-level merge when requested.
pub fn displayed_groups(
    trace: &Trace,
    ranking: &Ranking,
    grouping: &GroupingResult,
    threshold: f64,
    level: Level,
) -> Vec<DisplayGroup> {
    let selected = select_important_groups(trace, ranking, threshold, grouping);
    match level {
        Level::Instance => selected,
        Level::Class => to_class_level(trace, selected),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Lifeline {
    /// Diagram-local id (`L1`, `L2`, ...), in display order.
    pub id: String,
    pub group_id: String,
    /// `grpK` for multi-member groups, the object id otherwise.
    pub name: String,
    pub group_type_name: String,
    pub level: Level,
    pub members: Vec<String>,
}

impl Lifeline {
    pub fn title(&self) -> String {
        format!("{}:{}", self.name, self.group_type_name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    External,
    Lifeline(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Call,
    Return,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub seq: u64,
    pub from: Endpoint,
    pub to: Endpoint,
    pub label: String,
    pub kind: MessageKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummarizedDiagram {
    pub lifelines: Vec<Lifeline>,
    pub messages: Vec<Message>,
}

/// Most frequent member type; ties go to the smallest name.
pub fn group_type_name(trace: &Trace, members: &[ObjId]) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for o in members {
        *counts.entry(trace.object(*o).type_name.as_str()).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (name, n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((name, n));
        }
    }
    best.map(|(n, _)| n.to_string()).unwrap_or_default()
}

struct Router {
    /// object -> displayed groups containing it, sorted by key
    by_object: HashMap<ObjId, Vec<usize>>,
    /// trace method symbol -> patterns it is template or hook method of
    roles: Vec<Vec<usize>>,
}

impl Router {
    fn new(trace: &Trace, model: &CodeModel, patterns: &PatternSet, groups: &[DisplayGroup]) -> Self {
        let mut by_object: HashMap<ObjId, Vec<usize>> = HashMap::new();
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.sort_by(|a, b| groups[*a].key.cmp(&groups[*b].key));
        for &g in &order {
            for o in &groups[g].members {
                by_object.entry(*o).or_default().push(g);
            }
        }
        let table = MethodTable::new(trace, model);
        let roles = (0..table.len())
            .map(|s| {
                let info = table.info(crate::trace::MethodSym(s as u32));
                match info.model {
                    Some(m) => patterns
                        .patterns
                        .iter()
                        .enumerate()
                        .filter(|(_, p)| p.template_method == m || p.hooks.contains(m))
                        .map(|(i, _)| i)
                        .collect(),
                    None => Vec::new(),
                }
            })
            .collect();
        Self { by_object, roles }
    }

    /// Displayed group receiving entry `idx`.
    fn route(&self, trace: &Trace, groups: &[DisplayGroup], idx: usize) -> Option<usize> {
        let e = trace.event(idx);
        let EventKind::Entry { method, object, .. } = e.kind else {
            return None;
        };
        let candidates = self.by_object.get(&object)?;
        let roles = &self.roles[method.0 as usize];
        if !roles.is_empty() {
            if let Some(&g) = candidates
                .iter()
                .find(|&&g| roles.iter().any(|p| groups[g].patterns.contains(p)))
            {
                return Some(g);
            }
        }
        candidates.first().copied()
    }
}

/// Endpoints of the call made by entry `idx`, if it is displayed.
fn call_endpoints(
    trace: &Trace,
    router: &Router,
    groups: &[DisplayGroup],
    idx: usize,
    include_external: bool,
) -> Option<(Endpoint, usize)> {
    let to = router.route(trace, groups, idx)?;
    let from = match trace.parent(idx).and_then(|p| router.route(trace, groups, p)) {
        Some(g) => Endpoint::Lifeline(g),
        None if include_external => Endpoint::External,
        None => return None,
    };
    (from != Endpoint::Lifeline(to)).then_some((from, to))
}

/// Builds the diagram for already selected groups.
pub fn emit_diagram(
    trace: &Trace,
    model: &CodeModel,
    patterns: &PatternSet,
    groups: &[DisplayGroup],
    options: &SummarizeOptions,
) -> SummarizedDiagram {
    let router = Router::new(trace, model, patterns, groups);
    let mut messages = Vec::new();
    for (i, e) in trace.events().iter().enumerate() {
        match e.kind {
            EventKind::Entry { method, .. } => {
                if let Some((from, to)) = call_endpoints(trace, &router, groups, i, options.include_external) {
                    messages.push(Message {
                        seq: e.seq,
                        from,
                        to: Endpoint::Lifeline(to),
                        label: call_label(trace, method),
                        kind: MessageKind::Call,
                    });
                }
            }
            EventKind::Exit { method, .. } if options.returns => {
                let Some(entry) = trace.partner(i) else { continue };
                if let Some((from, to)) = call_endpoints(trace, &router, groups, entry, options.include_external) {
                    messages.push(Message {
                        seq: e.seq,
                        from: Endpoint::Lifeline(to),
                        to: from,
                        label: call_label(trace, method),
                        kind: MessageKind::Return,
                    });
                }
            }
            _ => {}
        }
    }

    // display order: first appearance in a message, then the rest
    let mut position: Vec<Option<usize>> = vec![None; groups.len()];
    let mut order = Vec::with_capacity(groups.len());
    let mut place = |g: usize, order: &mut Vec<usize>| {
        if position[g].is_none() {
            position[g] = Some(order.len());
            order.push(g);
        }
    };
    for m in &messages {
        for end in [m.from, m.to] {
            if let Endpoint::Lifeline(g) = end {
                place(g, &mut order);
            }
        }
    }
    for g in 0..groups.len() {
        place(g, &mut order);
    }
    let remap = |end: Endpoint| match end {
        Endpoint::Lifeline(g) => Endpoint::Lifeline(position[g].expect("placed")),
        Endpoint::External => Endpoint::External,
    };
    for m in &mut messages {
        m.from = remap(m.from);
        m.to = remap(m.to);
    }

    let mut grp = 0;
    let lifelines = order
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let group = &groups[g];
            let name = if group.members.len() == 1 {
                trace.object(group.members[0]).id.clone()
            } else {
                grp += 1;
                format!("grp{grp}")
            };
            Lifeline {
                id: format!("L{}", i + 1),
                group_id: group.key.clone(),
                name,
                group_type_name: group_type_name(trace, &group.members),
                level: options.level,
                members: group.members.iter().map(|o| trace.object(*o).id.clone()).collect(),
            }
        })
        .collect();
    SummarizedDiagram { lifelines, messages }
}

fn call_label(trace: &Trace, method: crate::trace::MethodSym) -> String {
    let id = trace.method_name(method);
    let simple = id.rsplit_once('#').map_or(id, |(_, n)| n);
    format!("{simple}()")
}

/// Selection, optional class-level merge and message emission.
pub fn summarize(
    trace: &Trace,
    model: &CodeModel,
    patterns: &PatternSet,
    grouping: &GroupingResult,
    ranking: &Ranking,
    options: &SummarizeOptions,
) -> SummarizedDiagram {
    let groups = displayed_groups(trace, ranking, grouping, options.threshold, options.level);
    emit_diagram(trace, model, patterns, &groups, options)
}

impl SummarizedDiagram {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::PlantUml => self.to_plantuml(),
            Format::Mermaid => self.to_mermaid(),
            Format::Json => self.to_json(),
        }
    }

    fn endpoint_id(&self, end: Endpoint) -> &str {
        match end {
            Endpoint::Lifeline(i) => &self.lifelines[i].id,
            Endpoint::External => "EXTERNAL",
        }
    }

    pub fn to_plantuml(&self) -> String {
        let mut s = String::from("@startuml\n");
        for l in &self.lifelines {
            let _ = writeln!(s, "participant \"{}\" as {}", l.title(), l.id);
        }
        for m in &self.messages {
            let arrow = match m.kind {
                MessageKind::Call => "->",
                MessageKind::Return => "-->",
            };
            let line = match (m.from, m.to) {
                (Endpoint::External, to) => format!("[{arrow} {}", self.endpoint_id(to)),
                (from, Endpoint::External) => format!("{} {arrow}]", self.endpoint_id(from)),
                (from, to) => format!("{} {arrow} {}", self.endpoint_id(from), self.endpoint_id(to)),
            };
            let _ = writeln!(s, "{line} : {}", m.label);
        }
        s.push_str("@enduml\n");
        s
    }

    pub fn to_mermaid(&self) -> String {
        let mut s = String::from("sequenceDiagram\n");
        if self
            .messages
            .iter()
            .any(|m| m.from == Endpoint::External || m.to == Endpoint::External)
        {
            s.push_str("    participant EXTERNAL\n");
        }
        for l in &self.lifelines {
            let _ = writeln!(s, "    participant {} as {}", l.id, l.title());
        }
        for m in &self.messages {
            let arrow = match m.kind {
                MessageKind::Call => "->>",
                MessageKind::Return => "-->>",
            };
            let _ = writeln!(
                s,
                "    {}{arrow}{}: {}",
                self.endpoint_id(m.from),
                self.endpoint_id(m.to),
                m.label
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Msg<'a> {
            seq: u64,
            from: &'a str,
            to: &'a str,
            label: &'a str,
            kind: MessageKind,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            lifelines: &'a [Lifeline],
            messages: Vec<Msg<'a>>,
        }
        let doc = Doc {
            lifelines: &self.lifelines,
            messages: self
                .messages
                .iter()
                .map(|m| Msg {
                    seq: m.seq,
                    from: self.endpoint_id(m.from),
                    to: self.endpoint_id(m.to),
                    label: &m.label,
                    kind: m.kind,
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("diagram serialize");
        s.push('\n');
        s
    }
}

impl fmt::Display for SummarizedDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_plantuml())
    }
}
