//! Template/hook meta-pattern detection over a [`CodeModel`].
//!
//! Hook sets are the connected components of the override relation, with
//! constructors and methods of library-root types removed first. A meta
//! pattern is recorded for every invocation site whose callee is a hook.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CodeModel, InvocationSite, MethodIdx, ReceiverKind};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HookSet {
    /// Sorted, at least two members.
    pub methods: Vec<MethodIdx>,
}

impl HookSet {
    pub fn contains(&self, m: MethodIdx) -> bool {
        self.methods.binary_search(&m).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Unification,
    RecursiveUnification,
    RecursiveConnection,
    Connection,
}

impl Category {
    pub fn is_recursive(self) -> bool {
        matches!(self, Category::RecursiveUnification | Category::RecursiveConnection)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Multiplicity {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "N")]
    N,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternType {
    pub category: Category,
    pub multiplicity: Multiplicity,
}

impl PatternType {
    pub const fn new(category: Category, multiplicity: Multiplicity) -> Self {
        Self { category, multiplicity }
    }

    /// Short name of the structural pattern, e.g. `1N-RCon`.
    pub fn short_name(self) -> &'static str {
        use Category::*;
        use Multiplicity::*;
        match (self.category, self.multiplicity) {
            (Unification, _) => "Uni",
            (RecursiveUnification, One) => "11-RUni",
            (RecursiveUnification, N) => "1N-RUni",
            (RecursiveConnection, One) => "11-RCon",
            (RecursiveConnection, N) => "1N-RCon",
            (Connection, One) => "11-Con",
            (Connection, N) => "1N-Con",
        }
    }

    /// All seven structural patterns.
    pub const ALL: [PatternType; 7] = [
        PatternType::new(Category::Unification, Multiplicity::One),
        PatternType::new(Category::RecursiveUnification, Multiplicity::One),
        PatternType::new(Category::RecursiveUnification, Multiplicity::N),
        PatternType::new(Category::RecursiveConnection, Multiplicity::One),
        PatternType::new(Category::RecursiveConnection, Multiplicity::N),
        PatternType::new(Category::Connection, Multiplicity::One),
        PatternType::new(Category::Connection, Multiplicity::N),
    ];
}

impl fmt::Display for PatternType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MetaPattern {
    pub template_method: MethodIdx,
    pub hooks: HookSet,
    pub ptype: PatternType,
}

/// Detected hook sets plus the patterns built on them, in a stable order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    pub patterns: Vec<MetaPattern>,
}

impl PatternSet {
    pub fn detect(model: &CodeModel) -> Self {
        let hooks = detect_hooks(model);
        Self {
            patterns: detect_meta_patterns(model, &hooks),
        }
    }

    pub fn pattern_id(index: usize) -> String {
        format!("p{}", index + 1)
    }
}

pub fn detect_hooks(model: &CodeModel) -> Vec<HookSet> {
    let n = model.methods().len();
    let eligible: Vec<bool> = (0..n)
        .map(|i| {
            let m = MethodIdx(i as u32);
            let decl = model.method(m);
            !decl.is_constructor && !model.type_decl(model.method_type(m)).is_library_root
        })
        .collect();

    let mut uf = UnionFind::new(n);
    let mut linked = vec![false; n];
    for (i, ok) in eligible.iter().enumerate() {
        if !ok {
            continue;
        }
        for sup in model.overrides(MethodIdx(i as u32)) {
            let s = sup.0 as usize;
            if eligible[s] {
                uf.union(i, s);
                linked[i] = true;
                linked[s] = true;
            }
        }
    }

    let mut by_root: HashMap<usize, Vec<MethodIdx>> = HashMap::new();
    for i in (0..n).filter(|&i| linked[i]) {
        by_root.entry(uf.find(i)).or_default().push(MethodIdx(i as u32));
    }
    let mut sets: Vec<HookSet> = by_root
        .into_values()
        .map(|mut methods| {
            methods.sort_unstable();
            HookSet { methods }
        })
        .collect();
    sets.sort_unstable();
    sets
}

pub fn detect_meta_patterns(model: &CodeModel, hooks: &[HookSet]) -> Vec<MetaPattern> {
    let mut owner: HashMap<MethodIdx, usize> = HashMap::new();
    for (i, h) in hooks.iter().enumerate() {
        for m in &h.methods {
            owner.insert(*m, i);
        }
    }
    let mut found: BTreeSet<(MethodIdx, usize, PatternType)> = BTreeSet::new();
    for site in model.sites() {
        if let Some(&h) = owner.get(&site.callee) {
            let t = classify(model, site.caller, site.callee, site.receiver);
            found.insert((site.caller, h, t));
        }
    }
    found
        .into_iter()
        .map(|(template_method, h, ptype)| MetaPattern {
            template_method,
            hooks: hooks[h].clone(),
            ptype,
        })
        .collect()
}

/// Classifies the template/hook relationship at one invocation site.
pub fn detect_pattern_type(
    model: &CodeModel,
    template: &str,
    hook: &str,
    site: &InvocationSite,
) -> Result<PatternType> {
    let mt = model.method_idx(template)?;
    let mh = model.method_idx(hook)?;
    if site.caller_method != template || site.callee_method != hook {
        return Err(Error::InvalidArgument(format!(
            "site {} -> {} does not connect {template} to {hook}",
            site.caller_method, site.callee_method
        )));
    }
    Ok(classify(model, mt, mh, site.receiver_kind))
}

fn classify(model: &CodeModel, mt: MethodIdx, mh: MethodIdx, receiver: ReceiverKind) -> PatternType {
    let tt = model.method_type(mt);
    let th = model.method_type(mh);
    if receiver == ReceiverKind::ThisOrSuper {
        return PatternType::new(Category::Unification, Multiplicity::One);
    }
    let multiplicity = multiplicity(model, tt, th);
    let category = if tt == th {
        Category::RecursiveUnification
    } else if model.is_subtype(tt, th) {
        Category::RecursiveConnection
    } else {
        Category::Connection
    };
    PatternType::new(category, multiplicity)
}

/// N iff some field of the template class (declared or inherited) refers to
/// the hook class through a collection.
fn multiplicity(
    model: &CodeModel,
    template_type: crate::model::TypeIdx,
    hook_type: crate::model::TypeIdx,
) -> Multiplicity {
    let mut result = Multiplicity::One;
    for (f, decl) in model.fields_of(template_type) {
        if decl.is_static {
            continue;
        }
        let Some(target) = model.field_target(f) else {
            continue;
        };
        let related = model.is_subtype(target, hook_type) || model.is_subtype(hook_type, target);
        if related && decl.is_collection {
            result = Multiplicity::N;
        }
    }
    result
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

// ---------------------------------------------------------------------------
// Pattern report file

#[derive(Debug, Serialize, Deserialize)]
struct PatternReport {
    patterns: Vec<PatternEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PatternEntry {
    id: String,
    kind: String,
    category: Category,
    multiplicity: Multiplicity,
    template_method: String,
    template_name: String,
    hooks: Vec<String>,
}

impl PatternSet {
    pub fn to_json(&self, model: &CodeModel) -> String {
        let report = PatternReport {
            patterns: self
                .patterns
                .iter()
                .enumerate()
                .map(|(i, p)| PatternEntry {
                    id: Self::pattern_id(i),
                    kind: p.ptype.short_name().to_string(),
                    category: p.ptype.category,
                    multiplicity: p.ptype.multiplicity,
                    template_method: model.method(p.template_method).id.clone(),
                    template_name: model.method(p.template_method).name.clone(),
                    hooks: p.hooks.methods.iter().map(|m| model.method(*m).id.clone()).collect(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str, model: &CodeModel) -> Result<Self> {
        let report: PatternReport = serde_json::from_str(text)
            .map_err(|e| Error::parse(origin, format!("{}:{}", e.line(), e.column()), e.to_string()))?;
        let resolve = |i: usize, what: &str, id: &str| {
            model.method_idx(id).map_err(|_| {
                Error::integrity(
                    origin,
                    format!("patterns[{i}].{what}"),
                    format!("unknown method id '{id}'"),
                )
            })
        };
        let mut patterns = Vec::with_capacity(report.patterns.len());
        for (i, e) in report.patterns.iter().enumerate() {
            let template_method = resolve(i, "template_method", &e.template_method)?;
            let mut methods = e
                .hooks
                .iter()
                .map(|h| resolve(i, "hooks", h))
                .collect::<Result<Vec<_>>>()?;
            methods.sort_unstable();
            methods.dedup();
            patterns.push(MetaPattern {
                template_method,
                hooks: HookSet { methods },
                ptype: PatternType::new(e.category, e.multiplicity),
            });
        }
        Ok(Self { patterns })
    }

    pub fn load(path: impl AsRef<Path>, model: &CodeModel) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string(), model)
    }

    pub fn counts_by_type(&self) -> Vec<(PatternType, usize)> {
        PatternType::ALL
            .iter()
            .map(|t| (*t, self.patterns.iter().filter(|p| p.ptype == *t).count()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CodeModel, InvocationSite};

    fn model(text: &str) -> CodeModel {
        CodeModel::from_json(text, "test").unwrap()
    }

    const FS: &str = r#"{
      "types": [
        {"id": "Object", "name": "java.lang.Object", "kind": "class", "is_library_root": true},
        {"id": "FileBase", "name": "FileBase", "kind": "class", "supertype_ids": ["Object"]},
        {"id": "Dir", "name": "Dir", "kind": "class", "supertype_ids": ["FileBase"]},
        {"id": "File", "name": "File", "kind": "class", "supertype_ids": ["FileBase"]},
        {"id": "B", "name": "B", "kind": "class", "supertype_ids": ["Object"]}
      ],
      "methods": [
        {"id": "Object#toString", "name": "toString", "declaring_type": "Object"},
        {"id": "Object#<init>", "name": "<init>", "declaring_type": "Object", "is_constructor": true},
        {"id": "FileBase#getDiskUsage", "name": "getDiskUsage", "declaring_type": "FileBase"},
        {"id": "Dir#getDiskUsage", "name": "getDiskUsage", "declaring_type": "Dir", "overrides": ["FileBase#getDiskUsage"]},
        {"id": "File#getDiskUsage", "name": "getDiskUsage", "declaring_type": "File", "overrides": ["FileBase#getDiskUsage"]},
        {"id": "File#toString", "name": "toString", "declaring_type": "File", "overrides": ["Object#toString"]},
        {"id": "B#getDiskUsage", "name": "getDiskUsage", "declaring_type": "B"}
      ],
      "fields": [
        {"id": "Dir.children", "name": "children", "declaring_type": "Dir", "declared_type": "FileBase", "is_collection": true},
        {"id": "File.delegate", "name": "delegate", "declaring_type": "File", "declared_type": "B"}
      ],
      "invocations": [
        {"caller_method": "Dir#getDiskUsage", "callee_method": "FileBase#getDiskUsage", "receiver_kind": "other"},
        {"caller_method": "File#getDiskUsage", "callee_method": "B#getDiskUsage", "receiver_kind": "other"},
        {"caller_method": "Dir#getDiskUsage", "callee_method": "Dir#getDiskUsage", "receiver_kind": "other"}
      ]
    }"#;

    #[test]
    fn file_system_hooks_form_one_set() {
        let m = model(FS);
        let hooks = detect_hooks(&m);
        assert_eq!(hooks.len(), 1);
        let names: Vec<&str> = hooks[0].methods.iter().map(|x| m.method(*x).id.as_str()).collect();
        assert_eq!(
            names,
            ["FileBase#getDiskUsage", "Dir#getDiskUsage", "File#getDiskUsage"]
        );
    }

    #[test]
    fn library_root_overrides_are_not_hooks() {
        let m = model(FS);
        let hooks = detect_hooks(&m);
        let to_string = m.method_idx("File#toString").unwrap();
        assert!(hooks.iter().all(|h| !h.contains(to_string)));
    }

    #[test]
    fn no_overrides_no_hooks() {
        let m = model(
            r#"{"types": [{"id": "A", "name": "A", "kind": "class"}],
                "methods": [{"id": "A#f", "name": "f", "declaring_type": "A"}]}"#,
        );
        assert!(detect_hooks(&m).is_empty());
        assert!(PatternSet::detect(&m).patterns.is_empty());
    }

    #[test]
    fn composite_is_recursive_connection_n() {
        let m = model(FS);
        let set = PatternSet::detect(&m);
        let comp: Vec<_> = set
            .patterns
            .iter()
            .filter(|p| m.method(p.template_method).id == "Dir#getDiskUsage")
            .collect();
        let kinds: BTreeSet<&str> = comp.iter().map(|p| p.ptype.short_name()).collect();
        // Dir -> FileBase (supertype) and Dir -> Dir (same type).
        assert_eq!(kinds, BTreeSet::from(["1N-RCon", "1N-RUni"]));
        // the delegate call targets no hook
        assert!(set
            .patterns
            .iter()
            .all(|p| m.method(p.template_method).id != "File#getDiskUsage"));
    }

    #[test]
    fn observer_is_connection_n() {
        let m = model(
            r#"{
          "types": [
            {"id": "Model", "name": "Model", "kind": "class"},
            {"id": "View", "name": "View", "kind": "interface"},
            {"id": "TextView", "name": "TextView", "kind": "class", "supertype_ids": ["View"]}
          ],
          "methods": [
            {"id": "Model#notifyPropertyChanged", "name": "notifyPropertyChanged", "declaring_type": "Model"},
            {"id": "View#onPropertyChanged", "name": "onPropertyChanged", "declaring_type": "View"},
            {"id": "TextView#onPropertyChanged", "name": "onPropertyChanged", "declaring_type": "TextView", "overrides": ["View#onPropertyChanged"]}
          ],
          "fields": [
            {"id": "Model.listeners", "name": "listeners", "declaring_type": "Model", "declared_type": "View", "is_collection": true}
          ],
          "invocations": [
            {"caller_method": "Model#notifyPropertyChanged", "callee_method": "View#onPropertyChanged", "receiver_kind": "other"}
          ]}"#,
        );
        let set = PatternSet::detect(&m);
        assert_eq!(set.patterns.len(), 1);
        assert_eq!(
            set.patterns[0].ptype,
            PatternType::new(Category::Connection, Multiplicity::N)
        );
    }

    #[test]
    fn pattern_type_classification() {
        let m = model(FS);
        let site = |caller: &str, callee: &str, r| InvocationSite {
            caller_method: caller.into(),
            callee_method: callee.into(),
            receiver_kind: r,
        };
        let uni = site("Dir#getDiskUsage", "FileBase#getDiskUsage", ReceiverKind::ThisOrSuper);
        assert_eq!(
            detect_pattern_type(&m, "Dir#getDiskUsage", "FileBase#getDiskUsage", &uni).unwrap(),
            PatternType::new(Category::Unification, Multiplicity::One)
        );
        let runi = site("Dir#getDiskUsage", "Dir#getDiskUsage", ReceiverKind::Other);
        assert_eq!(
            detect_pattern_type(&m, "Dir#getDiskUsage", "Dir#getDiskUsage", &runi)
                .unwrap()
                .category,
            Category::RecursiveUnification
        );
        let rcon = site("Dir#getDiskUsage", "FileBase#getDiskUsage", ReceiverKind::Other);
        assert_eq!(
            detect_pattern_type(&m, "Dir#getDiskUsage", "FileBase#getDiskUsage", &rcon).unwrap(),
            PatternType::new(Category::RecursiveConnection, Multiplicity::N)
        );
        // File holds B through a scalar field.
        let con = site("File#getDiskUsage", "B#getDiskUsage", ReceiverKind::Other);
        assert_eq!(
            detect_pattern_type(&m, "File#getDiskUsage", "B#getDiskUsage", &con).unwrap(),
            PatternType::new(Category::Connection, Multiplicity::One)
        );
        assert!(detect_pattern_type(&m, "Nope#x", "B#getDiskUsage", &con).is_err());
        assert!(detect_pattern_type(&m, "Dir#getDiskUsage", "B#getDiskUsage", &con).is_err());
    }

    #[test]
    fn report_round_trip() {
        let m = model(FS);
        let set = PatternSet::detect(&m);
        let json = set.to_json(&m);
        let back = PatternSet::from_json(&json, "r", &m).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn hook_sets_are_connected_components() {
        // siblings linked only through a shared supertype method
        let m = model(
            r#"{"types": [
              {"id": "A", "name": "A", "kind": "class"},
              {"id": "B", "name": "B", "kind": "class", "supertype_ids": ["A"]},
              {"id": "C", "name": "C", "kind": "class", "supertype_ids": ["A"]}],
            "methods": [
              {"id": "B#f", "name": "f", "declaring_type": "B", "overrides": ["A#f"]},
              {"id": "A#f", "name": "f", "declaring_type": "A"},
              {"id": "C#f", "name": "f", "declaring_type": "C", "overrides": ["A#f"]},
              {"id": "A#g", "name": "g", "declaring_type": "A"}]}"#,
        );
        let hooks = detect_hooks(&m);
        assert_eq!(hooks.len(), 1);
        assert_eq!(hooks[0].methods.len(), 3);
    }
}
