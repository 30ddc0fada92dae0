//! Synthetic corpora: a code model, a trace, per-mode oracle groups, a
//! ground truth and the list of patterns the model is built to contain.
//!
//! Every instance gets its own types and method names, so instances never
//! interact. Oracle groups are derived from the object wiring the
//! generator itself chose; the trace is streamed, so large corpora do not
//! need to fit in memory.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detect::PatternSet;
use crate::error::{Error, Result};
use crate::evaluate::{Concept, GroundTruth};
use crate::group::{GroupingMode, GroupingResult};
use crate::model::{CodeModel, FieldDecl, InvocationSite, MethodDecl, ReceiverKind, TypeDecl, TypeKind};
use crate::trace::Trace;

/// Instance counts per pattern type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternMix {
    pub uni: usize,
    pub runi_11: usize,
    pub runi_1n: usize,
    pub rcon_11: usize,
    pub rcon_1n: usize,
    pub con_11: usize,
    pub con_1n: usize,
}

impl Default for PatternMix {
    fn default() -> Self {
        Self {
            uni: 1,
            runi_11: 1,
            runi_1n: 1,
            rcon_11: 1,
            rcon_1n: 1,
            con_11: 1,
            con_1n: 1,
        }
    }
}

impl PatternMix {
    pub fn total(&self) -> usize {
        self.uni + self.runi_11 + self.runi_1n + self.rcon_11 + self.rcon_1n + self.con_11 + self.con_1n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub patterns: PatternMix,
    /// Inclusive range of recursive structure depth.
    pub depth: [usize; 2],
    /// Inclusive range of children per composite node and listeners per
    /// subject.
    pub fan_out: [usize; 2],
    /// Probability that a hook object delegates to a helper object.
    pub delegation: f64,
    pub threads: usize,
    /// Probability that a hook activation creates a temporary object.
    pub noise: f64,
    /// Activations per instance.
    pub rounds: usize,
    /// Probability that an instance uses a template-method variant
    /// (differently named template, private helper, self-call entry).
    pub variant_rate: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            patterns: PatternMix::default(),
            depth: [1, 3],
            fan_out: [2, 3],
            delegation: 0.5,
            threads: 2,
            noise: 0.2,
            rounds: 3,
            variant_rate: 0.3,
        }
    }
}

impl ScenarioSpec {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|e| Error::parse(origin, format!("{}:{}", e.line(), e.column()), e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.depth[0] < 1 || self.depth[0] > self.depth[1] {
            return bad(format!("depth range {:?} must satisfy 1 <= min <= max", self.depth));
        }
        if self.fan_out[0] < 1 || self.fan_out[0] > self.fan_out[1] || self.fan_out[1] > 64 {
            return bad(format!(
                "fan_out range {:?} must satisfy 1 <= min <= max <= 64",
                self.fan_out
            ));
        }
        for (name, p) in [
            ("delegation", self.delegation),
            ("noise", self.noise),
            ("variant_rate", self.variant_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be within [0, 1], got {p}"));
            }
        }
        if self.threads < 1 {
            return bad("threads must be at least 1".into());
        }
        if self.rounds < 1 {
            return bad("rounds must be at least 1".into());
        }
        Ok(())
    }
}

/// One expected group, keyed by names from the generated files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OracleGroup {
    pub template_method: String,
    pub template_object: String,
    /// Sorted.
    pub members: Vec<String>,
}

impl OracleGroup {
    /// Grouper output in oracle form, sorted.
    pub fn from_grouping(
        grouping: &GroupingResult,
        trace: &Trace,
        model: &CodeModel,
        patterns: &PatternSet,
    ) -> Vec<OracleGroup> {
        let mut out: Vec<OracleGroup> = grouping
            .groups
            .iter()
            .map(|g| {
                let mut members: Vec<String> = g.members.iter().map(|o| trace.object(*o).id.clone()).collect();
                members.sort();
                OracleGroup {
                    template_method: model.method(patterns.patterns[g.pattern].template_method).id.clone(),
                    template_object: trace.object(g.template_object).id.clone(),
                    members,
                }
            })
            .collect();
        out.sort();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleFile {
    pub mode: GroupingMode,
    pub groups: Vec<OracleGroup>,
}

impl OracleFile {
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::parse(origin, format!("{}:{}", e.line(), e.column()), e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpectedPattern {
    pub template_method: String,
    pub kind: String,
    /// Sorted.
    pub hooks: Vec<String>,
}

impl ExpectedPattern {
    /// Detector output in expected-pattern form, sorted.
    pub fn from_patterns(patterns: &PatternSet, model: &CodeModel) -> Vec<ExpectedPattern> {
        let mut out: Vec<ExpectedPattern> = patterns
            .patterns
            .iter()
            .map(|p| {
                let mut hooks: Vec<String> = p.hooks.methods.iter().map(|h| model.method(*h).id.clone()).collect();
                hooks.sort();
                ExpectedPattern {
                    template_method: model.method(p.template_method).id.clone(),
                    kind: p.ptype.short_name().to_string(),
                    hooks,
                }
            })
            .collect();
        out.sort();
        out
    }
}

// ---------------------------------------------------------------------------
// Construction

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Uni,
    RUni11,
    RUni1N,
    RCon11,
    RCon1N,
    Con11,
    Con1N,
}

impl Kind {
    fn label(self) -> &'static str {
        match self {
            Kind::Uni => "Uni",
            Kind::RUni11 => "11-RUni",
            Kind::RUni1N => "1N-RUni",
            Kind::RCon11 => "11-RCon",
            Kind::RCon1N => "1N-RCon",
            Kind::Con11 => "11-Con",
            Kind::Con1N => "1N-Con",
        }
    }

    fn is_many(self) -> bool {
        matches!(self, Kind::RUni1N | Kind::RCon1N)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    Plain,
    /// Template method named differently from the hooks.
    Named,
    /// Recursion goes through a private helper reached by a self-call.
    Helper,
    /// The template is entered through a self-call from another method.
    SelfEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Ob {
    S(u32),
    T(u64),
}

#[derive(Debug, Clone, Copy)]
enum Own {
    Static,
    Obj(Ob),
}

#[derive(Debug, Clone, Copy)]
enum Proto {
    Declare { o: Ob, ty: u32 },
    Enter { m: u32, o: Ob, ctor: bool },
    Leave { m: u32, o: Ob },
    Write { owner: Own, f: u32, v: Option<Ob> },
    Read { o: Ob, f: u32 },
}

struct TreeNode {
    obj: u32,
    children: Vec<usize>,
    aid: Option<u32>,
}

struct Tree {
    nodes: Vec<TreeNode>,
    /// Method executed by each node, by node index.
    method: Vec<u32>,
    leaf_to_string: u32,
    extra: Option<u32>,
}

struct Hooks {
    /// Hook method id per hook object.
    objects: Vec<(u32, u32)>,
    aid: HashMap<u32, u32>,
    template: u32,
    entry: Option<u32>,
    link_field: u32,
    anchor: u32,
}

enum Shape {
    Uni { obj: u32, run: u32, step: u32 },
    Tree(Tree),
    Hooks(Hooks),
}

struct Instance {
    kind: Kind,
    variant: Variant,
    shape: Shape,
    aid_method: u32,
    tmp_type: u32,
    tmp_ctor: u32,
    tmp_calc: u32,
    /// Hook object of the instance's leaf type, never wired into a chain.
    spare: Option<(u32, u32)>,
}

#[derive(Debug, Clone, Copy)]
enum ActKind {
    Root,
    Sum,
    Partial(usize),
    State(usize),
    Notify(u64),
}

#[derive(Debug, Clone, Copy)]
struct Act {
    instance: u32,
    kind: ActKind,
}

#[derive(Default)]
struct ModelBuilder {
    types: Vec<TypeDecl>,
    methods: Vec<MethodDecl>,
    fields: Vec<FieldDecl>,
    sites: Vec<InvocationSite>,
    type_index: HashMap<String, u32>,
    field_names: Vec<String>,
    field_index: HashMap<String, u32>,
}

impl ModelBuilder {
    fn ty(&mut self, id: &str, kind: TypeKind, supers: &[&str]) -> u32 {
        let i = self.types.len() as u32;
        self.types.push(TypeDecl {
            id: id.into(),
            name: id.into(),
            kind,
            supertype_ids: supers.iter().map(|s| s.to_string()).collect(),
            is_library_root: false,
        });
        self.type_index.insert(id.into(), i);
        i
    }

    fn method(&mut self, ty: &str, name: &str, overrides: &[u32]) -> u32 {
        let i = self.methods.len() as u32;
        let overrides = overrides.iter().map(|m| self.methods[*m as usize].id.clone()).collect();
        self.methods.push(MethodDecl {
            id: format!("{ty}#{name}"),
            name: name.into(),
            declaring_type: ty.into(),
            is_constructor: name == "<init>",
            is_static: false,
            overrides,
        });
        i
    }

    fn field(&mut self, ty: &str, name: &str, declared: &str, collection: bool) -> u32 {
        self.fields.push(FieldDecl {
            id: format!("{ty}.{name}"),
            name: name.into(),
            declaring_type: ty.into(),
            declared_type: declared.into(),
            is_collection: collection,
            is_static: false,
        });
        self.field_name(name)
    }

    fn field_name(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.field_index.get(name) {
            return i;
        }
        let i = self.field_names.len() as u32;
        self.field_names.push(name.into());
        self.field_index.insert(name.into(), i);
        i
    }

    fn site(&mut self, caller: u32, callee: u32, this: bool) {
        self.sites.push(InvocationSite {
            caller_method: self.methods[caller as usize].id.clone(),
            callee_method: self.methods[callee as usize].id.clone(),
            receiver_kind: if this {
                ReceiverKind::ThisOrSuper
            } else {
                ReceiverKind::Other
            },
        });
    }
}

const ROOT: &str = "java.lang.Object";

/// Seed contributions keyed by (template method, template object).
type Seeds = BTreeMap<(u32, u32), (BTreeSet<u32>, BTreeSet<u32>)>;

/// A generated scenario. The trace is produced on demand by
/// [`Scenario::write_trace`].
pub struct Scenario {
    spec: ScenarioSpec,
    pub model: CodeModel,
    pub oracle_mp: Vec<OracleGroup>,
    pub oracle_mpd: Vec<OracleGroup>,
    pub ground_truth: GroundTruth,
    pub expected_patterns: Vec<ExpectedPattern>,
    objects: Vec<(String, u32)>,
    type_names: Vec<String>,
    method_ids: Vec<String>,
    field_names: Vec<String>,
    instances: Vec<Instance>,
    plan: Vec<Act>,
    thread_of: Vec<u16>,
    driver: u32,
    driver_run: u32,
    f_size: u32,
    prologue: Vec<Proto>,
}

struct Gen<'a> {
    spec: &'a ScenarioSpec,
    rng: ChaCha8Rng,
    mb: ModelBuilder,
    objects: Vec<(String, u32)>,
    prologue: Vec<Proto>,
    f_size: u32,
    f_targets: u32,
    f_aid: u32,
    to_string_root: u32,
    driver: u32,
    expected: Vec<(u32, &'static str, Vec<u32>)>,
}

impl Gen<'_> {
    fn obj(&mut self, id: String, ty: u32) -> u32 {
        let i = self.objects.len() as u32;
        self.objects.push((id, ty));
        self.prologue.push(Proto::Write {
            owner: Own::Obj(Ob::S(i)),
            f: self.f_size,
            v: None,
        });
        i
    }

    fn wire(&mut self, owner: u32, f: u32, value: u32) {
        self.prologue.push(Proto::Write {
            owner: Own::Obj(Ob::S(owner)),
            f,
            v: Some(Ob::S(value)),
        });
    }

    fn type_of(&self, name: &str) -> u32 {
        self.mb.type_index[name]
    }

    fn range(&mut self, r: [usize; 2]) -> usize {
        self.rng.gen_range(r[0]..=r[1])
    }

    fn variant(&mut self, choices: &[Variant]) -> Variant {
        if self.rng.gen_bool(self.spec.variant_rate) {
            *choices.choose(&mut self.rng).expect("non-empty")
        } else {
            Variant::Plain
        }
    }

    /// Temporary type and helper delegate type shared by an instance.
    fn support(&mut self, i: usize, hook: &str) -> (u32, u32, u32, u32) {
        let tmp = format!("Tmp{i}");
        let tmp_type = self.mb.ty(&tmp, TypeKind::Class, &[ROOT]);
        let ctor = self.mb.method(&tmp, "<init>", &[]);
        let calc = self.mb.method(&tmp, &format!("calc{i}"), &[]);
        let aid = format!("Aid{i}");
        self.mb.ty(&aid, TypeKind::Class, &[ROOT]);
        self.mb.field(&aid, "size", "long", false);
        let aid_method = self.mb.method(&aid, hook, &[]);
        (tmp_type, ctor, calc, aid_method)
    }

    fn maybe_aid(&mut self, i: usize, owner: u32, counter: &mut usize) -> Option<u32> {
        if !self.rng.gen_bool(self.spec.delegation) {
            return None;
        }
        let ty = self.type_of(&format!("Aid{i}"));
        let a = self.obj(format!("a{i}_{counter}"), ty);
        *counter += 1;
        self.wire(owner, self.f_aid, a);
        Some(a)
    }

    fn uni(&mut self, i: usize) -> Instance {
        let (base, sub) = (format!("Base{i}"), format!("Sub{i}"));
        self.mb.ty(&base, TypeKind::Class, &[ROOT]);
        let sub_t = self.mb.ty(&sub, TypeKind::Class, &[&base]);
        self.mb.field(&base, "size", "long", false);
        let run = self.mb.method(&base, &format!("run{i}"), &[]);
        let step = self.mb.method(&base, &format!("step{i}"), &[]);
        let sub_step = self.mb.method(&sub, &format!("step{i}"), &[step]);
        self.mb.site(run, step, true);
        self.expected.push((run, "Uni", vec![step, sub_step]));
        let (tmp_type, tmp_ctor, tmp_calc, aid_method) = self.support(i, &format!("step{i}"));
        let obj = self.obj(format!("u{i}"), sub_t);
        self.wire(self.driver, self.f_targets, obj);
        Instance {
            kind: Kind::Uni,
            variant: Variant::Plain,
            shape: Shape::Uni {
                obj,
                run,
                step: sub_step,
            },
            aid_method,
            tmp_type,
            tmp_ctor,
            tmp_calc,
            spare: None,
        }
    }

    fn tree(&mut self, i: usize, kind: Kind) -> Instance {
        let runi = matches!(kind, Kind::RUni11 | Kind::RUni1N);
        let many = kind.is_many();
        let (base, inner, leaf, hook) = if runi {
            (
                format!("Node{i}"),
                format!("Node{i}"),
                format!("Tip{i}"),
                format!("visit{i}"),
            )
        } else {
            (
                format!("Comp{i}"),
                format!("Box{i}"),
                format!("Part{i}"),
                format!("op{i}"),
            )
        };
        self.mb.ty(&base, TypeKind::Class, &[ROOT]);
        if !runi {
            self.mb.ty(&inner, TypeKind::Class, &[&base]);
        }
        let leaf_t = self.mb.ty(&leaf, TypeKind::Class, &[&base]);
        let inner_t = self.type_of(&inner);
        self.mb.field(&base, "size", "long", false);
        let link_name = match (runi, many) {
            (true, true) => "kids",
            (true, false) => "next",
            (false, true) => "items",
            (false, false) => "inner",
        };
        let link_field = self.mb.field(&inner, link_name, &base, many);
        self.mb.field(&leaf, "aid", &format!("Aid{i}"), false);

        let base_h = self.mb.method(&base, &hook, &[]);
        let inner_h = if runi {
            base_h
        } else {
            self.mb.method(&inner, &hook, &[base_h])
        };
        let leaf_h = self.mb.method(&leaf, &hook, &[base_h]);
        let leaf_to_string = self.mb.method(&leaf, "toString", &[self.to_string_root]);
        let mut hooks = vec![base_h, leaf_h];
        if !runi {
            hooks.push(inner_h);
        }
        hooks.sort_unstable();

        let variant = self.variant(&[Variant::Named, Variant::Helper, Variant::SelfEntry]);
        let label = kind.label();
        let extra = match variant {
            Variant::Plain => {
                self.mb.site(inner_h, base_h, false);
                self.expected.push((inner_h, label, hooks.clone()));
                None
            }
            Variant::Named => {
                let sum = self.mb.method(&inner, &format!("sum{i}"), &[]);
                self.mb.site(inner_h, base_h, false);
                self.mb.site(sum, base_h, false);
                self.expected.push((inner_h, label, hooks.clone()));
                self.expected.push((sum, label, hooks.clone()));
                Some(sum)
            }
            Variant::Helper => {
                let helper = self.mb.method(&inner, &format!("{hook}All"), &[]);
                self.mb.site(inner_h, helper, true);
                self.mb.site(helper, base_h, false);
                self.expected.push((helper, label, hooks.clone()));
                Some(helper)
            }
            Variant::SelfEntry => {
                let start = self.mb.method(&inner, &format!("start{i}"), &[]);
                self.mb.site(inner_h, base_h, false);
                self.mb.site(start, base_h, true);
                self.expected.push((inner_h, label, hooks.clone()));
                self.expected.push((start, "Uni", hooks.clone()));
                Some(start)
            }
        };
        let (tmp_type, tmp_ctor, tmp_calc, aid_method) = self.support(i, &hook);
        self.mb.site(leaf_h, aid_method, false);
        self.mb.site(leaf_h, tmp_calc, false);

        // structure
        let depth = self.range(self.spec.depth);
        let mut nodes: Vec<TreeNode> = Vec::new();
        let mut method = Vec::new();
        let mut aids = 0usize;
        let mut pending = vec![(None::<usize>, 0usize, false)];
        while let Some((parent, level, force_leaf)) = pending.pop() {
            let is_leaf = force_leaf || level == depth;
            let ty = if is_leaf { leaf_t } else { inner_t };
            let obj = self.obj(format!("n{i}_{}", nodes.len()), ty);
            let idx = nodes.len();
            let aid = if is_leaf {
                self.maybe_aid(i, obj, &mut aids)
            } else {
                None
            };
            nodes.push(TreeNode {
                obj,
                children: Vec::new(),
                aid,
            });
            method.push(if is_leaf { leaf_h } else { inner_h });
            match parent {
                Some(p) => {
                    nodes[p].children.push(idx);
                    let p_obj = nodes[p].obj;
                    self.wire(p_obj, link_field, obj);
                }
                None => self.wire(self.driver, self.f_targets, obj),
            }
            if !is_leaf {
                let n = if many { self.range(self.spec.fan_out) } else { 1 };
                let mut kids = Vec::with_capacity(n);
                for _ in 0..n {
                    let early = many && level + 1 < depth && self.rng.gen_bool(0.25);
                    kids.push((Some(idx), level + 1, early));
                }
                // preorder: first child popped first
                pending.extend(kids.into_iter().rev());
            }
        }
        let spare = if self.spec.noise > 0.0 {
            let s = self.obj(format!("x{i}"), leaf_t);
            self.wire(self.driver, self.f_targets, s);
            Some((s, leaf_h))
        } else {
            None
        };
        Instance {
            kind,
            variant,
            shape: Shape::Tree(Tree {
                nodes,
                method,
                leaf_to_string,
                extra,
            }),
            aid_method,
            tmp_type,
            tmp_ctor,
            tmp_calc,
            spare,
        }
    }

    fn hooks(&mut self, i: usize, kind: Kind) -> Instance {
        let state = kind == Kind::Con11;
        let (holder, iface, a, b, hook, tmpl, entry, link) = if state {
            ("Ctx", "State", "StA", "StB", "handle", "request", "serve", "state")
        } else {
            ("Subject", "Watcher", "WA", "WB", "update", "notify", "fire", "watchers")
        };
        let (holder, iface, a, b) = (
            format!("{holder}{i}"),
            format!("{iface}{i}"),
            format!("{a}{i}"),
            format!("{b}{i}"),
        );
        let hook = format!("{hook}{i}");
        let holder_t = self.mb.ty(&holder, TypeKind::Class, &[ROOT]);
        self.mb.ty(&iface, TypeKind::Interface, &[]);
        let a_t = self.mb.ty(&a, TypeKind::Class, &[ROOT, &iface]);
        let b_t = self.mb.ty(&b, TypeKind::Class, &[ROOT, &iface]);
        self.mb.field(&holder, "size", "long", false);
        let link_field = self.mb.field(&holder, link, &iface, !state);
        for t in [&a, &b] {
            self.mb.field(t, "size", "long", false);
            self.mb.field(t, "aid", &format!("Aid{i}"), false);
        }
        let iface_h = self.mb.method(&iface, &hook, &[]);
        let a_h = self.mb.method(&a, &hook, &[iface_h]);
        let b_h = self.mb.method(&b, &hook, &[iface_h]);
        self.mb.method(&a, "toString", &[self.to_string_root]);
        let template = self.mb.method(&holder, &format!("{tmpl}{i}"), &[]);
        self.mb.site(template, iface_h, false);
        let mut hooks = vec![iface_h, a_h, b_h];
        hooks.sort_unstable();
        self.expected.push((template, kind.label(), hooks));
        let variant = self.variant(&[Variant::SelfEntry]);
        let entry = (variant == Variant::SelfEntry).then(|| {
            let e = self.mb.method(&holder, &format!("{entry}{i}"), &[]);
            self.mb.site(e, template, true);
            e
        });
        let (tmp_type, tmp_ctor, tmp_calc, aid_method) = self.support(i, &hook);
        for h in [a_h, b_h] {
            self.mb.site(h, aid_method, false);
            self.mb.site(h, tmp_calc, false);
        }

        let anchor = self.obj(format!("{}{i}", if state { "c" } else { "m" }), holder_t);
        self.wire(self.driver, self.f_targets, anchor);
        let n = self.range(self.spec.fan_out);
        let first_a = self.rng.gen_bool(0.5);
        let mut objects = Vec::with_capacity(n);
        let mut aid = HashMap::new();
        let mut aids = 0usize;
        let prefix = if state { "s" } else { "w" };
        for k in 0..n {
            let (ty, m) = if (k % 2 == 0) == first_a {
                (a_t, a_h)
            } else {
                (b_t, b_h)
            };
            let o = self.obj(format!("{prefix}{i}_{k}"), ty);
            self.wire(anchor, link_field, o);
            if let Some(x) = self.maybe_aid(i, o, &mut aids) {
                aid.insert(o, x);
            }
            objects.push((o, m));
        }
        let spare = if self.spec.noise > 0.0 {
            let s = self.obj(format!("x{i}"), a_t);
            self.wire(self.driver, self.f_targets, s);
            Some((s, a_h))
        } else {
            None
        };
        Instance {
            kind,
            variant,
            shape: Shape::Hooks(Hooks {
                objects,
                aid,
                template,
                entry,
                link_field,
                anchor,
            }),
            aid_method,
            tmp_type,
            tmp_ctor,
            tmp_calc,
            spare,
        }
    }
}

fn subtree(tree: &Tree, start: usize, include_start: bool) -> (BTreeSet<u32>, BTreeSet<u32>) {
    let mut mp = BTreeSet::new();
    let mut mpd = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        let node = &tree.nodes[n];
        if n != start || include_start {
            mp.insert(node.obj);
            mpd.insert(node.obj);
        }
        if let Some(a) = node.aid {
            mpd.insert(a);
        }
        stack.extend(node.children.iter().copied());
    }
    (mp, mpd)
}

/// Adds the seeds produced by one activation.
fn record_seeds(inst: &Instance, kind: ActKind, seeds: &mut Seeds, order: &mut Vec<(u32, u32)>) {
    let mut add = |tm: u32, to: u32, (mp, mpd): (BTreeSet<u32>, BTreeSet<u32>)| {
        let e = seeds.entry((tm, to)).or_insert_with(|| {
            order.push((tm, to));
            Default::default()
        });
        e.0.extend(mp);
        e.1.extend(mpd);
    };
    match &inst.shape {
        Shape::Uni { .. } => {}
        Shape::Tree(t) => {
            let h = t.method[0];
            let pattern = match inst.variant {
                Variant::Helper => t.extra.expect("helper"),
                _ => h,
            };
            match kind {
                ActKind::Root => add(pattern, t.nodes[0].obj, subtree(t, 0, true)),
                ActKind::Partial(n) => add(pattern, t.nodes[n].obj, subtree(t, n, true)),
                ActKind::Sum => {
                    add(t.extra.expect("sum"), t.nodes[0].obj, subtree(t, 0, false));
                    for &c in &t.nodes[0].children {
                        if !t.nodes[c].children.is_empty() {
                            add(h, t.nodes[c].obj, subtree(t, c, true));
                        }
                    }
                }
                _ => unreachable!("tree activation"),
            }
        }
        Shape::Hooks(hk) => {
            let chosen: Vec<u32> = match kind {
                ActKind::State(k) => vec![hk.objects[k].0],
                ActKind::Notify(mask) => hk
                    .objects
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, (o, _))| *o)
                    .collect(),
                _ => unreachable!("connection activation"),
            };
            let mp: BTreeSet<u32> = chosen.iter().copied().collect();
            let mut mpd = mp.clone();
            mpd.extend(chosen.iter().filter_map(|o| hk.aid.get(o)));
            add(hk.template, hk.anchor, (mp, mpd));
        }
    }
}

/// Union, empty removal, duplicate removal and same-pattern strict subset
/// removal over recorded seeds.
fn finish_oracle(seeds: &Seeds, order: &[(u32, u32)], mpd: bool) -> Vec<(u32, u32, BTreeSet<u32>)> {
    let mut by_pattern: BTreeMap<u32, Vec<(u32, &BTreeSet<u32>)>> = BTreeMap::new();
    for key in order {
        let (mp_set, mpd_set) = &seeds[key];
        let set = if mpd { mpd_set } else { mp_set };
        if set.is_empty() {
            continue;
        }
        let list = by_pattern.entry(key.0).or_default();
        if list.iter().all(|(_, s)| *s != set) {
            list.push((key.1, set));
        }
    }
    let mut out = Vec::new();
    for (tm, list) in by_pattern {
        for (to, set) in &list {
            let dominated = list
                .iter()
                .any(|(_, other)| other.len() > set.len() && set.is_subset(other));
            if !dominated {
                out.push((tm, *to, (*set).clone()));
            }
        }
    }
    out
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut g = Gen {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        mb: ModelBuilder::default(),
        objects: Vec::new(),
        prologue: Vec::new(),
        f_size: 0,
        f_targets: 0,
        f_aid: 0,
        to_string_root: 0,
        driver: 0,
        expected: Vec::new(),
    };
    g.mb.types.push(TypeDecl {
        id: ROOT.into(),
        name: ROOT.into(),
        kind: TypeKind::Class,
        supertype_ids: vec![],
        is_library_root: true,
    });
    g.mb.type_index.insert(ROOT.into(), 0);
    g.to_string_root = g.mb.method(ROOT, "toString", &[]);
    let main_t = g.mb.ty("Main", TypeKind::Class, &[ROOT]);
    let driver_run = g.mb.method("Main", "run", &[]);
    g.mb.field("Main", "targets", ROOT, true);
    g.mb.fields.push(FieldDecl {
        id: "Main.app".into(),
        name: "app".into(),
        declaring_type: "Main".into(),
        declared_type: "Main".into(),
        is_collection: false,
        is_static: true,
    });
    let f_app = g.mb.field_name("app");
    g.f_size = g.mb.field_name("size");
    g.f_targets = g.mb.field_name("targets");
    g.f_aid = g.mb.field_name("aid");
    g.objects.push(("main0".into(), main_t));
    g.prologue.push(Proto::Write {
        owner: Own::Static,
        f: f_app,
        v: Some(Ob::S(0)),
    });
    g.driver = 0;

    let mix = &spec.patterns;
    let mut kinds = Vec::with_capacity(mix.total());
    for (kind, n) in [
        (Kind::Uni, mix.uni),
        (Kind::RUni11, mix.runi_11),
        (Kind::RUni1N, mix.runi_1n),
        (Kind::RCon11, mix.rcon_11),
        (Kind::RCon1N, mix.rcon_1n),
        (Kind::Con11, mix.con_11),
        (Kind::Con1N, mix.con_1n),
    ] {
        kinds.extend(std::iter::repeat_n(kind, n));
    }
    let mut instances = Vec::with_capacity(kinds.len());
    for (i, kind) in kinds.into_iter().enumerate() {
        let i = i + 1;
        let inst = match kind {
            Kind::Uni => g.uni(i),
            Kind::Con11 | Kind::Con1N => g.hooks(i, kind),
            _ => g.tree(i, kind),
        };
        instances.push(inst);
    }

    // activation plan
    let mut plan = Vec::new();
    let mut thread_of = Vec::new();
    let mut seeds: Seeds = BTreeMap::new();
    let mut seed_order = Vec::new();
    let mut order: Vec<u32> = (0..instances.len() as u32).collect();
    for round in 0..spec.rounds {
        order.shuffle(&mut g.rng);
        for &i in &order {
            let inst = &instances[i as usize];
            let kind = match &inst.shape {
                Shape::Uni { .. } => ActKind::Root,
                Shape::Tree(t) => {
                    let inner: Vec<usize> = (1..t.nodes.len())
                        .filter(|&n| !t.nodes[n].children.is_empty())
                        .collect();
                    let roll: f64 = g.rng.gen();
                    let named = inst.variant == Variant::Named;
                    if round > 0 && roll < 0.25 && !inner.is_empty() {
                        ActKind::Partial(*inner.choose(&mut g.rng).expect("non-empty"))
                    } else if named && (round == 0 || roll >= 0.5) {
                        ActKind::Sum
                    } else {
                        ActKind::Root
                    }
                }
                Shape::Hooks(hk) => {
                    let n = hk.objects.len();
                    if inst.kind == Kind::Con11 {
                        ActKind::State(if round == 0 { 0 } else { g.rng.gen_range(0..n) })
                    } else {
                        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
                        let mut mask = g.rng.gen::<u64>() & full;
                        if round == 0 || mask == 0 {
                            mask = full;
                        }
                        ActKind::Notify(mask)
                    }
                }
            };
            record_seeds(inst, kind, &mut seeds, &mut seed_order);
            plan.push(Act { instance: i, kind });
            thread_of.push(g.rng.gen_range(0..spec.threads) as u16);
        }
    }

    let model = CodeModel::from_parts(
        std::mem::take(&mut g.mb.types),
        std::mem::take(&mut g.mb.methods),
        std::mem::take(&mut g.mb.fields),
        std::mem::take(&mut g.mb.sites),
        "generated model",
    )?;
    let method_ids: Vec<String> = model.methods().iter().map(|m| m.id.clone()).collect();
    let type_names: Vec<String> = model.types().iter().map(|t| t.name.clone()).collect();

    let objects = std::mem::take(&mut g.objects);
    let to_oracle = |mpd: bool| -> Vec<OracleGroup> {
        let mut out: Vec<OracleGroup> = finish_oracle(&seeds, &seed_order, mpd)
            .into_iter()
            .map(|(tm, to, set)| {
                let mut members: Vec<String> = set.iter().map(|o| objects[*o as usize].0.clone()).collect();
                members.sort();
                OracleGroup {
                    template_method: method_ids[tm as usize].clone(),
                    template_object: objects[to as usize].0.clone(),
                    members,
                }
            })
            .collect();
        out.sort();
        out
    };
    let oracle_mp = to_oracle(false);
    let oracle_mpd = to_oracle(true);

    // ground truth: member types of each instance's groups
    let mut concepts = Vec::new();
    let finished = finish_oracle(&seeds, &seed_order, true);
    for (i, inst) in instances.iter().enumerate() {
        let mut types = BTreeSet::new();
        match &inst.shape {
            Shape::Uni { obj, .. } => {
                types.insert(type_names[objects[*obj as usize].1 as usize].clone());
            }
            _ => {
                let tms = instance_templates(inst);
                for (tm, _, set) in &finished {
                    if tms.contains(tm) {
                        types.extend(set.iter().map(|o| type_names[objects[*o as usize].1 as usize].clone()));
                    }
                }
            }
        }
        if !types.is_empty() {
            concepts.push(Concept {
                concept_name: format!("{}-{}", inst.kind.label(), i + 1),
                types: types.into_iter().collect(),
            });
        }
    }

    let mut expected_patterns: Vec<ExpectedPattern> = g
        .expected
        .iter()
        .map(|(tm, kind, hooks)| ExpectedPattern {
            template_method: method_ids[*tm as usize].clone(),
            kind: kind.to_string(),
            hooks: {
                let mut h: Vec<String> = hooks.iter().map(|m| method_ids[*m as usize].clone()).collect();
                h.sort();
                h
            },
        })
        .collect();
    expected_patterns.sort();

    Ok(Scenario {
        spec: spec.clone(),
        model,
        oracle_mp,
        oracle_mpd,
        ground_truth: GroundTruth { concepts },
        expected_patterns,
        objects,
        type_names,
        method_ids,
        field_names: std::mem::take(&mut g.mb.field_names),
        instances,
        plan,
        thread_of,
        driver: g.driver,
        driver_run,
        f_size: g.f_size,
        prologue: std::mem::take(&mut g.prologue),
    })
}

fn instance_templates(inst: &Instance) -> Vec<u32> {
    match &inst.shape {
        Shape::Uni { .. } => Vec::new(),
        Shape::Tree(t) => {
            let mut v = vec![t.method[0]];
            v.extend(t.extra);
            v
        }
        Shape::Hooks(h) => vec![h.template],
    }
}

// ---------------------------------------------------------------------------
// Trace emission

struct Block<'a> {
    s: &'a Scenario,
    rng: &'a mut ChaCha8Rng,
    out: &'a mut Vec<(Proto, bool)>,
    temps: &'a mut u64,
}

impl Block<'_> {
    fn push(&mut self, p: Proto) {
        self.out.push((p, false));
    }

    fn call(&mut self, m: u32, o: u32) {
        self.push(Proto::Enter {
            m,
            o: Ob::S(o),
            ctor: false,
        });
    }

    fn ret(&mut self, m: u32, o: u32) {
        self.push(Proto::Leave { m, o: Ob::S(o) });
    }

    fn read(&mut self, o: u32) {
        let f = self.s.f_size();
        self.push(Proto::Read { o: Ob::S(o), f });
    }

    /// Own-field write, delegate call and temporary noise inside a hook.
    fn hook_body(&mut self, inst: &Instance, o: u32, aid: Option<u32>) {
        let f = self.s.f_size();
        self.push(Proto::Write {
            owner: Own::Obj(Ob::S(o)),
            f,
            v: None,
        });
        if let Some(a) = aid {
            self.read(a);
            self.call(inst.aid_method, a);
            self.ret(inst.aid_method, a);
        }
        if self.rng.gen_bool(self.s.spec.noise) {
            self.temporary(inst);
        }
    }

    /// A constructor and a computation on a fresh object, emitted without
    /// interleaving so its lifetime stays short.
    fn temporary(&mut self, inst: &Instance) {
        let t = Ob::T(*self.temps);
        *self.temps += 1;
        let start = self.out.len();
        self.push(Proto::Declare {
            o: t,
            ty: inst.tmp_type,
        });
        self.push(Proto::Enter {
            m: inst.tmp_ctor,
            o: t,
            ctor: true,
        });
        self.push(Proto::Leave { m: inst.tmp_ctor, o: t });
        self.push(Proto::Enter {
            m: inst.tmp_calc,
            o: t,
            ctor: false,
        });
        let f = self.s.f_size();
        self.push(Proto::Write {
            owner: Own::Obj(t),
            f,
            v: None,
        });
        if let Some((spare, m)) = inst.spare {
            if self.rng.gen_bool(0.5) {
                self.call(m, spare);
                self.ret(m, spare);
            }
        }
        self.push(Proto::Leave { m: inst.tmp_calc, o: t });
        let end = self.out.len();
        for item in &mut self.out[start..end - 1] {
            item.1 = true;
        }
    }

    fn tree_call(&mut self, inst: &Instance, t: &Tree, n: usize) {
        let node = &t.nodes[n];
        let m = t.method[n];
        self.call(m, node.obj);
        if node.children.is_empty() {
            self.hook_body(inst, node.obj, node.aid);
        } else {
            let helper = (inst.variant == Variant::Helper).then(|| t.extra.expect("helper"));
            if let Some(h) = helper {
                self.call(h, node.obj);
            }
            for (k, &c) in node.children.iter().enumerate() {
                let child = &t.nodes[c];
                if k == 0 && child.children.is_empty() && self.rng.gen_bool(self.s.spec.noise) {
                    self.call(t.leaf_to_string, child.obj);
                    self.ret(t.leaf_to_string, child.obj);
                }
                self.read(child.obj);
                self.tree_call(inst, t, c);
            }
            if let Some(h) = helper {
                self.ret(h, node.obj);
            }
        }
        self.ret(m, node.obj);
    }

    fn activation(&mut self, act: Act) {
        let s = self.s;
        let inst = &s.instances[act.instance as usize];
        self.call(s.driver_run, s.driver);
        match (&inst.shape, act.kind) {
            (Shape::Uni { obj, run, step }, _) => {
                self.read(*obj);
                self.call(*run, *obj);
                self.call(*step, *obj);
                self.ret(*step, *obj);
                self.ret(*run, *obj);
            }
            (Shape::Tree(t), ActKind::Root) => {
                let root = t.nodes[0].obj;
                self.read(root);
                if inst.variant == Variant::SelfEntry {
                    let start = t.extra.expect("start");
                    self.call(start, root);
                    self.tree_call(inst, t, 0);
                    self.ret(start, root);
                } else {
                    self.tree_call(inst, t, 0);
                }
            }
            (Shape::Tree(t), ActKind::Sum) => {
                let root = t.nodes[0].obj;
                let sum = t.extra.expect("sum");
                self.read(root);
                self.call(sum, root);
                for &c in &t.nodes[0].children {
                    self.read(t.nodes[c].obj);
                    self.tree_call(inst, t, c);
                }
                self.ret(sum, root);
            }
            (Shape::Tree(t), ActKind::Partial(n)) => {
                self.read(t.nodes[n].obj);
                self.tree_call(inst, t, n);
            }
            (Shape::Hooks(hk), kind) => {
                let chosen: Vec<(u32, u32)> = match kind {
                    ActKind::State(k) => {
                        let (o, _) = hk.objects[k];
                        self.push(Proto::Write {
                            owner: Own::Obj(Ob::S(hk.anchor)),
                            f: hk.link_field,
                            v: Some(Ob::S(o)),
                        });
                        vec![hk.objects[k]]
                    }
                    ActKind::Notify(mask) => hk
                        .objects
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| mask & (1 << k) != 0)
                        .map(|(_, x)| *x)
                        .collect(),
                    _ => unreachable!("connection activation"),
                };
                self.read(hk.anchor);
                if let Some(e) = hk.entry {
                    self.call(e, hk.anchor);
                }
                self.call(hk.template, hk.anchor);
                for (o, m) in chosen {
                    self.read(o);
                    self.call(m, o);
                    self.hook_body(inst, o, hk.aid.get(&o).copied());
                    self.ret(m, o);
                }
                self.ret(hk.template, hk.anchor);
                if let Some(e) = hk.entry {
                    self.ret(e, hk.anchor);
                }
            }
            (Shape::Tree(_), _) => unreachable!("tree activation"),
        }
        self.ret(s.driver_run, s.driver);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraceStats {
    pub events: u64,
    pub objects: u64,
}

impl Scenario {
    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    fn f_size(&self) -> u32 {
        self.f_size
    }

    fn obj_name(&self, o: Ob, buf: &mut String) {
        buf.clear();
        match o {
            Ob::S(i) => buf.push_str(&self.objects[i as usize].0),
            Ob::T(n) => {
                use std::fmt::Write as _;
                let _ = write!(buf, "tmp{n}");
            }
        }
    }

    /// Streams the trace text. Output depends only on the spec.
    pub fn write_trace(&self, out: impl Write) -> io::Result<TraceStats> {
        let mut w = BufWriter::with_capacity(1 << 16, out);
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(1);
        let mut stats = TraceStats::default();
        let threads = self.spec.threads;
        let names: Vec<String> = (0..threads).map(|t| format!("T{t}")).collect();
        let mut seq = 0u64;
        let (mut a, mut b) = (String::new(), String::new());

        for (id, ty) in &self.objects {
            writeln!(w, "O {id} {}", self.type_names[*ty as usize])?;
            stats.objects += 1;
        }
        let mut emit = |w: &mut BufWriter<_>, p: Proto, thread: &str, stats: &mut TraceStats| -> io::Result<()> {
            if let Proto::Declare { o, ty } = p {
                self.obj_name(o, &mut a);
                stats.objects += 1;
                return writeln!(w, "O {a} {}", self.type_names[ty as usize]);
            }
            seq += 1;
            stats.events += 1;
            match p {
                Proto::Enter { m, o, ctor } => {
                    self.obj_name(o, &mut a);
                    let flag = if ctor { " C" } else { "" };
                    writeln!(w, "E {seq} {thread} {} {a}{flag}", self.method_ids[m as usize])
                }
                Proto::Leave { m, o } => {
                    self.obj_name(o, &mut a);
                    writeln!(w, "X {seq} {thread} {} {a}", self.method_ids[m as usize])
                }
                Proto::Write { owner, f, v } => {
                    match owner {
                        Own::Static => {
                            a.clear();
                            a.push_str("STATIC");
                        }
                        Own::Obj(o) => self.obj_name(o, &mut a),
                    }
                    match v {
                        Some(v) => self.obj_name(v, &mut b),
                        None => {
                            b.clear();
                            b.push('-');
                        }
                    }
                    writeln!(w, "W {seq} {thread} {a} {} {b}", self.field_names[f as usize])
                }
                Proto::Read { o, f } => {
                    self.obj_name(o, &mut a);
                    writeln!(w, "R {seq} {thread} {a} {}", self.field_names[f as usize])
                }
                Proto::Declare { .. } => unreachable!(),
            }
        };

        for p in &self.prologue {
            emit(&mut w, *p, &names[0], &mut stats)?;
        }

        let mut queues: Vec<VecDeque<u32>> = vec![VecDeque::new(); threads];
        for (i, t) in self.thread_of.iter().enumerate() {
            queues[*t as usize].push_back(i as u32);
        }
        let mut bufs: Vec<(Vec<(Proto, bool)>, usize)> = (0..threads).map(|_| (Vec::new(), 0)).collect();
        let mut temps = 0u64;
        let pending = |bufs: &[(Vec<(Proto, bool)>, usize)], queues: &[VecDeque<u32>], t: usize| {
            bufs[t].1 < bufs[t].0.len() || !queues[t].is_empty()
        };
        let mut cur = 0usize;
        while (0..threads).any(|t| pending(&bufs, &queues, t)) {
            if !pending(&bufs, &queues, cur) {
                cur = (cur + 1) % threads;
                continue;
            }
            let burst = rng.gen_range(1..=6);
            let mut emitted = 0;
            loop {
                let (buf, pos) = &mut bufs[cur];
                if *pos == buf.len() {
                    buf.clear();
                    *pos = 0;
                    let Some(act) = queues[cur].pop_front() else { break };
                    let mut block = Block {
                        s: self,
                        rng: &mut rng,
                        out: buf,
                        temps: &mut temps,
                    };
                    block.activation(self.plan[act as usize]);
                }
                let (p, glued) = buf[*pos];
                *pos += 1;
                emit(&mut w, p, &names[cur], &mut stats)?;
                emitted += 1;
                if emitted >= burst && !glued {
                    break;
                }
            }
            cur = (cur + 1) % threads;
        }
        w.flush()?;
        Ok(stats)
    }

    pub fn trace_text(&self) -> String {
        let mut out = Vec::new();
        self.write_trace(&mut out).expect("in-memory write");
        String::from_utf8(out).expect("utf-8 trace")
    }

    pub fn oracle(&self, mode: GroupingMode) -> &[OracleGroup] {
        match mode {
            GroupingMode::Mp => &self.oracle_mp,
            GroupingMode::MpD => &self.oracle_mpd,
        }
    }
}

/// Paths of a corpus written by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub model: PathBuf,
    pub trace: PathBuf,
    pub oracle_mp: PathBuf,
    pub oracle_mpd: PathBuf,
    pub ground_truth: PathBuf,
    pub patterns: PathBuf,
    pub stats: TraceStats,
}

pub fn write_corpus(spec: &ScenarioSpec, dir: impl AsRef<Path>) -> Result<CorpusFiles> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scenario = generate(spec)?;
    let write = |name: &str, text: String| -> Result<PathBuf> {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    fn json<T: Serialize>(v: &T) -> String {
        let mut s = serde_json::to_string_pretty(v).expect("serialize");
        s.push('\n');
        s
    }
    let model = write("model.json", scenario.model.to_json())?;
    let trace = dir.join("trace.txt");
    let file = File::create(&trace).map_err(|e| Error::io(&trace, e))?;
    let stats = scenario.write_trace(file).map_err(|e| Error::io(&trace, e))?;
    let oracle_mp = write(
        "oracle-mp.json",
        json(&OracleFile {
            mode: GroupingMode::Mp,
            groups: scenario.oracle_mp.clone(),
        }),
    )?;
    let oracle_mpd = write(
        "oracle-mpd.json",
        json(&OracleFile {
            mode: GroupingMode::MpD,
            groups: scenario.oracle_mpd.clone(),
        }),
    )?;
    let ground_truth = write("ground-truth.json", scenario.ground_truth.to_json())?;
    let patterns = write("patterns.json", json(&scenario.expected_patterns))?;
    Ok(CorpusFiles {
        model,
        trace,
        oracle_mp,
        oracle_mpd,
        ground_truth,
        patterns,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::group_objects;
    use crate::ranking::{profile_objects, RankingConfig};

    fn check(spec: &ScenarioSpec) {
        let s = generate(spec).unwrap();
        let trace = Trace::from_text(&s.trace_text()).unwrap();
        assert_eq!(trace.auto_closed(), 0);
        let patterns = PatternSet::detect(&s.model);
        assert_eq!(
            ExpectedPattern::from_patterns(&patterns, &s.model),
            s.expected_patterns,
            "{spec:?}"
        );
        for mode in [GroupingMode::Mp, GroupingMode::MpD] {
            let g = group_objects(&trace, &s.model, &patterns, mode);
            let got = OracleGroup::from_grouping(&g, &trace, &s.model, &patterns);
            assert_eq!(got, s.oracle(mode), "{mode} {spec:?}");
        }
    }

    #[test]
    fn oracle_matches_grouper_on_default_spec() {
        check(&ScenarioSpec::default());
    }

    #[test]
    fn oracle_matches_grouper_across_seeds() {
        for seed in 0..40 {
            check(&ScenarioSpec {
                seed,
                threads: 1 + (seed as usize % 4),
                delegation: [0.0, 0.5, 1.0][seed as usize % 3],
                variant_rate: 0.6,
                noise: 0.4,
                ..Default::default()
            });
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = ScenarioSpec {
            seed: 7,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.trace_text(), b.trace_text());
        assert_eq!(a.model.to_json(), b.model.to_json());
        assert_eq!(a.oracle_mpd, b.oracle_mpd);
    }

    #[test]
    fn full_delegation_puts_a_delegate_in_every_mpd_group() {
        let spec = ScenarioSpec {
            seed: 3,
            delegation: 1.0,
            patterns: PatternMix {
                uni: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        let s = generate(&spec).unwrap();
        assert!(!s.oracle_mpd.is_empty());
        for g in &s.oracle_mpd {
            assert!(g.members.iter().any(|m| m.starts_with('a')), "{g:?}");
        }
        for g in &s.oracle_mp {
            assert!(g.members.iter().all(|m| !m.starts_with('a')), "{g:?}");
        }
    }

    #[test]
    fn temporaries_are_temporary() {
        let spec = ScenarioSpec {
            seed: 11,
            noise: 1.0,
            threads: 4,
            ..Default::default()
        };
        let s = generate(&spec).unwrap();
        let trace = Trace::from_text(&s.trace_text()).unwrap();
        let profiles = profile_objects(&trace, &RankingConfig::default());
        let temps: Vec<_> = profiles.iter().filter(|p| p.id.starts_with("tmp")).collect();
        assert!(!temps.is_empty());
        assert!(temps.iter().all(|p| p.is_temporary), "{temps:?}");
        assert!(profiles
            .iter()
            .filter(|p| !p.id.starts_with("tmp"))
            .all(|p| !p.is_temporary));
    }

    #[test]
    fn composite_fixture_shape() {
        let spec = ScenarioSpec {
            patterns: PatternMix {
                uni: 0,
                runi_11: 0,
                runi_1n: 0,
                rcon_11: 0,
                rcon_1n: 1,
                con_11: 0,
                con_1n: 0,
            },
            depth: [2, 2],
            fan_out: [2, 2],
            delegation: 0.0,
            noise: 0.0,
            rounds: 1,
            variant_rate: 0.0,
            threads: 1,
            seed: 5,
        };
        let s = generate(&spec).unwrap();
        assert_eq!(s.expected_patterns.len(), 1);
        assert_eq!(s.expected_patterns[0].kind, "1N-RCon");
        assert_eq!(s.oracle_mp, s.oracle_mpd);
        assert_eq!(s.oracle_mp.len(), 1);
        assert_eq!(s.oracle_mp[0].template_object, "n1_0");
        let trace = Trace::from_text(&s.trace_text()).unwrap();
        let calls = trace.events().iter().filter(|e| e.is_entry()).count();
        // driver frame plus one call per tree node
        assert_eq!(calls, 1 + s.oracle_mp[0].members.len());
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            ScenarioSpec {
                depth: [0, 2],
                ..Default::default()
            },
            ScenarioSpec {
                fan_out: [3, 2],
                ..Default::default()
            },
            ScenarioSpec {
                delegation: 1.5,
                ..Default::default()
            },
            ScenarioSpec {
                threads: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(generate(&spec), Err(Error::InvalidArgument(_))));
        }
        assert!(ScenarioSpec::from_json(r#"{"bogus": 1}"#, "s").is_err());
    }
}
