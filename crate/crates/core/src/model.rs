//! Static code facts: types, methods, fields and invocation sites.
//!
//! A code-model file is a JSON document with four top-level arrays
//! (`types`, `methods`, `fields`, `invocations`). Ids are opaque strings and
//! are resolved to dense indices on load; every reference is checked.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TypeIdx(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodIdx(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldIdx(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeKind {
    Class,
    Interface,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub id: String,
    pub name: String,
    pub kind: TypeKind,
    #[serde(default)]
    pub supertype_ids: Vec<String>,
    #[serde(default)]
    pub is_library_root: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodDecl {
    pub id: String,
    pub name: String,
    pub declaring_type: String,
    #[serde(default)]
    pub is_constructor: bool,
    #[serde(default)]
    pub is_static: bool,
    /// Overridden methods. Producers should list the transitive closure;
    /// the loader closes it anyway.
    #[serde(default)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub id: String,
    pub name: String,
    pub declaring_type: String,
    /// A type id from this model, or the name of a type outside it. For
    /// collection fields this is the element type.
    pub declared_type: String,
    #[serde(default)]
    pub is_collection: bool,
    #[serde(default)]
    pub is_static: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverKind {
    /// `this.` or `super.`
    ThisOrSuper,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationSite {
    pub caller_method: String,
    pub callee_method: String,
    pub receiver_kind: ReceiverKind,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CodeModelFile {
    #[serde(default)]
    types: Vec<TypeDecl>,
    #[serde(default)]
    methods: Vec<MethodDecl>,
    #[serde(default)]
    fields: Vec<FieldDecl>,
    #[serde(default)]
    invocations: Vec<InvocationSite>,
}

/// Validated, immutable code model.
#[derive(Debug, Clone)]
pub struct CodeModel {
    types: Vec<TypeDecl>,
    methods: Vec<MethodDecl>,
    fields: Vec<FieldDecl>,
    invocations: Vec<InvocationSite>,

    type_by_id: HashMap<String, TypeIdx>,
    method_by_id: HashMap<String, MethodIdx>,
    field_by_id: HashMap<String, FieldIdx>,
    /// Strict ancestors of each type, sorted.
    ancestors: Vec<Vec<TypeIdx>>,
    method_type: Vec<TypeIdx>,
    overrides: Vec<Vec<MethodIdx>>,
    overridden_by: Vec<Vec<MethodIdx>>,
    field_owner: Vec<TypeIdx>,
    field_target: Vec<Option<TypeIdx>>,
    sites: Vec<ResolvedSite>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedSite {
    pub caller: MethodIdx,
    pub callee: MethodIdx,
    pub receiver: ReceiverKind,
}

impl PartialEq for CodeModel {
    fn eq(&self, other: &Self) -> bool {
        self.types == other.types
            && self.methods == other.methods
            && self.fields == other.fields
            && self.invocations == other.invocations
    }
}

pub fn load_code_model(path: impl AsRef<Path>) -> Result<CodeModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CodeModel::from_json(&text, &path.display().to_string())
}

/// True iff `a == b` or `a` transitively extends/implements `b`.
pub fn subtype_of(model: &CodeModel, a: &str, b: &str) -> Result<bool> {
    let a = model.type_idx(a)?;
    let b = model.type_idx(b)?;
    Ok(model.is_subtype(a, b))
}

impl CodeModel {
    pub fn empty() -> Self {
        Self::from_parts(Vec::new(), Vec::new(), Vec::new(), Vec::new(), "<empty>").expect("empty model is valid")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let file: CodeModelFile = serde_json::from_str(text)
            .map_err(|e| Error::parse(origin, format!("{}:{}", e.line(), e.column()), e.to_string()))?;
        Self::from_parts(file.types, file.methods, file.fields, file.invocations, origin)
    }

    pub fn to_json(&self) -> String {
        let file = CodeModelFile {
            types: self.types.clone(),
            methods: self.methods.clone(),
            fields: self.fields.clone(),
            invocations: self.invocations.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_parts(
        types: Vec<TypeDecl>,
        methods: Vec<MethodDecl>,
        fields: Vec<FieldDecl>,
        invocations: Vec<InvocationSite>,
        origin: &str,
    ) -> Result<Self> {
        let bad = |loc: String, msg: String| Error::integrity(origin, loc, msg);

        let mut type_by_id = HashMap::with_capacity(types.len());
        for (i, t) in types.iter().enumerate() {
            if type_by_id.insert(t.id.clone(), TypeIdx(i as u32)).is_some() {
                return Err(bad(format!("types[{i}].id"), format!("duplicate type id '{}'", t.id)));
            }
        }
        let mut supers: Vec<Vec<TypeIdx>> = Vec::with_capacity(types.len());
        for (i, t) in types.iter().enumerate() {
            if t.is_library_root && !t.supertype_ids.is_empty() {
                return Err(bad(
                    format!("types[{i}].supertype_ids"),
                    format!("library root '{}' must not have supertypes", t.id),
                ));
            }
            let mut direct = Vec::with_capacity(t.supertype_ids.len());
            for s in &t.supertype_ids {
                let idx = type_by_id.get(s).copied().ok_or_else(|| {
                    bad(
                        format!("types[{i}].supertype_ids"),
                        format!("unknown supertype id '{s}'"),
                    )
                })?;
                direct.push(idx);
            }
            supers.push(direct);
        }
        let ancestors = close_ancestors(&supers).map_err(|cyc| {
            bad(
                format!("types[{}]", cyc.0),
                format!("supertype cycle through '{}'", types[cyc.0 as usize].id),
            )
        })?;

        let mut method_by_id = HashMap::with_capacity(methods.len());
        let mut method_type = Vec::with_capacity(methods.len());
        for (i, m) in methods.iter().enumerate() {
            if method_by_id.insert(m.id.clone(), MethodIdx(i as u32)).is_some() {
                return Err(bad(
                    format!("methods[{i}].id"),
                    format!("duplicate method id '{}'", m.id),
                ));
            }
            let t = type_by_id.get(&m.declaring_type).copied().ok_or_else(|| {
                bad(
                    format!("methods[{i}].declaring_type"),
                    format!("unknown type id '{}'", m.declaring_type),
                )
            })?;
            method_type.push(t);
        }

        let mut direct_overrides = Vec::with_capacity(methods.len());
        for (i, m) in methods.iter().enumerate() {
            if m.is_constructor && !m.overrides.is_empty() {
                return Err(bad(
                    format!("methods[{i}].overrides"),
                    format!("constructor '{}' cannot override", m.id),
                ));
            }
            let mut list = Vec::with_capacity(m.overrides.len());
            for o in &m.overrides {
                let oi = method_by_id
                    .get(o)
                    .copied()
                    .ok_or_else(|| bad(format!("methods[{i}].overrides"), format!("unknown method id '{o}'")))?;
                let target = &methods[oi.0 as usize];
                let sub = method_type[i];
                let sup = method_type[oi.0 as usize];
                if target.name != m.name || sub == sup || !ancestors[sub.0 as usize].contains(&sup) {
                    return Err(bad(
                        format!("methods[{i}].overrides"),
                        format!(
                            "'{}' cannot override '{o}': overridden methods must share the name and live in a supertype",
                            m.id
                        ),
                    ));
                }
                list.push(oi);
            }
            direct_overrides.push(list);
        }
        let overrides = close_overrides(&direct_overrides);
        let mut overridden_by = vec![Vec::new(); methods.len()];
        for (i, sups) in overrides.iter().enumerate() {
            for s in sups {
                overridden_by[s.0 as usize].push(MethodIdx(i as u32));
            }
        }

        let mut field_by_id = HashMap::with_capacity(fields.len());
        let mut field_owner = Vec::with_capacity(fields.len());
        let mut field_target = Vec::with_capacity(fields.len());
        for (i, f) in fields.iter().enumerate() {
            if field_by_id.insert(f.id.clone(), FieldIdx(i as u32)).is_some() {
                return Err(bad(format!("fields[{i}].id"), format!("duplicate field id '{}'", f.id)));
            }
            let owner = type_by_id.get(&f.declaring_type).copied().ok_or_else(|| {
                bad(
                    format!("fields[{i}].declaring_type"),
                    format!("unknown type id '{}'", f.declaring_type),
                )
            })?;
            field_owner.push(owner);
            field_target.push(type_by_id.get(&f.declared_type).copied());
        }

        let mut sites = Vec::with_capacity(invocations.len());
        for (i, s) in invocations.iter().enumerate() {
            let caller = method_by_id.get(&s.caller_method).copied().ok_or_else(|| {
                bad(
                    format!("invocations[{i}].caller_method"),
                    format!("unknown method id '{}'", s.caller_method),
                )
            })?;
            let callee = method_by_id.get(&s.callee_method).copied().ok_or_else(|| {
                bad(
                    format!("invocations[{i}].callee_method"),
                    format!("unknown method id '{}'", s.callee_method),
                )
            })?;
            sites.push(ResolvedSite {
                caller,
                callee,
                receiver: s.receiver_kind,
            });
        }

        Ok(Self {
            types,
            methods,
            fields,
            invocations,
            type_by_id,
            method_by_id,
            field_by_id,
            ancestors,
            method_type,
            overrides,
            overridden_by,
            field_owner,
            field_target,
            sites,
        })
    }

    pub fn types(&self) -> &[TypeDecl] {
        &self.types
    }

    pub fn methods(&self) -> &[MethodDecl] {
        &self.methods
    }

    pub fn fields(&self) -> &[FieldDecl] {
        &self.fields
    }

    pub fn invocations(&self) -> &[InvocationSite] {
        &self.invocations
    }

    pub fn sites(&self) -> &[ResolvedSite] {
        &self.sites
    }

    pub fn type_idx(&self, id: &str) -> Result<TypeIdx> {
        self.type_by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::unknown("type", id))
    }

    pub fn method_idx(&self, id: &str) -> Result<MethodIdx> {
        self.method_by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::unknown("method", id))
    }

    pub fn find_method(&self, id: &str) -> Option<MethodIdx> {
        self.method_by_id.get(id).copied()
    }

    pub fn field_idx(&self, id: &str) -> Result<FieldIdx> {
        self.field_by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::unknown("field", id))
    }

    pub fn type_decl(&self, t: TypeIdx) -> &TypeDecl {
        &self.types[t.0 as usize]
    }

    pub fn method(&self, m: MethodIdx) -> &MethodDecl {
        &self.methods[m.0 as usize]
    }

    pub fn method_type(&self, m: MethodIdx) -> TypeIdx {
        self.method_type[m.0 as usize]
    }

    /// Transitive overrides of `m`.
    pub fn overrides(&self, m: MethodIdx) -> &[MethodIdx] {
        &self.overrides[m.0 as usize]
    }

    /// Methods that (transitively) override `m`.
    pub fn overridden_by(&self, m: MethodIdx) -> &[MethodIdx] {
        &self.overridden_by[m.0 as usize]
    }

    pub fn is_subtype(&self, a: TypeIdx, b: TypeIdx) -> bool {
        a == b || self.ancestors[a.0 as usize].binary_search(&b).is_ok()
    }

    /// Fields declared by `t` or inherited from its supertypes.
    pub fn fields_of(&self, t: TypeIdx) -> impl Iterator<Item = (FieldIdx, &FieldDecl)> + '_ {
        self.fields.iter().enumerate().filter_map(move |(i, f)| {
            let owner = self.field_owner[i];
            self.is_subtype(t, owner).then_some((FieldIdx(i as u32), f))
        })
    }

    pub fn field_target(&self, f: FieldIdx) -> Option<TypeIdx> {
        self.field_target[f.0 as usize]
    }
}

struct Cycle(u32);

fn close_ancestors(direct: &[Vec<TypeIdx>]) -> std::result::Result<Vec<Vec<TypeIdx>>, Cycle> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let n = direct.len();
    let mut mark = vec![Mark::New; n];
    let mut out: Vec<Vec<TypeIdx>> = vec![Vec::new(); n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // iterative post-order DFS
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Active;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < direct[node].len() {
                let child = direct[node][*next].0 as usize;
                *next += 1;
                match mark[child] {
                    Mark::New => {
                        mark[child] = Mark::Active;
                        stack.push((child, 0));
                    }
                    Mark::Active => return Err(Cycle(child as u32)),
                    Mark::Done => {}
                }
            } else {
                let mut acc: Vec<TypeIdx> = Vec::new();
                for s in &direct[node] {
                    acc.push(*s);
                    acc.extend_from_slice(&out[s.0 as usize]);
                }
                acc.sort_unstable();
                acc.dedup();
                out[node] = acc;
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    Ok(out)
}

fn close_overrides(direct: &[Vec<MethodIdx>]) -> Vec<Vec<MethodIdx>> {
    // Override edges point into strict supertypes, and the type graph is
    // acyclic, so plain DFS terminates.
    direct
        .iter()
        .map(|d| {
            let mut seen: HashSet<MethodIdx> = HashSet::new();
            let mut stack: Vec<MethodIdx> = d.clone();
            while let Some(m) = stack.pop() {
                if seen.insert(m) {
                    stack.extend_from_slice(&direct[m.0 as usize]);
                }
            }
            let mut v: Vec<MethodIdx> = seen.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect()
}
