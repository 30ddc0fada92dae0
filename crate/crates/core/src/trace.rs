//! Execution traces: event vocabulary, loader and indices.
//!
//! The loader makes one streaming pass and builds everything the analyses
//! need: per-thread event lists, entry/exit pairing, the enclosing entry of
//! every event, and first/last appearance of every object.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ThreadId(pub u32);

/// Interned method id as written in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodSym(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldSym(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Owner {
    Static,
    Object(ObjId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Entry {
        method: MethodSym,
        object: ObjId,
        constructor: bool,
    },
    Exit {
        method: MethodSym,
        object: ObjId,
    },
    /// `value` is `None` for primitive or null writes.
    FieldWrite {
        owner: Owner,
        field: FieldSym,
        value: Option<ObjId>,
    },
    FieldRead {
        owner: ObjId,
        field: FieldSym,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub seq: u64,
    pub thread: ThreadId,
    pub kind: EventKind,
}

impl Event {
    pub fn is_entry(&self) -> bool {
        matches!(self.kind, EventKind::Entry { .. })
    }

    pub fn callee(&self) -> Option<ObjId> {
        match self.kind {
            EventKind::Entry { object, .. } | EventKind::Exit { object, .. } => Some(object),
            _ => None,
        }
    }

    pub fn method(&self) -> Option<MethodSym> {
        match self.kind {
            EventKind::Entry { method, .. } | EventKind::Exit { method, .. } => Some(method),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectInfo {
    pub id: String,
    pub type_name: String,
    /// `None` when declared but never referenced by an event.
    pub first_seq: Option<u64>,
    pub last_seq: Option<u64>,
}

impl ObjectInfo {
    pub fn lifetime(&self) -> u64 {
        match (self.first_seq, self.last_seq) {
            (Some(a), Some(b)) => b - a,
            _ => 0,
        }
    }
}

const NONE: u32 = u32::MAX;

/// An indexed, immutable execution trace.
#[derive(Debug, Clone)]
pub struct Trace {
    events: Vec<Event>,
    objects: Vec<ObjectInfo>,
    object_by_id: HashMap<Box<str>, ObjId>,
    methods: Vec<Box<str>>,
    fields: Vec<Box<str>>,
    threads: Vec<Box<str>>,
    thread_events: Vec<Vec<u32>>,
    /// Position of each event inside its thread's list.
    thread_pos: Vec<u32>,
    /// Entry -> matching exit, exit -> entry; `NONE` for field events and
    /// for entries still open at end of file.
    partner: Vec<u32>,
    /// Innermost open entry on the same thread when the event occurred.
    parent: Vec<u32>,
    auto_closed: usize,
}

/// Receives a heartbeat every `interval` loaded events.
pub struct Progress<'a> {
    pub interval: usize,
    pub report: &'a mut dyn FnMut(usize),
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    TraceReader::default().load(path)
}

#[derive(Default)]
pub struct TraceReader<'a> {
    progress: Option<Progress<'a>>,
}

impl<'a> TraceReader<'a> {
    pub fn with_progress(progress: Progress<'a>) -> Self {
        Self {
            progress: Some(progress),
        }
    }

    pub fn load(self, path: impl AsRef<Path>) -> Result<Trace> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        self.read(BufReader::with_capacity(1 << 20, file), &path.display().to_string())
    }

    pub fn read(mut self, input: impl Read, origin: &str) -> Result<Trace> {
        let mut b = Builder::new(origin);
        let mut reader = BufReader::new(input);
        let mut line = String::new();
        let mut lineno = 0usize;
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(|e| Error::io(origin, e))?;
            if n == 0 {
                break;
            }
            lineno += 1;
            b.line(&line, lineno)?;
            if let Some(p) = self.progress.as_mut() {
                if p.interval > 0 && !b.events.is_empty() && b.events.len().is_multiple_of(p.interval) && b.just_pushed
                {
                    (p.report)(b.events.len());
                }
            }
        }
        b.finish()
    }
}

impl Trace {
    pub fn from_text(text: &str) -> Result<Trace> {
        TraceReader::default().read(text.as_bytes(), "<text>")
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, idx: usize) -> &Event {
        &self.events[idx]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn objects(&self) -> &[ObjectInfo] {
        &self.objects
    }

    pub fn object(&self, o: ObjId) -> &ObjectInfo {
        &self.objects[o.0 as usize]
    }

    pub fn object_id(&self, id: &str) -> Option<ObjId> {
        self.object_by_id.get(id).copied()
    }

    pub fn method_name(&self, m: MethodSym) -> &str {
        &self.methods[m.0 as usize]
    }

    pub fn method_syms(&self) -> impl Iterator<Item = (MethodSym, &str)> {
        self.methods
            .iter()
            .enumerate()
            .map(|(i, s)| (MethodSym(i as u32), &**s))
    }

    pub fn field_name(&self, f: FieldSym) -> &str {
        &self.fields[f.0 as usize]
    }

    pub fn thread_name(&self, t: ThreadId) -> &str {
        &self.threads[t.0 as usize]
    }

    pub fn thread_count(&self) -> usize {
        self.threads.len()
    }

    pub fn thread_id(&self, name: &str) -> Option<ThreadId> {
        self.threads
            .iter()
            .position(|t| &**t == name)
            .map(|i| ThreadId(i as u32))
    }

    /// Event indices of one thread, in order.
    pub fn thread_events(&self, t: ThreadId) -> &[u32] {
        &self.thread_events[t.0 as usize]
    }

    /// Number of entries closed implicitly at end of file.
    pub fn auto_closed(&self) -> usize {
        self.auto_closed
    }

    /// Matching exit of an entry (or entry of an exit). `None` for field
    /// events and for entries left open at end of file.
    pub fn partner(&self, idx: usize) -> Option<usize> {
        let p = self.partner[idx];
        (p != NONE).then_some(p as usize)
    }

    /// Innermost entry enclosing `idx` on its thread.
    pub fn parent(&self, idx: usize) -> Option<usize> {
        let p = self.parent[idx];
        (p != NONE).then_some(p as usize)
    }

    /// Callee of the innermost enclosing entry; `None` means the event was
    /// issued from outside any traced frame.
    pub fn caller_of(&self, idx: usize) -> Option<ObjId> {
        self.parent(idx).and_then(|p| self.events[p].callee())
    }

    /// An entry whose callee equals the callee of its enclosing entry.
    pub fn is_self_call(&self, idx: usize) -> bool {
        let e = &self.events[idx];
        match (e.callee(), self.caller_of(idx)) {
            (Some(a), Some(b)) => e.is_entry() && a == b,
            _ => false,
        }
    }

    /// Positions (into this thread's list) spanned by the activation that
    /// starts at entry `idx`, exit included.
    pub fn activation_span(&self, idx: usize) -> std::ops::Range<usize> {
        let t = self.events[idx].thread;
        let start = self.thread_pos[idx] as usize;
        let end = match self.partner(idx) {
            Some(x) => self.thread_pos[x] as usize + 1,
            None => self.thread_events[t.0 as usize].len(),
        };
        start..end
    }

    /// Event indices `i` on `thread` with `start_seq <= seq <= end_seq`.
    pub fn slice(&self, start_seq: u64, end_seq: u64, thread: ThreadId) -> &[u32] {
        let list = &self.thread_events[thread.0 as usize];
        if start_seq > end_seq {
            return &[];
        }
        let lo = list.partition_point(|&i| self.events[i as usize].seq < start_seq);
        let hi = list.partition_point(|&i| self.events[i as usize].seq <= end_seq);
        &list[lo..hi]
    }

    /// Index of the event carrying `seq`.
    pub fn index_of_seq(&self, seq: u64) -> Option<usize> {
        self.events.binary_search_by_key(&seq, |e| e.seq).ok()
    }
}

struct Builder {
    origin: String,
    events: Vec<Event>,
    objects: Vec<ObjectInfo>,
    object_by_id: HashMap<Box<str>, ObjId>,
    methods: Vec<Box<str>>,
    method_by_id: HashMap<Box<str>, MethodSym>,
    fields: Vec<Box<str>>,
    field_by_id: HashMap<Box<str>, FieldSym>,
    threads: Vec<Box<str>>,
    thread_by_id: HashMap<Box<str>, ThreadId>,
    thread_events: Vec<Vec<u32>>,
    stacks: Vec<Vec<u32>>,
    thread_pos: Vec<u32>,
    partner: Vec<u32>,
    parent: Vec<u32>,
    just_pushed: bool,
}

fn intern<T: Copy>(
    map: &mut HashMap<Box<str>, T>,
    list: &mut Vec<Box<str>>,
    key: &str,
    make: impl FnOnce(u32) -> T,
) -> T {
    if let Some(v) = map.get(key) {
        return *v;
    }
    let v = make(list.len() as u32);
    list.push(key.into());
    map.insert(key.into(), v);
    v
}

impl Builder {
    fn new(origin: &str) -> Self {
        Self {
            origin: origin.to_string(),
            events: Vec::new(),
            objects: Vec::new(),
            object_by_id: HashMap::new(),
            methods: Vec::new(),
            method_by_id: HashMap::new(),
            fields: Vec::new(),
            field_by_id: HashMap::new(),
            threads: Vec::new(),
            thread_by_id: HashMap::new(),
            thread_events: Vec::new(),
            stacks: Vec::new(),
            thread_pos: Vec::new(),
            partner: Vec::new(),
            parent: Vec::new(),
            just_pushed: false,
        }
    }

    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.origin.clone(), line, msg)
    }

    fn declare(&mut self, id: &str, type_name: &str, line: usize) -> Result<()> {
        if self.object_by_id.contains_key(id) {
            return Err(self.err(line, format!("object '{id}' declared twice")));
        }
        let o = ObjId(self.objects.len() as u32);
        self.objects.push(ObjectInfo {
            id: id.to_string(),
            type_name: type_name.to_string(),
            first_seq: None,
            last_seq: None,
        });
        self.object_by_id.insert(id.into(), o);
        Ok(())
    }

    fn object(&self, id: &str, line: usize) -> Result<ObjId> {
        self.object_by_id
            .get(id)
            .copied()
            .ok_or_else(|| self.err(line, format!("object '{id}' used before its 'O' declaration")))
    }

    fn touch(&mut self, o: ObjId, seq: u64) {
        let info = &mut self.objects[o.0 as usize];
        if info.first_seq.is_none() {
            info.first_seq = Some(seq);
        }
        info.last_seq = Some(seq);
    }

    fn thread(&mut self, name: &str) -> ThreadId {
        let t = intern(&mut self.thread_by_id, &mut self.threads, name, ThreadId);
        if self.thread_events.len() <= t.0 as usize {
            self.thread_events.push(Vec::new());
            self.stacks.push(Vec::new());
        }
        t
    }

    fn line(&mut self, raw: &str, lineno: usize) -> Result<()> {
        self.just_pushed = false;
        let text = raw.trim_end_matches(['\n', '\r']);
        let mut tok = text.split_ascii_whitespace();
        let Some(tag) = tok.next() else {
            return Ok(());
        };
        if tag.starts_with('#') {
            return Ok(());
        }
        let mut next = |what: &str| -> Result<&str> {
            tok.next()
                .ok_or_else(|| Error::parse(self.origin.clone(), lineno, format!("missing {what}")))
        };
        match tag {
            "O" => {
                let id = next("object id")?;
                let ty = next("type name")?;
                if tok.next().is_some() {
                    return Err(self.err(lineno, "trailing tokens"));
                }
                self.declare(id, ty, lineno)
            }
            "E" | "X" | "W" | "R" => {
                let seq_s = next("seq")?;
                let thread_s = next("thread")?;
                let a = next(match tag {
                    "E" | "X" => "method id",
                    _ => "owner",
                })?;
                let b = next(match tag {
                    "E" | "X" => "object id",
                    _ => "field id",
                })?;
                let c = tok.next();
                let extra = tok.next();
                let seq: u64 = seq_s
                    .parse()
                    .map_err(|_| self.err(lineno, format!("invalid seq '{seq_s}'")))?;
                if let Some(last) = self.events.last() {
                    if seq <= last.seq {
                        return Err(self.err(
                            lineno,
                            format!("seq {seq} is not greater than previous seq {}", last.seq),
                        ));
                    }
                }
                if extra.is_some() {
                    return Err(self.err(lineno, "trailing tokens"));
                }
                let thread = self.thread(thread_s);
                let idx = self.events.len() as u32;
                let stack_top = self.stacks[thread.0 as usize].last().copied().unwrap_or(NONE);
                let mut partner = NONE;
                let kind = match tag {
                    "E" => {
                        let constructor = match c {
                            None => false,
                            Some("C") => true,
                            Some(other) => return Err(self.err(lineno, format!("unexpected flag '{other}'"))),
                        };
                        let method = intern(&mut self.method_by_id, &mut self.methods, a, MethodSym);
                        let object = self.object(b, lineno)?;
                        self.touch(object, seq);
                        self.stacks[thread.0 as usize].push(idx);
                        EventKind::Entry {
                            method,
                            object,
                            constructor,
                        }
                    }
                    "X" => {
                        if c.is_some() {
                            return Err(self.err(lineno, "trailing tokens"));
                        }
                        let method = intern(&mut self.method_by_id, &mut self.methods, a, MethodSym);
                        let object = self.object(b, lineno)?;
                        let open = stack_top;
                        let matches = open != NONE
                            && matches!(self.events[open as usize].kind,
                                EventKind::Entry { method: m, object: o, .. } if m == method && o == object);
                        if !matches {
                            return Err(Error::UnmatchedExit { seq, line: lineno });
                        }
                        self.stacks[thread.0 as usize].pop();
                        self.partner[open as usize] = idx;
                        partner = open;
                        self.touch(object, seq);
                        EventKind::Exit { method, object }
                    }
                    "W" => {
                        let Some(value_s) = c else {
                            return Err(self.err(lineno, "missing value"));
                        };
                        let owner = if a == "STATIC" {
                            Owner::Static
                        } else {
                            let o = self.object(a, lineno)?;
                            self.touch(o, seq);
                            Owner::Object(o)
                        };
                        let field = intern(&mut self.field_by_id, &mut self.fields, b, FieldSym);
                        let value = if value_s == "-" {
                            None
                        } else {
                            let v = self.object(value_s, lineno)?;
                            self.touch(v, seq);
                            Some(v)
                        };
                        EventKind::FieldWrite { owner, field, value }
                    }
                    _ => {
                        if c.is_some() {
                            return Err(self.err(lineno, "trailing tokens"));
                        }
                        let owner = self.object(a, lineno)?;
                        self.touch(owner, seq);
                        let field = intern(&mut self.field_by_id, &mut self.fields, b, FieldSym);
                        EventKind::FieldRead { owner, field }
                    }
                };
                // An exit's enclosing entry is the entry's own parent.
                let parent = if tag == "X" {
                    self.parent[partner as usize]
                } else {
                    stack_top
                };
                self.thread_pos.push(self.thread_events[thread.0 as usize].len() as u32);
                self.thread_events[thread.0 as usize].push(idx);
                self.partner.push(partner);
                self.parent.push(parent);
                self.events.push(Event { seq, thread, kind });
                self.just_pushed = true;
                Ok(())
            }
            other => Err(self.err(lineno, format!("unknown record type '{other}'"))),
        }
    }

    fn finish(self) -> Result<Trace> {
        let auto_closed: usize = self.stacks.iter().map(Vec::len).sum();
        if auto_closed > 0 {
            log::warn!(
                "{}: {auto_closed} entr{} still open at end of trace; closed implicitly",
                self.origin,
                if auto_closed == 1 { "y" } else { "ies" }
            );
        }
        Ok(Trace {
            events: self.events,
            objects: self.objects,
            object_by_id: self.object_by_id,
            methods: self.methods,
            fields: self.fields,
            threads: self.threads,
            thread_events: self.thread_events,
            thread_pos: self.thread_pos,
            partner: self.partner,
            parent: self.parent,
            auto_closed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NESTED: &str = "\
O a A
O b B
E 1 main A#run a
E 2 main B#go b
X 3 main B#go b
X 4 main A#run a
";

    #[test]
    fn pairs_nested_calls() {
        let t = Trace::from_text(NESTED).unwrap();
        assert_eq!(t.partner(0), Some(3));
        assert_eq!(t.partner(1), Some(2));
        assert_eq!(t.partner(3), Some(0));
        assert_eq!(t.auto_closed(), 0);
    }

    #[test]
    fn pairs_per_thread() {
        let text = "\
O a A
O b B
E 1 t1 A#run a
E 2 t2 B#go b
X 3 t1 A#run a
E 4 t2 A#run a
X 5 t2 A#run a
X 6 t2 B#go b
";
        let t = Trace::from_text(text).unwrap();
        assert_eq!(t.partner(0), Some(2));
        assert_eq!(t.partner(1), Some(5));
        assert_eq!(t.partner(3), Some(4));
        assert_eq!(t.caller_of(3), t.object_id("b"));
        assert_eq!(t.caller_of(0), None);
    }

    #[test]
    fn unmatched_exit_is_an_error() {
        let err = Trace::from_text("O a A\nE 1 m A#f a\nX 2 m A#f a\nX 3 m A#f a\n").unwrap_err();
        assert!(matches!(err, Error::UnmatchedExit { seq: 3, line: 4 }), "{err:?}");
        let err = Trace::from_text("O a A\nO b B\nE 1 m A#f a\nX 2 m B#f b\n").unwrap_err();
        assert!(matches!(err, Error::UnmatchedExit { seq: 2, .. }), "{err:?}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = Trace::from_text("O a A\nE 1 m A#f a\nE x m A#f a\n").unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, "3"),
            other => panic!("{other:?}"),
        }
        assert!(Trace::from_text("Q 1 m\n").is_err());
        assert!(Trace::from_text("O a A\nE 2 m A#f a\nE 1 m A#f a\n").is_err());
        assert!(Trace::from_text("E 1 m A#f ghost\n").is_err());
    }

    #[test]
    fn auto_closes_truncated_traces() {
        let t = Trace::from_text("O a A\nE 1 m A#f a\nE 2 m A#g a\nX 3 m A#g a\n").unwrap();
        assert_eq!(t.auto_closed(), 1);
        assert_eq!(t.partner(0), None);
        assert_eq!(t.activation_span(0), 0..3);
    }

    #[test]
    fn caller_semantics() {
        let text = "\
O a A
O b B
E 1 m A#run a
E 2 m A#helper a
E 3 m B#go b
X 4 m B#go b
X 5 m A#helper a
X 6 m A#run a
";
        let t = Trace::from_text(text).unwrap();
        assert_eq!(t.caller_of(0), None);
        assert_eq!(t.caller_of(1), t.object_id("a"));
        assert!(t.is_self_call(1));
        assert_eq!(t.caller_of(2), t.object_id("a"));
        assert!(!t.is_self_call(2));
        assert!(!t.is_self_call(0));
    }

    #[test]
    fn slice_filters_by_thread_and_range() {
        let text = "\
O a A
O b B
E 1 t1 A#run a
E 2 t2 B#go b
X 3 t1 A#run a
X 4 t2 B#go b
";
        let t = Trace::from_text(text).unwrap();
        let t1 = t.thread_id("t1").unwrap();
        assert_eq!(t.slice(1, 4, t1), &[0, 2]);
        assert_eq!(t.slice(2, 2, t.thread_id("t2").unwrap()), &[1]);
        assert_eq!(t.slice(3, 3, t1), &[2]);
        assert!(t.slice(4, 1, t1).is_empty());
    }

    #[test]
    fn field_events_and_object_lifetimes() {
        let text = "\
O a A
O b B
E 10 m A#run a
W 11 m STATIC App.main a
W 12 m a A.child b
W 13 m a A.count -
R 14 m b B.size
X 20 m A#run a
";
        let t = Trace::from_text(text).unwrap();
        let a = t.object_id("a").unwrap();
        let b = t.object_id("b").unwrap();
        assert_eq!(t.object(a).lifetime(), 10);
        assert_eq!(t.object(b).first_seq, Some(12));
        assert_eq!(t.object(b).last_seq, Some(14));
        assert_eq!(
            t.event(1).kind,
            EventKind::FieldWrite {
                owner: Owner::Static,
                field: FieldSym(0),
                value: Some(a)
            }
        );
        assert_eq!(t.caller_of(4), Some(a));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let t = Trace::from_text("# header\n\nO a A\nE 1 m A#f a # no\n").unwrap_err();
        assert!(matches!(t, Error::Parse { .. }));
        let t = Trace::from_text("# header\n\nO a A\nE 1 m A#f a\nX 2 m A#f a\n").unwrap();
        assert_eq!(t.len(), 2);
    }
}
