//! The math-network plugin: record interpretation, skeleton extraction,
//! inherited sort pairs and semantic propagation.
//!
//! Records are read as JSON objects with the fields `sort`, `source`,
//! `title`, `state`, `content` and `notes`. Anything else (plain strings,
//! non-object JSON) still parses: it becomes an unknown/unknown record with
//! the raw text in `notes`.
//!
//! The skeleton keeps atoms as nodes and width-1 nerves over two atoms as
//! directed edges `ref[0] -> ref[1]`, the first ref being the dependency and
//! the second the dependent.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::store::{HashId, Store};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    Definition,
    Theorem,
    Lemma,
    Proposition,
    Corollary,
    Example,
    Proof,
    #[default]
    Unknown,
}

impl Sort {
    pub const ALL: [Sort; 7] = [
        Sort::Definition,
        Sort::Theorem,
        Sort::Lemma,
        Sort::Proposition,
        Sort::Corollary,
        Sort::Example,
        Sort::Proof,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Sort::Definition => "definition",
            Sort::Theorem => "theorem",
            Sort::Lemma => "lemma",
            Sort::Proposition => "proposition",
            Sort::Corollary => "corollary",
            Sort::Example => "example",
            Sort::Proof => "proof",
            Sort::Unknown => "unknown",
        }
    }

    /// Recognised sort names map to their variant, anything else to `Unknown`.
    pub fn from_name(name: &str) -> Sort {
        Sort::ALL
            .into_iter()
            .find(|s| s.as_str() == name)
            .unwrap_or(Sort::Unknown)
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Tex,
    Lean,
    #[default]
    Unknown,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Tex => "tex",
            Source::Lean => "lean",
            Source::Unknown => "unknown",
        }
    }

    pub fn from_name(name: &str) -> Source {
        match name {
            "tex" => Source::Tex,
            "lean" => Source::Lean,
            _ => Source::Unknown,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match Source::from_name(s) {
            Source::Unknown if s != "unknown" => Err(format!("unknown source `{s}`")),
            source => Ok(source),
        }
    }
}

/// Plugin-level view of a record string.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RecordFields {
    pub sort: Sort,
    /// The authored sort string when it is not one of the recognised sorts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_sort: Option<String>,
    pub source: Source,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_source: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    /// Keys outside the known field set, kept in their authored order.
    #[serde(skip_serializing_if = "Map::is_empty")]
    pub extra: Map<String, Value>,
    /// Whether the record was a JSON object.
    pub structured: bool,
}

/// Total parse: never fails, whatever the record holds.
pub fn parse_record(record: &str) -> RecordFields {
    let object = match serde_json::from_str::<Value>(record) {
        Ok(Value::Object(map)) => map,
        _ => {
            return RecordFields {
                notes: (!record.is_empty()).then(|| record.to_string()),
                ..RecordFields::default()
            }
        }
    };
    let mut fields = RecordFields {
        structured: true,
        ..RecordFields::default()
    };
    for (key, value) in object {
        let text = match &value {
            Value::String(s) => Some(s.clone()),
            _ => None,
        };
        match (key.as_str(), text) {
            ("sort", Some(s)) => {
                fields.sort = Sort::from_name(&s);
                if fields.sort == Sort::Unknown {
                    fields.raw_sort = Some(s);
                }
            }
            ("source", Some(s)) => {
                fields.source = Source::from_name(&s);
                if fields.source == Source::Unknown {
                    fields.raw_source = Some(s);
                }
            }
            ("title", Some(s)) => fields.title = Some(s),
            ("notes", Some(s)) => fields.notes = Some(s),
            ("content", Some(s)) => fields.content = Some(s),
            ("state", Some(s)) => fields.state = Some(s),
            _ => {
                fields.extra.insert(key, value);
            }
        }
    }
    fields
}

impl RecordFields {
    pub fn new(sort: Sort, source: Source) -> Self {
        RecordFields {
            sort,
            source,
            structured: true,
            ..RecordFields::default()
        }
    }

    /// Sort used for grouping and pair derivation.
    ///
    /// For plain-text records whose first word names a sort (`"lemma ..."`)
    /// that sort is used; otherwise this is `sort`.
    pub fn effective_sort(&self) -> Sort {
        if self.sort != Sort::Unknown || self.structured {
            return self.sort;
        }
        self.notes
            .as_deref()
            .and_then(|n| n.split_whitespace().next())
            .map(Sort::from_name)
            .unwrap_or(Sort::Unknown)
    }

    /// JSON record with keys in the order sort, source, title, state,
    /// content, notes, then any extra keys. Absent fields are omitted.
    pub fn to_record(&self) -> String {
        let mut map = Map::new();
        let sort = match (self.sort, &self.raw_sort) {
            (Sort::Unknown, Some(raw)) => Some(raw.clone()),
            (Sort::Unknown, None) => None,
            (s, _) => Some(s.as_str().to_string()),
        };
        let source = match (self.source, &self.raw_source) {
            (Source::Unknown, Some(raw)) => Some(raw.clone()),
            (Source::Unknown, None) => None,
            (s, _) => Some(s.as_str().to_string()),
        };
        let ordered = [
            ("sort", sort),
            ("source", source),
            ("title", self.title.clone()),
            ("state", self.state.clone()),
            ("content", self.content.clone()),
            ("notes", self.notes.clone()),
        ];
        for (key, value) in ordered {
            if let Some(v) = value {
                map.insert(key.to_string(), Value::String(v));
            }
        }
        for (k, v) in &self.extra {
            map.insert(k.clone(), v.clone());
        }
        Value::Object(map).to_string()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LeanNetsError {
    #[error("{id} is not a skeleton edge")]
    NotAnEdge { id: HashId },
    #[error("{id} is not an atom of the skeleton")]
    UnknownAtom { id: HashId },
    #[error("no nerve with id {id}")]
    NotFound { id: HashId },
    #[error("{id} is an atom; structural fields are inherited only by relations")]
    NotARelation { id: HashId },
}

impl LeanNetsError {
    pub fn code(&self) -> &'static str {
        match self {
            LeanNetsError::NotAnEdge { .. } => "not_an_edge",
            LeanNetsError::UnknownAtom { .. } | LeanNetsError::NotFound { .. } => "unknown_id",
            LeanNetsError::NotARelation { .. } => "not_a_relation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkeletonEdge {
    pub id: HashId,
    pub from: HashId,
    pub to: HashId,
    pub fields: RecordFields,
}

/// Directed graph of atoms and width-1 atom-to-atom nerves.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SkeletonGraph {
    nodes: BTreeMap<HashId, RecordFields>,
    /// Ascending by edge id.
    edges: Vec<SkeletonEdge>,
}

/// Atoms become nodes; width-1 nerves whose two refs are atoms become edges.
/// Wider nerves and relations touching non-atoms are left out.
pub fn extract_skeleton(store: &Store) -> SkeletonGraph {
    let is_atom = |id: &HashId| store.get(id.as_str()).is_some_and(|n| n.width() == 0);
    let nodes = store
        .iter()
        .filter(|n| n.width() == 0)
        .map(|n| (n.id.clone(), parse_record(&n.record)))
        .collect();
    let edges = store
        .iter()
        .filter(|n| n.refs.len() == 2 && n.refs.iter().all(is_atom))
        .map(|n| SkeletonEdge {
            id: n.id.clone(),
            from: n.refs[0].clone(),
            to: n.refs[1].clone(),
            fields: parse_record(&n.record),
        })
        .collect();
    SkeletonGraph { nodes, edges }
}

impl SkeletonGraph {
    /// Builds a graph directly; edges with unknown endpoints are dropped.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = (HashId, RecordFields)>,
        edges: impl IntoIterator<Item = SkeletonEdge>,
    ) -> Self {
        let nodes: BTreeMap<HashId, RecordFields> = nodes.into_iter().collect();
        let mut edges: Vec<SkeletonEdge> = edges
            .into_iter()
            .filter(|e| nodes.contains_key(&e.from) && nodes.contains_key(&e.to))
            .collect();
        edges.sort_by(|a, b| a.id.cmp(&b.id));
        SkeletonGraph { nodes, edges }
    }

    pub fn nodes(&self) -> &BTreeMap<HashId, RecordFields> {
        &self.nodes
    }

    pub fn edges(&self) -> &[SkeletonEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&RecordFields> {
        self.nodes.get(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: &str) -> Option<&SkeletonEdge> {
        self.edges.iter().find(|e| e.id.as_str() == id)
    }

    pub fn is_cross_source(&self, edge: &SkeletonEdge) -> bool {
        self.nodes[&edge.from].source != self.nodes[&edge.to].source
    }

    /// Induced subgraph on the nodes of one source. Cross-source edges never
    /// survive this restriction.
    pub fn restrict_to_source(&self, source: Source) -> SkeletonGraph {
        let nodes: BTreeMap<HashId, RecordFields> = self
            .nodes
            .iter()
            .filter(|(_, f)| f.source == source)
            .map(|(id, f)| (id.clone(), f.clone()))
            .collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| nodes.contains_key(&e.from) && nodes.contains_key(&e.to))
            .cloned()
            .collect();
        SkeletonGraph { nodes, edges }
    }

    /// One induced subgraph per source present among the nodes.
    pub fn partition(&self) -> BTreeMap<Source, SkeletonGraph> {
        let sources: BTreeSet<Source> = self.nodes.values().map(|f| f.source).collect();
        sources
            .into_iter()
            .map(|s| (s, self.restrict_to_source(s)))
            .collect()
    }

    /// Distinct successors of every node, ascending.
    pub fn successors(&self) -> BTreeMap<&HashId, BTreeSet<&HashId>> {
        let mut out: BTreeMap<&HashId, BTreeSet<&HashId>> =
            self.nodes.keys().map(|id| (id, BTreeSet::new())).collect();
        for e in &self.edges {
            out.entry(&e.from).or_default().insert(&e.to);
        }
        out
    }

    fn predecessors(&self) -> BTreeMap<&HashId, BTreeSet<&HashId>> {
        let mut out: BTreeMap<&HashId, BTreeSet<&HashId>> =
            self.nodes.keys().map(|id| (id, BTreeSet::new())).collect();
        for e in &self.edges {
            out.entry(&e.to).or_default().insert(&e.from);
        }
        out
    }
}

/// Traversal direction for [`propagate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Dependency to dependent (`ref[0] -> ref[1]`).
    #[default]
    Forward,
    /// Dependent to dependency.
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AffectedSet {
    pub changed: HashId,
    /// BFS discovery order.
    pub affected: Vec<HashId>,
    pub hop_distance: BTreeMap<HashId, usize>,
}

/// Flags every atom reachable from `changed`, visiting neighbours in
/// ascending id order.
pub fn propagate(
    skeleton: &SkeletonGraph,
    changed: &str,
    direction: Direction,
) -> Result<AffectedSet, LeanNetsError> {
    let Some((start, _)) = skeleton.nodes.get_key_value(changed) else {
        return Err(LeanNetsError::UnknownAtom { id: changed.into() });
    };
    let next = match direction {
        Direction::Forward => skeleton.successors(),
        Direction::Reverse => skeleton.predecessors(),
    };
    let mut hop_distance = BTreeMap::new();
    let mut affected = Vec::new();
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([(start, 0usize)]);
    while let Some((v, hops)) = queue.pop_front() {
        for &w in &next[v] {
            if seen.insert(w) {
                affected.push(w.clone());
                hop_distance.insert(w.clone(), hops + 1);
                queue.push_back((w, hops + 1));
            }
        }
    }
    Ok(AffectedSet {
        changed: start.clone(),
        affected,
        hop_distance,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SortPair {
    pub pair: (Sort, Sort),
    pub source_pair: (Source, Source),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meaning: Option<&'static str>,
}

impl SortPair {
    pub fn new(from: &RecordFields, to: &RecordFields) -> Self {
        let pair = (from.effective_sort(), to.effective_sort());
        SortPair {
            pair,
            source_pair: (from.source, to.source),
            meaning: pair_meaning(pair),
        }
    }
}

/// Conventional reading of an edge's sort pair.
pub fn pair_meaning(pair: (Sort, Sort)) -> Option<&'static str> {
    match pair {
        (Sort::Theorem, Sort::Proof) => Some("Statement–proof link"),
        (Sort::Theorem, Sort::Definition) => Some("Depends on definition"),
        (Sort::Proof, Sort::Lemma) => Some("Proof cites lemma"),
        (Sort::Theorem, Sort::Theorem) => Some("Cross-source correspondence"),
        _ => None,
    }
}

fn atom_fields(store: &Store, id: &HashId) -> Option<RecordFields> {
    store
        .get(id.as_str())
        .filter(|n| n.width() == 0)
        .map(|n| parse_record(&n.record))
}

/// Sort and source pair of an edge, read off its two endpoint atoms.
pub fn derive_sort_pair(store: &Store, edge_id: &str) -> Result<SortPair, LeanNetsError> {
    let not_edge = || LeanNetsError::NotAnEdge { id: edge_id.into() };
    let nerve = store.get(edge_id).ok_or_else(not_edge)?;
    if nerve.refs.len() != 2 {
        return Err(not_edge());
    }
    let from = atom_fields(store, &nerve.refs[0]).ok_or_else(not_edge)?;
    let to = atom_fields(store, &nerve.refs[1]).ok_or_else(not_edge)?;
    Ok(SortPair::new(&from, &to))
}

/// `(sort, source)` of each reference, in reference order. Referenced
/// relations contribute their own parsed record; nothing is recursed into.
pub fn inherited_fields(store: &Store, nerve_id: &str) -> Result<Vec<(Sort, Source)>, LeanNetsError> {
    let nerve = store
        .get(nerve_id)
        .ok_or_else(|| LeanNetsError::NotFound { id: nerve_id.into() })?;
    if nerve.width() == 0 {
        return Err(LeanNetsError::NotARelation { id: nerve_id.into() });
    }
    nerve
        .refs
        .iter()
        .map(|r| {
            let target = store
                .get(r.as_str())
                .ok_or_else(|| LeanNetsError::NotFound { id: r.clone() })?;
            let f = parse_record(&target.record);
            Ok((f.effective_sort(), f.source))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntryRef {
    pub hash: HashId,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct EntryRefScan {
    pub refs: Vec<EntryRef>,
    pub malformed: usize,
}

const ENTRYREF: &str = "\\entryref";

/// Collects `\entryref{hash}{text}` occurrences from the notes, in order.
/// The display text may contain balanced braces; anything that does not
/// parse is skipped and counted.
pub fn scan_entryrefs(fields: &RecordFields) -> EntryRefScan {
    let mut scan = EntryRefScan::default();
    let Some(notes) = fields.notes.as_deref() else {
        return scan;
    };
    let mut rest = notes;
    while let Some(at) = rest.find(ENTRYREF) {
        let after = &rest[at + ENTRYREF.len()..];
        match parse_entryref_args(after) {
            Some((hash, display, used)) => {
                scan.refs.push(EntryRef {
                    hash: HashId::new(hash),
                    display: display.to_string(),
                });
                rest = &after[used..];
            }
            None => {
                scan.malformed += 1;
                rest = after;
            }
        }
    }
    scan
}

fn parse_entryref_args(text: &str) -> Option<(&str, &str, usize)> {
    // A longer macro name such as \entryrefs is not ours.
    if text.starts_with(|c: char| c.is_ascii_alphabetic()) {
        return None;
    }
    let (hash, hash_end) = braced(text, 0)?;
    if hash.is_empty() || hash.chars().any(|c| c.is_whitespace() || c == '{') {
        return None;
    }
    let (display, end) = braced(text, hash_end)?;
    Some((hash, display, end))
}

/// Reads a `{...}` group starting exactly at `start`, honouring nesting.
/// Returns the inner text and the index just past the closing brace.
fn braced(text: &str, start: usize) -> Option<(&str, usize)> {
    let bytes = text.as_bytes();
    if bytes.get(start) != Some(&b'{') {
        return None;
    }
    let mut depth = 0usize;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        match b {
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((&text[start + 1..i], i + 1));
                }
            }
            _ => {}
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportNode {
    pub id: HashId,
    pub sort: String,
    pub source: String,
    pub title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportEdge {
    pub id: HashId,
    pub from: HashId,
    pub to: HashId,
    pub sort_pair: [String; 2],
    pub source_pair: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meaning: Option<String>,
    pub notes: Option<String>,
}

/// Network payload shared by the CLI export and the HTTP API.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkExport {
    pub nodes: Vec<ExportNode>,
    pub edges: Vec<ExportEdge>,
}

impl SkeletonGraph {
    pub fn export(&self) -> NetworkExport {
        let nodes = self
            .nodes
            .iter()
            .map(|(id, f)| ExportNode {
                id: id.clone(),
                sort: f.effective_sort().as_str().to_string(),
                source: f.source.as_str().to_string(),
                title: f.title.clone(),
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let sp = SortPair::new(&self.nodes[&e.from], &self.nodes[&e.to]);
                ExportEdge {
                    id: e.id.clone(),
                    from: e.from.clone(),
                    to: e.to.clone(),
                    sort_pair: [sp.pair.0.to_string(), sp.pair.1.to_string()],
                    source_pair: [sp.source_pair.0.to_string(), sp.source_pair.1.to_string()],
                    meaning: sp.meaning.map(str::to_string),
                    notes: e.fields.notes.clone(),
                }
            })
            .collect();
        NetworkExport { nodes, edges }
    }

    /// Graphviz rendering; edges keep the skeleton direction.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph astrolabe {\n");
        for (id, f) in &self.nodes {
            let label = f
                .title
                .clone()
                .unwrap_or_else(|| id.as_str().chars().take(8).collect());
            out.push_str(&format!("  {} [label={}];\n", dot_quote(id.as_str()), dot_quote(&label)));
        }
        for e in &self.edges {
            let mut line = format!("  {} -> {}", dot_quote(e.from.as_str()), dot_quote(e.to.as_str()));
            if let Some(notes) = &e.fields.notes {
                let short: String = notes.chars().take(40).collect();
                line.push_str(&format!(" [label={}]", dot_quote(&short)));
            }
            out.push_str(&line);
            out.push_str(";\n");
        }
        out.push_str("}\n");
        out
    }
}

fn dot_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::HashMode;

    fn fixture(text: &str) -> Store {
        Store::from_json_str(text, HashMode::Structural).unwrap()
    }

    #[test]
    fn parses_tex_record() {
        let f = parse_record(
            r#"{"sort":"theorem","source":"tex","title":"Heine-Borel","notes":"A subset of R^n ..."}"#,
        );
        assert_eq!(f.sort, Sort::Theorem);
        assert_eq!(f.source, Source::Tex);
        assert_eq!(f.title.as_deref(), Some("Heine-Borel"));
        assert!(f.structured);
    }

    #[test]
    fn plain_and_empty_records() {
        let f = parse_record("statement-proof link");
        assert_eq!((f.sort, f.source), (Sort::Unknown, Source::Unknown));
        assert_eq!(f.notes.as_deref(), Some("statement-proof link"));
        assert_eq!(f.effective_sort(), Sort::Unknown);

        let empty = parse_record("");
        assert_eq!(empty, RecordFields::default());

        // JSON that is not an object is plain text too.
        assert_eq!(parse_record("42").notes.as_deref(), Some("42"));
        assert_eq!(parse_record("lemma ...").effective_sort(), Sort::Lemma);
    }

    #[test]
    fn unknown_sort_is_kept() {
        let f = parse_record(r#"{"sort":"conjecture","source":"coq","extra":[1,2]}"#);
        assert_eq!(f.sort, Sort::Unknown);
        assert_eq!(f.raw_sort.as_deref(), Some("conjecture"));
        assert_eq!(f.raw_source.as_deref(), Some("coq"));
        assert_eq!(parse_record(&f.to_record()), f);
    }

    #[test]
    fn emission_order_is_fixed() {
        let mut f = RecordFields::new(Sort::Theorem, Source::Lean);
        f.notes = Some("n".into());
        f.content = Some("c".into());
        f.state = Some("proven".into());
        f.title = Some("t".into());
        assert_eq!(
            f.to_record(),
            r#"{"sort":"theorem","source":"lean","title":"t","state":"proven","content":"c","notes":"n"}"#
        );
    }

    #[test]
    fn mathnet_skeleton() {
        let g = extract_skeleton(&fixture(include_str!("../tests/fixtures/mathnet.json")));
        assert_eq!(g.node_count(), 4);
        let edges: Vec<(&str, &str, &str)> = g
            .edges()
            .iter()
            .map(|e| (e.id.as_str(), e.from.as_str(), e.to.as_str()))
            .collect();
        assert_eq!(
            edges,
            [
                ("e1", "D2", "D1"),
                ("e3", "D2", "L1"),
                ("e4", "L1", "T1"),
                ("e5", "D2", "T1"),
                ("e6", "T1", "L1")
            ]
        );
    }

    #[test]
    fn layered_skeleton_keeps_atom_edges_only() {
        let g = extract_skeleton(&fixture(include_str!("../tests/fixtures/layered.json")));
        let nodes: Vec<&str> = g.nodes().keys().map(HashId::as_str).collect();
        assert_eq!(nodes, ["a1", "a2", "a3", "a4"]);
        let edges: Vec<&str> = g.edges().iter().map(|e| e.id.as_str()).collect();
        assert_eq!(edges, ["e1", "e2", "e3", "e4"]);
    }

    #[test]
    fn empty_store_gives_empty_skeleton() {
        let g = extract_skeleton(&Store::new(HashMode::Strict));
        assert_eq!((g.node_count(), g.edge_count()), (0, 0));
    }

    #[test]
    fn chain_propagation() {
        let g = extract_skeleton(&fixture(include_str!("../tests/fixtures/chain.json")));
        let a = propagate(&g, "D", Direction::Forward).unwrap();
        assert_eq!(a.affected, [HashId::from("T")]);
        assert_eq!(a.hop_distance[&HashId::from("T")], 1);
        assert!(propagate(&g, "T", Direction::Forward).unwrap().affected.is_empty());
        assert_eq!(
            propagate(&g, "T", Direction::Reverse).unwrap().affected,
            [HashId::from("D")]
        );
        assert_eq!(
            propagate(&g, "E", Direction::Forward),
            Err(LeanNetsError::UnknownAtom { id: "E".into() })
        );
    }

    #[test]
    fn chain_hops() {
        let text = r#"{
            "D": {"ref": ["D"]}, "T1": {"ref": ["T1"]}, "T2": {"ref": ["T2"]},
            "x": {"ref": ["D", "T1"], "record": "x"}, "y": {"ref": ["T1", "T2"], "record": "y"}
        }"#;
        let g = extract_skeleton(&fixture(text));
        let a = propagate(&g, "D", Direction::Forward).unwrap();
        assert_eq!(a.affected, [HashId::from("T1"), HashId::from("T2")]);
        assert_eq!(a.hop_distance[&HashId::from("T2")], 2);
    }

    fn lean_tex_store() -> (Store, HashId, HashId, HashId) {
        let mut store = Store::new(HashMode::Strict);
        let t = store
            .insert_atom(r#"{"sort":"theorem","source":"tex","title":"Heine-Borel"}"#)
            .unwrap();
        let p = store.insert_atom(r#"{"sort":"proof","source":"tex"}"#).unwrap();
        let l = store
            .insert_atom(r#"{"sort":"theorem","source":"lean","title":"IsCompact.isClosed"}"#)
            .unwrap();
        (store, t, p, l)
    }

    #[test]
    fn sort_pairs() {
        let (mut store, t, p, l) = lean_tex_store();
        let sp = store.insert_nerve("statement-proof link", &[t.clone(), p.clone()]).unwrap();
        let cross = store.insert_nerve("formalizes", &[t.clone(), l]).unwrap();
        let pair = derive_sort_pair(&store, sp.as_str()).unwrap();
        assert_eq!(pair.pair, (Sort::Theorem, Sort::Proof));
        assert_eq!(pair.meaning, Some("Statement–proof link"));
        let pair = derive_sort_pair(&store, cross.as_str()).unwrap();
        assert_eq!(pair.source_pair, (Source::Tex, Source::Lean));
        assert_eq!(pair.meaning, Some("Cross-source correspondence"));
        assert!(matches!(
            derive_sort_pair(&store, t.as_str()),
            Err(LeanNetsError::NotAnEdge { .. })
        ));

        let a = store.insert_atom("foo").unwrap();
        let b = store.insert_atom("bar").unwrap();
        let e = store.insert_nerve("foo-bar", &[a, b]).unwrap();
        let pair = derive_sort_pair(&store, e.as_str()).unwrap();
        assert_eq!(pair.pair, (Sort::Unknown, Sort::Unknown));
        assert_eq!(pair.meaning, None);
    }

    #[test]
    fn inherited_tuple() {
        let (mut store, t, p, _) = lean_tex_store();
        let d = store
            .insert_atom(r#"{"sort":"definition","source":"tex","title":"Compact Space"}"#)
            .unwrap();
        let u = store.insert_atom("free text").unwrap();
        let wide = store.insert_nerve("proof uses", &[t.clone(), p.clone(), d]).unwrap();
        assert_eq!(
            inherited_fields(&store, wide.as_str()).unwrap(),
            [
                (Sort::Theorem, Source::Tex),
                (Sort::Proof, Source::Tex),
                (Sort::Definition, Source::Tex)
            ]
        );
        let e = store.insert_nerve("t-u", &[t.clone(), u]).unwrap();
        let tuple = inherited_fields(&store, e.as_str()).unwrap();
        assert_eq!(tuple[1], (Sort::Unknown, Source::Unknown));
        let pair = derive_sort_pair(&store, e.as_str()).unwrap();
        assert_eq!((tuple[0].0, tuple[1].0), pair.pair);
        assert!(matches!(
            inherited_fields(&store, t.as_str()),
            Err(LeanNetsError::NotARelation { .. })
        ));
        assert!(matches!(
            inherited_fields(&store, "nope"),
            Err(LeanNetsError::NotFound { .. })
        ));
    }

    #[test]
    fn entryrefs() {
        let mut f = RecordFields {
            notes: Some(r"By \entryref{ba7816bf8f01}{Lemma 3} and \entryref{e3b0c44298fc}{the {compact} case}.".into()),
            ..Default::default()
        };
        let scan = scan_entryrefs(&f);
        assert_eq!(scan.refs.len(), 2);
        assert_eq!(scan.refs[0].hash.as_str(), "ba7816bf8f01");
        assert_eq!(scan.refs[0].display, "Lemma 3");
        assert_eq!(scan.refs[1].display, "the {compact} case");
        assert_eq!(scan.malformed, 0);

        f.notes = Some(r"\entryref{abc} \entryref{}{x} \entryref{a b}{y} \entryref{ok}{fine} \entryref{open}{".into());
        let scan = scan_entryrefs(&f);
        assert_eq!(scan.refs.len(), 1);
        assert_eq!(scan.refs[0].hash.as_str(), "ok");
        assert_eq!(scan.malformed, 4);

        f.notes = Some("nothing here".into());
        assert!(scan_entryrefs(&f).refs.is_empty());
    }

    #[test]
    fn per_source_partition_drops_cross_edges() {
        let (mut store, t, p, l) = lean_tex_store();
        store.insert_nerve("statement-proof link", &[t.clone(), p]).unwrap();
        store.insert_nerve("formalizes", &[t, l]).unwrap();
        let g = extract_skeleton(&store);
        assert_eq!(g.edge_count(), 2);
        let parts = g.partition();
        assert_eq!(parts[&Source::Tex].edge_count(), 1);
        assert_eq!(parts[&Source::Lean].edge_count(), 0);
        assert_eq!(parts[&Source::Lean].node_count(), 1);
    }

    #[test]
    fn export_and_dot() {
        let g = extract_skeleton(&fixture(include_str!("../tests/fixtures/mathnet.json")));
        let export = g.export();
        assert_eq!(export.nodes.len(), 4);
        assert_eq!(export.edges.len(), 5);
        assert_eq!(export.nodes[0].sort, "definition");
        assert_eq!(export.edges[0].notes.as_deref(), Some("D2 uses D1"));
        let dot = g.to_dot();
        assert!(dot.contains("\"D2\" -> \"D1\" [label=\"D2 uses D1\"];"));
        assert!(dot.contains("\"T1\" -> \"L1\""));
    }
}
