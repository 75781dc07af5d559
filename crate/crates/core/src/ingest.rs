//! LaTeX and Lean source ingestion.
//!
//! Both parsers are total: malformed input yields diagnostics, never an
//! error. Statements and proofs become separate atoms joined by a
//! statement-proof edge, so a proof can be revised without touching the
//! identity of its statement.

use serde::Serialize;

use crate::leannets::{scan_entryrefs, RecordFields, Sort, Source};
use crate::store::{compute_id, HashId, Store, StoreError};

/// Notes carried by every auto-created statement-proof edge.
pub const STATEMENT_PROOF_LINK: &str = "statement-proof link";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Statement,
    Proof,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParsedUnit {
    pub sort: Sort,
    pub title: Option<String>,
    /// Exactly `source[span.0..span.1]`.
    pub body: String,
    pub span: (usize, usize),
    pub kind: UnitKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StagedAtom {
    pub record: String,
    pub unit: ParsedUnit,
    /// Targets of `\entryref` occurrences in the notes.
    pub links: Vec<HashId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StagedEdge {
    /// Index into [`IngestResult::atoms`].
    pub from: usize,
    pub to: usize,
    pub record: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub span: (usize, usize),
    pub message: String,
}

/// Atoms and edges parsed from one document, not yet in any store.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct IngestResult {
    pub atoms: Vec<StagedAtom>,
    pub edges: Vec<StagedEdge>,
    pub diagnostics: Vec<Diagnostic>,
}

impl IngestResult {
    fn push_atom(&mut self, fields: &RecordFields, unit: ParsedUnit) -> usize {
        let links = scan_entryrefs(fields)
            .refs
            .into_iter()
            .map(|r| r.hash)
            .collect();
        self.atoms.push(StagedAtom {
            record: fields.to_record(),
            unit,
            links,
        });
        self.atoms.len() - 1
    }

    fn link(&mut self, statement: usize, proof: usize) {
        let record = link_record(
            &compute_id(&self.atoms[statement].record),
            &compute_id(&self.atoms[proof].record),
        );
        self.edges.push(StagedEdge {
            from: statement,
            to: proof,
            record,
        });
    }

    fn diagnose(&mut self, span: (usize, usize), message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            span,
            message: message.into(),
        });
    }

    /// Appends another result, shifting its edge indices.
    pub fn extend(&mut self, other: IngestResult) {
        let offset = self.atoms.len();
        self.atoms.extend(other.atoms);
        self.edges.extend(other.edges.into_iter().map(|e| StagedEdge {
            from: e.from + offset,
            to: e.to + offset,
            record: e.record,
        }));
        self.diagnostics.extend(other.diagnostics);
    }
}

/// Record of a statement-proof edge.
///
/// The endpoint ids are part of the record: with identity derived from the
/// record alone, a shared constant string would make every such edge in a
/// store collide on one id.
pub fn link_record(statement: &HashId, proof: &HashId) -> String {
    let mut fields = RecordFields {
        structured: true,
        notes: Some(STATEMENT_PROOF_LINK.to_string()),
        ..RecordFields::default()
    };
    fields
        .extra
        .insert("statement".into(), statement.as_str().into());
    fields.extra.insert("proof".into(), proof.as_str().into());
    fields.to_record()
}

const TEX_ENVIRONMENTS: [&str; 7] = [
    "theorem",
    "definition",
    "lemma",
    "proposition",
    "corollary",
    "example",
    "proof",
];

fn trimmed_span(text: &str, start: usize, end: usize) -> (usize, usize) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead == slice.len() {
        return (start, start);
    }
    (start + lead, end - trail)
}

struct BeginTag<'a> {
    start: usize,
    end: usize,
    name: &'a str,
}

fn find_begin(text: &str, from: usize) -> Option<BeginTag<'_>> {
    let mut at = from;
    while let Some(rel) = text[at..].find("\\begin{") {
        let start = at + rel;
        let name_start = start + "\\begin{".len();
        let close = text[name_start..].find('}')?;
        let name_end = name_start + close;
        if !in_tex_comment(text, start) {
            return Some(BeginTag {
                start,
                end: name_end + 1,
                name: &text[name_start..name_end],
            });
        }
        at = name_end + 1;
    }
    None
}

fn in_tex_comment(text: &str, pos: usize) -> bool {
    let line_start = text[..pos].rfind('\n').map_or(0, |i| i + 1);
    let bytes = text.as_bytes();
    (line_start..pos).any(|i| bytes[i] == b'%' && (i == 0 || bytes[i - 1] != b'\\'))
}

/// Finds the `\end{name}` closing a `\begin{name}` whose header ends at
/// `from`, skipping same-named nested pairs. Returns (end tag start, end tag
/// end).
fn find_end(text: &str, name: &str, from: usize) -> Option<(usize, usize)> {
    let open = format!("\\begin{{{name}}}");
    let close = format!("\\end{{{name}}}");
    let mut depth = 1usize;
    let mut at = from;
    loop {
        let next_close = text[at..].find(&close).map(|i| at + i)?;
        let next_open = text[at..].find(&open).map(|i| at + i);
        match next_open {
            Some(o) if o < next_close => {
                depth += 1;
                at = o + open.len();
            }
            _ => {
                depth -= 1;
                if depth == 0 {
                    return Some((next_close, next_close + close.len()));
                }
                at = next_close + close.len();
            }
        }
    }
}

fn optional_argument(text: &str, from: usize) -> Option<(String, usize)> {
    if !text[from..].starts_with('[') {
        return None;
    }
    let mut depth = 0usize;
    for (i, c) in text[from..].char_indices() {
        match c {
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    let title = text[from + 1..from + i].trim().to_string();
                    return Some((title, from + i + 1));
                }
            }
            _ => {}
        }
    }
    None
}

/// Extracts theorem-like and proof environments from LaTeX source.
///
/// A proof binds to the nearest preceding statement environment. Nested
/// recognised environments are reported and left out; an environment without
/// its `\end` is reported and skipped.
pub fn parse_tex(text: &str) -> IngestResult {
    let mut result = IngestResult::default();
    let mut last_statement: Option<usize> = None;
    let mut at = 0;
    while let Some(tag) = find_begin(text, at) {
        let env = tag.name.trim_end_matches('*');
        if !TEX_ENVIRONMENTS.contains(&env) {
            at = tag.end;
            continue;
        }
        let Some((end_start, end_end)) = find_end(text, tag.name, tag.end) else {
            result.diagnose(
                (tag.start, tag.end),
                format!("\\begin{{{}}} has no matching \\end", tag.name),
            );
            at = tag.end;
            continue;
        };
        let (title, body_start) = match optional_argument(text, tag.end) {
            Some((title, after)) if after <= end_start => ((!title.is_empty()).then_some(title), after),
            _ => (None, tag.end),
        };

        let mut inner = body_start;
        while let Some(nested) = find_begin(text, inner).filter(|n| n.start < end_start) {
            if TEX_ENVIRONMENTS.contains(&nested.name.trim_end_matches('*')) {
                result.diagnose(
                    (nested.start, nested.end),
                    format!(
                        "nested {} environment inside {} is not extracted",
                        nested.name, tag.name
                    ),
                );
            }
            inner = nested.end;
        }

        let span = trimmed_span(text, body_start, end_start);
        let body = text[span.0..span.1].to_string();
        let sort = Sort::from_name(env);
        let kind = if sort == Sort::Proof {
            UnitKind::Proof
        } else {
            UnitKind::Statement
        };
        let mut fields = RecordFields::new(sort, Source::Tex);
        fields.title = title.clone();
        fields.notes = (!body.is_empty()).then(|| body.clone());
        let index = result.push_atom(
            &fields,
            ParsedUnit {
                sort,
                title,
                body,
                span,
                kind,
            },
        );
        match (kind, last_statement) {
            (UnitKind::Statement, _) => last_statement = Some(index),
            (UnitKind::Proof, Some(statement)) => result.link(statement, index),
            (UnitKind::Proof, None) => result.diagnose(
                (tag.start, end_end),
                "proof environment has no preceding statement",
            ),
        }
        at = end_end;
    }
    result
}

/// Marks bytes inside Lean comments and string literals.
fn lean_masked(text: &str) -> Vec<bool> {
    let bytes = text.as_bytes();
    let mut masked = vec![false; bytes.len()];
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i..].starts_with(b"--") {
            let end = text[i..].find('\n').map_or(bytes.len(), |e| i + e);
            masked[i..end].iter_mut().for_each(|m| *m = true);
            i = end;
        } else if bytes[i..].starts_with(b"/-") {
            let mut depth = 0usize;
            let start = i;
            while i < bytes.len() {
                if bytes[i..].starts_with(b"/-") {
                    depth += 1;
                    i += 2;
                } else if bytes[i..].starts_with(b"-/") {
                    depth -= 1;
                    i += 2;
                    if depth == 0 {
                        break;
                    }
                } else {
                    i += 1;
                }
            }
            let end = i.min(bytes.len());
            masked[start..end].iter_mut().for_each(|m| *m = true);
        } else if bytes[i] == b'"' {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i] != b'"' {
                i += if bytes[i] == b'\\' { 2 } else { 1 };
            }
            let end = (i + 1).min(bytes.len());
            masked[start..end].iter_mut().for_each(|m| *m = true);
            i = end;
        } else {
            i += 1;
        }
    }
    masked
}

const LEAN_MODIFIERS: [&str; 5] = ["private", "protected", "noncomputable", "partial", "unsafe"];

const LEAN_COMMANDS: [&str; 32] = [
    "theorem", "lemma", "def", "abbrev", "instance", "structure", "class", "inductive",
    "example", "axiom", "opaque", "namespace", "section", "end", "open", "variable",
    "universe", "set_option", "import", "attribute", "macro", "macro_rules", "syntax",
    "notation", "infix", "infixl", "infixr", "prefix", "postfix", "mutual", "elab",
    "initialize",
];

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '\'' | '!' | '?' | '«' | '»')
}

/// Skips leading attributes and modifiers on a line, returning the first
/// remaining token and its byte offset within the line.
fn lean_head(line: &str) -> Option<(&str, usize)> {
    let mut offset = 0;
    loop {
        let rest = &line[offset..];
        let trimmed = rest.trim_start();
        offset += rest.len() - trimmed.len();
        if trimmed.starts_with("@[") {
            let close = trimmed.find(']')?;
            offset += close + 1;
            continue;
        }
        let token_len = trimmed
            .find(|c: char| !is_ident_char(c))
            .unwrap_or(trimmed.len());
        let token = &trimmed[..token_len];
        if LEAN_MODIFIERS.contains(&token) {
            offset += token_len;
            continue;
        }
        return (!token.is_empty()).then_some((token, offset));
    }
}

fn is_top_level_line(line: &str) -> bool {
    if line.starts_with(char::is_whitespace) || line.is_empty() {
        return false;
    }
    if line.starts_with("@[") || line.starts_with("/-") || line.starts_with('#') {
        return true;
    }
    lean_head(line).is_some_and(|(token, _)| LEAN_COMMANDS.contains(&token))
}

/// Byte offset of the first `:=` or `by` outside brackets, comments and
/// strings, with the offset where the proof text begins.
fn lean_boundary(block: &str, from: usize, masked: &[bool]) -> Option<(usize, usize)> {
    let bytes = block.as_bytes();
    let mut depth = 0i32;
    for (i, c) in block[from..].char_indices().map(|(i, c)| (i + from, c)) {
        if masked[i] {
            continue;
        }
        match c {
            '(' | '[' | '{' | '⟨' => depth += 1,
            ')' | ']' | '}' | '⟩' => depth -= 1,
            ':' if depth == 0 && bytes.get(i + 1) == Some(&b'=') => return Some((i, i + 2)),
            'b' if depth == 0 && block[i..].starts_with("by") => {
                let before = block[..i].chars().next_back();
                let after = block[i + 2..].chars().next();
                if !before.is_some_and(is_ident_char) && !after.is_some_and(is_ident_char) {
                    return Some((i, i));
                }
            }
            _ => {}
        }
    }
    None
}

/// Extracts `theorem`, `lemma` and `def` declarations from Lean source by a
/// line-anchored keyword scan.
///
/// Theorem-like declarations are split at the first top-level `:=` or `by`
/// into a statement atom and a proof atom. Definitions stay whole.
pub fn parse_lean(text: &str) -> IngestResult {
    let mut result = IngestResult::default();
    let masked = lean_masked(text);

    let mut line_starts = vec![0];
    line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
    line_starts.retain(|&s| s < text.len());
    let line_at = |s: usize| {
        let end = text[s..].find('\n').map_or(text.len(), |e| s + e);
        &text[s..end]
    };
    let top_level: Vec<usize> = line_starts
        .iter()
        .copied()
        .filter(|&s| !masked[s] && is_top_level_line(line_at(s)) || masked[s] && line_at(s).starts_with("/-"))
        .collect();

    for (k, &start) in top_level.iter().enumerate() {
        let Some((keyword, head_offset)) = lean_head(line_at(start)) else {
            continue;
        };
        let sort = match keyword {
            "theorem" => Sort::Theorem,
            "lemma" => Sort::Lemma,
            "def" => Sort::Definition,
            _ => continue,
        };
        let limit = top_level.get(k + 1).copied().unwrap_or(text.len());
        let (start, end) = trimmed_span(text, start, limit);
        let block = &text[start..end];
        let block_mask = &masked[start..end];

        let after_keyword = head_offset + keyword.len();
        let name_rest = &block[after_keyword..];
        let name_lead = name_rest.len() - name_rest.trim_start().len();
        let name_start = after_keyword + name_lead;
        let name_len = block[name_start..]
            .find(|c: char| !is_ident_char(c))
            .unwrap_or(block.len() - name_start);
        let name = &block[name_start..name_start + name_len];
        if name.is_empty() {
            result.diagnose((start, end), format!("{keyword} without a name"));
            continue;
        }
        let title = Some(name.to_string());

        if sort == Sort::Definition {
            let mut fields = RecordFields::new(sort, Source::Lean);
            fields.title = title.clone();
            fields.state = Some("checked".into());
            fields.content = Some(block.to_string());
            result.push_atom(
                &fields,
                ParsedUnit {
                    sort,
                    title,
                    body: block.to_string(),
                    span: (start, end),
                    kind: UnitKind::Statement,
                },
            );
            continue;
        }

        let boundary = lean_boundary(block, name_start + name_len, block_mask);
        let split = boundary.and_then(|(stmt_end, proof_start)| {
            let stmt = trimmed_span(text, start, start + stmt_end);
            let proof = trimmed_span(text, start + proof_start, end);
            (proof.0 < proof.1).then_some((stmt, proof))
        });
        let Some((stmt_span, proof_span)) = split else {
            result.diagnose(
                (start, end),
                format!("no proof boundary found in {keyword} {name}"),
            );
            let mut fields = RecordFields::new(sort, Source::Lean);
            fields.title = title.clone();
            fields.content = Some(block.to_string());
            result.push_atom(
                &fields,
                ParsedUnit {
                    sort,
                    title,
                    body: block.to_string(),
                    span: (start, end),
                    kind: UnitKind::Statement,
                },
            );
            continue;
        };

        let statement_text = &text[stmt_span.0..stmt_span.1];
        let proof_text = &text[proof_span.0..proof_span.1];
        let mut fields = RecordFields::new(sort, Source::Lean);
        fields.title = title.clone();
        fields.state = Some("proven".into());
        fields.content = Some(statement_text.to_string());
        let statement = result.push_atom(
            &fields,
            ParsedUnit {
                sort,
                title,
                body: statement_text.to_string(),
                span: stmt_span,
                kind: UnitKind::Statement,
            },
        );
        let mut fields = RecordFields::new(Sort::Proof, Source::Lean);
        fields.content = Some(proof_text.to_string());
        let proof = result.push_atom(
            &fields,
            ParsedUnit {
                sort: Sort::Proof,
                title: None,
                body: proof_text.to_string(),
                span: proof_span,
                kind: UnitKind::Proof,
            },
        );
        result.link(statement, proof);
    }
    result
}

/// Inserts the staged atoms, then the edges, returning one id per staged
/// item in that order. Committing the same result twice changes nothing.
pub fn commit(store: &mut Store, result: &IngestResult) -> Result<Vec<HashId>, StoreError> {
    let mut ids = Vec::with_capacity(result.atoms.len() + result.edges.len());
    for atom in &result.atoms {
        ids.push(store.insert_atom(&atom.record)?);
    }
    for edge in &result.edges {
        let refs = [ids[edge.from].clone(), ids[edge.to].clone()];
        ids.push(store.insert_nerve(&edge.record, &refs)?);
    }
    Ok(ids)
}
