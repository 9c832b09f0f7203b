//! Line-oriented text format for process models (`.proc` files).
//!
//! ```text
//! process <name> schema_version=1
//! guard <name> "<description>" [holds="<text>"]
//! initial <id>
//! action <id> "<label>" actor=<A|M|SA>
//! decision <id> ["<label>"] guard=<name>
//! final <id>
//! edge <from> -> <to> [when=true|false]
//! ```
//!
//! Blank lines and lines starting with `#` are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{
    validate_model, ActorMode, Diagnostic, DiagnosticKind, Edge, GuardDecl, Node, NodeKind,
    ProcessModel,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate id `{id}` at line {line}")]
    DuplicateId { line: usize, id: String },
    #[error("undeclared guard `{guard}` used by decision `{node}` at line {line}")]
    UndeclaredGuard {
        line: usize,
        guard: String,
        node: String,
    },
    #[error("guard `{guard}` declared more than once (line {line})")]
    DuplicateGuard { line: usize, guard: String },
    #[error("malformed decision fan-out at `{node}`: {message}")]
    DecisionFanOut { node: String, message: String },
    #[error("model violates {} invariant(s): {}", .0.len(), summarize(.0))]
    Invalid(Vec<Diagnostic>),
}

fn summarize(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Quoted(String),
    Attr(String, String),
}

struct Lexed {
    token: Token,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn read_quoted(
    chars: &[char],
    mut i: usize,
    line: usize,
) -> Result<(String, usize), ParseError> {
    let start = i;
    debug_assert_eq!(chars[i], '"');
    i += 1;
    let mut out = String::new();
    while i < chars.len() {
        match chars[i] {
            '\\' if i + 1 < chars.len() => {
                match chars[i + 1] {
                    'n' => out.push('\n'),
                    c => out.push(c),
                }
                i += 2;
            }
            '"' => return Ok((out, i + 1)),
            c => {
                out.push(c);
                i += 1;
            }
        }
    }
    Err(syntax(line, start + 1, "unterminated string"))
}

fn lex_line(text: &str, line: usize) -> Result<Vec<Lexed>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let column = i + 1;
        if chars[i] == '"' {
            let (s, next) = read_quoted(&chars, i, line)?;
            out.push(Lexed {
                token: Token::Quoted(s),
                column,
            });
            i = next;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() && chars[i] != '=' && chars[i] != '"' {
            i += 1;
        }
        let word: String = chars[start..i].iter().collect();
        if i < chars.len() && chars[i] == '=' {
            i += 1;
            let value = if i < chars.len() && chars[i] == '"' {
                let (s, next) = read_quoted(&chars, i, line)?;
                i = next;
                s
            } else {
                let vstart = i;
                while i < chars.len() && !chars[i].is_whitespace() {
                    i += 1;
                }
                chars[vstart..i].iter().collect()
            };
            if word.is_empty() {
                return Err(syntax(line, column, "attribute without a name"));
            }
            out.push(Lexed {
                token: Token::Attr(word, value),
                column,
            });
        } else if word.is_empty() {
            return Err(syntax(line, column, "unexpected quote"));
        } else {
            out.push(Lexed {
                token: Token::Word(word),
                column,
            });
        }
    }
    Ok(out)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

struct LineCursor<'a> {
    tokens: &'a [Lexed],
    pos: usize,
    line: usize,
    line_len: usize,
}

impl<'a> LineCursor<'a> {
    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.column)
            .unwrap_or(self.line_len + 1)
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        let col = self.column();
        match self.tokens.get(self.pos).map(|t| &t.token) {
            Some(Token::Word(w)) if is_identifier(w) => {
                self.pos += 1;
                Ok(w.clone())
            }
            Some(Token::Word(w)) => Err(syntax(self.line, col, format!("invalid {what} `{w}`"))),
            _ => Err(syntax(self.line, col, format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let col = self.column();
        match self.tokens.get(self.pos).map(|t| &t.token) {
            Some(Token::Word(w)) if w == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(syntax(self.line, col, format!("expected `{kw}`"))),
        }
    }

    fn quoted(&mut self, what: &str) -> Result<String, ParseError> {
        let col = self.column();
        match self.tokens.get(self.pos).map(|t| &t.token) {
            Some(Token::Quoted(s)) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(syntax(self.line, col, format!("expected quoted {what}"))),
        }
    }

    fn optional_quoted(&mut self) -> Option<String> {
        match self.tokens.get(self.pos).map(|t| &t.token) {
            Some(Token::Quoted(s)) => {
                self.pos += 1;
                Some(s.clone())
            }
            _ => None,
        }
    }

    /// Remaining tokens must all be attributes drawn from `allowed`.
    fn attrs(&mut self, allowed: &[&str]) -> Result<BTreeMap<String, (String, usize)>, ParseError> {
        let mut out = BTreeMap::new();
        while let Some(t) = self.tokens.get(self.pos) {
            match &t.token {
                Token::Attr(k, v) if allowed.contains(&k.as_str()) => {
                    if out.insert(k.clone(), (v.clone(), t.column)).is_some() {
                        return Err(syntax(self.line, t.column, format!("repeated attribute `{k}`")));
                    }
                }
                Token::Attr(k, _) => {
                    return Err(syntax(self.line, t.column, format!("unknown attribute `{k}`")))
                }
                _ => return Err(syntax(self.line, t.column, "unexpected token")),
            }
            self.pos += 1;
        }
        Ok(out)
    }
}

/// Parse and validate a `.proc` source.
pub fn parse_model(source: &str) -> Result<ProcessModel, ParseError> {
    let mut name: Option<String> = None;
    let mut nodes: Vec<Node> = Vec::new();
    let mut node_lines: BTreeMap<String, usize> = BTreeMap::new();
    let mut edges = Vec::new();
    let mut guards: Vec<GuardDecl> = Vec::new();
    let mut guard_lines: BTreeMap<String, usize> = BTreeMap::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let tokens = lex_line(raw, line)?;
        let mut cur = LineCursor {
            tokens: &tokens,
            pos: 0,
            line,
            line_len: raw.chars().count(),
        };
        let head_col = cur.column();
        let head = match tokens.first().map(|t| &t.token) {
            Some(Token::Word(w)) => w.clone(),
            _ => return Err(syntax(line, head_col, "expected a statement keyword")),
        };
        cur.pos = 1;
        match head.as_str() {
            "process" => {
                if name.is_some() {
                    return Err(syntax(line, head_col, "repeated `process` header"));
                }
                name = Some(cur.ident("process name")?);
                let attrs = cur.attrs(&["schema_version"])?;
                if let Some((v, col)) = attrs.get("schema_version") {
                    if v.parse::<u32>().ok() != Some(SCHEMA_VERSION) {
                        return Err(syntax(line, *col, format!("unsupported schema_version `{v}`")));
                    }
                }
            }
            "guard" => {
                let gname = cur.ident("guard name")?;
                let description = cur.quoted("guard description")?;
                let attrs = cur.attrs(&["holds"])?;
                if guard_lines.contains_key(&gname) {
                    return Err(ParseError::DuplicateGuard { line, guard: gname });
                }
                guard_lines.insert(gname.clone(), line);
                guards.push(GuardDecl {
                    name: gname,
                    description,
                    true_polarity: attrs.get("holds").map(|(v, _)| v.clone()).unwrap_or_default(),
                });
            }
            "initial" | "final" => {
                let id = cur.ident("node id")?;
                let label = cur.optional_quoted().unwrap_or_else(|| id.clone());
                cur.attrs(&[])?;
                let kind = if head == "initial" {
                    NodeKind::Initial
                } else {
                    NodeKind::Final
                };
                push_node(&mut nodes, &mut node_lines, line, Node {
                    id,
                    kind,
                    label,
                    actor_mode: None,
                    guard: None,
                })?;
            }
            "action" => {
                let id = cur.ident("node id")?;
                let label = cur.quoted("action label")?;
                let attrs = cur.attrs(&["actor"])?;
                let (actor, col) = attrs
                    .get("actor")
                    .ok_or_else(|| syntax(line, cur.column(), "action requires actor=<A|M|SA>"))?;
                let actor: ActorMode = actor.parse().map_err(|m: String| syntax(line, *col, m))?;
                push_node(&mut nodes, &mut node_lines, line, Node {
                    id,
                    kind: NodeKind::Action,
                    label,
                    actor_mode: Some(actor),
                    guard: None,
                })?;
            }
            "decision" => {
                let id = cur.ident("node id")?;
                let label = cur.optional_quoted().unwrap_or_else(|| id.clone());
                let attrs = cur.attrs(&["guard"])?;
                let (guard, col) = attrs
                    .get("guard")
                    .ok_or_else(|| syntax(line, cur.column(), "decision requires guard=<name>"))?;
                if !is_identifier(guard) {
                    return Err(syntax(line, *col, format!("invalid guard name `{guard}`")));
                }
                push_node(&mut nodes, &mut node_lines, line, Node {
                    id,
                    kind: NodeKind::Decision,
                    label,
                    actor_mode: None,
                    guard: Some(guard.clone()),
                })?;
            }
            "edge" => {
                let from = cur.ident("source node id")?;
                cur.keyword("->")?;
                let to = cur.ident("target node id")?;
                let attrs = cur.attrs(&["when"])?;
                let guard_value = match attrs.get("when") {
                    None => None,
                    Some((v, _)) if v == "true" => Some(true),
                    Some((v, _)) if v == "false" => Some(false),
                    Some((v, col)) => {
                        return Err(syntax(line, *col, format!("when= expects true|false, got `{v}`")))
                    }
                };
                edges.push(Edge { from, to, guard_value });
            }
            other => return Err(syntax(line, head_col, format!("unknown statement `{other}`"))),
        }
    }

    let name = name.ok_or_else(|| syntax(1, 1, "missing `process <name>` header"))?;

    let declared: BTreeSet<&str> = guards.iter().map(|g| g.name.as_str()).collect();
    for n in nodes.iter().filter(|n| n.kind == NodeKind::Decision) {
        let g = n.guard.as_deref().unwrap_or_default();
        if !declared.contains(g) {
            return Err(ParseError::UndeclaredGuard {
                line: node_lines[&n.id],
                guard: g.to_string(),
                node: n.id.clone(),
            });
        }
    }

    let initial = nodes
        .iter()
        .find(|n| n.kind == NodeKind::Initial)
        .map(|n| n.id.clone())
        .ok_or_else(|| syntax(1, 1, "missing `initial` node"))?;
    let final_node = nodes
        .iter()
        .find(|n| n.kind == NodeKind::Final)
        .map(|n| n.id.clone())
        .ok_or_else(|| syntax(1, 1, "missing `final` node"))?;

    let model = ProcessModel {
        name,
        nodes,
        edges,
        guards,
        initial,
        final_node,
    };

    let diags = validate_model(&model);
    if diags.is_empty() {
        return Ok(model);
    }
    if let Some(d) = diags.iter().find(|d| {
        matches!(
            d.kind,
            DiagnosticKind::DecisionFanOut | DiagnosticKind::DecisionEdgeLabels
        )
    }) {
        return Err(ParseError::DecisionFanOut {
            node: d.node.clone().unwrap_or_default(),
            message: d.message.clone(),
        });
    }
    Err(ParseError::Invalid(diags))
}

fn push_node(
    nodes: &mut Vec<Node>,
    lines: &mut BTreeMap<String, usize>,
    line: usize,
    node: Node,
) -> Result<(), ParseError> {
    if lines.contains_key(&node.id) {
        return Err(ParseError::DuplicateId { line, id: node.id });
    }
    lines.insert(node.id.clone(), line);
    nodes.push(node);
    Ok(())
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Render a model back to `.proc` text. Node and guard order are preserved so
/// that `parse_model(serialize_model(m)) == m`.
pub fn serialize_model(model: &ProcessModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "process {} schema_version={SCHEMA_VERSION}", model.name);
    for g in &model.guards {
        let _ = write!(out, "guard {} {}", g.name, quote(&g.description));
        if !g.true_polarity.is_empty() {
            let _ = write!(out, " holds={}", quote(&g.true_polarity));
        }
        out.push('\n');
    }
    for n in &model.nodes {
        match n.kind {
            NodeKind::Initial | NodeKind::Final => {
                let kw = if n.kind == NodeKind::Initial { "initial" } else { "final" };
                let _ = write!(out, "{kw} {}", n.id);
                if n.label != n.id {
                    let _ = write!(out, " {}", quote(&n.label));
                }
            }
            NodeKind::Action => {
                let _ = write!(
                    out,
                    "action {} {} actor={}",
                    n.id,
                    quote(&n.label),
                    n.actor_mode.map(ActorMode::as_str).unwrap_or("A")
                );
            }
            NodeKind::Decision => {
                let _ = write!(out, "decision {}", n.id);
                if n.label != n.id {
                    let _ = write!(out, " {}", quote(&n.label));
                }
                let _ = write!(out, " guard={}", n.guard.as_deref().unwrap_or_default());
            }
        }
        out.push('\n');
    }
    for e in &model.edges {
        let _ = write!(out, "edge {} -> {}", e.from, e.to);
        if let Some(v) = e.guard_value {
            let _ = write!(out, " when={v}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "process minimal\ninitial start\naction work \"Do work\" actor=A\nfinal end\nedge start -> work\nedge work -> end\n";

    #[test]
    fn minimal_model_parses_and_serializes_to_six_lines() {
        let m = parse_model(MINIMAL).unwrap();
        assert_eq!(m.count_kind(NodeKind::Action), 1);
        let text = serialize_model(&m);
        assert_eq!(text.lines().count(), 6);
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_model("process p\naction a \"x\" actor=Q\n").unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 14);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_model("process p\naction a \"unterminated\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { line: 2, column: 10, .. }));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let src = "process p\ninitial s\naction a \"A\" actor=A\naction a \"B\" actor=M\nfinal e\n";
        assert_eq!(
            parse_model(src).unwrap_err(),
            ParseError::DuplicateId { line: 4, id: "a".into() }
        );
    }

    #[test]
    fn escaped_quotes_round_trip() {
        let src = "process p\ninitial s\naction a \"\\\"Release\\\" patient\" actor=SA\nfinal e\nedge s -> a\nedge a -> e\n";
        let m = parse_model(src).unwrap();
        assert_eq!(m.node("a").unwrap().label, "\"Release\" patient");
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn decision_with_one_branch_is_a_fan_out_error() {
        let src = "process p\nguard g \"g\"\ninitial s\naction a \"A\" actor=A\ndecision d guard=g\nfinal e\nedge s -> a\nedge a -> d\nedge d -> e when=true\n";
        assert!(matches!(parse_model(src), Err(ParseError::DecisionFanOut { .. })));
    }

    #[test]
    fn unknown_statement() {
        assert!(matches!(
            parse_model("process p\nfork x\n"),
            Err(ParseError::Syntax { line: 2, column: 1, .. })
        ));
    }
}
