//! PENMAN reader and writer for AMR graphs.
//!
//! Supported subset: `(var / concept :role target ...)` where a target is a
//! nested node, a re-mention of a variable (reentrancy), or a constant
//! (quoted string, number or bare symbol such as `-`). Role labels are kept
//! verbatim, so `:ARG0-of` is an edge labeled `ARG0-of` in the written
//! direction.

use std::collections::HashSet;

use crate::graph::{Framework, GraphEdge, GraphNode, SemanticGraph};

use super::FormatError;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Slash,
    Role(String),
    Atom(String),
}

fn tokenize(text: &str) -> Result<Vec<Token>, FormatError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Token::Open);
                i += 1;
            }
            ')' => {
                out.push(Token::Close);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '"' => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    if chars[i] == '\\' {
                        i += 1;
                    }
                    i += 1;
                }
                if i >= chars.len() {
                    return Err(FormatError::Penman("unterminated string".into()));
                }
                i += 1;
                out.push(Token::Atom(chars[start..i].iter().collect()));
            }
            ':' => {
                let start = i + 1;
                i += 1;
                while i < chars.len() && !is_delim(chars[i]) {
                    i += 1;
                }
                let role: String = chars[start..i].iter().collect();
                if role.is_empty() {
                    return Err(FormatError::Penman("empty role".into()));
                }
                out.push(Token::Role(role));
            }
            _ => {
                let start = i;
                while i < chars.len() && !is_delim(chars[i]) {
                    i += 1;
                }
                out.push(Token::Atom(chars[start..i].iter().collect()));
            }
        }
    }
    Ok(out)
}

fn is_delim(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '/' | ':' | '"')
}

#[derive(Debug)]
enum Target {
    Node(Box<NodeExpr>),
    Atom(String),
}

#[derive(Debug)]
struct NodeExpr {
    var: String,
    concept: String,
    edges: Vec<(String, Target)>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn node(&mut self) -> Result<NodeExpr, FormatError> {
        match self.next() {
            Some(Token::Open) => {}
            _ => return Err(FormatError::Penman("expected `(`".into())),
        }
        let var = match self.next() {
            Some(Token::Atom(v)) => v,
            _ => return Err(FormatError::Penman("expected variable after `(`".into())),
        };
        let concept = match self.peek() {
            Some(Token::Slash) => {
                self.pos += 1;
                match self.next() {
                    Some(Token::Atom(c)) => c,
                    _ => return Err(FormatError::Penman(format!("missing concept for `{var}`"))),
                }
            }
            _ => return Err(FormatError::Penman(format!("missing `/` after `{var}`"))),
        };
        let mut edges = Vec::new();
        loop {
            match self.next() {
                Some(Token::Close) => break,
                Some(Token::Role(role)) => {
                    let target = match self.peek() {
                        Some(Token::Open) => Target::Node(Box::new(self.node()?)),
                        Some(Token::Atom(_)) => match self.next() {
                            Some(Token::Atom(a)) => Target::Atom(a),
                            _ => unreachable!(),
                        },
                        _ => return Err(FormatError::Penman(format!("role `:{role}` without target"))),
                    };
                    edges.push((role, target));
                }
                None => return Err(FormatError::Penman("unbalanced parentheses".into())),
                Some(t) => return Err(FormatError::Penman(format!("unexpected token {t:?}"))),
            }
        }
        Ok(NodeExpr { var, concept, edges })
    }
}

fn collect_vars<'a>(n: &'a NodeExpr, vars: &mut HashSet<&'a str>) -> Result<(), FormatError> {
    if !vars.insert(n.var.as_str()) {
        return Err(FormatError::Penman(format!("duplicate variable `{}`", n.var)));
    }
    for (_, t) in &n.edges {
        if let Target::Node(child) = t {
            collect_vars(child, vars)?;
        }
    }
    Ok(())
}

/// Parses a single PENMAN expression into an AMR graph.
pub fn read_penman(text: &str) -> Result<SemanticGraph, FormatError> {
    let tokens = tokenize(text)?;
    let opens = tokens.iter().filter(|t| **t == Token::Open).count();
    let closes = tokens.iter().filter(|t| **t == Token::Close).count();
    if opens != closes {
        return Err(FormatError::Penman("unbalanced parentheses".into()));
    }
    let mut parser = Parser { tokens, pos: 0 };
    let root = parser.node()?;
    if parser.pos != parser.tokens.len() {
        return Err(FormatError::Penman("trailing tokens after graph".into()));
    }
    let mut vars = HashSet::new();
    collect_vars(&root, &mut vars)?;

    let mut g = SemanticGraph::new(Framework::Amr);
    g.tops.push(root.var.clone());
    let mut constants = 0usize;
    fn build(
        n: &NodeExpr,
        vars: &HashSet<&str>,
        g: &mut SemanticGraph,
        constants: &mut usize,
    ) {
        g.nodes.push(GraphNode::new(n.var.clone(), n.concept.clone()));
        for (role, t) in &n.edges {
            match t {
                Target::Node(child) => {
                    g.edges.push(GraphEdge::new(&n.var, &child.var, role));
                    build(child, vars, g, constants);
                }
                Target::Atom(a) if vars.contains(a.as_str()) => {
                    g.edges.push(GraphEdge::new(&n.var, a, role));
                }
                Target::Atom(a) => {
                    let id = format!("_c{constants}");
                    *constants += 1;
                    g.nodes.push(GraphNode::new(id.clone(), a.clone()));
                    g.edges.push(GraphEdge::new(&n.var, id, role));
                }
            }
        }
    }
    build(&root, &vars, &mut g, &mut constants);
    Ok(g)
}

/// Splits a document holding several PENMAN graphs separated by blank
/// lines. Lines starting with `#` are metadata and skipped.
pub fn read_penman_corpus(text: &str) -> Result<Vec<SemanticGraph>, FormatError> {
    let mut graphs = Vec::new();
    let mut block = String::new();
    for line in text.lines().chain(std::iter::once("")) {
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.is_empty() {
            if !block.trim().is_empty() {
                graphs.push(read_penman(&block)?);
            }
            block.clear();
        } else {
            block.push_str(line);
            block.push('\n');
        }
    }
    Ok(graphs)
}

fn is_constant_label(label: &str) -> bool {
    label.starts_with('"')
        || label == "-"
        || label == "+"
        || label.parse::<f64>().is_ok()
}

fn is_writable_label(label: &str) -> bool {
    if label.starts_with('"') {
        return label.len() >= 2 && label.ends_with('"');
    }
    !label.is_empty() && !label.chars().any(is_delim)
}

/// Serializes an AMR graph. Reentrant nodes are written in full at their
/// first depth-first occurrence and re-mentioned by variable afterwards.
pub fn write_penman(g: &SemanticGraph) -> Result<String, FormatError> {
    g.check()?;
    if g.tops.len() != 1 {
        return Err(FormatError::Penman(format!("expected one top, found {}", g.tops.len())));
    }
    let idx = g.index_map();
    for n in &g.nodes {
        if !is_writable_label(&n.label) {
            return Err(FormatError::Penman(format!("label `{}` is not writable", n.label)));
        }
    }
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); g.nodes.len()];
    let mut in_degree = vec![0usize; g.nodes.len()];
    for (k, e) in g.edges.iter().enumerate() {
        out_edges[idx[e.source.as_str()]].push(k);
        in_degree[idx[e.target.as_str()]] += 1;
        if !is_writable_label(&e.label) || e.label.starts_with('"') {
            return Err(FormatError::Penman(format!("role `{}` is not writable", e.label)));
        }
    }
    let top = idx[g.tops[0].as_str()];

    // Variable names: first letter of the concept plus a running number.
    let mut names = vec![String::new(); g.nodes.len()];
    let mut counter = 0usize;
    let mut name_of = |i: usize, names: &mut Vec<String>| {
        if names[i].is_empty() {
            let first = g.nodes[i]
                .label
                .chars()
                .find(|c| c.is_ascii_alphabetic())
                .map_or('x', |c| c.to_ascii_lowercase());
            names[i] = format!("{first}{counter}");
            counter += 1;
        }
    };

    let mut written = vec![false; g.nodes.len()];
    let mut out = String::new();
    // Explicit stack: (node, next edge cursor).
    enum Frame {
        Enter(usize),
        Edge(usize, usize),
    }
    let mut stack = vec![Frame::Enter(top)];
    while let Some(frame) = stack.pop() {
        match frame {
            Frame::Enter(i) => {
                name_of(i, &mut names);
                written[i] = true;
                out.push('(');
                out.push_str(&names[i]);
                out.push_str(" / ");
                out.push_str(&g.nodes[i].label);
                stack.push(Frame::Edge(i, 0));
            }
            Frame::Edge(i, k) => {
                if k == out_edges[i].len() {
                    out.push(')');
                    continue;
                }
                stack.push(Frame::Edge(i, k + 1));
                let e = &g.edges[out_edges[i][k]];
                let t = idx[e.target.as_str()];
                out.push_str(" :");
                out.push_str(&e.label);
                out.push(' ');
                let leaf_constant = out_edges[t].is_empty()
                    && in_degree[t] == 1
                    && t != top
                    && is_constant_label(&g.nodes[t].label);
                if written[t] {
                    out.push_str(&names[t]);
                } else if leaf_constant {
                    written[t] = true;
                    out.push_str(&g.nodes[t].label);
                } else {
                    stack.push(Frame::Enter(t));
                }
            }
        }
    }
    if written.iter().any(|w| !w) {
        return Err(FormatError::Penman(
            "graph is not connected from its top by directed edges".into(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::graph_isomorphic;

    const VINKEN: &str = "(e / express-01 :ARG0 (p / person) :ARG1 (c / concern :poss p))";

    #[test]
    fn reads_vinken_with_reentrancy() {
        let g = read_penman(VINKEN).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 3);
        assert_eq!(g.tops, vec!["e".to_string()]);
        assert!(g
            .edges
            .contains(&GraphEdge::new("c", "p", "poss")));
        assert_eq!(g.edges.iter().filter(|e| e.target == "p").count(), 2);
    }

    #[test]
    fn reads_single_node() {
        let g = read_penman("(a / alpha)").unwrap();
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn rejects_unbalanced() {
        let err = read_penman("(a / alpha :mod (b / beta) :mod b").unwrap_err();
        assert!(err.to_string().contains("unbalanced"), "{err}");
    }

    #[test]
    fn rejects_role_without_target() {
        assert!(read_penman("(a / alpha :mod)").is_err());
    }

    #[test]
    fn rejects_duplicate_variable() {
        assert!(read_penman("(a / alpha :mod (a / beta))").is_err());
    }

    #[test]
    fn constants_become_nodes() {
        let g = read_penman(r#"(p / person :name (n / name :op1 "Pierre") :polarity - :quant 5)"#)
            .unwrap();
        assert_eq!(g.nodes.len(), 5);
        let labels: Vec<&str> = g.nodes.iter().map(|n| n.label.as_str()).collect();
        assert!(labels.contains(&"\"Pierre\""));
        assert!(labels.contains(&"-"));
        assert!(labels.contains(&"5"));
        let back = read_penman(&write_penman(&g).unwrap()).unwrap();
        assert!(graph_isomorphic(&g, &back).unwrap());
    }

    #[test]
    fn round_trips_vinken() {
        let g = read_penman(VINKEN).unwrap();
        let text = write_penman(&g).unwrap();
        let back = read_penman(&text).unwrap();
        assert!(graph_isomorphic(&g, &back).unwrap());
    }

    #[test]
    fn writes_single_node() {
        let g = read_penman("(a / alpha)").unwrap();
        assert_eq!(write_penman(&g).unwrap(), "(a0 / alpha)");
    }

    #[test]
    fn cycle_terminates() {
        let g = read_penman("(a / alpha :next (b / beta :next (c / gamma :next a)))").unwrap();
        let text = write_penman(&g).unwrap();
        let back = read_penman(&text).unwrap();
        assert!(graph_isomorphic(&g, &back).unwrap());
    }

    #[test]
    fn rejects_multiple_tops() {
        let mut g = read_penman("(a / alpha :mod (b / beta))").unwrap();
        g.tops.push("b".into());
        assert!(write_penman(&g).is_err());
    }

    #[test]
    fn rejects_disconnected() {
        let mut g = read_penman("(a / alpha)").unwrap();
        g.nodes.push(GraphNode::new("z", "zeta"));
        assert!(write_penman(&g).is_err());
    }

    #[test]
    fn corpus_reader_skips_metadata() {
        let text = "# ::id 1\n(a / alpha)\n\n# ::id 2\n(b / beta\n  :mod (c / gamma))\n";
        let gs = read_penman_corpus(text).unwrap();
        assert_eq!(gs.len(), 2);
        assert_eq!(gs[1].edges.len(), 1);
    }
}
