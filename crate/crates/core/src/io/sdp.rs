//! Tab-separated semantic dependency files (SemEval 2015 layout).
//!
//! Each token row has six fixed columns `id form lemma pos top pred`
//! followed by one argument column per predicate, where the k-th argument
//! column belongs to the k-th token whose `pred` flag is `+`. Sentences are
//! separated by blank lines; a line starting with `#` before a sentence is
//! its identifier.

use std::collections::{BTreeSet, HashMap};

use crate::graph::{Framework, GraphEdge, GraphNode, SemanticGraph, Span};

use super::FormatError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdpToken {
    pub form: String,
    pub lemma: String,
    pub pos: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdpSentence {
    pub id: Option<String>,
    pub tokens: Vec<SdpToken>,
    pub graph: SemanticGraph,
}

const FIXED_COLUMNS: usize = 6;

/// Node id used for the token at 0-based position `i` (the file's 1-based id).
pub fn token_node_id(i: usize) -> String {
    (i + 1).to_string()
}

/// Reads one sentence block.
pub fn read_sdp(text: &str) -> Result<SdpSentence, FormatError> {
    let mut id = None;
    let mut rows: Vec<Vec<&str>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if line.starts_with('#') {
            id = Some(line.trim_start_matches('#').trim().to_string());
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < FIXED_COLUMNS {
            return Err(FormatError::Sdp(format!(
                "line {}: expected at least {FIXED_COLUMNS} columns, found {}",
                lineno + 1,
                cols.len()
            )));
        }
        rows.push(cols);
    }
    let width = rows.first().map_or(FIXED_COLUMNS, Vec::len);
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(FormatError::Sdp(format!(
            "ragged row {}: {} columns, expected {width}",
            bad + 1,
            rows[bad].len()
        )));
    }
    let mut predicates = Vec::new();
    let mut tops = Vec::new();
    let mut tokens = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        let flag = |s: &str, what: &str| match s {
            "+" => Ok(true),
            "-" => Ok(false),
            other => Err(FormatError::Sdp(format!("row {}: bad {what} flag `{other}`", i + 1))),
        };
        if flag(r[4], "top")? {
            tops.push(i);
        }
        if flag(r[5], "pred")? {
            predicates.push(i);
        }
        tokens.push(SdpToken {
            form: r[1].to_string(),
            lemma: r[2].to_string(),
            pos: r[3].to_string(),
        });
    }
    if width - FIXED_COLUMNS != predicates.len() {
        return Err(FormatError::Sdp(format!(
            "{} argument columns for {} predicates",
            width - FIXED_COLUMNS,
            predicates.len()
        )));
    }
    let mut involved: BTreeSet<usize> = tops.iter().chain(&predicates).copied().collect();
    let mut edges = Vec::new();
    for (k, &p) in predicates.iter().enumerate() {
        for (j, r) in rows.iter().enumerate() {
            let label = r[FIXED_COLUMNS + k];
            if label != "_" {
                involved.insert(j);
                edges.push(GraphEdge::new(token_node_id(p), token_node_id(j), label));
            }
        }
    }
    let mut graph = SemanticGraph::new(Framework::Dm);
    graph.nodes = involved
        .iter()
        .map(|&i| GraphNode::anchored(token_node_id(i), tokens[i].lemma.clone(), vec![Span::token(i)]))
        .collect();
    graph.edges = edges;
    graph.tops = tops.iter().map(|&i| token_node_id(i)).collect();
    Ok(SdpSentence { id, tokens, graph })
}

/// Reads a whole file of blank-line separated sentences.
pub fn read_sdp_corpus(text: &str) -> Result<Vec<SdpSentence>, FormatError> {
    let mut out = Vec::new();
    let mut block = String::new();
    for line in text.lines().chain(std::iter::once("")) {
        if line.trim().is_empty() {
            if block.lines().any(|l| !l.starts_with('#')) {
                out.push(read_sdp(&block)?);
            }
            block.clear();
        } else {
            block.push_str(line);
            block.push('\n');
        }
    }
    Ok(out)
}

/// Writes one sentence. Every node must be anchored to exactly one token.
/// A token is flagged as predicate when its node has outgoing edges, or
/// when it is an isolated non-top node (a predicate without arguments).
pub fn write_sdp(sentence: &SdpSentence) -> Result<String, FormatError> {
    let g = &sentence.graph;
    g.check()?;
    let mut token_of: HashMap<&str, usize> = HashMap::new();
    for n in &g.nodes {
        match n.anchors.as_slice() {
            [s] if s.to - s.from == 1 && s.from < sentence.tokens.len() => {
                token_of.insert(n.id.as_str(), s.from);
            }
            _ => {
                return Err(FormatError::Sdp(format!(
                    "node `{}` is not anchored to a single token",
                    n.id
                )))
            }
        }
    }
    let n = sentence.tokens.len();
    let mut is_top = vec![false; n];
    for t in &g.tops {
        is_top[token_of[t.as_str()]] = true;
    }
    let mut has_out = vec![false; n];
    let mut has_in = vec![false; n];
    for e in &g.edges {
        has_out[token_of[e.source.as_str()]] = true;
        has_in[token_of[e.target.as_str()]] = true;
    }
    let mut is_pred = has_out.clone();
    for node in &g.nodes {
        let i = token_of[node.id.as_str()];
        if !has_out[i] && !has_in[i] && !is_top[i] {
            is_pred[i] = true;
        }
    }
    let predicates: Vec<usize> = (0..n).filter(|&i| is_pred[i]).collect();
    let column: HashMap<usize, usize> = predicates.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let mut args = vec![vec!["_".to_string(); predicates.len()]; n];
    for e in &g.edges {
        let (s, t) = (token_of[e.source.as_str()], token_of[e.target.as_str()]);
        let cell = &mut args[t][column[&s]];
        if cell != "_" {
            return Err(FormatError::Sdp(format!(
                "two edges between tokens {} and {}",
                s + 1,
                t + 1
            )));
        }
        *cell = e.label.clone();
    }
    let mut out = String::new();
    if let Some(id) = &sentence.id {
        out.push('#');
        out.push_str(id);
        out.push('\n');
    }
    for (i, tok) in sentence.tokens.iter().enumerate() {
        let flag = |b: bool| if b { "+" } else { "-" };
        let mut cols = vec![
            (i + 1).to_string(),
            tok.form.clone(),
            tok.lemma.clone(),
            tok.pos.clone(),
            flag(is_top[i]).to_string(),
            flag(is_pred[i]).to_string(),
        ];
        cols.extend(args[i].iter().cloned());
        out.push_str(&cols.join("\t"));
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::graph_isomorphic;

    #[test]
    fn two_token_sentence() {
        let text = "1\tPierre\tPierre\tNNP\t+\t+\t_\n2\tVinken\tVinken\tNNP\t-\t-\tARG1\n";
        let s = read_sdp(text).unwrap();
        assert_eq!(s.graph.nodes.len(), 2);
        assert_eq!(s.graph.edges, vec![GraphEdge::new("1", "2", "ARG1")]);
        assert_eq!(s.graph.tops, vec!["1".to_string()]);
        assert_eq!(s.graph.nodes[1].anchors, vec![Span::token(1)]);
    }

    #[test]
    fn no_predicates_no_edges() {
        let text = "1\ta\ta\tDT\t-\t-\n2\tb\tb\tNN\t-\t-\n";
        let s = read_sdp(text).unwrap();
        assert!(s.graph.edges.is_empty());
        assert!(s.graph.nodes.is_empty());
        assert_eq!(s.tokens.len(), 2);
    }

    #[test]
    fn missing_column_is_an_error() {
        let text = "1\ta\ta\tDT\t-\t+\t_\n2\tb\tb\tNN\t-\n";
        assert!(read_sdp(text).is_err());
    }

    #[test]
    fn argument_columns_must_match_predicates() {
        let text = "1\ta\ta\tDT\t-\t-\t_\n2\tb\tb\tNN\t-\t-\tARG1\n";
        assert!(read_sdp(text).is_err());
    }

    #[test]
    fn round_trip_is_field_equivalent() {
        let text = "#20001001\n1\tPierre\tPierre\tNNP\t-\t-\t_\t_\n2\tVinken\tVinken\tNNP\t-\t+\tcompound\t_\n\
                    3\texpressed\texpress\tVBD\t+\t+\t_\t_\n4\this\this\tPRP$\t-\t-\t_\t_\n\
                    5\tconcern\tconcern\tNN\t-\t-\t_\tARG1\n";
        // The arg columns above: predicate 2 -> token 1 (compound), predicate 3 -> token 5.
        let s = read_sdp(text).unwrap();
        let written = write_sdp(&s).unwrap();
        let back = read_sdp(&written).unwrap();
        assert_eq!(back.tokens, s.tokens);
        assert_eq!(back.id.as_deref(), Some("20001001"));
        assert!(graph_isomorphic(&s.graph, &back.graph).unwrap());
    }
}
