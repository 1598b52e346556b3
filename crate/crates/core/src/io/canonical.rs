//! Canonical JSON-lines graph records and arborescence records.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{ArborNode, Arborescence, Framework, GraphEdge, GraphNode, SemanticGraph};

use super::FormatError;

/// One sentence with its token-level columns and its semantic graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalGraphRecord {
    pub id: String,
    pub framework: Framework,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub pos: Vec<String>,
    #[serde(default)]
    pub features: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub nodes: Vec<GraphNode>,
    #[serde(default)]
    pub edges: Vec<GraphEdge>,
    #[serde(default)]
    pub tops: Vec<String>,
}

impl CanonicalGraphRecord {
    pub fn from_graph(id: impl Into<String>, tokens: Vec<String>, pos: Vec<String>, g: SemanticGraph) -> Self {
        CanonicalGraphRecord {
            id: id.into(),
            framework: g.framework,
            tokens,
            pos,
            features: BTreeMap::new(),
            nodes: g.nodes,
            edges: g.edges,
            tops: g.tops,
        }
    }

    pub fn graph(&self) -> SemanticGraph {
        SemanticGraph {
            framework: self.framework,
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            tops: self.tops.clone(),
        }
    }

    /// Token columns must agree in length; an empty `pos` column is allowed.
    pub fn check(&self) -> Result<(), FormatError> {
        let n = self.tokens.len();
        if !self.pos.is_empty() && self.pos.len() != n {
            return Err(FormatError::Canonical(format!(
                "record {}: {} pos tags for {n} tokens",
                self.id,
                self.pos.len()
            )));
        }
        for (name, col) in &self.features {
            if col.len() != n {
                return Err(FormatError::Canonical(format!(
                    "record {}: feature `{name}` has {} values for {n} tokens",
                    self.id,
                    col.len()
                )));
            }
        }
        self.graph().check()?;
        Ok(())
    }
}

/// An arborescence together with the sentence it was converted from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArborRecord {
    pub id: String,
    pub framework: Framework,
    #[serde(default)]
    pub tokens: Vec<String>,
    pub root: ArborNode,
}

impl ArborRecord {
    pub fn arborescence(&self) -> Arborescence {
        Arborescence::new(self.root.clone())
    }
}

pub fn read_canonical(text: &str) -> Result<Vec<CanonicalGraphRecord>, FormatError> {
    read_jsonl(text)
}

pub fn write_canonical(records: &[CanonicalGraphRecord]) -> Result<String, FormatError> {
    write_jsonl(records)
}

pub fn read_arbor_records(text: &str) -> Result<Vec<ArborRecord>, FormatError> {
    read_jsonl(text)
}

pub fn write_arbor_records(records: &[ArborRecord]) -> Result<String, FormatError> {
    write_jsonl(records)
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, FormatError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| FormatError::Canonical(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub(crate) fn write_jsonl<T: Serialize>(records: &[T]) -> Result<String, FormatError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).map_err(|e| FormatError::Canonical(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}
