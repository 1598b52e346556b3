//! Reversible conversions between framework graphs and arborescences.
//!
//! Every conversion produces an arborescence whose children are already in
//! the framework's linearization order and whose node indices equal the
//! pre-order position of the first occurrence of each underlying graph node.
//! With that numbering the reference relation sequence satisfies the
//! decoder's index rule: a new node at position `i` has index `i`, a
//! duplicate reuses its antecedent's index.

mod amr;
mod dm;
mod senses;
mod ucca;

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::graph::{
    validate_arborescence, ArborEdge, ArborNode, Arborescence, Framework, GraphEdge, GraphError,
    SemanticGraph, Span,
};
use crate::linearize::OrderingPolicy;

pub use amr::{amr_to_arbor, amr_to_arbor_traced, arbor_to_amr};
pub use dm::{arbor_to_dm, dm_to_arbor, dm_to_arbor_traced, NULL_EDGE, REVERSE_SUFFIX, TOP_EDGE};
pub use senses::{restore_senses, split_sense, strip_senses, SenseTable};
pub use ucca::{arbor_to_ucca, ucca_to_arbor, ucca_to_arbor_traced, PHRASE_EDGE, TERMINAL_EDGE};

#[derive(Debug, Error)]
pub enum ConvertError {
    #[error("expected a {expected} graph, got {found}")]
    WrongFramework { expected: Framework, found: Framework },
    #[error("expected exactly one root, found {0}")]
    RootCount(usize),
    #[error("node `{0}` is not reachable from the root")]
    Unreachable(String),
    #[error("arborescence is invalid: {0}")]
    Invalid(String),
    #[error("edge label `{0}` is reserved by the conversion")]
    ReservedLabel(String),
    #[error("reversed edge label `{0}` has an empty base label")]
    EmptyReversedLabel(String),
    #[error("terminal `{0}` has no anchor")]
    UnanchoredTerminal(String),
    #[error("terminal `{0}` must have exactly one parent via a `Terminal` edge")]
    TerminalParent(String),
    #[error("phrase edge under unanchored node `{0}`")]
    PhraseWithoutAnchor(String),
    #[error("unexpected edge `{0}` under the synthetic root")]
    SyntheticRootEdge(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Bookkeeping produced alongside an arborescence: which steps were applied.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConversionTrace {
    /// Original node id to the indices of its duplicated copies.
    pub duplicated: BTreeMap<String, Vec<u32>>,
    /// DM edges that were reversed (as they appear in the graph).
    pub reversed_edges: Vec<GraphEdge>,
    /// DM component roots attached through `null` edges.
    pub null_edges: Vec<String>,
    /// UCCA pre-terminal id to the ids of the terminals it covered.
    pub collapsed: BTreeMap<String, Vec<String>>,
    /// UCCA non-terminal id to the label it received.
    pub labeled_nonterminals: BTreeMap<String, String>,
}

/// Converts any framework graph to its arborescence.
pub fn to_arbor(g: &SemanticGraph) -> Result<Arborescence, ConvertError> {
    match g.framework {
        Framework::Amr => amr_to_arbor(g),
        Framework::Dm => dm_to_arbor(g),
        Framework::Ucca => ucca_to_arbor(g),
    }
}

/// Inverse of [`to_arbor`].
pub fn from_arbor(a: &Arborescence, framework: Framework) -> Result<SemanticGraph, ConvertError> {
    match framework {
        Framework::Amr => arbor_to_amr(a),
        Framework::Dm => arbor_to_dm(a),
        Framework::Ucca => arbor_to_ucca(a),
    }
}

pub(crate) fn expect_framework(g: &SemanticGraph, expected: Framework) -> Result<(), ConvertError> {
    if g.framework != expected {
        return Err(ConvertError::WrongFramework {
            expected,
            found: g.framework,
        });
    }
    g.check()?;
    Ok(())
}

pub(crate) fn require_valid(a: &Arborescence) -> Result<(), ConvertError> {
    let report = validate_arborescence(a);
    match report.violations.first() {
        None => Ok(()),
        Some(v) => Err(ConvertError::Invalid(v.to_string())),
    }
}

/// Tree under construction. `group` identifies the underlying graph node;
/// copies share the group of their original.
#[derive(Debug, Default)]
pub(crate) struct Draft {
    nodes: Vec<DraftNode>,
}

#[derive(Debug)]
struct DraftNode {
    group: usize,
    label: String,
    anchors: Vec<Span>,
    children: Vec<(String, usize)>,
}

impl Draft {
    pub(crate) fn add(&mut self, group: usize, label: impl Into<String>, anchors: Vec<Span>) -> usize {
        self.nodes.push(DraftNode {
            group,
            label: label.into(),
            anchors,
            children: Vec::new(),
        });
        self.nodes.len() - 1
    }

    pub(crate) fn attach(&mut self, parent: usize, label: impl Into<String>, child: usize) {
        self.nodes[parent].children.push((label.into(), child));
    }

    /// Builds the arborescence rooted at `root`: children sorted by `policy`,
    /// then indices assigned by pre-order position of each group's first
    /// occurrence. Also returns each group's final index.
    pub(crate) fn finish(&self, root: usize, policy: OrderingPolicy) -> (Arborescence, HashMap<usize, u32>) {
        fn build(d: &Draft, n: usize) -> ArborNode {
            let node = &d.nodes[n];
            ArborNode {
                label: node.label.clone(),
                index: node.group as u32 + 1,
                anchors: node.anchors.clone(),
                children: node
                    .children
                    .iter()
                    .map(|(l, c)| ArborEdge {
                        label: l.clone(),
                        node: build(d, *c),
                    })
                    .collect(),
            }
        }
        let mut a = Arborescence::new(build(self, root));
        policy.sort(&mut a);
        let map = renumber(&mut a.root);
        let groups = map.into_iter().map(|(k, v)| (k as usize - 1, v)).collect();
        (a, groups)
    }
}

/// Replaces provisional group ids by pre-order positions.
fn renumber(root: &mut ArborNode) -> HashMap<u32, u32> {
    fn go(n: &mut ArborNode, next: &mut u32, seen: &mut HashMap<u32, u32>) {
        let idx = *seen.entry(n.index).or_insert(*next);
        *next += 1;
        n.index = idx;
        for c in &mut n.children {
            go(&mut c.node, next, seen);
        }
    }
    let mut seen = HashMap::new();
    go(root, &mut 1, &mut seen);
    seen
}

/// Nodes of an arborescence merged by index, in order of first appearance.
pub(crate) struct Merged<'a> {
    /// (index, representative node, incoming edge label of first occurrence)
    pub groups: Vec<(u32, &'a ArborNode, Option<&'a str>)>,
    /// (parent index, edge label, child index) for every tree edge.
    pub edges: Vec<(u32, &'a str, u32)>,
}

pub(crate) fn merge_by_index(a: &Arborescence) -> Merged<'_> {
    let mut groups: Vec<(u32, &ArborNode, Option<&str>)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    fn go<'a>(
        n: &'a ArborNode,
        via: Option<&'a str>,
        groups: &mut Vec<(u32, &'a ArborNode, Option<&'a str>)>,
        seen: &mut std::collections::HashSet<u32>,
        edges: &mut Vec<(u32, &'a str, u32)>,
    ) {
        if seen.insert(n.index) {
            groups.push((n.index, n, via));
        }
        for c in &n.children {
            edges.push((n.index, c.label.as_str(), c.node.index));
            go(&c.node, Some(&c.label), groups, seen, edges);
        }
    }
    go(&a.root, None, &mut groups, &mut seen, &mut edges);
    Merged { groups, edges }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renumbering_uses_first_occurrence_positions() {
        let mut root = ArborNode::leaf("a", 10)
            .with_child("x", ArborNode::leaf("b", 20).with_child("z", ArborNode::leaf("a", 10)))
            .with_child("y", ArborNode::leaf("c", 30));
        renumber(&mut root);
        let mut got = Vec::new();
        root.walk(&mut |_, n| got.push((n.label.clone(), n.index)));
        assert_eq!(
            got,
            vec![("a".into(), 1), ("b".into(), 2), ("a".into(), 1), ("c".into(), 4)]
        );
    }
}
