//! Framework graphs, unified arborescences and relation sequences.
//!
//! A [`SemanticGraph`] is the framework-specific representation read from
//! disk (AMR, DM or UCCA). An [`Arborescence`] is the unified rooted-tree
//! format in which reentrant nodes are duplicated and tied together through
//! a shared node index. A [`RelationSequence`] is the pre-order linearization
//! of an arborescence that the transducer is trained to emit.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved label of the pseudo-node every sequence starts from. Also the
/// label given to synthetic arborescence roots.
pub const ROOT_LABEL: &str = "@root@";

/// Reserved relation type of the first relation in every sequence.
pub const ROOT_RELATION: &str = "root";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge refers to unknown node `{0}`")]
    UnknownNode(String),
    #[error("edge {0} -> {1} has an empty label")]
    EmptyEdgeLabel(String, String),
    #[error("framework mismatch: {0} vs {1}")]
    FrameworkMismatch(Framework, Framework),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Amr,
    Dm,
    Ucca,
}

impl Framework {
    pub const ALL: [Framework; 3] = [Framework::Amr, Framework::Dm, Framework::Ucca];

    pub fn name(self) -> &'static str {
        match self {
            Framework::Amr => "amr",
            Framework::Dm => "dm",
            Framework::Ucca => "ucca",
        }
    }
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Framework {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "amr" => Ok(Framework::Amr),
            "dm" | "sdp" => Ok(Framework::Dm),
            "ucca" => Ok(Framework::Ucca),
            other => Err(format!("unknown framework `{other}`")),
        }
    }
}

/// Half-open token span `[from, to)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub from: usize,
    pub to: usize,
}

impl Span {
    pub fn token(i: usize) -> Self {
        Span { from: i, to: i + 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<Span>,
}

impl GraphNode {
    pub fn new(id: impl Into<String>, label: impl Into<String>) -> Self {
        GraphNode {
            id: id.into(),
            label: label.into(),
            anchors: Vec::new(),
        }
    }

    pub fn anchored(id: impl Into<String>, label: impl Into<String>, anchors: Vec<Span>) -> Self {
        GraphNode {
            id: id.into(),
            label: label.into(),
            anchors,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    #[serde(rename = "src")]
    pub source: String,
    #[serde(rename = "tgt")]
    pub target: String,
    pub label: String,
}

impl GraphEdge {
    pub fn new(source: impl Into<String>, target: impl Into<String>, label: impl Into<String>) -> Self {
        GraphEdge {
            source: source.into(),
            target: target.into(),
            label: label.into(),
        }
    }
}

/// A labeled directed multigraph tagged with its framework.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticGraph {
    pub framework: Framework,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub tops: Vec<String>,
}

impl SemanticGraph {
    pub fn new(framework: Framework) -> Self {
        SemanticGraph {
            framework,
            nodes: Vec::new(),
            edges: Vec::new(),
            tops: Vec::new(),
        }
    }

    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Map from node id to its position in `nodes`.
    pub fn index_map(&self) -> HashMap<&str, usize> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.as_str(), i))
            .collect()
    }

    /// Checks id uniqueness, edge endpoints and edge labels.
    pub fn check(&self) -> Result<(), GraphError> {
        let mut seen = HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n.id.as_str()) {
                return Err(GraphError::DuplicateNode(n.id.clone()));
            }
        }
        for e in &self.edges {
            for end in [&e.source, &e.target] {
                if !seen.contains(end.as_str()) {
                    return Err(GraphError::UnknownNode(end.clone()));
                }
            }
            if e.label.is_empty() {
                return Err(GraphError::EmptyEdgeLabel(e.source.clone(), e.target.clone()));
            }
        }
        for t in &self.tops {
            if !seen.contains(t.as_str()) {
                return Err(GraphError::UnknownNode(t.clone()));
            }
        }
        Ok(())
    }

    /// Weakly connected components as lists of node positions, each sorted,
    /// ordered by their smallest member.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let idx = self.index_map();
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (idx[e.source.as_str()], idx[e.target.as_str()]);
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().collect()
    }
}

/// A node of an arborescence. Duplicated reentrant nodes share `index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArborNode {
    pub label: String,
    pub index: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<Span>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ArborEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArborEdge {
    pub label: String,
    pub node: ArborNode,
}

impl ArborNode {
    pub fn leaf(label: impl Into<String>, index: u32) -> Self {
        ArborNode {
            label: label.into(),
            index,
            anchors: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn with_child(mut self, label: impl Into<String>, child: ArborNode) -> Self {
        self.children.push(ArborEdge {
            label: label.into(),
            node: child,
        });
        self
    }

    pub fn with_anchors(mut self, anchors: Vec<Span>) -> Self {
        self.anchors = anchors;
        self
    }

    /// Calls `f(parent_edge_label, node)` for every node in pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(Option<&'a str>, &'a ArborNode)) {
        fn go<'a>(
            n: &'a ArborNode,
            via: Option<&'a str>,
            f: &mut impl FnMut(Option<&'a str>, &'a ArborNode),
        ) {
            f(via, n);
            for c in &n.children {
                go(&c.node, Some(&c.label), f);
            }
        }
        go(self, None, f);
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_, _| n += 1);
        n
    }

    pub fn edge_count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |via, _| n += usize::from(via.is_some()));
        n
    }
}

/// Rooted ordered tree with node indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arborescence {
    pub root: ArborNode,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Nodes sharing an index carry different labels or anchors.
    IndexCoherence {
        index: u32,
        labels: Vec<String>,
    },
    NonPositiveIndex {
        label: String,
    },
    /// Node and edge counts disagree with a tree.
    TreeShape {
        nodes: usize,
        edges: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexCoherence { index, labels } => {
                write!(f, "index {index} shared by differing nodes {labels:?}")
            }
            Violation::NonPositiveIndex { label } => write!(f, "node `{label}` has index 0"),
            Violation::TreeShape { nodes, edges } => {
                write!(f, "{nodes} nodes but {edges} edges")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Arborescence {
    pub fn new(root: ArborNode) -> Self {
        Arborescence { root }
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    /// Recursively reorders children. The sort is stable.
    pub fn sort_children_by<F>(&mut self, cmp: &F)
    where
        F: Fn(&ArborEdge, &ArborEdge) -> std::cmp::Ordering,
    {
        fn go<F: Fn(&ArborEdge, &ArborEdge) -> std::cmp::Ordering>(n: &mut ArborNode, cmp: &F) {
            n.children.sort_by(cmp);
            for c in &mut n.children {
                go(&mut c.node, cmp);
            }
        }
        go(&mut self.root, cmp);
    }
}

/// Checks index positivity and index coherence. Tree shape holds by
/// construction for an owned tree; the count check guards hand-built
/// inputs that bypass it.
pub fn validate_arborescence(a: &Arborescence) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut by_index: BTreeMap<u32, Vec<(&str, &[Span])>> = BTreeMap::new();
    let (mut nodes, mut edges) = (0usize, 0usize);
    a.root.walk(&mut |via, n| {
        nodes += 1;
        edges += usize::from(via.is_some());
        if n.index == 0 {
            report.violations.push(Violation::NonPositiveIndex {
                label: n.label.clone(),
            });
        }
        by_index
            .entry(n.index)
            .or_default()
            .push((n.label.as_str(), n.anchors.as_slice()));
    });
    if nodes != edges + 1 {
        report.violations.push(Violation::TreeShape { nodes, edges });
    }
    for (index, group) in by_index {
        if index == 0 {
            continue;
        }
        let (l0, a0) = group[0];
        if group.iter().any(|&(l, a)| l != l0 || a != a0) {
            let mut labels: Vec<String> = group.iter().map(|(l, _)| l.to_string()).collect();
            labels.sort();
            labels.dedup();
            report
                .violations
                .push(Violation::IndexCoherence { index, labels });
        }
    }
    report
}

/// One semantic relation `<u, d_u, r, v, d_v>`.
///
/// `source_position` is the sequence position of the node the relation
/// attaches to (0 for the pseudo-root); it disambiguates duplicate
/// `(label, index)` pairs. `target_anchors` carries token anchors for
/// anchored frameworks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub source_label: String,
    pub source_index: u32,
    pub relation: String,
    pub target_label: String,
    pub target_index: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub target_anchors: Vec<Span>,
    pub source_position: usize,
}

impl Relation {
    pub fn is_root(&self) -> bool {
        self.source_index == 0 && self.source_label == ROOT_LABEL
    }

    /// The labeled tuple used for scoring, without positional bookkeeping.
    pub fn key(&self) -> (String, u32, String, String, u32, Vec<Span>) {
        (
            self.source_label.clone(),
            self.source_index,
            self.relation.clone(),
            self.target_label.clone(),
            self.target_index,
            self.target_anchors.clone(),
        )
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}",
            self.source_label, self.source_index, self.relation, self.target_label, self.target_index
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSequence {
    pub relations: Vec<Relation>,
    /// Set when the sequence ends with an EOS prediction rather than by
    /// truncation.
    #[serde(default)]
    pub terminated: bool,
}

impl RelationSequence {
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }
}

/// Whether `g1` and `g2` are equal up to a renaming of node ids.
///
/// Nodes are matched by label, anchors and top status, then a backtracking
/// search extends a partial bijection while checking the multiset of edge
/// labels between every pair of mapped nodes.
pub fn graph_isomorphic(g1: &SemanticGraph, g2: &SemanticGraph) -> Result<bool, GraphError> {
    if g1.framework != g2.framework {
        return Err(GraphError::FrameworkMismatch(g1.framework, g2.framework));
    }
    if g1.nodes.len() != g2.nodes.len() || g1.edges.len() != g2.edges.len() {
        return Ok(false);
    }
    let a = IsoView::new(g1);
    let b = IsoView::new(g2);
    let mut sig_a = a.signatures.clone();
    let mut sig_b = b.signatures.clone();
    sig_a.sort();
    sig_b.sort();
    if sig_a != sig_b {
        return Ok(false);
    }
    let order = a.search_order();
    let mut map = vec![usize::MAX; a.n];
    let mut used = vec![false; b.n];
    Ok(extend(&a, &b, &order, 0, &mut map, &mut used))
}

struct IsoView {
    n: usize,
    signatures: Vec<NodeSignature>,
    /// Edge labels keyed by (source, target), sorted.
    pair_labels: HashMap<(usize, usize), Vec<String>>,
    neighbors: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct NodeSignature {
    label: String,
    anchors: Vec<Span>,
    top: bool,
    out_labels: Vec<String>,
    in_labels: Vec<String>,
}

impl IsoView {
    fn new(g: &SemanticGraph) -> Self {
        let idx = g.index_map();
        let n = g.nodes.len();
        let tops: HashSet<&str> = g.tops.iter().map(String::as_str).collect();
        let mut signatures: Vec<NodeSignature> = g
            .nodes
            .iter()
            .map(|nd| {
                let mut anchors = nd.anchors.clone();
                anchors.sort();
                NodeSignature {
                    label: nd.label.clone(),
                    anchors,
                    top: tops.contains(nd.id.as_str()),
                    out_labels: Vec::new(),
                    in_labels: Vec::new(),
                }
            })
            .collect();
        let mut pair_labels: HashMap<(usize, usize), Vec<String>> = HashMap::new();
        let mut neighbors = vec![Vec::new(); n];
        for e in &g.edges {
            let (s, t) = (idx[e.source.as_str()], idx[e.target.as_str()]);
            signatures[s].out_labels.push(e.label.clone());
            signatures[t].in_labels.push(e.label.clone());
            pair_labels.entry((s, t)).or_default().push(e.label.clone());
            neighbors[s].push(t);
            neighbors[t].push(s);
        }
        for s in &mut signatures {
            s.out_labels.sort();
            s.in_labels.sort();
        }
        for v in pair_labels.values_mut() {
            v.sort();
        }
        IsoView {
            n,
            signatures,
            pair_labels,
            neighbors,
        }
    }

    /// Breadth-first order so each node after the first of a component has
    /// an already mapped neighbour, which prunes early.
    fn search_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut order = Vec::with_capacity(self.n);
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(x) = queue.pop_front() {
                order.push(x);
                for &y in &self.neighbors[x] {
                    if !seen[y] {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
        }
        order
    }

    fn labels(&self, s: usize, t: usize) -> &[String] {
        self.pair_labels.get(&(s, t)).map_or(&[], Vec::as_slice)
    }
}

fn extend(
    a: &IsoView,
    b: &IsoView,
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    let Some(&x) = order.get(depth) else {
        return true;
    };
    for y in 0..b.n {
        if used[y] || a.signatures[x] != b.signatures[y] {
            continue;
        }
        if a.labels(x, x) != b.labels(y, y) {
            continue;
        }
        let consistent = order[..depth].iter().all(|&p| {
            let q = map[p];
            a.labels(x, p) == b.labels(y, q) && a.labels(p, x) == b.labels(q, y)
        });
        if !consistent {
            continue;
        }
        map[x] = y;
        used[y] = true;
        if extend(a, b, order, depth + 1, map, used) {
            return true;
        }
        map[x] = usize::MAX;
        used[y] = false;
    }
    false
}
