//! DM: one tree per weakly connected component, edges reversed where a node
//! is otherwise unreachable, components joined under a root.

use std::collections::{HashSet, VecDeque};

use crate::graph::{Arborescence, Framework, GraphEdge, GraphNode, SemanticGraph, ROOT_LABEL};
use crate::linearize::OrderingPolicy;

use super::{expect_framework, merge_by_index, require_valid, ConversionTrace, ConvertError, Draft};

/// Suffix marking a reversed edge.
pub const REVERSE_SUFFIX: &str = "-of";
/// Label joining a component root that carries no top.
pub const NULL_EDGE: &str = "null";
/// Label under the synthetic root marking a top node.
pub const TOP_EDGE: &str = "top";

pub fn dm_to_arbor(g: &SemanticGraph) -> Result<Arborescence, ConvertError> {
    dm_to_arbor_traced(g).map(|(a, _)| a)
}

struct Builder<'g> {
    g: &'g SemanticGraph,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    target: Vec<usize>,
    source: Vec<usize>,
    covered: Vec<bool>,
    original: Vec<Option<usize>>,
    draft: Draft,
    trace: ConversionTrace,
    copies: Vec<usize>,
}

impl Builder<'_> {
    fn key(&self, n: usize) -> (usize, usize) {
        let a = self.g.nodes[n].anchors.first().map_or(usize::MAX, |s| s.from);
        (a, n)
    }

    fn copy(&mut self, n: usize) -> usize {
        self.copies.push(n);
        let node = &self.g.nodes[n];
        self.draft.add(n, node.label.clone(), node.anchors.clone())
    }

    fn place(&mut self, n: usize) -> usize {
        let node = &self.g.nodes[n];
        let d = self.draft.add(n, node.label.clone(), node.anchors.clone());
        self.original[n] = Some(d);
        d
    }

    /// Depth-first over uncovered outgoing edges in surface order.
    fn dfs(&mut self, start: usize) {
        let mut stack = vec![(start, 0usize)];
        while let Some(frame) = stack.last_mut() {
            let (x, k) = *frame;
            let Some(&e) = self.out[x].get(k) else {
                stack.pop();
                continue;
            };
            frame.1 += 1;
            if self.covered[e] {
                continue;
            }
            self.covered[e] = true;
            let t = self.target[e];
            let dx = self.original[x].expect("dfs runs from placed nodes");
            let label = self.g.edges[e].label.clone();
            if self.original[t].is_some() {
                let c = self.copy(t);
                self.draft.attach(dx, label, c);
            } else {
                let c = self.place(t);
                self.draft.attach(dx, label, c);
                stack.push((t, 0));
            }
        }
    }

    /// First placed node in breadth-first surface order that still has an
    /// uncovered incoming edge.
    fn frontier(&self, root: usize) -> Option<usize> {
        let mut queue = VecDeque::from([root]);
        let mut seen = HashSet::from([root]);
        while let Some(x) = queue.pop_front() {
            if self.inc[x].iter().any(|&e| !self.covered[e]) {
                return Some(x);
            }
            let mut next: Vec<usize> = self.out[x]
                .iter()
                .map(|&e| self.target[e])
                .chain(self.inc[x].iter().map(|&e| self.source[e]))
                .filter(|t| self.original[*t].is_some() && !seen.contains(t))
                .collect();
            next.sort_by_key(|&t| self.key(t));
            next.dedup();
            for t in next {
                seen.insert(t);
                queue.push_back(t);
            }
        }
        None
    }

    fn component(&mut self, root: usize) {
        self.place(root);
        self.dfs(root);
        while let Some(x) = self.frontier(root) {
            let e = *self.inc[x]
                .iter()
                .filter(|&&e| !self.covered[e])
                .min_by(|&&a, &&b| {
                    let ka = (self.key(self.source[a]), &self.g.edges[a].label);
                    let kb = (self.key(self.source[b]), &self.g.edges[b].label);
                    ka.cmp(&kb)
                })
                .expect("frontier has an uncovered edge");
            self.covered[e] = true;
            self.trace.reversed_edges.push(self.g.edges[e].clone());
            let s = self.source[e];
            let dx = self.original[x].expect("frontier nodes are placed");
            let label = format!("{}{REVERSE_SUFFIX}", self.g.edges[e].label);
            if self.original[s].is_some() {
                let c = self.copy(s);
                self.draft.attach(dx, label, c);
            } else {
                let c = self.place(s);
                self.draft.attach(dx, label, c);
                self.dfs(s);
            }
        }
    }
}

/// Converts a DM graph. Within a component the root is its top if it has
/// one, else the node with most outgoing edges (ties to the lowest anchor).
/// With exactly one top the top's component hosts the others through `null`
/// edges; otherwise a synthetic root links every component root through
/// `top` or `null`, and extra tops receive `top` edges to copies.
pub fn dm_to_arbor_traced(g: &SemanticGraph) -> Result<(Arborescence, ConversionTrace), ConvertError> {
    expect_framework(g, Framework::Dm)?;
    for e in &g.edges {
        if e.label.ends_with(REVERSE_SUFFIX) || e.label == NULL_EDGE || e.label == TOP_EDGE {
            return Err(ConvertError::ReservedLabel(e.label.clone()));
        }
    }
    let idx = g.index_map();
    let n = g.nodes.len();
    let target: Vec<usize> = g.edges.iter().map(|e| idx[e.target.as_str()]).collect();
    let source: Vec<usize> = g.edges.iter().map(|e| idx[e.source.as_str()]).collect();
    let mut out = vec![Vec::new(); n];
    let mut inc = vec![Vec::new(); n];
    for i in 0..g.edges.len() {
        out[source[i]].push(i);
        inc[target[i]].push(i);
    }
    let key = |n: usize| (g.nodes[n].anchors.first().map_or(usize::MAX, |s| s.from), n);
    for list in &mut out {
        list.sort_by(|&x, &y| (key(target[x]), &g.edges[x].label).cmp(&(key(target[y]), &g.edges[y].label)));
    }
    let mut b = Builder {
        g,
        out,
        inc,
        target,
        source,
        covered: vec![false; g.edges.len()],
        original: vec![None; n],
        draft: Draft::default(),
        trace: ConversionTrace::default(),
        copies: Vec::new(),
    };

    let mut tops: Vec<usize> = g.tops.iter().map(|t| idx[t.as_str()]).collect();
    tops.sort_by_key(|&t| b.key(t));
    tops.dedup();
    let top_set: HashSet<usize> = tops.iter().copied().collect();

    let mut roots = Vec::new();
    for comp in g.weak_components() {
        let root = comp
            .iter()
            .copied()
            .filter(|c| top_set.contains(c))
            .min_by_key(|&c| b.key(c))
            .unwrap_or_else(|| {
                comp.iter()
                    .copied()
                    .min_by_key(|&c| (std::cmp::Reverse(b.out[c].len()), b.key(c)))
                    .expect("components are non-empty")
            });
        roots.push(root);
    }
    roots.sort_by_key(|&r| b.key(r));
    for &r in &roots {
        b.component(r);
    }

    let synthetic = tops.len() != 1;
    let root = if synthetic {
        let s = b.draft.add(n, ROOT_LABEL, Vec::new());
        for &r in &roots {
            let label = if top_set.contains(&r) { TOP_EDGE } else { NULL_EDGE };
            if label == NULL_EDGE {
                b.trace.null_edges.push(g.nodes[r].id.clone());
            }
            let d = b.original[r].expect("component roots are placed");
            b.draft.attach(s, label, d);
        }
        let root_set: HashSet<usize> = roots.iter().copied().collect();
        for &t in &tops {
            if !root_set.contains(&t) {
                let c = b.copy(t);
                b.draft.attach(s, TOP_EDGE, c);
            }
        }
        s
    } else {
        let main = tops[0];
        let d = b.original[main].expect("top is placed");
        for &r in &roots {
            if r != main {
                b.trace.null_edges.push(g.nodes[r].id.clone());
                let dr = b.original[r].expect("component roots are placed");
                b.draft.attach(d, NULL_EDGE, dr);
            }
        }
        d
    };
    let (a, index_of) = b.draft.finish(root, OrderingPolicy::SurfaceOrder);
    let mut trace = b.trace;
    for c in b.copies {
        trace
            .duplicated
            .entry(g.nodes[c].id.clone())
            .or_default()
            .push(index_of[&c]);
    }
    Ok((a, trace))
}

/// Merges duplicates, drops `null` edges, restores reversed edges and tops.
pub fn arbor_to_dm(a: &Arborescence) -> Result<SemanticGraph, ConvertError> {
    require_valid(a)?;
    let synthetic = a.root.label == ROOT_LABEL && a.root.anchors.is_empty();
    let merged = merge_by_index(a);
    let root = a.root.index;
    let mut g = SemanticGraph::new(Framework::Dm);
    for (i, node, _) in &merged.groups {
        if synthetic && *i == root {
            continue;
        }
        g.nodes
            .push(GraphNode::anchored(format!("n{i}"), node.label.clone(), node.anchors.clone()));
    }
    let mut tops = Vec::new();
    if !synthetic {
        tops.push(root);
    }
    for (p, label, c) in merged.edges {
        if synthetic && (p == root || c == root) {
            match label {
                TOP_EDGE if p == root => tops.push(c),
                NULL_EDGE if p == root => {}
                other => return Err(ConvertError::SyntheticRootEdge(other.to_string())),
            }
            continue;
        }
        if label == NULL_EDGE {
            continue;
        }
        if let Some(base) = label.strip_suffix(REVERSE_SUFFIX) {
            if base.is_empty() {
                return Err(ConvertError::EmptyReversedLabel(label.to_string()));
            }
            g.edges.push(GraphEdge::new(format!("n{c}"), format!("n{p}"), base));
        } else {
            g.edges.push(GraphEdge::new(format!("n{p}"), format!("n{c}"), label));
        }
    }
    let mut seen = HashSet::new();
    tops.retain(|t| seen.insert(*t));
    g.tops = tops.into_iter().map(|t| format!("n{t}")).collect();
    Ok(g)
}
