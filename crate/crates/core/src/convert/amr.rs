//! AMR: depth-first traversal from the top, duplicating reentrant nodes.

use std::collections::HashMap;

use crate::graph::{Arborescence, Framework, GraphEdge, GraphNode, SemanticGraph};
use crate::linearize::OrderingPolicy;

use super::{expect_framework, merge_by_index, require_valid, ConversionTrace, ConvertError, Draft};

pub fn amr_to_arbor(g: &SemanticGraph) -> Result<Arborescence, ConvertError> {
    amr_to_arbor_traced(g).map(|(a, _)| a)
}

/// Children are visited in (relation label, child label) order; the first
/// visit keeps the node, later visits create leaf copies.
pub fn amr_to_arbor_traced(g: &SemanticGraph) -> Result<(Arborescence, ConversionTrace), ConvertError> {
    expect_framework(g, Framework::Amr)?;
    if g.tops.len() != 1 {
        return Err(ConvertError::RootCount(g.tops.len()));
    }
    let idx = g.index_map();
    let mut out: Vec<Vec<&GraphEdge>> = vec![Vec::new(); g.nodes.len()];
    for e in &g.edges {
        out[idx[e.source.as_str()]].push(e);
    }
    for list in &mut out {
        list.sort_by(|a, b| {
            let la = &g.nodes[idx[a.target.as_str()]].label;
            let lb = &g.nodes[idx[b.target.as_str()]].label;
            (&a.label, la).cmp(&(&b.label, lb))
        });
    }

    let mut draft = Draft::default();
    let mut placed = vec![false; g.nodes.len()];
    let mut copies: HashMap<usize, usize> = HashMap::new();
    let top = idx[g.tops[0].as_str()];
    let root = draft.add(top, g.nodes[top].label.clone(), g.nodes[top].anchors.clone());
    placed[top] = true;
    // Depth-first with an explicit stack of (node, draft node, next edge).
    let mut stack = vec![(top, root, 0usize)];
    while let Some(frame) = stack.last_mut() {
        let (x, dx, k) = *frame;
        let Some(e) = out[x].get(k) else {
            stack.pop();
            continue;
        };
        frame.2 += 1;
        let t = idx[e.target.as_str()];
        let node = &g.nodes[t];
        let dt = draft.add(t, node.label.clone(), node.anchors.clone());
        draft.attach(dx, e.label.clone(), dt);
        if placed[t] {
            *copies.entry(t).or_default() += 1;
        } else {
            placed[t] = true;
            stack.push((t, dt, 0));
        }
    }
    if let Some(p) = placed.iter().position(|&p| !p) {
        return Err(ConvertError::Unreachable(g.nodes[p].id.clone()));
    }
    let (a, index_of) = draft.finish(root, OrderingPolicy::Alphanumeric);
    let mut trace = ConversionTrace::default();
    for (node, n) in copies {
        trace.duplicated.insert(g.nodes[node].id.clone(), vec![index_of[&node]; n]);
    }
    Ok((a, trace))
}

/// Merges nodes sharing an index back into one graph node.
pub fn arbor_to_amr(a: &Arborescence) -> Result<SemanticGraph, ConvertError> {
    require_valid(a)?;
    let merged = merge_by_index(a);
    let mut g = SemanticGraph::new(Framework::Amr);
    for (i, node, _) in &merged.groups {
        g.nodes
            .push(GraphNode::anchored(format!("n{i}"), node.label.clone(), node.anchors.clone()));
    }
    for (p, label, c) in merged.edges {
        g.edges.push(GraphEdge::new(format!("n{p}"), format!("n{c}"), label));
    }
    g.tops.push(format!("n{}", a.root.index));
    Ok(g)
}
