//! UCCA: pre-terminals collapse into their terminals, non-terminals take the
//! label of their incoming edge, remote edges point to copies.

use std::collections::{BTreeMap, HashMap};

use crate::graph::{Arborescence, Framework, GraphEdge, GraphNode, SemanticGraph, ROOT_LABEL};
use crate::linearize::OrderingPolicy;

use super::{expect_framework, merge_by_index, require_valid, ConversionTrace, ConvertError, Draft};

/// Label of every edge into a terminal.
pub const TERMINAL_EDGE: &str = "Terminal";
/// Label joining the terminals of a collapsed pre-terminal.
pub const PHRASE_EDGE: &str = "phrase";

pub fn ucca_to_arbor(g: &SemanticGraph) -> Result<Arborescence, ConvertError> {
    ucca_to_arbor_traced(g).map(|(a, _)| a)
}

pub fn ucca_to_arbor_traced(g: &SemanticGraph) -> Result<(Arborescence, ConversionTrace), ConvertError> {
    expect_framework(g, Framework::Ucca)?;
    if g.tops.len() != 1 {
        return Err(ConvertError::RootCount(g.tops.len()));
    }
    let idx = g.index_map();
    let n = g.nodes.len();
    let terminal: Vec<bool> = g.nodes.iter().map(|x| !x.anchors.is_empty()).collect();
    let mut out: Vec<Vec<&GraphEdge>> = vec![Vec::new(); n];
    let mut parents = vec![0usize; n];
    for e in &g.edges {
        let t = idx[e.target.as_str()];
        out[idx[e.source.as_str()]].push(e);
        if terminal[t] {
            parents[t] += 1;
            if e.label != TERMINAL_EDGE {
                return Err(ConvertError::TerminalParent(e.target.clone()));
            }
        } else if e.label == TERMINAL_EDGE {
            return Err(ConvertError::UnanchoredTerminal(e.target.clone()));
        }
    }
    for (i, &p) in parents.iter().enumerate() {
        if p > 1 {
            return Err(ConvertError::TerminalParent(g.nodes[i].id.clone()));
        }
    }
    let preterminal: Vec<bool> = (0..n)
        .map(|i| !terminal[i] && !out[i].is_empty() && out[i].iter().all(|e| terminal[idx[e.target.as_str()]]))
        .collect();

    let mut trace = ConversionTrace::default();
    let mut draft = Draft::default();
    // Label each node carries in the tree, fixed at its first visit.
    let mut tree_label: Vec<Option<(String, Vec<crate::graph::Span>)>> = vec![None; n];
    let mut copies: Vec<usize> = Vec::new();

    // Returns the draft node for graph node `x` reached via `via`, creating
    // its subtree if this is the first visit.
    let top = idx[g.tops[0].as_str()];
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    let mut visit = |x: usize,
                     via: Option<&str>,
                     draft: &mut Draft,
                     stack: &mut Vec<(usize, usize, usize)>,
                     trace: &mut ConversionTrace|
     -> usize {
        if let Some((label, anchors)) = &tree_label[x] {
            copies.push(x);
            return draft.add(x, label.clone(), anchors.clone());
        }
        let node = &g.nodes[x];
        if preterminal[x] {
            let mut terms: Vec<usize> = out[x].iter().map(|e| idx[e.target.as_str()]).collect();
            terms.sort_by_key(|&t| (g.nodes[t].anchors[0].from, t));
            let head = &g.nodes[terms[0]];
            let d = draft.add(x, head.label.clone(), head.anchors.clone());
            for &t in &terms[1..] {
                let tn = &g.nodes[t];
                let dt = draft.add(t, tn.label.clone(), tn.anchors.clone());
                tree_label[t] = Some((tn.label.clone(), tn.anchors.clone()));
                draft.attach(d, PHRASE_EDGE, dt);
            }
            trace
                .collapsed
                .insert(node.id.clone(), terms.iter().map(|&t| g.nodes[t].id.clone()).collect());
            tree_label[x] = Some((head.label.clone(), head.anchors.clone()));
            tree_label[terms[0]] = tree_label[x].clone();
            return d;
        }
        let (label, anchors) = if terminal[x] {
            (node.label.clone(), node.anchors.clone())
        } else {
            let l = via.unwrap_or(ROOT_LABEL).to_string();
            trace.labeled_nonterminals.insert(node.id.clone(), l.clone());
            (l, Vec::new())
        };
        let d = draft.add(x, label.clone(), anchors.clone());
        tree_label[x] = Some((label, anchors));
        stack.push((x, d, 0));
        d
    };
    let root = visit(top, None, &mut draft, &mut stack, &mut trace);
    while let Some(frame) = stack.last_mut() {
        let (x, dx, k) = *frame;
        let Some(e) = out[x].get(k) else {
            stack.pop();
            continue;
        };
        frame.2 += 1;
        let t = idx[e.target.as_str()];
        let dt = visit(t, Some(&e.label), &mut draft, &mut stack, &mut trace);
        draft.attach(dx, e.label.clone(), dt);
    }
    drop(visit);
    if let Some(p) = tree_label.iter().position(Option::is_none) {
        return Err(ConvertError::Unreachable(g.nodes[p].id.clone()));
    }
    let (a, index_of) = draft.finish(root, OrderingPolicy::SourceOrder);
    for c in copies {
        trace
            .duplicated
            .entry(g.nodes[c].id.clone())
            .or_default()
            .push(index_of[&c]);
    }
    Ok((a, trace))
}

/// Expands collapsed pre-terminals and clears non-terminal labels.
pub fn arbor_to_ucca(a: &Arborescence) -> Result<SemanticGraph, ConvertError> {
    require_valid(a)?;
    let merged = merge_by_index(a);
    let mut g = SemanticGraph::new(Framework::Ucca);
    // Index to the id standing for the unit in edges (pre-terminal if collapsed).
    let mut unit: HashMap<u32, String> = HashMap::new();
    let mut anchored: BTreeMap<u32, bool> = BTreeMap::new();
    for (i, node, via) in &merged.groups {
        let id = format!("n{i}");
        anchored.insert(*i, !node.anchors.is_empty());
        if node.anchors.is_empty() {
            g.nodes.push(GraphNode::new(id.clone(), ""));
            unit.insert(*i, id);
        } else if matches!(*via, Some(TERMINAL_EDGE) | Some(PHRASE_EDGE)) {
            g.nodes
                .push(GraphNode::anchored(id.clone(), node.label.clone(), node.anchors.clone()));
            unit.insert(*i, id);
        } else {
            let pre = format!("p{i}");
            g.nodes.push(GraphNode::new(pre.clone(), ""));
            g.nodes
                .push(GraphNode::anchored(id.clone(), node.label.clone(), node.anchors.clone()));
            g.edges.push(GraphEdge::new(pre.clone(), id, TERMINAL_EDGE));
            unit.insert(*i, pre);
        }
    }
    for (p, label, c) in merged.edges {
        if label == PHRASE_EDGE {
            if !anchored[&p] {
                return Err(ConvertError::PhraseWithoutAnchor(format!("n{p}")));
            }
            g.edges.push(GraphEdge::new(unit[&p].clone(), format!("n{c}"), TERMINAL_EDGE));
        } else {
            let target = if label == TERMINAL_EDGE { format!("n{c}") } else { unit[&c].clone() };
            g.edges.push(GraphEdge::new(unit[&p].clone(), target, label));
        }
    }
    g.tops.push(unit[&a.root.index].clone());
    Ok(g)
}
