//! Arborescence to relation sequence and back.
//!
//! A sequence lists one relation per node in pre-order. The first relation
//! attaches the arborescence root to the pseudo-root `@root@` (index 0);
//! relation `i` introduces the node at pre-order position `i`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    ArborEdge, ArborNode, Arborescence, Framework, Relation, RelationSequence, Span, ROOT_LABEL,
    ROOT_RELATION,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinearizeError {
    #[error("relation sequence is empty")]
    Empty,
    #[error("relation {0} must attach to the pseudo-root")]
    MissingRoot(usize),
    #[error("relation {position} attaches to position {source_position}, which is not earlier")]
    BadSourcePosition { position: usize, source_position: usize },
    #[error("relation {position}: source ({label}, {index}) does not match the node it points to")]
    SourceMismatch { position: usize, label: String, index: u32 },
    #[error("relation {position}: no earlier node ({label}, {index})")]
    UnresolvedSource { position: usize, label: String, index: u32 },
    #[error("line {line}: {message}")]
    Tsv { line: usize, message: String },
}

/// Order of children during traversal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingPolicy {
    /// By relation label, then child label (AMR).
    Alphanumeric,
    /// By the child's first token anchor, then relation and child label;
    /// unanchored children last (DM).
    SurfaceOrder,
    /// Stored order (UCCA).
    SourceOrder,
}

impl OrderingPolicy {
    pub fn for_framework(f: Framework) -> Self {
        match f {
            Framework::Amr => OrderingPolicy::Alphanumeric,
            Framework::Dm => OrderingPolicy::SurfaceOrder,
            Framework::Ucca => OrderingPolicy::SourceOrder,
        }
    }

    pub fn compare(&self, a: &ArborEdge, b: &ArborEdge) -> Ordering {
        match self {
            OrderingPolicy::Alphanumeric => (&a.label, &a.node.label).cmp(&(&b.label, &b.node.label)),
            OrderingPolicy::SurfaceOrder => {
                let pos = |e: &ArborEdge| e.node.anchors.first().map_or(usize::MAX, |s| s.from);
                (pos(a), &a.label, &a.node.label).cmp(&(pos(b), &b.label, &b.node.label))
            }
            OrderingPolicy::SourceOrder => Ordering::Equal,
        }
    }

    /// Stable recursive sort of all children.
    pub fn sort(&self, a: &mut Arborescence) {
        if *self != OrderingPolicy::SourceOrder {
            a.sort_children_by(&|x, y| self.compare(x, y));
        }
    }
}

/// Pre-order linearization with children in `policy` order.
pub fn arbor_to_relations(a: &Arborescence, policy: OrderingPolicy) -> RelationSequence {
    let mut sorted = a.clone();
    policy.sort(&mut sorted);
    let root = &sorted.root;
    let mut relations = vec![Relation {
        source_label: ROOT_LABEL.to_string(),
        source_index: 0,
        relation: ROOT_RELATION.to_string(),
        target_label: root.label.clone(),
        target_index: root.index,
        target_anchors: root.anchors.clone(),
        source_position: 0,
    }];
    // Explicit stack of (node, its position, next child).
    let mut stack: Vec<(&ArborNode, usize, usize)> = vec![(root, 1, 0)];
    while let Some(frame) = stack.last_mut() {
        let (node, pos, k) = *frame;
        let Some(edge) = node.children.get(k) else {
            stack.pop();
            continue;
        };
        frame.2 += 1;
        relations.push(Relation {
            source_label: node.label.clone(),
            source_index: node.index,
            relation: edge.label.clone(),
            target_label: edge.node.label.clone(),
            target_index: edge.node.index,
            target_anchors: edge.node.anchors.clone(),
            source_position: pos,
        });
        let child_pos = relations.len();
        stack.push((&edge.node, child_pos, 0));
    }
    RelationSequence {
        relations,
        terminated: true,
    }
}

/// Rebuilds the arborescence; each relation hangs its target under the node
/// at `source_position`.
pub fn relations_to_arbor(seq: &RelationSequence) -> Result<Arborescence, LinearizeError> {
    let rels = &seq.relations;
    let first = rels.first().ok_or(LinearizeError::Empty)?;
    if !first.is_root() {
        return Err(LinearizeError::MissingRoot(1));
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); rels.len() + 1];
    for (i, r) in rels.iter().enumerate().skip(1) {
        let pos = i + 1;
        if r.source_index == 0 && r.source_label == ROOT_LABEL {
            return Err(LinearizeError::MissingRoot(pos));
        }
        if r.source_position == 0 || r.source_position >= pos {
            return Err(LinearizeError::BadSourcePosition {
                position: pos,
                source_position: r.source_position,
            });
        }
        let src = &rels[r.source_position - 1];
        if src.target_label != r.source_label || src.target_index != r.source_index {
            return Err(LinearizeError::SourceMismatch {
                position: pos,
                label: r.source_label.clone(),
                index: r.source_index,
            });
        }
        children[r.source_position].push(pos);
    }
    // Build bottom-up: every child has a larger position than its parent.
    let mut built: Vec<Option<ArborNode>> = vec![None; rels.len() + 1];
    for pos in (1..=rels.len()).rev() {
        let r = &rels[pos - 1];
        let mut node = ArborNode::leaf(r.target_label.clone(), r.target_index).with_anchors(r.target_anchors.clone());
        for &c in &children[pos] {
            let child = built[c].take().expect("children are built first");
            node.children.push(ArborEdge {
                label: rels[c - 1].relation.clone(),
                node: child,
            });
        }
        built[pos] = Some(node);
    }
    Ok(Arborescence::new(built[1].take().expect("root is built")))
}

/// Position (1-based) of the latest earlier relation whose target is
/// `(label, index)`, searching positions before `before`.
pub fn resolve_source(relations: &[Relation], before: usize, label: &str, index: u32) -> Option<usize> {
    relations[..before.saturating_sub(1).min(relations.len())]
        .iter()
        .rposition(|r| r.target_label == label && r.target_index == index)
        .map(|p| p + 1)
}

/// Builds relations from label-only tuples `(u, d_u, r, v, d_v, anchors)`,
/// resolving each source to its latest earlier occurrence.
pub fn relations_from_tuples(
    tuples: Vec<(String, u32, String, String, u32, Vec<Span>)>,
) -> Result<RelationSequence, LinearizeError> {
    let mut relations: Vec<Relation> = Vec::with_capacity(tuples.len());
    for (i, (u, du, r, v, dv, anchors)) in tuples.into_iter().enumerate() {
        let pos = i + 1;
        let source_position = if du == 0 && u == ROOT_LABEL {
            0
        } else {
            resolve_source(&relations, pos, &u, du).ok_or_else(|| LinearizeError::UnresolvedSource {
                position: pos,
                label: u.clone(),
                index: du,
            })?
        };
        relations.push(Relation {
            source_label: u,
            source_index: du,
            relation: r,
            target_label: v,
            target_index: dv,
            target_anchors: anchors,
            source_position,
        });
    }
    Ok(RelationSequence {
        relations,
        terminated: true,
    })
}

fn format_anchors(anchors: &[Span]) -> String {
    anchors
        .iter()
        .map(|s| format!("{}:{}", s.from, s.to))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_anchors(text: &str) -> Option<Vec<Span>> {
    if text.is_empty() {
        return Some(Vec::new());
    }
    text.split(',')
        .map(|p| {
            let (a, b) = p.split_once(':')?;
            Some(Span {
                from: a.parse().ok()?,
                to: b.parse().ok()?,
            })
        })
        .collect()
}

/// One relation per line: `u  d_u  r  v  d_v  [anchors]`, tab-separated,
/// anchors as `from:to` pairs joined by commas. Sequences are separated by
/// blank lines.
pub fn write_relations_tsv(seqs: &[RelationSequence]) -> String {
    let mut out = String::new();
    for (k, seq) in seqs.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for r in &seq.relations {
            out.push_str(&r.to_tsv());
            if !r.target_anchors.is_empty() {
                out.push('\t');
                out.push_str(&format_anchors(&r.target_anchors));
            }
            out.push('\n');
        }
    }
    out
}

pub fn read_relations_tsv(text: &str) -> Result<Vec<RelationSequence>, LinearizeError> {
    let mut seqs = Vec::new();
    let mut current = Vec::new();
    let flush = |current: &mut Vec<_>, seqs: &mut Vec<RelationSequence>| -> Result<(), LinearizeError> {
        if !current.is_empty() {
            seqs.push(relations_from_tuples(std::mem::take(current))?);
        }
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            flush(&mut current, &mut seqs)?;
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let err = |message: &str| LinearizeError::Tsv {
            line: i + 1,
            message: message.to_string(),
        };
        if f.len() != 5 && f.len() != 6 {
            return Err(err("expected 5 or 6 tab-separated fields"));
        }
        let du = f[1].parse().map_err(|_| err("bad source index"))?;
        let dv = f[4].parse().map_err(|_| err("bad target index"))?;
        let anchors = parse_anchors(f.get(5).copied().unwrap_or("")).ok_or_else(|| err("bad anchors"))?;
        current.push((f[0].to_string(), du, f[2].to_string(), f[3].to_string(), dv, anchors));
    }
    flush(&mut current, &mut seqs)?;
    Ok(seqs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Arborescence {
        // want -ARG0-> boy, want -ARG1-> go -ARG0-> boy(copy)
        Arborescence::new(
            ArborNode::leaf("want", 1)
                .with_child("ARG0", ArborNode::leaf("boy", 2))
                .with_child("ARG1", ArborNode::leaf("go", 3).with_child("ARG0", ArborNode::leaf("boy", 2))),
        )
    }

    #[test]
    fn linearizes_in_preorder() {
        let seq = arbor_to_relations(&sample(), OrderingPolicy::Alphanumeric);
        let tsv: Vec<String> = seq.relations.iter().map(Relation::to_tsv).collect();
        assert_eq!(
            tsv,
            vec![
                "@root@\t0\troot\twant\t1",
                "want\t1\tARG0\tboy\t2",
                "want\t1\tARG1\tgo\t3",
                "go\t3\tARG0\tboy\t2",
            ]
        );
        assert_eq!(relations_to_arbor(&seq).unwrap(), sample());
    }

    #[test]
    fn tsv_round_trip() {
        let seq = arbor_to_relations(&sample(), OrderingPolicy::Alphanumeric);
        let text = write_relations_tsv(&[seq.clone(), seq.clone()]);
        let back = read_relations_tsv(&text).unwrap();
        assert_eq!(back, vec![seq.clone(), seq]);
    }

    #[test]
    fn rejects_forward_sources() {
        let mut seq = arbor_to_relations(&sample(), OrderingPolicy::Alphanumeric);
        seq.relations[1].source_position = 3;
        assert!(matches!(
            relations_to_arbor(&seq),
            Err(LinearizeError::BadSourcePosition { .. })
        ));
    }

    #[test]
    fn surface_order_puts_unanchored_last() {
        let mut a = Arborescence::new(
            ArborNode::leaf("r", 1)
                .with_child("x", ArborNode::leaf("u", 2))
                .with_child("y", ArborNode::leaf("a", 3).with_anchors(vec![Span::token(4)]))
                .with_child("z", ArborNode::leaf("b", 4).with_anchors(vec![Span::token(1)])),
        );
        OrderingPolicy::SurfaceOrder.sort(&mut a);
        let labels: Vec<&str> = a.root.children.iter().map(|c| c.node.label.as_str()).collect();
        assert_eq!(labels, vec!["b", "a", "u"]);
    }
}
