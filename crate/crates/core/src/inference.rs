//! Greedy decoding, beam search and end-to-end parsing.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::autodiff::Var;
use crate::convert::{from_arbor, restore_senses, ConvertError};
use crate::graph::{Arborescence, Framework, Relation, RelationSequence, SemanticGraph, ROOT_LABEL};
use crate::linearize::{relations_to_arbor, LinearizeError};
use crate::model::{DecoderState, EncodedSentence, EncoderInput, Model, ModelError, Run, EOS};

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
    #[error(transparent)]
    Convert(#[from] ConvertError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeOptions {
    /// Decoding stops after this many relations.
    pub max_len: usize,
    /// EOS is masked out until this many relations exist.
    pub min_len: usize,
    /// Beam width; 1 decodes greedily.
    pub beam_size: usize,
    /// Rank finished beam hypotheses by score per relation.
    pub length_norm: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            max_len: 100,
            min_len: 0,
            beam_size: 5,
            length_norm: false,
        }
    }
}

/// A decoded relation sequence with search bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub sequence: RelationSequence,
    /// Σ log P(v) + log P(u) + log P(r), plus log P(EOS) when terminated.
    pub score: f64,
    /// Decoder LSTM steps taken along the returned hypothesis.
    pub steps: usize,
}

fn relation_for(model: &Model, s: &DecoderState, source: usize, relation: usize) -> Relation {
    let node = s.pending_node().expect("pending node");
    let source_label = if source == 0 {
        ROOT_LABEL.to_string()
    } else {
        s.nodes[source - 1].label.clone()
    };
    Relation {
        source_label,
        source_index: s.index_at(source),
        relation: model.vocabs.relations.item(relation).to_string(),
        target_label: node.label.clone(),
        target_index: node.index,
        target_anchors: node.anchors.clone(),
        source_position: source,
    }
}

/// Indices of the `k` largest values, ties to the lower index.
pub fn top_k(values: &[f64], k: usize, skip: Option<usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|i| Some(*i) != skip).collect();
    idx.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
    idx.truncate(k);
    idx
}

/// Greedy search: argmax node, then argmax source, then argmax type.
pub fn greedy_decode(model: &Model, input: &EncoderInput, framework: Framework, opts: &DecodeOptions) -> Result<Decoded, ModelError> {
    let mut run = Run::new(model);
    let enc = run.encode(input, framework)?;
    greedy_from(&mut run, &enc, opts)
}

pub(crate) fn greedy_from(run: &mut Run, enc: &EncodedSentence, opts: &DecodeOptions) -> Result<Decoded, ModelError> {
    let mut s = run.start(enc)?;
    let mut relations = Vec::new();
    let mut score = 0.0;
    let mut steps = 0;
    let mut terminated = false;
    while relations.len() < opts.max_len {
        let td = run.target_dist(enc, &s)?;
        let probs = &run.t.value(td.probs).data;
        let skip = (relations.len() < opts.min_len).then_some(EOS);
        let choice = top_k(probs, 1, skip)[0];
        score += probs[choice].ln();
        let Some(node) = run.node_for_choice(enc, &s, choice) else {
            terminated = true;
            break;
        };
        s = run.advance(&s, node)?;
        steps += 1;
        let (source, relation) = if s.is_empty() {
            (0, 0)
        } else {
            let pu = run.source_dist(&s)?;
            let pu = &run.t.value(pu).data;
            let k = top_k(pu, 1, None)[0];
            score += pu[k].ln();
            let source = Run::source_position(&s, k);
            let pr = run.relation_dist(&s, source)?;
            let pr = &run.t.value(pr).data;
            let r = top_k(pr, 1, None)[0];
            score += pr[r].ln();
            (source, r + 1)
        };
        relations.push(relation_for(run.model, &s, source, relation));
        s = run.commit(enc, &s, source, relation)?;
    }
    Ok(Decoded {
        sequence: RelationSequence { relations, terminated },
        score,
        steps,
    })
}

#[derive(Clone)]
struct Hypothesis {
    state: DecoderState,
    relations: Vec<Relation>,
    score: f64,
}

/// Beam search over relations. Every hypothesis in the beam expands its
/// top-`k` target nodes, then the top-`k` sources and top-`k` relation types
/// of each; EOS moves a hypothesis to the finished list and the best `k`
/// extensions form the next beam. Hypotheses still alive at `max_len` are
/// flushed as finished. Search stops early once the best finished score
/// is at least the best live score, since scores never increase.
pub fn beam_decode(model: &Model, input: &EncoderInput, framework: Framework, opts: &DecodeOptions) -> Result<Decoded, ModelError> {
    let mut run = Run::new(model);
    let enc = run.encode(input, framework)?;
    beam_from(&mut run, &enc, opts)
}

pub(crate) fn beam_from(run: &mut Run, enc: &EncodedSentence, opts: &DecodeOptions) -> Result<Decoded, ModelError> {
    let k = opts.beam_size.max(1);
    let mut beam = vec![Hypothesis {
        state: run.start(enc)?,
        relations: Vec::new(),
        score: 0.0,
    }];
    let mut finished: Vec<(Vec<Relation>, f64, bool)> = Vec::new();
    let mut step = 0;
    while !beam.is_empty() && step < opts.max_len {
        let best_finished = finished.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
        let best_live = beam.iter().map(|h| h.score).fold(f64::NEG_INFINITY, f64::max);
        if best_finished >= best_live {
            beam.clear();
            break;
        }
        let mut candidates: Vec<(f64, DecoderState, usize, usize, &Hypothesis)> = Vec::new();
        for h in &beam {
            let td = run.target_dist(enc, &h.state)?;
            let probs = run.t.value(td.probs).data.clone();
            let skip = (step < opts.min_len).then_some(EOS);
            for choice in top_k(&probs, k, skip) {
                let sv = h.score + probs[choice].ln();
                let Some(node) = run.node_for_choice(enc, &h.state, choice) else {
                    finished.push((h.relations.clone(), sv, true));
                    continue;
                };
                let s = run.advance(&h.state, node)?;
                if s.is_empty() {
                    candidates.push((sv, s, 0, 0, h));
                    continue;
                }
                let pu = run.source_dist(&s)?;
                let pu = run.t.value(pu).data.clone();
                for u in top_k(&pu, k, None) {
                    let su = sv + pu[u].ln();
                    let source = Run::source_position(&s, u);
                    let pr = run.relation_dist(&s, source)?;
                    let pr = run.t.value(pr).data.clone();
                    for r in top_k(&pr, k, None) {
                        candidates.push((su + pr[r].ln(), s.clone(), source, r + 1, h));
                    }
                }
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        candidates.truncate(k);
        let mut next = Vec::with_capacity(candidates.len());
        for (score, s, source, relation, parent) in candidates {
            let mut relations = parent.relations.clone();
            relations.push(relation_for(run.model, &s, source, relation));
            next.push(Hypothesis {
                state: run.commit(enc, &s, source, relation)?,
                relations,
                score,
            });
        }
        beam = next;
        step += 1;
    }
    for h in beam {
        finished.push((h.relations, h.score, false));
    }
    let rank = |f: &(Vec<Relation>, f64, bool)| {
        if opts.length_norm {
            f.1 / f.0.len().max(1) as f64
        } else {
            f.1
        }
    };
    let (relations, score, terminated) = finished
        .into_iter()
        .reduce(|best, f| if rank(&f) > rank(&best) { f } else { best })
        .expect("search yields at least one hypothesis");
    let steps = relations.len();
    Ok(Decoded {
        sequence: RelationSequence { relations, terminated },
        score,
        steps,
    })
}

/// Greedy when `beam_size` is 1, beam search otherwise.
pub fn decode(model: &Model, input: &EncoderInput, framework: Framework, opts: &DecodeOptions) -> Result<Decoded, ModelError> {
    if opts.beam_size <= 1 {
        greedy_decode(model, input, framework, opts)
    } else {
        beam_decode(model, input, framework, opts)
    }
}

/// Log-probability of a full relation sequence (terminated by EOS) under
/// the model, scored the way the searches score hypotheses.
pub fn sequence_score(model: &Model, input: &EncoderInput, framework: Framework, seq: &RelationSequence) -> Result<f64, ModelError> {
    let mut run = Run::new(model);
    let enc = run.encode(input, framework)?;
    let mut s = run.start(&enc)?;
    let mut score = 0.0;
    for rel in &seq.relations {
        let td = run.target_dist(&enc, &s)?;
        let probs = run.t.value(td.probs).data.clone();
        let choice = (0..probs.len())
            .find(|c| {
                run.node_for_choice(&enc, &s, *c).is_some_and(|n| {
                    n.label == rel.target_label && n.index == rel.target_index && n.anchors == rel.target_anchors
                })
            })
            .ok_or_else(|| ModelError::Input(format!("node `{}` is not producible", rel.target_label)))?;
        score += probs[choice].ln();
        let node = run.node_for_choice(&enc, &s, choice).expect("not EOS");
        s = run.advance(&s, node)?;
        let relation = if s.is_empty() {
            0
        } else {
            let pu: Var = run.source_dist(&s)?;
            score += run.t.value(pu).data[rel.source_position - 1].ln();
            let r = model
                .vocabs
                .relations
                .get(&rel.relation)
                .ok_or_else(|| ModelError::Input(format!("unknown relation `{}`", rel.relation)))?;
            let pr = run.relation_dist(&s, rel.source_position)?;
            score += run.t.value(pr).data[r - 1].ln();
            r
        };
        s = run.commit(&enc, &s, rel.source_position, relation)?;
    }
    if seq.terminated {
        let td = run.target_dist(&enc, &s)?;
        score += run.t.value(td.probs).data[EOS].ln();
    }
    Ok(score)
}

/// Output of [`parse`].
#[derive(Debug, Clone)]
pub struct Parsed {
    pub decoded: Decoded,
    pub arborescence: Arborescence,
    pub graph: SemanticGraph,
}

/// Decodes, rebuilds the arborescence, converts it back to a framework
/// graph and restores AMR senses.
pub fn parse(model: &Model, input: &EncoderInput, framework: Framework, opts: &DecodeOptions) -> Result<Parsed, ParseError> {
    let decoded = decode(model, input, framework, opts)?;
    if !decoded.sequence.terminated {
        warn!("decode reached max_len {} without EOS; keeping the truncated graph", opts.max_len);
    }
    let arborescence = relations_to_arbor(&decoded.sequence)?;
    let mut graph = from_arbor(&arborescence, framework)?;
    if framework == Framework::Amr {
        graph = restore_senses(&graph, model.senses());
    }
    Ok(Parsed {
        decoded,
        arborescence,
        graph,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_breaks_ties_low() {
        assert_eq!(top_k(&[0.2, 0.5, 0.5, 0.1], 2, None), vec![1, 2]);
        assert_eq!(top_k(&[0.9, 0.5, 0.1], 5, Some(0)), vec![1, 2]);
    }
}
