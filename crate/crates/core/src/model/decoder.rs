//! One decoding step at a time, shared by training and inference.
//!
//! A state after `i` relations holds positions `0..=i` (position 0 is the
//! pseudo-root). From it the decoder predicts node `i + 1` as a mixture of
//! label generation, source copy and target copy; then, after the chosen
//! node has entered the LSTM, the position it attaches to and the relation
//! type.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::graph::{Framework, Span};

use super::{EncodedSentence, Model, ModelError, EOS};

/// Tape plus per-run caches. Training runs carry an RNG for dropout.
pub struct Run<'m> {
    pub t: Tape<'m>,
    pub model: &'m Model,
    pub(crate) rng: Option<ChaCha8Rng>,
    pub(crate) enc_chars: HashMap<String, Var>,
    dec_chars: HashMap<String, Var>,
}

/// How a predicted node came about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Root,
    Vocab(usize),
    Encoder(usize),
    /// Copy of the node at this sequence position.
    Decoder(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub label: String,
    pub index: u32,
    pub anchors: Vec<Span>,
    pub pos: usize,
    pub origin: Origin,
}

#[derive(Debug, Clone)]
struct Pending {
    layers: Vec<(Var, Var)>,
    top: Var,
    end: Var,
    target: Var,
    node: NodeRecord,
    node_emb: Var,
}

/// Decoder state; cloning is cheap since values live on the tape.
#[derive(Debug, Clone)]
pub struct DecoderState {
    layers: Vec<(Var, Var)>,
    /// Nodes at positions `1..=i`.
    pub nodes: Vec<NodeRecord>,
    tops: Vec<Var>,
    ends: Vec<Var>,
    node_embs: Vec<Var>,
    z: Vec<Var>,
    zkeys: Vec<Var>,
    /// Source attention of the current step.
    pub attn: Var,
    /// Sum of all earlier source attentions.
    pub coverage: Var,
    pending: Option<Pending>,
}

impl DecoderState {
    /// Relations emitted so far.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index carried by the node at `position` (0 for the pseudo-root).
    pub fn index_at(&self, position: usize) -> u32 {
        if position == 0 {
            0
        } else {
            self.nodes[position - 1].index
        }
    }

    /// The node awaiting its source and relation type.
    pub fn pending_node(&self) -> Option<&NodeRecord> {
        self.pending.as_ref().map(|p| &p.node)
    }
}

/// `P(v_{i+1})` over `[labels | source tokens | earlier nodes]`.
#[derive(Debug, Clone, Copy)]
pub struct TargetDist {
    pub probs: Var,
    /// Label-generation distribution before mixing.
    pub vocab: Var,
    /// `[p_gen, p_src, p_tgt]`, or `[p_gen, p_src]` before any node exists.
    pub switch: Var,
    pub vocab_size: usize,
    pub n: usize,
    pub i: usize,
}

impl TargetDist {
    pub fn support(&self) -> usize {
        self.vocab_size + self.n + self.i
    }
}

type R<T> = Result<T, ModelError>;

impl<'m> Run<'m> {
    /// Inference run: dropout off.
    pub fn new(model: &'m Model) -> Self {
        Run {
            t: Tape::new(&model.params),
            model,
            rng: None,
            enc_chars: HashMap::new(),
            dec_chars: HashMap::new(),
        }
    }

    /// Training run with dropout drawn from `seed`.
    pub fn training(model: &'m Model, seed: u64) -> Self {
        Run {
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
            ..Run::new(model)
        }
    }

    pub(crate) fn dropout(&mut self, x: Var, p: f64) -> R<Var> {
        match self.rng.as_mut() {
            Some(r) if p > 0.0 => Ok(self.t.dropout(x, p, r)?),
            _ => Ok(x),
        }
    }

    fn attend(&mut self, enc: &EncodedSentence, h: Var) -> R<(Var, Var)> {
        let d = &self.model.dec;
        let q = d.attn_h.forward(&mut self.t, h)?;
        let pre = self.t.add_bias(enc.keys, q)?;
        let act = self.t.elu(pre)?;
        let v = self.t.param(d.attn_v);
        let scores = self.t.matmul_t(act, v)?;
        let a = self.t.softmax(scores)?;
        let c = self.t.matmul(a, enc.states)?;
        Ok((a, c))
    }

    /// Indices past the table share its last row.
    fn index_emb(&mut self, index: u32) -> R<Var> {
        let row = (index as usize).min(self.model.config.index_table - 1);
        Ok(self.model.dec.index.lookup(&mut self.t, row)?)
    }

    fn relation_state(&mut self, top: Var, context: Var, relation: usize, source_emb: Var, source_index: u32) -> R<Var> {
        let r = self.model.dec.relation.lookup(&mut self.t, relation)?;
        let du = self.index_emb(source_index)?;
        let x = self.t.concat(&[top, context, r, source_emb, du])?;
        Ok(self.model.dec.relation_ffn.forward(&mut self.t, x)?)
    }

    /// Embedding of a node label: `[word; chars; pos]`.
    pub fn node_embedding(&mut self, label: &str, pos: usize) -> R<Var> {
        let m = self.model;
        let w = m.dec.words.lookup(&mut self.t, m.vocabs.labels.id(label))?;
        let ch = match self.dec_chars.get(label) {
            Some(v) => *v,
            None => {
                let v = m.dec.chars.forward(&mut self.t, &m.vocabs.char_ids(label))?;
                self.dec_chars.insert(label.to_string(), v);
                v
            }
        };
        let p = m.pos.lookup(&mut self.t, pos)?;
        Ok(self.t.concat(&[w, ch, p])?)
    }

    /// State before the first relation.
    pub fn start(&mut self, enc: &EncodedSentence) -> R<DecoderState> {
        let d = &self.model.dec;
        let hidden = self.model.config.decoder_hidden;
        let layers: Vec<(Var, Var)> = enc
            .summary
            .iter()
            .map(|h| (*h, self.t.constant(vec![0.0; hidden])))
            .collect();
        let h0 = layers.last().expect("at least one layer").0;
        let end = d.end.forward(&mut self.t, h0)?;
        let root = self.t.param(d.root);
        let (attn, context) = self.attend(enc, h0)?;
        let coverage = self.t.constant(vec![0.0; enc.n]);
        let z0 = self.relation_state(h0, context, 0, root, 0)?;
        Ok(DecoderState {
            layers,
            nodes: Vec::new(),
            tops: vec![h0],
            ends: vec![end],
            node_embs: vec![root],
            z: vec![z0],
            zkeys: Vec::new(),
            attn,
            coverage,
            pending: None,
        })
    }

    /// `P(v_{i+1})` from the current state.
    pub fn target_dist(&mut self, enc: &EncodedSentence, s: &DecoderState) -> R<TargetDist> {
        let d = &self.model.dec;
        let i = s.len();
        let z = *s.z.last().expect("z_0 exists");
        let logits = d.vocab_ffn.forward(&mut self.t, z)?;
        let vocab = self.t.softmax(logits)?;
        let sw = d.switch.forward(&mut self.t, z)?;
        let sw = if i == 0 { self.t.slice(sw, 0, 2)? } else { sw };
        let sw = self.t.softmax(sw)?;
        let g = self.t.slice(sw, 0, 1)?;
        let c = self.t.slice(sw, 1, 1)?;
        let mut parts = vec![self.t.scale_by(vocab, g)?, self.t.scale_by(s.attn, c)?];
        if i > 0 {
            let q = d.copy_q.forward(&mut self.t, z)?;
            let keys = self.t.stack_rows(&s.zkeys)?;
            let pre = self.t.add_bias(keys, q)?;
            let act = self.t.elu(pre)?;
            let v = self.t.param(d.copy_v);
            let scores = self.t.matmul_t(act, v)?;
            let a = self.t.softmax(scores)?;
            let k = self.t.slice(sw, 2, 1)?;
            parts.push(self.t.scale_by(a, k)?);
        }
        let probs = self.t.concat(&parts)?;
        Ok(TargetDist {
            probs,
            vocab,
            switch: sw,
            vocab_size: self.model.vocabs.labels.len(),
            n: enc.n,
            i,
        })
    }

    /// The node a choice in [`TargetDist::probs`] stands for. `None` for EOS.
    pub fn node_for_choice(&self, enc: &EncodedSentence, s: &DecoderState, choice: usize) -> Option<NodeRecord> {
        let v = self.model.vocabs.labels.len();
        let next = s.len() as u32 + 1;
        if choice == EOS {
            return None;
        }
        Some(if choice < v {
            NodeRecord {
                label: self.model.vocabs.labels.item(choice).to_string(),
                index: next,
                anchors: Vec::new(),
                pos: 0,
                origin: Origin::Vocab(choice),
            }
        } else if choice < v + enc.n {
            let k = choice - v;
            let anchored = matches!(enc.framework, Framework::Dm | Framework::Ucca);
            NodeRecord {
                label: enc.copy_labels[k].clone(),
                index: next,
                anchors: if anchored { vec![Span::token(k)] } else { Vec::new() },
                pos: enc.pos_ids[k],
                origin: Origin::Encoder(k),
            }
        } else {
            let j = choice - v - enc.n + 1;
            let src = &s.nodes[j - 1];
            NodeRecord {
                origin: Origin::Decoder(j),
                ..src.clone()
            }
        })
    }

    /// Feeds `node` through the LSTM. The returned state awaits
    /// [`Run::commit`].
    pub fn advance(&mut self, s: &DecoderState, node: NodeRecord) -> R<DecoderState> {
        let m = self.model;
        let node_emb = match node.origin {
            Origin::Decoder(j) => s.node_embs[j],
            _ => self.node_embedding(&node.label, node.pos)?,
        };
        let idx = self.index_emb(node.index)?;
        let mut x = self.t.concat(&[node_emb, idx])?;
        let p = m.config.decoder_dropout;
        let mut layers = Vec::with_capacity(s.layers.len());
        for (l, cell) in m.dec.lstm.iter().enumerate() {
            x = self.dropout(x, p)?;
            let st = cell.step(&mut self.t, x, s.layers[l])?;
            layers.push(st);
            x = st.0;
        }
        let end = m.dec.end.forward(&mut self.t, x)?;
        let target = m.dec.rel_tgt.forward(&mut self.t, x)?;
        let mut out = s.clone();
        out.pending = Some(Pending {
            layers,
            top: x,
            end,
            target,
            node,
            node_emb,
        });
        Ok(out)
    }

    /// `P(u_{i+1})` over candidate positions: only the pseudo-root for the
    /// first relation, positions `1..=i` afterwards.
    pub fn source_dist(&mut self, s: &DecoderState) -> R<Var> {
        let p = s.pending.as_ref().expect("advance before source_dist");
        let d = &self.model.dec;
        let start = d.start.forward(&mut self.t, p.top)?;
        let cands = if s.is_empty() { &s.ends[..1] } else { &s.ends[1..] };
        let x = self.t.stack_rows(cands)?;
        let scores = d.pointer.forward(&mut self.t, start, x)?;
        Ok(self.t.softmax(scores)?)
    }

    /// Sequence position of candidate `k` in [`Run::source_dist`].
    pub fn source_position(s: &DecoderState, k: usize) -> usize {
        if s.is_empty() {
            0
        } else {
            k + 1
        }
    }

    /// `P(r_{i+1})` over relation types (vocabulary ids minus one).
    pub fn relation_dist(&mut self, s: &DecoderState, source: usize) -> R<Var> {
        let p = s.pending.as_ref().expect("advance before relation_dist");
        let d = &self.model.dec;
        let x1 = d.rel_src.forward(&mut self.t, s.tops[source])?;
        let scores = d.bilinear.forward(&mut self.t, x1, p.target)?;
        Ok(self.t.softmax(scores)?)
    }

    /// Completes relation `i + 1`; `relation` is a relation vocabulary id
    /// (0, `root`, for the first relation).
    pub fn commit(&mut self, enc: &EncodedSentence, s: &DecoderState, source: usize, relation: usize) -> R<DecoderState> {
        let mut out = s.clone();
        let p = out.pending.take().expect("advance before commit");
        let (attn, context) = self.attend(enc, p.top)?;
        out.coverage = self.t.add(s.coverage, s.attn)?;
        out.attn = attn;
        let z = self.relation_state(p.top, context, relation, s.node_embs[source], s.index_at(source))?;
        let zk = self.model.dec.copy_k.forward(&mut self.t, z)?;
        out.layers = p.layers;
        out.tops.push(p.top);
        out.ends.push(p.end);
        out.node_embs.push(p.node_emb);
        out.nodes.push(p.node);
        out.z.push(z);
        out.zkeys.push(zk);
        Ok(out)
    }

    /// `Σ_t min(a_i[t], cov_i[t])` for the current step.
    pub fn coverage_loss(&mut self, s: &DecoderState) -> R<Var> {
        let m = self.t.minimum(s.attn, s.coverage)?;
        Ok(self.t.sum(m)?)
    }
}
