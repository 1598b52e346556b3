//! Teacher-forced loss, optimizer and the training loop.

use std::io::Write;
use std::time::Instant;

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{GradBuffer, ParamStore, Var};
use crate::data::Example;
use crate::eval::{relation_f1, EvalError, F1Report};
use crate::graph::{Framework, Relation, RelationSequence};
use crate::inference::{greedy_decode, DecodeOptions};
use crate::model::{DecoderState, EncodedSentence, EncoderInput, Model, ModelConfig, ModelError, Run, Vocabularies, EOS};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("example `{id}`: {source}")]
    Example { id: String, source: ModelError },
    #[error("non-finite gradient in `{0}`")]
    NonFinite(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub max_grad_norm: f64,
    pub coverage_weight: f64,
    pub label_smoothing: f64,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    /// Stop as soon as dev F1 reaches this value.
    pub target_f1: Option<f64>,
    /// Decode length cap for dev evaluation.
    pub max_len: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            max_grad_norm: 5.0,
            coverage_weight: 1.0,
            label_smoothing: 0.1,
            patience: 5,
            target_f1: None,
            max_len: 100,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err("epochs and batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.max_grad_norm > 0.0 && self.coverage_weight >= 0.0) {
            return Err("learning_rate and max_grad_norm must be positive, coverage_weight non-negative".into());
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return Err("label_smoothing must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// Loss weights for [`sequence_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOptions {
    pub epsilon: f64,
    pub lambda: f64,
}

impl From<&TrainConfig> for LossOptions {
    fn from(c: &TrainConfig) -> Self {
        LossOptions {
            epsilon: c.label_smoothing,
            lambda: c.coverage_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub nll_source: f64,
    pub nll_relation: f64,
    pub nll_target: f64,
    pub coverage_penalty: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn add(&mut self, o: &LossBreakdown) {
        self.nll_source += o.nll_source;
        self.nll_relation += o.nll_relation;
        self.nll_target += o.nll_target;
        self.coverage_penalty += o.coverage_penalty;
        self.total += o.total;
    }
}

/// `(1 − ε)·onehot(gold) + ε/K`.
pub fn smoothing_target(k: usize, gold: usize, epsilon: f64) -> Vec<f64> {
    let mut q = vec![epsilon / k as f64; k];
    q[gold] += 1.0 - epsilon;
    q
}

/// Positions in the mixed target distribution that produce `rel`'s target
/// node. A node reusing an earlier index can only come from copying a
/// preceding node with that index. A new node comes from source tokens
/// whose copy string equals its label (for anchored frameworks, only the
/// token it is anchored to) or from its vocabulary entry; unanchored
/// nodes of anchored frameworks come from the vocabulary alone.
pub fn target_choices(run: &Run, enc: &EncodedSentence, s: &DecoderState, rel: &Relation) -> Result<Vec<usize>, ModelError> {
    let labels = &run.model.vocabs.labels;
    let v = labels.len();
    let i = s.len() as u32;
    if rel.target_index <= i {
        let found: Vec<usize> = (1..=s.len())
            .filter(|j| s.index_at(*j) == rel.target_index)
            .map(|j| v + enc.n + j - 1)
            .collect();
        if found.is_empty() {
            return Err(ModelError::Input(format!("index {} refers to no earlier node", rel.target_index)));
        }
        return Ok(found);
    }
    if rel.target_index != i + 1 {
        return Err(ModelError::Input(format!(
            "relation {} introduces index {}, expected {}",
            i + 1,
            rel.target_index,
            i + 1
        )));
    }
    let anchored = matches!(enc.framework, Framework::Dm | Framework::Ucca);
    let mut out: Vec<usize> = (0..enc.n)
        .filter(|t| enc.copy_labels[*t] == rel.target_label)
        .filter(|t| !anchored || rel.target_anchors == [crate::graph::Span::token(*t)])
        .map(|t| v + t)
        .collect();
    if !anchored || rel.target_anchors.is_empty() || out.is_empty() {
        if let Some(id) = labels.get(&rel.target_label) {
            if id != EOS {
                out.insert(0, id);
            }
        }
    }
    if out.is_empty() {
        out.push(crate::model::UNK);
    }
    Ok(out)
}

/// Teacher-forced loss of `reference` (followed by EOS). Returns the loss
/// variable and its breakdown.
pub fn sequence_loss(
    run: &mut Run,
    input: &EncoderInput,
    framework: Framework,
    reference: &RelationSequence,
    opts: LossOptions,
) -> Result<(Var, LossBreakdown), ModelError> {
    let enc = run.encode(input, framework)?;
    let mut s = run.start(&enc)?;
    let mut v_terms = Vec::new();
    let mut u_terms = Vec::new();
    let mut r_terms = Vec::new();
    let mut cov_terms = Vec::new();
    let k = run.model.relation_types();
    let targets = reference.relations.iter().map(Some).chain([None]);
    for (step, rel) in targets.enumerate() {
        let td = run.target_dist(&enc, &s)?;
        let choices = match rel {
            Some(rel) => target_choices(run, &enc, &s, rel)?,
            None => vec![EOS],
        };
        let picked = run.t.gather(td.probs, &choices)?;
        let mass = run.t.sum(picked)?;
        let log_mass = run.t.log(mass)?;
        let mut term = run.t.scale(log_mass, -(1.0 - opts.epsilon))?;
        if opts.epsilon > 0.0 {
            let lv = run.t.log(td.vocab)?;
            let lv = run.t.sum(lv)?;
            let smooth = run.t.scale(lv, -opts.epsilon / td.vocab_size as f64)?;
            term = run.t.add(term, smooth)?;
        }
        v_terms.push(term);
        cov_terms.push(run.coverage_loss(&s)?);
        let Some(rel) = rel else { break };
        let mut node = run
            .node_for_choice(&enc, &s, choices[0])
            .ok_or_else(|| ModelError::Input("reference node maps to EOS".into()))?;
        node.label = rel.target_label.clone();
        node.anchors = rel.target_anchors.clone();
        if let Some(a) = rel.target_anchors.first().filter(|a| a.from < enc.n) {
            node.pos = enc.pos_ids[a.from];
        }
        s = run.advance(&s, node)?;
        let source = rel.source_position;
        let relation = if step == 0 {
            if source != 0 {
                return Err(ModelError::Input("first relation must attach to the root".into()));
            }
            0
        } else {
            if source == 0 || source > step {
                return Err(ModelError::Input(format!("relation {} has source position {source}", step + 1)));
            }
            let pu = run.source_dist(&s)?;
            let lu = run.t.gather(pu, &[source - 1])?;
            let lu = run.t.log(lu)?;
            u_terms.push(run.t.scale(lu, -1.0)?);
            let r = run
                .model
                .vocabs
                .relations
                .get(&rel.relation)
                .filter(|r| *r > 0)
                .ok_or_else(|| ModelError::Input(format!("relation type `{}` is not in the vocabulary", rel.relation)))?;
            let pr = run.relation_dist(&s, source)?;
            let lr = run.t.log(pr)?;
            let q = run.t.constant(smoothing_target(k, r - 1, opts.epsilon));
            let weighted = run.t.mul(lr, q)?;
            let sum = run.t.sum(weighted)?;
            r_terms.push(run.t.scale(sum, -1.0)?);
            r
        };
        s = run.commit(&enc, &s, source, relation)?;
    }
    let mut parts = Vec::new();
    let mut breakdown = LossBreakdown::default();
    for (terms, slot, weight) in [
        (&v_terms, 0, 1.0),
        (&u_terms, 1, 1.0),
        (&r_terms, 2, 1.0),
        (&cov_terms, 3, opts.lambda),
    ] {
        if terms.is_empty() {
            continue;
        }
        let stacked = run.t.concat(terms)?;
        let total = run.t.sum(stacked)?;
        let value = run.t.value(total).data[0];
        match slot {
            0 => breakdown.nll_target = value,
            1 => breakdown.nll_source = value,
            2 => breakdown.nll_relation = value,
            _ => breakdown.coverage_penalty = value,
        }
        if weight != 0.0 {
            parts.push(if weight == 1.0 { total } else { run.t.scale(total, weight)? });
        }
    }
    let all = run.t.concat(&parts)?;
    let loss = run.t.sum(all)?;
    breakdown.total = run.t.value(loss).data[0];
    Ok((loss, breakdown))
}

/// Bias-corrected Adam.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(params: &ParamStore, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.ids().map(|id| vec![0.0; params.get(id).len()]).collect();
        Adam {
            beta1,
            beta2,
            eps,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &GradBuffer, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let g = grads.get(id);
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (j, p) in params.get_mut(id).data.iter_mut().enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                *p -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
            }
        }
    }
}

/// Rescales `grads` to global L2 norm `max` when it exceeds it. Returns
/// the applied factor.
pub fn clip_global_norm(grads: &mut GradBuffer, max: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max {
        let s = max / norm;
        grads.scale(s);
        s
    } else {
        1.0
    }
}

/// Loss gradient of one example under dropout seeded by `seed`.
pub fn example_gradients(model: &Model, ex: &Example, opts: LossOptions, seed: u64) -> Result<(GradBuffer, LossBreakdown), TrainError> {
    let wrap = |source: ModelError| TrainError::Example {
        id: ex.id.clone(),
        source,
    };
    let mut grads = GradBuffer::new(&model.params);
    let mut run = Run::training(model, seed);
    let (loss, b) = sequence_loss(&mut run, &ex.input, ex.framework, &ex.reference, opts).map_err(wrap)?;
    run.t.backward(loss, &mut grads).map_err(|e| wrap(e.into()))?;
    Ok((grads, b))
}

/// Builds vocabularies from `train` and a freshly initialized model.
pub fn build_model(train: &[Example], config: ModelConfig, seed: u64) -> Result<Model, ModelError> {
    let mut vocabs = Vocabularies::build(train.iter().map(|e| (&e.input, &e.reference)), None, None);
    for ex in train.iter().filter(|e| e.framework == Framework::Amr) {
        for n in &ex.graph.nodes {
            vocabs.senses.record(&n.label);
        }
    }
    Model::new(config, vocabs, seed)
}

/// Greedy relation F1 of `model` on `examples`.
pub fn evaluate_relations(model: &Model, examples: &[Example], max_len: usize) -> Result<F1Report, TrainError> {
    let opts = DecodeOptions {
        max_len,
        min_len: 0,
        beam_size: 1,
        length_norm: false,
    };
    let pred: Vec<RelationSequence> = examples
        .par_iter()
        .map(|ex| greedy_decode(model, &ex.input, ex.framework, &opts).map(|d| d.sequence))
        .collect::<Result<_, _>>()?;
    let gold: Vec<RelationSequence> = examples.iter().map(|e| e.reference.clone()).collect();
    Ok(relation_f1(&gold, &pred)?)
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_f1: Option<f64>,
    pub lr: f64,
    pub seconds: f64,
    pub breakdown: LossBreakdown,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_dev_f1: Option<f64>,
}

fn batches(train: &[Example], batch: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(rng);
    // Bucket by reference length: stable sort of a shuffled order keeps
    // equal lengths in random order.
    order.sort_by_key(|i| train[*i].reference.len());
    let mut out: Vec<Vec<usize>> = order.chunks(batch).map(<[usize]>::to_vec).collect();
    out.shuffle(rng);
    out
}

/// Trains `model` in place. Each epoch evaluates greedy relation F1 on
/// `dev` (training loss when `dev` is empty); the best parameters are
/// restored at the end. Gradients of a batch are computed in parallel and
/// summed in batch order, so results do not depend on the thread count.
pub fn train(
    model: &mut Model,
    train: &[Example],
    dev: &[Example],
    cfg: &TrainConfig,
    mut metrics: Option<&mut dyn Write>,
    mut on_improve: Option<&mut dyn FnMut(&Model) -> Result<(), TrainError>>,
) -> Result<TrainReport, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let opts = LossOptions::from(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&model.params, cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut best: Option<(f64, usize, ParamStore)> = None;
    let mut since_best = 0;
    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: 0,
        best_dev_f1: None,
    };
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut totals = LossBreakdown::default();
        let mut norm_sum = 0.0;
        let plan = batches(train, cfg.batch_size, &mut rng);
        let n_batches = plan.len();
        for batch in plan {
            let seeds: Vec<u64> = batch.iter().map(|_| rng.gen()).collect();
            let model_ref: &Model = model;
            let results: Vec<(GradBuffer, LossBreakdown)> = batch
                .par_iter()
                .zip(&seeds)
                .map(|(i, seed)| example_gradients(model_ref, &train[*i], opts, *seed))
                .collect::<Result<_, _>>()?;
            let mut grads = GradBuffer::new(&model.params);
            for (g, b) in &results {
                grads.add(g);
                totals.add(b);
            }
            grads.scale(1.0 / batch.len() as f64);
            if let Some(id) = model.params.ids().find(|id| grads.get(*id).iter().any(|g| !g.is_finite())) {
                return Err(TrainError::NonFinite(model.params.name(id).to_string()));
            }
            norm_sum += grads.global_norm();
            clip_global_norm(&mut grads, cfg.max_grad_norm);
            adam.step(&mut model.params, &grads, cfg.learning_rate);
        }
        let dev_f1 = if dev.is_empty() {
            None
        } else {
            Some(evaluate_relations(model, dev, cfg.max_len)?.f1)
        };
        let train_loss = totals.total / train.len() as f64;
        let metric = dev_f1.unwrap_or(-train_loss);
        let m = EpochMetrics {
            epoch,
            train_loss,
            dev_f1,
            lr: cfg.learning_rate,
            seconds: start.elapsed().as_secs_f64(),
            breakdown: totals,
            grad_norm: norm_sum / n_batches as f64,
        };
        info!("epoch {epoch}: loss {train_loss:.4} dev_f1 {dev_f1:?}");
        if let Some(w) = metrics.as_deref_mut() {
            writeln!(w, "{}", serde_json::to_string(&m).expect("metrics serialize"))?;
        }
        report.epochs.push(m);
        if best.as_ref().map_or(true, |b| metric > b.0) {
            best = Some((metric, epoch, model.params.clone()));
            since_best = 0;
            if let Some(f) = on_improve.as_deref_mut() {
                f(model)?;
            }
        } else {
            since_best += 1;
        }
        if cfg.target_f1.is_some_and(|t| dev_f1.is_some_and(|f| f >= t)) || since_best >= cfg.patience {
            break;
        }
    }
    let (metric, epoch, params) = best.expect("at least one epoch ran");
    model.params = params;
    report.best_epoch = epoch;
    report.best_dev_f1 = (!dev.is_empty()).then_some(metric);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn smoothing_vector() {
        assert_eq!(smoothing_target(4, 0, 0.1), vec![0.925, 0.025, 0.025, 0.025]);
        assert_eq!(smoothing_target(3, 2, 0.0), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = ParamStore::new();
        let id = p.add("x", Tensor::scalar(0.5));
        let mut g = GradBuffer::new(&p);
        Adam::new(&p, 0.9, 0.999, 1e-8).step(&mut p, &g, 1e-3);
        assert_eq!(p.get(id).data[0], 0.5);
        g.grads[0][0] = 1.0;
        Adam::new(&p, 0.9, 0.999, 1e-8).step(&mut p, &g, 1e-3);
        let moved = 0.5 - p.get(id).data[0];
        assert!((moved - 1e-3).abs() < 1e-8, "{moved}");
    }

    #[test]
    fn clipping_halves_norm_ten() {
        let mut p = ParamStore::new();
        p.add("a", Tensor::vector(vec![0.0, 0.0]));
        let mut g = GradBuffer::new(&p);
        g.grads[0] = vec![6.0, 8.0];
        assert_eq!(clip_global_norm(&mut g, 5.0), 0.5);
        assert_eq!(g.grads[0], vec![3.0, 4.0]);
    }
}
