//! Scoring: relation F1, anchored triple F1, Smatch, validity audit and
//! decoding speed.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Framework, RelationSequence, SemanticGraph, Span};
use crate::inference::{beam_decode, greedy_decode, DecodeOptions};
use crate::model::{EncoderInput, Model, ModelError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold node `{0}` has no anchors; score unanchored graphs with smatch")]
    Unanchored(String),
    #[error("exact smatch supports at most {max} variables, got {found}")]
    TooManyVariables { max: usize, found: usize },
    #[error("framework mismatch: {0} vs {1}")]
    Framework(Framework, Framework),
    #[error("{gold} gold items but {pred} predictions")]
    Length { gold: usize, pred: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub gold: usize,
    pub pred: usize,
}

impl F1Report {
    pub fn from_counts(matched: usize, gold: usize, pred: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (p, r) = (ratio(matched, pred), ratio(matched, gold));
        F1Report {
            precision: p,
            recall: r,
            f1: if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) },
            matched,
            gold,
            pred,
        }
    }

    /// Sums counts, then recomputes the ratios.
    pub fn merge(reports: impl IntoIterator<Item = F1Report>) -> Self {
        let (mut m, mut g, mut p) = (0, 0, 0);
        for r in reports {
            m += r.matched;
            g += r.gold;
            p += r.pred;
        }
        F1Report::from_counts(m, g, p)
    }
}

fn multiset_overlap<K: std::hash::Hash + Eq>(gold: impl IntoIterator<Item = K>, pred: impl IntoIterator<Item = K>) -> (usize, usize, usize) {
    let mut counts: HashMap<K, (usize, usize)> = HashMap::new();
    for k in gold {
        counts.entry(k).or_default().0 += 1;
    }
    for k in pred {
        counts.entry(k).or_default().1 += 1;
    }
    counts.values().fold((0, 0, 0), |(m, g, p), (a, b)| (m + a.min(b), g + a, p + b))
}

/// Labeled F1 over relation tuples (labels, indices, relation, anchors),
/// summed over sentence pairs.
pub fn relation_f1(gold: &[RelationSequence], pred: &[RelationSequence]) -> Result<F1Report, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::Length {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    Ok(F1Report::merge(gold.iter().zip(pred).map(|(g, p)| {
        let (m, a, b) = multiset_overlap(g.relations.iter().map(|r| r.key()), p.relations.iter().map(|r| r.key()));
        F1Report::from_counts(m, a, b)
    })))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum NodeKey {
    Anchored(Vec<Span>),
    Unmatched(usize),
}

/// Node identities: own anchors, or for UCCA the union of the anchors
/// below. `None` marks nodes left without any.
fn anchor_keys(g: &SemanticGraph) -> Vec<Option<Vec<Span>>> {
    let idx = g.index_map();
    let mut children = vec![Vec::new(); g.nodes.len()];
    for e in &g.edges {
        children[idx[e.source.as_str()]].push(idx[e.target.as_str()]);
    }
    let own = |i: usize| -> Vec<Span> {
        let mut a = g.nodes[i].anchors.clone();
        a.sort();
        a.dedup();
        a
    };
    (0..g.nodes.len())
        .map(|i| {
            let mut a = own(i);
            if a.is_empty() && g.framework == Framework::Ucca {
                let mut seen = HashSet::new();
                let mut stack = vec![i];
                while let Some(n) = stack.pop() {
                    if seen.insert(n) {
                        a.extend(own(n));
                        stack.extend(&children[n]);
                    }
                }
                a.sort();
                a.dedup();
            }
            (!a.is_empty()).then_some(a)
        })
        .collect()
}

fn anchored_triples(g: &SemanticGraph, keys: &[NodeKey]) -> Vec<(Option<NodeKey>, String, NodeKey)> {
    let idx = g.index_map();
    let mut out: Vec<_> = g
        .edges
        .iter()
        .map(|e| {
            (
                Some(keys[idx[e.source.as_str()]].clone()),
                e.label.clone(),
                keys[idx[e.target.as_str()]].clone(),
            )
        })
        .collect();
    for t in &g.tops {
        out.push((None, "TOP".to_string(), keys[idx[t.as_str()]].clone()));
    }
    out
}

/// F1 over `(source anchors, label, target anchors)` edge triples plus one
/// triple per top. Unanchored predicted nodes never match.
pub fn labeled_triple_f1(gold: &SemanticGraph, pred: &SemanticGraph) -> Result<F1Report, EvalError> {
    if gold.framework != pred.framework {
        return Err(EvalError::Framework(gold.framework, pred.framework));
    }
    let gk: Vec<NodeKey> = anchor_keys(gold)
        .into_iter()
        .zip(&gold.nodes)
        .map(|(k, n)| k.map(NodeKey::Anchored).ok_or_else(|| EvalError::Unanchored(n.id.clone())))
        .collect::<Result<_, _>>()?;
    let pk: Vec<NodeKey> = anchor_keys(pred)
        .into_iter()
        .enumerate()
        .map(|(i, k)| k.map_or(NodeKey::Unmatched(i), NodeKey::Anchored))
        .collect();
    let (m, g, p) = multiset_overlap(anchored_triples(gold, &gk), anchored_triples(pred, &pk));
    Ok(F1Report::from_counts(m, g, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SmatchMode {
    /// Branch and bound over every variable mapping.
    Exact,
    /// Steepest-ascent search from `restarts` starting mappings.
    HillClimb { restarts: usize, seed: u64 },
}

impl SmatchMode {
    pub fn hill_climb() -> Self {
        SmatchMode::HillClimb { restarts: 4, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmatchOptions {
    pub mode: SmatchMode,
    pub include_top: bool,
}

impl Default for SmatchOptions {
    fn default() -> Self {
        SmatchOptions {
            mode: SmatchMode::hill_climb(),
            include_top: true,
        }
    }
}

/// Largest graph exact Smatch accepts.
pub const EXACT_SMATCH_LIMIT: usize = 10;

/// Hill climbing also explores pairs of moves when the mapping table has
/// at most this many cells.
const PAIR_MOVE_LIMIT: usize = 120;

/// Maps gold variable `g` to `target`, swapping with whoever held it.
fn apply_move(m: &[Option<usize>], g: usize, target: Option<usize>) -> Vec<Option<usize>> {
    let mut cand = m.to_vec();
    if let Some(other) = target.and_then(|p| (0..m.len()).find(|h| m[*h] == Some(p))) {
        cand[other] = m[g];
    }
    cand[g] = target;
    cand
}

struct SmatchProblem {
    gold_labels: Vec<String>,
    pred_labels: Vec<String>,
    gold_top: Vec<bool>,
    pred_top: Vec<bool>,
    /// Gold `(a, label, b)` with multiplicity.
    gold_edges: Vec<(usize, String, usize, usize)>,
    pred_edges: HashMap<(usize, String, usize), usize>,
    include_top: bool,
}

impl SmatchProblem {
    fn new(gold: &SemanticGraph, pred: &SemanticGraph, include_top: bool) -> Self {
        let side = |g: &SemanticGraph| {
            let idx = g.index_map();
            let mut edges: HashMap<(usize, String, usize), usize> = HashMap::new();
            for e in &g.edges {
                *edges
                    .entry((idx[e.source.as_str()], e.label.clone(), idx[e.target.as_str()]))
                    .or_default() += 1;
            }
            let tops: HashSet<&str> = g.tops.iter().map(String::as_str).collect();
            (
                g.nodes.iter().map(|n| n.label.clone()).collect::<Vec<_>>(),
                g.nodes.iter().map(|n| tops.contains(n.id.as_str())).collect::<Vec<_>>(),
                edges,
            )
        };
        let (gold_labels, gold_top, ge) = side(gold);
        let (pred_labels, pred_top, pred_edges) = side(pred);
        let mut gold_edges: Vec<_> = ge.into_iter().map(|((a, l, b), c)| (a, l, b, c)).collect();
        gold_edges.sort();
        SmatchProblem {
            gold_labels,
            pred_labels,
            gold_top,
            pred_top,
            gold_edges,
            pred_edges,
            include_top,
        }
    }

    fn totals(&self) -> (usize, usize) {
        let tops = |t: &[bool]| if self.include_top { t.iter().filter(|x| **x).count() } else { 0 };
        (
            self.gold_labels.len() + self.gold_edges.iter().map(|e| e.3).sum::<usize>() + tops(&self.gold_top),
            self.pred_labels.len() + self.pred_edges.values().sum::<usize>() + tops(&self.pred_top),
        )
    }

    fn node_score(&self, g: usize, p: usize) -> usize {
        usize::from(self.gold_labels[g] == self.pred_labels[p])
            + usize::from(self.include_top && self.gold_top[g] && self.pred_top[p])
    }

    fn edge_score(&self, e: &(usize, String, usize, usize), m: &[Option<usize>]) -> usize {
        match (m[e.0], m[e.2]) {
            (Some(a), Some(b)) => self.pred_edges.get(&(a, e.1.clone(), b)).map_or(0, |c| (*c).min(e.3)),
            _ => 0,
        }
    }

    fn score(&self, m: &[Option<usize>]) -> usize {
        let nodes: usize = m
            .iter()
            .enumerate()
            .filter_map(|(g, p)| p.map(|p| self.node_score(g, p)))
            .sum();
        nodes + self.gold_edges.iter().map(|e| self.edge_score(e, m)).sum::<usize>()
    }

    fn exact(&self) -> usize {
        let n = self.gold_labels.len();
        // Edges become decidable once their later endpoint is assigned.
        let mut closing = vec![Vec::new(); n];
        for (k, e) in self.gold_edges.iter().enumerate() {
            closing[e.0.max(e.2)].push(k);
        }
        let node_bound: Vec<usize> = (0..n).map(|g| 1 + usize::from(self.include_top && self.gold_top[g])).collect();
        let mut suffix = vec![0; n + 1];
        for g in (0..n).rev() {
            suffix[g] = suffix[g + 1] + node_bound[g] + closing[g].iter().map(|k| self.gold_edges[*k].3).sum::<usize>();
        }
        let mut best = 0;
        let mut m = vec![None; n];
        let mut used = vec![false; self.pred_labels.len()];
        self.branch(0, 0, &suffix, &closing, &mut m, &mut used, &mut best);
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn branch(
        &self,
        g: usize,
        acc: usize,
        suffix: &[usize],
        closing: &[Vec<usize>],
        m: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut usize,
    ) {
        if acc + suffix[g] <= *best && g > 0 {
            return;
        }
        if g == m.len() {
            *best = (*best).max(acc);
            return;
        }
        let mut options: Vec<Option<usize>> = (0..used.len()).filter(|p| !used[*p]).map(Some).collect();
        options.push(None);
        for opt in options {
            m[g] = opt;
            let mut gain = opt.map_or(0, |p| self.node_score(g, p));
            gain += closing[g].iter().map(|k| self.edge_score(&self.gold_edges[*k], m)).sum::<usize>();
            if let Some(p) = opt {
                used[p] = true;
            }
            self.branch(g + 1, acc + gain, suffix, closing, m, used, best);
            if let Some(p) = opt {
                used[p] = false;
            }
        }
        m[g] = None;
    }

    fn hill_climb(&self, restarts: usize, seed: u64) -> usize {
        let n = self.gold_labels.len();
        let np = self.pred_labels.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = 0;
        for r in 0..restarts.max(1) {
            let mut m = vec![None; n];
            let mut used = vec![false; np];
            let mut order: Vec<usize> = (0..n).collect();
            if r > 0 {
                order.shuffle(&mut rng);
            }
            for &g in &order {
                // Odd restarts prefer label matches; even ones map freely.
                let mut cands: Vec<usize> = (0..np)
                    .filter(|p| !used[*p] && (r % 2 == 0 || self.gold_labels[g] == self.pred_labels[*p]))
                    .collect();
                if cands.is_empty() {
                    cands = (0..np).filter(|p| !used[*p]).collect();
                }
                let pick = if r == 0 {
                    // Largest gain given the variables mapped so far.
                    let mut pick = None;
                    let mut gain = 0;
                    for p in (0..np).filter(|p| !used[*p]) {
                        m[g] = Some(p);
                        let s = self.score(&m);
                        if pick.is_none() || s > gain {
                            (pick, gain) = (Some(p), s);
                        }
                    }
                    m[g] = None;
                    pick
                } else if cands.is_empty() {
                    None
                } else {
                    Some(cands[rng.gen_range(0..cands.len())])
                };
                if let Some(p) = pick {
                    m[g] = Some(p);
                    used[p] = true;
                }
            }
            best = best.max(self.climb(&mut m));
        }
        best
    }

    fn climb(&self, m: &mut [Option<usize>]) -> usize {
        let n = m.len();
        let np = self.pred_labels.len();
        let mut current = self.score(m);
        loop {
            let mut best_move: Option<(usize, Vec<Option<usize>>)> = None;
            let consider = |cand: Vec<Option<usize>>, best_move: &mut Option<(usize, Vec<Option<usize>>)>| {
                let s = self.score(&cand);
                if s > best_move.as_ref().map_or(current, |b| b.0) {
                    *best_move = Some((s, cand));
                }
            };
            for g in 0..n {
                for target in (0..np).map(Some).chain([None]) {
                    if m[g] == target {
                        continue;
                    }
                    consider(apply_move(m, g, target), &mut best_move);
                }
            }
            // Stuck on a small problem: try pairs of moves.
            if best_move.is_none() && n * (np + 1) <= PAIR_MOVE_LIMIT {
                let singles: Vec<Vec<Option<usize>>> = (0..n)
                    .flat_map(|g| (0..np).map(Some).chain([None]).map(move |t| (g, t)))
                    .filter(|(g, t)| m[*g] != *t)
                    .map(|(g, t)| apply_move(m, g, t))
                    .collect();
                for first in &singles {
                    for g in 0..n {
                        for t in (0..np).map(Some).chain([None]) {
                            if first[g] != t {
                                consider(apply_move(first, g, t), &mut best_move);
                            }
                        }
                    }
                }
            }
            match best_move {
                Some((s, cand)) => {
                    m.copy_from_slice(&cand);
                    current = s;
                }
                None => return current,
            }
        }
    }
}

/// Smatch between two graphs with node labels as instance triples, edges
/// as relation triples and, optionally, tops as one triple each.
pub fn smatch_score(gold: &SemanticGraph, pred: &SemanticGraph, opts: &SmatchOptions) -> Result<F1Report, EvalError> {
    if gold.framework != pred.framework {
        return Err(EvalError::Framework(gold.framework, pred.framework));
    }
    let problem = SmatchProblem::new(gold, pred, opts.include_top);
    let matched = match opts.mode {
        SmatchMode::Exact => {
            let found = gold.nodes.len().max(pred.nodes.len());
            if found > EXACT_SMATCH_LIMIT {
                return Err(EvalError::TooManyVariables {
                    max: EXACT_SMATCH_LIMIT,
                    found,
                });
            }
            problem.exact()
        }
        SmatchMode::HillClimb { restarts, seed } => problem.hill_climb(restarts, seed),
    };
    let (g, p) = problem.totals();
    Ok(F1Report::from_counts(matched, g, p))
}

/// Outgoing-label labels a node may use at most once.
pub fn default_functional_labels(framework: Framework) -> Vec<String> {
    match framework {
        Framework::Amr => (0..=5).map(|k| format!("ARG{k}")).collect(),
        Framework::Dm => vec!["ARG1".into(), "ARG2".into(), "ARG3".into()],
        Framework::Ucca => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub graphs: usize,
    pub invalid: usize,
    /// `None` for an empty graph set.
    pub rate: Option<f64>,
    /// `(graph, node id, label)` for each repeated functional label.
    pub examples: Vec<(usize, String, String)>,
}

/// Counts graphs where a node has two outgoing edges with the same
/// functional label.
pub fn validity_audit(graphs: &[SemanticGraph], functional: &[String]) -> AuditReport {
    let functional: HashSet<&str> = functional.iter().map(String::as_str).collect();
    let mut invalid = 0;
    let mut examples = Vec::new();
    for (k, g) in graphs.iter().enumerate() {
        let mut seen: HashMap<(&str, &str), usize> = HashMap::new();
        for e in g.edges.iter().filter(|e| functional.contains(e.label.as_str())) {
            *seen.entry((e.source.as_str(), e.label.as_str())).or_default() += 1;
        }
        let mut bad: Vec<_> = seen.into_iter().filter(|(_, c)| *c > 1).map(|(k, _)| k).collect();
        bad.sort();
        if !bad.is_empty() {
            invalid += 1;
        }
        examples.extend(bad.into_iter().map(|(n, l)| (k, n.to_string(), l.to_string())));
    }
    AuditReport {
        graphs: graphs.len(),
        invalid,
        rate: (!graphs.is_empty()).then(|| invalid as f64 / graphs.len() as f64),
        examples,
    }
}

/// Least-squares line with its coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    LinearFit {
        slope,
        intercept,
        r2: if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub sentences: usize,
    pub tokens: usize,
    pub greedy_tokens_per_sec: f64,
    pub beam_tokens_per_sec: f64,
    pub beam_size: usize,
    /// `(forced output length, steps counted, best seconds)`.
    pub length_points: Vec<(usize, usize, f64)>,
    pub fit: LinearFit,
}

/// Throughput of greedy and beam decoding over `corpus`, then decode time
/// against forced output length (EOS masked until `length`) for every
/// length in `lengths`, keeping the fastest of `repeats` runs.
pub fn speed_bench(
    model: &Model,
    corpus: &[(EncoderInput, Framework)],
    opts: &DecodeOptions,
    lengths: &[usize],
    repeats: usize,
) -> Result<SpeedReport, EvalError> {
    let tokens: usize = corpus.iter().map(|(i, _)| i.len()).sum();
    let time = |f: &dyn Fn(&EncoderInput, Framework) -> Result<(), ModelError>| -> Result<f64, EvalError> {
        let start = Instant::now();
        for (input, fw) in corpus {
            f(input, *fw)?;
        }
        Ok(start.elapsed().as_secs_f64())
    };
    let greedy_opts = DecodeOptions { beam_size: 1, ..*opts };
    let g = time(&|i, f| greedy_decode(model, i, f, &greedy_opts).map(|_| ()))?;
    let b = time(&|i, f| beam_decode(model, i, f, opts).map(|_| ()))?;
    let mut points: Vec<(usize, usize, f64)> = lengths.iter().map(|&len| (len, 0, f64::INFINITY)).collect();
    if let Some((input, fw)) = corpus.first() {
        for _ in 0..repeats.max(1) {
            for point in points.iter_mut() {
                let forced = DecodeOptions {
                    max_len: point.0,
                    min_len: point.0,
                    beam_size: 1,
                    length_norm: false,
                };
                let start = Instant::now();
                let d = greedy_decode(model, input, *fw, &forced)?;
                point.2 = point.2.min(start.elapsed().as_secs_f64());
                point.1 = d.steps;
            }
        }
    } else {
        points.clear();
    }
    let xs: Vec<f64> = points.iter().map(|p| p.1 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2).collect();
    let rate = |secs: f64| if secs > 0.0 { tokens as f64 / secs } else { 0.0 };
    Ok(SpeedReport {
        sentences: corpus.len(),
        tokens,
        greedy_tokens_per_sec: rate(g),
        beam_tokens_per_sec: rate(b),
        beam_size: opts.beam_size,
        fit: if points.len() >= 2 {
            linear_fit(&xs, &ys)
        } else {
            LinearFit {
                slope: 0.0,
                intercept: 0.0,
                r2: 1.0,
            }
        },
        length_points: points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphEdge, GraphNode};

    fn dm(edges: &[(usize, &str, usize)], tops: &[usize]) -> SemanticGraph {
        let mut g = SemanticGraph::new(Framework::Dm);
        for i in 0..4 {
            g.nodes.push(GraphNode::anchored(format!("n{i}"), format!("w{i}"), vec![Span::token(i)]));
        }
        for (a, l, b) in edges {
            g.edges.push(GraphEdge::new(format!("n{a}"), format!("n{b}"), *l));
        }
        g.tops = tops.iter().map(|t| format!("n{t}")).collect();
        g
    }

    #[test]
    fn anchored_f1_counts_tops() {
        let gold = dm(&[(0, "ARG1", 1), (0, "ARG2", 2), (3, "BV", 2)], &[0]);
        let pred = dm(&[(0, "ARG1", 1), (0, "ARG2", 2)], &[0]);
        let r = labeled_triple_f1(&gold, &pred).unwrap();
        assert_eq!((r.matched, r.gold, r.pred), (3, 4, 3));
        assert_eq!(r.recall, 0.75);
        assert_eq!(r.precision, 1.0);
        let same = labeled_triple_f1(&gold, &gold).unwrap();
        assert_eq!(same.f1, 1.0);
    }

    #[test]
    fn audit_flags_repeated_arg() {
        let mut g = SemanticGraph::new(Framework::Amr);
        for (i, l) in ["a", "b", "c"].iter().enumerate() {
            g.nodes.push(GraphNode::new(format!("n{i}"), *l));
        }
        g.edges.push(GraphEdge::new("n0", "n1", "ARG1"));
        g.edges.push(GraphEdge::new("n0", "n2", "ARG1"));
        let mut ok = g.clone();
        ok.edges[1].label = "ARG0".into();
        let labels = default_functional_labels(Framework::Amr);
        let r = validity_audit(&[g, ok], &labels);
        assert_eq!((r.graphs, r.invalid), (2, 1));
        assert_eq!(r.examples, vec![(0, "n0".to_string(), "ARG1".to_string())]);
        assert_eq!(validity_audit(&[], &labels).rate, None);
    }

    #[test]
    fn fit_of_a_line_is_exact() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }
}
