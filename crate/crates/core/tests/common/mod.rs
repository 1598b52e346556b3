#![allow(dead_code)]

use arbor::convert::SenseTable;
use arbor::data::{prepare, Example};
use arbor::graph::{validate_arborescence, Framework, GraphEdge, Relation, RelationSequence, SemanticGraph};
use arbor::linearize::relations_to_arbor;
use arbor::model::{EncoderInput, Model, ModelConfig, Vocabularies, EOS};
use arbor::synthetic::{random_amr, synthetic_corpus};
use arbor::train::build_model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn corpus(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = synthetic_corpus(&mut rng, n);
    let mut senses = SenseTable::default();
    prepare(&records, &mut senses).expect("synthetic corpus converts")
}

/// Randomly initialized model whose vocabularies cover `examples`.
pub fn random_model(examples: &[Example], config: ModelConfig, seed: u64) -> Model {
    build_model(examples, config, seed).expect("model builds")
}

/// A non-empty decoded sequence rebuilds into a valid arborescence.
pub fn structurally_valid(seq: &RelationSequence) -> bool {
    if seq.is_empty() {
        return true;
    }
    match relations_to_arbor(seq) {
        Ok(a) => validate_arborescence(&a).is_valid(),
        Err(_) => false,
    }
}

/// Label vocabulary {EOS, UNK, "x"}, two relation types, one or two input
/// tokens.
pub fn micro_model(seed: u64) -> Model {
    let mut v = Vocabularies::empty();
    for w in ["a", "x"] {
        v.words.push(w.into());
    }
    for c in ["a", "x"] {
        v.chars.push(c.into());
    }
    v.labels.push("x".into());
    v.relations.push("r1".into());
    v.relations.push("r2".into());
    assert!(v.labels.len() <= 3 && v.labels.item(EOS) == "<eos>");
    Model::new(ModelConfig::tiny(Framework::Amr), v, seed).expect("micro model builds")
}

pub fn micro_input(seed: u64) -> EncoderInput {
    let toks: &[&str] = match seed % 3 {
        0 => &["a"],
        1 => &["x"],
        _ => &["a", "x"],
    };
    EncoderInput::new(toks.iter().map(|s| s.to_string()).collect())
}

/// (target label, target index, source position, relation type) per step.
pub type StepKey = (String, u32, usize, String);

pub fn step_keys(seq: &RelationSequence) -> Vec<StepKey> {
    seq.relations
        .iter()
        .map(|r| (r.target_label.clone(), r.target_index, r.source_position, r.relation.clone()))
        .collect()
}

/// Highest-scoring path by exhaustive enumeration: every node choice,
/// source and relation type, up to `max_len` relations. Paths cut at
/// `max_len` are scored without an EOS term.
pub fn brute_force(model: &Model, input: &EncoderInput, framework: Framework, max_len: usize) -> (Vec<StepKey>, f64) {
    use arbor::model::{DecoderState, EncodedSentence, Run};

    fn go(
        run: &mut Run,
        enc: &EncodedSentence,
        s: &DecoderState,
        path: &mut Vec<StepKey>,
        score: f64,
        max_len: usize,
        best: &mut Option<(Vec<StepKey>, f64)>,
    ) {
        fn offer(best: &mut Option<(Vec<StepKey>, f64)>, path: &[StepKey], sc: f64) {
            if best.as_ref().map_or(true, |b| sc > b.1) {
                *best = Some((path.to_vec(), sc));
            }
        }
        if path.len() == max_len {
            offer(best, path, score);
            return;
        }
        let td = run.target_dist(enc, s).unwrap();
        let pv = run.t.value(td.probs).data.clone();
        for (c, p) in pv.iter().enumerate() {
            let sv = score + p.ln();
            let Some(node) = run.node_for_choice(enc, s, c) else {
                offer(best, path, sv);
                continue;
            };
            let (label, index) = (node.label.clone(), node.index);
            let next = run.advance(s, node).unwrap();
            if next.is_empty() {
                let committed = run.commit(enc, &next, 0, 0).unwrap();
                path.push((label, index, 0, "root".into()));
                go(run, enc, &committed, path, sv, max_len, best);
                path.pop();
                continue;
            }
            let pu = run.source_dist(&next).unwrap();
            let pu = run.t.value(pu).data.clone();
            for (u, qu) in pu.iter().enumerate() {
                let su = sv + qu.ln();
                let source = Run::source_position(&next, u);
                let pr = run.relation_dist(&next, source).unwrap();
                let pr = run.t.value(pr).data.clone();
                for (r, qr) in pr.iter().enumerate() {
                    let committed = run.commit(enc, &next, source, r + 1).unwrap();
                    let name = run.model.vocabs.relations.item(r + 1).to_string();
                    path.push((label.clone(), index, source, name));
                    go(run, enc, &committed, path, su + qr.ln(), max_len, best);
                    path.pop();
                }
            }
        }
    }

    let mut run = Run::new(model);
    let enc = run.encode(input, framework).unwrap();
    let s = run.start(&enc).unwrap();
    let mut best = None;
    go(&mut run, &enc, &s, &mut Vec::new(), 0.0, max_len, &mut best);
    best.expect("at least one path")
}

pub fn rel(src: (&str, u32, usize), r: &str, tgt: (&str, u32)) -> Relation {
    Relation {
        source_label: src.0.into(),
        source_index: src.1,
        relation: r.into(),
        target_label: tgt.0.into(),
        target_index: tgt.1,
        target_anchors: Vec::new(),
        source_position: src.2,
    }
}

/// want -ARG0-> boy, want -ARG1-> go; "want" and "boy" are not input tokens.
pub fn three_relations() -> RelationSequence {
    RelationSequence {
        relations: vec![
            rel(("@root@", 0, 0), "root", ("want", 1)),
            rel(("want", 1, 1), "ARG0", ("boy", 2)),
            rel(("want", 1, 1), "ARG1", ("go", 3)),
        ],
        terminated: true,
    }
}

pub fn tiny_amr_model(seq: &RelationSequence, input: &EncoderInput, seed: u64) -> Model {
    let vocabs = Vocabularies::build([(input, seq)], None, None);
    Model::new(ModelConfig::tiny(Framework::Amr), vocabs, seed).unwrap()
}

/// Gold graph plus a prediction made by relabeling, dropping and adding.
pub fn smatch_fixture(rng: &mut ChaCha8Rng, max_vars: usize) -> (SemanticGraph, SemanticGraph) {
    let gold = random_amr(rng, max_vars);
    let mut pred = random_amr(rng, max_vars);
    if rng.gen_bool(0.6) {
        pred = gold.clone();
        for n in &mut pred.nodes {
            if rng.gen_bool(0.25) {
                n.label = ["boy", "girl", "city"][rng.gen_range(0..3)].into();
            }
        }
        pred.edges.retain(|_| rng.gen_bool(0.8));
        let n = pred.nodes.len();
        if n > 1 && rng.gen_bool(0.5) {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            pred.edges.push(GraphEdge::new(pred.nodes[a].id.clone(), pred.nodes[b].id.clone(), "ARG1"));
        }
        pred.nodes.reverse();
    }
    (gold, pred)
}
