mod common;

use std::collections::HashMap;

use arbor::eval::{smatch_score, SmatchMode, SmatchOptions};
use arbor::graph::{Framework, SemanticGraph};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn triples(g: &SemanticGraph, names: &HashMap<String, usize>) -> HashMap<(String, usize, String), usize> {
    let mut out = HashMap::new();
    for n in &g.nodes {
        *out.entry(("instance".to_string(), names[&n.id], n.label.clone())).or_default() += 1;
    }
    for t in &g.tops {
        *out.entry(("TOP".to_string(), names[t], String::new())).or_default() += 1;
    }
    for e in &g.edges {
        *out.entry((e.label.clone(), names[&e.source], names[&e.target].to_string())).or_default() += 1;
    }
    out
}

/// Best triple overlap over every partial injective variable mapping.
fn oracle_matches(gold: &SemanticGraph, pred: &SemanticGraph) -> usize {
    let pred_names: HashMap<String, usize> = pred.nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
    let pt = triples(pred, &pred_names);
    let mut best = 0;
    let mut map = vec![usize::MAX; gold.nodes.len()];
    fn rec(k: usize, map: &mut Vec<usize>, gold: &SemanticGraph, np: usize, pt: &HashMap<(String, usize, String), usize>, best: &mut usize) {
        if k == map.len() {
            // Unmapped gold variables get fresh names that match nothing.
            let names: HashMap<String, usize> = gold
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| (n.id.clone(), if map[i] == usize::MAX { 1000 + i } else { map[i] }))
                .collect();
            let gt = triples(gold, &names);
            let m: usize = gt.iter().map(|(t, c)| (*c).min(*pt.get(t).unwrap_or(&0))).sum();
            *best = (*best).max(m);
            return;
        }
        for p in (0..np).chain([usize::MAX]) {
            if p != usize::MAX && map[..k].contains(&p) {
                continue;
            }
            map[k] = p;
            rec(k + 1, map, gold, np, pt, best);
        }
        map[k] = usize::MAX;
    }
    rec(0, &mut map, gold, pred.nodes.len(), &pt, &mut best);
    best
}

#[test]
fn exact_smatch_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let opts = SmatchOptions { mode: SmatchMode::Exact, include_top: true };
    for _ in 0..40 {
        let (gold, pred) = smatch_fixture(&mut rng, 5);
        let r = smatch_score(&gold, &pred, &opts).unwrap();
        assert_eq!(r.matched, oracle_matches(&gold, &pred));
    }
}

#[test]
fn hill_climbing_agrees_with_exact_smatch() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let exact = SmatchOptions { mode: SmatchMode::Exact, include_top: true };
    let climb = SmatchOptions::default();
    for k in 0..60 {
        let (gold, pred) = smatch_fixture(&mut rng, 8);
        let e = smatch_score(&gold, &pred, &exact).unwrap();
        let h = smatch_score(&gold, &pred, &climb).unwrap();
        assert_eq!(e.matched, h.matched, "fixture {k}");
    }
}

#[test]
fn oversized_graphs_are_refused_by_exact_smatch() {
    let mut g = SemanticGraph::new(Framework::Amr);
    for i in 0..11 {
        g.nodes.push(arbor::graph::GraphNode::new(format!("v{i}"), "x"));
    }
    let opts = SmatchOptions { mode: SmatchMode::Exact, include_top: false };
    assert!(smatch_score(&g, &g, &opts).is_err());
}
