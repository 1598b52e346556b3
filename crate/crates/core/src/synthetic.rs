//! Random graphs, arborescences and a small learnable corpus.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::graph::{ArborNode, Arborescence, Framework, GraphEdge, GraphNode, SemanticGraph, Span};
use crate::io::CanonicalGraphRecord;

const AMR_LABELS: &[&str] = &["want-01", "go-02", "boy", "girl", "see-01", "person", "city", "-", "big", "say-01"];
const AMR_ROLES: &[&str] = &["ARG0", "ARG1", "ARG2", "mod", "poss", "time", "location"];
const DM_LABELS: &[&str] = &["the", "cat", "sit", "on", "mat", "and", "dog", "run", "quickly", "a"];
const DM_ROLES: &[&str] = &["ARG1", "ARG2", "BV", "compound", "_and_c", "mwe"];
const UCCA_ROLES: &[&str] = &["A", "P", "S", "D", "C", "E", "H", "L", "U", "F"];

fn pick<'a, R: Rng + ?Sized>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

/// Rooted AMR graph of `1..=max_nodes` nodes: a random spanning tree from
/// the top plus up to three extra edges, which create reentrancies and
/// occasionally cycles.
pub fn random_amr<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> SemanticGraph {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let mut g = SemanticGraph::new(Framework::Amr);
    for i in 0..n {
        g.nodes.push(GraphNode::new(format!("v{i}"), pick(rng, AMR_LABELS)));
    }
    let mut seen = HashSet::new();
    for i in 1..n {
        let p = rng.gen_range(0..i);
        let l = pick(rng, AMR_ROLES);
        seen.insert((p, l, i));
        g.edges.push(GraphEdge::new(format!("v{p}"), format!("v{i}"), l));
    }
    if n > 1 {
        for _ in 0..rng.gen_range(0..=3) {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            let l = pick(rng, AMR_ROLES);
            if a != b && seen.insert((a, l, b)) {
                g.edges.push(GraphEdge::new(format!("v{a}"), format!("v{b}"), l));
            }
        }
    }
    g.tops.push("v0".into());
    g
}

/// DM graph over `1..=max_nodes` token-anchored nodes split into at most
/// `max_components` weakly connected parts with random edge directions, a
/// few extra edges, isolated nodes allowed, and zero to two tops.
pub fn random_dm<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize, max_components: usize) -> SemanticGraph {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let mut g = SemanticGraph::new(Framework::Dm);
    let mut tokens: Vec<usize> = (0..n + 3).collect();
    tokens.shuffle(rng);
    let mut tokens = tokens[..n].to_vec();
    tokens.sort();
    for (i, t) in tokens.iter().enumerate() {
        g.nodes.push(GraphNode::anchored(format!("d{i}"), pick(rng, DM_LABELS), vec![Span::token(*t)]));
    }
    let comps = rng.gen_range(1..=max_components.max(1)).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); comps];
    for (k, v) in order.into_iter().enumerate() {
        let c = if k < comps { k } else { rng.gen_range(0..comps) };
        groups[c].push(v);
    }
    let mut seen = HashSet::new();
    let mut edge = |g: &mut SemanticGraph, a: usize, b: usize, l: &str| {
        if a != b && seen.insert((a.min(b), a.max(b))) {
            g.edges.push(GraphEdge::new(format!("d{a}"), format!("d{b}"), l));
        }
    };
    for group in &groups {
        for k in 1..group.len() {
            let p = group[rng.gen_range(0..k)];
            let l = pick(rng, DM_ROLES);
            if rng.gen_bool(0.5) {
                edge(&mut g, p, group[k], l);
            } else {
                edge(&mut g, group[k], p, l);
            }
        }
        if group.len() > 2 && rng.gen_bool(0.5) {
            let (a, b) = (group[rng.gen_range(0..group.len())], group[rng.gen_range(0..group.len())]);
            let l = pick(rng, DM_ROLES);
            edge(&mut g, a, b, l);
        }
    }
    let tops = rng.gen_range(0..=2usize).min(n);
    let mut cands: Vec<usize> = (0..n).collect();
    cands.shuffle(rng);
    let mut chosen = cands[..tops].to_vec();
    chosen.sort();
    g.tops = chosen.into_iter().map(|t| format!("d{t}")).collect();
    g
}

/// UCCA tree of at most `max_nodes` nodes: unlabeled non-terminals,
/// token-anchored terminals reached through `Terminal` edges, and with
/// some probability one remote edge between non-terminals.
pub fn random_ucca<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> SemanticGraph {
    loop {
        let g = ucca_attempt(rng, max_nodes);
        if g.nodes.len() <= max_nodes.max(2) {
            return g;
        }
    }
}

fn ucca_attempt<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> SemanticGraph {
    let budget = rng.gen_range(2..=max_nodes.max(2));
    let mut g = SemanticGraph::new(Framework::Ucca);
    let mut nonterminals = vec![0usize];
    g.nodes.push(GraphNode::new("u0", ""));
    let mut children = vec![0usize];
    let mut tokens = 0usize;
    while g.nodes.len() < budget {
        let parent = nonterminals[rng.gen_range(0..nonterminals.len())];
        let id = g.nodes.len();
        let make_terminal = g.nodes.len() + 1 >= budget || rng.gen_bool(0.5);
        if make_terminal {
            g.nodes.push(GraphNode::anchored(format!("u{id}"), format!("t{tokens}"), vec![Span::token(tokens)]));
            tokens += 1;
            g.edges.push(GraphEdge::new(format!("u{parent}"), format!("u{id}"), crate::convert::TERMINAL_EDGE));
        } else {
            g.nodes.push(GraphNode::new(format!("u{id}"), ""));
            nonterminals.push(id);
            children.push(0);
            g.edges.push(GraphEdge::new(format!("u{parent}"), format!("u{id}"), pick(rng, UCCA_ROLES)));
        }
        children[nonterminals.iter().position(|x| *x == parent).expect("parent exists")] += 1;
    }
    // Every non-terminal needs at least one child; give childless ones a
    // terminal.
    for (k, nt) in nonterminals.clone().into_iter().enumerate() {
        if children[k] == 0 {
            let id = g.nodes.len();
            g.nodes.push(GraphNode::anchored(format!("u{id}"), format!("t{tokens}"), vec![Span::token(tokens)]));
            tokens += 1;
            g.edges.push(GraphEdge::new(format!("u{nt}"), format!("u{id}"), crate::convert::TERMINAL_EDGE));
        }
    }
    if nonterminals.len() > 2 && rng.gen_bool(0.3) {
        let a = nonterminals[rng.gen_range(0..nonterminals.len())];
        let b = nonterminals[rng.gen_range(1..nonterminals.len())];
        let reach = descendants(&g, b);
        let exists = g.edges.iter().any(|e| e.source == format!("u{a}") && e.target == format!("u{b}"));
        if a != b && !reach.contains(&format!("u{a}")) && !exists {
            g.edges.push(GraphEdge::new(format!("u{a}"), format!("u{b}"), pick(rng, UCCA_ROLES)));
        }
    }
    g.tops.push("u0".into());
    g
}

fn descendants(g: &SemanticGraph, from: usize) -> HashSet<String> {
    let mut seen = HashSet::new();
    let mut stack = vec![format!("u{from}")];
    while let Some(x) = stack.pop() {
        if seen.insert(x.clone()) {
            stack.extend(g.edges.iter().filter(|e| e.source == x).map(|e| e.target.clone()));
        }
    }
    seen
}

/// A random graph of `framework` at the acceptance sizes.
pub fn random_graph<R: Rng + ?Sized>(rng: &mut R, framework: Framework) -> SemanticGraph {
    match framework {
        Framework::Amr => random_amr(rng, 12),
        Framework::Dm => random_dm(rng, 12, 3),
        Framework::Ucca => random_ucca(rng, 15),
    }
}

/// Valid arborescence of `1..=max_nodes` nodes below the root. Nodes are
/// created in pre-order, so a node's index is its position; some leaves
/// are copies of earlier nodes and share their label, anchors and index.
pub fn random_arborescence<R: Rng + ?Sized>(rng: &mut R, max_nodes: usize) -> Arborescence {
    struct Gen<'a, R: ?Sized> {
        rng: &'a mut R,
        budget: usize,
        made: Vec<(String, u32, Vec<Span>)>,
    }
    impl<R: Rng + ?Sized> Gen<'_, R> {
        fn node(&mut self, depth: usize) -> ArborNode {
            if !self.made.is_empty() && self.rng.gen_bool(0.15) {
                let (l, i, a) = self.made[self.rng.gen_range(0..self.made.len())].clone();
                self.budget -= 1;
                return ArborNode::leaf(l, i).with_anchors(a);
            }
            let index = self.made.len() as u32 + 1;
            let label = format!("n{}", self.rng.gen_range(0..5));
            let anchors = if self.rng.gen_bool(0.3) {
                vec![Span::token(self.rng.gen_range(0..6))]
            } else {
                Vec::new()
            };
            self.made.push((label.clone(), index, anchors.clone()));
            self.budget -= 1;
            let mut node = ArborNode::leaf(label, index).with_anchors(anchors);
            while self.budget > 0 && depth < 6 && self.rng.gen_bool(0.55) {
                let role = format!("r{}", self.rng.gen_range(0..4));
                let child = self.node(depth + 1);
                node = node.with_child(role, child);
            }
            node
        }
    }
    let budget = rng.gen_range(1..=max_nodes.max(1));
    let mut g = Gen {
        rng,
        budget,
        made: Vec::new(),
    };
    let mut a = Arborescence::new(g.node(1));
    renumber_preorder(&mut a);
    a
}

/// Rewrites indices so the first occurrence of each `(label, index)` group
/// carries its pre-order position.
fn renumber_preorder(a: &mut Arborescence) {
    let mut map: BTreeMap<u32, u32> = BTreeMap::new();
    map.insert(a.root.index, 1);
    a.root.index = 1;
    let mut pos = 1u32;
    fn walk(n: &mut ArborNode, map: &mut BTreeMap<u32, u32>, pos: &mut u32) {
        for e in &mut n.children {
            *pos += 1;
            let p = *pos;
            let idx = *map.entry(e.node.index).or_insert(p);
            e.node.index = idx;
            walk(&mut e.node, map, pos);
        }
    }
    walk(&mut a.root, &mut map, &mut pos);
}

struct Lexeme {
    word: &'static str,
    lemma: &'static str,
    pos: &'static str,
}

const NOUNS: &[&str] = &["boy", "girl", "dog", "cat", "teacher", "city"];
const VERBS: &[(&str, &str)] = &[("sees", "see"), ("likes", "like"), ("finds", "find"), ("helps", "help")];
const ADJS: &[&str] = &["big", "small", "old"];

fn lex(word: &'static str, lemma: &'static str, pos: &'static str) -> Lexeme {
    Lexeme { word, lemma, pos }
}

/// Sentence `the [adj] noun verb the noun [and the noun]` with its lexemes.
fn sentence<R: Rng + ?Sized>(rng: &mut R) -> (Vec<Lexeme>, Option<usize>, usize, usize, usize, Option<usize>) {
    let mut s = vec![lex("the", "the", "DT")];
    let adj = rng.gen_bool(0.5).then(|| {
        s.push(lex(pick(rng, ADJS), "", "JJ"));
        s.len() - 1
    });
    let subj_word = pick(rng, NOUNS);
    s.push(lex(subj_word, subj_word, "NN"));
    let subj = s.len() - 1;
    let (vw, vl) = VERBS[rng.gen_range(0..VERBS.len())];
    s.push(lex(vw, vl, "VBZ"));
    let verb = s.len() - 1;
    s.push(lex("the", "the", "DT"));
    let obj_word = pick(rng, NOUNS);
    s.push(lex(obj_word, obj_word, "NN"));
    let obj = s.len() - 1;
    let extra = (s.len() + 2 <= 8 && rng.gen_bool(0.4)).then(|| {
        s.push(lex("and", "and", "CC"));
        let w = pick(rng, NOUNS);
        s.push(lex(w, w, "NN"));
        s.len() - 1
    });
    for l in &mut s {
        if l.lemma.is_empty() {
            l.lemma = l.word;
        }
    }
    (s, adj, subj, verb, obj, extra)
}

/// `n` sentence-graph pairs of at most 8 tokens, cycling through AMR, DM
/// and UCCA. Graph structure follows the sentence deterministically.
pub fn synthetic_corpus<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<CanonicalGraphRecord> {
    (0..n)
        .map(|k| {
            let framework = Framework::ALL[k % 3];
            let (lex, adj, subj, verb, obj, extra) = sentence(rng);
            let tokens: Vec<String> = lex.iter().map(|l| l.word.to_string()).collect();
            let pos: Vec<String> = lex.iter().map(|l| l.pos.to_string()).collect();
            let lemmas: Vec<String> = lex.iter().map(|l| l.lemma.to_string()).collect();
            let g = match framework {
                Framework::Amr => {
                    let mut g = SemanticGraph::new(Framework::Amr);
                    let node = |g: &mut SemanticGraph, id: &str, label: String| g.nodes.push(GraphNode::new(id, label));
                    node(&mut g, "v", format!("{}-01", lemmas[verb]));
                    node(&mut g, "s", lemmas[subj].clone());
                    g.edges.push(GraphEdge::new("v", "s", "ARG0"));
                    if let Some(a) = adj {
                        node(&mut g, "a", lemmas[a].clone());
                        g.edges.push(GraphEdge::new("s", "a", "mod"));
                    }
                    node(&mut g, "o", lemmas[obj].clone());
                    match extra {
                        Some(x) => {
                            node(&mut g, "c", "and".into());
                            node(&mut g, "x", lemmas[x].clone());
                            g.edges.push(GraphEdge::new("v", "c", "ARG1"));
                            g.edges.push(GraphEdge::new("c", "o", "op1"));
                            g.edges.push(GraphEdge::new("c", "x", "op2"));
                        }
                        None => g.edges.push(GraphEdge::new("v", "o", "ARG1")),
                    }
                    g.tops.push("v".into());
                    g
                }
                Framework::Dm => {
                    let mut g = SemanticGraph::new(Framework::Dm);
                    for (i, l) in lemmas.iter().enumerate() {
                        g.nodes.push(GraphNode::anchored(format!("t{i}"), l.clone(), vec![Span::token(i)]));
                    }
                    let e = |g: &mut SemanticGraph, a: usize, b: usize, l: &str| {
                        g.edges.push(GraphEdge::new(format!("t{a}"), format!("t{b}"), l))
                    };
                    e(&mut g, 0, subj, "BV");
                    if let Some(a) = adj {
                        e(&mut g, a, subj, "ARG1");
                    }
                    e(&mut g, verb, subj, "ARG1");
                    e(&mut g, verb + 1, obj, "BV");
                    match extra {
                        Some(x) => {
                            e(&mut g, verb, x - 1, "ARG2");
                            e(&mut g, x - 1, obj, "_and_c");
                            e(&mut g, x - 1, x, "_and_c");
                        }
                        None => e(&mut g, verb, obj, "ARG2"),
                    }
                    g.tops.push(format!("t{verb}"));
                    g
                }
                Framework::Ucca => {
                    let mut g = SemanticGraph::new(Framework::Ucca);
                    for (i, w) in tokens.iter().enumerate() {
                        g.nodes.push(GraphNode::anchored(format!("t{i}"), w.clone(), vec![Span::token(i)]));
                    }
                    let mut fresh = 0;
                    let mut unit = |g: &mut SemanticGraph| {
                        fresh += 1;
                        let id = format!("u{fresh}");
                        g.nodes.push(GraphNode::new(id.clone(), ""));
                        id
                    };
                    let root = unit(&mut g);
                    let term = |g: &mut SemanticGraph, p: &str, t: usize| {
                        g.edges.push(GraphEdge::new(p, format!("t{t}"), crate::convert::TERMINAL_EDGE))
                    };
                    let subj_unit = unit(&mut g);
                    g.edges.push(GraphEdge::new(&root, &subj_unit, "A"));
                    for t in 0..=subj {
                        let w = unit(&mut g);
                        let label = if t == subj { "C" } else { "E" };
                        g.edges.push(GraphEdge::new(&subj_unit, &w, label));
                        term(&mut g, &w, t);
                    }
                    let p = unit(&mut g);
                    g.edges.push(GraphEdge::new(&root, &p, "P"));
                    term(&mut g, &p, verb);
                    let obj_unit = unit(&mut g);
                    g.edges.push(GraphEdge::new(&root, &obj_unit, "A"));
                    let last = extra.unwrap_or(obj);
                    for t in verb + 1..=last {
                        let w = unit(&mut g);
                        let label = match (t == obj || Some(t) == extra, lex[t].pos) {
                            (true, _) => "C",
                            (_, "CC") => "N",
                            _ => "E",
                        };
                        g.edges.push(GraphEdge::new(&obj_unit, &w, label));
                        term(&mut g, &w, t);
                    }
                    g.tops.push(root);
                    g
                }
            };
            let mut rec = CanonicalGraphRecord::from_graph(format!("syn{k:02}"), tokens, pos, g);
            rec.features.insert("lemma".into(), lemmas);
            rec
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate_arborescence;
    use rand::SeedableRng;

    #[test]
    fn random_arborescences_validate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let a = random_arborescence(&mut rng, 12);
            assert!(validate_arborescence(&a).is_valid(), "{a:?}");
        }
    }

    #[test]
    fn corpus_sentences_are_short_and_consistent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let corpus = synthetic_corpus(&mut rng, 32);
        assert_eq!(corpus.len(), 32);
        for r in &corpus {
            assert!(r.tokens.len() <= 8);
            r.check().unwrap();
            crate::convert::to_arbor(&r.graph()).unwrap();
        }
    }
}
