use arbor::convert::{from_arbor, to_arbor};
use arbor::graph::{graph_isomorphic, validate_arborescence, Framework};
use arbor::linearize::{arbor_to_relations, relations_to_arbor, OrderingPolicy};
use arbor::synthetic::{random_arborescence, random_graph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn fuzzed_graphs_survive_conversion() {
    for fw in Framework::ALL {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..500 {
            let g = random_graph(&mut rng, fw);
            let a = to_arbor(&g).unwrap_or_else(|e| panic!("{fw} #{k}: {e}\n{g:?}"));
            let report = validate_arborescence(&a);
            assert!(report.is_valid(), "{fw} #{k}: {report:?}");
            let back = from_arbor(&a, fw).unwrap_or_else(|e| panic!("{fw} #{k}: {e}"));
            assert!(graph_isomorphic(&g, &back).unwrap(), "{fw} #{k}\n{g:?}\n{a:?}\n{back:?}");
        }
    }
}

#[test]
fn linearization_is_an_identity_on_fuzzed_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let a = random_arborescence(&mut rng, 12);
        let seq = arbor_to_relations(&a, OrderingPolicy::SourceOrder);
        assert_eq!(relations_to_arbor(&seq).unwrap(), a);
    }
}

mod properties {
    use super::*;
    use arbor::eval::{smatch_score, SmatchMode, SmatchOptions};
    use arbor::linearize::{read_relations_tsv, write_relations_tsv};
    use arbor::synthetic::random_amr;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn any_seed_round_trips(seed in any::<u64>(), fw in 0usize..3) {
            let fw = Framework::ALL[fw];
            let g = random_graph(&mut ChaCha8Rng::seed_from_u64(seed), fw);
            let back = from_arbor(&to_arbor(&g).unwrap(), fw).unwrap();
            prop_assert!(graph_isomorphic(&g, &back).unwrap());
        }

        #[test]
        fn relation_tsv_round_trips(seed in any::<u64>()) {
            let a = random_arborescence(&mut ChaCha8Rng::seed_from_u64(seed), 10);
            let seq = arbor_to_relations(&a, OrderingPolicy::Alphanumeric);
            let read = read_relations_tsv(&write_relations_tsv(std::slice::from_ref(&seq))).unwrap();
            prop_assert_eq!(read.len(), 1);
            // Rows name the source node, not which of its copies it is.
            let keys = |s: &arbor::graph::RelationSequence| s.relations.iter().map(|r| r.key()).collect::<Vec<_>>();
            prop_assert_eq!(keys(&read[0]), keys(&seq));
        }

        #[test]
        fn smatch_ignores_variable_names(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_amr(&mut rng, 6);
            let mut renamed = g.clone();
            let rename = |id: &str| format!("x_{id}");
            for n in &mut renamed.nodes { n.id = rename(&n.id); }
            for e in &mut renamed.edges { e.source = rename(&e.source); e.target = rename(&e.target); }
            for t in &mut renamed.tops { *t = rename(t); }
            renamed.nodes.reverse();
            let opts = SmatchOptions { mode: SmatchMode::Exact, include_top: true };
            prop_assert_eq!(smatch_score(&g, &renamed, &opts).unwrap().f1, 1.0);
        }
    }
}
