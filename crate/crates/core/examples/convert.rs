//! Converts an AMR graph to an arborescence, linearizes it and converts it back.

use arbor::convert::{from_arbor, to_arbor};
use arbor::graph::graph_isomorphic;
use arbor::io::{read_penman, write_penman};
use arbor::linearize::{arbor_to_relations, relations_to_arbor, write_relations_tsv, OrderingPolicy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = read_penman("(e / express-01 :ARG0 (p / person) :ARG1 (c / concern :poss p))")?;
    let a = to_arbor(&g)?;
    let seq = arbor_to_relations(&a, OrderingPolicy::for_framework(g.framework));
    print!("{}", write_relations_tsv(std::slice::from_ref(&seq)));

    let back = from_arbor(&relations_to_arbor(&seq)?, g.framework)?;
    println!("{}", write_penman(&back)?);
    println!("isomorphic: {}", graph_isomorphic(&g, &back)?);
    Ok(())
}
