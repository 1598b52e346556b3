//! Training examples built from canonical graph records.

use std::collections::HashMap;

use crate::convert::{strip_senses, to_arbor, ConvertError, SenseTable};
use crate::graph::{Arborescence, Framework, RelationSequence, SemanticGraph};
use crate::io::CanonicalGraphRecord;
use crate::linearize::{arbor_to_relations, OrderingPolicy};
use crate::model::EncoderInput;

/// A sentence paired with its reference relation sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: String,
    pub framework: Framework,
    pub input: EncoderInput,
    pub reference: RelationSequence,
    /// The gold graph as read (senses intact).
    pub graph: SemanticGraph,
}

/// Pre-order reference for `arbor`, terminated by EOS.
pub fn make_reference(arbor: &Arborescence, policy: OrderingPolicy) -> RelationSequence {
    let mut seq = arbor_to_relations(arbor, policy);
    seq.terminated = true;
    seq
}

/// Converts one record. AMR labels lose their sense suffix, which is
/// counted in `senses`.
pub fn prepare_record(rec: &CanonicalGraphRecord, senses: &mut SenseTable) -> Result<Example, ConvertError> {
    let graph = rec.graph();
    let stripped = if rec.framework == Framework::Amr {
        strip_senses(&graph, senses)
    } else {
        graph.clone()
    };
    let arbor = to_arbor(&stripped)?;
    Ok(Example {
        id: rec.id.clone(),
        framework: rec.framework,
        input: EncoderInput {
            tokens: rec.tokens.clone(),
            pos: rec.pos.clone(),
            features: rec.features.clone(),
            external: None,
        },
        reference: make_reference(&arbor, OrderingPolicy::for_framework(rec.framework)),
        graph,
    })
}

/// Converts every record, stopping at the first failure with its id.
pub fn prepare(records: &[CanonicalGraphRecord], senses: &mut SenseTable) -> Result<Vec<Example>, (String, ConvertError)> {
    records
        .iter()
        .map(|r| prepare_record(r, senses).map_err(|e| (r.id.clone(), e)))
        .collect()
}

/// Attaches external vectors by record id; returns the ids left without.
pub fn attach_external(examples: &mut [Example], vectors: &HashMap<String, Vec<Vec<f32>>>) -> Vec<String> {
    let mut missing = Vec::new();
    for ex in examples {
        match vectors.get(&ex.id) {
            Some(v) => ex.input.external = Some(v.clone()),
            None => missing.push(ex.id.clone()),
        }
    }
    missing
}
