//! Fits an AMR model on synthetic data, saves it, reloads it and parses
//! sentences with greedy and beam decoding.

use arbor::convert::SenseTable;
use arbor::data::prepare;
use arbor::graph::Framework;
use arbor::inference::{parse, DecodeOptions};
use arbor::io::write_penman;
use arbor::model::{Model, ModelConfig};
use arbor::synthetic::synthetic_corpus;
use arbor::train::{build_model, train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let records = synthetic_corpus(&mut rng, 24);
    let examples: Vec<_> = prepare(&records, &mut SenseTable::default())
        .map_err(|(id, e)| format!("{id}: {e}"))?
        .into_iter()
        .filter(|e| e.framework == Framework::Amr)
        .collect();
    let mut model = build_model(&examples, ModelConfig::scaled(Framework::Amr), 5)?;
    let cfg = TrainConfig { epochs: 300, batch_size: 8, patience: 300, target_f1: Some(1.0), ..TrainConfig::default() };
    train(&mut model, &examples, &examples, &cfg, None, None)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("amr.ckpt");
    model.save(&path)?;
    let model = Model::load(&path)?;

    let greedy = DecodeOptions { beam_size: 1, ..DecodeOptions::default() };
    let beam = DecodeOptions { beam_size: 5, ..DecodeOptions::default() };
    for ex in examples.iter().take(3) {
        println!("# {}", ex.input.tokens.join(" "));
        for (name, opts) in [("greedy", &greedy), ("beam", &beam)] {
            let p = parse(&model, &ex.input, Framework::Amr, opts)?;
            println!("{name} ({} relations, score {:.3})", p.decoded.sequence.relations.len(), p.decoded.score);
            println!("{}", write_penman(&p.graph)?);
        }
    }
    Ok(())
}
