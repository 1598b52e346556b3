//! Measures decoding throughput and how decode time scales with output length.

use arbor::convert::SenseTable;
use arbor::data::prepare;
use arbor::eval::speed_bench;
use arbor::graph::Framework;
use arbor::inference::DecodeOptions;
use arbor::model::ModelConfig;
use arbor::synthetic::synthetic_corpus;
use arbor::train::build_model;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let records = synthetic_corpus(&mut rng, 20);
    let examples = prepare(&records, &mut SenseTable::default()).map_err(|(id, e)| format!("{id}: {e}"))?;
    let model = build_model(&examples, ModelConfig::scaled(Framework::Amr), 2)?;
    let inputs: Vec<_> = examples.iter().map(|e| (e.input.clone(), Framework::Amr)).collect();
    let lengths: Vec<usize> = (5..=80).step_by(5).collect();
    let opts = DecodeOptions { max_len: 30, beam_size: 5, ..DecodeOptions::default() };
    let r = speed_bench(&model, &inputs, &opts, &lengths, 5)?;
    println!("greedy {:.0} tokens/s, beam(k={}) {:.0} tokens/s", r.greedy_tokens_per_sec, r.beam_size, r.beam_tokens_per_sec);
    for (len, steps, secs) in &r.length_points {
        println!("length {len:>3}: {steps} steps in {:.2} ms", 1e3 * secs);
    }
    println!("fit {:.3} ms/relation, R^2 {:.4}", 1e3 * r.fit.slope, r.fit.r2);
    Ok(())
}
