//! Trains one small model per framework on a synthetic 32-pair corpus until
//! each reproduces its own training set, then reports pooled relation F1.

use arbor::convert::SenseTable;
use arbor::data::prepare;
use arbor::eval::F1Report;
use arbor::graph::Framework;
use arbor::model::ModelConfig;
use arbor::synthetic::synthetic_corpus;
use arbor::train::{build_model, evaluate_relations, train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARBOR_LOG", "info")).init();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let records = synthetic_corpus(&mut rng, 32);
    let examples = prepare(&records, &mut SenseTable::default()).map_err(|(id, e)| format!("{id}: {e}"))?;
    let cfg = TrainConfig {
        epochs: 500,
        batch_size: 8,
        patience: 500,
        target_f1: Some(1.0),
        ..TrainConfig::default()
    };
    let start = std::time::Instant::now();
    let mut reports = Vec::new();
    for fw in Framework::ALL {
        let part: Vec<_> = examples.iter().filter(|e| e.framework == fw).cloned().collect();
        let mut model = build_model(&part, ModelConfig::scaled(fw), 1)?;
        let report = train(&mut model, &part, &part, &cfg, None, None)?;
        let f1 = evaluate_relations(&model, &part, cfg.max_len)?;
        println!("{fw}: {} pairs, {} epochs, relation f1 {:.4}", part.len(), report.epochs.len(), f1.f1);
        reports.push(f1);
    }
    let pooled = F1Report::merge(reports);
    println!("pooled relation f1 {:.4} in {:.1}s", pooled.f1, start.elapsed().as_secs_f64());
    Ok(())
}
