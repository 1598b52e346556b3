//! Kept in its own binary so no concurrently running test skews the clock.

mod common;

use arbor::eval::{linear_fit, speed_bench};
use arbor::graph::Framework;
use arbor::inference::DecodeOptions;
use arbor::model::ModelConfig;
use common::*;

#[test]
fn decode_time_grows_linearly_with_length() {
    let data = corpus(6, 4);
    let model = random_model(&data, ModelConfig::scaled(Framework::Amr), 3);
    let inputs: Vec<_> = data.iter().map(|e| (e.input.clone(), e.framework)).collect();
    let lengths: Vec<usize> = (5..=80).step_by(5).collect();
    let opts = DecodeOptions { max_len: 20, min_len: 0, beam_size: 2, ..Default::default() };
    let report = speed_bench(&model, &inputs, &opts, &lengths, 5).unwrap();
    for (len, steps, _) in &report.length_points {
        assert_eq!(len, steps);
    }
    assert!(report.fit.r2 >= 0.95, "{:?}", report);
    assert!(report.fit.slope > 0.0);
    assert!(linear_fit(&[1.0, 2.0], &[1.0, 1.0]).r2 == 1.0);
}
