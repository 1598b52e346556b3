//! Scores a predicted AMR graph against a gold one with exact and hill-climbing smatch.

use arbor::eval::{smatch_score, SmatchMode, SmatchOptions};
use arbor::io::read_penman;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let gold = read_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))")?;
    let pred = read_penman("(x / want-01 :ARG0 (y / boy) :ARG1 (z / go-02 :ARG0 (q / girl)))")?;
    for mode in [SmatchMode::Exact, SmatchMode::hill_climb()] {
        let r = smatch_score(&gold, &pred, &SmatchOptions { mode, include_top: true })?;
        println!("{mode:?}: matched {} gold {} pred {} f1 {:.4}", r.matched, r.gold, r.pred, r.f1);
    }
    Ok(())
}
