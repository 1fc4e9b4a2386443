//! Run the turn-recurrent evaluation loop with in-process backends.
//!
//! ```text
//! cargo run --example evaluate_backends
//! ```

use wozloc::eval::{
    run_csp_loop, EvalOptions, FeedMode, MetricsReport, OracleBackend, ScriptedErrorBackend,
};
use wozloc::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synth::random_corpus(200, 8, 11);
    let opts = EvalOptions::default();

    let mut oracle = OracleBackend::new(&corpus);
    let predicted = run_csp_loop(&corpus, &mut oracle, FeedMode::PredictedState, &opts);
    let gold = run_csp_loop(&corpus, &mut oracle, FeedMode::GoldState, &opts);
    println!("oracle\n{}\n", MetricsReport::new(Some(&predicted), Some(&gold))?);

    // one wrong slot every third turn: errors carry forward only under JGA
    let mut scripted = ScriptedErrorBackend::new(&corpus);
    let predicted = run_csp_loop(&corpus, &mut scripted, FeedMode::PredictedState, &opts);
    let gold = run_csp_loop(&corpus, &mut scripted, FeedMode::GoldState, &opts);
    let report = MetricsReport::new(Some(&predicted), Some(&gold))?;
    println!("scripted errors\n{report}");
    for turn in report.per_turn.iter().take(4) {
        println!(
            "  turn {}: jga {:.3} gjga {:.3}",
            turn.turn,
            turn.jga.unwrap_or(f64::NAN),
            turn.gjga.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
