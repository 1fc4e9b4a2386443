//! Lint a corpus with planted annotation errors and compare the findings
//! with what was planted.
//!
//! ```text
//! cargo run --example lint_planted
//! ```

use wozloc::lint::{lint_corpus, FindingKind};
use wozloc::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = synth::lint_fixture_config();
    for kind in FindingKind::ALL {
        let (corpus, planted) = synth::planted_corpus(kind, 20, 3);
        let report = lint_corpus(&corpus, &cfg)?;
        let hits = report.findings.iter().filter(|f| f.kind == kind).count();
        println!("{:<18} planted {:>3}  found {:>3}", kind.to_string(), planted.len(), hits);
    }

    let (corpus, _) = synth::planted_corpus(FindingKind::RangeAnomaly, 3, 3);
    let report = lint_corpus(&corpus, &cfg)?;
    for finding in &report.findings {
        println!("{finding}");
    }
    println!("\n{report}");
    Ok(())
}
