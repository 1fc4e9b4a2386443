//! Import a foreign-schema corpus, validate it and print statistics.
//!
//! ```text
//! cargo run --example corpus_stats
//! ```

use std::path::Path;

use wozloc::ingest::{corpus_stats, import_foreign, to_canonical_string, FieldMapping};
use wozloc::Ontology;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/foreign");
    let mapping = FieldMapping::load(dir.join("mapping.json"))?;
    let ontology = Ontology::load(dir.join("ontology.json"))?;
    let imported = import_foreign(dir.join("dialogues.json"), &mapping, &ontology)?;
    for issue in &imported.issues {
        println!("issue: {issue}");
    }
    println!("{}", corpus_stats(&imported.corpus));

    let filtered = imported.corpus.without_domains(&["train".to_string()]);
    println!("\nwithout trains:\n{}", corpus_stats(&filtered));

    let canonical = to_canonical_string(&imported.corpus);
    println!("\ncanonical form: {} bytes", canonical.len());
    Ok(())
}
