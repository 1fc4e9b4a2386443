//! Rewrite the generated files under `fixtures/`.
//!
//! ```text
//! cargo run --example regenerate_fixtures [-- <dir>]
//! ```
//!
//! The foreign-schema fixture is written by hand and left alone.

use std::path::PathBuf;

use wozloc::ingest::to_canonical_string;
use wozloc::synth;

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).unwrap();
    text.push('\n');
    text
}

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    let translation = dir.join("translation");
    std::fs::create_dir_all(&translation)?;
    let files = [
        ("corpus.json", to_canonical_string(&synth::translation_fixture())),
        ("target_ontology.json", synth::fixture_target_ontology().to_json_pretty() + "\n"),
        ("dictionary.json", json(&synth::fixture_dictionary())),
        ("lexicon.json", json(&synth::fixture_lexicon())),
    ];
    for (name, text) in files {
        let path = translation.join(name);
        std::fs::write(&path, text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
