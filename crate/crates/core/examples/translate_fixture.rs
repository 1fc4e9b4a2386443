//! Translate the bundled Chinese fixture with the in-process mock
//! translator, with and without alignment.
//!
//! ```text
//! cargo run --example translate_fixture
//! ```

use wozloc::pipeline::{
    faithfulness, translate_corpus, MockTranslator, PipelineConfig, Strategy, TranslationJob,
    Translator,
};
use wozloc::state::serialize_state;
use wozloc::synth;
use wozloc::wire::TransportError;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synth::translation_fixture();
    let dictionary = synth::fixture_dictionary();
    let target = synth::fixture_target_ontology();
    for (noisy, alignment) in [(false, true), (true, true), (true, false)] {
        let job = TranslationJob {
            dictionary: &dictionary,
            target_ontology: &target,
            seed: 7,
            strategy: Strategy::Random,
            config: PipelineConfig {
                src_lang: "zh".into(),
                tgt_lang: "en".into(),
                alignment,
                ..PipelineConfig::default()
            },
            jobs: 4,
        };
        let connect = || -> Result<Box<dyn Translator + Send>, TransportError> {
            Ok(Box::new(MockTranslator {
                lexicon: synth::fixture_lexicon(),
                noisy,
                ..MockTranslator::default()
            }))
        };
        let done = translate_corpus(&corpus, &job, connect)?;
        let rate = faithfulness(&done.corpus).rate();
        println!(
            "noisy={noisy:<5} alignment={alignment:<5} verbatim={:.1}% failed spans={}",
            100.0 * rate,
            done.trace.failed
        );
        if noisy && alignment {
            let turn = &done.corpus.dialogues[0].turns[0];
            println!("  source: {}", corpus.dialogues[0].turns[0].user);
            println!("  target: {}", turn.user);
            println!("  state:  {}", serialize_state(&turn.state)?);
        }
    }
    Ok(())
}
