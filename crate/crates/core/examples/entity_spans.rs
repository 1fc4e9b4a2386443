//! Find value spans in an utterance and project one through attention.
//!
//! ```text
//! cargo run --example entity_spans
//! ```

use wozloc::align::{
    align_span, detect_entity_spans, numeric_span_recover, split_sentences, strip_quotes,
    AlignmentConfig, AttentionMatrix, TokenOffsets,
};
use wozloc::state::parse_state;

fn main() {
    let utterance = "I want a \"cheap\" hotel in the north. We are 6 people.";
    let state = parse_state(r#"hotel price = " cheap " hotel area = " north " hotel book people = " 6 ""#)
        .unwrap();

    let stripped = strip_quotes(utterance);
    println!("stripped: {}", stripped.text);
    for sentence in split_sentences(&stripped.text) {
        println!("sentence at {}: {}", sentence.offset, sentence.text);
    }
    let spans = detect_entity_spans(&stripped.text, &state);
    for span in &spans {
        println!("{:>2}..{:<2} {} = {}", span.start, span.end, span.slot, span.value);
    }

    // "cheap hotel" -> "hotel günstig": target token i looks at source token source_of[i]
    let source = "cheap hotel";
    let target = "hotel günstig";
    let src = TokenOffsets::whitespace(source);
    let tgt = TokenOffsets::whitespace(target);
    let attention = AttentionMatrix::one_hot(&[1, 0], 2).unwrap();
    let cheap = detect_entity_spans(source, &state).remove(0);
    let found = align_span(&cheap, &src, &tgt, &attention, &AlignmentConfig::default()).unwrap();
    println!("{:?} -> {:?}", &source[cheap.range()], &target[found.range()]);

    // numbers and times are found without attention when unique
    let range = numeric_span_recover("10:00", "Der Zug fährt um 10:00 ab.").unwrap();
    println!("10:00 found at {range:?}");
}
