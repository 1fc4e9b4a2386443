//! Encode a belief state as text, parse it back and diff two states.
//!
//! ```text
//! cargo run --example state_encoding
//! ```

use wozloc::state::{diff_states, expand_range, parse_state, serialize_state, NumericRange};
use wozloc::{BeliefState, SlotId, SlotValue};

fn main() {
    let slot = |d: &str, s: &str| SlotId::new(d, s).unwrap();
    let mut before = BeliefState::new();
    before.insert(slot("train", "day"), SlotValue::regular("thursday"));
    before.insert(slot("train", "destination"), SlotValue::regular("cambridge"));

    let mut after = before.clone();
    after.insert(slot("train", "book people"), SlotValue::regular("6"));
    after.insert(slot("hotel", "stars"), SlotValue::from_annotation("dontcare").unwrap());
    after.remove(&slot("train", "destination"));

    println!("empty:  {}", serialize_state(&BeliefState::new()).unwrap());
    let text = serialize_state(&after).unwrap();
    println!("after:  {text}");
    assert_eq!(parse_state(&text).unwrap(), after);

    // the parser is lenient about order, spacing and commas
    let loose = r#"train book people=" 6 " , hotel stars = "dontcare"  train day = " thursday ""#;
    assert_eq!(parse_state(loose).unwrap(), after);

    let delta = diff_states(&before, &after);
    for (s, v) in delta.set() {
        println!("set    {s} = {v}");
    }
    for s in delta.clear() {
        println!("clear  {s}");
    }

    let range = NumericRange::parse("100-150").unwrap();
    let wider = expand_range(range, 83);
    println!("100-150 widened by 83: {}-{}", wider.low(), wider.high());
}
