//! Belief states and their textual encoding.
//!
//! A belief state maps slots to values. A slot that was never mentioned is
//! simply absent from the map, so the empty map is the initial state of every
//! dialogue. States are encoded as text for parser backends:
//!
//! ```text
//! train day = " thursday " train departure = " cambridge "
//! ```
//!
//! with `null` standing for the empty state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::ontology::Ontology;

/// Literal used for the empty state.
pub const EMPTY_STATE: &str = "null";
/// Special value: the user explicitly has no preference.
pub const DONTCARE: &str = "dontcare";
/// Special value: slot not mentioned. Never stored.
pub const NONE: &str = "none";

/// NFC-normalize and trim a value or utterance fragment.
///
/// This is the only normalization applied before exact comparison; there is
/// no case folding.
pub fn normalize_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.trim().to_string()
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SlotIdError {
    #[error("empty domain name")]
    EmptyDomain,
    #[error("empty slot name in domain `{0}`")]
    EmptySlot(String),
    #[error("domain `{0}` contains whitespace, `=` or `\"`")]
    BadDomain(String),
    #[error("slot `{0}` contains `=`, `\"`, or irregular whitespace")]
    BadSlot(String),
}

/// A `(domain, slot)` pair such as `(train, book people)`.
///
/// The domain is a single word. The slot may contain several words separated
/// by single spaces, which is how MultiWOZ names slots like `book people`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawSlotId")]
pub struct SlotId {
    domain: String,
    slot: String,
}

#[derive(Deserialize)]
struct RawSlotId {
    domain: String,
    slot: String,
}

impl TryFrom<RawSlotId> for SlotId {
    type Error = SlotIdError;

    fn try_from(raw: RawSlotId) -> Result<Self, Self::Error> {
        SlotId::new(raw.domain, raw.slot)
    }
}

impl SlotId {
    pub fn new(domain: impl Into<String>, slot: impl Into<String>) -> Result<Self, SlotIdError> {
        let domain: String = domain.into().nfc().collect();
        let slot: String = slot.into().nfc().collect();
        if domain.is_empty() {
            return Err(SlotIdError::EmptyDomain);
        }
        if domain.chars().any(|c| c.is_whitespace() || c == '=' || c == '"') {
            return Err(SlotIdError::BadDomain(domain));
        }
        if slot.is_empty() {
            return Err(SlotIdError::EmptySlot(domain));
        }
        let regular_spacing = slot.split(' ').all(|w| !w.is_empty() && !w.contains(char::is_whitespace));
        if !regular_spacing || slot.contains(['=', '"']) {
            return Err(SlotIdError::BadSlot(slot));
        }
        Ok(SlotId { domain, slot })
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn slot(&self) -> &str {
        &self.slot
    }
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.domain, self.slot)
    }
}

/// Parses the display form: the domain, one space, then the slot.
impl std::str::FromStr for SlotId {
    type Err = SlotIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (domain, slot) = s.trim().split_once(' ').unwrap_or((s.trim(), ""));
        SlotId::new(domain, slot)
    }
}

/// Value assigned to a slot. `none` is represented by absence from the state.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotValue {
    Regular(String),
    DontCare,
}

impl SlotValue {
    /// Build a value from annotation text. Returns `None` for the `none`
    /// special value and for blank text.
    pub fn from_annotation(text: &str) -> Option<SlotValue> {
        let text = normalize_text(text);
        match text.as_str() {
            "" | NONE => None,
            DONTCARE => Some(SlotValue::DontCare),
            _ => Some(SlotValue::Regular(text)),
        }
    }

    pub fn regular(text: &str) -> SlotValue {
        SlotValue::Regular(normalize_text(text))
    }

    /// Text as it appears between the quotes of the encoding.
    pub fn as_str(&self) -> &str {
        match self {
            SlotValue::Regular(text) => text,
            SlotValue::DontCare => DONTCARE,
        }
    }

    pub fn as_regular(&self) -> Option<&str> {
        match self {
            SlotValue::Regular(text) => Some(text),
            SlotValue::DontCare => None,
        }
    }

    fn normalized(self) -> SlotValue {
        match self {
            SlotValue::Regular(text) => SlotValue::regular(&text),
            other => other,
        }
    }
}

impl fmt::Display for SlotValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Slot assignments at the end of a turn.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BeliefState {
    assignments: BTreeMap<SlotId, SlotValue>,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assign `value` to `slot`, replacing any previous value. Regular values
    /// are normalized on the way in.
    pub fn insert(&mut self, slot: SlotId, value: SlotValue) -> Option<SlotValue> {
        self.assignments.insert(slot, value.normalized())
    }

    pub fn remove(&mut self, slot: &SlotId) -> Option<SlotValue> {
        self.assignments.remove(slot)
    }

    pub fn get(&self, slot: &SlotId) -> Option<&SlotValue> {
        self.assignments.get(slot)
    }

    pub fn contains(&self, slot: &SlotId) -> bool {
        self.assignments.contains_key(slot)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Assignments in `(domain, slot)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&SlotId, &SlotValue)> {
        self.assignments.iter()
    }

    /// Regular values only, in slot order.
    pub fn regular_values(&self) -> impl Iterator<Item = (&SlotId, &str)> {
        self.assignments
            .iter()
            .filter_map(|(slot, value)| value.as_regular().map(|v| (slot, v)))
    }
}

impl FromIterator<(SlotId, SlotValue)> for BeliefState {
    fn from_iter<I: IntoIterator<Item = (SlotId, SlotValue)>>(iter: I) -> Self {
        let mut state = BeliefState::new();
        for (slot, value) in iter {
            state.insert(slot, value);
        }
        state
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SerializationError {
    #[error("value for `{slot}` contains a double quote: {value:?}")]
    QuoteInValue { slot: SlotId, value: String },
}

/// Render a state as text.
///
/// Assignments are emitted in `(domain, slot)` order as
/// `<domain> <slot> = " <value> "`, separated by single spaces. The empty
/// state renders as `null`.
pub fn serialize_state(state: &BeliefState) -> Result<String, SerializationError> {
    if state.is_empty() {
        return Ok(EMPTY_STATE.to_string());
    }
    let mut parts = Vec::with_capacity(state.len());
    for (slot, value) in state.iter() {
        let text = value.as_str();
        if text.contains('"') {
            return Err(SerializationError::QuoteInValue {
                slot: slot.clone(),
                value: text.to_string(),
            });
        }
        parts.push(format!("{} {} = \" {} \"", slot.domain(), slot.slot(), text));
    }
    Ok(parts.join(" "))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("state parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid state: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Validation(Vec<StateIssue>),
}

/// Problem found when checking a state against an ontology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StateIssue {
    UnknownSlot { slot: SlotId },
    IllegalValue { slot: SlotId, value: String },
}

impl fmt::Display for StateIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateIssue::UnknownSlot { slot } => write!(f, "unknown slot `{slot}`"),
            StateIssue::IllegalValue { slot, value } => {
                write!(f, "illegal value {value:?} for slot `{slot}`")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Lenient,
    Strict,
}

struct Scanner<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Scanner<'a> {
    fn error(&self, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            offset,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    /// Read a run of characters that are not whitespace, `=` or `"`.
    fn word(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '=' || c == '"' {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.text[start..self.pos]
    }

    fn expect(&mut self, expected: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(c) if c == expected => {
                self.pos += c.len_utf8();
                Ok(())
            }
            Some(c) => Err(self.error(self.pos, format!("expected `{expected}`, found `{c}`"))),
            None => Err(self.error(self.pos, format!("expected `{expected}`, found end of input"))),
        }
    }

    fn assignment(&mut self) -> Result<(SlotId, Option<SlotValue>), ParseError> {
        let start = self.pos;
        let domain = self.word();
        if domain.is_empty() {
            return Err(self.error(start, "expected domain name"));
        }
        let mut words = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some('=') => break,
                Some('"') => return Err(self.error(self.pos, "unexpected `\"` in slot name")),
                None => return Err(self.error(self.pos, "expected `=`, found end of input")),
                _ => words.push(self.word()),
            }
        }
        if words.is_empty() {
            return Err(self.error(self.pos, "expected slot name before `=`"));
        }
        let slot = SlotId::new(domain, words.join(" "))
            .map_err(|e| self.error(start, e.to_string()))?;
        self.expect('=')?;
        self.skip_ws();
        self.expect('"')?;
        let value_start = self.pos;
        let Some(len) = self.text[value_start..].find('"') else {
            return Err(self.error(value_start, "unterminated value"));
        };
        let raw = &self.text[value_start..value_start + len];
        self.pos = value_start + len + 1;
        if raw.trim().is_empty() {
            return Err(self.error(value_start, "empty value"));
        }
        Ok((slot, SlotValue::from_annotation(raw)))
    }
}

/// Parse the textual encoding back into a state.
///
/// Assignments may come in any order and may be separated by any amount of
/// whitespace or by commas. A later assignment to the same slot overrides an
/// earlier one; assigning `none` removes the slot.
pub fn parse_state(encoded: &str) -> Result<BeliefState, ParseError> {
    let mut state = BeliefState::new();
    if encoded.trim() == EMPTY_STATE {
        return Ok(state);
    }
    let mut scanner = Scanner { text: encoded, pos: 0 };
    scanner.skip_ws();
    while !scanner.at_end() {
        let (slot, value) = scanner.assignment()?;
        match value {
            Some(value) => {
                state.insert(slot, value);
            }
            None => {
                state.remove(&slot);
            }
        }
        scanner.skip_ws();
        if scanner.peek() == Some(',') {
            scanner.pos += 1;
            scanner.skip_ws();
        }
    }
    Ok(state)
}

/// Parse and check against `ontology`. In strict mode any unknown slot or
/// illegal value is an error; in lenient mode the state is returned as is.
pub fn parse_state_checked(
    encoded: &str,
    ontology: &Ontology,
    strictness: Strictness,
) -> Result<BeliefState, StateError> {
    let state = parse_state(encoded)?;
    if strictness == Strictness::Strict {
        let issues = ontology.validate_state(&state);
        if !issues.is_empty() {
            return Err(StateError::Validation(issues));
        }
    }
    Ok(state)
}

/// Change between two consecutive states.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StateDelta {
    set: BTreeMap<SlotId, SlotValue>,
    clear: BTreeSet<SlotId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("slot `{0}` is both set and cleared")]
pub struct DeltaConflict(pub SlotId);

impl StateDelta {
    pub fn new(
        set: BTreeMap<SlotId, SlotValue>,
        clear: BTreeSet<SlotId>,
    ) -> Result<Self, DeltaConflict> {
        if let Some(slot) = set.keys().find(|slot| clear.contains(*slot)) {
            return Err(DeltaConflict(slot.clone()));
        }
        let set = set.into_iter().map(|(k, v)| (k, v.normalized())).collect();
        Ok(StateDelta { set, clear })
    }

    pub fn set(&self) -> &BTreeMap<SlotId, SlotValue> {
        &self.set
    }

    pub fn clear(&self) -> &BTreeSet<SlotId> {
        &self.clear
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty() && self.clear.is_empty()
    }
}

/// Remove the cleared slots from `prev`, then write the set entries.
pub fn apply_delta(prev: &BeliefState, delta: &StateDelta) -> BeliefState {
    let mut next = prev.clone();
    for slot in &delta.clear {
        next.remove(slot);
    }
    for (slot, value) in &delta.set {
        next.insert(slot.clone(), value.clone());
    }
    next
}

/// Minimal delta taking `prev` to `next`.
pub fn diff_states(prev: &BeliefState, next: &BeliefState) -> StateDelta {
    let set = next
        .iter()
        .filter(|(slot, value)| prev.get(slot) != Some(*value))
        .map(|(slot, value)| (slot.clone(), value.clone()))
        .collect();
    let clear = prev
        .iter()
        .filter(|(slot, _)| !next.contains(slot))
        .map(|(slot, _)| slot.clone())
        .collect();
    StateDelta { set, clear }
}

/// Closed integer interval used by range-valued slots such as cost per
/// person (`100-150`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NumericRange {
    low: u64,
    high: u64,
}

impl NumericRange {
    pub fn new(low: u64, high: u64) -> Option<Self> {
        (low <= high).then_some(NumericRange { low, high })
    }

    pub fn low(&self) -> u64 {
        self.low
    }

    pub fn high(&self) -> u64 {
        self.high
    }

    pub fn contains(&self, value: u64) -> bool {
        self.low <= value && value <= self.high
    }

    /// Parse `a-b`, tolerating spaces around the dash and the en/em dash and
    /// `~` variants.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        let (low, high) = text.split_once(['-', '–', '—', '~'])?;
        let low = low.trim();
        let high = high.trim();
        let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !digits(low) || !digits(high) {
            return None;
        }
        NumericRange::new(low.parse().ok()?, high.parse().ok()?)
    }
}

impl fmt::Display for NumericRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.low, self.high)
    }
}

/// Widen `current` to include `observed`, moving the violated bound to the
/// next multiple of ten outward.
pub fn expand_range(current: NumericRange, observed: u64) -> NumericRange {
    if observed < current.low {
        NumericRange {
            low: observed / 10 * 10,
            high: current.high,
        }
    } else if observed > current.high {
        NumericRange {
            low: current.low,
            high: observed.div_ceil(10) * 10,
        }
    } else {
        current
    }
}
