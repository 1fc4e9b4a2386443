//! Misannotation detectors.
//!
//! Most detectors look at *introductions*: a regular value `v` of slot `s`
//! that is in the state of turn `t` but was not the value of `s` at `t - 1`.
//! An introduction is expected to be backed by a verbatim mention of `v` in
//! the dialogue so far; the detectors sort the ones that are not.
//!
//! | kind | fires when |
//! |------|-----------|
//! | `InexactMatch` | no verbatim mention, but a near miss within the edit-distance cap |
//! | `ExtraSlot` | no mention at all, and the slot is not inferable |
//! | `DelayedAnnotation` | mentioned at an earlier turn, annotated later, not re-mentioned |
//! | `MissingSlot` | mentioned but never annotated |
//! | `EmptyAnnotation` | state drops to empty mid-dialogue |
//! | `RangeAnomaly` | a range changes in a way expansion by a quoted figure does not explain |
//! | `InferredSlot` | an inferable slot takes a value never mentioned (informational) |

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{detect_value_spans, find_verbatim, is_word_char};
use crate::ingest::{Corpus, Dialogue, Speaker};
use crate::ontology::Ontology;
use crate::state::{expand_range, BeliefState, NumericRange, SlotId, SlotValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FindingKind {
    InexactMatch,
    MissingSlot,
    ExtraSlot,
    DelayedAnnotation,
    EmptyAnnotation,
    RangeAnomaly,
    InferredSlot,
}

impl FindingKind {
    pub const ALL: [FindingKind; 7] = [
        FindingKind::InexactMatch,
        FindingKind::MissingSlot,
        FindingKind::ExtraSlot,
        FindingKind::DelayedAnnotation,
        FindingKind::EmptyAnnotation,
        FindingKind::RangeAnomaly,
        FindingKind::InferredSlot,
    ];

    /// Informational kinds do not count towards the misannotation rate.
    pub fn is_informational(self) -> bool {
        self == FindingKind::InferredSlot
    }
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Kind-specific evidence of a finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    NearMiss {
        value: String,
        near_miss: String,
        distance: usize,
        turn: usize,
        speaker: Speaker,
    },
    Unannotated {
        value: String,
        speaker: Speaker,
    },
    Unmentioned {
        value: String,
    },
    Delayed {
        value: String,
        annotated_at: usize,
    },
    Reset {
        dropped: usize,
    },
    Range {
        previous: String,
        current: String,
        figures: Vec<u64>,
    },
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evidence::NearMiss { value, near_miss, distance, turn, speaker } => write!(
                f,
                "{value:?} not found verbatim; {speaker:?} turn {turn} has {near_miss:?} (distance {distance})"
            ),
            Evidence::Unannotated { value, speaker } => {
                write!(f, "{value:?} mentioned by {speaker:?} but never annotated")
            }
            Evidence::Unmentioned { value } => {
                write!(f, "{value:?} not mentioned in the dialogue so far")
            }
            Evidence::Delayed { value, annotated_at } => {
                write!(f, "{value:?} mentioned here but annotated only at turn {annotated_at}")
            }
            Evidence::Reset { dropped } => write!(f, "state reset, {dropped} slots dropped"),
            Evidence::Range { previous, current, figures } => write!(
                f,
                "range {previous} became {current}; agent figures {figures:?} do not explain it"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub dialogue: String,
    pub turn: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<SlotId>,
    pub evidence: Evidence,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} {}", self.dialogue, self.turn, self.kind)?;
        if let Some(slot) = &self.slot {
            write!(f, " [{slot}]")?;
        }
        write!(f, ": {}", self.evidence)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingSlotRule {
    /// Mentioned and absent from every later state.
    #[default]
    Conservative,
    /// Additionally: the agent proposed it as the only candidate and the
    /// user answered with a question.
    Contextual,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LintConfig {
    /// Slots whose values are often inferred rather than said.
    pub inferable_slots: BTreeSet<SlotId>,
    pub max_edit_distance: usize,
    /// Number of turns to draw; `None` inspects every turn.
    pub sample_size: Option<usize>,
    pub seed: u64,
    pub missing_slot: MissingSlotRule,
    /// Worker threads for [`lint_corpus`]. Findings do not depend on it.
    pub jobs: usize,
}

impl Default for LintConfig {
    fn default() -> Self {
        LintConfig {
            inferable_slots: BTreeSet::new(),
            max_edit_distance: 1,
            sample_size: None,
            seed: 0,
            missing_slot: MissingSlotRule::Conservative,
            jobs: 1,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LintConfigError {
    #[error("max_edit_distance must be at least 1")]
    EditDistance,
}

impl LintConfig {
    pub fn validate(&self) -> Result<(), LintConfigError> {
        if self.max_edit_distance == 0 {
            return Err(LintConfigError::EditDistance);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Matching helpers

const RANGE_DASHES: [char; 6] = ['-', '–', '—', '~', '至', '到'];

/// `low`, a dash and `high`, with optional whitespace around the dash and
/// no digits glued to either end.
fn mentions_range(text: &str, range: NumericRange) -> bool {
    let low = range.low().to_string();
    let high = range.high().to_string();
    text.match_indices(&low).any(|(start, _)| {
        if text[..start].ends_with(|c: char| c.is_ascii_digit()) {
            return false;
        }
        let rest = text[start + low.len()..].trim_start();
        let Some(rest) = rest.strip_prefix(RANGE_DASHES) else {
            return false;
        };
        let Some(rest) = rest.trim_start().strip_prefix(&high) else {
            return false;
        };
        !rest.starts_with(|c: char| c.is_ascii_digit())
    })
}

/// Whether `value` is mentioned in `text`. Ranges also match with spaces or
/// other dashes around the separator.
pub fn mentions(text: &str, value: &str) -> bool {
    if !find_verbatim(text, value).is_empty() {
        return true;
    }
    match NumericRange::parse(value) {
        Some(range) if value.chars().any(|c| !c.is_ascii_digit()) => {
            mentions_range(text, range)
        }
        _ => false,
    }
}

fn mentioned_at(dialogue: &Dialogue, turn: usize, value: &str) -> bool {
    let t = &dialogue.turns[turn];
    mentions(&t.agent, value) || mentions(&t.user, value)
}

fn cuts_word(text: &str, range: &Range<usize>) -> bool {
    let across = |left: Option<char>, right: Option<char>| {
        left.is_some_and(is_word_char) && right.is_some_and(is_word_char)
    };
    across(text[..range.start].chars().next_back(), text[range.start..].chars().next())
        || across(text[..range.end].chars().next_back(), text[range.end..].chars().next())
}

/// Closest substring of `text` to `value` within `cap` edits that does not
/// cut an ASCII word in half. Returns the substring and its distance.
pub fn near_miss(text: &str, value: &str, cap: usize) -> Option<(String, usize)> {
    let m = value.chars().count();
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    let mut best: Option<(usize, Range<usize>)> = None;
    for i in 0..bounds.len() {
        let lo = m.saturating_sub(cap).max(1);
        for len in lo..=m + cap {
            let Some(&end) = bounds.get(i + len) else {
                break;
            };
            let range = bounds[i]..end;
            if cuts_word(text, &range) {
                continue;
            }
            let d = strsim::levenshtein(&text[range.clone()], value);
            if d <= cap && best.as_ref().is_none_or(|(b, _)| d < *b) {
                best = Some((d, range));
            }
        }
    }
    best.map(|(d, r)| (text[r].to_string(), d))
}

fn integers(text: &str) -> Vec<u64> {
    static DIGITS: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let re = DIGITS.get_or_init(|| Regex::new(r"[0-9]+").expect("valid"));
    re.find_iter(text).filter_map(|m| m.as_str().parse().ok()).collect()
}

// ---------------------------------------------------------------------------
// Detectors

/// A value that became the value of its slot at `turn`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Introduction {
    pub turn: usize,
    pub slot: SlotId,
    pub value: String,
    /// Previous value of the slot, if any.
    pub previous: Option<SlotValue>,
}

impl Introduction {
    /// A change from one numeric range to another.
    pub fn is_range_change(&self) -> bool {
        let prev = self.previous.as_ref().and_then(SlotValue::as_regular);
        prev.and_then(NumericRange::parse).is_some() && NumericRange::parse(&self.value).is_some()
    }
}

pub fn introductions(dialogue: &Dialogue) -> Vec<Introduction> {
    let mut out = Vec::new();
    let mut previous = BeliefState::new();
    for turn in &dialogue.turns {
        for (slot, value) in turn.state.regular_values() {
            let before = previous.get(slot);
            if before.and_then(SlotValue::as_regular) != Some(value) {
                out.push(Introduction {
                    turn: turn.index,
                    slot: slot.clone(),
                    value: value.to_string(),
                    previous: before.cloned(),
                });
            }
        }
        previous = turn.state.clone();
    }
    out
}

fn finding(kind: FindingKind, d: &Dialogue, turn: usize, slot: Option<&SlotId>, evidence: Evidence) -> Finding {
    Finding {
        kind,
        dialogue: d.id.clone(),
        turn,
        slot: slot.cloned(),
        evidence,
    }
}

fn unsupported<'a>(dialogue: &'a Dialogue) -> impl Iterator<Item = Introduction> + 'a {
    introductions(dialogue)
        .into_iter()
        .filter(|i| !i.is_range_change())
        .filter(move |i| !(0..=i.turn).any(|t| mentioned_at(dialogue, t, &i.value)))
}

fn closest_near_miss(dialogue: &Dialogue, intro: &Introduction, cap: usize) -> Option<Evidence> {
    if intro.value.chars().count() < 2 {
        return None;
    }
    let mut best: Option<Evidence> = None;
    for t in 0..=intro.turn {
        for (speaker, text) in dialogue.turns[t].utterances() {
            if let Some((near, distance)) = near_miss(text, &intro.value, cap) {
                let better = match &best {
                    Some(Evidence::NearMiss { distance: b, .. }) => distance <= *b,
                    _ => true,
                };
                if better {
                    best = Some(Evidence::NearMiss {
                        value: intro.value.clone(),
                        near_miss: near,
                        distance,
                        turn: t,
                        speaker,
                    });
                }
            }
        }
    }
    best
}

/// Values with no verbatim mention up to their turn but a near miss within
/// the edit-distance cap.
pub fn detect_inexact_match(dialogue: &Dialogue, cfg: &LintConfig) -> Vec<Finding> {
    unsupported(dialogue)
        .filter_map(|i| {
            closest_near_miss(dialogue, &i, cfg.max_edit_distance)
                .map(|e| finding(FindingKind::InexactMatch, dialogue, i.turn, Some(&i.slot), e))
        })
        .collect()
}

/// Values of non-inferable slots never mentioned, not even approximately,
/// up to their turn.
pub fn detect_extra_slot(dialogue: &Dialogue, cfg: &LintConfig) -> Vec<Finding> {
    unsupported(dialogue)
        .filter(|i| !cfg.inferable_slots.contains(&i.slot))
        .filter(|i| closest_near_miss(dialogue, i, cfg.max_edit_distance).is_none())
        .map(|i| {
            let e = Evidence::Unmentioned { value: i.value.clone() };
            finding(FindingKind::ExtraSlot, dialogue, i.turn, Some(&i.slot), e)
        })
        .collect()
}

/// Values of inferable slots never mentioned, not even approximately, up to
/// their turn. Informational.
pub fn detect_inferred_slot(dialogue: &Dialogue, cfg: &LintConfig) -> Vec<Finding> {
    unsupported(dialogue)
        .filter(|i| cfg.inferable_slots.contains(&i.slot))
        .filter(|i| closest_near_miss(dialogue, i, cfg.max_edit_distance).is_none())
        .map(|i| {
            let e = Evidence::Unmentioned { value: i.value.clone() };
            finding(FindingKind::InferredSlot, dialogue, i.turn, Some(&i.slot), e)
        })
        .collect()
}

/// Mention at turn `t`, annotation only at a later turn without a mention
/// in between or at the annotated turn. Reported at the mention.
pub fn detect_delayed_annotation(dialogue: &Dialogue, _cfg: &LintConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    for intro in introductions(dialogue) {
        if intro.turn == 0 || intro.is_range_change() || mentioned_at(dialogue, intro.turn, &intro.value) {
            continue;
        }
        let Some(t) = (0..intro.turn).rev().find(|&t| mentioned_at(dialogue, t, &intro.value)) else {
            continue;
        };
        if (t..intro.turn).any(|k| dialogue.turns[k].state.contains(&intro.slot)) {
            continue;
        }
        let e = Evidence::Delayed {
            value: intro.value.clone(),
            annotated_at: intro.turn,
        };
        out.push(finding(FindingKind::DelayedAnnotation, dialogue, t, Some(&intro.slot), e));
    }
    out
}

/// Domains with at least one slot in some state of the dialogue.
fn active_domains(dialogue: &Dialogue) -> BTreeSet<&str> {
    dialogue
        .turns
        .iter()
        .flat_map(|t| t.state.iter().map(|(s, _)| s.domain()))
        .collect()
}

/// Ontology values mentioned but never annotated.
///
/// Only values that belong to exactly one slot of a domain active in the
/// dialogue are considered, and only their first mention is reported. The
/// value must not be in any state from the mention on, and the slot must be
/// absent from all of those states.
pub fn detect_missing_slot(dialogue: &Dialogue, ontology: &Ontology, cfg: &LintConfig) -> Vec<Finding> {
    let active = active_domains(dialogue);
    let mut owners: HashMap<&str, Vec<&SlotId>> = HashMap::new();
    for (slot, value) in ontology.slot_values() {
        if active.contains(slot.domain()) {
            owners.entry(value).or_default().push(slot);
        }
    }
    let candidates: Vec<(&SlotId, &str)> = owners
        .iter()
        .filter(|(_, slots)| slots.len() == 1)
        .map(|(value, slots)| (slots[0], *value))
        .collect();
    let mut reported = BTreeSet::new();
    let mut out = Vec::new();
    for turn in &dialogue.turns {
        let later = &dialogue.turns[turn.index..];
        for (speaker, text) in turn.utterances() {
            let spans = detect_value_spans(text, candidates.iter().copied());
            for span in &spans {
                if reported.contains(&(span.slot.clone(), span.value.clone())) {
                    continue;
                }
                let annotated = later.iter().any(|t| {
                    t.state.contains(&span.slot) || t.state.regular_values().any(|(_, v)| v == span.value)
                });
                if annotated {
                    continue;
                }
                if cfg.missing_slot == MissingSlotRule::Contextual {
                    let proposed = speaker == Speaker::Agent && spans.len() == 1;
                    let asks = turn.user.trim_end().ends_with(['?', '？']);
                    if !(proposed && asks) {
                        continue;
                    }
                }
                reported.insert((span.slot.clone(), span.value.clone()));
                let e = Evidence::Unannotated {
                    value: span.value.clone(),
                    speaker,
                };
                out.push(finding(FindingKind::MissingSlot, dialogue, turn.index, Some(&span.slot), e));
            }
        }
    }
    out
}

/// Non-final turns whose state is empty right after a non-empty one.
pub fn detect_empty_annotation(dialogue: &Dialogue, _cfg: &LintConfig) -> Vec<Finding> {
    let last = dialogue.turns.len().saturating_sub(1);
    dialogue
        .turns
        .windows(2)
        .filter(|w| w[1].index != last && w[1].state.is_empty() && !w[0].state.is_empty())
        .map(|w| {
            let e = Evidence::Reset { dropped: w[0].state.len() };
            finding(FindingKind::EmptyAnnotation, dialogue, w[1].index, None, e)
        })
        .collect()
}

/// Range changes not explained by expanding the old range with a figure
/// from the agent utterance of the same turn. A new range stated verbatim in
/// the turn is taken as asked for and not reported.
pub fn detect_range_anomaly(dialogue: &Dialogue, _cfg: &LintConfig) -> Vec<Finding> {
    let mut out = Vec::new();
    for intro in introductions(dialogue).into_iter().filter(Introduction::is_range_change) {
        let previous = intro.previous.as_ref().and_then(SlotValue::as_regular).expect("range change");
        let (old, new) = (
            NumericRange::parse(previous).expect("range change"),
            NumericRange::parse(&intro.value).expect("range change"),
        );
        if old == new || mentioned_at(dialogue, intro.turn, &intro.value) {
            continue;
        }
        let figures = integers(&dialogue.turns[intro.turn].agent);
        if figures.iter().any(|&n| expand_range(old, n) == new) {
            continue;
        }
        let e = Evidence::Range {
            previous: old.to_string(),
            current: new.to_string(),
            figures,
        };
        out.push(finding(FindingKind::RangeAnomaly, dialogue, intro.turn, Some(&intro.slot), e));
    }
    out
}

/// All detectors on one dialogue, in a fixed order. A delayed annotation
/// claims its `(turn, slot)` before the missing-slot detector.
pub fn lint_dialogue(dialogue: &Dialogue, ontology: &Ontology, cfg: &LintConfig) -> Vec<Finding> {
    let mut findings = detect_delayed_annotation(dialogue, cfg);
    let claimed: BTreeSet<(usize, Option<SlotId>)> =
        findings.iter().map(|f| (f.turn, f.slot.clone())).collect();
    findings.extend(
        detect_missing_slot(dialogue, ontology, cfg)
            .into_iter()
            .filter(|f| !claimed.contains(&(f.turn, f.slot.clone()))),
    );
    findings.extend(detect_inexact_match(dialogue, cfg));
    findings.extend(detect_extra_slot(dialogue, cfg));
    findings.extend(detect_empty_annotation(dialogue, cfg));
    findings.extend(detect_range_anomaly(dialogue, cfg));
    findings.extend(detect_inferred_slot(dialogue, cfg));
    findings.sort_by(|a, b| {
        (a.turn, a.kind, &a.slot).cmp(&(b.turn, b.kind, &b.slot))
    });
    findings
}

// ---------------------------------------------------------------------------
// Corpus statistics

/// How often a slot's values are said versus left to inference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferredSlotStat {
    pub slot: SlotId,
    /// Distinct `(dialogue, value)` pairs.
    pub values: usize,
    pub verbatim: usize,
    pub inferred: usize,
    pub verbatim_share: f64,
    pub inferred_share: f64,
}

/// Of the values of a slot that the agent mentions, how many the state
/// picks up at that turn or later.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UptakeStat {
    pub slot: SlotId,
    pub agent_mentions: usize,
    pub taken_up: usize,
    pub uptake: f64,
}

pub fn inferred_slot_stats(corpus: &Corpus) -> Vec<InferredSlotStat> {
    let mut counts: BTreeMap<SlotId, (usize, usize)> = BTreeMap::new();
    for dialogue in &corpus.dialogues {
        let mut seen = BTreeSet::new();
        for turn in &dialogue.turns {
            for (slot, value) in turn.state.regular_values() {
                if !seen.insert((slot.clone(), value.to_string())) {
                    continue;
                }
                let said = (0..dialogue.turns.len()).any(|t| mentioned_at(dialogue, t, value));
                let entry = counts.entry(slot.clone()).or_default();
                entry.0 += 1;
                if said {
                    entry.1 += 1;
                }
            }
        }
    }
    counts
        .into_iter()
        .map(|(slot, (values, verbatim))| {
            let inferred = values - verbatim;
            InferredSlotStat {
                slot,
                values,
                verbatim,
                inferred,
                verbatim_share: verbatim as f64 / values as f64,
                inferred_share: inferred as f64 / values as f64,
            }
        })
        .collect()
}

pub fn agent_uptake(corpus: &Corpus) -> Vec<UptakeStat> {
    let mut counts: BTreeMap<SlotId, (usize, usize)> = BTreeMap::new();
    let pairs: Vec<(&SlotId, &str)> = corpus.ontology.slot_values().collect();
    for dialogue in &corpus.dialogues {
        let active = active_domains(dialogue);
        let candidates: Vec<(&SlotId, &str)> = pairs
            .iter()
            .copied()
            .filter(|(s, _)| active.contains(s.domain()))
            .collect();
        for turn in &dialogue.turns {
            for span in detect_value_spans(&turn.agent, candidates.iter().copied()) {
                let taken = dialogue.turns[turn.index..]
                    .iter()
                    .any(|t| t.state.get(&span.slot).and_then(SlotValue::as_regular) == Some(&span.value));
                let entry = counts.entry(span.slot).or_default();
                entry.0 += 1;
                if taken {
                    entry.1 += 1;
                }
            }
        }
    }
    counts
        .into_iter()
        .map(|(slot, (agent_mentions, taken_up))| UptakeStat {
            slot,
            agent_mentions,
            taken_up,
            uptake: taken_up as f64 / agent_mentions as f64,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Corpus report

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct TurnRef {
    pub dialogue: String,
    pub turn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LintReport {
    pub findings: Vec<Finding>,
    pub counts: BTreeMap<FindingKind, usize>,
    pub inspected_turns: usize,
    pub flagged_turns: usize,
    /// Flagged over inspected turns, informational kinds excluded.
    pub rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<Vec<TurnRef>>,
    pub inferred_slots: Vec<InferredSlotStat>,
    pub agent_uptake: Vec<UptakeStat>,
}

fn lint_dialogues(corpus: &Corpus, cfg: &LintConfig) -> Vec<Finding> {
    let dialogues = &corpus.dialogues;
    let workers = cfg.jobs.clamp(1, dialogues.len().max(1));
    if workers == 1 {
        return dialogues
            .iter()
            .flat_map(|d| lint_dialogue(d, &corpus.ontology, cfg))
            .collect();
    }
    let chunk = dialogues.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = dialogues
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .flat_map(|d| lint_dialogue(d, &corpus.ontology, cfg))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("lint worker panicked"))
            .collect()
    })
}

/// Draw `k` distinct turns of the corpus, sorted in corpus order.
pub fn sample_turns(corpus: &Corpus, k: usize, seed: u64) -> Vec<TurnRef> {
    let all: Vec<TurnRef> = corpus
        .dialogues
        .iter()
        .flat_map(|d| {
            d.turns.iter().map(|t| TurnRef {
                dialogue: d.id.clone(),
                turn: t.index,
            })
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, all.len(), k.min(all.len())).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| all[i].clone()).collect()
}

pub fn lint_corpus(corpus: &Corpus, cfg: &LintConfig) -> Result<LintReport, LintConfigError> {
    cfg.validate()?;
    let mut findings = lint_dialogues(corpus, cfg);
    let sample = cfg.sample_size.map(|k| sample_turns(corpus, k, cfg.seed));
    let inspected_turns = match &sample {
        Some(sample) => {
            let keep: BTreeSet<(&str, usize)> =
                sample.iter().map(|r| (r.dialogue.as_str(), r.turn)).collect();
            findings.retain(|f| keep.contains(&(f.dialogue.as_str(), f.turn)));
            sample.len()
        }
        None => corpus.turn_count(),
    };
    let flagged: BTreeSet<(&str, usize)> = findings
        .iter()
        .filter(|f| !f.kind.is_informational())
        .map(|f| (f.dialogue.as_str(), f.turn))
        .collect();
    let flagged_turns = flagged.len();
    let mut counts: BTreeMap<FindingKind, usize> = FindingKind::ALL.iter().map(|k| (*k, 0)).collect();
    for f in &findings {
        *counts.get_mut(&f.kind).expect("all kinds listed") += 1;
    }
    Ok(LintReport {
        counts,
        inspected_turns,
        flagged_turns,
        rate: if inspected_turns == 0 {
            0.0
        } else {
            flagged_turns as f64 / inspected_turns as f64
        },
        sample,
        inferred_slots: inferred_slot_stats(corpus),
        agent_uptake: agent_uptake(corpus),
        findings,
    })
}

impl fmt::Display for LintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (kind, count) in &self.counts {
            writeln!(f, "{:<20}{:>8}", kind.to_string(), count)?;
        }
        writeln!(f, "{:<20}{:>8}", "Inspected turns", self.inspected_turns)?;
        writeln!(f, "{:<20}{:>8}", "Flagged turns", self.flagged_turns)?;
        write!(f, "{:<20}{:>7.1}%", "Misannotation rate", 100.0 * self.rate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Split;
    use crate::ontology::SlotSpec;

    fn sid(d: &str, s: &str) -> SlotId {
        SlotId::new(d, s).unwrap()
    }

    fn state(pairs: &[(&str, &str, &str)]) -> BeliefState {
        pairs
            .iter()
            .map(|(d, s, v)| (sid(d, s), SlotValue::from_annotation(v).unwrap()))
            .collect()
    }

    type Triple<'a> = (&'a str, &'a str, &'a str);

    fn dialogue(turns: &[(&str, &str, &[Triple])]) -> Dialogue {
        Dialogue::new(
            "d",
            "en",
            turns
                .iter()
                .map(|(a, u, s)| (a.to_string(), u.to_string(), state(s))),
        )
    }

    fn kinds(findings: &[Finding]) -> Vec<(FindingKind, usize)> {
        findings.iter().map(|f| (f.kind, f.turn)).collect()
    }

    #[test]
    fn inexact_match_from_the_appendix() {
        let d = dialogue(&[("", "狐狸家手工酸奶酪", &[("restaurant", "name", "狐狸家手工奶酪")])]);
        let cfg = LintConfig::default();
        let found = detect_inexact_match(&d, &cfg);
        assert_eq!(kinds(&found), vec![(FindingKind::InexactMatch, 0)]);
        match &found[0].evidence {
            Evidence::NearMiss { near_miss, distance, .. } => {
                assert_eq!(near_miss, "狐狸家手工酸奶酪");
                assert_eq!(*distance, 1);
            }
            other => panic!("{other:?}"),
        }
        assert!(detect_extra_slot(&d, &cfg).is_empty());
    }

    #[test]
    fn kettle_s_yard_is_inexact() {
        let d = dialogue(&[("", "an attraction called kettle s yard", &[("attraction", "name", "kettles yard")])]);
        assert_eq!(detect_inexact_match(&d, &LintConfig::default()).len(), 1);
        let exact = dialogue(&[("", "kettles yard please", &[("attraction", "name", "kettles yard")])]);
        assert!(detect_inexact_match(&exact, &LintConfig::default()).is_empty());
    }

    #[test]
    fn distance_two_needs_a_larger_cap() {
        let d = dialogue(&[("", "the abcxyfg place", &[("a", "b", "abcdefg")])]);
        assert!(detect_inexact_match(&d, &LintConfig::default()).is_empty());
        assert_eq!(detect_extra_slot(&d, &LintConfig::default()).len(), 1);
        let cfg = LintConfig { max_edit_distance: 2, ..Default::default() };
        assert_eq!(detect_inexact_match(&d, &cfg).len(), 1);
    }

    #[test]
    fn extra_slot_and_inferable_exemption() {
        let d = dialogue(&[("", "somewhere with hotpot", &[("restaurant", "food", "hotpot"), ("attraction", "area", "west")])]);
        let cfg = LintConfig::default();
        let extra = detect_extra_slot(&d, &cfg);
        assert_eq!(extra.len(), 1);
        assert_eq!(extra[0].slot, Some(sid("attraction", "area")));

        let d = dialogue(&[("", "any hotpot place", &[("restaurant", "food", "hotpot"), ("restaurant", "price", "moderate")])]);
        let cfg = LintConfig {
            inferable_slots: [sid("restaurant", "price")].into(),
            ..Default::default()
        };
        assert!(detect_extra_slot(&d, &cfg).is_empty());
        assert_eq!(detect_inferred_slot(&d, &cfg).len(), 1);
        let agent_only = dialogue(&[("the west is nice", "ok", &[("attraction", "area", "west")])]);
        assert!(detect_extra_slot(&agent_only, &LintConfig::default()).is_empty());
        let dontcare = dialogue(&[("", "any area", &[("attraction", "area", "dontcare")])]);
        assert!(detect_extra_slot(&dontcare, &LintConfig::default()).is_empty());
    }

    #[test]
    fn delayed_annotation() {
        let people = ("train", "book people", "6");
        let d = dialogue(&[
            ("", "book it for 6 people", &[]),
            ("sure", "thanks", &[people]),
        ]);
        let found = detect_delayed_annotation(&d, &LintConfig::default());
        assert_eq!(kinds(&found), vec![(FindingKind::DelayedAnnotation, 0)]);
        let immediate = dialogue(&[("", "book it for 6 people", &[people])]);
        assert!(detect_delayed_annotation(&immediate, &LintConfig::default()).is_empty());
        let repeated = dialogue(&[
            ("", "book it for 6 people", &[]),
            ("sure", "yes 6 people", &[people]),
        ]);
        assert!(detect_delayed_annotation(&repeated, &LintConfig::default()).is_empty());
    }

    fn ontology() -> Ontology {
        Ontology::new(
            vec!["restaurant".into(), "attraction".into()],
            vec![
                SlotSpec { domain: "restaurant".into(), slot: "name".into(), values: vec!["鑫花溪牛肉米粉".into(), "other".into()] },
                SlotSpec { domain: "restaurant".into(), slot: "food".into(), values: vec!["米粉".into()] },
                SlotSpec { domain: "attraction".into(), slot: "area".into(), values: vec!["west".into()] },
            ],
        )
        .unwrap()
    }

    #[test]
    fn missing_slot() {
        let food = ("restaurant", "food", "米粉");
        let d = dialogue(&[
            ("", "想吃米粉", &[food]),
            ("推荐您去鑫花溪牛肉米粉", "地址是什么？", &[food]),
            ("在中山路", "谢谢", &[food]),
        ]);
        for rule in [MissingSlotRule::Conservative, MissingSlotRule::Contextual] {
            let cfg = LintConfig { missing_slot: rule, ..Default::default() };
            let found = detect_missing_slot(&d, &ontology(), &cfg);
            assert_eq!(kinds(&found), vec![(FindingKind::MissingSlot, 1)], "{rule:?}");
            assert_eq!(found[0].slot, Some(sid("restaurant", "name")));
        }
        let noted = dialogue(&[
            ("", "想吃米粉", &[food]),
            ("推荐您去鑫花溪牛肉米粉", "好", &[food, ("restaurant", "name", "鑫花溪牛肉米粉")]),
        ]);
        assert!(detect_missing_slot(&noted, &ontology(), &LintConfig::default()).is_empty());
        let no_question = dialogue(&[
            ("", "想吃米粉", &[food]),
            ("推荐您去鑫花溪牛肉米粉", "好的", &[food]),
        ]);
        let cfg = LintConfig { missing_slot: MissingSlotRule::Contextual, ..Default::default() };
        assert!(detect_missing_slot(&no_question, &ontology(), &cfg).is_empty());
    }

    #[test]
    fn delayed_wins_over_missing() {
        let food = ("restaurant", "food", "米粉");
        let d = dialogue(&[
            ("", "想吃米粉", &[food]),
            ("推荐您去鑫花溪牛肉米粉", "地址？", &[food]),
            ("在中山路", "好", &[food]),
            ("还要什么", "没了", &[food, ("restaurant", "name", "鑫花溪牛肉米粉")]),
        ]);
        let found = lint_dialogue(&d, &ontology(), &LintConfig::default());
        assert_eq!(kinds(&found), vec![(FindingKind::DelayedAnnotation, 1)]);
    }

    #[test]
    fn empty_annotation() {
        let a = ("hotel", "area", "north");
        let reset = dialogue(&[("", "north", &[a]), ("ok", "and", &[]), ("ok", "north", &[a]), ("bye", "bye", &[])]);
        let found = detect_empty_annotation(&reset, &LintConfig::default());
        assert_eq!(kinds(&found), vec![(FindingKind::EmptyAnnotation, 1)]);
        let blank = dialogue(&[("", "hi", &[]), ("ok", "bye", &[])]);
        assert!(detect_empty_annotation(&blank, &LintConfig::default()).is_empty());
    }

    #[test]
    fn range_expansion_from_the_appendix() {
        let cost = |v| [("restaurant", "cost", v)];
        let (a, b, c) = (cost("100-150"), cost("80-150"), cost("90-150"));
        let expanded = dialogue(&[("", "100-150元", &a), ("人均消费是83元", "好", &b)]);
        assert!(detect_range_anomaly(&expanded, &LintConfig::default()).is_empty());
        let wrong = dialogue(&[("", "100-150元", &a), ("人均消费是83元", "好", &c)]);
        assert_eq!(kinds(&detect_range_anomaly(&wrong, &LintConfig::default())), vec![(FindingKind::RangeAnomaly, 1)]);
        let same = dialogue(&[("", "100-150元", &a), ("人均消费是83元", "好", &a)]);
        assert!(detect_range_anomaly(&same, &LintConfig::default()).is_empty());
        // the range change is neither extra nor inexact
        assert!(lint_dialogue(&expanded, &Ontology::default(), &LintConfig::default()).is_empty());
    }

    #[test]
    fn ranges_match_loosely() {
        assert!(mentions("between 100 - 150 yuan", "100-150"));
        assert!(!mentions("between 1100 - 150 yuan", "100-150"));
        assert!(mentions("大约 100至150 元", "100-150"));
        assert!(!mentions("100-1500", "100-150"));
        assert!(!mentions("16 people", "6"));
    }

    #[test]
    fn stats_shares_sum_to_one() {
        let d = dialogue(&[("", "hotpot", &[("restaurant", "food", "hotpot"), ("restaurant", "price", "moderate")])]);
        let corpus = Corpus::new(Split::Train, Ontology::default(), vec![d]);
        let stats = inferred_slot_stats(&corpus);
        assert_eq!(stats.len(), 2);
        for s in &stats {
            assert!((s.verbatim_share + s.inferred_share - 1.0).abs() < 1e-12);
        }
        assert_eq!(stats[1].inferred, 1);
    }

    #[test]
    fn sampling_is_seeded() {
        let d = dialogue(&[("", "a", &[]), ("b", "c", &[]), ("d", "e", &[])]);
        let corpus = Corpus::new(Split::Train, Ontology::default(), vec![d]);
        let cfg = LintConfig { sample_size: Some(2), seed: 7, ..Default::default() };
        let a = lint_corpus(&corpus, &cfg).unwrap();
        let b = lint_corpus(&corpus, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.inspected_turns, 2);
        assert_eq!(sample_turns(&corpus, 10, 1).len(), 3);
        let bad = LintConfig { max_edit_distance: 0, ..Default::default() };
        assert!(lint_corpus(&corpus, &bad).is_err());
    }
}
