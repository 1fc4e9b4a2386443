//! Translation of dialogues with entity alignment.
//!
//! Each utterance goes through quote stripping and sentence splitting, and
//! every sentence is sent to an external translator. Gold values found in
//! the source are located in the output, by the numeric heuristics when they
//! apply and by cross-attention otherwise, and replaced with the value the
//! dialogue's [`SubstitutionPlan`] picked from the target ontology. Gold
//! states are rewritten through the same plan, so annotations and utterances
//! keep agreeing after translation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{
    align_span, detect_value_spans, find_verbatim, split_sentences, strip_quotes,
    AlignmentConfig, AlignmentError, AttentionMatrix, CharSpan, ConfigError, DatePatterns,
    TokenOffsets,
};
pub use crate::ingest::Speaker;
use crate::ingest::{Corpus, CorpusIssue, Dialogue, Turn};
use crate::ontology::Ontology;
use crate::state::{diff_states, BeliefState, SlotId, SlotIdError, SlotValue};
use crate::wire::{HttpEndpoint, JsonLineProcess, TransportError, TRANSLATE_PROTOCOL};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslatorRequest {
    pub id: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatorResponse {
    pub id: String,
    pub translation: String,
    pub src_token_offsets: Vec<(usize, usize)>,
    pub tgt_token_offsets: Vec<(usize, usize)>,
    /// Row-major, one row per target token.
    pub attention: Vec<Vec<f64>>,
}

/// Anything that answers translation requests.
pub trait Translator {
    fn translate(&mut self, request: &TranslatorRequest)
        -> Result<TranslatorResponse, TransportError>;
}

/// Translator running as a child process.
pub struct ProcessTranslator(JsonLineProcess);

impl ProcessTranslator {
    pub fn spawn(command: &str) -> Result<Self, TransportError> {
        JsonLineProcess::spawn(command, TRANSLATE_PROTOCOL).map(ProcessTranslator)
    }
}

impl Translator for ProcessTranslator {
    fn translate(
        &mut self,
        request: &TranslatorRequest,
    ) -> Result<TranslatorResponse, TransportError> {
        self.0.call(request)
    }
}

pub struct HttpTranslator(HttpEndpoint);

impl HttpTranslator {
    pub fn new(url: &str) -> Self {
        HttpTranslator(HttpEndpoint::new(url))
    }
}

impl Translator for HttpTranslator {
    fn translate(
        &mut self,
        request: &TranslatorRequest,
    ) -> Result<TranslatorResponse, TransportError> {
        self.0.call(request)
    }
}

// ---------------------------------------------------------------------------
// Mock translator

/// Word table for the mock translator.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Source word to target word. Unlisted words are copied.
    pub words: BTreeMap<String, String>,
    /// Source words that belong to entity names. The noisy mock mistranslates
    /// them unless they are quote-marked.
    #[serde(default)]
    pub entities: BTreeSet<String>,
}

impl Lexicon {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Input {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Input {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reorder {
    Identity,
    Reverse,
    /// Identity or reversal, chosen from a hash of the seed and the text.
    #[default]
    Seeded,
}

/// Deterministic stand-in for a neural translator: whitespace tokens are
/// mapped through a [`Lexicon`] and reordered, and the attention it reports
/// is the exact one-hot alignment.
#[derive(Debug, Clone, Default)]
pub struct MockTranslator {
    pub lexicon: Lexicon,
    pub noisy: bool,
    pub reorder: Reorder,
    pub seed: u64,
}

/// Mistranslation used by the noisy mock.
pub fn drift(word: &str) -> String {
    let reversed: String = word.chars().rev().collect();
    if reversed == word {
        format!("{word}x")
    } else {
        reversed
    }
}

impl MockTranslator {
    pub fn respond(&self, request: &TranslatorRequest) -> TranslatorResponse {
        let text = &request.text;
        let src = TokenOffsets::whitespace(text);
        // tokens between a pair of `"` marks are protected from noise
        let mut marked = false;
        let mut words = Vec::with_capacity(src.len());
        for &(s, e) in src.spans() {
            let token = &text[s..e];
            let core = token.trim_matches('"');
            if core.is_empty() {
                marked = !marked;
                words.push(token.to_string());
                continue;
            }
            let lead = token.len() - token.trim_start_matches('"').len();
            let trail = token.len() - token.trim_end_matches('"').len();
            let protected = marked || lead > 0;
            let mut out = self.lexicon.words.get(core).cloned().unwrap_or_else(|| core.to_string());
            if self.noisy && !protected && self.lexicon.entities.contains(core) {
                out = drift(&out);
            }
            words.push(format!("{}{out}{}", &token[..lead], &token[token.len() - trail..]));
            if lead > 0 {
                marked = true;
            }
            if trail > 0 {
                marked = false;
            }
        }
        let reverse = match self.reorder {
            Reorder::Identity => false,
            Reorder::Reverse => true,
            Reorder::Seeded => stable_hash(self.seed, text) & 1 == 1,
        };
        let order: Vec<usize> = if reverse {
            (0..words.len()).rev().collect()
        } else {
            (0..words.len()).collect()
        };
        let mut translation = String::new();
        let mut tgt_offsets = Vec::with_capacity(order.len());
        let mut attention = Vec::with_capacity(order.len());
        for &source_index in &order {
            if !translation.is_empty() {
                translation.push(' ');
            }
            let start = translation.len();
            translation.push_str(&words[source_index]);
            tgt_offsets.push((start, translation.len()));
            let mut row = vec![0.0; words.len()];
            row[source_index] = 1.0;
            attention.push(row);
        }
        TranslatorResponse {
            id: request.id.clone(),
            translation,
            src_token_offsets: src.spans().to_vec(),
            tgt_token_offsets: tgt_offsets,
            attention,
        }
    }
}

impl Translator for MockTranslator {
    fn translate(
        &mut self,
        request: &TranslatorRequest,
    ) -> Result<TranslatorResponse, TransportError> {
        Ok(self.respond(request))
    }
}

/// FNV-1a over the seed bytes and the text.
pub fn stable_hash(seed: u64, text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in seed.to_le_bytes().iter().chain(text.as_bytes()) {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

// ---------------------------------------------------------------------------
// Dependency dictionary and substitution plans

/// One value with its rendering in the target language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictValue {
    pub domain: String,
    pub slot: String,
    pub value: String,
    pub target: String,
}

impl DictValue {
    pub fn slot_id(&self) -> Result<SlotId, SlotIdError> {
        SlotId::new(self.domain.as_str(), self.slot.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictEntry {
    pub trigger: DictValue,
    pub consequents: Vec<DictValue>,
}

/// Jointly translated slot values: when the trigger occurs in a dialogue,
/// the trigger and its consequents take the listed renderings, so a value
/// like `fast food` keeps its `cheap` price range after translation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyDictionary {
    pub entries: Vec<DictEntry>,
}

impl DependencyDictionary {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let input = |message: String| PipelineError::Input {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| input(e.to_string()))?;
        let dict: Self = serde_json::from_str(&text).map_err(|e| input(e.to_string()))?;
        for value in dict.values() {
            value.slot_id().map_err(|e| input(e.to_string()))?;
        }
        Ok(dict)
    }

    fn values(&self) -> impl Iterator<Item = &DictValue> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::once(&e.trigger).chain(&e.consequents))
    }

    /// Every listed value must be legal in the respective ontology.
    pub fn validate(&self, source: &Ontology, target: &Ontology) -> Vec<String> {
        let mut problems = Vec::new();
        for v in self.values() {
            let Ok(slot) = v.slot_id() else {
                problems.push(format!("bad slot name {} {}", v.domain, v.slot));
                continue;
            };
            if !source.is_legal(&slot, &SlotValue::regular(&v.value)) {
                problems.push(format!("{slot} = {:?} not in source ontology", v.value));
            }
            if !target.is_legal(&slot, &SlotValue::regular(&v.target)) {
                problems.push(format!("{slot} = {:?} not in target ontology", v.target));
            }
        }
        problems
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Only dictionary renderings; anything else is an error.
    Dictionary,
    /// Keep the source value; it must be legal in the target ontology.
    Identity,
    /// Draw uniformly from the target ontology's values for the slot.
    #[default]
    Random,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("no target rendering for value {value:?} of slot `{slot}` (not in dictionary or target ontology)")]
    Uncovered { slot: SlotId, value: String },
    #[error("dictionary renders {value:?} both as {first:?} and {second:?} in this dialogue")]
    Conflict {
        value: String,
        first: String,
        second: String,
    },
}

/// Per-dialogue choice of a target value for every source value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionPlan {
    pub seed: u64,
    pub strategy: Strategy,
    pub mapping: BTreeMap<String, String>,
}

impl SubstitutionPlan {
    pub fn target(&self, value: &str) -> Option<&str> {
        self.mapping.get(value).map(String::as_str)
    }
}

/// Regular `(slot, value)` pairs of a dialogue in order of first appearance.
pub fn dialogue_values(dialogue: &Dialogue) -> Vec<(SlotId, String)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for turn in &dialogue.turns {
        for (slot, value) in turn.state.regular_values() {
            if seen.insert((slot.clone(), value.to_string())) {
                out.push((slot.clone(), value.to_string()));
            }
        }
    }
    out
}

/// Seed for one dialogue, so runs in any order or parallelism agree.
pub fn dialogue_seed(seed: u64, dialogue_id: &str) -> u64 {
    stable_hash(seed, dialogue_id)
}

pub fn build_substitution_plan(
    dialogue: &Dialogue,
    dict: &DependencyDictionary,
    target_ontology: &Ontology,
    seed: u64,
    strategy: Strategy,
) -> Result<SubstitutionPlan, PlanError> {
    let values = dialogue_values(dialogue);
    let present: BTreeSet<(SlotId, String)> = values.iter().cloned().collect();
    let is_present = |v: &DictValue| {
        v.slot_id()
            .is_ok_and(|slot| present.contains(&(slot, crate::state::normalize_text(&v.value))))
    };

    let mut mapping: BTreeMap<String, String> = BTreeMap::new();
    // renderings forced by triggers present in this dialogue
    for entry in dict.entries.iter().filter(|e| is_present(&e.trigger)) {
        for v in std::iter::once(&entry.trigger).chain(&entry.consequents) {
            let value = crate::state::normalize_text(&v.value);
            let target = crate::state::normalize_text(&v.target);
            match mapping.get(&value) {
                Some(existing) if *existing != target => {
                    return Err(PlanError::Conflict {
                        value,
                        first: existing.clone(),
                        second: target,
                    })
                }
                _ => {
                    mapping.insert(value, target);
                }
            }
        }
    }
    // other dictionary-covered values, first listing wins
    for v in dict.values().filter(|v| is_present(v)) {
        mapping
            .entry(crate::state::normalize_text(&v.value))
            .or_insert_with(|| crate::state::normalize_text(&v.target));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(dialogue_seed(seed, &dialogue.id));
    let mut used: BTreeSet<String> = mapping.values().cloned().collect();
    for (slot, value) in &values {
        if mapping.contains_key(value) {
            continue;
        }
        let uncovered = || PlanError::Uncovered {
            slot: slot.clone(),
            value: value.clone(),
        };
        let target = match strategy {
            Strategy::Dictionary => return Err(uncovered()),
            Strategy::Identity => {
                if !target_ontology.is_legal(slot, &SlotValue::Regular(value.clone())) {
                    return Err(uncovered());
                }
                value.clone()
            }
            Strategy::Random => {
                let pool = target_ontology.values(slot).ok_or_else(uncovered)?;
                let fresh: Vec<&String> = pool.iter().filter(|v| !used.contains(*v)).collect();
                if fresh.is_empty() {
                    pool.choose(&mut rng).ok_or_else(uncovered)?.clone()
                } else {
                    (*fresh.choose(&mut rng).expect("non-empty")).clone()
                }
            }
        };
        used.insert(target.clone());
        mapping.insert(value.clone(), target);
    }
    Ok(SubstitutionPlan {
        seed,
        strategy,
        mapping,
    })
}

// ---------------------------------------------------------------------------
// Translating utterances and dialogues

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("translator transport failed: {0}")]
    Transport(#[from] TransportError),
    #[error("translator response {id}: {message}")]
    BadResponse { id: String, message: String },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("value {value:?} has no target in the substitution plan")]
    Unplanned { value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub src_lang: String,
    pub tgt_lang: String,
    pub align: AlignmentConfig,
    /// `false` translates utterances directly, without span preservation.
    pub alignment: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            src_lang: "en".into(),
            tgt_lang: "de".into(),
            align: AlignmentConfig::default(),
            alignment: true,
        }
    }
}

/// How each span was found in the translation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignTrace {
    pub numeric: usize,
    pub attention: usize,
    pub failed: usize,
}

impl AlignTrace {
    fn add(&mut self, other: AlignTrace) {
        self.numeric += other.numeric;
        self.attention += other.attention;
        self.failed += other.failed;
    }
}

/// Span that could not be placed in the translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignFailure {
    pub span: CharSpan,
    /// End of the translated sentence the span belonged to.
    pub insert_at: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceTranslation {
    pub text: String,
    /// Spans in `text`, in source order.
    pub spans: Vec<CharSpan>,
    pub failures: Vec<AlignFailure>,
    pub trace: AlignTrace,
}

fn checked_response(
    request: &TranslatorRequest,
    response: TranslatorResponse,
) -> Result<(TranslatorResponse, TokenOffsets, TokenOffsets, AttentionMatrix), PipelineError> {
    let bad = |message: String| PipelineError::BadResponse {
        id: request.id.clone(),
        message,
    };
    if response.id != request.id {
        return Err(bad(format!("id {:?} does not echo the request", response.id)));
    }
    let src = TokenOffsets::new(response.src_token_offsets.clone(), request.text.len())
        .map_err(|e| bad(format!("source offsets: {e}")))?;
    let tgt = TokenOffsets::new(response.tgt_token_offsets.clone(), response.translation.len())
        .map_err(|e| bad(format!("target offsets: {e}")))?;
    let boundaries = |text: &str, toks: &TokenOffsets| {
        toks.spans()
            .iter()
            .all(|&(s, e)| text.is_char_boundary(s) && text.is_char_boundary(e))
    };
    if !boundaries(&request.text, &src) || !boundaries(&response.translation, &tgt) {
        return Err(bad("offsets split a character".into()));
    }
    let attention = if response.attention.is_empty() && tgt.is_empty() {
        AttentionMatrix::from_rows(Vec::new()).expect("empty matrix")
    } else {
        AttentionMatrix::from_rows(response.attention.clone())
            .map_err(|e| bad(format!("attention: {e}")))?
    };
    if attention.rows() != tgt.len() || (attention.rows() > 0 && attention.cols() != src.len()) {
        return Err(bad(format!(
            "attention is {}x{} for {} target and {} source tokens",
            attention.rows(),
            attention.cols(),
            tgt.len(),
            src.len()
        )));
    }
    Ok((response, src, tgt, attention))
}

/// Translate one utterance sentence by sentence and locate `spans` in the
/// result.
///
/// Sentences are joined with single spaces. A span that cannot be located
/// is reported in `failures` together with the end of its sentence.
pub fn translate_utterance(
    utterance: &str,
    spans: &[CharSpan],
    client: &mut dyn Translator,
    cfg: &PipelineConfig,
    request_id: &str,
) -> Result<UtteranceTranslation, PipelineError> {
    let dates = DatePatterns::new(&cfg.align)?;
    let stripped = strip_quotes(utterance);
    let spans: Vec<CharSpan> = spans.iter().map(|s| stripped.map_span(s)).collect();
    let mut out = UtteranceTranslation {
        text: String::new(),
        spans: Vec::new(),
        failures: Vec::new(),
        trace: AlignTrace::default(),
    };
    let sentences = split_sentences(&stripped.text);
    let mut placed = vec![false; spans.len()];
    for (k, sentence) in sentences.iter().enumerate() {
        if sentence.text.is_empty() {
            continue;
        }
        let request = TranslatorRequest {
            id: format!("{request_id}/{k}"),
            src_lang: cfg.src_lang.clone(),
            tgt_lang: cfg.tgt_lang.clone(),
            text: sentence.text.to_string(),
        };
        let response = client.translate(&request)?;
        let (response, src, tgt, attention) = checked_response(&request, response)?;
        if !out.text.is_empty() {
            out.text.push(' ');
        }
        let base = out.text.len();
        out.text.push_str(&response.translation);
        let sentence_end = out.text.len();
        let lo = sentence.offset;
        let hi = sentence.offset + sentence.text.len();
        let mut taken: Vec<std::ops::Range<usize>> = Vec::new();
        for (i, span) in spans.iter().enumerate() {
            if span.start < lo || span.start >= hi {
                continue;
            }
            placed[i] = true;
            let fail = |reason: String| AlignFailure {
                span: span.clone(),
                insert_at: sentence_end,
                reason,
            };
            if span.end > hi {
                out.failures.push(fail("span crosses a sentence boundary".into()));
                continue;
            }
            let local = CharSpan {
                start: span.start - lo,
                end: span.end - lo,
                ..span.clone()
            };
            let numeric = cfg
                .align
                .numeric_heuristics
                .then(|| dates.recover(&span.value, &response.translation))
                .flatten();
            let (range, via_numeric) = match numeric {
                Some(range) => (range, true),
                None => match align_span(&local, &src, &tgt, &attention, &cfg.align) {
                    Ok(found) => (found.range(), false),
                    Err(e @ AlignmentError::ZeroMass { .. })
                    | Err(e @ AlignmentError::NoSourceTokens { .. }) => {
                        out.failures.push(fail(e.to_string()));
                        continue;
                    }
                    Err(e) => {
                        return Err(PipelineError::BadResponse {
                            id: request.id.clone(),
                            message: e.to_string(),
                        })
                    }
                },
            };
            if taken.iter().any(|t| t.start < range.end && range.start < t.end) {
                out.failures
                    .push(fail("aligned onto a span already taken".into()));
                continue;
            }
            taken.push(range.clone());
            if via_numeric {
                out.trace.numeric += 1;
            } else {
                out.trace.attention += 1;
            }
            out.spans.push(CharSpan {
                start: base + range.start,
                end: base + range.end,
                ..span.clone()
            });
        }
    }
    for (span, placed) in spans.iter().zip(placed) {
        if !placed {
            out.failures.push(AlignFailure {
                span: span.clone(),
                insert_at: out.text.len(),
                reason: "span lies outside every sentence".into(),
            });
        }
    }
    out.trace.failed = out.failures.len();
    Ok(out)
}

/// Something worth a look in a translated dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineFinding {
    pub dialogue: String,
    pub turn: usize,
    pub speaker: Speaker,
    pub slot: SlotId,
    pub value: String,
    pub reason: String,
}


#[derive(Debug, Clone, PartialEq)]
pub struct TranslatedDialogue {
    pub dialogue: Dialogue,
    pub trace: AlignTrace,
    pub findings: Vec<PipelineFinding>,
}

fn substitute(text: &str, translated: &UtteranceTranslation, plan: &SubstitutionPlan) -> Result<String, PipelineError> {
    enum Edit<'a> {
        Replace(std::ops::Range<usize>, &'a str),
        Insert(usize, &'a str),
    }
    let target = |value: &str| {
        plan.target(value).ok_or_else(|| PipelineError::Unplanned {
            value: value.to_string(),
        })
    };
    let mut edits = Vec::new();
    for span in &translated.spans {
        edits.push(Edit::Replace(span.range(), target(&span.value)?));
    }
    for failure in &translated.failures {
        edits.push(Edit::Insert(failure.insert_at, target(&failure.span.value)?));
    }
    let position = |e: &Edit| match e {
        Edit::Replace(r, _) => (r.start, 0),
        Edit::Insert(at, _) => (*at, 1),
    };
    edits.sort_by_key(|e| std::cmp::Reverse(position(e)));
    let mut out = text.to_string();
    for edit in edits {
        match edit {
            Edit::Replace(range, value) => out.replace_range(range, value),
            Edit::Insert(at, value) => out.insert_str(at, &format!(" {value}")),
        }
    }
    Ok(out)
}

fn rewrite_state(state: &BeliefState, plan: &SubstitutionPlan) -> Result<BeliefState, PipelineError> {
    state
        .iter()
        .map(|(slot, value)| match value {
            SlotValue::Regular(text) => plan
                .target(text)
                .map(|t| (slot.clone(), SlotValue::regular(t)))
                .ok_or_else(|| PipelineError::Unplanned { value: text.clone() }),
            SlotValue::DontCare => Ok((slot.clone(), SlotValue::DontCare)),
        })
        .collect()
}

/// Translate every turn of `dialogue` and rewrite its gold states through
/// `plan`.
pub fn translate_dialogue(
    dialogue: &Dialogue,
    client: &mut dyn Translator,
    plan: &SubstitutionPlan,
    cfg: &PipelineConfig,
) -> Result<TranslatedDialogue, PipelineError> {
    let inventory = dialogue_values(dialogue);
    let candidates: Vec<(&SlotId, &str)> =
        inventory.iter().map(|(s, v)| (s, v.as_str())).collect();
    let mut trace = AlignTrace::default();
    let mut findings = Vec::new();
    let mut turns = Vec::with_capacity(dialogue.turns.len());
    for turn in &dialogue.turns {
        let mut texts = [String::new(), String::new()];
        for (slot, (speaker, source)) in texts
            .iter_mut()
            .zip([(Speaker::Agent, &turn.agent), (Speaker::User, &turn.user)])
        {
            if source.trim().is_empty() {
                *slot = source.clone();
                continue;
            }
            let request_id = format!(
                "{}/{}/{}",
                dialogue.id,
                turn.index,
                if speaker == Speaker::Agent { "agent" } else { "user" }
            );
            if !cfg.alignment {
                let request = TranslatorRequest {
                    id: request_id,
                    src_lang: cfg.src_lang.clone(),
                    tgt_lang: cfg.tgt_lang.clone(),
                    text: source.clone(),
                };
                let response = client.translate(&request)?;
                let (response, ..) = checked_response(&request, response)?;
                *slot = response.translation;
                continue;
            }
            let spans = detect_value_spans(source, candidates.iter().copied());
            let translated = translate_utterance(source, &spans, client, cfg, &request_id)?;
            trace.add(translated.trace);
            for failure in &translated.failures {
                findings.push(PipelineFinding {
                    dialogue: dialogue.id.clone(),
                    turn: turn.index,
                    speaker,
                    slot: failure.span.slot.clone(),
                    value: failure.span.value.clone(),
                    reason: failure.reason.clone(),
                });
            }
            *slot = substitute(&translated.text, &translated, plan)?;
        }
        let [agent, user] = texts;
        turns.push(Turn {
            index: turn.index,
            agent,
            user,
            state: rewrite_state(&turn.state, plan)?,
        });
    }
    Ok(TranslatedDialogue {
        dialogue: Dialogue {
            id: dialogue.id.clone(),
            language: cfg.tgt_lang.clone(),
            turns,
        },
        trace,
        findings,
    })
}

/// Share of newly annotated regular values that occur verbatim in the
/// utterances of the turn that introduces them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Faithfulness {
    pub checked: usize,
    pub verbatim: usize,
}

impl Faithfulness {
    pub fn rate(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.verbatim as f64 / self.checked as f64
        }
    }
}

pub fn faithfulness(corpus: &Corpus) -> Faithfulness {
    let mut out = Faithfulness::default();
    for dialogue in &corpus.dialogues {
        let mut previous = BeliefState::new();
        for turn in &dialogue.turns {
            let delta = diff_states(&previous, &turn.state);
            for value in delta.set().values().filter_map(SlotValue::as_regular) {
                out.checked += 1;
                let found = !find_verbatim(&turn.agent, value).is_empty()
                    || !find_verbatim(&turn.user, value).is_empty();
                if found {
                    out.verbatim += 1;
                }
            }
            previous = turn.state.clone();
        }
    }
    out
}

/// Everything `translate_corpus` needs besides the corpus and the client.
#[derive(Debug, Clone)]
pub struct TranslationJob<'a> {
    pub dictionary: &'a DependencyDictionary,
    pub target_ontology: &'a Ontology,
    pub seed: u64,
    pub strategy: Strategy,
    pub config: PipelineConfig,
    /// Number of worker threads, each with its own client.
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct UntranslatedDialogue {
    pub dialogue: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct CorpusTranslation {
    pub corpus: Corpus,
    pub trace: AlignTrace,
    pub findings: Vec<PipelineFinding>,
    pub untranslated: Vec<UntranslatedDialogue>,
    pub issues: Vec<CorpusIssue>,
}

/// Translate a whole corpus. Dialogues are independent; each worker gets a
/// fresh client from `connect`. Output order and content do not depend on
/// the number of workers.
pub fn translate_corpus<F>(
    corpus: &Corpus,
    job: &TranslationJob<'_>,
    connect: F,
) -> Result<CorpusTranslation, PipelineError>
where
    F: Fn() -> Result<Box<dyn Translator + Send>, TransportError> + Sync,
{
    job.config.align.validate()?;
    let results: Vec<Mutex<Option<Result<TranslatedDialogue, String>>>> =
        corpus.dialogues.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = job.jobs.max(1).min(corpus.dialogues.len().max(1));
    let connect_error: Mutex<Option<TransportError>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut client: Option<Box<dyn Translator + Send>> = None;
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(dialogue) = corpus.dialogues.get(i) else {
                        break;
                    };
                    if client.is_none() {
                        match connect() {
                            Ok(c) => client = Some(c),
                            Err(e) => {
                                *results[i].lock().unwrap() = Some(Err(e.to_string()));
                                connect_error.lock().unwrap().get_or_insert(e);
                                continue;
                            }
                        }
                    }
                    let outcome = build_substitution_plan(
                        dialogue,
                        job.dictionary,
                        job.target_ontology,
                        job.seed,
                        job.strategy,
                    )
                    .map_err(PipelineError::from)
                    .and_then(|plan| {
                        translate_dialogue(
                            dialogue,
                            client.as_deref_mut().expect("connected"),
                            &plan,
                            &job.config,
                        )
                    });
                    if let Err(PipelineError::Transport(_)) = &outcome {
                        // reconnect for the next dialogue
                        client = None;
                    }
                    *results[i].lock().unwrap() = Some(outcome.map_err(|e| e.to_string()));
                }
            });
        }
    });
    let mut dialogues = Vec::new();
    let mut trace = AlignTrace::default();
    let mut findings = Vec::new();
    let mut untranslated = Vec::new();
    for (dialogue, result) in corpus.dialogues.iter().zip(results) {
        match result.into_inner().unwrap().expect("every dialogue processed") {
            Ok(done) => {
                trace.add(done.trace);
                findings.extend(done.findings);
                dialogues.push(done.dialogue);
            }
            Err(error) => untranslated.push(UntranslatedDialogue {
                dialogue: dialogue.id.clone(),
                error,
            }),
        }
    }
    let out = Corpus::new(corpus.split, job.target_ontology.clone(), dialogues);
    let issues = out.validate();
    Ok(CorpusTranslation {
        corpus: out,
        trace,
        findings,
        untranslated,
        issues,
    })
}
