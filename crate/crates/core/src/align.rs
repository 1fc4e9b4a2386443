//! Entity spans in utterances and their projection into translations.
//!
//! The pieces used by the translation pipeline:
//!
//! * [`detect_entity_spans`] finds gold values in an utterance,
//! * [`strip_quotes`] removes quotation marks before translation and keeps
//!   an offset table to map spans across the removal,
//! * [`split_sentences`] cuts an utterance into sentences translated one by
//!   one,
//! * [`align_span`] projects a source span onto target subwords using
//!   cross-attention,
//! * [`numeric_span_recover`] finds numbers, ranges, times and dates in the
//!   output directly, bypassing attention.

use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::state::{BeliefState, SlotId};

/// Byte span of a slot value inside a UTF-8 utterance.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
    pub slot: SlotId,
    pub value: String,
}

impl CharSpan {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn overlaps(&self, other: &Range<usize>) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignmentError {
    #[error("token span {index} ({start}..{end}) is out of order or out of bounds")]
    BadOffsets {
        index: usize,
        start: usize,
        end: usize,
    },
    #[error("attention is {rows}x{cols} but there are {tgt} target and {src} source tokens")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        tgt: usize,
        src: usize,
    },
    #[error("attention row {0} has no mass")]
    EmptyRow(usize),
    #[error("attention weight at ({row}, {col}) is negative or not finite")]
    BadWeight { row: usize, col: usize },
    #[error("ragged attention matrix")]
    Ragged,
    #[error("span {start}..{end} overlaps no source token")]
    NoSourceTokens { start: usize, end: usize },
    #[error("source tokens of span {start}..{end} receive no attention")]
    ZeroMass { start: usize, end: usize },
}

/// Per-subword byte spans of one text, in order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenOffsets(Vec<(usize, usize)>);

impl TokenOffsets {
    /// Spans must be ordered, non-overlapping and inside `text_len`.
    /// Zero-width spans (special tokens) are allowed.
    pub fn new(spans: Vec<(usize, usize)>, text_len: usize) -> Result<Self, AlignmentError> {
        let mut previous_end = 0;
        for (index, &(start, end)) in spans.iter().enumerate() {
            if start > end || start < previous_end || end > text_len {
                return Err(AlignmentError::BadOffsets { index, start, end });
            }
            previous_end = end;
        }
        Ok(TokenOffsets(spans))
    }

    /// Whitespace tokenization.
    pub fn whitespace(text: &str) -> Self {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    spans.push((s, i));
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push((s, text.len()));
        }
        TokenOffsets(spans)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.0
    }

    /// Indices of tokens overlapping `range`.
    pub fn overlapping(&self, range: &Range<usize>) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &(s, e))| s < range.end && range.start < e)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Cross-attention weights, one row per target subword and one column per
/// source subword.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMatrix {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl AttentionMatrix {
    /// Build from rows and normalize each row to sum to one.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, AlignmentError> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut weights = Vec::with_capacity(n_rows * n_cols);
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != n_cols {
                return Err(AlignmentError::Ragged);
            }
            if let Some(c) = row.iter().position(|w| !w.is_finite() || *w < 0.0) {
                return Err(AlignmentError::BadWeight { row: r, col: c });
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 && n_cols > 0 {
                return Err(AlignmentError::EmptyRow(r));
            }
            weights.extend(row.into_iter().map(|w| w / sum));
        }
        Ok(AttentionMatrix {
            rows: n_rows,
            cols: n_cols,
            weights,
        })
    }

    /// One-hot matrix where target token `j` attends to source token
    /// `source_of[j]`.
    pub fn one_hot(source_of: &[usize], cols: usize) -> Result<Self, AlignmentError> {
        let rows = source_of
            .iter()
            .map(|&s| {
                let mut row = vec![0.0; cols];
                if s < cols {
                    row[s] = 1.0;
                }
                row
            })
            .collect();
        Self::from_rows(rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.cols + col]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.cols.max(1)).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig {
    /// Target tokens adjacent to the best one are added to the span while
    /// their score is at least this fraction of the best score.
    pub extension_threshold: f64,
    pub numeric_heuristics: bool,
    /// Date regexes with named groups `m`, `d` and optionally `y`.
    pub date_patterns: Vec<String>,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        AlignmentConfig {
            extension_threshold: 0.5,
            numeric_heuristics: true,
            date_patterns: default_date_patterns(),
        }
    }
}

pub fn default_date_patterns() -> Vec<String> {
    vec![
        r"(?P<y>[0-9]{4})-(?P<m>[0-9]{1,2})-(?P<d>[0-9]{1,2})".to_string(),
        r"(?P<m>[0-9]{1,2})月(?P<d>[0-9]{1,2})日".to_string(),
    ]
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("extension threshold must be in (0, 1], got {0}")]
    Threshold(f64),
    #[error("bad date pattern `{pattern}`: {message}")]
    DatePattern { pattern: String, message: String },
}

impl AlignmentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let theta = self.extension_threshold;
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(ConfigError::Threshold(theta));
        }
        compile_dates(&self.date_patterns)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Verbatim matching

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric()
}

/// Byte ranges where `needle` occurs in `haystack`. A match may not cut an
/// ASCII word or number in half, so `6` does not match inside `16` and
/// `cheap` does not match inside `cheaper`. Scripts without spaces match as
/// plain substrings.
pub fn find_verbatim(haystack: &str, needle: &str) -> Vec<Range<usize>> {
    if needle.is_empty() {
        return Vec::new();
    }
    let first = needle.chars().next().unwrap();
    let last = needle.chars().next_back().unwrap();
    let mut found = Vec::new();
    for (start, _) in haystack.char_indices() {
        if !haystack[start..].starts_with(needle) {
            continue;
        }
        let end = start + needle.len();
        let before = haystack[..start].chars().next_back();
        let after = haystack[end..].chars().next();
        let cut_left = is_word_char(first) && before.is_some_and(is_word_char);
        let cut_right = is_word_char(last) && after.is_some_and(is_word_char);
        if !cut_left && !cut_right {
            found.push(start..end);
        }
    }
    found
}

pub fn occurs_verbatim(haystack: &str, needle: &str) -> bool {
    !find_verbatim(haystack, needle).is_empty()
}

/// Spans for the given `(slot, value)` candidates.
///
/// Values are NFC-normalized before matching; offsets refer to the
/// utterance as given, which should itself be NFC (the corpus loader
/// guarantees this). Overlaps are resolved longest match first, then
/// leftmost, then by slot order. The result is sorted by start.
pub fn detect_value_spans<'a>(
    utterance: &str,
    candidates: impl IntoIterator<Item = (&'a SlotId, &'a str)>,
) -> Vec<CharSpan> {
    let mut occurrences: Vec<CharSpan> = Vec::new();
    for (slot, value) in candidates {
        let value: String = value.nfc().collect::<String>().trim().to_string();
        for range in find_verbatim(utterance, &value) {
            occurrences.push(CharSpan {
                start: range.start,
                end: range.end,
                slot: slot.clone(),
                value: value.clone(),
            });
        }
    }
    occurrences.sort_by(|a, b| {
        let len = |s: &CharSpan| utterance[s.range()].chars().count();
        len(b)
            .cmp(&len(a))
            .then(a.start.cmp(&b.start))
            .then(a.slot.cmp(&b.slot))
    });
    let mut chosen: Vec<CharSpan> = Vec::new();
    for span in occurrences {
        if !chosen.iter().any(|c| c.overlaps(&span.range())) {
            chosen.push(span);
        }
    }
    chosen.sort_by_key(|s| s.start);
    chosen
}

/// Spans of the state's regular values in `utterance`.
pub fn detect_entity_spans(utterance: &str, state: &BeliefState) -> Vec<CharSpan> {
    detect_value_spans(utterance, state.regular_values())
}

// ---------------------------------------------------------------------------
// Sentences and quotes

/// A sentence of a larger text. `text` is trimmed; `raw` additionally holds
/// the surrounding whitespace so that the raw pieces tile the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence<'a> {
    pub text: &'a str,
    pub offset: usize,
    pub raw: Range<usize>,
}

const SENTENCE_ENDS: [char; 7] = ['.', '!', '?', '。', '！', '？', '；'];

/// Split after a sentence-final mark that is followed by whitespace or the
/// end of the text. Marks stay with their sentence.
pub fn split_sentences(text: &str) -> Vec<Sentence<'_>> {
    let mut cuts = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !SENTENCE_ENDS.contains(&c) {
            continue;
        }
        let end = i + c.len_utf8();
        match chars.peek() {
            None => {}
            Some(&(_, next)) if next.is_whitespace() => {
                // the piece keeps its trailing whitespace
                let mut cut = end;
                while let Some(&(j, w)) = chars.peek() {
                    if !w.is_whitespace() {
                        break;
                    }
                    cut = j + w.len_utf8();
                    chars.next();
                }
                if cut < text.len() {
                    cuts.push(cut);
                }
            }
            _ => {}
        }
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    for cut in cuts.into_iter().chain(std::iter::once(text.len())) {
        if cut > start || (start == 0 && !text.is_empty()) {
            let raw = start..cut;
            let slice = &text[raw.clone()];
            let lead = slice.len() - slice.trim_start().len();
            let body = slice.trim();
            pieces.push(Sentence {
                text: body,
                offset: start + lead,
                raw,
            });
        }
        start = cut;
    }
    pieces
}

const QUOTES: [char; 7] = ['"', '“', '”', '‘', '’', '「', '」'];

/// Text with quotation marks removed, plus the offset table to map between
/// the cleaned and the original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrippedText {
    pub text: String,
    /// Original byte offset and the removed mark, in order.
    pub removed: Vec<(usize, char)>,
}

impl StrippedText {
    /// Original offset of cleaned offset `offset`.
    pub fn to_original(&self, offset: usize) -> usize {
        let mut original = offset;
        for &(at, mark) in &self.removed {
            if at <= original {
                original += mark.len_utf8();
            } else {
                break;
            }
        }
        original
    }

    /// Cleaned offset of original offset `offset`. Offsets inside a removed
    /// mark map to the position where it was.
    pub fn from_original(&self, offset: usize) -> usize {
        let mut shift = 0;
        for &(at, mark) in &self.removed {
            if at + mark.len_utf8() <= offset {
                shift += mark.len_utf8();
            } else if at < offset {
                shift += offset - at;
            } else {
                break;
            }
        }
        offset - shift
    }

    /// Move a span of the original text into the cleaned text.
    pub fn map_span(&self, span: &CharSpan) -> CharSpan {
        CharSpan {
            start: self.from_original(span.start),
            end: self.from_original(span.end),
            ..span.clone()
        }
    }
}

pub fn strip_quotes(text: &str) -> StrippedText {
    let mut cleaned = String::with_capacity(text.len());
    let mut removed = Vec::new();
    for (i, c) in text.char_indices() {
        if QUOTES.contains(&c) {
            removed.push((i, c));
        } else {
            cleaned.push(c);
        }
    }
    StrippedText {
        text: cleaned,
        removed,
    }
}

// ---------------------------------------------------------------------------
// Attention alignment

/// Project `src_span` onto the target text.
///
/// Each target token is scored by the attention it pays to the source tokens
/// overlapping the span. The best token (lowest index on ties) is extended
/// left and right while neighbours score at least `extension_threshold`
/// times the best score. The result covers that contiguous run.
pub fn align_span(
    src_span: &CharSpan,
    src_toks: &TokenOffsets,
    tgt_toks: &TokenOffsets,
    attention: &AttentionMatrix,
    cfg: &AlignmentConfig,
) -> Result<CharSpan, AlignmentError> {
    if attention.rows() != tgt_toks.len() || attention.cols() != src_toks.len() {
        return Err(AlignmentError::DimensionMismatch {
            rows: attention.rows(),
            cols: attention.cols(),
            tgt: tgt_toks.len(),
            src: src_toks.len(),
        });
    }
    let sources = src_toks.overlapping(&src_span.range());
    if sources.is_empty() {
        return Err(AlignmentError::NoSourceTokens {
            start: src_span.start,
            end: src_span.end,
        });
    }
    let scores: Vec<f64> = (0..attention.rows())
        .map(|j| sources.iter().map(|&s| attention.get(j, s)).sum())
        .collect();
    let mut best = 0;
    for (j, &score) in scores.iter().enumerate() {
        if score > scores[best] {
            best = j;
        }
    }
    let zero_mass = AlignmentError::ZeroMass {
        start: src_span.start,
        end: src_span.end,
    };
    if scores.get(best).is_none_or(|&s| s <= 0.0) {
        return Err(zero_mass);
    }
    let cutoff = cfg.extension_threshold * scores[best];
    let mut lo = best;
    while lo > 0 && scores[lo - 1] >= cutoff {
        lo -= 1;
    }
    let mut hi = best;
    while hi + 1 < scores.len() && scores[hi + 1] >= cutoff {
        hi += 1;
    }
    let start = tgt_toks.spans()[lo].0;
    let end = tgt_toks.spans()[hi].1;
    if start >= end {
        return Err(zero_mass);
    }
    Ok(CharSpan {
        start,
        end,
        slot: src_span.slot.clone(),
        value: src_span.value.clone(),
    })
}

// ---------------------------------------------------------------------------
// Numbers, ranges, times and dates

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Numeric {
    Integer(u64),
    Range(u64, u64),
    Time(u32, u32),
    Date(Option<u32>, u32, u32),
}

fn integer_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[0-9]+").unwrap())
}

fn range_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([0-9]+)\s*[-–—~]\s*([0-9]+)").unwrap())
}

fn time_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"([0-9]{1,2}):([0-9]{2})").unwrap())
}

fn compile_dates(patterns: &[String]) -> Result<Vec<Regex>, ConfigError> {
    patterns
        .iter()
        .map(|p| {
            Regex::new(p).map_err(|e| ConfigError::DatePattern {
                pattern: p.clone(),
                message: e.to_string(),
            })
        })
        .collect()
}

fn default_dates() -> &'static [Regex] {
    static RES: OnceLock<Vec<Regex>> = OnceLock::new();
    RES.get_or_init(|| compile_dates(&default_date_patterns()).unwrap())
}

fn whole<'t>(re: &Regex, text: &'t str) -> Option<regex::Captures<'t>> {
    re.captures(text)
        .filter(|c| c.get(0).is_some_and(|m| m.start() == 0 && m.end() == text.len()))
}

fn date_of(caps: &regex::Captures<'_>) -> Option<Numeric> {
    let num = |name| caps.name(name).map(|m| m.as_str().parse::<u32>());
    let year = match num("y") {
        Some(y) => Some(y.ok()?),
        None => None,
    };
    Some(Numeric::Date(year, num("m")?.ok()?, num("d")?.ok()?))
}

fn classify(value: &str, dates: &[Regex]) -> Option<Numeric> {
    let value = value.trim();
    for re in dates {
        if let Some(caps) = whole(re, value) {
            return date_of(&caps);
        }
    }
    if let Some(c) = whole(time_re(), value) {
        return Some(Numeric::Time(c[1].parse().ok()?, c[2].parse().ok()?));
    }
    if let Some(c) = whole(range_re(), value) {
        return Some(Numeric::Range(c[1].parse().ok()?, c[2].parse().ok()?));
    }
    if whole(integer_re(), value).is_some() {
        return Some(Numeric::Integer(value.parse().ok()?));
    }
    None
}

/// True when the match is not glued to ASCII letters or digits (or, for
/// integers, to a clock separator).
fn isolated(text: &str, range: &Range<usize>, integer: bool) -> bool {
    let before = text[..range.start].chars().next_back();
    let after = text[range.end..].chars().next();
    let glued = |c: Option<char>| c.is_some_and(|c| is_word_char(c) || (integer && c == ':'));
    !glued(before) && !glued(after)
}

fn occurrences(kind: Numeric, text: &str, dates: &[Regex]) -> Vec<Range<usize>> {
    let mut found = Vec::new();
    match kind {
        Numeric::Integer(n) => {
            for m in integer_re().find_iter(text) {
                let r = m.range();
                if isolated(text, &r, true) && m.as_str().parse::<u64>().ok() == Some(n) {
                    found.push(r);
                }
            }
        }
        Numeric::Range(a, b) => {
            for c in range_re().captures_iter(text) {
                let r = c.get(0).unwrap().range();
                let parsed = (c[1].parse::<u64>().ok(), c[2].parse::<u64>().ok());
                if isolated(text, &r, false) && parsed == (Some(a), Some(b)) {
                    found.push(r);
                }
            }
        }
        Numeric::Time(h, m) => {
            for c in time_re().captures_iter(text) {
                let r = c.get(0).unwrap().range();
                let parsed = (c[1].parse::<u32>().ok(), c[2].parse::<u32>().ok());
                if isolated(text, &r, false) && parsed == (Some(h), Some(m)) {
                    found.push(r);
                }
            }
        }
        Numeric::Date(..) => {
            for re in dates {
                for c in re.captures_iter(text) {
                    let r = c.get(0).unwrap().range();
                    if isolated(text, &r, false) && date_of(&c) == Some(kind) {
                        found.push(r);
                    }
                }
            }
            found.sort_by_key(|r| r.start);
            found.dedup();
        }
    }
    found
}

/// Find a number, range, clock time or date value in a translation without
/// looking at attention. Returns the span only when the value occurs
/// exactly once; `None` when it is absent, ambiguous or not numeric.
pub fn numeric_span_recover(value: &str, target: &str) -> Option<Range<usize>> {
    numeric_span_recover_with(value, target, default_dates())
}

pub(crate) fn numeric_span_recover_with(
    value: &str,
    target: &str,
    dates: &[Regex],
) -> Option<Range<usize>> {
    let kind = classify(value, dates)?;
    let mut found = occurrences(kind, target, dates);
    (found.len() == 1).then(|| found.pop().unwrap())
}

/// Compiled form of the date table in an [`AlignmentConfig`].
#[derive(Debug, Clone)]
pub struct DatePatterns(Vec<Regex>);

impl DatePatterns {
    pub fn new(cfg: &AlignmentConfig) -> Result<Self, ConfigError> {
        Ok(DatePatterns(compile_dates(&cfg.date_patterns)?))
    }

    pub fn recover(&self, value: &str, target: &str) -> Option<Range<usize>> {
        numeric_span_recover_with(value, target, &self.0)
    }
}

/// Whether `value` is handled by the numeric heuristics at all.
pub fn is_numeric_value(value: &str) -> bool {
    classify(value, default_dates()).is_some()
}
