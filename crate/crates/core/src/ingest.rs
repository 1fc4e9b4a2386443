//! Corpus model, canonical on-disk format, foreign-schema import and
//! corpus statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::ontology::Ontology;
use crate::state::{BeliefState, SlotId, SlotIdError, SlotValue, StateIssue, Strictness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

/// One agent response followed by one user utterance, and the gold state
/// after the user utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub index: usize,
    pub agent: String,
    pub user: String,
    pub state: BeliefState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Agent,
    User,
}

impl Turn {
    /// Agent then user utterance.
    pub fn utterances(&self) -> [(Speaker, &str); 2] {
        [(Speaker::Agent, &self.agent), (Speaker::User, &self.user)]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub id: String,
    pub language: String,
    pub turns: Vec<Turn>,
}

impl Dialogue {
    /// Build a dialogue, numbering turns from 0.
    pub fn new(
        id: impl Into<String>,
        language: impl Into<String>,
        turns: impl IntoIterator<Item = (String, String, BeliefState)>,
    ) -> Self {
        let turns = turns
            .into_iter()
            .enumerate()
            .map(|(index, (agent, user, state))| Turn {
                index,
                agent,
                user,
                state,
            })
            .collect();
        Dialogue {
            id: id.into(),
            language: language.into(),
            turns,
        }
    }

    /// Gold state before turn `index`; empty before the first turn.
    pub fn state_before(&self, index: usize) -> BeliefState {
        match index {
            0 => BeliefState::new(),
            i => self.turns[i - 1].state.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub split: Split,
    pub ontology: Ontology,
    pub dialogues: Vec<Dialogue>,
}

impl Corpus {
    pub fn new(split: Split, ontology: Ontology, dialogues: Vec<Dialogue>) -> Self {
        Corpus {
            split,
            ontology,
            dialogues,
        }
    }

    pub fn turn_count(&self) -> usize {
        self.dialogues.iter().map(|d| d.turns.len()).sum()
    }

    /// Check every invariant and return what is violated.
    ///
    /// State issues are reported at the turn that introduces them, not again
    /// for every later turn that carries the same assignment forward.
    pub fn validate(&self) -> Vec<CorpusIssue> {
        let mut issues = Vec::new();
        let mut ids = BTreeSet::new();
        for dialogue in &self.dialogues {
            if !ids.insert(dialogue.id.as_str()) {
                issues.push(CorpusIssue {
                    dialogue: dialogue.id.clone(),
                    turn: None,
                    problem: Problem::DuplicateDialogueId,
                });
            }
            let mut previous: Vec<StateIssue> = Vec::new();
            for turn in &dialogue.turns {
                if turn.user.trim().is_empty() {
                    issues.push(CorpusIssue {
                        dialogue: dialogue.id.clone(),
                        turn: Some(turn.index),
                        problem: Problem::EmptyUserUtterance,
                    });
                }
                let current = self.ontology.validate_state(&turn.state);
                for issue in &current {
                    if !previous.contains(issue) {
                        issues.push(CorpusIssue {
                            dialogue: dialogue.id.clone(),
                            turn: Some(turn.index),
                            problem: Problem::State(issue.clone()),
                        });
                    }
                }
                previous = current;
            }
        }
        issues
    }

    /// Drop every slot of the listed domains from the ontology and from all
    /// gold states. Dialogues and turns are kept.
    pub fn without_domains(&self, excluded: &[String]) -> Corpus {
        let dialogues = self
            .dialogues
            .iter()
            .map(|d| Dialogue {
                id: d.id.clone(),
                language: d.language.clone(),
                turns: d
                    .turns
                    .iter()
                    .map(|t| Turn {
                        state: t
                            .state
                            .iter()
                            .filter(|(s, _)| !excluded.iter().any(|e| e == s.domain()))
                            .map(|(s, v)| (s.clone(), v.clone()))
                            .collect(),
                        ..t.clone()
                    })
                    .collect(),
            })
            .collect();
        Corpus {
            split: self.split,
            ontology: self.ontology.without_domains(excluded),
            dialogues,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Problem {
    DuplicateDialogueId,
    EmptyUserUtterance,
    State(StateIssue),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusIssue {
    pub dialogue: String,
    pub turn: Option<usize>,
    pub problem: Problem,
}

impl fmt::Display for CorpusIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dialogue {}", self.dialogue)?;
        if let Some(turn) = self.turn {
            write!(f, " turn {turn}")?;
        }
        match &self.problem {
            Problem::DuplicateDialogueId => write!(f, ": duplicate dialogue id"),
            Problem::EmptyUserUtterance => write!(f, ": empty user utterance"),
            Problem::State(issue) => write!(f, ": {issue}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("dialogue {dialogue} turn {turn}: {source}")]
    BadSlot {
        dialogue: String,
        turn: usize,
        source: SlotIdError,
    },
    #[error("corpus failed validation:\n{}", .0.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<CorpusIssue>),
    #[error(transparent)]
    Mapping(#[from] MappingError),
}

impl From<serde_json::Error> for IngestError {
    fn from(err: serde_json::Error) -> Self {
        IngestError::Json {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Serialize, Deserialize)]
struct CorpusFile {
    split: Split,
    ontology: Ontology,
    dialogues: Vec<DialogueFile>,
}

#[derive(Serialize, Deserialize)]
struct DialogueFile {
    id: String,
    language: String,
    turns: Vec<TurnFile>,
}

#[derive(Serialize, Deserialize)]
struct TurnFile {
    agent: String,
    user: String,
    state: Vec<(String, String, String)>,
}

/// A corpus together with the validation issues found while loading it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub corpus: Corpus,
    pub issues: Vec<CorpusIssue>,
}

fn check(corpus: Corpus, strictness: Strictness) -> Result<Loaded, IngestError> {
    let issues = corpus.validate();
    if strictness == Strictness::Strict && !issues.is_empty() {
        return Err(IngestError::Validation(issues));
    }
    Ok(Loaded { corpus, issues })
}

/// Parse a canonical corpus document. Blank input is an empty training
/// corpus with an empty ontology.
pub fn parse_canonical(text: &str, strictness: Strictness) -> Result<Loaded, IngestError> {
    if text.trim().is_empty() {
        return check(
            Corpus::new(Split::Train, Ontology::default(), Vec::new()),
            strictness,
        );
    }
    let file: CorpusFile = serde_json::from_str(text)?;
    let mut dialogues = Vec::with_capacity(file.dialogues.len());
    for d in file.dialogues {
        let mut turns = Vec::with_capacity(d.turns.len());
        for (index, t) in d.turns.into_iter().enumerate() {
            let mut state = BeliefState::new();
            for (domain, slot, value) in t.state {
                let slot = SlotId::new(domain, slot).map_err(|source| IngestError::BadSlot {
                    dialogue: d.id.clone(),
                    turn: index,
                    source,
                })?;
                if let Some(value) = SlotValue::from_annotation(&value) {
                    state.insert(slot, value);
                }
            }
            turns.push(Turn {
                index,
                agent: t.agent.nfc().collect(),
                user: t.user.nfc().collect(),
                state,
            });
        }
        dialogues.push(Dialogue {
            id: d.id,
            language: d.language,
            turns,
        });
    }
    check(
        Corpus::new(file.split, file.ontology, dialogues),
        strictness,
    )
}

pub fn load_canonical(path: impl AsRef<Path>, strictness: Strictness) -> Result<Loaded, IngestError> {
    parse_canonical(&read(path.as_ref())?, strictness)
}

/// Render the canonical document. Output is deterministic: states are
/// written as `[domain, slot, value]` triples in slot order.
pub fn to_canonical_string(corpus: &Corpus) -> String {
    let file = CorpusFile {
        split: corpus.split,
        ontology: corpus.ontology.clone(),
        dialogues: corpus
            .dialogues
            .iter()
            .map(|d| DialogueFile {
                id: d.id.clone(),
                language: d.language.clone(),
                turns: d
                    .turns
                    .iter()
                    .map(|t| TurnFile {
                        agent: t.agent.clone(),
                        user: t.user.clone(),
                        state: t
                            .state
                            .iter()
                            .map(|(s, v)| {
                                (s.domain().to_string(), s.slot().to_string(), v.as_str().to_string())
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("corpus serializes");
    text.push('\n');
    text
}

pub fn save_canonical(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), IngestError> {
    let path = path.as_ref();
    std::fs::write(path, to_canonical_string(corpus)).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Counts with the same row definitions as the usual dataset statistics
/// tables. Domains, slots and values are those occurring in gold states;
/// a turn is one agent/user pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    #[serde(rename = "Domains")]
    pub domains: usize,
    #[serde(rename = "Dialogues")]
    pub dialogues: usize,
    #[serde(rename = "Turns")]
    pub turns: usize,
    #[serde(rename = "Slots")]
    pub slots: usize,
    #[serde(rename = "Values")]
    pub values: usize,
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("Domains", self.domains),
            ("Dialogues", self.dialogues),
            ("Turns", self.turns),
            ("Slots", self.slots),
            ("Values", self.values),
        ];
        let lines: Vec<String> = rows
            .iter()
            .map(|(name, count)| format!("# {name:<10} {count:>8}"))
            .collect();
        f.write_str(&lines.join("\n"))
    }
}

pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let mut domains = BTreeSet::new();
    let mut slots = BTreeSet::new();
    let mut values = BTreeSet::new();
    for turn in corpus.dialogues.iter().flat_map(|d| &d.turns) {
        for (slot, value) in turn.state.regular_values() {
            domains.insert(slot.domain());
            slots.insert(slot);
            values.insert((slot, value));
        }
    }
    StatsReport {
        domains: domains.len(),
        dialogues: corpus.dialogues.len(),
        turns: corpus.turn_count(),
        slots: slots.len(),
        values: values.len(),
    }
}

// ---------------------------------------------------------------------------
// Foreign schemas

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MappingError {
    #[error("path `{path}` does not resolve{}", context.as_ref().map(|c| format!(" in {c}")).unwrap_or_default())]
    Unresolved {
        path: String,
        context: Option<String>,
    },
    #[error("path `{path}` resolves to {found}, expected {expected}")]
    WrongType {
        path: String,
        expected: &'static str,
        found: String,
    },
    #[error("malformed path expression `{0}`")]
    BadPath(String),
    #[error("foreign slot name `{name}` cannot be split with separator `{separator}`: {reason}")]
    BadSlotName {
        name: String,
        separator: String,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Step {
    Key(String),
    Index(usize),
}

/// Dotted/bracket path such as `log[0].metadata.belief`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsonPath {
    source: String,
    steps: Vec<Step>,
}

impl JsonPath {
    pub fn parse(source: &str) -> Result<Self, MappingError> {
        let bad = || MappingError::BadPath(source.to_string());
        let mut steps = Vec::new();
        if !source.is_empty() {
            for segment in source.split('.') {
                let (key, mut rest) = match segment.find('[') {
                    Some(i) => (&segment[..i], &segment[i..]),
                    None => (segment, ""),
                };
                if !key.is_empty() {
                    steps.push(Step::Key(key.to_string()));
                } else if rest.is_empty() {
                    return Err(bad());
                }
                while !rest.is_empty() {
                    let close = rest.find(']').ok_or_else(bad)?;
                    if !rest.starts_with('[') {
                        return Err(bad());
                    }
                    let index = rest[1..close].parse().map_err(|_| bad())?;
                    steps.push(Step::Index(index));
                    rest = &rest[close + 1..];
                }
            }
        }
        Ok(JsonPath {
            source: source.to_string(),
            steps,
        })
    }

    pub fn resolve<'v>(&self, value: &'v Value) -> Option<&'v Value> {
        self.steps.iter().try_fold(value, |v, step| match step {
            Step::Key(k) => v.get(k),
            Step::Index(i) => v.get(i),
        })
    }

    fn require<'v>(&self, value: &'v Value, context: &str) -> Result<&'v Value, MappingError> {
        self.resolve(value).ok_or_else(|| MappingError::Unresolved {
            path: self.source.clone(),
            context: Some(context.to_string()),
        })
    }

    fn require_str(&self, value: &Value, context: &str) -> Result<String, MappingError> {
        match self.require(value, context)? {
            Value::String(s) => Ok(s.nfc().collect()),
            Value::Number(n) => Ok(n.to_string()),
            other => Err(MappingError::WrongType {
                path: self.source.clone(),
                expected: "string",
                found: json_kind(other).to_string(),
            }),
        }
    }
}

impl<'de> Deserialize<'de> for JsonPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let source = String::deserialize(d)?;
        JsonPath::parse(&source).map_err(serde::de::Error::custom)
    }
}

impl Serialize for JsonPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

fn json_kind(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "bool",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// How turn records are laid out in the foreign turns array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnLayout {
    /// One element per turn carrying both utterances.
    #[default]
    Paired,
    /// Elements alternate user, agent, user, agent, ... starting with the
    /// user. The agent text of turn `t` is the element just before the
    /// user element of turn `t`.
    Alternating,
}

/// Whether a turn's annotation is the full state or only what changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateMode {
    /// Annotations are per-turn updates folded into the running state;
    /// a `none` value clears the slot.
    #[default]
    Accumulate,
    Full,
}

/// Shape of the annotation found at the state path.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum StateFormat {
    /// Array of objects, each holding a slot name and a value.
    Entries { slot: JsonPath, value: JsonPath },
    /// Object from slot name to value.
    #[default]
    Object,
}

fn default_separator() -> String {
    "-".to_string()
}

fn default_language() -> String {
    "und".to_string()
}

/// Where everything lives in a foreign dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMapping {
    /// Path from the document root to the dialogues (array, or object keyed
    /// by dialogue id).
    #[serde(default = "empty_path")]
    pub dialogues: JsonPath,
    /// Path to the id within a dialogue. When absent, object keys are used,
    /// or the array position for arrays.
    #[serde(default)]
    pub id: Option<JsonPath>,
    pub turns: JsonPath,
    #[serde(default)]
    pub layout: TurnLayout,
    pub user: JsonPath,
    /// Agent text within a paired turn element, or within an agent element
    /// for the alternating layout (defaults to the user path there).
    #[serde(default)]
    pub agent: Option<JsonPath>,
    pub state: JsonPath,
    #[serde(default)]
    pub state_format: StateFormat,
    #[serde(default)]
    pub state_mode: StateMode,
    /// Foreign slot names are `<domain><separator><slot>`.
    #[serde(default = "default_separator")]
    pub slot_separator: String,
    /// Foreign slot name to replacement foreign slot name.
    #[serde(default)]
    pub rename: BTreeMap<String, String>,
    #[serde(default = "default_language")]
    pub language: String,
    #[serde(default)]
    pub split: Split,
}

fn empty_path() -> JsonPath {
    JsonPath::parse("").expect("empty path")
}

impl FieldMapping {
    pub fn from_json_str(text: &str) -> Result<Self, IngestError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::from_json_str(&read(path.as_ref())?)
    }

    fn slot_id(&self, foreign: &str) -> Result<SlotId, MappingError> {
        let name = self.rename.get(foreign).map(String::as_str).unwrap_or(foreign);
        let bad = |reason: String| MappingError::BadSlotName {
            name: name.to_string(),
            separator: self.slot_separator.clone(),
            reason,
        };
        let (domain, slot) = name
            .split_once(self.slot_separator.as_str())
            .ok_or_else(|| bad("separator not found".into()))?;
        let slot = slot.split_whitespace().collect::<Vec<_>>().join(" ");
        SlotId::new(domain.trim(), slot).map_err(|e| bad(e.to_string()))
    }
}

/// Corpus imported from a foreign file plus what did not fit the ontology.
#[derive(Debug, Clone)]
pub struct Imported {
    pub corpus: Corpus,
    pub issues: Vec<CorpusIssue>,
    /// Slots referenced by annotations but missing from the ontology. They
    /// are kept in the states and also reported as issues.
    pub unknown_slots: BTreeSet<SlotId>,
}

fn annotation_text(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Null => None,
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn read_annotation(
    mapping: &FieldMapping,
    node: &Value,
    context: &str,
) -> Result<Vec<(SlotId, Option<SlotValue>)>, MappingError> {
    let raw = mapping.state.require(node, context)?;
    let mut out = Vec::new();
    match (&mapping.state_format, raw) {
        (StateFormat::Object, Value::Object(map)) => {
            for (name, value) in map {
                let value = annotation_text(value).and_then(|t| SlotValue::from_annotation(&t));
                out.push((mapping.slot_id(name)?, value));
            }
        }
        (StateFormat::Entries { slot, value }, Value::Array(items)) => {
            for item in items {
                let name = slot.require_str(item, context)?;
                let text = annotation_text(value.require(item, context)?);
                out.push((
                    mapping.slot_id(&name)?,
                    text.and_then(|t| SlotValue::from_annotation(&t)),
                ));
            }
        }
        (format, other) => {
            return Err(MappingError::WrongType {
                path: mapping.state.source.clone(),
                expected: match format {
                    StateFormat::Object => "object",
                    StateFormat::Entries { .. } => "array",
                },
                found: json_kind(other).to_string(),
            })
        }
    }
    Ok(out)
}

fn import_dialogue(
    mapping: &FieldMapping,
    fallback_id: String,
    node: &Value,
) -> Result<Dialogue, MappingError> {
    let id = match &mapping.id {
        Some(path) => path.require_str(node, &format!("dialogue {fallback_id}"))?,
        None => fallback_id,
    };
    let context = format!("dialogue {id}");
    let items = match mapping.turns.require(node, &context)? {
        Value::Array(items) => items,
        other => {
            return Err(MappingError::WrongType {
                path: mapping.turns.source.clone(),
                expected: "array",
                found: json_kind(other).to_string(),
            })
        }
    };
    // (agent, user, state node)
    let mut raw_turns: Vec<(String, String, &Value)> = Vec::new();
    match mapping.layout {
        TurnLayout::Paired => {
            for (i, item) in items.iter().enumerate() {
                let ctx = format!("{context} turn {i}");
                let user = mapping.user.require_str(item, &ctx)?;
                let agent = match &mapping.agent {
                    Some(path) => path.require_str(item, &ctx)?,
                    None => String::new(),
                };
                raw_turns.push((agent, user, item));
            }
        }
        TurnLayout::Alternating => {
            let agent_path = mapping.agent.as_ref().unwrap_or(&mapping.user);
            for (t, i) in (0..items.len()).step_by(2).enumerate() {
                let ctx = format!("{context} turn {t}");
                let user = mapping.user.require_str(&items[i], &ctx)?;
                let agent = if i == 0 {
                    String::new()
                } else {
                    agent_path.require_str(&items[i - 1], &ctx)?
                };
                raw_turns.push((agent, user, &items[i]));
            }
        }
    }
    let mut running = BeliefState::new();
    let mut turns = Vec::with_capacity(raw_turns.len());
    for (index, (agent, user, item)) in raw_turns.into_iter().enumerate() {
        let annotation = read_annotation(mapping, item, &format!("{context} turn {index}"))?;
        if mapping.state_mode == StateMode::Full {
            running = BeliefState::new();
        }
        for (slot, value) in annotation {
            match value {
                Some(value) => {
                    running.insert(slot, value);
                }
                None => {
                    running.remove(&slot);
                }
            }
        }
        turns.push(Turn {
            index,
            agent,
            user,
            state: running.clone(),
        });
    }
    Ok(Dialogue {
        id,
        language: mapping.language.clone(),
        turns,
    })
}

/// Convert a parsed foreign document into a canonical corpus.
pub fn import_foreign_value(
    document: &Value,
    mapping: &FieldMapping,
    ontology: &Ontology,
) -> Result<Imported, MappingError> {
    let root = mapping
        .dialogues
        .resolve(document)
        .ok_or_else(|| MappingError::Unresolved {
            path: mapping.dialogues.source.clone(),
            context: None,
        })?;
    let mut dialogues = Vec::new();
    match root {
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                dialogues.push(import_dialogue(mapping, i.to_string(), item)?);
            }
        }
        Value::Object(map) => {
            for (key, item) in map {
                dialogues.push(import_dialogue(mapping, key.clone(), item)?);
            }
        }
        other => {
            return Err(MappingError::WrongType {
                path: mapping.dialogues.source.clone(),
                expected: "array or object",
                found: json_kind(other).to_string(),
            })
        }
    }
    let corpus = Corpus::new(mapping.split, ontology.clone(), dialogues);
    let unknown_slots = corpus
        .dialogues
        .iter()
        .flat_map(|d| &d.turns)
        .flat_map(|t| t.state.iter().map(|(s, _)| s))
        .filter(|s| !ontology.contains_slot(s))
        .cloned()
        .collect();
    let issues = corpus.validate();
    Ok(Imported {
        corpus,
        issues,
        unknown_slots,
    })
}

pub fn import_foreign(
    path: impl AsRef<Path>,
    mapping: &FieldMapping,
    ontology: &Ontology,
) -> Result<Imported, IngestError> {
    let document: Value = serde_json::from_str(&read(path.as_ref())?)?;
    Ok(import_foreign_value(&document, mapping, ontology)?)
}
