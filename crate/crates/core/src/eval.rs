//! Turn-recurrent evaluation of state-tracking parsers.
//!
//! A backend maps `(previous state, agent utterance, user utterance)` to the
//! next state, all states travelling as encoded text. The harness starts
//! every dialogue from the empty state and feeds either the backend's own
//! previous prediction (JGA) or the gold previous state (GJGA).

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Corpus, Dialogue};
use crate::state::{
    apply_delta, diff_states, parse_state, serialize_state, BeliefState, SlotId, SlotValue,
    StateDelta,
};
use crate::wire::{HttpEndpoint, JsonLineProcess, TransportError, PARSE_PROTOCOL};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseRequest {
    pub id: String,
    pub prev_state: String,
    pub agent: String,
    pub user: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseResponse {
    pub id: String,
    pub next_state: String,
}

pub trait Backend {
    fn predict(&mut self, request: &ParseRequest) -> Result<ParseResponse, TransportError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn predict(&mut self, request: &ParseRequest) -> Result<ParseResponse, TransportError> {
        (**self).predict(request)
    }
}

pub struct ProcessBackend(JsonLineProcess);

impl ProcessBackend {
    pub fn spawn(command: &str) -> Result<Self, TransportError> {
        JsonLineProcess::spawn(command, PARSE_PROTOCOL).map(ProcessBackend)
    }
}

impl Backend for ProcessBackend {
    fn predict(&mut self, request: &ParseRequest) -> Result<ParseResponse, TransportError> {
        self.0.call(request)
    }
}

pub struct HttpBackend(HttpEndpoint);

impl HttpBackend {
    pub fn new(url: &str) -> Self {
        HttpBackend(HttpEndpoint::new(url))
    }
}

impl Backend for HttpBackend {
    fn predict(&mut self, request: &ParseRequest) -> Result<ParseResponse, TransportError> {
        self.0.call(request)
    }
}

/// Request id for turn `turn` of dialogue `dialogue`.
pub fn request_id(dialogue: &str, turn: usize) -> String {
    format!("{dialogue}/{turn}")
}

/// Inverse of [`request_id`]. Dialogue ids may themselves contain `/`.
pub fn split_request_id(id: &str) -> Option<(&str, usize)> {
    let (dialogue, turn) = id.rsplit_once('/')?;
    Some((dialogue, turn.parse().ok()?))
}

fn encode(state: &BeliefState) -> String {
    serialize_state(state).unwrap_or_else(|e| format!("<{e}>"))
}

/// Gold deltas of every turn of a corpus, by request id.
#[derive(Debug, Clone, Default)]
pub struct GoldDeltas(HashMap<String, Vec<StateDelta>>);

impl GoldDeltas {
    pub fn new(corpus: &Corpus) -> Self {
        let map = corpus
            .dialogues
            .iter()
            .map(|d| {
                let deltas = d
                    .turns
                    .iter()
                    .map(|t| diff_states(&d.state_before(t.index), &t.state))
                    .collect();
                (d.id.clone(), deltas)
            })
            .collect();
        GoldDeltas(map)
    }

    pub fn get(&self, id: &str) -> Option<&StateDelta> {
        let (dialogue, turn) = split_request_id(id)?;
        self.0.get(dialogue)?.get(turn)
    }
}

/// Applies the gold delta of the requested turn to whatever state it gets.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    gold: GoldDeltas,
}

impl OracleBackend {
    pub fn new(corpus: &Corpus) -> Self {
        OracleBackend {
            gold: GoldDeltas::new(corpus),
        }
    }

    fn next(&self, request: &ParseRequest) -> Result<BeliefState, TransportError> {
        let prev = parse_state(&request.prev_state)
            .map_err(|e| TransportError::Malformed(e.to_string()))?;
        let delta = self
            .gold
            .get(&request.id)
            .ok_or_else(|| TransportError::Malformed(format!("unknown turn {}", request.id)))?;
        Ok(apply_delta(&prev, delta))
    }
}

impl Backend for OracleBackend {
    fn predict(&mut self, request: &ParseRequest) -> Result<ParseResponse, TransportError> {
        Ok(ParseResponse {
            id: request.id.clone(),
            next_state: encode(&self.next(request)?),
        })
    }
}

/// Returns its input state unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoBackend;

impl Backend for EchoBackend {
    fn predict(&mut self, request: &ParseRequest) -> Result<ParseResponse, TransportError> {
        Ok(ParseResponse {
            id: request.id.clone(),
            next_state: request.prev_state.clone(),
        })
    }
}

/// Slot the scripted backend injects. It is not part of any ontology.
pub fn bogus_slot() -> (SlotId, SlotValue) {
    (
        SlotId::new("bogus", "slot").expect("valid slot id"),
        SlotValue::regular("injected"),
    )
}

/// Like [`OracleBackend`], but on every third turn (1-based turns 3, 6, ...)
/// adds [`bogus_slot`] to its answer.
#[derive(Debug, Clone)]
pub struct ScriptedErrorBackend(OracleBackend);

impl ScriptedErrorBackend {
    pub fn new(corpus: &Corpus) -> Self {
        ScriptedErrorBackend(OracleBackend::new(corpus))
    }
}

impl Backend for ScriptedErrorBackend {
    fn predict(&mut self, request: &ParseRequest) -> Result<ParseResponse, TransportError> {
        let mut next = self.0.next(request)?;
        if split_request_id(&request.id).is_some_and(|(_, turn)| (turn + 1) % 3 == 0) {
            let (slot, value) = bogus_slot();
            next.insert(slot, value);
        }
        Ok(ParseResponse {
            id: request.id.clone(),
            next_state: encode(&next),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedMode {
    /// Previous prediction is fed forward; scored as JGA.
    PredictedState,
    /// Previous gold state is fed forward; scored as GJGA.
    GoldState,
}

impl fmt::Display for FeedMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedMode::PredictedState => "predicted-state",
            FeedMode::GoldState => "gold-state",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredictionRecord {
    pub dialogue: String,
    pub turn: usize,
    pub mode: FeedMode,
    #[serde(serialize_with = "ser_state")]
    pub input_state: BeliefState,
    #[serde(serialize_with = "ser_state")]
    pub gold_state: BeliefState,
    /// `None` when the backend failed on this turn.
    #[serde(serialize_with = "ser_opt_state")]
    pub predicted_state: Option<BeliefState>,
    pub correct: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn ser_state<S: serde::Serializer>(state: &BeliefState, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&encode(state))
}

fn ser_opt_state<S: serde::Serializer>(
    state: &Option<BeliefState>,
    s: S,
) -> Result<S::Ok, S::Error> {
    match state {
        Some(state) => s.serialize_some(&encode(state)),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Leave each dialogue's last turn unscored.
    pub exclude_final_turn: bool,
    /// Worker count for [`run_csp_parallel`].
    pub jobs: usize,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("metric undefined on an empty set of turns")]
    Empty,
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// Outcome of one dialogue; `lost` is set when the connection died.
struct DialogueRun {
    records: Vec<PredictionRecord>,
    lost: bool,
}

fn run_dialogue(
    dialogue: &Dialogue,
    backend: &mut dyn Backend,
    mode: FeedMode,
    opts: &EvalOptions,
) -> DialogueRun {
    let scored = match (opts.exclude_final_turn, dialogue.turns.len()) {
        (true, n) => n.saturating_sub(1),
        (false, n) => n,
    };
    let mut records = Vec::with_capacity(scored);
    let mut predicted = BeliefState::new();
    let mut lost = None;
    for turn in &dialogue.turns[..scored] {
        let input = match mode {
            FeedMode::PredictedState => predicted.clone(),
            FeedMode::GoldState => dialogue.state_before(turn.index),
        };
        let mut record = PredictionRecord {
            dialogue: dialogue.id.clone(),
            turn: turn.index,
            mode,
            input_state: input.clone(),
            gold_state: turn.state.clone(),
            predicted_state: None,
            correct: false,
            error: None,
        };
        if let Some(reason) = &lost {
            record.error = Some(format!("not evaluated: {reason}"));
            records.push(record);
            continue;
        }
        let request = ParseRequest {
            id: request_id(&dialogue.id, turn.index),
            prev_state: encode(&input),
            agent: turn.agent.clone(),
            user: turn.user.clone(),
        };
        let outcome = backend
            .predict(&request)
            .map_err(|e| {
                if e.is_connection_loss() {
                    lost = Some(e.to_string());
                }
                e.to_string()
            })
            .and_then(|response| {
                if response.id != request.id {
                    return Err(format!("response id {:?} does not echo {:?}", response.id, request.id));
                }
                parse_state(&response.next_state).map_err(|e| e.to_string())
            });
        match outcome {
            Ok(state) => {
                record.correct = state == turn.state;
                predicted = state.clone();
                record.predicted_state = Some(state);
            }
            // the input state carries over to the next turn
            Err(message) => {
                predicted = input;
                record.error = Some(message);
            }
        }
        records.push(record);
    }
    DialogueRun {
        records,
        lost: lost.is_some(),
    }
}

/// Run `backend` over every dialogue of `corpus` in order.
///
/// A malformed answer scores its turn incorrect. When the connection is lost
/// the rest of that dialogue is recorded as not evaluated; later dialogues
/// still try the same backend. Use [`run_csp_parallel`] to reconnect.
pub fn run_csp_loop(
    corpus: &Corpus,
    backend: &mut dyn Backend,
    mode: FeedMode,
    opts: &EvalOptions,
) -> Vec<PredictionRecord> {
    corpus
        .dialogues
        .iter()
        .flat_map(|d| run_dialogue(d, backend, mode, opts).records)
        .collect()
}

/// Parallel version of [`run_csp_loop`] with one backend per worker.
/// `connect` is called once per worker and again after a lost connection.
/// Records come back in corpus order regardless of the worker count.
pub fn run_csp_parallel<F>(
    corpus: &Corpus,
    mode: FeedMode,
    opts: &EvalOptions,
    connect: F,
) -> Result<Vec<PredictionRecord>, EvalError>
where
    F: Fn() -> Result<Box<dyn Backend + Send>, TransportError> + Sync,
{
    let slots: Vec<Mutex<Option<Vec<PredictionRecord>>>> =
        corpus.dialogues.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let failure: Mutex<Option<TransportError>> = Mutex::new(None);
    let workers = opts.jobs.max(1).min(corpus.dialogues.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut backend: Option<Box<dyn Backend + Send>> = None;
                loop {
                    if failure.lock().unwrap().is_some() {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(dialogue) = corpus.dialogues.get(i) else {
                        break;
                    };
                    if backend.is_none() {
                        match connect() {
                            Ok(b) => backend = Some(b),
                            Err(e) => {
                                failure.lock().unwrap().get_or_insert(e);
                                break;
                            }
                        }
                    }
                    let run = run_dialogue(
                        dialogue,
                        backend.as_deref_mut().expect("connected"),
                        mode,
                        opts,
                    );
                    if run.lost {
                        backend = None;
                    }
                    *slots[i].lock().unwrap() = Some(run.records);
                }
            });
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(EvalError::Transport(e));
    }
    Ok(slots
        .into_iter()
        .flat_map(|s| s.into_inner().unwrap().expect("every dialogue evaluated"))
        .collect())
}

fn accuracy(records: &[PredictionRecord], mode: FeedMode, metric: &str) -> Result<f64, EvalError> {
    if let Some(r) = records.iter().find(|r| r.mode != mode) {
        return Err(EvalError::Usage(format!(
            "{metric} needs {mode} records, got a {} record for {}/{}",
            r.mode, r.dialogue, r.turn
        )));
    }
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    let correct = records.iter().filter(|r| r.correct).count();
    Ok(correct as f64 / records.len() as f64)
}

/// Joint goal accuracy over predicted-state records.
pub fn compute_jga(records: &[PredictionRecord]) -> Result<f64, EvalError> {
    accuracy(records, FeedMode::PredictedState, "JGA")
}

/// Gold-state joint goal accuracy over gold-state records.
pub fn compute_gjga(records: &[PredictionRecord]) -> Result<f64, EvalError> {
    accuracy(records, FeedMode::GoldState, "GJGA")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DialogueScore {
    pub dialogue: String,
    pub turns: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jga: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gjga: Option<f64>,
}

/// Accuracy at one turn position across dialogues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnScore {
    pub turn: usize,
    pub dialogues: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jga: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gjga: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackendFinding {
    pub dialogue: String,
    pub turn: usize,
    pub mode: FeedMode,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub turns: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jga: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gjga: Option<f64>,
    pub per_dialogue: Vec<DialogueScore>,
    pub per_turn: Vec<TurnScore>,
    pub backend_errors: Vec<BackendFinding>,
}

fn mean(flags: impl Iterator<Item = bool>) -> Option<f64> {
    let (n, k) = flags.fold((0usize, 0usize), |(n, k), c| (n + 1, k + usize::from(c)));
    (n > 0).then(|| k as f64 / n as f64)
}

impl MetricsReport {
    /// Summarize records of either or both modes.
    pub fn new(
        predicted: Option<&[PredictionRecord]>,
        gold: Option<&[PredictionRecord]>,
    ) -> Result<Self, EvalError> {
        let jga = predicted.map(compute_jga).transpose()?;
        let gjga = gold.map(compute_gjga).transpose()?;
        let all: Vec<&PredictionRecord> = predicted
            .into_iter()
            .chain(gold)
            .flatten()
            .collect();
        let turns = predicted.or(gold).map_or(0, <[_]>::len);

        let mut dialogue_order: Vec<&str> = Vec::new();
        let mut by_dialogue: HashMap<&str, Vec<&PredictionRecord>> = HashMap::new();
        let mut by_turn: std::collections::BTreeMap<usize, Vec<&PredictionRecord>> =
            Default::default();
        for r in &all {
            by_dialogue
                .entry(&r.dialogue)
                .or_insert_with(|| {
                    dialogue_order.push(&r.dialogue);
                    Vec::new()
                })
                .push(r);
            by_turn.entry(r.turn).or_default().push(r);
        }
        let score = |rs: &[&PredictionRecord], mode| {
            mean(rs.iter().filter(|r| r.mode == mode).map(|r| r.correct))
        };
        let distinct = |rs: &[&PredictionRecord]| {
            let predicted = rs.iter().filter(|r| r.mode == FeedMode::PredictedState).count();
            if predicted > 0 { predicted } else { rs.len() }
        };
        let per_dialogue = dialogue_order
            .iter()
            .map(|id| {
                let rs = &by_dialogue[id];
                DialogueScore {
                    dialogue: id.to_string(),
                    turns: distinct(rs),
                    jga: score(rs, FeedMode::PredictedState),
                    gjga: score(rs, FeedMode::GoldState),
                }
            })
            .collect();
        let per_turn = by_turn
            .iter()
            .map(|(turn, rs)| TurnScore {
                turn: *turn,
                dialogues: distinct(rs),
                jga: score(rs, FeedMode::PredictedState),
                gjga: score(rs, FeedMode::GoldState),
            })
            .collect();
        let backend_errors = all
            .iter()
            .filter_map(|r| {
                r.error.as_ref().map(|e| BackendFinding {
                    dialogue: r.dialogue.clone(),
                    turn: r.turn,
                    mode: r.mode,
                    error: e.clone(),
                })
            })
            .collect();
        Ok(MetricsReport {
            turns,
            jga,
            gjga,
            per_dialogue,
            per_turn,
            backend_errors,
        })
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.4}", v));
        writeln!(f, "{:<16}{:>10}", "Turns", self.turns)?;
        writeln!(f, "{:<16}{:>10}", "JGA", show(self.jga))?;
        writeln!(f, "{:<16}{:>10}", "GJGA", show(self.gjga))?;
        write!(f, "{:<16}{:>10}", "Backend errors", self.backend_errors.len())
    }
}

/// Which in-process backend `serve_backend` should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Oracle,
    Echo,
    Scripted,
}

pub fn make_backend(kind: BackendKind, corpus: &Corpus) -> Box<dyn Backend + Send> {
    match kind {
        BackendKind::Oracle => Box::new(OracleBackend::new(corpus)),
        BackendKind::Echo => Box::new(EchoBackend),
        BackendKind::Scripted => Box::new(ScriptedErrorBackend::new(corpus)),
    }
}

/// Serve a backend over the parse protocol until end of input.
pub fn serve_backend(
    backend: &mut dyn Backend,
    input: impl std::io::BufRead,
    output: impl std::io::Write,
) -> std::io::Result<()> {
    crate::wire::serve(PARSE_PROTOCOL, input, output, |request: ParseRequest| {
        backend.predict(&request).unwrap_or_else(|e| ParseResponse {
            id: request.id.clone(),
            next_state: format!("<{e}>"),
        })
    })
}
