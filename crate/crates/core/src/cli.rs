//! Command-line front end.
//!
//! Every subcommand reads its settings from flags first, then from the
//! optional `--config` JSON file. The seed falls back to `WOZLOC_SEED` and
//! finally to 0.
//!
//! Exit codes: 0 on success (lint findings included), 1 when the pipeline
//! fails, 2 for usage errors such as unknown flags or missing files.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::align::{detect_entity_spans, AlignmentConfig, CharSpan};
use crate::eval::{
    make_backend, run_csp_parallel, serve_backend, Backend, BackendKind, EvalOptions, FeedMode,
    HttpBackend, MetricsReport, PredictionRecord, ProcessBackend,
};
use crate::ingest::{
    corpus_stats, import_foreign, load_canonical, to_canonical_string, Corpus, CorpusIssue,
    FieldMapping, Speaker,
};
use crate::lint::{lint_corpus, LintConfig, MissingSlotRule};
use crate::pipeline::{
    faithfulness, translate_corpus, AlignTrace, DependencyDictionary, Faithfulness, HttpTranslator,
    Lexicon, MockTranslator, PipelineConfig, PipelineFinding, ProcessTranslator, Reorder, Strategy,
    Translator, UntranslatedDialogue,
};
use crate::state::{SlotId, Strictness};
use crate::wire::{serve, TransportError, TRANSLATE_PROTOCOL};
use crate::Ontology;

pub const SEED_VAR: &str = "WOZLOC_SEED";

#[derive(Debug, Parser)]
#[command(name = "wozloc", version, about = "Belief-state tooling for Wizard-of-Oz dialogue corpora")]
pub struct Cli {
    /// JSON file with default settings; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a corpus to the canonical format.
    Convert(ConvertArgs),
    /// Print corpus statistics.
    Stats(StatsArgs),
    /// Print the gold-value spans found in each turn as JSON lines.
    Spans(SpansArgs),
    /// Translate a corpus through an external translator.
    Translate(TranslateArgs),
    /// Score a parser backend turn by turn.
    Evaluate(EvaluateArgs),
    /// Look for annotation errors.
    Lint(LintArgs),
    /// Serve the mock translator on standard input and output.
    #[command(hide = true)]
    MockTranslator(MockTranslatorArgs),
    /// Serve a reference parser on standard input and output.
    #[command(hide = true)]
    MockParser(MockParserArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Reject corpora with validation issues instead of warning.
    #[arg(long)]
    pub strict: bool,
    /// Domains to drop from the ontology and every state.
    #[arg(long, value_delimiter = ',', value_name = "DOMAIN")]
    pub exclude_domains: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Field mapping for a foreign schema. Without it the input is read as
    /// a canonical corpus and rewritten.
    #[arg(long, value_name = "FILE")]
    pub mapping: Option<PathBuf>,
    /// Ontology for foreign input.
    #[arg(long, value_name = "FILE")]
    pub ontology: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SpansArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyArg {
    Dictionary,
    Identity,
    Random,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Dictionary => Strategy::Dictionary,
            StrategyArg::Identity => Strategy::Identity,
            StrategyArg::Random => Strategy::Random,
        }
    }
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_name = "LANG")]
    pub src: Option<String>,
    #[arg(long, value_name = "LANG")]
    pub tgt: Option<String>,
    /// Translator command line.
    #[arg(long, value_name = "CMD", conflicts_with = "client_url")]
    pub client: Option<String>,
    /// Translator HTTP endpoint.
    #[arg(long, value_name = "URL")]
    pub client_url: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub dict: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub target_ontology: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Translate utterances directly, without span preservation.
    #[arg(long)]
    pub no_align: bool,
    /// Span extension threshold.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Disable the number and date heuristics.
    #[arg(long)]
    pub no_numeric: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Jga,
    Gjga,
    Both,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Parser command line.
    #[arg(long, value_name = "CMD", conflicts_with = "backend_url")]
    pub backend: Option<String>,
    /// Parser HTTP endpoint.
    #[arg(long, value_name = "URL")]
    pub backend_url: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Leave each dialogue's last turn unscored.
    #[arg(long)]
    pub exclude_final_turn: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Per-turn prediction records as JSON lines.
    #[arg(long, value_name = "FILE")]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingSlotArg {
    Conservative,
    Contextual,
}

impl From<MissingSlotArg> for MissingSlotRule {
    fn from(m: MissingSlotArg) -> Self {
        match m {
            MissingSlotArg::Conservative => MissingSlotRule::Conservative,
            MissingSlotArg::Contextual => MissingSlotRule::Contextual,
        }
    }
}

#[derive(Debug, Args)]
pub struct LintArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Inspect this many randomly drawn turns.
    #[arg(long)]
    pub sample: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Slot whose values are often inferred, as `domain slot`.
    #[arg(long = "inferable", value_name = "SLOT")]
    pub inferable: Vec<String>,
    #[arg(long)]
    pub max_edit_distance: Option<usize>,
    #[arg(long, value_enum)]
    pub missing_slot: Option<MissingSlotArg>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReorderArg {
    Identity,
    Reverse,
    Seeded,
}

#[derive(Debug, Args)]
pub struct MockTranslatorArgs {
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Mistranslate entity words that are not quote-marked.
    #[arg(long)]
    pub noisy: bool,
    #[arg(long, value_enum, default_value = "seeded")]
    pub reorder: ReorderArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParserKind {
    Oracle,
    Echo,
    Scripted,
}

#[derive(Debug, Args)]
pub struct MockParserArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    pub kind: ParserKind,
    /// Gold corpus the oracle answers from.
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
}

/// Settings that may come from the `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
    pub mapping: Option<PathBuf>,
    pub dictionary: Option<PathBuf>,
    pub target_ontology: Option<PathBuf>,
    pub client: Option<String>,
    pub client_url: Option<String>,
    pub backend: Option<String>,
    pub backend_url: Option<String>,
    pub seed: Option<u64>,
    pub src_lang: Option<String>,
    pub tgt_lang: Option<String>,
    pub strategy: Option<StrategyArg>,
    pub alignment: Option<bool>,
    pub theta: Option<f64>,
    pub numeric_heuristics: Option<bool>,
    pub strict: Option<bool>,
    pub jobs: Option<usize>,
    pub exclude_domains: Option<Vec<String>>,
    pub mode: Option<ModeArg>,
    pub exclude_final_turn: Option<bool>,
    pub sample: Option<usize>,
    pub inferable_slots: Option<Vec<String>>,
    pub max_edit_distance: Option<usize>,
    pub missing_slot: Option<MissingSlotArg>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read_input(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Failed(m) => write!(f, "error: {m}"),
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

/// Parse arguments, run the subcommand and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Convert(args) => convert(args, &config),
        Command::Stats(args) => stats(args, &config),
        Command::Spans(args) => spans(args, &config),
        Command::Translate(args) => translate(args, &config),
        Command::Evaluate(args) => evaluate(args, &config),
        Command::Lint(args) => lint(args, &config),
        Command::MockTranslator(args) => mock_translator(args),
        Command::MockParser(args) => mock_parser(args, &config),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing

fn read_input(path: &Path) -> Result<String, CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("{}: no such file", path.display())));
    }
    fs::read_to_string(path).map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{}: no such file", path.display())))
    }
}

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| failed(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(failed)?;
    text.push('\n');
    write_output(path, &text)
}

fn resolve_seed(flag: Option<u64>, config: &RunConfig) -> Result<u64, CliError> {
    if let Some(seed) = flag.or(config.seed) {
        return Ok(seed);
    }
    match std::env::var(SEED_VAR) {
        Ok(text) => text
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_VAR}={text:?} is not a 64-bit seed"))),
        Err(_) => Ok(0),
    }
}

fn report_issues(issues: &[CorpusIssue]) {
    if issues.is_empty() {
        return;
    }
    eprintln!("warning: {} validation issue(s)", issues.len());
    for issue in issues.iter().take(20) {
        eprintln!("  {issue}");
    }
    if issues.len() > 20 {
        eprintln!("  ...");
    }
}

fn load_corpus(args: &CorpusArgs, config: &RunConfig) -> Result<Corpus, CliError> {
    let path = args
        .input
        .as_ref()
        .or(config.corpus.as_ref())
        .ok_or_else(|| CliError::Usage("--in is required".into()))?;
    require_file(path)?;
    let strict = args.strict || config.strict.unwrap_or(false);
    let strictness = if strict { Strictness::Strict } else { Strictness::Lenient };
    let loaded = load_canonical(path, strictness).map_err(failed)?;
    report_issues(&loaded.issues);
    Ok(filter_domains(loaded.corpus, args, config))
}

fn filter_domains(corpus: Corpus, args: &CorpusArgs, config: &RunConfig) -> Corpus {
    let excluded = if args.exclude_domains.is_empty() {
        config.exclude_domains.clone().unwrap_or_default()
    } else {
        args.exclude_domains.clone()
    };
    if excluded.is_empty() {
        corpus
    } else {
        corpus.without_domains(&excluded)
    }
}

/// Pick the command or URL, flags over config, and insist on exactly one.
fn endpoint(
    what: &str,
    command: &Option<String>,
    url: &Option<String>,
    config_command: &Option<String>,
    config_url: &Option<String>,
) -> Result<Endpoint, CliError> {
    let (command, url) = if command.is_some() || url.is_some() {
        (command, url)
    } else {
        (config_command, config_url)
    };
    match (command, url) {
        (Some(c), None) => Ok(Endpoint::Command(c.clone())),
        (None, Some(u)) => Ok(Endpoint::Url(u.clone())),
        (Some(_), Some(_)) => Err(CliError::Usage(format!(
            "give either --{what} or --{what}-url, not both"
        ))),
        (None, None) => Err(CliError::Usage(format!("--{what} or --{what}-url is required"))),
    }
}

enum Endpoint {
    Command(String),
    Url(String),
}

fn print_table(text: &str) -> Result<(), CliError> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{}", text.trim_end()).map_err(failed)
}

// ---------------------------------------------------------------------------
// Subcommands

fn convert(args: ConvertArgs, config: &RunConfig) -> Result<(), CliError> {
    let path = args
        .corpus
        .input
        .as_ref()
        .or(config.corpus.as_ref())
        .ok_or_else(|| CliError::Usage("--in is required".into()))?;
    require_file(path)?;
    let strict = args.corpus.strict || config.strict.unwrap_or(false);
    let corpus = match args.mapping.as_ref().or(config.mapping.as_ref()) {
        Some(mapping_path) => {
            require_file(mapping_path)?;
            let ontology_path = args
                .ontology
                .as_ref()
                .or(config.ontology.as_ref())
                .ok_or_else(|| CliError::Usage("--mapping needs --ontology".into()))?;
            require_file(ontology_path)?;
            let mapping = FieldMapping::load(mapping_path).map_err(failed)?;
            let ontology = Ontology::load(ontology_path).map_err(failed)?;
            let imported = import_foreign(path, &mapping, &ontology).map_err(failed)?;
            if strict && !imported.issues.is_empty() {
                report_issues(&imported.issues);
                return Err(failed("converted corpus failed validation"));
            }
            report_issues(&imported.issues);
            imported.corpus
        }
        None => {
            let strictness = if strict { Strictness::Strict } else { Strictness::Lenient };
            let loaded = load_canonical(path, strictness).map_err(failed)?;
            report_issues(&loaded.issues);
            loaded.corpus
        }
    };
    let corpus = filter_domains(corpus, &args.corpus, config);
    write_output(&args.out, &to_canonical_string(&corpus))?;
    print_table(&corpus_stats(&corpus).to_string())
}

fn stats(args: StatsArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus, config)?;
    let stats = corpus_stats(&corpus);
    if args.json {
        print_table(&serde_json::to_string_pretty(&stats).map_err(failed)?)
    } else {
        print_table(&stats.to_string())
    }
}

#[derive(Debug, Serialize)]
struct TurnSpans<'a> {
    dialogue: &'a str,
    turn: usize,
    speaker: Speaker,
    text: &'a str,
    spans: Vec<CharSpan>,
}

fn spans(args: SpansArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus, config)?;
    let mut lines = String::new();
    for dialogue in &corpus.dialogues {
        for turn in &dialogue.turns {
            for (speaker, text) in turn.utterances() {
                let line = TurnSpans {
                    dialogue: &dialogue.id,
                    turn: turn.index,
                    speaker,
                    text,
                    spans: detect_entity_spans(text, &turn.state),
                };
                lines.push_str(&serde_json::to_string(&line).map_err(failed)?);
                lines.push('\n');
            }
        }
    }
    match &args.out {
        Some(path) => write_output(path, &lines),
        None => {
            let stdout = io::stdout();
            let mut out = BufWriter::new(stdout.lock());
            out.write_all(lines.as_bytes()).map_err(failed)?;
            out.flush().map_err(failed)
        }
    }
}

#[derive(Debug, Serialize)]
struct TranslateReport {
    dialogues: usize,
    translated: usize,
    alignment: bool,
    trace: AlignTrace,
    faithfulness: Faithfulness,
    faithfulness_rate: f64,
    untranslated: Vec<UntranslatedDialogue>,
    findings: Vec<PipelineFinding>,
    issues: Vec<CorpusIssue>,
}

fn translate(args: TranslateArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus, config)?;
    let endpoint = endpoint("client", &args.client, &args.client_url, &config.client, &config.client_url)?;
    let dict_path = args
        .dict
        .as_ref()
        .or(config.dictionary.as_ref())
        .ok_or_else(|| CliError::Usage("--dict is required".into()))?;
    require_file(dict_path)?;
    let dictionary = DependencyDictionary::load(dict_path).map_err(failed)?;
    let target_ontology = match args.target_ontology.as_ref().or(config.target_ontology.as_ref()) {
        Some(path) => {
            require_file(path)?;
            Ontology::load(path).map_err(failed)?
        }
        None => corpus.ontology.clone(),
    };
    for problem in dictionary.validate(&corpus.ontology, &target_ontology) {
        eprintln!("warning: dictionary: {problem}");
    }
    let mut pipeline = PipelineConfig {
        src_lang: args.src.clone().or(config.src_lang.clone()).unwrap_or_else(|| corpus_language(&corpus)),
        tgt_lang: args
            .tgt
            .clone()
            .or(config.tgt_lang.clone())
            .ok_or_else(|| CliError::Usage("--tgt is required".into()))?,
        align: AlignmentConfig::default(),
        alignment: !args.no_align && config.alignment.unwrap_or(true),
    };
    if let Some(theta) = args.theta.or(config.theta) {
        pipeline.align.extension_threshold = theta;
    }
    pipeline.align.numeric_heuristics = !args.no_numeric && config.numeric_heuristics.unwrap_or(true);
    pipeline
        .align
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let job = crate::pipeline::TranslationJob {
        dictionary: &dictionary,
        target_ontology: &target_ontology,
        seed: resolve_seed(args.seed, config)?,
        strategy: args.strategy.or(config.strategy).map_or(Strategy::default(), Strategy::from),
        config: pipeline,
        jobs: args.jobs.or(config.jobs).unwrap_or(1),
    };
    let connect = || -> Result<Box<dyn Translator + Send>, TransportError> {
        Ok(match &endpoint {
            Endpoint::Command(cmd) => Box::new(ProcessTranslator::spawn(cmd)?),
            Endpoint::Url(url) => Box::new(HttpTranslator::new(url)),
        })
    };
    let done = translate_corpus(&corpus, &job, connect).map_err(failed)?;
    write_output(&args.out, &to_canonical_string(&done.corpus))?;
    let faith = faithfulness(&done.corpus);
    let report = TranslateReport {
        dialogues: corpus.dialogues.len(),
        translated: done.corpus.dialogues.len(),
        alignment: job.config.alignment,
        trace: done.trace,
        faithfulness: faith,
        faithfulness_rate: faith.rate(),
        untranslated: done.untranslated,
        findings: done.findings,
        issues: done.issues,
    };
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    print_table(&format!(
        "{:<22}{:>10}\n{:<22}{:>10}\n{:<22}{:>10}\n{:<22}{:>10}\n{:<22}{:>10}\n{:<22}{:>10}\n{:<22}{:>9.1}%",
        "Dialogues",
        report.dialogues,
        "Translated",
        report.translated,
        "Numeric spans",
        report.trace.numeric,
        "Attention spans",
        report.trace.attention,
        "Failed spans",
        report.trace.failed,
        "Validation issues",
        report.issues.len(),
        "Verbatim values",
        100.0 * report.faithfulness_rate,
    ))?;
    if !report.untranslated.is_empty() {
        for u in &report.untranslated {
            eprintln!("  {}: {}", u.dialogue, u.error);
        }
        return Err(failed(format!(
            "{} of {} dialogues could not be translated",
            report.untranslated.len(),
            report.dialogues
        )));
    }
    Ok(())
}

fn corpus_language(corpus: &Corpus) -> String {
    corpus
        .dialogues
        .first()
        .map_or_else(|| "en".to_string(), |d| d.language.clone())
}

fn evaluate(args: EvaluateArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus, config)?;
    let endpoint = endpoint(
        "backend",
        &args.backend,
        &args.backend_url,
        &config.backend,
        &config.backend_url,
    )?;
    let mode = args.mode.or(config.mode).unwrap_or(ModeArg::Both);
    let opts = EvalOptions {
        exclude_final_turn: args.exclude_final_turn || config.exclude_final_turn.unwrap_or(false),
        jobs: args.jobs.or(config.jobs).unwrap_or(1),
    };
    let connect = || -> Result<Box<dyn Backend + Send>, TransportError> {
        Ok(match &endpoint {
            Endpoint::Command(cmd) => Box::new(ProcessBackend::spawn(cmd)?),
            Endpoint::Url(url) => Box::new(HttpBackend::new(url)),
        })
    };
    let run = |feed: FeedMode| run_csp_parallel(&corpus, feed, &opts, connect).map_err(failed);
    let predicted = match mode {
        ModeArg::Jga | ModeArg::Both => Some(run(FeedMode::PredictedState)?),
        ModeArg::Gjga => None,
    };
    let gold = match mode {
        ModeArg::Gjga | ModeArg::Both => Some(run(FeedMode::GoldState)?),
        ModeArg::Jga => None,
    };
    let report = MetricsReport::new(predicted.as_deref(), gold.as_deref()).map_err(failed)?;
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    if let Some(path) = &args.records {
        let mut lines = String::new();
        let all: Vec<&PredictionRecord> = predicted.iter().chain(gold.iter()).flatten().collect();
        for record in all {
            lines.push_str(&serde_json::to_string(record).map_err(failed)?);
            lines.push('\n');
        }
        write_output(path, &lines)?;
    }
    print_table(&report.to_string())
}

fn lint(args: LintArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = load_corpus(&args.corpus, config)?;
    let names = if args.inferable.is_empty() {
        config.inferable_slots.clone().unwrap_or_default()
    } else {
        args.inferable.clone()
    };
    let inferable_slots = names
        .iter()
        .map(|name| {
            name.parse::<SlotId>()
                .map_err(|e| CliError::Usage(format!("--inferable {name:?}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let cfg = LintConfig {
        inferable_slots,
        max_edit_distance: args
            .max_edit_distance
            .or(config.max_edit_distance)
            .unwrap_or(LintConfig::default().max_edit_distance),
        sample_size: args.sample.or(config.sample),
        seed: resolve_seed(args.seed, config)?,
        missing_slot: args
            .missing_slot
            .or(config.missing_slot)
            .map_or(MissingSlotRule::default(), MissingSlotRule::from),
        jobs: args.jobs.or(config.jobs).unwrap_or(1),
    };
    let report = lint_corpus(&corpus, &cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    print_table(&report.to_string())
}

fn mock_translator(args: MockTranslatorArgs) -> Result<(), CliError> {
    let lexicon = match &args.lexicon {
        Some(path) => {
            require_file(path)?;
            Lexicon::load(path).map_err(failed)?
        }
        None => Lexicon::default(),
    };
    let mock = MockTranslator {
        lexicon,
        noisy: args.noisy,
        reorder: match args.reorder {
            ReorderArg::Identity => Reorder::Identity,
            ReorderArg::Reverse => Reorder::Reverse,
            ReorderArg::Seeded => Reorder::Seeded,
        },
        seed: args.seed,
    };
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve(TRANSLATE_PROTOCOL, stdin.lock(), stdout.lock(), |request| mock.respond(&request))
        .map_err(failed)
}

fn mock_parser(args: MockParserArgs, config: &RunConfig) -> Result<(), CliError> {
    let corpus = match args.corpus.as_ref().or(config.corpus.as_ref()) {
        Some(path) => {
            require_file(path)?;
            load_canonical(path, Strictness::Lenient).map_err(failed)?.corpus
        }
        None if args.kind == ParserKind::Echo => {
            Corpus::new(Default::default(), Ontology::new(Vec::new(), Vec::new()).map_err(failed)?, Vec::new())
        }
        None => return Err(CliError::Usage("--corpus is required".into())),
    };
    let kind = match args.kind {
        ParserKind::Oracle => BackendKind::Oracle,
        ParserKind::Echo => BackendKind::Echo,
        ParserKind::Scripted => BackendKind::Scripted,
    };
    let mut backend = make_backend(kind, &corpus);
    let stdin = io::stdin();
    let stdout = io::stdout();
    serve_backend(backend.as_mut(), stdin.lock(), stdout.lock()).map_err(failed)
}
