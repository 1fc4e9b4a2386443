//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.
//!
//! ```text
//! cargo test --test acceptance
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wozloc::align::{align_span, AlignmentConfig, AttentionMatrix, CharSpan, TokenOffsets};
use wozloc::eval::{
    compute_gjga, compute_jga, run_csp_loop, EvalOptions, FeedMode, OracleBackend,
    ScriptedErrorBackend,
};
use wozloc::ingest::{load_canonical, to_canonical_string, Corpus, Dialogue, Split};
use wozloc::lint::{detect_range_anomaly, lint_corpus, FindingKind, LintConfig};
use wozloc::state::{parse_state, serialize_state, Strictness};
use wozloc::synth;
use wozloc::{BeliefState, Ontology, SlotId, SlotValue};

const BIN: &str = env!("CARGO_BIN_EXE_wozloc");

const STATES: usize = 10_000;
const METRIC_DIALOGUES: usize = 1_000;
const PERMUTATIONS: usize = 500;
const MAX_TOKENS: usize = 12;
const PLANTED_PER_KIND: usize = 100;
/// Exact metrics: the harness and the replay oracle must agree to the bit.
const METRIC_TOLERANCE: f64 = 0.0;
const NO_ALIGN_CEILING: f64 = 0.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn sid(d: &str, s: &str) -> SlotId {
    SlotId::new(d, s).unwrap()
}

// ---------------------------------------------------------------------------
// 1. state round trip

fn random_state(rng: &mut ChaCha8Rng, ontology: &Ontology) -> BeliefState {
    let mut state = BeliefState::new();
    for slot in ontology.slots() {
        if rng.random_bool(0.5) {
            let values = ontology.values(slot).unwrap();
            let value = if rng.random_bool(0.1) {
                SlotValue::DontCare
            } else {
                SlotValue::regular(values.choose(rng).unwrap())
            };
            state.insert(slot.clone(), value);
        }
    }
    state
}

fn state_round_trip() -> Outcome {
    let ontologies = [
        synth::fixture_source_ontology(),
        synth::fixture_target_ontology(),
        synth::metric_ontology(),
        synth::lint_ontology(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = 0;
    for i in 0..STATES {
        let state = random_state(&mut rng, &ontologies[i % ontologies.len()]);
        let text = serialize_state(&state).unwrap();
        if parse_state(&text).ok().as_ref() != Some(&state) {
            failures += 1;
        }
    }
    let appendix: BeliefState = [
        ("book people", "6"),
        ("day", "thursday"),
        ("departure", "cambridge"),
        ("destination", "birmingham new street"),
        ("leaveat", "10:00"),
    ]
    .into_iter()
    .map(|(s, v)| (sid("train", s), SlotValue::regular(v)))
    .collect();
    let expected = r#"train book people = " 6 " train day = " thursday " train departure = " cambridge " train destination = " birmingham new street " train leaveat = " 10:00 ""#;
    let rendered = serialize_state(&appendix).unwrap();
    let empty = serialize_state(&BeliefState::new()).unwrap();
    outcome(
        failures == 0 && rendered == expected && empty == "null",
        format!(
            "{STATES} states, {failures} round-trip failures; appendix rendering {}; empty renders {empty:?}",
            if rendered == expected { "exact" } else { "differs" }
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. metric oracle equivalence

type Replay = BTreeMap<String, String>;

fn as_map(state: &BeliefState) -> Replay {
    state
        .iter()
        .map(|(s, v)| (s.to_string(), v.as_str().to_string()))
        .collect()
}

/// Brute-force replay of the scripted backend: apply the gold change to
/// whatever came in, and add a bogus slot on every third turn.
fn replay(dialogue: &Dialogue, feed_gold: bool) -> Vec<bool> {
    let mut previous_prediction = Replay::new();
    let mut previous_gold = Replay::new();
    let mut correct = Vec::new();
    for (t, turn) in dialogue.turns.iter().enumerate() {
        let gold = as_map(&turn.state);
        let mut prediction = if feed_gold {
            previous_gold.clone()
        } else {
            previous_prediction.clone()
        };
        for key in previous_gold.keys() {
            if !gold.contains_key(key) {
                prediction.remove(key);
            }
        }
        for (key, value) in &gold {
            if previous_gold.get(key) != Some(value) {
                prediction.insert(key.clone(), value.clone());
            }
        }
        if (t + 1) % 3 == 0 {
            prediction.insert("bogus slot".into(), "injected".into());
        }
        correct.push(prediction == gold);
        previous_prediction = prediction;
        previous_gold = gold;
    }
    correct
}

fn ratio(flags: &[bool]) -> f64 {
    flags.iter().filter(|c| **c).count() as f64 / flags.len() as f64
}

fn worked_fixture() -> Corpus {
    let st = |pairs: &[(&str, &str)]| -> BeliefState {
        pairs
            .iter()
            .map(|(s, v)| (sid("hotel", s), SlotValue::regular(v)))
            .collect()
    };
    let turns = vec![
        (String::new(), "a cheap hotel".to_string(), st(&[("price", "cheap")])),
        ("where ?".into(), "north".into(), st(&[("price", "cheap"), ("area", "north")])),
        ("ok".into(), "4 stars".into(), st(&[("price", "cheap"), ("area", "north"), ("stars", "4")])),
        ("anything else ?".into(), "no".into(), st(&[("price", "cheap"), ("area", "north"), ("stars", "4")])),
    ];
    Corpus::new(
        Split::Test,
        synth::metric_ontology(),
        vec![Dialogue::new("worked", "en", turns)],
    )
}

fn metric_equivalence() -> Outcome {
    let corpus = synth::random_corpus(METRIC_DIALOGUES, 10, 2);
    let opts = EvalOptions::default();
    let mut backend = ScriptedErrorBackend::new(&corpus);
    let predicted = run_csp_loop(&corpus, &mut backend, FeedMode::PredictedState, &opts);
    let gold = run_csp_loop(&corpus, &mut backend, FeedMode::GoldState, &opts);
    let jga = compute_jga(&predicted).unwrap();
    let gjga = compute_gjga(&gold).unwrap();
    let oracle_jga: Vec<bool> = corpus.dialogues.iter().flat_map(|d| replay(d, false)).collect();
    let oracle_gjga: Vec<bool> = corpus.dialogues.iter().flat_map(|d| replay(d, true)).collect();
    let per_turn_agrees = predicted.iter().map(|r| r.correct).eq(oracle_jga.iter().copied())
        && gold.iter().map(|r| r.correct).eq(oracle_gjga.iter().copied());
    let jga_gap = (jga - ratio(&oracle_jga)).abs();
    let gjga_gap = (gjga - ratio(&oracle_gjga)).abs();

    let worked = worked_fixture();
    let mut backend = ScriptedErrorBackend::new(&worked);
    let w_jga = compute_jga(&run_csp_loop(&worked, &mut backend, FeedMode::PredictedState, &opts)).unwrap();
    let w_gjga = compute_gjga(&run_csp_loop(&worked, &mut backend, FeedMode::GoldState, &opts)).unwrap();
    outcome(
        per_turn_agrees
            && jga_gap <= METRIC_TOLERANCE
            && gjga_gap <= METRIC_TOLERANCE
            && w_gjga == 0.75
            && w_jga == 0.5,
        format!(
            "{} turns: JGA {jga:.6} (gap {jga_gap}), GJGA {gjga:.6} (gap {gjga_gap}), per-turn agreement {per_turn_agrees}; worked fixture GJGA {w_gjga}, JGA {w_jga}",
            predicted.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. oracle identity

fn oracle_identity() -> Outcome {
    let mut corpora: Vec<(String, Corpus)> = (0..5)
        .map(|seed| (format!("random-{seed}"), synth::random_corpus(100, 12, seed)))
        .collect();
    corpora.push(("translation".into(), synth::translation_fixture()));
    corpora.push(("clean".into(), synth::clean_corpus(50, 4)));
    corpora.push(("worked".into(), worked_fixture()));
    for kind in FindingKind::ALL {
        corpora.push((format!("planted-{kind}"), synth::planted_corpus(kind, 20, 4).0));
    }
    let mut worst = Vec::new();
    for (name, corpus) in &corpora {
        let mut oracle = OracleBackend::new(corpus);
        let opts = EvalOptions::default();
        let jga = compute_jga(&run_csp_loop(corpus, &mut oracle, FeedMode::PredictedState, &opts)).unwrap();
        let gjga = compute_gjga(&run_csp_loop(corpus, &mut oracle, FeedMode::GoldState, &opts)).unwrap();
        if jga != 1.0 || gjga != 1.0 {
            worst.push(format!("{name}: {jga}/{gjga}"));
        }
    }
    outcome(
        worst.is_empty(),
        format!("{} corpora, all JGA = GJGA = 1.0{}", corpora.len(), if worst.is_empty() { String::new() } else { format!("; failing: {}", worst.join(", ")) }),
    )
}

// ---------------------------------------------------------------------------
// 4. alignment recovery

fn words(n: usize) -> String {
    (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
}

fn alignment_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = AlignmentConfig::default();
    let (mut contiguous, mut scattered, mut errors) = (0usize, 0usize, 0usize);
    for _ in 0..PERMUTATIONS {
        let n = rng.random_range(1..=MAX_TOKENS);
        // target token j translates source token source_of[j]
        let mut source_of: Vec<usize> = (0..n).collect();
        source_of.shuffle(&mut rng);
        let text = words(n);
        let toks = TokenOffsets::whitespace(&text);
        let matrix = AttentionMatrix::one_hot(&source_of, n).unwrap();
        for i in 0..n {
            for j in i + 1..=n {
                let span = CharSpan {
                    start: toks.spans()[i].0,
                    end: toks.spans()[j - 1].1,
                    slot: sid("x", "y"),
                    value: String::new(),
                };
                let found = align_span(&span, &toks, &toks, &matrix, &cfg).unwrap();
                let got: Vec<usize> = toks.overlapping(&found.range());
                let mut image: Vec<usize> =
                    (0..n).filter(|&t| (i..j).contains(&source_of[t])).collect();
                image.sort_unstable();
                let is_run = image.windows(2).all(|w| w[1] == w[0] + 1);
                let expected = if is_run {
                    contiguous += 1;
                    image
                } else {
                    // no contiguous span equals a scattered image; the rule
                    // keeps the run of image tokens around the first one
                    scattered += 1;
                    let mut run = vec![image[0]];
                    while image.contains(&(run.last().unwrap() + 1)) {
                        run.push(run.last().unwrap() + 1);
                    }
                    run
                };
                if got != expected {
                    errors += 1;
                }
            }
        }
    }
    // scores [0.1, 0.6, 0.5, 0.2, 0.1] on a one-token source span
    let scores = [0.1, 0.6, 0.5, 0.2, 0.1];
    let rows: Vec<Vec<f64>> = scores.iter().map(|s| vec![*s, 1.0 - s]).collect();
    let source = "a b";
    let target = words(5);
    let tgt = TokenOffsets::whitespace(&target);
    let span = CharSpan {
        start: 0,
        end: 1,
        slot: sid("x", "y"),
        value: "a".into(),
    };
    let found = align_span(
        &span,
        &TokenOffsets::whitespace(source),
        &tgt,
        &AttentionMatrix::from_rows(rows).unwrap(),
        &cfg,
    )
    .unwrap();
    let run = tgt.overlapping(&found.range());
    outcome(
        errors == 0 && run == [1, 2],
        format!(
            "{PERMUTATIONS} permutations: {contiguous} contiguous images recovered exactly, {scattered} scattered images checked against the run rule, {errors} errors; worked example selects {run:?}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 5, 6, 8. translation through the CLI

struct Translated {
    corpus: Corpus,
    bytes: Vec<u8>,
    report: Vec<u8>,
}

fn translate(dir: &Path, name: &str, noisy: bool, align: bool, jobs: usize, seed: u64) -> Translated {
    let fx = fixtures().join("translation");
    let out = dir.join(format!("{name}.json"));
    let report = dir.join(format!("{name}.report.json"));
    let mut client = format!("{BIN} mock-translator --lexicon {}", fx.join("lexicon.json").display());
    if noisy {
        client.push_str(" --noisy");
    }
    let mut cmd = Command::new(BIN);
    cmd.arg("translate")
        .arg("--in")
        .arg(fx.join("corpus.json"))
        .args(["--src", "zh", "--tgt", "en", "--client", &client])
        .arg("--dict")
        .arg(fx.join("dictionary.json"))
        .arg("--target-ontology")
        .arg(fx.join("target_ontology.json"))
        .args(["--seed", &seed.to_string(), "--jobs", &jobs.to_string()])
        .arg("--out")
        .arg(&out)
        .arg("--report")
        .arg(&report);
    if !align {
        cmd.arg("--no-align");
    }
    let status = cmd.output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    Translated {
        corpus: load_canonical(&out, Strictness::Lenient).unwrap().corpus,
        bytes: std::fs::read(&out).unwrap(),
        report: std::fs::read(&report).unwrap(),
    }
}

/// Share of values that are set in a turn and appear verbatim in that
/// turn's utterances.
fn verbatim_rate(corpus: &Corpus) -> (usize, usize) {
    let (mut checked, mut found) = (0, 0);
    for dialogue in &corpus.dialogues {
        let mut previous = BeliefState::new();
        for turn in &dialogue.turns {
            let text = format!("{} {}", turn.agent, turn.user);
            for (slot, value) in turn.state.regular_values() {
                if previous.get(slot).and_then(SlotValue::as_regular) != Some(value) {
                    checked += 1;
                    found += usize::from(text.contains(value));
                }
            }
            previous = turn.state.clone();
        }
    }
    (checked, found)
}

fn faithfulness_under_alignment(dir: &Path) -> Outcome {
    let source = load_canonical(fixtures().join("translation/corpus.json"), Strictness::Strict)
        .unwrap()
        .corpus;
    let (src_checked, src_found) = verbatim_rate(&source);
    let aligned = translate(dir, "aligned", false, true, 4, 11);
    let noisy_aligned = translate(dir, "noisy-aligned", true, true, 4, 11);
    let ablated = translate(dir, "noisy-no-align", true, false, 4, 11);
    let rate = |c: &Corpus| {
        let (checked, found) = verbatim_rate(c);
        (found as f64 / checked as f64, checked)
    };
    let (clean_rate, clean_n) = rate(&aligned.corpus);
    let (noisy_rate, _) = rate(&noisy_aligned.corpus);
    let (ablated_rate, _) = rate(&ablated.corpus);
    outcome(
        src_found == src_checked
            && clean_rate == 1.0
            && noisy_rate == 1.0
            && ablated_rate < NO_ALIGN_CEILING,
        format!(
            "{clean_n} values: aligned {:.1}%, aligned with noisy mock {:.1}%, --no-align with noisy mock {:.1}% (ceiling {:.0}%)",
            100.0 * clean_rate,
            100.0 * noisy_rate,
            100.0 * ablated_rate,
            100.0 * NO_ALIGN_CEILING
        ),
    )
}

fn dictionary_dependency(dir: &Path) -> Outcome {
    let source = load_canonical(fixtures().join("translation/corpus.json"), Strictness::Strict)
        .unwrap()
        .corpus;
    let dictionary = synth::fixture_dictionary();
    let mut triggered = 0;
    let mut violations = Vec::new();
    for (seed, noisy) in [(11, false), (12, true), (13, true)] {
        let translated = translate(dir, &format!("dict-{seed}"), noisy, true, 2, seed);
        for (src, tgt) in source.dialogues.iter().zip(&translated.corpus.dialogues) {
            for entry in &dictionary.entries {
                let trigger = entry.trigger.slot_id().unwrap();
                let fires = src.turns.iter().any(|t| {
                    t.state.get(&trigger).and_then(SlotValue::as_regular) == Some(entry.trigger.value.as_str())
                });
                if !fires {
                    continue;
                }
                triggered += 1;
                for rule in std::iter::once(&entry.trigger).chain(&entry.consequents) {
                    let slot = rule.slot_id().unwrap();
                    for (s, t) in src.turns.iter().zip(&tgt.turns) {
                        let was = s.state.get(&slot).and_then(SlotValue::as_regular);
                        let now = t.state.get(&slot).and_then(SlotValue::as_regular);
                        if was == Some(rule.value.as_str()) && now != Some(rule.target.as_str()) {
                            violations.push(format!("{}/{} {slot}: {now:?}", src.id, s.index));
                        }
                    }
                }
            }
        }
    }
    outcome(
        triggered > 0 && violations.is_empty(),
        format!(
            "{triggered} triggered dialogues over 3 runs, {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let a = translate(dir, "det-a", true, true, 1, 99);
    let b = translate(dir, "det-b", true, true, 1, 99);
    let c = translate(dir, "det-c", true, true, 8, 99);
    let translate_same = a.bytes == b.bytes && a.bytes == c.bytes && a.report == b.report && a.report == c.report;

    let (corpus, _) = synth::planted_corpus(FindingKind::MissingSlot, 60, 8);
    let input = dir.join("lint-in.json");
    std::fs::write(&input, to_canonical_string(&corpus)).unwrap();
    let lint = |name: &str, jobs: &str| {
        let report = dir.join(name);
        let out = Command::new(BIN)
            .arg("lint")
            .arg("--in")
            .arg(&input)
            .args(["--sample", "200", "--seed", "7", "--jobs", jobs])
            .arg("--report")
            .arg(&report)
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(report).unwrap()
    };
    let l1 = lint("lint-a.json", "1");
    let l2 = lint("lint-b.json", "1");
    let l8 = lint("lint-c.json", "8");
    let lint_same = l1 == l2 && l1 == l8;
    outcome(
        translate_same && lint_same,
        format!(
            "translate outputs {} across runs and --jobs 1/8; lint --sample reports {}",
            if translate_same { "byte-identical" } else { "differ" },
            if lint_same { "byte-identical" } else { "differ" }
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. lint fixtures

fn lint_fixtures() -> Outcome {
    let cfg = synth::lint_fixture_config();
    let mut lines = Vec::new();
    let mut all_exact = true;
    for kind in FindingKind::ALL {
        let (corpus, planted) = synth::planted_corpus(kind, PLANTED_PER_KIND, 7);
        let report = lint_corpus(&corpus, &cfg).unwrap();
        let truth: BTreeSet<(String, usize, Option<SlotId>)> = planted
            .into_iter()
            .map(|p| (p.dialogue, p.turn, p.slot))
            .collect();
        let found: BTreeSet<(String, usize, Option<SlotId>)> = report
            .findings
            .iter()
            .filter(|f| f.kind == kind)
            .map(|f| (f.dialogue.clone(), f.turn, f.slot.clone()))
            .collect();
        let other = report.findings.iter().filter(|f| f.kind != kind).count();
        let hits = truth.intersection(&found).count();
        let precision = hits as f64 / (found.len() + other).max(1) as f64;
        let recall = hits as f64 / truth.len().max(1) as f64;
        all_exact &= precision == 1.0 && recall == 1.0 && truth.len() == PLANTED_PER_KIND;
        lines.push(format!("{kind} P={precision} R={recall}"));
    }
    let clean = lint_corpus(&synth::clean_corpus(PLANTED_PER_KIND, 7), &cfg).unwrap();

    // 100-150 with 83 quoted becomes 80-150
    let cost = sid("restaurant", "cost");
    let state = |v: &str| -> BeliefState { [(cost.clone(), SlotValue::regular(v))].into_iter().collect() };
    let dialogue = Dialogue::new(
        "range",
        "en",
        [
            (String::new(), "something around 100-150 per person".to_string(), state("100-150")),
            ("the closest is 83 per person".into(), "that works".into(), state("80-150")),
        ],
    );
    let expansion_ok = detect_range_anomaly(&dialogue, &LintConfig::default()).is_empty();
    outcome(
        all_exact && clean.findings.is_empty() && expansion_ok,
        format!(
            "{PLANTED_PER_KIND} dialogues per kind: {}; clean corpus findings {}; 100-150 + 83 -> 80-150 {}",
            lines.join(", "),
            clean.findings.len(),
            if expansion_ok { "not flagged" } else { "flagged" }
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let dir = tempfile::tempdir().unwrap();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Duration, Check)> = vec![
        ("1 state round trip", Duration::from_secs(5), Box::new(state_round_trip)),
        ("2 metric oracle equivalence", Duration::from_secs(30), Box::new(metric_equivalence)),
        ("3 oracle identity", Duration::from_secs(30), Box::new(oracle_identity)),
        ("4 alignment recovery", Duration::from_secs(10), Box::new(alignment_recovery)),
        ("5 faithfulness under alignment", Duration::from_secs(60), Box::new(|| faithfulness_under_alignment(dir.path()))),
        ("6 dictionary dependency", Duration::from_secs(60), Box::new(|| dictionary_dependency(dir.path()))),
        ("7 lint fixtures", Duration::from_secs(30), Box::new(lint_fixtures)),
        ("8 determinism", Duration::from_secs(120), Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (name, limit, run) in &criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = result.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{} criterion {name}: {} [{:.2}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
