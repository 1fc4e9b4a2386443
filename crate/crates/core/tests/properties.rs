use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::sample::subsequence;

use wozloc::align::{
    align_span, detect_value_spans, find_verbatim, split_sentences, AlignmentConfig,
    AttentionMatrix, CharSpan, TokenOffsets,
};
use wozloc::eval::{
    run_csp_loop, Backend, EvalOptions, FeedMode, OracleBackend, ParseRequest, ParseResponse,
    ScriptedErrorBackend,
};
use wozloc::ingest::{parse_canonical, to_canonical_string, Corpus};
use wozloc::lint::{lint_corpus, FindingKind};
use wozloc::ontology::SlotSpec;
use wozloc::pipeline::{
    faithfulness, translate_corpus, DependencyDictionary, MockTranslator, PipelineConfig,
    Strategy as PlanStrategy, TranslationJob, Translator,
};
use wozloc::state::{
    apply_delta, diff_states, expand_range, parse_state, serialize_state, NumericRange,
    Strictness,
};
use wozloc::synth;
use wozloc::wire::TransportError;
use wozloc::{BeliefState, Ontology, SlotId, SlotValue};

fn slot_id() -> impl Strategy<Value = SlotId> {
    ("[a-z]{1,8}", prop::collection::vec("[a-z]{1,6}", 1..3))
        .prop_map(|(d, words)| SlotId::new(d, words.join(" ")).unwrap())
}

fn value() -> impl Strategy<Value = SlotValue> {
    prop_oneof![
        9 => "[a-z0-9][a-z0-9 :,=.-]{0,14}"
            .prop_filter("special words", |v| {
                let t = v.trim();
                t != "none" && t != "dontcare"
            })
            .prop_map(|v| SlotValue::regular(&v)),
        1 => Just(SlotValue::DontCare),
    ]
}

fn state() -> impl Strategy<Value = BeliefState> {
    prop::collection::vec((slot_id(), value()), 0..8).prop_map(|pairs| pairs.into_iter().collect())
}

proptest! {
    #[test]
    fn state_round_trip(s in state()) {
        let text = serialize_state(&s).unwrap();
        prop_assert_eq!(parse_state(&text).unwrap(), s);
    }

    #[test]
    fn serialization_ignores_insertion_order(pairs in prop::collection::vec((slot_id(), value()), 0..8)) {
        let forward: BeliefState = pairs.iter().cloned().collect();
        // reversed insertion with the same final mapping
        let mut backward = BeliefState::new();
        for (slot, _) in pairs.iter().rev() {
            backward.insert(slot.clone(), forward.get(slot).unwrap().clone());
        }
        prop_assert_eq!(serialize_state(&forward).unwrap(), serialize_state(&backward).unwrap());
    }

    #[test]
    fn delta_is_sound(prev in state(), next in state()) {
        prop_assert_eq!(apply_delta(&prev, &diff_states(&prev, &next)), next);
    }

    #[test]
    fn expand_range_covers_old_range_and_observation(a in 0u64..1000, b in 0u64..1000, x in 0u64..2000) {
        let range = NumericRange::new(a.min(b), a.max(b)).unwrap();
        let wider = expand_range(range, x);
        prop_assert!(wider.contains(x));
        prop_assert!(wider.low() <= range.low() && wider.high() >= range.high());
    }

    #[test]
    fn exact_match_is_order_independent(s in state()) {
        let text = serialize_state(&s).unwrap();
        if text != "null" {
            // reverse the assignments and separate them with commas
            let mut parts: Vec<String> = s
                .iter()
                .map(|(k, v)| format!("{} {} = \" {} \"", k.domain(), k.slot(), v.as_str()))
                .collect();
            parts.reverse();
            let shuffled = parse_state(&parts.join(" , ")).unwrap();
            prop_assert_eq!(&shuffled, &s);
            prop_assert_eq!(&s, &shuffled);
        }
    }
}

// ---------------------------------------------------------------------------
// Corpora

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn canonical_save_load_round_trip(seed in any::<u64>(), n in 0usize..12) {
        let corpus = synth::random_corpus(n, 6, seed);
        let text = to_canonical_string(&corpus);
        let loaded = parse_canonical(&text, Strictness::Strict).unwrap();
        prop_assert_eq!(&loaded.corpus, &corpus);
        prop_assert_eq!(to_canonical_string(&loaded.corpus), text);
    }
}

// ---------------------------------------------------------------------------
// Alignment

fn attention(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, cols), rows).prop_map(|rows| {
        rows.into_iter()
            .map(|row| {
                let total: f64 = row.iter().sum::<f64>() + 1e-9;
                row.into_iter().map(|w| w / total).collect()
            })
            .collect()
    })
}

fn tokens(n: usize) -> String {
    (0..n).map(|i| format!("t{i}")).collect::<Vec<_>>().join(" ")
}

proptest! {
    #[test]
    fn aligned_span_is_contiguous_and_holds_the_argmax(
        (src_n, tgt_n, rows, start, len) in (1usize..8, 1usize..8).prop_flat_map(|(s, t)| {
            (Just(s), Just(t), attention(t, s), 0..s, 1..=s)
        })
    ) {
        let source = tokens(src_n);
        let target = tokens(tgt_n);
        let src = TokenOffsets::whitespace(&source);
        let tgt = TokenOffsets::whitespace(&target);
        let end = (start + len).min(src_n);
        let span = CharSpan {
            start: src.spans()[start].0,
            end: src.spans()[end - 1].1,
            slot: SlotId::new("x", "y").unwrap(),
            value: source[src.spans()[start].0..src.spans()[end - 1].1].to_string(),
        };
        let matrix = AttentionMatrix::from_rows(rows.clone()).unwrap();
        let found = align_span(&span, &src, &tgt, &matrix, &AlignmentConfig::default()).unwrap();
        prop_assert!(found.end <= target.len() && found.start < found.end);
        let covered = tgt.overlapping(&found.range());
        prop_assert!(covered.windows(2).all(|w| w[1] == w[0] + 1));
        // the covered run must span whole tokens exactly
        prop_assert_eq!(found.start, tgt.spans()[covered[0]].0);
        prop_assert_eq!(found.end, tgt.spans()[*covered.last().unwrap()].1);
        let score = |j: usize| (start..end).map(|i| rows[j][i]).sum::<f64>();
        let best = (0..tgt_n).map(score).fold(f64::MIN, f64::max);
        prop_assert!(covered.iter().any(|&j| score(j) == best));
    }

    #[test]
    fn sentences_tile_the_input(words in prop::collection::vec(
        prop_oneof!["[a-z]{1,5}", Just(".".to_string()), Just("?".to_string()), Just("。".to_string()), Just("  ".to_string())],
        0..20,
    )) {
        let text = words.join(" ");
        let sentences = split_sentences(&text);
        let mut pos = 0;
        for s in &sentences {
            prop_assert_eq!(s.raw.start, pos);
            pos = s.raw.end;
            prop_assert_eq!(&text[s.offset..s.offset + s.text.len()], s.text);
        }
        prop_assert_eq!(pos, text.len());
    }

    #[test]
    fn entity_spans_do_not_overlap_and_cut_their_value(
        words in prop::collection::vec(prop::sample::select(vec!["cheap", "north", "north end", "end", "6", "16", "hotel", "in"]), 0..12),
        values in subsequence(vec!["cheap", "north", "north end", "end", "6", "16"], 0..6),
    ) {
        let utterance = words.join(" ");
        let slots: Vec<(SlotId, &str)> = values
            .iter()
            .enumerate()
            .map(|(i, v)| (SlotId::new("d", format!("s{i}")).unwrap(), *v))
            .collect();
        let spans = detect_value_spans(&utterance, slots.iter().map(|(s, v)| (s, *v)));
        for pair in spans.windows(2) {
            prop_assert!(pair[0].end <= pair[1].start);
        }
        for span in &spans {
            let before = find_verbatim(&utterance, &span.value).len();
            let mut cut = utterance.clone();
            cut.replace_range(span.range(), "");
            let after = find_verbatim(&cut, &span.value).len();
            prop_assert!(after < before, "{:?} in {:?}", span.value, utterance);
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation

struct Corrupt<B> {
    inner: B,
    target: String,
}

impl<B: Backend> Backend for Corrupt<B> {
    fn predict(&mut self, request: &ParseRequest) -> Result<ParseResponse, TransportError> {
        let mut response = self.inner.predict(request)?;
        if request.id == self.target {
            response.next_state = "bogus slot = \" flipped \"".into();
        }
        Ok(response)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn oracle_identity(seed in any::<u64>()) {
        let corpus = synth::random_corpus(20, 8, seed);
        let mut oracle = OracleBackend::new(&corpus);
        for mode in [FeedMode::PredictedState, FeedMode::GoldState] {
            let records = run_csp_loop(&corpus, &mut oracle, mode, &EvalOptions::default());
            prop_assert!(records.iter().all(|r| r.correct));
        }
    }

    #[test]
    fn gold_mode_ignores_dialogue_order(seed in any::<u64>(), rotate in 0usize..20) {
        let corpus = synth::random_corpus(20, 8, seed);
        let mut shuffled = corpus.clone();
        shuffled.dialogues.rotate_left(rotate);
        let score = |c: &Corpus| {
            let mut backend = ScriptedErrorBackend::new(c);
            let mut records = run_csp_loop(c, &mut backend, FeedMode::GoldState, &EvalOptions::default());
            records.sort_by(|a, b| (&a.dialogue, a.turn).cmp(&(&b.dialogue, b.turn)));
            records.into_iter().map(|r| r.correct).collect::<Vec<_>>()
        };
        prop_assert_eq!(score(&corpus), score(&shuffled));
    }

    #[test]
    fn one_flipped_turn_only_lowers_later_turns(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let corpus = synth::random_corpus(10, 8, seed);
        let ids: Vec<(String, usize)> = corpus
            .dialogues
            .iter()
            .flat_map(|d| d.turns.iter().map(move |t| (d.id.clone(), t.index)))
            .collect();
        let (dialogue, turn) = pick.get(&ids).clone();
        let opts = EvalOptions::default();
        let mut plain = ScriptedErrorBackend::new(&corpus);
        let base = run_csp_loop(&corpus, &mut plain, FeedMode::PredictedState, &opts);
        let mut flipped = Corrupt {
            inner: ScriptedErrorBackend::new(&corpus),
            target: format!("{dialogue}/{turn}"),
        };
        let changed = run_csp_loop(&corpus, &mut flipped, FeedMode::PredictedState, &opts);
        for (a, b) in base.iter().zip(&changed) {
            if a.dialogue == dialogue && a.turn >= turn {
                prop_assert!(!b.correct || a.correct);
            } else {
                prop_assert_eq!(a.correct, b.correct);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Lint

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn adding_a_clean_dialogue_keeps_findings(seed in any::<u64>(), kind in prop::sample::select(FindingKind::ALL.to_vec())) {
        let cfg = synth::lint_fixture_config();
        let (corpus, _) = synth::planted_corpus(kind, 10, seed);
        let before = lint_corpus(&corpus, &cfg).unwrap().findings;
        let mut extra = synth::clean_corpus(1, seed ^ 1).dialogues;
        extra[0].id = "extra".into();
        let mut bigger = corpus.clone();
        bigger.dialogues.extend(extra);
        let after: Vec<_> = lint_corpus(&bigger, &cfg)
            .unwrap()
            .findings
            .into_iter()
            .filter(|f| f.dialogue != "extra")
            .collect();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn delayed_and_missing_never_share_a_turn_and_slot(seed in any::<u64>()) {
        let cfg = synth::lint_fixture_config();
        for kind in [FindingKind::DelayedAnnotation, FindingKind::MissingSlot] {
            let (corpus, _) = synth::planted_corpus(kind, 10, seed);
            let findings = lint_corpus(&corpus, &cfg).unwrap().findings;
            let key = |k: FindingKind| -> BTreeSet<(String, usize, Option<SlotId>)> {
                findings
                    .iter()
                    .filter(|f| f.kind == k)
                    .map(|f| (f.dialogue.clone(), f.turn, f.slot.clone()))
                    .collect()
            };
            let delayed = key(FindingKind::DelayedAnnotation);
            prop_assert!(key(FindingKind::MissingSlot).is_disjoint(&delayed));
        }
    }
}

// ---------------------------------------------------------------------------
// Translation

fn mock() -> Result<Box<dyn Translator + Send>, TransportError> {
    Ok(Box::new(MockTranslator {
        lexicon: synth::fixture_lexicon(),
        noisy: true,
        ..MockTranslator::default()
    }))
}

fn job<'a>(dictionary: &'a DependencyDictionary, target: &'a Ontology, seed: u64, jobs: usize) -> TranslationJob<'a> {
    TranslationJob {
        dictionary,
        target_ontology: target,
        seed,
        strategy: PlanStrategy::Random,
        config: PipelineConfig {
            src_lang: "zh".into(),
            tgt_lang: "en".into(),
            ..PipelineConfig::default()
        },
        jobs,
    }
}

fn every_other(ontology: &Ontology, parity: usize) -> Ontology {
    let slots = ontology
        .slots()
        .iter()
        .map(|slot| SlotSpec {
            domain: slot.domain().to_string(),
            slot: slot.slot().to_string(),
            values: ontology
                .values(slot)
                .unwrap()
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 2 == parity)
                .map(|(_, v)| v.clone())
                .collect(),
        })
        .collect();
    Ontology::new(ontology.domains().to_vec(), slots).unwrap()
}

fn regular_values(corpus: &Corpus) -> BTreeSet<String> {
    corpus
        .dialogues
        .iter()
        .flat_map(|d| &d.turns)
        .flat_map(|t| t.state.regular_values().map(|(_, v)| v.to_string()).collect::<Vec<_>>())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn aligned_translation_is_faithful_and_deterministic(seed in any::<u64>()) {
        let mut corpus = synth::translation_fixture();
        corpus.dialogues.truncate(12);
        let dictionary = synth::fixture_dictionary();
        let target = synth::fixture_target_ontology();
        let one = translate_corpus(&corpus, &job(&dictionary, &target, seed, 1), mock).unwrap();
        let many = translate_corpus(&corpus, &job(&dictionary, &target, seed, 4), mock).unwrap();
        prop_assert_eq!(faithfulness(&one.corpus).rate(), 1.0);
        prop_assert_eq!(to_canonical_string(&one.corpus), to_canonical_string(&many.corpus));
        prop_assert!(one.issues.is_empty());
    }

    #[test]
    fn disjoint_target_values_do_not_leak_across_splits(seed in any::<u64>()) {
        let corpus = synth::translation_fixture();
        let empty = DependencyDictionary::default();
        let full = synth::fixture_target_ontology();
        let (even, odd) = (every_other(&full, 0), every_other(&full, 1));
        let mut train = corpus.clone();
        train.dialogues.truncate(25);
        let mut test = corpus.clone();
        test.dialogues.drain(..25);
        let a = translate_corpus(&train, &job(&empty, &even, seed, 2), mock).unwrap();
        let b = translate_corpus(&test, &job(&empty, &odd, seed, 2), mock).unwrap();
        prop_assert!(a.untranslated.is_empty() && b.untranslated.is_empty());
        prop_assert!(regular_values(&a.corpus).is_disjoint(&regular_values(&b.corpus)));
    }
}
