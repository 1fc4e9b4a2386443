//! Deterministic synthetic data.
//!
//! * [`translation_fixture`]: the bundled Chinese corpus with its English
//!   target ontology, dependency dictionary and mock-translator lexicon.
//! * [`random_corpus`]: random state trajectories for metric tests.
//! * [`planted_corpus`]: clean English dialogues with one planted
//!   misannotation each, plus the exact places it was planted.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{Corpus, Dialogue, Split};
use crate::lint::{FindingKind, LintConfig};
use crate::ontology::{Ontology, SlotSpec};
use crate::pipeline::{DependencyDictionary, DictEntry, DictValue, Lexicon};
use crate::state::{expand_range, BeliefState, NumericRange, SlotId, SlotValue};

fn sid(domain: &str, slot: &str) -> SlotId {
    SlotId::new(domain, slot).expect("valid synthetic slot")
}

fn ontology(domains: &[&str], slots: &[(&str, &str, &[&str])]) -> Ontology {
    Ontology::new(
        domains.iter().map(|d| d.to_string()).collect(),
        slots
            .iter()
            .map(|(domain, slot, values)| SlotSpec {
                domain: domain.to_string(),
                slot: slot.to_string(),
                values: values.iter().map(|v| v.to_string()).collect(),
            })
            .collect(),
    )
    .expect("valid synthetic ontology")
}

// ---------------------------------------------------------------------------
// Translation fixture

pub const FIXTURE_DIALOGUES: usize = 50;
pub const FIXTURE_TURNS: usize = 8;
pub const FIXTURE_SEED: u64 = 2023;

const ZH_SLOTS: [(&str, &str, &[&str]); 7] = [
    ("restaurant", "food", &["快餐简餐", "川菜", "火锅", "粤菜", "西餐"]),
    ("restaurant", "price", &["便宜", "中等", "贵"]),
    ("restaurant", "area", &["东边", "西边", "市中心"]),
    ("restaurant", "book people", &["2", "4", "6"]),
    ("train", "leaveat", &["08:30", "10:00", "14:15"]),
    ("train", "day", &["3月5日", "4月1日", "5月20日"]),
    ("attraction", "name", &["海洋 博物馆", "故宫", "长城"]),
];

const EN_SLOTS: [(&str, &str, &[&str]); 7] = [
    ("restaurant", "food", &["fast food", "sichuan", "hotpot", "cantonese", "western"]),
    ("restaurant", "price", &["cheap", "moderate", "expensive"]),
    ("restaurant", "area", &["east", "west", "centre"]),
    ("restaurant", "book people", &["2", "4", "6"]),
    ("train", "leaveat", &["08:30", "10:00", "14:15"]),
    ("train", "day", &["3月5日", "4月1日", "5月20日"]),
    ("attraction", "name", &["aquarium", "palace museum", "great wall"]),
];

const DOMAINS: [&str; 3] = ["restaurant", "train", "attraction"];

/// Source-side phrase for each slot; `{}` is the value.
fn zh_phrase(slot: &SlotId) -> &'static str {
    match (slot.domain(), slot.slot()) {
        ("restaurant", "food") => "我 想 吃 {}",
        ("restaurant", "price") => "价格 {} 一点",
        ("restaurant", "area") => "最好 在 {}",
        ("restaurant", "book people") => "订 {} 个 人",
        ("train", "leaveat") => "火车 {} 出发",
        ("train", "day") => "日期 是 {}",
        _ => "还 想 去 {} 玩",
    }
}

const ZH_AGENT: [&str; 4] = [
    "好的 。 还 需要 什么 ？",
    "没问题 ， 请 稍等 。",
    "已经 帮 您 查到 了 。 还有 吗 ？",
    "明白 了 。",
];

const ZH_CHITCHAT: [&str; 3] = ["让 我 想想 。", "好的 ， 谢谢 。", "嗯 ， 可以 。"];

pub fn fixture_source_ontology() -> Ontology {
    ontology(&DOMAINS, &ZH_SLOTS)
}

pub fn fixture_target_ontology() -> Ontology {
    ontology(&DOMAINS, &EN_SLOTS)
}

/// Fast food is always cheap.
pub fn fixture_dictionary() -> DependencyDictionary {
    let value = |slot: &str, value: &str, target: &str| DictValue {
        domain: "restaurant".into(),
        slot: slot.into(),
        value: value.into(),
        target: target.into(),
    };
    DependencyDictionary {
        entries: vec![DictEntry {
            trigger: value("food", "快餐简餐", "fast food"),
            consequents: vec![value("price", "便宜", "cheap")],
        }],
    }
}

/// Word table for the mock translator. Every ontology value is an entity.
pub fn fixture_lexicon() -> Lexicon {
    let words: BTreeMap<String, String> = [
        ("我", "i"), ("想", "want"), ("吃", "eat"), ("价格", "price"), ("一点", "please"),
        ("最好", "ideally"), ("在", "in"), ("订", "book"), ("个", "for"), ("人", "people"),
        ("火车", "train"), ("出发", "departing"), ("日期", "date"), ("是", "is"), ("还", "also"),
        ("去", "visit"), ("玩", "for-fun"), ("好的", "okay"), ("需要", "need"), ("什么", "what"),
        ("没问题", "sure"), ("请", "please"), ("稍等", "wait"), ("已经", "already"),
        ("帮", "helped"), ("您", "you"), ("查到", "find"), ("了", "done"), ("还有", "more"),
        ("吗", "then"), ("明白", "understood"), ("让", "let"), ("想想", "think"),
        ("谢谢", "thanks"), ("嗯", "hmm"), ("可以", "fine"), ("你好", "hello"),
        ("再见", "goodbye"), ("。", "."), ("，", ","), ("？", "?"),
        ("快餐简餐", "fast-food"), ("川菜", "sichuan"), ("火锅", "hotpot"), ("粤菜", "cantonese"),
        ("西餐", "western"), ("便宜", "cheap"), ("中等", "moderate"), ("贵", "expensive"),
        ("东边", "east"), ("西边", "west"), ("市中心", "centre"), ("海洋", "ocean"),
        ("博物馆", "museum"), ("故宫", "palace"), ("长城", "great-wall"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    let entities = ZH_SLOTS
        .iter()
        .flat_map(|(_, _, values)| values.iter())
        .flat_map(|v| v.split(' '))
        .map(str::to_string)
        .collect();
    Lexicon { words, entities }
}

fn zh_dialogue(rng: &mut ChaCha8Rng, id: String) -> Dialogue {
    let source = fixture_source_ontology();
    let mut slots: Vec<SlotId> = source.slots().to_vec();
    slots.shuffle(rng);
    // food first; fast food brings its cheap price along
    slots.retain(|s| s != &sid("restaurant", "food"));
    let count = rng.random_range(2..=5);
    let mut chosen: Vec<(SlotId, String)> = Vec::new();
    let food = source.values(&sid("restaurant", "food")).unwrap().choose(rng).unwrap().clone();
    let fast_food = food == "快餐简餐";
    chosen.push((sid("restaurant", "food"), food));
    for slot in slots.into_iter().take(count) {
        let value = if fast_food && slot == sid("restaurant", "price") {
            "便宜".to_string()
        } else {
            source.values(&slot).unwrap().choose(rng).unwrap().clone()
        };
        chosen.push((slot, value));
    }
    if fast_food && !chosen.iter().any(|(s, _)| s == &sid("restaurant", "price")) {
        chosen.push((sid("restaurant", "price"), "便宜".to_string()));
    }
    // turn 0 and turns 1..=6 carry introductions; turn 7 says goodbye
    let mut by_turn: Vec<Vec<(SlotId, String)>> = vec![Vec::new(); FIXTURE_TURNS];
    for (k, item) in chosen.into_iter().enumerate() {
        let turn = if k == 0 { 0 } else { rng.random_range(1..FIXTURE_TURNS - 1) };
        by_turn[turn].push(item);
    }
    let mut state = BeliefState::new();
    let mut turns = Vec::with_capacity(FIXTURE_TURNS);
    for (t, intros) in by_turn.into_iter().enumerate() {
        let agent = if t == 0 {
            String::new()
        } else {
            ZH_AGENT.choose(rng).unwrap().to_string()
        };
        let user = if t == FIXTURE_TURNS - 1 {
            "谢谢 ， 再见 。".to_string()
        } else if intros.is_empty() {
            ZH_CHITCHAT.choose(rng).unwrap().to_string()
        } else {
            let phrases: Vec<String> = intros
                .iter()
                .map(|(slot, value)| zh_phrase(slot).replace("{}", value))
                .collect();
            let greeting = if t == 0 { "你好 。 " } else { "" };
            format!("{greeting}{} 。", phrases.join(" ， "))
        };
        for (slot, value) in intros {
            state.insert(slot, SlotValue::regular(&value));
        }
        turns.push((agent, user, state.clone()));
    }
    Dialogue::new(id, "zh", turns)
}

/// The bundled 50-dialogue, 400-turn Chinese corpus.
pub fn translation_fixture() -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(FIXTURE_SEED);
    let dialogues = (0..FIXTURE_DIALOGUES)
        .map(|i| zh_dialogue(&mut rng, format!("zh-{i:03}")))
        .collect();
    Corpus::new(Split::Test, fixture_source_ontology(), dialogues)
}

// ---------------------------------------------------------------------------
// Random trajectories

/// Small ontology for random trajectories.
pub fn metric_ontology() -> Ontology {
    ontology(
        &["hotel", "taxi"],
        &[
            ("hotel", "area", &["north", "south", "east", "west"]),
            ("hotel", "price", &["cheap", "moderate", "expensive"]),
            ("hotel", "stars", &["3", "4", "5"]),
            ("hotel", "book people", &["1", "2", "3"]),
            ("taxi", "leaveat", &["09:00", "12:30"]),
            ("taxi", "destination", &["airport", "station"]),
        ],
    )
}

/// One random dialogue: each turn sets, changes, clears or `dontcare`s a
/// few slots. Some turns leave the state unchanged.
pub fn random_dialogue(rng: &mut impl Rng, id: String, ontology: &Ontology, max_turns: usize) -> Dialogue {
    let n = rng.random_range(1..=max_turns.max(1));
    let mut state = BeliefState::new();
    let mut turns = Vec::with_capacity(n);
    for t in 0..n {
        for _ in 0..rng.random_range(0..=2) {
            let slot = ontology.slots().choose(rng).expect("non-empty ontology").clone();
            let value = if rng.random_bool(0.1) {
                SlotValue::DontCare
            } else {
                SlotValue::regular(ontology.values(&slot).unwrap().choose(rng).unwrap())
            };
            state.insert(slot, value);
        }
        if rng.random_bool(0.15) {
            let present: Vec<SlotId> = state.iter().map(|(s, _)| s.clone()).collect();
            if let Some(slot) = present.choose(rng) {
                state.remove(slot);
            }
        }
        let agent = if t == 0 { String::new() } else { format!("agent {t}") };
        turns.push((agent, format!("user {t}"), state.clone()));
    }
    Dialogue::new(id, "en", turns)
}

pub fn random_corpus(dialogues: usize, max_turns: usize, seed: u64) -> Corpus {
    let ontology = metric_ontology();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dialogues = (0..dialogues)
        .map(|i| random_dialogue(&mut rng, format!("r{i}"), &ontology, max_turns))
        .collect();
    Corpus::new(Split::Test, ontology, dialogues)
}

// ---------------------------------------------------------------------------
// Planted misannotations

pub const PLANTED_TURNS: usize = 8;

/// Ontology of the planted corpora. `restaurant name` and `attraction type`
/// never occur in clean dialogues.
pub fn lint_ontology() -> Ontology {
    ontology(
        &["restaurant", "hotel", "attraction"],
        &[
            ("restaurant", "food", &["italian", "chinese", "indian", "korean", "hotpot", "thai"]),
            ("restaurant", "area", &["north", "south", "centre"]),
            ("restaurant", "price", &["cheap", "moderate", "expensive"]),
            ("restaurant", "cost", &["50-100", "100-150", "150-200", "80-150", "90-150", "100-170", "40-100", "50-120"]),
            ("restaurant", "name", &["golden curry", "pizza express", "the nirala", "yippee noodle bar"]),
            ("hotel", "stars", &["3", "4", "5"]),
            ("hotel", "area", &["east", "west"]),
            ("attraction", "type", &["museum", "architecture", "nightclub"]),
        ],
    )
}

/// Lint configuration the planted corpora are built for.
pub fn lint_fixture_config() -> LintConfig {
    LintConfig {
        inferable_slots: [sid("restaurant", "price")].into(),
        ..LintConfig::default()
    }
}

fn en_phrase(slot: &SlotId) -> &'static str {
    match (slot.domain(), slot.slot()) {
        ("restaurant", "food") => "i am looking for {} food",
        ("restaurant", "area") => "it should be in the {}",
        ("restaurant", "price") => "the price should be {}",
        ("restaurant", "cost") => "about {} per person",
        ("hotel", "stars") => "i also need a hotel with {} stars",
        _ => "a hotel in the {} too",
    }
}

const EN_AGENT: [&str; 4] = [
    "sure . anything else ?",
    "let me check that for you .",
    "okay , what else do you need ?",
    "i can help with that .",
];

const EN_CHITCHAT: [&str; 3] = ["let me think .", "okay , thanks .", "that sounds fine ."];

/// Where a misannotation was planted. `slot` is `None` for state resets.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Planted {
    pub dialogue: String,
    pub turn: usize,
    pub slot: Option<SlotId>,
}

/// A dialogue under construction: per-turn utterances and introductions.
struct Draft {
    agent: Vec<String>,
    user: Vec<String>,
    /// Values that become part of the state at each turn.
    set: Vec<Vec<(SlotId, String)>>,
    /// Turns whose state is forced empty.
    blank: Vec<bool>,
    /// Slot changes with no accompanying mention.
    changes: Vec<Vec<(SlotId, String)>>,
}

impl Draft {
    fn build(self, id: String) -> Dialogue {
        let mut state = BeliefState::new();
        let mut turns = Vec::with_capacity(self.agent.len());
        for t in 0..self.agent.len() {
            for (slot, value) in self.set[t].iter().chain(&self.changes[t]) {
                state.insert(slot.clone(), SlotValue::regular(value));
            }
            let gold = if self.blank[t] { BeliefState::new() } else { state.clone() };
            turns.push((self.agent[t].clone(), self.user[t].clone(), gold));
        }
        Dialogue::new(id, "en", turns)
    }

    fn render_user(&mut self, t: usize, mentions: &[(SlotId, String)]) {
        self.user[t] = if mentions.is_empty() {
            self.user[t].clone()
        } else {
            let phrases: Vec<String> = mentions
                .iter()
                .map(|(slot, value)| en_phrase(slot).replace("{}", value))
                .collect();
            format!("{} .", phrases.join(" . "))
        };
    }
}

/// A clean dialogue: every value is said by the user at the turn it is
/// annotated and never again; agents mention no values. About a third of
/// the dialogues also expand a cost range after the agent quotes a price.
fn clean_draft(rng: &mut ChaCha8Rng, ontology: &Ontology, exclude: &[SlotId]) -> Draft {
    let n = PLANTED_TURNS;
    let mut draft = Draft {
        agent: (0..n)
            .map(|t| if t == 0 { String::new() } else { EN_AGENT.choose(rng).unwrap().to_string() })
            .collect(),
        user: (0..n).map(|_| EN_CHITCHAT.choose(rng).unwrap().to_string()).collect(),
        set: vec![Vec::new(); n],
        blank: vec![false; n],
        changes: vec![Vec::new(); n],
    };
    draft.user[n - 1] = "thanks , goodbye .".to_string();
    let pick = |rng: &mut ChaCha8Rng, slot: &SlotId| ontology.values(slot).unwrap().choose(rng).unwrap().clone();
    let food = sid("restaurant", "food");
    draft.set[0].push((food.clone(), pick(rng, &food)));
    let mut optional = vec![
        sid("restaurant", "area"),
        sid("restaurant", "price"),
        sid("hotel", "stars"),
        sid("hotel", "area"),
    ];
    optional.retain(|s| !exclude.contains(s));
    optional.shuffle(rng);
    let count = rng.random_range(1..=optional.len());
    for slot in optional.into_iter().take(count) {
        let t = rng.random_range(1..n - 2);
        let value = pick(rng, &slot);
        draft.set[t].push((slot, value));
    }
    let cost = sid("restaurant", "cost");
    if !exclude.contains(&cost) && rng.random_bool(0.35) {
        let t = rng.random_range(1..n - 2);
        draft.set[t].push((cost.clone(), "100-150".to_string()));
        let observed = *[83u64, 95, 161, 120].choose(rng).unwrap();
        let expanded = expand_range(NumericRange::new(100, 150).unwrap(), observed);
        draft.agent[t + 1] = format!("the average cost there is {observed} per person .");
        draft.changes[t + 1].push((cost, expanded.to_string()));
    }
    for t in 0..n {
        let mentions = draft.set[t].clone();
        draft.render_user(t, &mentions);
    }
    draft
}

/// Turns that introduce nothing and whose agent utterance quotes no figure.
fn quiet_turns(draft: &Draft, range: std::ops::Range<usize>) -> Vec<usize> {
    range
        .filter(|&t| draft.set[t].is_empty() && draft.changes[t].is_empty())
        .collect()
}

fn mutate(value: &str, rng: &mut ChaCha8Rng) -> String {
    // an `x` inside the first word of the value: one edit, no verbatim match
    let first = value.split(' ').next().unwrap();
    let chars: Vec<char> = first.chars().collect();
    let at = rng.random_range(1..chars.len());
    let mut out: String = chars[..at].iter().collect();
    out.push('x');
    out.extend(&chars[at..]);
    out.push_str(&value[first.len()..]);
    out
}

/// One dialogue with a misannotation of `kind`, or `None` if the random
/// draft has no room for it.
fn plant(kind: FindingKind, rng: &mut ChaCha8Rng, id: &str) -> Option<(Dialogue, Planted)> {
    let ontology = lint_ontology();
    let n = PLANTED_TURNS;
    let planted = |turn, slot: Option<SlotId>| Planted {
        dialogue: id.to_string(),
        turn,
        slot,
    };
    let (draft, mark) = match kind {
        FindingKind::InexactMatch => {
            let mut draft = clean_draft(rng, &ontology, &[]);
            let candidates: Vec<(usize, usize)> = (0..n)
                .flat_map(|t| (0..draft.set[t].len()).map(move |k| (t, k)))
                .filter(|&(t, k)| draft.set[t][k].1.chars().count() >= 4 && !draft.set[t][k].1.contains('x'))
                .collect();
            let &(t, k) = candidates.choose(rng)?;
            let (slot, value) = draft.set[t][k].clone();
            let mut said = draft.set[t].clone();
            said[k].1 = mutate(&value, rng);
            draft.render_user(t, &said);
            (draft, planted(t, Some(slot)))
        }
        FindingKind::MissingSlot => {
            let mut draft = clean_draft(rng, &ontology, &[]);
            let t = *quiet_turns(&draft, 1..n - 1).choose(rng)?;
            let name = sid("restaurant", "name");
            let value = ontology.values(&name).unwrap().choose(rng).unwrap();
            draft.agent[t] = format!("how about {value} ? it is very popular .");
            draft.user[t] = "what is the address ?".to_string();
            (draft, planted(t, Some(name)))
        }
        FindingKind::ExtraSlot => {
            let mut draft = clean_draft(rng, &ontology, &[]);
            let t = rng.random_range(1..n - 1);
            let slot = sid("attraction", "type");
            let value = ontology.values(&slot).unwrap().choose(rng).unwrap().clone();
            draft.changes[t].push((slot.clone(), value));
            (draft, planted(t, Some(slot)))
        }
        FindingKind::DelayedAnnotation => {
            let mut draft = clean_draft(rng, &ontology, &[sid("restaurant", "cost")]);
            let candidates: Vec<(usize, usize)> = (0..n - 2)
                .flat_map(|t| (0..draft.set[t].len()).map(move |k| (t, k)))
                .collect();
            let &(t, k) = candidates.choose(rng)?;
            let delay = rng.random_range(1..=2).min(n - 1 - t);
            let item = draft.set[t].remove(k);
            let slot = item.0.clone();
            draft.changes[t + delay].push(item);
            (draft, planted(t, Some(slot)))
        }
        FindingKind::EmptyAnnotation => {
            // no range expansions: an expanded range restored after the
            // reset would look unmentioned
            let mut draft = clean_draft(rng, &ontology, &[sid("restaurant", "cost")]);
            let options: Vec<usize> = quiet_turns(&draft, 1..n - 1)
                .into_iter()
                .filter(|&t| draft.changes[t + 1].is_empty())
                .collect();
            let t = *options.choose(rng)?;
            draft.blank[t] = true;
            (draft, planted(t, None))
        }
        FindingKind::RangeAnomaly => {
            let mut draft = clean_draft(rng, &ontology, &[sid("restaurant", "cost")]);
            let options: Vec<usize> = quiet_turns(&draft, 1..n - 2)
                .into_iter()
                .filter(|&t| draft.changes[t + 1].is_empty() && draft.set[t + 1].is_empty())
                .collect();
            let t = *options.choose(rng)?;
            let cost = sid("restaurant", "cost");
            draft.set[t].push((cost.clone(), "100-150".to_string()));
            let mentions = draft.set[t].clone();
            draft.render_user(t, &mentions);
            // 83 expands 100-150 to 80-150; these do not follow from it
            let wrong = ["90-150", "40-100", "50-120", "100-170"].choose(rng).unwrap();
            draft.agent[t + 1] = "the average cost there is 83 per person .".to_string();
            draft.changes[t + 1].push((cost.clone(), wrong.to_string()));
            (draft, planted(t + 1, Some(cost)))
        }
        FindingKind::InferredSlot => {
            let mut draft = clean_draft(rng, &ontology, &[sid("restaurant", "price")]);
            let t = rng.random_range(0..n - 1);
            let slot = sid("restaurant", "price");
            let value = ontology.values(&slot).unwrap().choose(rng).unwrap().clone();
            draft.changes[t].push((slot.clone(), value));
            (draft, planted(t, Some(slot)))
        }
    };
    Some((draft.build(id.to_string()), mark))
}

/// `dialogues` clean dialogues, each with one planted misannotation of
/// `kind`. Returns the corpus and the planted locations in corpus order.
pub fn planted_corpus(kind: FindingKind, dialogues: usize, seed: u64) -> (Corpus, Vec<Planted>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(dialogues);
    let mut marks = Vec::with_capacity(dialogues);
    while out.len() < dialogues {
        let id = format!("{kind}-{:03}", out.len());
        if let Some((dialogue, mark)) = plant(kind, &mut rng, &id) {
            out.push(dialogue);
            marks.push(mark);
        }
    }
    (Corpus::new(Split::Train, lint_ontology(), out), marks)
}

/// Clean dialogues of the same shape as the planted ones.
pub fn clean_corpus(dialogues: usize, seed: u64) -> Corpus {
    let ontology = lint_ontology();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = (0..dialogues)
        .map(|i| clean_draft(&mut rng, &ontology, &[]).build(format!("clean-{i:03}")))
        .collect();
    Corpus::new(Split::Train, ontology, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shape() {
        let corpus = translation_fixture();
        assert_eq!(corpus.dialogues.len(), FIXTURE_DIALOGUES);
        assert_eq!(corpus.turn_count(), FIXTURE_DIALOGUES * FIXTURE_TURNS);
        assert!(corpus.validate().is_empty());
        assert_eq!(corpus, translation_fixture());
        assert!(fixture_dictionary()
            .validate(&fixture_source_ontology(), &fixture_target_ontology())
            .is_empty());
    }

    #[test]
    fn fixture_pairs_fast_food_with_cheap() {
        let food = sid("restaurant", "food");
        let price = sid("restaurant", "price");
        let corpus = translation_fixture();
        let mut seen = 0;
        for d in &corpus.dialogues {
            let last = &d.turns.last().unwrap().state;
            if last.get(&food) == Some(&SlotValue::regular("快餐简餐")) {
                seen += 1;
                assert_eq!(last.get(&price), Some(&SlotValue::regular("便宜")));
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn random_corpus_is_valid_and_seeded() {
        let corpus = random_corpus(20, 6, 1);
        assert!(corpus.validate().is_empty());
        assert_eq!(corpus, random_corpus(20, 6, 1));
    }

    #[test]
    fn planted_corpora_validate() {
        for kind in FindingKind::ALL {
            let (corpus, marks) = planted_corpus(kind, 10, 3);
            assert_eq!(marks.len(), 10);
            assert!(corpus.validate().is_empty(), "{kind}");
        }
        assert!(clean_corpus(10, 3).validate().is_empty());
    }
}
