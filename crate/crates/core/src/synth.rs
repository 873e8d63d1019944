//! Synthetic source/target benchmarks with a controllable gap.
//!
//! Source sentences come from a small templated grammar over made-up words.
//! The target side is a fresh draw passed through a token substitution
//! cipher that leaves a fraction `rho` of every word group untouched, then
//! perturbed by adjacent swaps (an entity moves with the context word in
//! front of it). Labels are invariant under the cipher.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{LabelVocab, LabeledDataset, Sample, SampleKind};
use crate::error::{Error, Result};
use crate::rng::{derive_seed_str, rng_from, Rng};

pub const ENTITY_TYPES: [&str; 3] = ["PER", "LOC", "ORG"];
pub const PAIR_LABELS: [&str; 3] = ["entailment", "contradiction", "neutral"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Ordinary (non-entity, non-trigger) words.
    pub vocab_size: usize,
    /// Gazetteer entries per entity type, in `ENTITY_TYPES` order.
    pub gazetteer_sizes: [usize; 3],
    /// Context words before an entity, and as many after it, per type.
    pub triggers_per_type: usize,
    /// Probability of each of the two context words around an entity.
    pub trigger_rate: f64,
    pub templates: usize,
    /// Fraction of each word group that the cipher maps to itself.
    pub rho: f64,
    /// Probability of swapping a unit with its right neighbour.
    pub swap_rate: f64,
    pub train_size: usize,
    pub dev_size: usize,
    pub test_size: usize,
    /// Probability of corrupting a source-train label.
    pub label_noise: f64,
    /// Pair task: words marking a contradiction.
    pub negators: usize,
    /// Pair task: neutral insertions.
    pub fillers: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 300,
            gazetteer_sizes: [15, 15, 15],
            triggers_per_type: 2,
            trigger_rate: 0.7,
            templates: 60,
            rho: 0.5,
            swap_rate: 0.1,
            train_size: 500,
            dev_size: 200,
            test_size: 400,
            label_noise: 0.0,
            negators: 6,
            fillers: 6,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("vocab_size", self.vocab_size),
            ("triggers_per_type", self.triggers_per_type),
            ("templates", self.templates),
            ("train_size", self.train_size),
            ("dev_size", self.dev_size),
            ("test_size", self.test_size),
            ("negators", self.negators),
            ("fillers", self.fillers),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::ConfigInvalid(format!("{name} must be >= 1")));
            }
        }
        if self.gazetteer_sizes.contains(&0) {
            return Err(Error::ConfigInvalid("gazetteer sizes must be >= 1".into()));
        }
        if self.negators < 2 || self.fillers < 2 {
            return Err(Error::ConfigInvalid(
                "need at least 2 negators and 2 fillers".into(),
            ));
        }
        for (name, v) in [
            ("rho", self.rho),
            ("swap_rate", self.swap_rate),
            ("label_noise", self.label_noise),
            ("trigger_rate", self.trigger_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ConfigInvalid(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: SampleKind,
    pub config: SynthConfig,
    pub labels: Vec<String>,
    /// Source token to target token, for every vocabulary word.
    pub cipher: BTreeMap<String, String>,
    pub identity: usize,
}

/// All splits of one benchmark. `target_train` is unlabeled; its labels are
/// kept in `target_train_gold` for analysis only.
#[derive(Clone, Debug, PartialEq)]
pub struct Benchmark {
    pub vocab: LabelVocab,
    pub source_train: LabeledDataset,
    pub source_dev: LabeledDataset,
    pub source_test: LabeledDataset,
    pub target_train: LabeledDataset,
    pub target_train_gold: LabeledDataset,
    pub target_dev: LabeledDataset,
    pub target_test: LabeledDataset,
    pub manifest: Manifest,
}

impl Benchmark {
    /// `(file stem, dataset)` for every split, in a fixed order.
    pub fn splits(&self) -> [(&'static str, &LabeledDataset); 7] {
        [
            ("source_train", &self.source_train),
            ("source_dev", &self.source_dev),
            ("source_test", &self.source_test),
            ("target_train", &self.target_train),
            ("target_train_gold", &self.target_train_gold),
            ("target_dev", &self.target_dev),
            ("target_test", &self.target_test),
        ]
    }
}

struct Lexicon {
    words: Vec<String>,
    triggers: [Vec<String>; 3],
    closers: [Vec<String>; 3],
    entities: [Vec<Vec<String>>; 3],
    negators: Vec<String>,
    fillers: Vec<String>,
}

impl Lexicon {
    /// Word groups the cipher treats separately.
    fn groups(&self) -> Vec<Vec<String>> {
        let mut g = vec![self.words.clone()];
        g.extend(self.triggers.iter().cloned());
        g.extend(self.closers.iter().cloned());
        g.extend(
            self.entities
                .iter()
                .map(|es| es.iter().flatten().cloned().collect()),
        );
        g.push(self.negators.clone());
        g.push(self.fillers.clone());
        g
    }
}

const SOURCE_ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const TARGET_ONSETS: &[&str] = &["h", "j", "q", "w", "x", "c", "y", "sh", "ch", "th"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

fn fresh_word(rng: &mut Rng, onsets: &[&str], used: &mut HashSet<String>) -> String {
    loop {
        let syllables = rng.gen_range(2..=3);
        let w: String = (0..syllables)
            .map(|_| {
                format!(
                    "{}{}",
                    onsets.choose(rng).unwrap(),
                    VOWELS.choose(rng).unwrap()
                )
            })
            .collect();
        if used.insert(w.clone()) {
            return w;
        }
    }
}

fn build_lexicon(cfg: &SynthConfig, used: &mut HashSet<String>) -> Lexicon {
    let mut rng = rng_from(derive_seed_str(cfg.seed, "lexicon"));
    let mut words = |n: usize, rng: &mut Rng| -> Vec<String> {
        (0..n)
            .map(|_| fresh_word(rng, SOURCE_ONSETS, used))
            .collect()
    };
    let plain = words(cfg.vocab_size, &mut rng);
    let triggers = [0, 1, 2].map(|_| words(cfg.triggers_per_type, &mut rng));
    let closers = [0, 1, 2].map(|_| words(cfg.triggers_per_type, &mut rng));
    let entities = [0, 1, 2].map(|c| {
        (0..cfg.gazetteer_sizes[c])
            .map(|_| {
                let len = if rng.gen_bool(0.35) { 2 } else { 1 };
                words(len, &mut rng)
            })
            .collect()
    });
    let negators = words(cfg.negators, &mut rng);
    let fillers = words(cfg.fillers, &mut rng);
    Lexicon {
        words: plain,
        triggers,
        closers,
        entities,
        negators,
        fillers,
    }
}

/// Within each group the first `round(rho * n)` words of an independent
/// permutation stay fixed, so the identity sets are nested in `rho`. Every
/// other word gets a fresh target form that depends only on the seed.
fn build_cipher(
    cfg: &SynthConfig,
    lex: &Lexicon,
    used: &mut HashSet<String>,
) -> BTreeMap<String, String> {
    let mut perm_rng = rng_from(derive_seed_str(cfg.seed, "cipher-permutation"));
    let mut form_rng = rng_from(derive_seed_str(cfg.seed, "cipher-forms"));
    let mut map = BTreeMap::new();
    for group in lex.groups() {
        let forms: Vec<String> = group
            .iter()
            .map(|_| fresh_word(&mut form_rng, TARGET_ONSETS, used))
            .collect();
        let mut order: Vec<usize> = (0..group.len()).collect();
        order.shuffle(&mut perm_rng);
        let keep = (cfg.rho * group.len() as f64).round() as usize;
        for (rank, &i) in order.iter().enumerate() {
            let to = if rank < keep {
                group[i].clone()
            } else {
                forms[i].clone()
            };
            map.insert(group[i].clone(), to);
        }
    }
    map
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Word(usize),
    Entity(usize),
}

fn build_templates(cfg: &SynthConfig) -> Vec<Vec<Slot>> {
    let mut rng = rng_from(derive_seed_str(cfg.seed, "templates"));
    (0..cfg.templates)
        .map(|_| {
            let words = rng.gen_range(4..=8);
            let mut slots: Vec<Slot> = (0..words)
                .map(|_| Slot::Word(rng.gen_range(0..cfg.vocab_size)))
                .collect();
            let entities = rng.gen_range(1..=2);
            for _ in 0..entities {
                let at = rng.gen_range(0..=slots.len());
                slots.insert(at, Slot::Entity(rng.gen_range(0..3)));
            }
            slots
        })
        .collect()
}

/// Tokens, per-token tags as `(type, begins)` with `None` outside, and
/// where the swap units start.
struct Drawn {
    tokens: Vec<String>,
    tags: Vec<Option<(usize, bool)>>,
    starts: Vec<bool>,
}

struct Grammar {
    lex: Lexicon,
    templates: Vec<Vec<Slot>>,
    cipher: BTreeMap<String, String>,
}

impl Grammar {
    fn new(cfg: &SynthConfig) -> Self {
        let mut used = HashSet::new();
        let lex = build_lexicon(cfg, &mut used);
        let cipher = build_cipher(cfg, &lex, &mut used);
        Grammar {
            lex,
            templates: build_templates(cfg),
            cipher,
        }
    }

    fn sentence(&self, cfg: &SynthConfig, rng: &mut Rng) -> Drawn {
        let template = self.templates.choose(rng).unwrap();
        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        let mut starts = Vec::new();
        for slot in template {
            match *slot {
                Slot::Word(i) => {
                    let w = if rng.gen_bool(0.15) {
                        self.lex.words.choose(rng).unwrap()
                    } else {
                        &self.lex.words[i]
                    };
                    tokens.push(w.clone());
                    tags.push(None);
                    starts.push(true);
                }
                Slot::Entity(c) => {
                    // The entity and the context word in front of it move as one unit.
                    let lead = rng.gen_bool(cfg.trigger_rate);
                    if lead {
                        tokens.push(self.lex.triggers[c].choose(rng).unwrap().clone());
                        tags.push(None);
                        starts.push(true);
                    }
                    let entry = self.lex.entities[c].choose(rng).unwrap();
                    for (n, t) in entry.iter().enumerate() {
                        tokens.push(t.clone());
                        tags.push(Some((c, n == 0)));
                        starts.push(n == 0 && !lead);
                    }
                    if rng.gen_bool(cfg.trigger_rate) {
                        tokens.push(self.lex.closers[c].choose(rng).unwrap().clone());
                        tags.push(None);
                        starts.push(true);
                    }
                }
            }
        }
        Drawn {
            tokens,
            tags,
            starts,
        }
    }

    fn encipher(&self, tokens: &[String]) -> Vec<String> {
        tokens
            .iter()
            .map(|t| self.cipher.get(t).unwrap_or(t).clone())
            .collect()
    }
}

/// Adjacent swaps over units; `starts[i]` marks where unit boundaries are.
fn swap_units<T: Clone>(items: &[T], unit_starts: &[bool], rate: f64, rng: &mut Rng) -> Vec<T> {
    let mut units: Vec<Vec<T>> = Vec::new();
    for (x, &start) in items.iter().zip(unit_starts) {
        if start || units.is_empty() {
            units.push(Vec::new());
        }
        units.last_mut().unwrap().push(x.clone());
    }
    let mut i = 0;
    while i + 1 < units.len() {
        if rate > 0.0 && rng.gen_bool(rate) {
            units.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }
    units.into_iter().flatten().collect()
}

/// `O` plus `B-`/`I-` tags for every entity type.
pub fn tag_vocab() -> LabelVocab {
    let mut names = vec!["O".to_string()];
    for t in ENTITY_TYPES {
        names.push(format!("B-{t}"));
        names.push(format!("I-{t}"));
    }
    LabelVocab::iob2(&names).expect("static tag set")
}

pub fn pair_vocab() -> LabelVocab {
    LabelVocab::sentence(&PAIR_LABELS).expect("static label set")
}

fn tag_index(tag: Option<(usize, bool)>) -> usize {
    match tag {
        None => 0,
        Some((c, true)) => 1 + 2 * c,
        Some((c, false)) => 2 + 2 * c,
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Source,
    Target,
}

fn tagging_split(
    g: &Grammar,
    cfg: &SynthConfig,
    name: &str,
    n: usize,
    side: Side,
    noise: f64,
) -> Result<LabeledDataset> {
    let mut rng = rng_from(derive_seed_str(cfg.seed, name));
    let mut noise_rng = rng_from(derive_seed_str(cfg.seed, &format!("{name}/noise")));
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let Drawn {
            tokens,
            mut tags,
            starts,
        } = g.sentence(cfg, &mut rng);
        if noise > 0.0 {
            // Corrupt whole spans: decide at the span start, carry to its inside tokens.
            let mut current: Option<usize> = None;
            for t in tags.iter_mut() {
                match t {
                    Some((c, true)) => {
                        current = if noise_rng.gen_bool(noise) {
                            Some((*c + noise_rng.gen_range(1..3)) % 3)
                        } else {
                            Some(*c)
                        };
                        *c = current.unwrap();
                    }
                    Some((c, false)) => *c = current.unwrap_or(*c),
                    None => current = None,
                }
            }
        }
        let (tokens, tags) = match side {
            Side::Source => (tokens, tags),
            Side::Target => {
                let zipped: Vec<(String, Option<(usize, bool)>)> =
                    g.encipher(&tokens).into_iter().zip(tags).collect();
                let swapped = swap_units(&zipped, &starts, cfg.swap_rate, &mut rng);
                swapped.into_iter().unzip()
            }
        };
        samples.push(Sample::tagging(format!("{name}-{i}"), tokens));
        labels.push(tags.into_iter().map(tag_index).collect());
    }
    LabeledDataset::new(tag_vocab(), samples, Some(labels))
}

/// Ordered subsequence keeping each token with probability `keep`, at least two.
fn subsequence(tokens: &[String], keep: f64, rng: &mut Rng) -> Vec<String> {
    let mut idx: Vec<usize> = (0..tokens.len()).filter(|_| rng.gen_bool(keep)).collect();
    if idx.len() < 2 {
        idx = rand::seq::index::sample(rng, tokens.len(), tokens.len().min(2)).into_vec();
        idx.sort_unstable();
    }
    idx.into_iter().map(|i| tokens[i].clone()).collect()
}

fn insert_randomly(mut tokens: Vec<String>, extra: Vec<String>, rng: &mut Rng) -> Vec<String> {
    for w in extra {
        let at = rng.gen_range(0..=tokens.len());
        tokens.insert(at, w);
    }
    tokens
}

fn two_of(pool: &[String], rng: &mut Rng) -> Vec<String> {
    pool.choose_multiple(rng, 2).cloned().collect()
}

fn pair_split(
    g: &Grammar,
    cfg: &SynthConfig,
    name: &str,
    n: usize,
    side: Side,
    noise: f64,
) -> Result<LabeledDataset> {
    let mut rng = rng_from(derive_seed_str(cfg.seed, name));
    let mut noise_rng = rng_from(derive_seed_str(cfg.seed, &format!("{name}/noise")));
    let mut classes: Vec<usize> = (0..n).map(|i| i % 3).collect();
    classes.shuffle(&mut rng);
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (i, &class) in classes.iter().enumerate() {
        let premise = g.sentence(cfg, &mut rng).tokens;
        let hypothesis = match class {
            0 => {
                let sub = subsequence(&premise, 0.6, &mut rng);
                insert_randomly(sub, two_of(&g.lex.fillers, &mut rng), &mut rng)
            }
            1 => {
                let sub = subsequence(&premise, 0.6, &mut rng);
                insert_randomly(sub, two_of(&g.lex.negators, &mut rng), &mut rng)
            }
            _ => {
                let other = g.sentence(cfg, &mut rng).tokens;
                let sub = subsequence(&other, 0.6, &mut rng);
                let extra = (0..2)
                    .map(|_| {
                        let pool = if rng.gen_bool(0.5) {
                            &g.lex.negators
                        } else {
                            &g.lex.fillers
                        };
                        pool.choose(&mut rng).unwrap().clone()
                    })
                    .collect();
                insert_randomly(sub, extra, &mut rng)
            }
        };
        let (a, b) = match side {
            Side::Source => (premise, hypothesis),
            Side::Target => {
                let a = g.encipher(&premise);
                let b = g.encipher(&hypothesis);
                let a = swap_units(&a, &vec![true; a.len()], cfg.swap_rate, &mut rng);
                let b = swap_units(&b, &vec![true; b.len()], cfg.swap_rate, &mut rng);
                (a, b)
            }
        };
        let label = if noise > 0.0 && noise_rng.gen_bool(noise) {
            (class + noise_rng.gen_range(1..3)) % 3
        } else {
            class
        };
        samples.push(Sample::pair(format!("{name}-{i}"), a, b));
        labels.push(vec![label]);
    }
    LabeledDataset::new(pair_vocab(), samples, Some(labels))
}

type SplitFn = fn(&Grammar, &SynthConfig, &str, usize, Side, f64) -> Result<LabeledDataset>;

fn benchmark(cfg: &SynthConfig, kind: SampleKind, split: SplitFn) -> Result<Benchmark> {
    cfg.validate()?;
    let g = Grammar::new(cfg);
    let source_train = split(
        &g,
        cfg,
        "src-train",
        cfg.train_size,
        Side::Source,
        cfg.label_noise,
    )?;
    let source_dev = split(&g, cfg, "src-dev", cfg.dev_size, Side::Source, 0.0)?;
    let source_test = split(&g, cfg, "src-test", cfg.test_size, Side::Source, 0.0)?;
    let target_train_gold = split(&g, cfg, "tgt-train", cfg.train_size, Side::Target, 0.0)?;
    let target_dev = split(&g, cfg, "tgt-dev", cfg.dev_size, Side::Target, 0.0)?;
    let target_test = split(&g, cfg, "tgt-test", cfg.test_size, Side::Target, 0.0)?;
    let vocab = source_train.vocab().clone();
    let identity = g.cipher.iter().filter(|(a, b)| a == b).count();
    Ok(Benchmark {
        manifest: Manifest {
            kind,
            config: cfg.clone(),
            labels: vocab.names().to_vec(),
            cipher: g.cipher,
            identity,
        },
        vocab,
        source_train,
        source_dev,
        source_test,
        target_train: target_train_gold.without_labels(),
        target_train_gold,
        target_dev,
        target_test,
    })
}

/// IOB2 entity tagging over the types in [`ENTITY_TYPES`].
pub fn gen_tagging_benchmark(cfg: &SynthConfig) -> Result<Benchmark> {
    benchmark(cfg, SampleKind::Tagging, tagging_split)
}

/// Three-way sentence-pair classification over [`PAIR_LABELS`]: the
/// hypothesis is a subsequence of the premise plus fillers (entailment), a
/// subsequence plus negators (contradiction) or drawn from another sentence
/// (neutral).
pub fn gen_pair_benchmark(cfg: &SynthConfig) -> Result<Benchmark> {
    benchmark(cfg, SampleKind::Pair, pair_split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Text;

    fn small() -> SynthConfig {
        SynthConfig {
            train_size: 60,
            dev_size: 20,
            test_size: 31,
            seed: 5,
            ..SynthConfig::default()
        }
    }

    fn tokens(d: &LabeledDataset) -> Vec<Vec<String>> {
        d.samples().iter().map(|s| s.parts().concat()).collect()
    }

    #[test]
    fn identity_cipher_reproduces_a_source_draw() {
        let cfg = SynthConfig {
            rho: 1.0,
            swap_rate: 0.0,
            ..small()
        };
        let b = gen_tagging_benchmark(&cfg).unwrap();
        let g = Grammar::new(&cfg);
        let fresh =
            tagging_split(&g, &cfg, "tgt-train", cfg.train_size, Side::Source, 0.0).unwrap();
        assert_eq!(tokens(&b.target_train), tokens(&fresh));
        assert_eq!(b.target_train_gold.labels(), fresh.labels());
        assert!(b.manifest.cipher.iter().all(|(a, b)| a == b));
    }

    #[test]
    fn full_cipher_shares_no_tokens() {
        let cfg = SynthConfig {
            rho: 0.0,
            ..small()
        };
        for b in [
            gen_tagging_benchmark(&cfg).unwrap(),
            gen_pair_benchmark(&cfg).unwrap(),
        ] {
            let src: HashSet<String> = tokens(&b.source_train).into_iter().flatten().collect();
            let tgt: HashSet<String> = tokens(&b.target_train).into_iter().flatten().collect();
            assert!(src.is_disjoint(&tgt));
            assert_eq!(b.manifest.identity, 0);
        }
    }

    #[test]
    fn cipher_is_a_bijection_and_nested_in_rho() {
        let lo = gen_tagging_benchmark(&SynthConfig {
            rho: 0.3,
            ..small()
        })
        .unwrap()
        .manifest;
        let hi = gen_tagging_benchmark(&SynthConfig {
            rho: 0.6,
            ..small()
        })
        .unwrap()
        .manifest;
        let images: HashSet<&String> = lo.cipher.values().collect();
        assert_eq!(images.len(), lo.cipher.len());
        for (k, v) in &lo.cipher {
            if k == v {
                assert_eq!(&hi.cipher[k], k);
            }
            if hi.cipher[k] != *k {
                assert_eq!(&hi.cipher[k], v);
            }
        }
        assert!(lo.identity < hi.identity);
    }

    #[test]
    fn labels_are_valid_iob2_and_survive_the_cipher() {
        let b = gen_tagging_benchmark(&small()).unwrap();
        for d in [&b.source_train, &b.target_test] {
            let pred = d.labels().unwrap().to_vec();
            assert_eq!(crate::metrics::micro_f1(d, &pred).unwrap().f1, 1.0);
        }
        let cfg = SynthConfig {
            swap_rate: 0.0,
            ..small()
        };
        let b = gen_tagging_benchmark(&cfg).unwrap();
        let g = Grammar::new(&cfg);
        let plain = tagging_split(&g, &cfg, "tgt-dev", cfg.dev_size, Side::Source, 0.0).unwrap();
        assert_eq!(plain.labels(), b.target_dev.labels());
        for (p, t) in plain.samples().iter().zip(b.target_dev.samples()) {
            let Text::Tagging(pt) = &p.text else { panic!() };
            assert_eq!(&g.encipher(pt), t.parts()[0]);
        }
    }

    #[test]
    fn pair_classes_balanced() {
        let b = gen_pair_benchmark(&small()).unwrap();
        for (_, d) in b.splits() {
            if !d.is_labeled() {
                continue;
            }
            let mut hist = [0usize; 3];
            for l in d.labels().unwrap() {
                hist[l[0]] += 1;
            }
            let (mn, mx) = (hist.iter().min().unwrap(), hist.iter().max().unwrap());
            assert!(mx - mn <= 1, "{hist:?}");
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            gen_tagging_benchmark(&small()).unwrap(),
            gen_tagging_benchmark(&small()).unwrap()
        );
        assert_eq!(
            gen_pair_benchmark(&small()).unwrap(),
            gen_pair_benchmark(&small()).unwrap()
        );
        assert_ne!(
            gen_pair_benchmark(&small()).unwrap(),
            gen_pair_benchmark(&SynthConfig { seed: 6, ..small() }).unwrap()
        );
    }

    #[test]
    fn invalid_configs() {
        assert!(matches!(
            gen_tagging_benchmark(&SynthConfig {
                rho: 1.5,
                ..small()
            }),
            Err(Error::ConfigInvalid(_))
        ));
        assert!(matches!(
            gen_pair_benchmark(&SynthConfig {
                train_size: 0,
                ..small()
            }),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn noise_corrupts_some_source_spans() {
        let clean = gen_tagging_benchmark(&small()).unwrap();
        let noisy = gen_tagging_benchmark(&SynthConfig {
            label_noise: 0.5,
            ..small()
        })
        .unwrap();
        assert_eq!(tokens(&clean.source_train), tokens(&noisy.source_train));
        assert_ne!(clean.source_train.labels(), noisy.source_train.labels());
        let pred = noisy.source_train.labels().unwrap().to_vec();
        assert_eq!(
            crate::metrics::micro_f1(&noisy.source_train, &pred)
                .unwrap()
                .f1,
            1.0
        );
        assert_eq!(clean.target_test, noisy.target_test);
    }
}
