//! Synthetic BIO corpora with learnable lexical and contextual entity cues.
//!
//! Entity names are pseudo-words drawn from Zipf-distributed inventories, so
//! a small training set sees the frequent names and misses the long tail.
//! Context words ("in", "Dr", "said", month names) carry signal that
//! generalizes to unseen names. A share of names is ambiguous between
//! person and location, and sentence-initial filler words are capitalized.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EntityClass, Sentence, Tag};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_sentences: usize,
    pub language: String,
    pub seed: u64,
    /// Share of sentences with no entity at all.
    pub no_entity_rate: f64,
    pub min_len: usize,
    pub max_len: usize,
    /// Inventory size per entity class.
    pub names_per_class: usize,
    pub filler_vocab: usize,
    /// Zipf exponent for name and filler frequencies.
    pub zipf_exponent: f64,
    /// Probability that an entity comes with its contextual cue word.
    pub cue_rate: f64,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_sentences: 2000,
            language: "syn".into(),
            seed: 0,
            no_entity_rate: 0.35,
            min_len: 8,
            max_len: 22,
            names_per_class: 400,
            filler_vocab: 600,
            zipf_exponent: 1.1,
            cue_rate: 0.6,
            id_prefix: "syn".into(),
        }
    }
}

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "s", "t", "y", "w", "dj", "ny", "ts", "kh",
];
const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ou"];
const MONTHS: [&str; 12] = [
    "Zanwuye",
    "Feburuye",
    "Marisi",
    "Awirili",
    "Mɛ",
    "Zuwɛn",
    "Zuluye",
    "Uti",
    "Sɛtanburu",
    "Ɔkutɔburu",
    "Nowanburu",
    "Desanburu",
];
const WEEKDAYS: [&str; 7] = [
    "Ntɛnɛ", "Tarata", "Araba", "Alamisa", "Juma", "Sibiri", "Kari",
];
const PER_TITLES: [&str; 4] = ["Dr", "Madame", "Sɛnatɛri", "Mr"];
const PER_AFTER: [&str; 3] = ["ko", "y'a", "fɔra"];
const LOC_BEFORE: [&str; 4] = ["in", "ka", "fo", "kɔnɔ"];
const ORG_HEADS: [&str; 6] = ["Banki", "Jɛkulu", "Union", "Parti", "FC", "Ministri"];
const DATE_BEFORE: [&str; 2] = ["san", "tile"];

struct Inventory {
    names: Vec<Vec<String>>,
    weights: WeightedIndex<f64>,
}

impl Inventory {
    fn draw(&self, rng: &mut ChaCha8Rng) -> &[String] {
        &self.names[self.weights.sample(rng)]
    }
}

fn zipf(n: usize, s: f64) -> WeightedIndex<f64> {
    WeightedIndex::new((1..=n).map(|r| 1.0 / (r as f64).powf(s))).expect("positive weights")
}

fn syllables(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.gen_range(lo..=hi);
    (0..n)
        .map(|_| {
            let onset = ONSETS[rng.gen_range(0..ONSETS.len())];
            let vowel = VOWELS[rng.gen_range(0..VOWELS.len())];
            format!("{onset}{vowel}")
        })
        .collect()
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn make_names(
    rng: &mut ChaCha8Rng,
    cfg: &SynthConfig,
    class: EntityClass,
    shared: &[Vec<String>],
) -> Inventory {
    let mut names = Vec::with_capacity(cfg.names_per_class);
    for i in 0..cfg.names_per_class {
        // every tenth person/location name is shared between the two classes
        if matches!(class, EntityClass::Per | EntityClass::Loc)
            && i % 10 == 5
            && i / 10 < shared.len()
        {
            names.push(shared[i / 10].clone());
            continue;
        }
        let name = match class {
            EntityClass::Per => {
                let mut n = vec![capitalize(&syllables(rng, 2, 3))];
                if rng.gen_bool(0.6) {
                    n.push(capitalize(&syllables(rng, 2, 3)));
                }
                n
            }
            EntityClass::Loc => {
                let mut n = vec![capitalize(&syllables(rng, 2, 4))];
                if rng.gen_bool(0.2) {
                    n.push(capitalize(&syllables(rng, 1, 2)));
                }
                n
            }
            EntityClass::Org => {
                let mut n: Vec<String> = (0..rng.gen_range(1..=2))
                    .map(|_| capitalize(&syllables(rng, 1, 3)))
                    .collect();
                if rng.gen_bool(0.7) {
                    n.push(ORG_HEADS[rng.gen_range(0..ORG_HEADS.len())].to_string());
                } else {
                    n = vec![syllables(rng, 2, 3).to_uppercase()];
                }
                n
            }
            EntityClass::Date => unreachable!("dates are generated from patterns"),
        };
        names.push(name);
    }
    Inventory {
        weights: zipf(names.len(), cfg.zipf_exponent),
        names,
    }
}

fn date(rng: &mut ChaCha8Rng) -> Vec<String> {
    match rng.gen_range(0..4) {
        0 => vec![
            rng.gen_range(1..=28).to_string(),
            MONTHS[rng.gen_range(0..12)].to_string(),
            rng.gen_range(1990..=2024).to_string(),
        ],
        1 => vec![
            MONTHS[rng.gen_range(0..12)].to_string(),
            rng.gen_range(1990..=2024).to_string(),
        ],
        2 => vec![WEEKDAYS[rng.gen_range(0..7)].to_string()],
        _ => vec![rng.gen_range(1960..=2024).to_string()],
    }
}

fn push_entity(
    tokens: &mut Vec<String>,
    tags: &mut Vec<Tag>,
    words: &[String],
    class: EntityClass,
) {
    for (k, w) in words.iter().enumerate() {
        tokens.push(w.clone());
        tags.push(if k == 0 {
            class.begin()
        } else {
            class.inside()
        });
    }
}

fn push_o(tokens: &mut Vec<String>, tags: &mut Vec<Tag>, w: &str) {
    tokens.push(w.to_string());
    tags.push(Tag::O);
}

/// Generates a corpus. Deterministic in `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<Corpus> {
    let mut rng = rng::derive(cfg.seed, &[b"synth-lexicon"]);
    let filler: Vec<String> = (0..cfg.filler_vocab)
        .map(|_| syllables(&mut rng, 1, 3))
        .collect();
    let filler_w = zipf(filler.len(), cfg.zipf_exponent);
    let shared: Vec<Vec<String>> = (0..cfg.names_per_class / 10)
        .map(|_| vec![capitalize(&syllables(&mut rng, 2, 3))])
        .collect();
    let per = make_names(&mut rng, cfg, EntityClass::Per, &shared);
    let org = make_names(&mut rng, cfg, EntityClass::Org, &shared);
    let loc = make_names(&mut rng, cfg, EntityClass::Loc, &shared);
    let class_w = WeightedIndex::new([0.35, 0.2, 0.3, 0.15]).expect("weights");

    let mut rng = rng::derive(cfg.seed, &[b"synth-sentences"]);
    let mut sentences = Vec::with_capacity(cfg.n_sentences);
    for i in 0..cfg.n_sentences {
        let target_len = rng.gen_range(cfg.min_len..=cfg.max_len);
        let n_entities = if rng.gen_bool(cfg.no_entity_rate) {
            0
        } else {
            rng.gen_range(1..=3)
        };
        // slots where entities start, spread over the sentence
        let mut slots: Vec<usize> = (0..n_entities)
            .map(|_| rng.gen_range(0..target_len))
            .collect();
        slots.sort_unstable();

        let mut tokens = Vec::new();
        let mut tags = Vec::new();
        let mut next_slot = 0;
        let mut pos = 0;
        while pos < target_len || next_slot < slots.len() {
            if next_slot < slots.len() && slots[next_slot] <= pos {
                next_slot += 1;
                let class = EntityClass::ALL[class_w.sample(&mut rng)];
                let cue = rng.gen_bool(cfg.cue_rate);
                match class {
                    EntityClass::Per => {
                        if cue {
                            push_o(&mut tokens, &mut tags, PER_TITLES[rng.gen_range(0..4)]);
                        }
                        push_entity(&mut tokens, &mut tags, per.draw(&mut rng), class);
                        if cue && rng.gen_bool(0.5) {
                            push_o(&mut tokens, &mut tags, PER_AFTER[rng.gen_range(0..3)]);
                        }
                    }
                    EntityClass::Loc => {
                        if cue {
                            push_o(&mut tokens, &mut tags, LOC_BEFORE[rng.gen_range(0..4)]);
                        }
                        push_entity(&mut tokens, &mut tags, loc.draw(&mut rng), class);
                    }
                    EntityClass::Org => {
                        push_entity(&mut tokens, &mut tags, org.draw(&mut rng), class);
                    }
                    EntityClass::Date => {
                        if cue {
                            push_o(&mut tokens, &mut tags, DATE_BEFORE[rng.gen_range(0..2)]);
                        }
                        push_entity(&mut tokens, &mut tags, &date(&mut rng), class);
                    }
                }
                pos += 2;
            } else {
                let w = &filler[filler_w.sample(&mut rng)];
                if tokens.is_empty() {
                    push_o(&mut tokens, &mut tags, &capitalize(w));
                } else {
                    push_o(&mut tokens, &mut tags, w);
                }
                pos += 1;
            }
        }
        tokens.push(".".into());
        tags.push(Tag::O);
        sentences.push(Sentence::new(
            format!("{}-{i:05}", cfg.id_prefix),
            tokens,
            Some(tags),
            cfg.language.clone(),
        )?);
    }
    Corpus::new(cfg.language.clone(), sentences)
}

/// Generates a train corpus of `cfg.n_sentences` and a test corpus of
/// `n_test` sentences that share the lexicon but not sentences.
pub fn generate_split(cfg: &SynthConfig, n_test: usize) -> Result<(Corpus, Corpus)> {
    let total = SynthConfig {
        n_sentences: cfg.n_sentences + n_test,
        ..cfg.clone()
    };
    let mut all = generate(&total)?;
    let test = all.sentences.split_off(cfg.n_sentences);
    let test = Corpus::new(cfg.language.clone(), test)?;
    Ok((all, test))
}
