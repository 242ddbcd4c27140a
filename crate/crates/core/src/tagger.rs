//! Linear softmax token classifier over hashed indicator features.
//!
//! Each token is scored independently: `p(c | token) = softmax(W x)` where
//! `x` holds indicator features of the token and its ±2 context. Training is
//! mini-batch gradient descent on mean cross-entropy plus an L2 penalty,
//! always from a zero model.

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence, Tag, NUM_TAGS};
use crate::error::{Error, Result};
use crate::rng;
use crate::sampling::TokenDistribution;

pub const DEFAULT_HASH_BITS: u32 = 20;
pub const CHECKPOINT_VERSION: u32 = 1;

type Row = [f64; NUM_TAGS];

/// Hashed indicator features of one token. All present features have
/// value 1.0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    pub ids: Vec<u32>,
}

fn word_shape(token: &str) -> String {
    token
        .chars()
        .map(|c| {
            if c.is_uppercase() {
                'X'
            } else if c.is_lowercase() {
                'x'
            } else if c.is_numeric() {
                'd'
            } else {
                c
            }
        })
        .collect()
}

fn context_word(tokens: &[String], at: isize) -> String {
    if at < 0 {
        "<s>".to_string()
    } else if at as usize >= tokens.len() {
        "</s>".to_string()
    } else {
        tokens[at as usize].to_lowercase()
    }
}

/// Human-readable feature names for token `i`.
pub fn feature_names(tokens: &[String], i: usize) -> Vec<String> {
    let token = &tokens[i];
    let chars: Vec<char> = token.chars().collect();
    let mut names = vec![
        "bias".to_string(),
        format!("w={token}"),
        format!("lw={}", token.to_lowercase()),
        format!("shape={}", word_shape(token)),
    ];
    for n in 1..=3.min(chars.len()) {
        let prefix: String = chars[..n].iter().collect();
        let suffix: String = chars[chars.len() - n..].iter().collect();
        names.push(format!("prefix{n}={prefix}"));
        names.push(format!("suffix{n}={suffix}"));
    }
    if i == 0 {
        names.push("is-first".to_string());
    }
    if i + 1 == tokens.len() {
        names.push("is-last".to_string());
    }
    for offset in [-2isize, -1, 1, 2] {
        names.push(format!(
            "w{offset:+}={}",
            context_word(tokens, i as isize + offset)
        ));
    }
    names
}

pub fn hash_feature(name: &str, bits: u32) -> u32 {
    let mask = if bits >= 32 {
        u64::from(u32::MAX)
    } else {
        (1u64 << bits) - 1
    };
    (rng::fnv1a(name.as_bytes()) & mask) as u32
}

pub fn featurize_tokens(tokens: &[String], i: usize, bits: u32) -> FeatureVector {
    let mut ids: Vec<u32> = feature_names(tokens, i)
        .iter()
        .map(|n| hash_feature(n, bits))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    FeatureVector { ids }
}

/// Features of token `i` in the default 2^20 hashed space.
pub fn featurize(sentence: &Sentence, i: usize) -> FeatureVector {
    featurize_tokens(&sentence.tokens, i, DEFAULT_HASH_BITS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Learning rate at epoch `e` is `learning_rate / (1 + lr_decay * e)`.
    pub lr_decay: f64,
    pub l2: f64,
    /// Sentences per gradient step.
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    pub hash_bits: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 1.0,
            lr_decay: 0.01,
            l2: 1e-4,
            batch_size: 8,
            seed: 0,
            shuffle: true,
            hash_bits: DEFAULT_HASH_BITS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.l2 < 0.0 || self.lr_decay < 0.0 {
            return Err(Error::Config(
                "learning_rate must be positive; l2 and lr_decay non-negative".into(),
            ));
        }
        if !(1..=32).contains(&self.hash_bits) {
            return Err(Error::Config("hash_bits must be in 1..=32".into()));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate / (1.0 + self.lr_decay * epoch as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub hash_bits: u32,
    /// Rows of class weights keyed by hashed feature id. Missing rows are
    /// zero.
    pub weights: IndexMap<u32, Row>,
    pub config: TrainConfig,
    /// Full objective after each epoch.
    pub loss_curve: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    hash_bits: u32,
    config: TrainConfig,
    loss_curve: Vec<f64>,
    weights: Vec<(u32, Row)>,
}

fn softmax(scores: &Row) -> Row {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; NUM_TAGS];
    let mut sum = 0.0;
    for (o, s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// A token reduced to weight-row indices and its target class.
struct Example {
    rows: Vec<usize>,
    target: usize,
}

fn scores(rows: &[Row], ex_rows: &[usize], scale: f64) -> Row {
    let mut s = [0.0; NUM_TAGS];
    for &r in ex_rows {
        for (acc, w) in s.iter_mut().zip(&rows[r]) {
            *acc += w;
        }
    }
    for v in &mut s {
        *v *= scale;
    }
    s
}

fn cross_entropy(probs: &Row, target: usize) -> f64 {
    -probs[target].max(f64::MIN_POSITIVE).ln()
}

/// Mean cross-entropy plus `l2/2 * ||W||^2`, with `W = scale * rows`.
fn objective(rows: &[Row], scale: f64, examples: &[&Example], l2: f64) -> f64 {
    let ce: f64 = examples
        .iter()
        .map(|ex| cross_entropy(&softmax(&scores(rows, &ex.rows, scale)), ex.target))
        .sum::<f64>()
        / examples.len() as f64;
    let norm: f64 = rows.iter().flatten().map(|w| w * w).sum::<f64>() * scale * scale;
    ce + 0.5 * l2 * norm
}

/// Gradient of the mean cross-entropy term over `examples`, accumulated
/// into `grad` (same shape as the weight rows).
fn accumulate_ce_gradient(rows: &[Row], scale: f64, examples: &[&Example], grad: &mut [Row]) {
    let inv = 1.0 / examples.len() as f64;
    for ex in examples {
        let mut delta = softmax(&scores(rows, &ex.rows, scale));
        delta[ex.target] -= 1.0;
        for &r in &ex.rows {
            for (g, d) in grad[r].iter_mut().zip(&delta) {
                *g += d * inv;
            }
        }
    }
}

struct Indexed {
    index: IndexMap<u32, usize>,
    sentences: Vec<Vec<Example>>,
}

fn index_corpus(labeled: &Corpus, bits: u32) -> Result<Indexed> {
    let mut index: IndexMap<u32, usize> = IndexMap::new();
    let mut sentences = Vec::with_capacity(labeled.len());
    for s in labeled {
        let gold = s.gold()?;
        let mut examples = Vec::with_capacity(s.len());
        for (i, tag) in gold.iter().enumerate() {
            let fv = featurize_tokens(&s.tokens, i, bits);
            let rows = fv
                .ids
                .iter()
                .map(|id| {
                    let next = index.len();
                    *index.entry(*id).or_insert(next)
                })
                .collect();
            examples.push(Example {
                rows,
                target: tag.index(),
            });
        }
        sentences.push(examples);
    }
    Ok(Indexed { index, sentences })
}

/// Fits a fresh model on `labeled`. Deterministic in (data, config).
pub fn train(labeled: &Corpus, cfg: &TrainConfig) -> Result<TaggerModel> {
    cfg.validate()?;
    if labeled.is_empty() {
        return Err(Error::Empty("cannot train on an empty corpus"));
    }
    let data = index_corpus(labeled, cfg.hash_bits)?;
    let all: Vec<&Example> = data.sentences.iter().flatten().collect();
    let mut rows = vec![[0.0; NUM_TAGS]; data.index.len()];
    let mut grad = vec![[0.0; NUM_TAGS]; data.index.len()];
    // W = scale * rows; L2 shrinkage only touches `scale`
    let mut scale = 1.0;
    let mut order: Vec<usize> = (0..data.sentences.len()).collect();
    let mut rng = rng::derive(cfg.seed, &[b"tagger-shuffle"]);
    let mut loss_curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        for batch in order.chunks(cfg.batch_size) {
            let examples: Vec<&Example> = batch
                .iter()
                .flat_map(|&si| data.sentences[si].iter())
                .collect();
            if examples.is_empty() {
                continue;
            }
            let touched: Vec<usize> = {
                let mut t: Vec<usize> = examples
                    .iter()
                    .flat_map(|e| e.rows.iter().copied())
                    .collect();
                t.sort_unstable();
                t.dedup();
                t
            };
            accumulate_ce_gradient(&rows, scale, &examples, &mut grad);
            scale *= 1.0 - lr * cfg.l2;
            for &r in &touched {
                for (w, g) in rows[r].iter_mut().zip(grad[r].iter_mut()) {
                    *w -= lr * *g / scale;
                    *g = 0.0;
                }
            }
            if scale < 1e-6 {
                for row in &mut rows {
                    for w in row.iter_mut() {
                        *w *= scale;
                    }
                }
                scale = 1.0;
            }
        }
        loss_curve.push(objective(&rows, scale, &all, cfg.l2));
    }

    let weights = data
        .index
        .iter()
        .map(|(&id, &r)| (id, rows[r].map(|w| w * scale)))
        .collect();
    Ok(TaggerModel {
        hash_bits: cfg.hash_bits,
        weights,
        config: cfg.clone(),
        loss_curve,
    })
}

impl TaggerModel {
    /// The untrained model: every distribution is uniform.
    pub fn zero(hash_bits: u32) -> Self {
        TaggerModel {
            hash_bits,
            weights: IndexMap::new(),
            config: TrainConfig {
                hash_bits,
                epochs: 0,
                ..TrainConfig::default()
            },
            loss_curve: Vec::new(),
        }
    }

    fn token_scores(&self, tokens: &[String], i: usize) -> Row {
        let mut s = [0.0; NUM_TAGS];
        for id in featurize_tokens(tokens, i, self.hash_bits).ids {
            if let Some(row) = self.weights.get(&id) {
                for (acc, w) in s.iter_mut().zip(row) {
                    *acc += w;
                }
            }
        }
        s
    }

    /// Raw class scores per token, before softmax.
    pub fn scores(&self, sentence: &Sentence) -> Vec<Row> {
        (0..sentence.len())
            .map(|i| self.token_scores(&sentence.tokens, i))
            .collect()
    }

    pub fn predict_proba(&self, sentence: &Sentence) -> Vec<TokenDistribution> {
        self.scores(sentence)
            .iter()
            .map(|s| TokenDistribution::from_softmax(softmax(s)))
            .collect()
    }

    pub fn predict(&self, sentence: &Sentence) -> Vec<Tag> {
        self.predict_proba(sentence)
            .iter()
            .map(|d| Tag::ALL[d.argmax()])
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut weights: Vec<(u32, Row)> = self.weights.iter().map(|(k, v)| (*k, *v)).collect();
        weights.sort_by_key(|(k, _)| *k);
        let ckpt = Checkpoint {
            version: CHECKPOINT_VERSION,
            hash_bits: self.hash_bits,
            config: self.config.clone(),
            loss_curve: self.loss_curve.clone(),
            weights,
        };
        let json = serde_json::to_vec(&ckpt)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_slice(&bytes)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        Ok(TaggerModel {
            hash_bits: ckpt.hash_bits,
            weights: ckpt.weights.into_iter().collect(),
            config: ckpt.config,
            loss_curve: ckpt.loss_curve,
        })
    }
}

pub fn predict_proba(model: &TaggerModel, sentence: &Sentence) -> Vec<TokenDistribution> {
    model.predict_proba(sentence)
}

/// Compares the analytic gradient of the training objective with central
/// finite differences (`h = 1e-5`) on a small random problem and returns
/// the largest relative error.
pub fn gradient_check(seed: u64) -> f64 {
    use rand::Rng;

    let mut rng = rng::derive(seed, &[b"gradient-check"]);
    let vocab = ["ka", "Bamako", "ye", "Musa", "2024", "ni", "Mali", "ORTM"];
    let sentences: Vec<Sentence> = (0..4)
        .map(|k| {
            let len = rng.gen_range(2..6);
            let tokens = (0..len)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].to_string())
                .collect();
            let gold = (0..len)
                .map(|_| Tag::ALL[rng.gen_range(0..NUM_TAGS)])
                .collect();
            Sentence::new(format!("g{k}"), tokens, Some(gold), "x").expect("valid sentence")
        })
        .collect();
    let corpus = Corpus::new("x", sentences).expect("unique ids");
    let data = index_corpus(&corpus, 10).expect("gold present");
    let examples: Vec<Example> = data.sentences.into_iter().flatten().collect();
    let refs: Vec<&Example> = examples.iter().collect();
    let l2 = 0.01;

    let mut rows: Vec<Row> = (0..data.index.len())
        .map(|_| std::array::from_fn(|_| rng.gen_range(-0.5..0.5)))
        .collect();
    let mut analytic = vec![[0.0; NUM_TAGS]; rows.len()];
    accumulate_ce_gradient(&rows, 1.0, &refs, &mut analytic);
    for (g, w) in analytic.iter_mut().zip(&rows) {
        for (gi, wi) in g.iter_mut().zip(w) {
            *gi += l2 * wi;
        }
    }

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for r in 0..rows.len() {
        for c in 0..NUM_TAGS {
            let orig = rows[r][c];
            rows[r][c] = orig + h;
            let up = objective(&rows, 1.0, &refs, l2);
            rows[r][c] = orig - h;
            let down = objective(&rows, 1.0, &refs, l2);
            rows[r][c] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[r][c];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}
