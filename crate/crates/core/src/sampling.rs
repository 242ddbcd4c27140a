//! Uncertainty scoring and subset selection.
//!
//! Token uncertainty is the Shannon entropy (in nats) of the tagger's class
//! distribution; a sentence is scored by the mean entropy of its tokens.
//! [`balanced_sample`] draws an entity-balanced evaluation subset by
//! weighting entity-count ranks with a Gaussian centred on the median rank.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{entity_proportion, Corpus, Sentence, NUM_TAGS};
use crate::error::{Error, Result};
use crate::rng;

const SUM_TOLERANCE: f64 = 1e-6;

/// A probability distribution over the nine tags, in [`Tag::ALL`] order.
///
/// [`Tag::ALL`]: crate::corpus::Tag::ALL
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TokenDistribution {
    probs: [f64; NUM_TAGS],
}

impl TokenDistribution {
    pub fn new(probs: [f64; NUM_TAGS]) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(format!(
                "distribution has a negative or non-finite entry: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Config(format!(
                "distribution sums to {sum}, expected 1"
            )));
        }
        Ok(TokenDistribution { probs })
    }

    /// Caller guarantees validity (softmax output).
    pub(crate) fn from_softmax(probs: [f64; NUM_TAGS]) -> Self {
        debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
        TokenDistribution { probs }
    }

    pub fn uniform() -> Self {
        TokenDistribution {
            probs: [1.0 / NUM_TAGS as f64; NUM_TAGS],
        }
    }

    pub fn one_hot(class: usize) -> Self {
        assert!(class < NUM_TAGS, "class index {class} out of range");
        let mut probs = [0.0; NUM_TAGS];
        probs[class] = 1.0;
        TokenDistribution { probs }
    }

    pub fn probs(&self) -> &[f64; NUM_TAGS] {
        &self.probs
    }

    /// Index of the most probable class; ties go to the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Entropy in nats, with `0 ln 0 = 0`. Lies in `[0, ln 9]`.
pub fn token_entropy(d: &TokenDistribution) -> f64 {
    let h: f64 = d
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    // rounding can leave -0.0 or a hair above ln 9
    h.clamp(0.0, (NUM_TAGS as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntropy {
    pub sentence_id: String,
    pub value: f64,
}

/// Mean token entropy of a sentence.
pub fn sample_entropy(ds: &[TokenDistribution]) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Empty("sample entropy of zero tokens"));
    }
    Ok(ds.iter().map(token_entropy).sum::<f64>() / ds.len() as f64)
}

/// `ceil(fraction * base_size)`, ignoring float noise below 1e-9.
pub fn selection_size(fraction: f64, base_size: usize) -> usize {
    let raw = fraction * base_size as f64;
    (raw - 1e-9).ceil().max(0.0) as usize
}

fn by_entropy_desc(a: &SampleEntropy, b: &SampleEntropy) -> Ordering {
    b.value
        .total_cmp(&a.value)
        .then_with(|| a.sentence_id.cmp(&b.sentence_id))
}

/// Picks the `ceil(fraction * base_size)` most uncertain sentences (capped
/// at the pool size), highest entropy first, ties by ascending id.
///
/// `base_size` is the size of the original training set, not the
/// remaining pool.
pub fn select_most_uncertain(
    pool: &[SampleEntropy],
    fraction: f64,
    base_size: usize,
) -> Result<Vec<String>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "selection fraction {fraction} outside (0, 1]"
        )));
    }
    let k = selection_size(fraction, base_size).min(pool.len());
    let mut ranked: Vec<&SampleEntropy> = pool.iter().collect();
    ranked.sort_by(|a, b| by_entropy_desc(a, b));
    Ok(ranked
        .into_iter()
        .take(k)
        .map(|s| s.sentence_id.clone())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalancedSamplerConfig {
    pub min_proportion: f64,
    pub max_proportion: f64,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for BalancedSamplerConfig {
    fn default() -> Self {
        BalancedSamplerConfig {
            min_proportion: 0.05,
            max_proportion: 0.50,
            sample_size: 50,
            seed: 0,
        }
    }
}

impl BalancedSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.min_proportion
            && self.min_proportion < self.max_proportion
            && self.max_proportion <= 1.0;
        if !ok {
            return Err(Error::Config(format!(
                "need 0 <= min_proportion < max_proportion <= 1, got {} and {}",
                self.min_proportion, self.max_proportion
            )));
        }
        if self.sample_size == 0 {
            return Err(Error::Config("sample_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BalancedSample {
    pub corpus: Corpus,
    pub filtered_pool_size: usize,
    /// Set when the filtered pool was smaller than the requested size and
    /// was returned whole.
    pub undersized: bool,
    pub pool_class_shares: [f64; 4],
    pub sample_class_shares: [f64; 4],
}

/// Gaussian rank weights `exp(-(x - n/2)^2 / (2 (n/4)^2))` for zero-based
/// ranks `x` in `0..n`, before normalization.
pub fn gaussian_rank_weights(n: usize) -> Vec<f64> {
    let mu = n as f64 / 2.0;
    let sigma = n as f64 / 4.0;
    (0..n)
        .map(|x| {
            let d = x as f64 - mu;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect()
}

/// Sentences with at least one entity token and an entity proportion within
/// `[min, max]`.
pub fn proportion_filter<'a>(
    corpus: &'a Corpus,
    cfg: &BalancedSamplerConfig,
) -> Result<Vec<&'a Sentence>> {
    let mut kept = Vec::new();
    for s in corpus {
        if s.entity_token_count()? == 0 {
            continue;
        }
        let p = entity_proportion(s)?.value();
        if cfg.min_proportion <= p && p <= cfg.max_proportion {
            kept.push(s);
        }
    }
    Ok(kept)
}

/// Draws `k` distinct indices, one at a time, each with probability
/// proportional to its weight among those not yet drawn.
fn weighted_without_replacement(weights: &[f64], k: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut remaining: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    let mut out = Vec::with_capacity(k);
    while out.len() < k && !remaining.is_empty() {
        let total: f64 = remaining.iter().map(|(_, w)| w).sum();
        let mut target = rng.gen::<f64>() * total;
        let mut pick = remaining.len() - 1;
        for (j, (_, w)) in remaining.iter().enumerate() {
            if target < *w {
                pick = j;
                break;
            }
            target -= w;
        }
        out.push(remaining.remove(pick).0);
    }
    out
}

/// Entity-balanced subsampling.
///
/// Filters by entity proportion, sorts by entity token count (descending,
/// ties by id), weights each sentence by its rank under a Gaussian centred
/// at the middle rank, and draws `sample_size` sentences without
/// replacement. Output keeps the drawn order.
pub fn balanced_sample(corpus: &Corpus, cfg: &BalancedSamplerConfig) -> Result<BalancedSample> {
    cfg.validate()?;
    let mut pool = proportion_filter(corpus, cfg)?;
    let mut counts = Vec::with_capacity(pool.len());
    for s in &pool {
        counts.push((s.entity_token_count()?, s.id.as_str()));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.sort_by(|&a, &b| {
        counts[b]
            .0
            .cmp(&counts[a].0)
            .then(counts[a].1.cmp(counts[b].1))
    });
    pool = order.into_iter().map(|i| pool[i]).collect();

    let n = pool.len();
    let pool_corpus = Corpus {
        sentences: pool.iter().map(|s| (*s).clone()).collect(),
        language: corpus.language.clone(),
    };
    let pool_class_shares = pool_corpus.class_shares()?;

    let (sentences, undersized) = if n <= cfg.sample_size {
        if n < cfg.sample_size {
            log::warn!(
                "filtered pool has {n} sentences, fewer than the requested {}; returning all",
                cfg.sample_size
            );
        }
        (pool_corpus.sentences.clone(), n < cfg.sample_size)
    } else {
        let weights = gaussian_rank_weights(n);
        let total: f64 = weights.iter().sum();
        let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut rng = rng::derive(cfg.seed, &[b"balanced-sample"]);
        let picks = weighted_without_replacement(&normalized, cfg.sample_size, &mut rng);
        (
            picks
                .into_iter()
                .map(|i| pool_corpus.sentences[i].clone())
                .collect(),
            false,
        )
    };
    let sample = Corpus {
        sentences,
        language: corpus.language.clone(),
    };
    let sample_class_shares = sample.class_shares()?;
    Ok(BalancedSample {
        corpus: sample,
        filtered_pool_size: n,
        undersized,
        pool_class_shares,
        sample_class_shares,
    })
}

/// Total-variation distance between two discrete distributions.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;
    use proptest::prelude::*;

    const LN9: f64 = 2.197_224_577_336_219_6;

    #[test]
    fn entropy_reference_cases() {
        assert!((token_entropy(&TokenDistribution::uniform()) - LN9).abs() < 1e-12);
        assert_eq!(token_entropy(&TokenDistribution::one_hot(3)), 0.0);
        let mut p = [0.0; NUM_TAGS];
        p[0] = 0.5;
        p[1] = 0.5;
        let d = TokenDistribution::new(p).unwrap();
        assert!((token_entropy(&d) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn distribution_validation() {
        assert!(TokenDistribution::new([0.1; NUM_TAGS]).is_err());
        let mut p = [0.0; NUM_TAGS];
        p[0] = 1.5;
        p[1] = -0.5;
        assert!(TokenDistribution::new(p).is_err());
    }

    #[test]
    fn sample_entropy_cases() {
        let hot = TokenDistribution::one_hot(0);
        assert_eq!(sample_entropy(&[hot, hot]).unwrap(), 0.0);
        let mut p = [0.0; NUM_TAGS];
        p[0] = 0.5;
        p[4] = 0.5;
        let half = TokenDistribution::new(p).unwrap();
        let m = sample_entropy(&[hot, half]).unwrap();
        assert!((m - 0.346_573_590_279_972_6).abs() < 1e-12);
        assert_eq!(sample_entropy(&[half]).unwrap(), token_entropy(&half));
        assert!(sample_entropy(&[]).is_err());
    }

    fn scored(id: &str, value: f64) -> SampleEntropy {
        SampleEntropy {
            sentence_id: id.into(),
            value,
        }
    }

    #[test]
    fn selection_size_and_caps() {
        assert_eq!(selection_size(0.05, 40), 2);
        assert_eq!(selection_size(0.05, 2000), 100);
        assert_eq!(selection_size(0.05, 41), 3);
        let pool = vec![scored("a", 0.3)];
        assert_eq!(select_most_uncertain(&pool, 0.05, 100).unwrap(), ["a"]);
        assert!(select_most_uncertain(&[], 0.05, 100).unwrap().is_empty());
        assert!(select_most_uncertain(&pool, 0.0, 100).is_err());
    }

    #[test]
    fn ties_break_by_id() {
        let pool = vec![scored("b", 1.0), scored("a", 1.0), scored("c", 0.5)];
        assert_eq!(select_most_uncertain(&pool, 1.0, 2).unwrap(), ["a", "b"]);
    }

    #[test]
    fn gaussian_weights_reference_points() {
        let w = gaussian_rank_weights(100);
        assert_eq!(w[50], 1.0);
        assert!((w[75] - (-0.5f64).exp()).abs() < 1e-12);
        assert!((w[75] - 0.606_530_659_712_633_4).abs() < 1e-12);
        assert!(gaussian_rank_weights(0).is_empty());
    }

    fn sentence(id: &str, entities: usize, len: usize) -> Sentence {
        let mut pairs: Vec<(&str, &str)> = vec![("w", "O"); len];
        for p in pairs.iter_mut().take(entities) {
            p.1 = "B-LOC";
        }
        Sentence::from_pairs(id, "x", &pairs).unwrap()
    }

    #[test]
    fn filter_bounds() {
        let corpus = Corpus::new(
            "x",
            vec![
                sentence("low", 1, 25),  // 0.04
                sentence("edge", 1, 20), // 0.05
                sentence("mid", 3, 10),
                sentence("high", 6, 10),
                sentence("none", 0, 10),
                sentence("half", 5, 10),
            ],
        )
        .unwrap();
        let cfg = BalancedSamplerConfig::default();
        let ids: Vec<_> = proportion_filter(&corpus, &cfg)
            .unwrap()
            .iter()
            .map(|s| s.id.clone())
            .collect();
        assert_eq!(ids, ["edge", "mid", "half"]);
    }

    #[test]
    fn undersized_pool_returned_whole() {
        let corpus = Corpus::new("x", vec![sentence("a", 2, 10), sentence("b", 1, 10)]).unwrap();
        let out = balanced_sample(&corpus, &BalancedSamplerConfig::default()).unwrap();
        assert!(out.undersized);
        assert_eq!(out.corpus.len(), 2);
        // sorted by entity count, descending
        assert_eq!(out.corpus.sentences[0].id, "a");
    }

    #[test]
    fn balanced_sample_is_seed_deterministic() {
        let sentences = (0..200)
            .map(|i| sentence(&format!("s{i:03}"), 1 + i % 4, 10))
            .collect();
        let corpus = Corpus::new("x", sentences).unwrap();
        let cfg = BalancedSamplerConfig {
            sample_size: 20,
            seed: 7,
            ..Default::default()
        };
        let a = balanced_sample(&corpus, &cfg).unwrap();
        let b = balanced_sample(&corpus, &cfg).unwrap();
        assert_eq!(a.corpus, b.corpus);
        let mut ids: Vec<_> = a.corpus.iter().map(|s| &s.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 20);
    }

    #[test]
    fn weighted_draw_never_repeats() {
        let mut r = rng::seeded(3);
        let picks = weighted_without_replacement(&[0.0, 1.0, 0.0, 1.0, 1.0], 5, &mut r);
        let mut sorted = picks.clone();
        sorted.sort();
        assert_eq!(sorted, [0, 1, 2, 3, 4]);
        // positive weights always come before zero weights
        assert!(picks[..3].iter().all(|i| [1, 3, 4].contains(i)));
    }

    fn simplex() -> impl Strategy<Value = [f64; NUM_TAGS]> {
        prop::array::uniform9(0.0f64..1.0).prop_filter_map("non-zero mass", |raw| {
            let s: f64 = raw.iter().sum();
            (s > 1e-9).then(|| raw.map(|x| x / s))
        })
    }

    proptest! {
        #[test]
        fn entropy_bounded_and_permutation_invariant(p in simplex(), rot in 0usize..NUM_TAGS) {
            let d = TokenDistribution::new(p).unwrap();
            let h = token_entropy(&d);
            prop_assert!((0.0..=LN9).contains(&h));
            let mut q = p;
            q.rotate_left(rot);
            q.swap(0, NUM_TAGS - 1);
            let h2 = token_entropy(&TokenDistribution::new(q).unwrap());
            prop_assert!((h - h2).abs() < 1e-12);
        }

        #[test]
        fn selection_matches_full_sort(values in prop::collection::vec(0u8..6, 0..60), frac in 0.01f64..1.0) {
            let pool: Vec<_> = values
                .iter()
                .enumerate()
                .map(|(i, v)| scored(&format!("id{i:02}"), f64::from(*v) / 3.0))
                .collect();
            let got = select_most_uncertain(&pool, frac, pool.len()).unwrap();
            let mut dedup = got.clone();
            dedup.sort();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), got.len());

            let mut brute = pool.clone();
            brute.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap().then(a.sentence_id.cmp(&b.sentence_id)));
            let k = ((frac * pool.len() as f64) - 1e-9).ceil().max(0.0) as usize;
            let expect: Vec<_> = brute.into_iter().take(k.min(pool.len())).map(|s| s.sentence_id).collect();
            prop_assert_eq!(got, expect);
        }
    }
}
