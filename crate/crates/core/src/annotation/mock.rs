//! Offline annotator that answers from gold labels with configurable noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::backend::{
    estimate_tokens, AnnotatorBackend, BackendError, Completion, CompletionRequest, TokenUsage,
};
use crate::annotation::prompt::{render_batch_output, render_output};
use crate::corpus::{Tag, NUM_TAGS};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MockProfile {
    /// Per-token probability of emitting the gold label.
    pub accuracy: f64,
    /// Per-request probability of an empty answer.
    pub empty_rate: f64,
    /// Per-sentence probability of dropping or duplicating one pair.
    pub omission_rate: f64,
    pub seed: u64,
}

impl MockProfile {
    pub fn perfect(seed: u64) -> Self {
        MockProfile {
            accuracy: 1.0,
            empty_rate: 0.0,
            omission_rate: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("accuracy", self.accuracy),
            ("empty_rate", self.empty_rate),
            ("omission_rate", self.omission_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("mock {name} {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Parses `accuracy=0.845,empty=0.0,omission=0.0,seed=1`. Missing keys
    /// keep the perfect-annotator defaults.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut p = MockProfile::perfect(0);
        for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("mock option {part:?} is not key=value")))?;
            let bad = || Error::Config(format!("mock option {part:?} has a bad value"));
            match key.trim() {
                "accuracy" => p.accuracy = value.trim().parse().map_err(|_| bad())?,
                "empty" | "empty_rate" => p.empty_rate = value.trim().parse().map_err(|_| bad())?,
                "omission" | "omission_rate" => {
                    p.omission_rate = value.trim().parse().map_err(|_| bad())?
                }
                "seed" => p.seed = value.trim().parse().map_err(|_| bad())?,
                other => return Err(Error::Config(format!("unknown mock option {other:?}"))),
            }
        }
        p.validate()?;
        Ok(p)
    }
}

/// Deterministic stand-in for an LLM annotator.
///
/// Randomness is keyed by (seed, nonce, sentence id), so a sentence gets the
/// same labels whether it is sent alone or in a batch, and results do not
/// depend on request scheduling. The empty-answer draw is keyed by the whole
/// request.
#[derive(Debug, Clone)]
pub struct MockAnnotator {
    pub profile: MockProfile,
}

impl MockAnnotator {
    pub fn new(profile: MockProfile) -> Result<Self> {
        profile.validate()?;
        Ok(MockAnnotator { profile })
    }

    fn noisy_labels(&self, gold: &[Tag], id: &str, nonce: u64) -> Vec<Tag> {
        let mut rng = rng::derive(
            self.profile.seed,
            &[b"mock-labels", &nonce.to_le_bytes(), id.as_bytes()],
        );
        gold.iter()
            .map(|&g| {
                if rng.gen::<f64>() < self.profile.accuracy {
                    g
                } else {
                    // uniform over the eight other tags
                    let k = rng.gen_range(0..NUM_TAGS - 1);
                    let k = if k >= g.index() { k + 1 } else { k };
                    Tag::ALL[k]
                }
            })
            .collect()
    }

    fn maybe_omit(&self, tokens: &mut Vec<String>, labels: &mut Vec<Tag>, id: &str, nonce: u64) {
        let mut rng = rng::derive(
            self.profile.seed,
            &[b"mock-omission", &nonce.to_le_bytes(), id.as_bytes()],
        );
        if rng.gen::<f64>() >= self.profile.omission_rate {
            return;
        }
        let at = rng.gen_range(0..tokens.len());
        if rng.gen::<bool>() {
            tokens.remove(at);
            labels.remove(at);
        } else {
            tokens.insert(at, tokens[at].clone());
            labels.insert(at, labels[at]);
        }
    }
}

impl AnnotatorBackend for MockAnnotator {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        if request.sentences.is_empty() {
            return Err(BackendError::Fatal(
                "mock annotator got no sentences".into(),
            ));
        }
        let mut key = Vec::new();
        for s in &request.sentences {
            key.extend_from_slice(s.id.as_bytes());
            key.push(0);
        }
        let mut rng = rng::derive(
            self.profile.seed,
            &[b"mock-empty", &request.nonce.to_le_bytes(), &key],
        );
        let text = if rng.gen::<f64>() < self.profile.empty_rate {
            String::new()
        } else {
            let mut items = Vec::with_capacity(request.sentences.len());
            for s in &request.sentences {
                let gold = s
                    .gold
                    .as_deref()
                    .ok_or_else(|| BackendError::Fatal(format!("mock needs gold for {}", s.id)))?;
                let mut labels = self.noisy_labels(gold, &s.id, request.nonce);
                let mut tokens = s.tokens.clone();
                self.maybe_omit(&mut tokens, &mut labels, &s.id, request.nonce);
                items.push((tokens, labels));
            }
            if let [(tokens, labels)] = items.as_slice() {
                render_output(tokens, labels)
            } else {
                let refs: Vec<(&[String], &[Tag])> = items
                    .iter()
                    .map(|(t, l)| (t.as_slice(), l.as_slice()))
                    .collect();
                render_batch_output(&refs)
            }
        };
        let usage = TokenUsage {
            input_tokens: estimate_tokens(&request.prompt),
            output_tokens: estimate_tokens(&text),
        };
        Ok(Completion { text, usage })
    }

    fn name(&self) -> String {
        format!(
            "mock:accuracy={},empty={},omission={},seed={}",
            self.profile.accuracy,
            self.profile.empty_rate,
            self.profile.omission_rate,
            self.profile.seed
        )
    }
}
