//! Leakage checks for the annotator model.
//!
//! The contamination score asks the model to name the source dataset of
//! sampled records; a high hit rate suggests the dataset was seen in
//! training. The completion probe shows the model the first part of a
//! record and checks whether it reproduces the rest.

use std::collections::HashMap;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::annotation::backend::{complete_with_retries, estimate_tokens};
use crate::annotation::{
    AnnotatorBackend, BackendError, Completion, CompletionRequest, RetryPolicy, TokenUsage,
};
use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::rng;

/// Token-overlap similarity at or above which a completion counts as a
/// near-exact match.
pub const NEAR_EXACT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContaminationConfig {
    pub dataset: String,
    pub n_records: usize,
    pub n_runs: usize,
    pub temperature: f64,
    pub multilingual: bool,
    pub languages_per_dataset: usize,
    pub records_per_language: usize,
    /// Accepted answers besides the dataset name itself.
    pub aliases: Vec<String>,
    pub seed: u64,
}

impl Default for ContaminationConfig {
    fn default() -> Self {
        ContaminationConfig {
            dataset: String::new(),
            n_records: 30,
            n_runs: 3,
            temperature: 0.0,
            multilingual: false,
            languages_per_dataset: 3,
            records_per_language: 10,
            aliases: Vec::new(),
            seed: 0,
        }
    }
}

impl ContaminationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dataset.trim().is_empty() {
            return Err(Error::Config("dataset name is required".into()));
        }
        if self.n_records == 0 || self.n_runs == 0 {
            return Err(Error::Config(
                "n_records and n_runs must be positive".into(),
            ));
        }
        if self.multilingual
            && self.languages_per_dataset * self.records_per_language != self.n_records
        {
            return Err(Error::Config(format!(
                "{} languages x {} records does not give {} records",
                self.languages_per_dataset, self.records_per_language, self.n_records
            )));
        }
        Ok(())
    }

    /// Normalized accepted answers: the dataset name and its aliases.
    pub fn accepted(&self) -> Vec<String> {
        std::iter::once(&self.dataset)
            .chain(&self.aliases)
            .map(|a| normalize_answer(a))
            .collect()
    }
}

/// One record with the dataset it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContaminationSample {
    #[serde(flatten)]
    pub sentence: Sentence,
    pub source: String,
}

pub fn read_samples(reader: impl BufRead) -> Result<Vec<ContaminationSample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<samples>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: ContaminationSample =
            serde_json::from_str(&line).map_err(|e| Error::Schema {
                record: i + 1,
                message: e.to_string(),
            })?;
        sample.sentence.validate()?;
        out.push(sample);
    }
    Ok(out)
}

/// The source-identification prompt for one record.
pub fn identification_prompt(sentence: &Sentence, multilingual: bool) -> String {
    let kind = if multilingual {
        "multilingual NER"
    } else {
        "NER"
    };
    format!(
        "Identify the source {kind} dataset for this sample. Respond with the dataset name alone. {}",
        sentence.tokens.join(" ")
    )
}

/// Draws the records to query. Multilingual datasets get
/// `records_per_language` records from each of `languages_per_dataset`
/// randomly chosen languages; otherwise `n_records` come from the pool.
pub fn draw_samples(
    pool: &[Corpus],
    cfg: &ContaminationConfig,
) -> Result<Vec<ContaminationSample>> {
    cfg.validate()?;
    let mut rng = rng::derive(cfg.seed, &[b"contamination-draw", cfg.dataset.as_bytes()]);
    let wrap = |s: &Sentence| ContaminationSample {
        sentence: s.clone(),
        source: cfg.dataset.clone(),
    };
    if !cfg.multilingual {
        let all: Vec<&Sentence> = pool.iter().flat_map(|c| c.iter()).collect();
        if all.len() < cfg.n_records {
            return Err(Error::Config(format!(
                "need {} records, pool has {}",
                cfg.n_records,
                all.len()
            )));
        }
        return Ok(all
            .choose_multiple(&mut rng, cfg.n_records)
            .map(|s| wrap(s))
            .collect());
    }
    let eligible: Vec<&Corpus> = pool
        .iter()
        .filter(|c| c.len() >= cfg.records_per_language)
        .collect();
    if eligible.len() < cfg.languages_per_dataset {
        return Err(Error::Config(format!(
            "need {} languages with at least {} records, found {}",
            cfg.languages_per_dataset,
            cfg.records_per_language,
            eligible.len()
        )));
    }
    let mut out = Vec::with_capacity(cfg.n_records);
    for corpus in eligible.choose_multiple(&mut rng, cfg.languages_per_dataset) {
        out.extend(
            corpus
                .sentences
                .choose_multiple(&mut rng, cfg.records_per_language)
                .map(wrap),
        );
    }
    Ok(out)
}

/// Lowercases and strips surrounding whitespace, quotes and trailing periods.
pub fn normalize_answer(answer: &str) -> String {
    answer
        .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '`'))
        .trim_end_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '`' | '.'))
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub dataset: String,
    pub n_records: usize,
    pub per_run_correct: Vec<usize>,
    pub per_run_score: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation over runs.
    pub std: f64,
    /// Requests that failed and were counted as wrong.
    pub failed_requests: usize,
    pub token_usage: TokenUsage,
}

/// Runs the identification task `n_runs` times over `samples`. Run `r` is
/// sent with nonce `r`.
pub fn contamination_score(
    samples: &[ContaminationSample],
    backend: &dyn AnnotatorBackend,
    cfg: &ContaminationConfig,
    retry: &RetryPolicy,
) -> Result<ContaminationReport> {
    cfg.validate()?;
    if samples.len() != cfg.n_records {
        return Err(Error::Config(format!(
            "expected {} samples, got {}",
            cfg.n_records,
            samples.len()
        )));
    }
    let mut per_run_correct = Vec::with_capacity(cfg.n_runs);
    let mut failed_requests = 0;
    let mut token_usage = TokenUsage::default();
    for run in 0..cfg.n_runs {
        let mut correct = 0;
        for sample in samples {
            let accepted: Vec<String> = if sample.source == cfg.dataset {
                cfg.accepted()
            } else {
                vec![normalize_answer(&sample.source)]
            };
            let request = CompletionRequest {
                prompt: identification_prompt(&sample.sentence, cfg.multilingual),
                temperature: cfg.temperature,
                sentences: vec![&sample.sentence],
                nonce: run as u64,
            };
            match complete_with_retries(backend, &request, retry) {
                Ok(c) => {
                    token_usage += c.usage;
                    correct += usize::from(accepted.contains(&normalize_answer(&c.text)));
                }
                Err(e) => {
                    log::warn!("{}: run {run}: {e}", sample.sentence.id);
                    failed_requests += 1;
                }
            }
        }
        per_run_correct.push(correct);
    }
    let per_run_score: Vec<f64> = per_run_correct
        .iter()
        .map(|&c| c as f64 / cfg.n_records as f64)
        .collect();
    let (mean, std) = mean_and_population_std(&per_run_score);
    Ok(ContaminationReport {
        dataset: cfg.dataset.clone(),
        n_records: cfg.n_records,
        per_run_correct,
        per_run_score,
        mean,
        std,
        failed_requests,
        token_usage,
    })
}

fn mean_and_population_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// A truncated record and the part the model should reproduce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IclProbe {
    pub sentence_id: String,
    pub prompt: String,
    pub prefix: Vec<String>,
    pub suffix: Vec<String>,
}

/// Splits the record after `ceil(split_fraction * n)` tokens and builds a
/// guided completion prompt naming the dataset.
pub fn build_icl_probe(sample: &ContaminationSample, split_fraction: f64) -> Result<IclProbe> {
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fraction {split_fraction} outside (0, 1)"
        )));
    }
    let tokens = &sample.sentence.tokens;
    let at = (split_fraction * tokens.len() as f64 - 1e-9).ceil() as usize;
    if tokens.len() < 2 || at == 0 || at >= tokens.len() {
        return Err(Error::InvalidSentence(format!(
            "{}: too short to split",
            sample.sentence.id
        )));
    }
    let (prefix, suffix) = tokens.split_at(at);
    let prompt = format!(
        "You are provided with the first piece of a sentence from the {} dataset. \
         Finish the second piece of the sentence as it exactly appeared in the dataset. \
         Only rely on the original form of the sentence in the dataset to finish the second piece.\n\
         First piece: {}\nSecond piece:",
        sample.source,
        prefix.join(" ")
    );
    Ok(IclProbe {
        sentence_id: sample.sentence.id.clone(),
        prompt,
        prefix: prefix.to_vec(),
        suffix: suffix.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    NearExact,
    NoMatch,
}

fn normalized_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Multiset token overlap divided by the longer sequence length.
pub fn overlap_similarity(a: &[String], b: &[String]) -> f64 {
    let longer = a.len().max(b.len());
    if longer == 0 {
        return 1.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in a {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut shared = 0;
    for t in b {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                shared += 1;
            }
        }
    }
    shared as f64 / longer as f64
}

pub fn classify_completion(completion: &str, suffix: &[String]) -> MatchKind {
    let got = normalized_tokens(completion);
    let want = normalized_tokens(&suffix.join(" "));
    if got == want {
        MatchKind::Exact
    } else if overlap_similarity(&got, &want) >= NEAR_EXACT_THRESHOLD {
        MatchKind::NearExact
    } else {
        MatchKind::NoMatch
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclResult {
    pub sentence_id: String,
    pub completion: Option<String>,
    pub kind: MatchKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IclReport {
    pub exact: usize,
    pub near_exact: usize,
    pub no_match: usize,
    pub results: Vec<IclResult>,
}

/// Sends one completion probe per sample. Failed requests count as
/// no match.
pub fn run_icl_probe(
    samples: &[ContaminationSample],
    backend: &dyn AnnotatorBackend,
    split_fraction: f64,
    retry: &RetryPolicy,
) -> Result<IclReport> {
    let mut report = IclReport::default();
    for sample in samples {
        let probe = build_icl_probe(sample, split_fraction)?;
        let request = CompletionRequest {
            prompt: probe.prompt.clone(),
            temperature: 0.0,
            sentences: vec![&sample.sentence],
            nonce: 0,
        };
        let (completion, kind) = match complete_with_retries(backend, &request, retry) {
            Ok(c) => {
                let kind = classify_completion(&c.text, &probe.suffix);
                (Some(c.text), kind)
            }
            Err(e) => {
                log::warn!("{}: {e}", sample.sentence.id);
                (None, MatchKind::NoMatch)
            }
        };
        match kind {
            MatchKind::Exact => report.exact += 1,
            MatchKind::NearExact => report.near_exact += 1,
            MatchKind::NoMatch => report.no_match += 1,
        }
        report.results.push(IclResult {
            sentence_id: probe.sentence_id,
            completion,
            kind,
        });
    }
    Ok(report)
}

/// Offline stand-in for a model under test. Names `answer` with
/// probability `p_correct` (otherwise `decoy`) and, for completion
/// probes, recalls the held-out suffix with probability `p_recall`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationMock {
    pub answer: String,
    pub decoy: String,
    pub p_correct: f64,
    pub p_recall: f64,
    pub seed: u64,
}

impl ContaminationMock {
    pub fn new(answer: &str, p_correct: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_correct) {
            return Err(Error::Config(format!(
                "p_correct {p_correct} outside [0, 1]"
            )));
        }
        Ok(ContaminationMock {
            answer: answer.into(),
            decoy: "WikiANN".into(),
            p_correct,
            p_recall: 0.0,
            seed,
        })
    }

    pub fn with_recall(mut self, p_recall: f64) -> Self {
        self.p_recall = p_recall;
        self
    }
}

impl AnnotatorBackend for ContaminationMock {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let [sentence] = request.sentences.as_slice() else {
            return Err(BackendError::Fatal("expected exactly one sentence".into()));
        };
        let text = if let Some((_, rest)) = request.prompt.split_once("First piece: ") {
            let prefix_len = rest.lines().next().unwrap_or("").split_whitespace().count();
            let mut rng = rng::derive(self.seed, &[b"mock-recall", sentence.id.as_bytes()]);
            if rng.gen::<f64>() < self.p_recall {
                sentence.tokens[prefix_len.min(sentence.tokens.len())..].join(" ")
            } else {
                "the rest of the sentence is unknown".into()
            }
        } else {
            let mut rng = rng::derive(
                self.seed,
                &[
                    b"mock-source",
                    &request.nonce.to_le_bytes(),
                    sentence.id.as_bytes(),
                ],
            );
            if rng.gen::<f64>() < self.p_correct {
                self.answer.clone()
            } else {
                self.decoy.clone()
            }
        };
        Ok(Completion {
            usage: TokenUsage {
                input_tokens: estimate_tokens(&request.prompt),
                output_tokens: estimate_tokens(&text),
            },
            text,
        })
    }

    fn name(&self) -> String {
        format!("contamination-mock:p={}", self.p_correct)
    }
}
