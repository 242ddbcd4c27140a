//! The select, annotate, retrain loop.
//!
//! A run starts from a random seed subset with gold labels, then for each
//! iteration scores the pool with the current tagger, hands the most
//! uncertain sentences to the annotator, moves the successfully annotated
//! ones into the labeled set and retrains from scratch. Each step is
//! checkpointed so an interrupted run resumes to an identical report.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationAttempt, Annotator, Outcome, TokenUsage};
use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::quality::EntityAccuracy;
use crate::rng;
use crate::sampling::{sample_entropy, select_most_uncertain, selection_size, SampleEntropy};
use crate::tagger::{self, TaggerModel, TrainConfig};

pub const STATE_FILE: &str = "state.json";
const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionStrategy {
    /// Highest mean token entropy first.
    Entropy,
    /// Uniform draw from the pool; a reference point for the entropy rule.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopConfig {
    pub seed_fraction: f64,
    /// Share of the original corpus selected per iteration.
    pub select_fraction: f64,
    pub max_iterations: usize,
    pub strategy: SelectionStrategy,
    /// Also train on the whole gold corpus and report its accuracy.
    pub baseline: bool,
    /// Failed annotations a sentence may accumulate before it is set aside.
    pub max_failures: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub cost: CostModel,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            seed_fraction: 0.05,
            select_fraction: 0.05,
            max_iterations: 5,
            strategy: SelectionStrategy::Entropy,
            baseline: false,
            max_failures: 2,
            seed: 0,
            train: TrainConfig::default(),
            cost: CostModel::default(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("seed_fraction", self.seed_fraction),
            ("select_fraction", self.select_fraction),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("{name} {f} outside (0, 1]")));
            }
        }
        if self.max_failures == 0 {
            return Err(Error::Config("max_failures must be positive".into()));
        }
        self.train.validate()?;
        self.cost.validate()
    }
}

/// Where new labels come from.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum LoopAnnotator {
    /// Returns the gold labels; isolates the loop from annotator noise.
    Oracle,
    Llm(Annotator),
}

impl LoopAnnotator {
    pub fn name(&self) -> String {
        match self {
            LoopAnnotator::Oracle => "oracle".into(),
            LoopAnnotator::Llm(a) => a.backend.name(),
        }
    }

    fn annotate(&self, sentences: &[Sentence], nonce: u64) -> Result<Vec<AnnotationAttempt>> {
        match self {
            LoopAnnotator::Oracle => sentences
                .iter()
                .map(|s| {
                    Ok(AnnotationAttempt {
                        sentence_id: s.id.clone(),
                        outcome: Outcome::Ok {
                            labels: s.gold()?.to_vec(),
                        },
                        raw_response: String::new(),
                        transport_error: false,
                        latency: Default::default(),
                        token_usage: TokenUsage::default(),
                    })
                })
                .collect(),
            LoopAnnotator::Llm(a) => a.annotate(sentences, nonce),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeTally {
    pub ok: usize,
    pub empty: usize,
    pub omission: usize,
    /// Subset of `empty` caused by transport failures.
    pub transport_errors: usize,
    /// Sentences set aside after too many failures.
    pub rejected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub labeled_size: usize,
    /// Labeled share of the original corpus, in percent.
    pub data_percent: f64,
    pub selected_ids: Vec<String>,
    pub tally: OutcomeTally,
    /// Entity-class accuracy on the test split, in percent.
    pub entity_accuracy: f64,
    /// Mean uncertainty of the selected sentences under the previous model.
    pub mean_selection_entropy: Option<f64>,
    pub token_usage: TokenUsage,
    pub llm_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub input_price_per_million: f64,
    pub output_price_per_million: f64,
    pub human_cost_per_200_sentences: f64,
    pub n_human_annotators: u32,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            input_price_per_million: 10.0,
            output_price_per_million: 30.0,
            human_cost_per_200_sentences: 0.0,
            n_human_annotators: 1,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        let prices = [
            self.input_price_per_million,
            self.output_price_per_million,
            self.human_cost_per_200_sentences,
        ];
        if prices.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config(
                "prices must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn llm_cost(&self, usage: TokenUsage) -> f64 {
        (usage.input_tokens as f64 * self.input_price_per_million
            + usage.output_tokens as f64 * self.output_price_per_million)
            / 1e6
    }

    pub fn human_cost(&self, n_sentences: usize) -> f64 {
        n_sentences.div_ceil(200) as f64
            * self.human_cost_per_200_sentences
            * f64::from(self.n_human_annotators)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostComparison {
    pub n_sentences: usize,
    pub human_cost: f64,
    pub llm_cost: f64,
    /// How many times cheaper the LLM is; `None` when it cost nothing.
    pub ratio: Option<f64>,
}

impl CostComparison {
    /// Builds a comparison from totals already known, e.g. a published
    /// per-annotator human price.
    pub fn from_totals(human_per_annotator: f64, n_annotators: u32, llm_cost: f64) -> Self {
        let human_cost = human_per_annotator * f64::from(n_annotators);
        CostComparison {
            n_sentences: 0,
            human_cost,
            llm_cost,
            ratio: (llm_cost > 0.0).then(|| human_cost / llm_cost),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: LoopConfig,
    pub annotator: String,
    pub corpus_size: usize,
    pub test_size: usize,
    pub baseline_accuracy: Option<f64>,
    pub iterations: Vec<IterationRecord>,
    pub rejected_ids: Vec<String>,
    pub total_usage: TokenUsage,
    pub cost: CostComparison,
}

impl RunReport {
    /// `(data %, entity accuracy %)` points, one per iteration.
    pub fn curve(&self) -> Vec<(f64, f64)> {
        self.iterations
            .iter()
            .map(|r| (r.data_percent, r.entity_accuracy))
            .collect()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "labeled_size",
            "data_percent",
            "entity_accuracy",
        ])?;
        for r in &self.iterations {
            w.write_record([
                r.iteration.to_string(),
                r.labeled_size.to_string(),
                format!("{:.4}", r.data_percent),
                format!("{:.4}", r.entity_accuracy),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Human cost for the whole corpus against the LLM spend of the run.
pub fn estimate_cost(report: &RunReport, model: &CostModel) -> CostComparison {
    let human_cost = model.human_cost(report.corpus_size);
    let llm_cost = model.llm_cost(report.total_usage);
    CostComparison {
        n_sentences: report.corpus_size,
        human_cost,
        llm_cost,
        ratio: (llm_cost > 0.0).then(|| human_cost / llm_cost),
    }
}

/// Pooled entity-class accuracy of `model` on `test`, in percent.
pub fn evaluate(model: &TaggerModel, test: &Corpus) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set is empty"));
    }
    let mut acc = EntityAccuracy::default();
    for s in test {
        acc.add(&model.predict(s), s.gold()?)?;
    }
    acc.percentage()
        .ok_or(Error::Empty("test set has no entity tokens"))
}

/// Trains on the whole gold corpus and reports test entity accuracy.
pub fn run_baseline(corpus: &Corpus, test: &Corpus, cfg: &LoopConfig) -> Result<f64> {
    cfg.validate()?;
    if test.is_empty() {
        return Err(Error::Empty("test set is empty"));
    }
    let model = tagger::train(corpus, &train_config(cfg, u64::MAX))?;
    evaluate(&model, test)
}

fn train_config(cfg: &LoopConfig, iteration: u64) -> TrainConfig {
    let mut rng = rng::derive(cfg.seed, &[b"al-train", &iteration.to_le_bytes()]);
    TrainConfig {
        seed: rng.next_u64(),
        ..cfg.train.clone()
    }
}

fn fingerprint(corpus: &Corpus) -> u64 {
    corpus
        .iter()
        .fold(rng::fnv1a(corpus.language.as_bytes()), |h, s| {
            let h = rng::fnv1a_extend(h, &(s.id.len() as u64).to_le_bytes());
            rng::fnv1a_extend(h, s.id.as_bytes())
        })
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    version: u32,
    pub config: LoopConfig,
    corpus_fingerprint: u64,
    test_fingerprint: u64,
    /// Labeled sentences in insertion order, carrying the labels they were
    /// trained with.
    pub labeled: Vec<Sentence>,
    /// Pool ids in original corpus order.
    pub pool: Vec<String>,
    pub rejected: Vec<String>,
    pub failures: BTreeMap<String, usize>,
    pub baseline_accuracy: Option<f64>,
    pub records: Vec<IterationRecord>,
    pub total_usage: TokenUsage,
}

/// Drives a run one iteration at a time.
pub struct LoopRunner<'a> {
    corpus: &'a Corpus,
    test: &'a Corpus,
    annotator: &'a LoopAnnotator,
    state: LoopState,
    model: Option<TaggerModel>,
    checkpoint_dir: Option<PathBuf>,
}

impl<'a> LoopRunner<'a> {
    pub fn new(
        corpus: &'a Corpus,
        test: &'a Corpus,
        cfg: LoopConfig,
        annotator: &'a LoopAnnotator,
    ) -> Result<Self> {
        cfg.validate()?;
        if corpus.is_empty() {
            return Err(Error::Empty("training corpus is empty"));
        }
        if test.is_empty() {
            return Err(Error::Empty("test set is empty"));
        }
        let n_seed = selection_size(cfg.seed_fraction, corpus.len()).clamp(1, corpus.len());
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut rng::derive(cfg.seed, &[b"al-seed-subset"]));
        let mut is_seed = vec![false; corpus.len()];
        for &i in &order[..n_seed] {
            is_seed[i] = true;
        }
        let mut labeled = Vec::with_capacity(n_seed);
        let mut pool = Vec::with_capacity(corpus.len() - n_seed);
        for (s, seed) in corpus.iter().zip(is_seed) {
            if seed {
                s.gold()?;
                labeled.push(s.clone());
            } else {
                pool.push(s.id.clone());
            }
        }
        Ok(LoopRunner {
            corpus,
            test,
            annotator,
            state: LoopState {
                version: STATE_VERSION,
                corpus_fingerprint: fingerprint(corpus),
                test_fingerprint: fingerprint(test),
                config: cfg,
                labeled,
                pool,
                rejected: Vec::new(),
                failures: BTreeMap::new(),
                baseline_accuracy: None,
                records: Vec::new(),
                total_usage: TokenUsage::default(),
            },
            model: None,
            checkpoint_dir: None,
        })
    }

    /// Continues the run saved in `dir`. The tagger is retrained from the
    /// saved labeled set, so the continuation matches an uninterrupted run.
    pub fn resume(
        dir: impl AsRef<Path>,
        corpus: &'a Corpus,
        test: &'a Corpus,
        annotator: &'a LoopAnnotator,
    ) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(STATE_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let state: LoopState = serde_json::from_slice(&bytes)?;
        if state.version != STATE_VERSION {
            return Err(Error::Config(format!(
                "unsupported checkpoint version {}",
                state.version
            )));
        }
        if state.corpus_fingerprint != fingerprint(corpus)
            || state.test_fingerprint != fingerprint(test)
        {
            return Err(Error::Config(
                "checkpoint was written for a different corpus or test set".into(),
            ));
        }
        state.config.validate()?;
        Ok(LoopRunner {
            corpus,
            test,
            annotator,
            state,
            model: None,
            checkpoint_dir: Some(dir.to_path_buf()),
        })
    }

    /// Saves state to `dir` after every step.
    pub fn with_checkpoint_dir(mut self, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        self.checkpoint_dir = Some(dir);
        self.save_checkpoint()?;
        Ok(self)
    }

    pub fn state(&self) -> &LoopState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        match self.state.records.last() {
            None => false,
            Some(last) => {
                last.iteration >= self.state.config.max_iterations || self.state.pool.is_empty()
            }
        }
    }

    /// Runs the next iteration (iteration 0 trains on the seed subset) and
    /// returns its record, or `None` once the run is finished.
    pub fn step(&mut self) -> Result<Option<&IterationRecord>> {
        if self.is_done() {
            return Ok(None);
        }
        let record = if self.state.records.is_empty() {
            self.seed_iteration()?
        } else {
            self.iteration()?
        };
        self.state.records.push(record);
        self.save_checkpoint()?;
        Ok(self.state.records.last())
    }

    pub fn run(mut self) -> Result<RunReport> {
        while self.step()?.is_some() {}
        Ok(self.report())
    }

    pub fn report(&self) -> RunReport {
        let cfg = &self.state.config;
        let mut report = RunReport {
            config: cfg.clone(),
            annotator: self.annotator.name(),
            corpus_size: self.corpus.len(),
            test_size: self.test.len(),
            baseline_accuracy: self.state.baseline_accuracy,
            iterations: self.state.records.clone(),
            rejected_ids: self.state.rejected.clone(),
            total_usage: self.state.total_usage,
            cost: CostComparison::from_totals(0.0, 0, 0.0),
        };
        report.cost = estimate_cost(&report, &cfg.cost);
        report
    }

    fn labeled_corpus(&self) -> Result<Corpus> {
        Corpus::new(self.corpus.language.clone(), self.state.labeled.clone())
    }

    /// The model for the current labeled set. It is trained with the
    /// iteration number of the record it belongs to, so a resumed run
    /// rebuilds exactly the model the interrupted run had.
    fn current_model(&mut self) -> Result<&TaggerModel> {
        if self.model.is_none() {
            let iteration = self.state.records.last().map_or(0, |r| r.iteration);
            self.retrain(iteration)?;
        }
        Ok(self.model.as_ref().expect("model trained above"))
    }

    fn retrain(&mut self, iteration: usize) -> Result<()> {
        let cfg = train_config(&self.state.config, iteration as u64);
        self.model = Some(tagger::train(&self.labeled_corpus()?, &cfg)?);
        Ok(())
    }

    fn seed_iteration(&mut self) -> Result<IterationRecord> {
        if self.state.config.baseline {
            self.state.baseline_accuracy =
                Some(run_baseline(self.corpus, self.test, &self.state.config)?);
        }
        let test = self.test;
        let accuracy = evaluate(self.current_model()?, test)?;
        Ok(IterationRecord {
            iteration: 0,
            labeled_size: self.state.labeled.len(),
            data_percent: self.data_percent(),
            selected_ids: Vec::new(),
            tally: OutcomeTally::default(),
            entity_accuracy: accuracy,
            mean_selection_entropy: None,
            token_usage: TokenUsage::default(),
            llm_cost: 0.0,
        })
    }

    fn data_percent(&self) -> f64 {
        100.0 * self.state.labeled.len() as f64 / self.corpus.len() as f64
    }

    fn pool_entropies(&mut self) -> Result<Vec<SampleEntropy>> {
        let model = self.current_model()?.clone();
        self.state
            .pool
            .iter()
            .map(|id| {
                let s = self.sentence(id)?;
                Ok(SampleEntropy {
                    sentence_id: id.clone(),
                    value: sample_entropy(&model.predict_proba(s))?,
                })
            })
            .collect()
    }

    fn sentence(&self, id: &str) -> Result<&'a Sentence> {
        self.corpus
            .get(id)
            .ok_or_else(|| Error::Config(format!("sentence {id:?} not in corpus")))
    }

    fn select(&mut self, iteration: usize) -> Result<(Vec<String>, Option<f64>)> {
        let cfg = self.state.config.clone();
        let scored = self.pool_entropies()?;
        let selected = match cfg.strategy {
            SelectionStrategy::Entropy => {
                select_most_uncertain(&scored, cfg.select_fraction, self.corpus.len())?
            }
            SelectionStrategy::Random => {
                let k = selection_size(cfg.select_fraction, self.corpus.len()).min(scored.len());
                let mut ids: Vec<String> = self.state.pool.clone();
                let mut rng = rng::derive(
                    cfg.seed,
                    &[b"al-random-select", &(iteration as u64).to_le_bytes()],
                );
                ids.shuffle(&mut rng);
                ids.truncate(k);
                ids
            }
        };
        let by_id: HashMap<&str, f64> = scored
            .iter()
            .map(|s| (s.sentence_id.as_str(), s.value))
            .collect();
        let mean = (!selected.is_empty()).then(|| {
            selected.iter().map(|id| by_id[id.as_str()]).sum::<f64>() / selected.len() as f64
        });
        Ok((selected, mean))
    }

    fn iteration(&mut self) -> Result<IterationRecord> {
        let iteration = self.state.records.len();
        let (selected, mean_entropy) = self.select(iteration)?;
        let sentences: Vec<Sentence> = selected
            .iter()
            .map(|id| self.sentence(id).cloned())
            .collect::<Result<_>>()?;
        let attempts = self.annotator.annotate(&sentences, iteration as u64)?;
        if !attempts.is_empty() && attempts.iter().all(|a| a.transport_error) {
            return Err(Error::Annotator(format!(
                "iteration {iteration}: every request failed; last error: {}",
                attempts.last().map_or("", |a| a.raw_response.as_str())
            )));
        }

        let mut tally = OutcomeTally::default();
        let mut usage = TokenUsage::default();
        let mut accepted: HashMap<&str, Sentence> = HashMap::new();
        for (s, a) in sentences.iter().zip(&attempts) {
            usage += a.token_usage;
            match &a.outcome {
                Outcome::Ok { labels } => {
                    tally.ok += 1;
                    accepted.insert(s.id.as_str(), s.with_labels(labels.clone()));
                    continue;
                }
                Outcome::Empty => tally.empty += 1,
                Outcome::Omission { .. } => tally.omission += 1,
            }
            tally.transport_errors += usize::from(a.transport_error);
            let count = self.state.failures.entry(s.id.clone()).or_insert(0);
            *count += 1;
            if *count >= self.state.config.max_failures {
                tally.rejected += 1;
                self.state.rejected.push(s.id.clone());
            }
        }

        let rejected = &self.state.rejected;
        for s in &sentences {
            if let Some(labeled) = accepted.remove(s.id.as_str()) {
                self.state.labeled.push(labeled);
            }
        }
        let labeled_ids: std::collections::HashSet<&str> =
            self.state.labeled.iter().map(|s| s.id.as_str()).collect();
        self.state
            .pool
            .retain(|id| !labeled_ids.contains(id.as_str()) && !rejected.contains(id));
        self.state.total_usage += usage;

        self.retrain(iteration)?;
        let test = self.test;
        let accuracy = evaluate(self.current_model()?, test)?;
        Ok(IterationRecord {
            iteration,
            labeled_size: self.state.labeled.len(),
            data_percent: self.data_percent(),
            selected_ids: selected,
            tally,
            entity_accuracy: accuracy,
            mean_selection_entropy: mean_entropy,
            token_usage: usage,
            llm_cost: self.state.config.cost.llm_cost(usage),
        })
    }

    fn save_checkpoint(&self) -> Result<()> {
        let Some(dir) = &self.checkpoint_dir else {
            return Ok(());
        };
        let tmp = dir.join(format!("{STATE_FILE}.tmp"));
        let path = dir.join(STATE_FILE);
        let json = serde_json::to_vec(&self.state)?;
        fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}

/// Runs the loop to completion.
pub fn run_active_learning(
    corpus: &Corpus,
    test: &Corpus,
    cfg: &LoopConfig,
    annotator: &LoopAnnotator,
) -> Result<RunReport> {
    LoopRunner::new(corpus, test, cfg.clone(), annotator)?.run()
}
