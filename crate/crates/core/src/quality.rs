//! Annotation-quality metrics: agreement between repeated annotations,
//! accuracy consistency against gold, format-failure tallies and
//! entity-class accuracy.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationAttempt, Annotator, Outcome};
use crate::corpus::{Corpus, Sentence, Tag, NUM_TAGS};
use crate::error::{Error, Result};

/// Default number of reannotation rounds per sentence.
pub const DEFAULT_REANNOTATIONS: usize = 10;

/// Repeated annotations of one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReannotationSet {
    pub sentence: Sentence,
    pub attempts: Vec<AnnotationAttempt>,
}

impl ReannotationSet {
    pub fn new(sentence: Sentence, attempts: Vec<AnnotationAttempt>) -> Result<Self> {
        if attempts.is_empty() {
            return Err(Error::Empty("reannotation set without attempts"));
        }
        if let Some(a) = attempts.iter().find(|a| a.sentence_id != sentence.id) {
            return Err(Error::Config(format!(
                "attempt for {:?} grouped under sentence {:?}",
                a.sentence_id, sentence.id
            )));
        }
        Ok(ReannotationSet { sentence, attempts })
    }

    pub fn all_ok(&self) -> bool {
        self.attempts.iter().all(|a| a.outcome.is_ok())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub kappa: f64,
    pub n_items: usize,
    pub n_raters: usize,
    /// Sentences dropped because at least one attempt was not `Ok`.
    pub excluded_samples: Vec<String>,
}

/// Fleiss' kappa from an items × categories count matrix. Every row must sum
/// to the same number of raters (at least two).
pub fn fleiss_kappa_from_counts(counts: &[Vec<usize>]) -> Result<f64> {
    let Some(first) = counts.first() else {
        return Err(Error::Empty("kappa over zero items"));
    };
    let n: usize = first.iter().sum();
    if n < 2 {
        return Err(Error::Config(format!(
            "kappa needs at least 2 raters, got {n}"
        )));
    }
    let k = first.len();
    let mut totals = vec![0usize; k];
    let mut agreement_sum = 0.0;
    let mut all_agree = true;
    for row in counts {
        if row.len() != k || row.iter().sum::<usize>() != n {
            return Err(Error::Config(
                "every item needs the same raters and categories".into(),
            ));
        }
        let sq: usize = row.iter().map(|c| c * c).sum();
        agreement_sum += (sq - n) as f64 / (n * (n - 1)) as f64;
        all_agree &= row.contains(&n);
        for (t, c) in totals.iter_mut().zip(row) {
            *t += c;
        }
    }
    if all_agree {
        return Ok(1.0);
    }
    let items = counts.len() as f64;
    let observed = agreement_sum / items;
    let scale = items * n as f64;
    let expected: f64 = totals.iter().map(|&t| (t as f64 / scale).powi(2)).sum();
    Ok((observed - expected) / (1.0 - expected))
}

/// Token-level Fleiss' kappa over reannotations: items are tokens, raters
/// are attempts, categories are the nine tags. Sentences with any failed
/// attempt are excluded and listed.
pub fn fleiss_kappa(sets: &[ReannotationSet]) -> Result<KappaReport> {
    let mut excluded = Vec::new();
    let mut counts = Vec::new();
    let mut raters = None;
    for set in sets {
        if !set.all_ok() {
            excluded.push(set.sentence.id.clone());
            continue;
        }
        let r = set.attempts.len();
        match raters {
            None => raters = Some(r),
            Some(prev) if prev != r => {
                return Err(Error::Config(format!(
                    "sentence {:?} has {r} attempts, others have {prev}",
                    set.sentence.id
                )))
            }
            _ => {}
        }
        for pos in 0..set.sentence.len() {
            let mut row = vec![0usize; NUM_TAGS];
            for a in &set.attempts {
                let labels = a.outcome.labels().expect("all attempts are ok");
                row[labels[pos].index()] += 1;
            }
            counts.push(row);
        }
    }
    let n_raters = raters.unwrap_or(0);
    if counts.is_empty() {
        return Err(Error::Empty("no retained items for kappa"));
    }
    let kappa = fleiss_kappa_from_counts(&counts)?;
    Ok(KappaReport {
        kappa,
        n_items: counts.len(),
        n_raters,
        excluded_samples: excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub per_sample: BTreeMap<String, f64>,
    pub overall: f64,
}

/// Percentage of (attempt, token) pairs whose label matches gold. Empty and
/// omission attempts count as mismatches on every token.
pub fn sample_consistency(set: &ReannotationSet) -> Result<f64> {
    let gold = set.sentence.gold()?;
    let matches: usize = set
        .attempts
        .iter()
        .filter_map(|a| a.outcome.labels())
        .map(|labels| labels.iter().zip(gold).filter(|(p, g)| p == g).count())
        .sum();
    let denom = set.attempts.len() * gold.len();
    Ok(100.0 * matches as f64 / denom as f64)
}

/// Per-sample consistency and their unweighted mean.
pub fn consistency(sets: &[ReannotationSet]) -> Result<ConsistencyReport> {
    if sets.is_empty() {
        return Err(Error::Empty("consistency over zero samples"));
    }
    let mut per_sample = BTreeMap::new();
    let mut sum = 0.0;
    for set in sets {
        let score = sample_consistency(set)?;
        sum += score;
        per_sample.insert(set.sentence.id.clone(), score);
    }
    Ok(ConsistencyReport {
        per_sample,
        overall: sum / sets.len() as f64,
    })
}

/// Sentences with at least one empty or omission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatErrorTally {
    pub n_sentences: usize,
    pub n_empty_sentences: usize,
    pub n_omission_sentences: usize,
    /// False when no attempt produced any response, so omissions could not
    /// be observed at all.
    pub omission_computable: bool,
}

pub fn format_error_tally(sets: &[ReannotationSet]) -> FormatErrorTally {
    let mut tally = FormatErrorTally {
        n_sentences: sets.len(),
        n_empty_sentences: 0,
        n_omission_sentences: 0,
        omission_computable: false,
    };
    for set in sets {
        if set.attempts.iter().any(|a| a.outcome.is_empty()) {
            tally.n_empty_sentences += 1;
        }
        if set.attempts.iter().any(|a| a.outcome.is_omission()) {
            tally.n_omission_sentences += 1;
        }
        if set.attempts.iter().any(|a| !a.outcome.is_empty()) {
            tally.omission_computable = true;
        }
    }
    tally
}

/// Accuracy over tokens whose gold tag is not `O`, as a percentage.
/// `None` when there are no such tokens.
pub fn entity_accuracy(pred: &[Tag], gold: &[Tag]) -> Result<Option<f64>> {
    let mut acc = EntityAccuracy::default();
    acc.add(pred, gold)?;
    Ok(acc.percentage())
}

/// Running entity-class accuracy, pooled over many sentences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityAccuracy {
    pub correct: usize,
    pub total: usize,
}

impl EntityAccuracy {
    pub fn add(&mut self, pred: &[Tag], gold: &[Tag]) -> Result<()> {
        if pred.len() != gold.len() {
            return Err(Error::Config(format!(
                "{} predictions for {} gold labels",
                pred.len(),
                gold.len()
            )));
        }
        for (p, g) in pred.iter().zip(gold) {
            if g.is_entity() {
                self.total += 1;
                self.correct += usize::from(p == g);
            }
        }
        Ok(())
    }

    pub fn percentage(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.correct as f64 / self.total as f64)
    }
}

/// Full annotator-selection report for one corpus subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorReport {
    pub annotator: String,
    pub language: String,
    pub n_sentences: usize,
    pub reannotations: usize,
    /// `None` when every sentence was excluded; see `kappa_error`.
    pub kappa: Option<KappaReport>,
    pub kappa_error: Option<String>,
    pub consistency: ConsistencyReport,
    pub format_errors: FormatErrorTally,
    pub entity_accuracy: Option<f64>,
}

impl AnnotatorReport {
    pub fn from_sets(annotator: &str, language: &str, sets: &[ReannotationSet]) -> Result<Self> {
        let (kappa, kappa_error) = match fleiss_kappa(sets) {
            Ok(k) => (Some(k), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let mut acc = EntityAccuracy::default();
        for set in sets {
            let gold = set.sentence.gold()?;
            for a in &set.attempts {
                match &a.outcome {
                    Outcome::Ok { labels } => acc.add(labels, gold)?,
                    _ => acc.total += gold.iter().filter(|g| g.is_entity()).count(),
                }
            }
        }
        Ok(AnnotatorReport {
            annotator: annotator.to_string(),
            language: language.to_string(),
            n_sentences: sets.len(),
            reannotations: sets.first().map_or(0, |s| s.attempts.len()),
            kappa,
            kappa_error,
            consistency: consistency(sets)?,
            format_errors: format_error_tally(sets),
            entity_accuracy: acc.percentage(),
        })
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "annotator        {}", self.annotator);
        let _ = writeln!(out, "language         {}", self.language);
        let _ = writeln!(
            out,
            "samples          {} x {} attempts",
            self.n_sentences, self.reannotations
        );
        match &self.kappa {
            Some(k) => {
                let _ = writeln!(
                    out,
                    "fleiss kappa     {:.3} ({} tokens, {} excluded)",
                    k.kappa,
                    k.n_items,
                    k.excluded_samples.len()
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "fleiss kappa     -- ({})",
                    self.kappa_error.as_deref().unwrap_or("n/a")
                );
            }
        }
        let _ = writeln!(out, "consistency      {:.2}", self.consistency.overall);
        let _ = writeln!(
            out,
            "empty (samples)  {}",
            self.format_errors.n_empty_sentences
        );
        if self.format_errors.omission_computable {
            let _ = writeln!(
                out,
                "omission (samp.) {}",
                self.format_errors.n_omission_sentences
            );
        } else {
            let _ = writeln!(out, "omission (samp.) --");
        }
        match self.entity_accuracy {
            Some(a) => {
                let _ = writeln!(out, "entity accuracy  {a:.2}");
            }
            None => {
                let _ = writeln!(out, "entity accuracy  --");
            }
        }
        out
    }
}

/// Runs `rounds` annotation passes over `corpus` and groups the attempts
/// per sentence.
pub fn reannotate(
    annotator: &Annotator,
    corpus: &Corpus,
    rounds: usize,
) -> Result<Vec<ReannotationSet>> {
    if rounds == 0 {
        return Err(Error::Config("need at least one annotation round".into()));
    }
    let mut grouped: Vec<Vec<AnnotationAttempt>> = vec![Vec::with_capacity(rounds); corpus.len()];
    for round in 0..rounds {
        let attempts = annotator.annotate(&corpus.sentences, round as u64)?;
        for (slot, a) in grouped.iter_mut().zip(attempts) {
            slot.push(a);
        }
    }
    corpus
        .sentences
        .iter()
        .zip(grouped)
        .map(|(s, attempts)| ReannotationSet::new(s.clone(), attempts))
        .collect()
}

pub fn evaluate_annotator(
    annotator: &Annotator,
    corpus: &Corpus,
    rounds: usize,
) -> Result<AnnotatorReport> {
    let sets = reannotate(annotator, corpus, rounds)?;
    AnnotatorReport::from_sets(&annotator.backend.name(), &corpus.language, &sets)
}
