//! LLM annotation: prompts, backends, response parsing.

pub mod backend;
pub mod mock;
pub mod parse;
pub mod prompt;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use backend::{
    AnnotatorBackend, AnnotatorConfig, BackendError, Completion, CompletionRequest, RemoteBackend,
    RetryPolicy, TokenUsage,
};
pub use mock::{MockAnnotator, MockProfile};
pub use parse::{parse_batch_response, parse_response, OmissionReason, Outcome, ParseOptions};
pub use prompt::{build_prompt, pick_examples, FewShotExamples, PromptTemplate, PromptVariant};

use crate::corpus::Sentence;
use crate::error::{Error, Result};

/// One annotator answer for one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationAttempt {
    pub sentence_id: String,
    pub outcome: Outcome,
    /// The answer text, or the transport error when the request failed.
    pub raw_response: String,
    pub transport_error: bool,
    #[serde(with = "millis")]
    pub latency: Duration,
    /// For batched prompts the usage is split across the sentences.
    pub token_usage: TokenUsage,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

/// Appends request/response pairs to a JSONL audit file.
#[derive(Debug)]
pub struct TranscriptSink {
    out: Mutex<BufWriter<File>>,
}

#[derive(Serialize)]
struct TranscriptRecord<'a> {
    backend: &'a str,
    sentence_ids: Vec<&'a str>,
    nonce: u64,
    temperature: f64,
    prompt: &'a str,
    response: Option<&'a str>,
    error: Option<String>,
    latency_ms: u64,
    usage: TokenUsage,
}

impl TranscriptSink {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::options()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(TranscriptSink {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    fn record(&self, rec: &TranscriptRecord<'_>) {
        let mut out = self.out.lock().unwrap_or_else(|e| e.into_inner());
        let line = serde_json::to_string(rec).expect("transcript record serializes");
        if let Err(e) = writeln!(out, "{line}").and_then(|_| out.flush()) {
            log::warn!("failed to write transcript: {e}");
        }
    }
}

/// Bundles a backend with the prompt material and client settings.
#[derive(Clone)]
pub struct Annotator {
    pub backend: Arc<dyn AnnotatorBackend>,
    pub config: AnnotatorConfig,
    pub variant: PromptVariant,
    pub examples: FewShotExamples,
    pub transcript: Option<Arc<TranscriptSink>>,
}

impl std::fmt::Debug for Annotator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Annotator")
            .field("backend", &self.backend.name())
            .field("config", &self.config)
            .field("variant", &self.variant)
            .finish_non_exhaustive()
    }
}

struct Job<'a> {
    sentences: Vec<&'a Sentence>,
    prompt: String,
}

impl Annotator {
    pub fn new(
        backend: Arc<dyn AnnotatorBackend>,
        config: AnnotatorConfig,
        variant: PromptVariant,
        examples: FewShotExamples,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Annotator {
            backend,
            config,
            variant,
            examples,
            transcript: None,
        })
    }

    pub fn with_transcript(mut self, sink: TranscriptSink) -> Self {
        self.transcript = Some(Arc::new(sink));
        self
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            strict_tokens: self.config.strict_tokens,
        }
    }

    /// Annotates `sentences`, one attempt per sentence in input order.
    ///
    /// Prompts are grouped into batches of `batch_size` consecutive
    /// sentences and sent with at most `max_in_flight` requests
    /// outstanding. Transport failures that survive the retries become
    /// `Empty` attempts flagged with `transport_error`. `nonce`
    /// distinguishes repeated rounds over the same sentences.
    pub fn annotate(&self, sentences: &[Sentence], nonce: u64) -> Result<Vec<AnnotationAttempt>> {
        self.config.validate()?;
        let language = self.examples.language().to_string();
        let mut jobs = Vec::new();
        for chunk in sentences.chunks(self.config.batch_size) {
            let refs: Vec<&Sentence> = chunk.iter().collect();
            let prompt = build_prompt(
                &language,
                &self.examples,
                &refs,
                self.variant,
                self.config.batch_size,
            )?;
            jobs.push(Job {
                sentences: refs,
                prompt,
            });
        }

        let results: Vec<Mutex<Vec<AnnotationAttempt>>> =
            jobs.iter().map(|_| Mutex::new(Vec::new())).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.max_in_flight.min(jobs.len());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(job) = jobs.get(i) else { break };
                    let attempts = self.run_job(job, nonce);
                    *results[i].lock().unwrap_or_else(|e| e.into_inner()) = attempts;
                });
            }
        });
        Ok(results
            .into_iter()
            .flat_map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()))
            .collect())
    }

    fn run_job(&self, job: &Job<'_>, nonce: u64) -> Vec<AnnotationAttempt> {
        let request = CompletionRequest {
            prompt: job.prompt.clone(),
            temperature: self.config.temperature,
            sentences: job.sentences.clone(),
            nonce,
        };
        let started = Instant::now();
        let result =
            backend::complete_with_retries(&*self.backend, &request, &self.config.retry_policy());
        let latency = started.elapsed();

        if let Some(sink) = &self.transcript {
            let usage = result.as_ref().map(|c| c.usage).unwrap_or_default();
            sink.record(&TranscriptRecord {
                backend: &self.backend.name(),
                sentence_ids: job.sentences.iter().map(|s| s.id.as_str()).collect(),
                nonce,
                temperature: request.temperature,
                prompt: &job.prompt,
                response: result.as_ref().ok().map(|c| c.text.as_str()),
                error: result.as_ref().err().map(ToString::to_string),
                latency_ms: latency.as_millis() as u64,
                usage,
            });
        }

        let n = job.sentences.len();
        match result {
            Ok(completion) => {
                let expected: Vec<&[String]> =
                    job.sentences.iter().map(|s| s.tokens.as_slice()).collect();
                let outcomes =
                    parse_batch_response(&completion.text, &expected, self.parse_options());
                let shares = split_usage(completion.usage, n);
                job.sentences
                    .iter()
                    .zip(outcomes)
                    .zip(shares)
                    .map(|((s, outcome), usage)| AnnotationAttempt {
                        sentence_id: s.id.clone(),
                        outcome,
                        raw_response: completion.text.clone(),
                        transport_error: false,
                        latency,
                        token_usage: usage,
                    })
                    .collect()
            }
            Err(e) => {
                log::warn!(
                    "{}: request for {} sentence(s) failed: {e}",
                    self.backend.name(),
                    n
                );
                job.sentences
                    .iter()
                    .map(|s| AnnotationAttempt {
                        sentence_id: s.id.clone(),
                        outcome: Outcome::Empty,
                        raw_response: e.to_string(),
                        transport_error: true,
                        latency,
                        token_usage: TokenUsage::default(),
                    })
                    .collect()
            }
        }
    }
}

/// Splits batch usage evenly, remainder to the first sentences.
fn split_usage(total: TokenUsage, n: usize) -> Vec<TokenUsage> {
    let n64 = n as u64;
    (0..n64)
        .map(|i| TokenUsage {
            input_tokens: total.input_tokens / n64 + u64::from(i < total.input_tokens % n64),
            output_tokens: total.output_tokens / n64 + u64::from(i < total.output_tokens % n64),
        })
        .collect()
}

/// Annotator choice as written on the command line: `oracle`, `remote`,
/// `mock` or `mock:accuracy=0.845,empty=0.3,omission=0.0,seed=1`.
#[derive(Debug, Clone, PartialEq)]
pub enum AnnotatorSpec {
    Oracle,
    Mock(MockProfile),
    Remote,
}

impl std::str::FromStr for AnnotatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "oracle" => Ok(AnnotatorSpec::Oracle),
            "remote" => Ok(AnnotatorSpec::Remote),
            "mock" => Ok(AnnotatorSpec::Mock(MockProfile::perfect(0))),
            other => match other.strip_prefix("mock:") {
                Some(opts) => Ok(AnnotatorSpec::Mock(MockProfile::parse(opts)?)),
                None => Err(Error::Config(format!(
                    "unknown annotator {other:?}; expected oracle, remote or mock[:options]"
                ))),
            },
        }
    }
}

impl AnnotatorSpec {
    /// The backend behind this spec. The oracle is served by a perfect
    /// mock, which echoes gold labels in the expected answer format.
    pub fn backend(&self, config: &AnnotatorConfig) -> Result<Arc<dyn AnnotatorBackend>> {
        Ok(match self {
            AnnotatorSpec::Oracle => Arc::new(MockAnnotator::new(MockProfile::perfect(0))?),
            AnnotatorSpec::Mock(p) => Arc::new(MockAnnotator::new(*p)?),
            AnnotatorSpec::Remote => Arc::new(RemoteBackend::from_config(config)?),
        })
    }
}

/// Free-function form of [`Annotator::annotate`].
pub fn annotate(
    sentences: &[Sentence],
    config: &AnnotatorConfig,
    variant: PromptVariant,
    examples: &FewShotExamples,
    backend: Arc<dyn AnnotatorBackend>,
    nonce: u64,
) -> Result<Vec<AnnotationAttempt>> {
    Annotator::new(backend, config.clone(), variant, examples.clone())?.annotate(sentences, nonce)
}
