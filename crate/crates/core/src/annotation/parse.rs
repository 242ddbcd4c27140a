//! Response parsing and failure classification.
//!
//! Every response maps to an [`Outcome`]: no usable JSON is [`Outcome::Empty`];
//! JSON whose `output` does not line up with the input is an
//! [`Outcome::Omission`]. Labels are aligned by position; echoed token text
//! is only checked in strict mode.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus::Tag;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum OmissionReason {
    /// Label count differs from token count (skipped or invented tokens).
    LengthMismatch,
    UnknownLabel(String),
    /// An `output` element was not a `[token, label]` pair.
    MalformedPair,
    /// Strict mode only: echoed token text differs from the input.
    TokenMismatch,
    /// A batch response carried fewer lists than sentences.
    MissingSentence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok {
        labels: Vec<Tag>,
    },
    Empty,
    Omission {
        predicted_count: usize,
        reason: OmissionReason,
    },
}

impl Outcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, Outcome::Ok { .. })
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Outcome::Empty)
    }

    pub fn is_omission(&self) -> bool {
        matches!(self, Outcome::Omission { .. })
    }

    pub fn labels(&self) -> Option<&[Tag]> {
        match self {
            Outcome::Ok { labels } => Some(labels),
            _ => None,
        }
    }

    fn omission(predicted_count: usize, reason: OmissionReason) -> Self {
        Outcome::Omission {
            predicted_count,
            reason,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOptions {
    pub strict_tokens: bool,
}

/// Finds the `output` value of the first JSON object in `raw` that has one.
/// Code fences, leading prose and trailing text are skipped over.
pub fn extract_output(raw: &str) -> Option<Value> {
    for (start, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(mut map))) = stream.next() {
            if let Some(output) = map.remove("output") {
                return Some(output);
            }
        }
    }
    None
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn classify_pairs(pairs: &Value, expected: &[String], opts: ParseOptions) -> Outcome {
    let Value::Array(items) = pairs else {
        return Outcome::omission(0, OmissionReason::MalformedPair);
    };
    let n = items.len();
    if n != expected.len() {
        return Outcome::omission(n, OmissionReason::LengthMismatch);
    }
    let mut labels = Vec::with_capacity(n);
    for (item, want) in items.iter().zip(expected) {
        let Some([token, label]) = item.as_array().map(Vec::as_slice) else {
            return Outcome::omission(n, OmissionReason::MalformedPair);
        };
        let (Some(token), Some(label)) = (scalar_text(token), label.as_str()) else {
            return Outcome::omission(n, OmissionReason::MalformedPair);
        };
        let Ok(tag) = label.parse::<Tag>() else {
            return Outcome::omission(n, OmissionReason::UnknownLabel(label.to_string()));
        };
        if opts.strict_tokens && &token != want {
            return Outcome::omission(n, OmissionReason::TokenMismatch);
        }
        labels.push(tag);
    }
    Outcome::Ok { labels }
}

/// Classifies a single-sentence response.
pub fn parse_response(raw: &str, expected_tokens: &[String], opts: ParseOptions) -> Outcome {
    match extract_output(raw) {
        Some(output) => classify_pairs(&output, expected_tokens, opts),
        None => Outcome::Empty,
    }
}

/// Classifies a response to a prompt carrying several sentences. Each
/// sentence is judged on its own list; one call always returns
/// `expected.len()` outcomes.
pub fn parse_batch_response(raw: &str, expected: &[&[String]], opts: ParseOptions) -> Vec<Outcome> {
    if let [single] = expected {
        return vec![parse_response(raw, single, opts)];
    }
    let Some(output) = extract_output(raw) else {
        return vec![Outcome::Empty; expected.len()];
    };
    let Value::Array(lists) = output else {
        return vec![Outcome::omission(0, OmissionReason::MalformedPair); expected.len()];
    };
    expected
        .iter()
        .enumerate()
        .map(|(i, tokens)| match lists.get(i) {
            Some(list) => classify_pairs(list, tokens, opts),
            None => Outcome::omission(0, OmissionReason::MissingSentence),
        })
        .collect()
}
