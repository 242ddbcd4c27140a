//! Few-shot NER prompt construction.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence, Tag};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptVariant {
    #[default]
    Default,
    /// Drops the input-format explanation sentences and the
    /// "Your task begins now!" line.
    Shortened,
}

const LABEL_BLOCK: &str = "\
Your task is to label entities in a given text written in {language}. Use the following labels for annotation:
- \"O\": Represents words that are not part of any named entity.
- \"B-PER\": Indicates the beginning of a person's name.
- \"I-PER\": Used for tokens inside a person's name.
- \"B-ORG\": Marks the beginning of an organization's name.
- \"I-ORG\": Tokens inside an organization's name.
- \"B-LOC\": Marks the beginning of a location (place) name.
- \"I-LOC\": Tokens inside a location name.
- \"B-DATE\": Marks the beginning of a date entity.
- \"I-DATE\": Tokens inside a date entity.
";

pub const INPUT_FORMAT_SENTENCE: &str = "You will receive a list of tokens as the value for the 'input' key and text language as the value for the 'language' key in a JSON dictionary.";

const OUTPUT_FORMAT: &str = "Your task is to provide a list of named entity labels, where each label corresponds to a token. Output the tokens with their corresponding named entity labels in a JSON format, using the key 'output'. 'output' should contain a list of tokens and their entity labels in format [token, label].";

pub const INPUT_LIST_NOTE: &str =
    "The input tokens are provided in a list format and represent the text.";

const NOTES: [&str; 3] = [
    "Important: the output should be a list with the same length as the input list, where each element corresponds to the named entity label for the corresponding token. Do not change the order of tokens and do not skip them.",
    "The named entity labels are case-sensitive, so please provide them exactly as specified (\"B-PER\", \"I-LOC\", etc.).",
    "Follow MUC-6 (Message Understanding Conference-6) Named Entity Recognition (NER) annotation guidelines.",
];

pub const TASK_BEGINS: &str = "Your task begins now!";

const JSON_ONLY: &str = "- Output JSON only. Enclose all tokens and tags in double brackets.";

/// The annotation prompt with `{language}`, `{examples}` and `{sentence}`
/// placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub variant: PromptVariant,
    pub body: String,
}

impl PromptTemplate {
    pub fn new(variant: PromptVariant) -> Self {
        PromptTemplate {
            variant,
            body: template_body(variant, 1),
        }
    }

    /// Template for `batch` sentences per prompt. A batch of one is the
    /// plain single-sentence template.
    pub fn for_batch(variant: PromptVariant, batch: usize) -> Self {
        PromptTemplate {
            variant,
            body: template_body(variant, batch),
        }
    }

    /// Substitutes placeholders in a single pass, so placeholder-like text
    /// inside the substituted values is left alone.
    pub fn render(&self, language: &str, examples: &str, sentence: &str) -> String {
        let mut out = String::with_capacity(self.body.len() + examples.len() + sentence.len());
        let mut rest = self.body.as_str();
        while let Some(start) = rest.find('{') {
            out.push_str(&rest[..start]);
            let tail = &rest[start..];
            let (value, skip) = if tail.starts_with("{language}") {
                (language, "{language}".len())
            } else if tail.starts_with("{examples}") {
                (examples, "{examples}".len())
            } else if tail.starts_with("{sentence}") {
                (sentence, "{sentence}".len())
            } else {
                ("{", 1)
            };
            out.push_str(value);
            rest = &tail[skip..];
        }
        out.push_str(rest);
        out
    }
}

fn template_body(variant: PromptVariant, batch: usize) -> String {
    let full = variant == PromptVariant::Default;
    let mut body = String::from(LABEL_BLOCK);
    body.push('\n');
    if full {
        body.push_str(INPUT_FORMAT_SENTENCE);
        body.push(' ');
    }
    body.push_str(OUTPUT_FORMAT);
    body.push_str("\n\n{examples}\n\nNote:\n");
    if full {
        body.push_str("- ");
        body.push_str(INPUT_LIST_NOTE);
        body.push('\n');
    }
    for note in NOTES {
        body.push_str("- ");
        body.push_str(note);
        body.push('\n');
    }
    if full {
        body.push_str(TASK_BEGINS);
        body.push('\n');
    }
    body.push_str(JSON_ONLY);
    body.push('\n');
    if batch > 1 {
        body.push_str(&format!(
            "- The 'input' value is a list of {batch} token lists, one per sentence. \
             Return 'output' as a list of {batch} lists in the same order, \
             each containing the [token, label] pairs for one sentence.\n"
        ));
        body.push_str("These are your sentences: {sentence}.");
    } else {
        body.push_str("This is your sentence: {sentence}.");
    }
    body
}

/// Display name for a MasakhaNER language code; unknown codes pass through.
pub fn language_name(code: &str) -> &str {
    match code {
        "bam" => "Bambara",
        "bbj" => "Ghomala'",
        "ewe" => "Ewe",
        "fon" => "Fon",
        "hau" => "Hausa",
        "ibo" => "Igbo",
        "kin" => "Kinyarwanda",
        "lug" => "Luganda",
        "luo" => "Dholuo",
        "mos" => "Mossi",
        "nya" => "Chichewa",
        "pcm" => "Nigerian Pidgin",
        "sna" => "chiShona",
        "swa" => "Kiswahili",
        "tsn" => "Setswana",
        "twi" => "Twi",
        "wol" => "Wolof",
        "xho" => "isiXhosa",
        "yor" => "Yoruba",
        "zul" => "isiZulu",
        other => other,
    }
}

/// Two worked examples: one without entities and one with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExamples {
    pub no_entity_example: Sentence,
    pub entity_example: Sentence,
}

impl FewShotExamples {
    pub fn new(no_entity_example: Sentence, entity_example: Sentence) -> Result<Self> {
        if no_entity_example.entity_token_count()? != 0 {
            return Err(Error::NoExample("first example must contain no entities"));
        }
        if entity_example.entity_token_count()? == 0 {
            return Err(Error::NoExample(
                "second example must contain at least one entity",
            ));
        }
        if no_entity_example.language != entity_example.language {
            return Err(Error::LanguageMismatch {
                expected: no_entity_example.language,
                found: entity_example.language,
            });
        }
        Ok(FewShotExamples {
            no_entity_example,
            entity_example,
        })
    }

    pub fn language(&self) -> &str {
        &self.no_entity_example.language
    }

    /// Serializes both examples, one JSON object per line, as
    /// `{"input": [...], "language": ..., "output": [[token, label], ...]}`.
    pub fn render(&self) -> Result<String> {
        let a = example_json(&self.no_entity_example)?;
        let b = example_json(&self.entity_example)?;
        Ok(format!("{a}\n{b}"))
    }
}

#[derive(Serialize)]
struct ExampleRecord<'a> {
    input: &'a [String],
    language: &'a str,
    output: Vec<(&'a str, &'static str)>,
}

fn example_json(s: &Sentence) -> Result<String> {
    let gold = s.gold()?;
    let rec = ExampleRecord {
        input: &s.tokens,
        language: language_name(&s.language),
        output: s
            .tokens
            .iter()
            .zip(gold)
            .map(|(t, g)| (t.as_str(), g.as_str()))
            .collect(),
    };
    Ok(serde_json::to_string(&rec)?)
}

#[derive(Serialize)]
struct SentenceSlot<'a, T: Serialize> {
    input: T,
    language: &'a str,
}

/// Renders the `{sentence}` slot: one token list, or an ordered array of
/// token lists for a batch.
pub fn sentence_slot(language: &str, sentences: &[&Sentence]) -> Result<String> {
    let name = language_name(language);
    let json = if let [single] = sentences {
        serde_json::to_string(&SentenceSlot {
            input: &single.tokens,
            language: name,
        })?
    } else {
        let lists: Vec<&[String]> = sentences.iter().map(|s| s.tokens.as_slice()).collect();
        serde_json::to_string(&SentenceSlot {
            input: lists,
            language: name,
        })?
    };
    Ok(json)
}

/// Builds the full prompt for one or two sentences in `language`.
pub fn build_prompt(
    language: &str,
    examples: &FewShotExamples,
    sentences: &[&Sentence],
    variant: PromptVariant,
    batch_size: usize,
) -> Result<String> {
    if sentences.is_empty() || sentences.len() > batch_size {
        return Err(Error::Config(format!(
            "prompt needs between 1 and {batch_size} sentences, got {}",
            sentences.len()
        )));
    }
    if examples.language() != language {
        return Err(Error::LanguageMismatch {
            expected: language.to_string(),
            found: examples.language().to_string(),
        });
    }
    for s in sentences {
        if s.language != language {
            return Err(Error::LanguageMismatch {
                expected: language.to_string(),
                found: s.language.clone(),
            });
        }
    }
    let template = PromptTemplate::for_batch(variant, sentences.len());
    Ok(template.render(
        language_name(language),
        &examples.render()?,
        &sentence_slot(language, sentences)?,
    ))
}

/// Picks one zero-entity and one entity-bearing sentence from a held-out
/// split, deterministically under `seed`.
pub fn pick_examples(test_split: &Corpus, seed: u64) -> Result<FewShotExamples> {
    let mut empty = Vec::new();
    let mut with_entities = Vec::new();
    for s in test_split {
        if s.entity_token_count()? == 0 {
            empty.push(s);
        } else {
            with_entities.push(s);
        }
    }
    let mut rng = rng::derive(seed, &[b"few-shot-examples"]);
    let first = *empty
        .choose(&mut rng)
        .ok_or(Error::NoExample("no zero-entity example"))?;
    let same_language: Vec<_> = with_entities
        .into_iter()
        .filter(|s| s.language == first.language)
        .collect();
    let second = *same_language
        .choose(&mut rng)
        .ok_or(Error::NoExample("no entity-bearing example"))?;
    FewShotExamples::new(first.clone(), second.clone())
}

/// Serializes labels the way a compliant annotator answers a
/// single-sentence prompt.
pub fn render_output(tokens: &[String], labels: &[Tag]) -> String {
    let pairs: Vec<(&str, &str)> = tokens
        .iter()
        .zip(labels)
        .map(|(t, l)| (t.as_str(), l.as_str()))
        .collect();
    serde_json::json!({ "output": pairs }).to_string()
}

/// Batch counterpart of [`render_output`].
pub fn render_batch_output(items: &[(&[String], &[Tag])]) -> String {
    let lists: Vec<Vec<(&str, &str)>> = items
        .iter()
        .map(|(tokens, labels)| {
            tokens
                .iter()
                .zip(labels.iter())
                .map(|(t, l)| (t.as_str(), l.as_str()))
                .collect()
        })
        .collect();
    serde_json::json!({ "output": lists }).to_string()
}
