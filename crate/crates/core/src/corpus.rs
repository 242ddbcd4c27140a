//! BIO-tagged sentences, corpora, and their on-disk formats.
//!
//! Two formats are supported:
//!
//! * CoNLL-style text: one `token<TAB or space>tag` pair per line, blank
//!   lines between sentences.
//! * JSONL: one `{"id", "tokens", "gold", "language"}` object per line.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of tags in the label set.
pub const NUM_TAGS: usize = 9;

/// One of the nine BIO tags used for annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Tag {
    O,
    BPer,
    IPer,
    BOrg,
    IOrg,
    BLoc,
    ILoc,
    BDate,
    IDate,
}

/// Entity type carried by a non-`O` tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityClass {
    #[serde(rename = "PER")]
    Per,
    #[serde(rename = "ORG")]
    Org,
    #[serde(rename = "LOC")]
    Loc,
    #[serde(rename = "DATE")]
    Date,
}

impl EntityClass {
    pub const ALL: [EntityClass; 4] = [
        EntityClass::Per,
        EntityClass::Org,
        EntityClass::Loc,
        EntityClass::Date,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityClass::Per => "PER",
            EntityClass::Org => "ORG",
            EntityClass::Loc => "LOC",
            EntityClass::Date => "DATE",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn begin(self) -> Tag {
        match self {
            EntityClass::Per => Tag::BPer,
            EntityClass::Org => Tag::BOrg,
            EntityClass::Loc => Tag::BLoc,
            EntityClass::Date => Tag::BDate,
        }
    }

    pub fn inside(self) -> Tag {
        match self {
            EntityClass::Per => Tag::IPer,
            EntityClass::Org => Tag::IOrg,
            EntityClass::Loc => Tag::ILoc,
            EntityClass::Date => Tag::IDate,
        }
    }
}

impl fmt::Display for EntityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Tag {
    /// All tags in their stable order. Class indices in probability
    /// vectors follow this order.
    pub const ALL: [Tag; NUM_TAGS] = [
        Tag::O,
        Tag::BPer,
        Tag::IPer,
        Tag::BOrg,
        Tag::IOrg,
        Tag::BLoc,
        Tag::ILoc,
        Tag::BDate,
        Tag::IDate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::O => "O",
            Tag::BPer => "B-PER",
            Tag::IPer => "I-PER",
            Tag::BOrg => "B-ORG",
            Tag::IOrg => "I-ORG",
            Tag::BLoc => "B-LOC",
            Tag::ILoc => "I-LOC",
            Tag::BDate => "B-DATE",
            Tag::IDate => "I-DATE",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tag> {
        Tag::ALL.get(i).copied()
    }

    pub fn is_entity(self) -> bool {
        self != Tag::O
    }

    pub fn is_begin(self) -> bool {
        matches!(self, Tag::BPer | Tag::BOrg | Tag::BLoc | Tag::BDate)
    }

    pub fn entity_class(self) -> Option<EntityClass> {
        match self {
            Tag::O => None,
            Tag::BPer | Tag::IPer => Some(EntityClass::Per),
            Tag::BOrg | Tag::IOrg => Some(EntityClass::Org),
            Tag::BLoc | Tag::ILoc => Some(EntityClass::Loc),
            Tag::BDate | Tag::IDate => Some(EntityClass::Date),
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = Error;

    /// Case-sensitive: `"b-per"` is rejected.
    fn from_str(s: &str) -> Result<Self> {
        Tag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTag(s.to_string()))
    }
}

impl TryFrom<String> for Tag {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Tag> for String {
    fn from(t: Tag) -> String {
        t.as_str().to_string()
    }
}

/// The fixed, ordered annotation label set.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelSet;

impl LabelSet {
    pub fn labels(&self) -> &'static [Tag; NUM_TAGS] {
        &Tag::ALL
    }

    pub fn entity_classes(&self) -> &'static [EntityClass; 4] {
        &EntityClass::ALL
    }

    pub fn contains(&self, label: &str) -> bool {
        label.parse::<Tag>().is_ok()
    }
}

/// A pre-tokenized sentence with optional gold labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub gold: Option<Vec<Tag>>,
    pub language: String,
}

impl Sentence {
    pub fn new(
        id: impl Into<String>,
        tokens: Vec<String>,
        gold: Option<Vec<Tag>>,
        language: impl Into<String>,
    ) -> Result<Self> {
        let s = Sentence {
            id: id.into(),
            tokens,
            gold,
            language: language.into(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Convenience constructor for tests and examples: whitespace-split
    /// tokens and tag strings.
    pub fn from_pairs(id: &str, language: &str, pairs: &[(&str, &str)]) -> Result<Self> {
        let tokens = pairs.iter().map(|(t, _)| t.to_string()).collect();
        let gold = pairs
            .iter()
            .map(|(_, tag)| tag.parse())
            .collect::<Result<Vec<Tag>>>()?;
        Sentence::new(id, tokens, Some(gold), language)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tokens.is_empty() {
            return Err(Error::InvalidSentence(format!("{}: no tokens", self.id)));
        }
        if self.tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::InvalidSentence(format!("{}: empty token", self.id)));
        }
        if let Some(gold) = &self.gold {
            if gold.len() != self.tokens.len() {
                return Err(Error::InvalidSentence(format!(
                    "{}: {} tokens but {} gold tags",
                    self.id,
                    self.tokens.len(),
                    gold.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn gold(&self) -> Result<&[Tag]> {
        self.gold
            .as_deref()
            .ok_or_else(|| Error::MissingGold(self.id.clone()))
    }

    /// Number of tokens whose gold tag is not `O`.
    pub fn entity_token_count(&self) -> Result<usize> {
        Ok(self.gold()?.iter().filter(|t| t.is_entity()).count())
    }

    pub fn with_labels(&self, labels: Vec<Tag>) -> Sentence {
        Sentence {
            gold: Some(labels),
            ..self.clone()
        }
    }
}

/// Fraction of a sentence's tokens that carry an entity tag.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EntityProportion(pub f64);

impl EntityProportion {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn entity_proportion(s: &Sentence) -> Result<EntityProportion> {
    let n = s.entity_token_count()?;
    Ok(EntityProportion(n as f64 / s.len() as f64))
}

/// An `I-X` tag not preceded by `B-X` or `I-X`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioViolation {
    pub sentence_id: String,
    pub position: usize,
    pub tag: Tag,
    pub previous: Tag,
}

/// Reports BIO inconsistencies in gold labels. Sentences without gold
/// produce no violations.
pub fn lint_bio(s: &Sentence) -> Vec<BioViolation> {
    let Some(gold) = &s.gold else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut prev = Tag::O;
    for (i, &tag) in gold.iter().enumerate() {
        if tag.is_entity() && !tag.is_begin() && prev.entity_class() != tag.entity_class() {
            out.push(BioViolation {
                sentence_id: s.id.clone(),
                position: i,
                tag,
                previous: prev,
            });
        }
        prev = tag;
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub language: String,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and invalid sentences.
    pub fn new(language: impl Into<String>, sentences: Vec<Sentence>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(sentences.len());
        for s in &sentences {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(Error::DuplicateId(s.id.clone()));
            }
        }
        Ok(Corpus {
            sentences,
            language: language.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sentence> {
        self.sentences.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.id == id)
    }

    /// Share of entity tokens per class (PER, ORG, LOC, DATE order),
    /// counted over gold labels. All zeros when there are no entities.
    pub fn class_shares(&self) -> Result<[f64; 4]> {
        let mut counts = [0usize; 4];
        for s in &self.sentences {
            for tag in s.gold()? {
                if let Some(c) = tag.entity_class() {
                    counts[c.index()] += 1;
                }
            }
        }
        let total: usize = counts.iter().sum();
        let mut shares = [0.0; 4];
        if total > 0 {
            for (share, count) in shares.iter_mut().zip(counts) {
                *share = count as f64 / total as f64;
            }
        }
        Ok(shares)
    }

    pub fn lint(&self) -> Vec<BioViolation> {
        self.sentences.iter().flat_map(lint_bio).collect()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Sentence;
    type IntoIter = std::slice::Iter<'a, Sentence>;

    fn into_iter(self) -> Self::IntoIter {
        self.sentences.iter()
    }
}

fn split_conll_line(line: &str) -> Option<(&str, &str)> {
    let sep = if line.contains('\t') { '\t' } else { ' ' };
    let mut parts = line.split(sep);
    let token = parts.next()?;
    let tag = parts.next()?;
    if parts.next().is_some() || token.is_empty() || tag.is_empty() {
        return None;
    }
    Some((token, tag))
}

/// Reads a CoNLL-style file. Sentence ids are `<filename>:<ordinal>`
/// with zero-based ordinals.
pub fn load_conll(path: impl AsRef<Path>, language: &str) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_conll(BufReader::new(file), &name, language).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_conll(reader: impl BufRead, name: &str, language: &str) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();

    let mut flush = |tokens: &mut Vec<String>, tags: &mut Vec<Tag>| -> Result<()> {
        if tokens.is_empty() {
            return Ok(());
        }
        let id = format!("{name}:{}", sentences.len());
        sentences.push(Sentence::new(
            id,
            std::mem::take(tokens),
            Some(std::mem::take(tags)),
            language,
        )?);
        Ok(())
    };

    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(name, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            flush(&mut tokens, &mut tags)?;
            continue;
        }
        let (token, tag) = split_conll_line(line).ok_or_else(|| Error::Parse {
            line: i + 1,
            message: format!("expected `token<sep>tag`, got {line:?}"),
        })?;
        tokens.push(token.to_string());
        tags.push(tag.parse()?);
    }
    flush(&mut tokens, &mut tags)?;
    Corpus::new(language, sentences)
}

/// Writes a corpus in CoNLL style using `separator` between token and tag.
pub fn write_conll(corpus: &Corpus, mut out: impl Write, separator: char) -> Result<()> {
    let io = |e| Error::io("<conll>", e);
    for (i, s) in corpus.sentences.iter().enumerate() {
        if i > 0 {
            writeln!(out).map_err(io)?;
        }
        for (token, tag) in s.tokens.iter().zip(s.gold()?) {
            writeln!(out, "{token}{separator}{tag}").map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn save_conll(corpus: &Corpus, path: impl AsRef<Path>, separator: char) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_conll(corpus, BufWriter::new(file), separator)
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: String,
    tokens: Vec<String>,
    gold: Option<Vec<Tag>>,
    language: String,
}

pub fn write_jsonl(corpus: &Corpus, mut out: impl Write) -> Result<()> {
    for s in &corpus.sentences {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n").map_err(|e| Error::io("<jsonl>", e))?;
    }
    out.flush().map_err(|e| Error::io("<jsonl>", e))
}

pub fn read_jsonl(reader: impl BufRead) -> Result<Corpus> {
    let mut sentences = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(&line).map_err(|e| Error::Schema {
            record: i + 1,
            message: e.to_string(),
        })?;
        sentences.push(Sentence {
            id: rec.id,
            tokens: rec.tokens,
            gold: rec.gold,
            language: rec.language,
        });
    }
    let language = sentences
        .first()
        .map(|s| s.language.clone())
        .unwrap_or_default();
    Corpus::new(language, sentences)
}

pub fn save_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl(corpus, BufWriter::new(file))
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(BufReader::new(file))
}
