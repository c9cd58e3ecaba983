//! Prompt rendering for the translation and text-label annotation stages.
//!
//! A translation prompt carries the instruction, a numbered constraint
//! list, exactly one worked example, and the sample to translate as two
//! lines: its input line and its output line with labels already
//! translated but entities still in the source language. The model is
//! expected to answer with the same two lines, translated.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{DatasetId, Language, LanguagePair};
use crate::format::{self, parse_input, parse_output_ordered, strip, FormatError, LabelEntityPair, Sample};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("template {template} applies to {expected}, not {actual}")]
    LanguageMismatch {
        template: String,
        expected: LanguagePair,
        actual: LanguagePair,
    },
    #[error("template {template} does not apply to dataset {dataset}")]
    DatasetMismatch { template: String, dataset: DatasetId },
    #[error("template {0} has an empty instruction")]
    EmptyInstruction(String),
    #[error("sample cannot be rendered: {0}")]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneShot {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Applicability {
    pub source: Language,
    pub target: Language,
    /// Empty means every dataset.
    #[serde(default)]
    pub datasets: Vec<DatasetId>,
}

/// Instruction, constraints and one in-context example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub instruction: String,
    #[serde(default)]
    pub constraints: Vec<String>,
    pub one_shot: OneShot,
    pub applicable: Applicability,
    #[serde(default)]
    pub purpose: Purpose,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Purpose {
    #[default]
    Translation,
    Annotation,
}

impl PromptTemplate {
    pub fn pair(&self) -> LanguagePair {
        LanguagePair::new(self.applicable.source, self.applicable.target)
    }

    pub fn applies_to(&self, dataset: DatasetId, pair: LanguagePair) -> bool {
        self.pair() == pair && (self.applicable.datasets.is_empty() || self.applicable.datasets.contains(&dataset))
    }

    fn check(&self, dataset: DatasetId, pair: LanguagePair) -> Result<(), PromptError> {
        if strip(&self.instruction).is_empty() {
            return Err(PromptError::EmptyInstruction(self.id.clone()));
        }
        if self.pair() != pair {
            return Err(PromptError::LanguageMismatch {
                template: self.id.clone(),
                expected: self.pair(),
                actual: pair,
            });
        }
        if !self.applies_to(dataset, pair) {
            return Err(PromptError::DatasetMismatch {
                template: self.id.clone(),
                dataset,
            });
        }
        Ok(())
    }

    fn substitute(&self, text: &str) -> String {
        text.replace("{source_language}", self.applicable.source.name())
            .replace("{target_language}", self.applicable.target.name())
    }

    fn write_header(&self, out: &mut String) {
        out.push_str(&self.substitute(strip(&self.instruction)));
        out.push('\n');
        if !self.constraints.is_empty() {
            out.push_str("\nConstraints:\n");
            for (i, c) in self.constraints.iter().enumerate() {
                let _ = writeln!(out, "{}. {}", i + 1, self.substitute(strip(c)));
            }
        }
        out.push_str("\nExample input:\n");
        out.push_str(strip(&self.one_shot.input));
        out.push_str("\n\nExample output:\n");
        out.push_str(strip(&self.one_shot.output));
        out.push('\n');
    }
}

/// Renders the translation prompt for a sample whose labels have already
/// been translated into `target`.
pub fn build_translation_prompt(
    sample: &Sample,
    target: Language,
    template: &PromptTemplate,
) -> Result<String, PromptError> {
    template.check(sample.dataset, LanguagePair::new(sample.language, target))?;
    let input = sample.input_line()?;
    let output = sample.output_line()?;
    let mut out = String::new();
    template.write_header(&mut out);
    out.push_str("\nInput:\n");
    out.push_str(&input);
    out.push('\n');
    out.push_str(&output);
    out.push_str("\n\nOutput:\n");
    Ok(out)
}

/// Renders the prompt asking for an open-domain text-level label.
pub fn build_annotation_prompt(
    text: &str,
    pairs: &[LabelEntityPair],
    template: &PromptTemplate,
) -> Result<String, PromptError> {
    if strip(&template.instruction).is_empty() {
        return Err(PromptError::EmptyInstruction(template.id.clone()));
    }
    if text.is_empty() {
        return Err(FormatError::EmptyText.into());
    }
    let mut out = String::new();
    template.write_header(&mut out);
    out.push_str("\nInput:\n");
    out.push_str(text);
    out.push('\n');
    for p in pairs {
        let _ = writeln!(out, "{}: {}", p.label, p.entity);
    }
    out.push_str("\nOutput:\n");
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub model: String,
    pub temperature: f32,
    pub max_tokens: u32,
}

impl DecodingParams {
    /// Temperature 0 and a length budget of four times the source size in
    /// characters.
    pub fn for_source(model: impl Into<String>, source_chars: usize) -> Self {
        DecodingParams {
            model: model.into(),
            temperature: 0.0,
            max_tokens: u32::try_from(source_chars.saturating_mul(4))
                .unwrap_or(u32::MAX)
                .max(16),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub params: DecodingParams,
}

impl CompletionRequest {
    pub fn new(prompt: String, params: DecodingParams) -> Self {
        CompletionRequest { prompt, params }
    }

    /// SHA-256 over the canonical JSON of the request, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReplyError {
    #[error("reply has no input line ending in /{0}")]
    MissingInput(String),
    #[error("reply has no output line containing {0}")]
    MissingOutput(String),
    #[error("empty reply")]
    Empty,
}

fn reply_lines(reply: &str) -> impl Iterator<Item = &str> {
    reply
        .lines()
        .map(strip)
        .filter(|l| !l.is_empty())
        .filter(|l| !matches!(*l, "Input:" | "Output:" | "Example input:" | "Example output:"))
}

/// Parses a translation reply into a candidate sample in `target`.
///
/// The first line that parses as an input line with the source task word
/// gives the text; the next line containing the task word gives the label
/// and pairs. Pairs keep their order, duplicates dropped, malformed chunks
/// kept for the format filter to reject.
pub fn parse_translation_reply(
    reply: &str,
    source: &Sample,
    target: Language,
    candidate_id: &str,
) -> Result<Sample, ReplyError> {
    let word = &source.task_word;
    let mut lines = reply_lines(reply);
    let text = lines
        .by_ref()
        .find_map(|l| parse_input(l).ok().filter(|(_, w)| w == word).map(|(t, _)| t))
        .ok_or_else(|| ReplyError::MissingInput(word.to_string()))?;
    let (text_label, tuples) = lines
        .find_map(|l| parse_output_ordered(l, word))
        .ok_or_else(|| ReplyError::MissingOutput(word.to_string()))?;
    let mut meta = serde_json::Map::new();
    meta.insert("source_id".into(), source.id.clone().into());
    meta.insert("source_language".into(), source.language.as_str().into());
    let mut candidate = Sample {
        id: candidate_id.to_string(),
        dataset: source.dataset,
        language: target,
        text,
        task_word: word.clone(),
        text_label,
        pairs: tuples.iter().map(format::PairTuple::to_pair).collect(),
        meta,
    };
    candidate.normalize_nfc();
    Ok(candidate)
}

/// First non-empty line of an annotation reply, stripped.
pub fn parse_annotation_reply(reply: &str) -> Result<String, ReplyError> {
    reply_lines(reply)
        .next()
        .map(ToString::to_string)
        .ok_or(ReplyError::Empty)
}
