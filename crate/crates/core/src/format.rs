//! The MMM text format.
//!
//! Input lines are the sample text followed by one space and the task word
//! introduced by `/`:
//!
//! ```text
//! Giant pandas are mammals, endemic to China. /NER
//! ```
//!
//! Output lines are the text-level label, the task word, then the
//! word-level pairs, each introduced by `:` with label and entity separated
//! by `;`:
//!
//! ```text
//! nature NER:Animal Name;pandas:Nation;China
//! ```
//!
//! There is no escaping. `:` and `;` can never appear inside a label or an
//! entity, and serialization refuses to produce ambiguous output.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::dataset::{DatasetId, Language};

/// Separator between pairs.
pub const PAIR_START: char = ':';
/// Separator between the label and the entity of one pair.
pub const PAIR_SEP: char = ';';
/// Introduces the task word in an input line.
pub const TASK_MARKER: char = '/';

const RESERVED: [char; 3] = [PAIR_START, PAIR_SEP, TASK_MARKER];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("empty text")]
    EmptyText,
    #[error("empty task word")]
    EmptyTaskWord,
    #[error("whitespace {0:?} in task word")]
    TaskWordWhitespace(char),
    #[error("reserved character {0:?} in task word")]
    TaskWordReserved(char),
    #[error("no `/` task marker found")]
    MissingMarker,
    #[error("empty text label")]
    EmptyTextLabel,
    #[error("text label {0:?} has leading or trailing whitespace")]
    UntrimmedTextLabel(String),
    #[error("text label {label:?} contains the task word {task_word:?}")]
    TextLabelContainsTaskWord { label: String, task_word: String },
    #[error("empty {field} in pair {index}")]
    EmptyPairField { index: usize, field: &'static str },
    #[error("reserved character {ch:?} in {field} {value:?} of pair {index}")]
    ReservedInPair {
        index: usize,
        field: &'static str,
        value: String,
        ch: char,
    },
    #[error("{field} {value:?} of pair {index} has leading or trailing whitespace")]
    UntrimmedPairField {
        index: usize,
        field: &'static str,
        value: String,
    },
}

/// Whitespace as understood by Python's `str.strip()`: Unicode `White_Space`
/// plus the four ASCII information separators U+001C..U+001F.
pub fn is_strip_whitespace(c: char) -> bool {
    c.is_whitespace() || ('\u{1c}'..='\u{1f}').contains(&c)
}

/// Trims both ends exactly like Python's `str.strip()` with no argument.
pub fn strip(s: &str) -> &str {
    s.trim_matches(is_strip_whitespace)
}

/// Instruction word selecting the output schema, e.g. `NER`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TaskWord(String);

impl TaskWord {
    pub fn new(token: impl Into<String>) -> Result<Self, FormatError> {
        let token = token.into();
        if token.is_empty() {
            return Err(FormatError::EmptyTaskWord);
        }
        for c in token.chars() {
            if is_strip_whitespace(c) {
                return Err(FormatError::TaskWordWhitespace(c));
            }
            if RESERVED.contains(&c) {
                return Err(FormatError::TaskWordReserved(c));
            }
        }
        Ok(TaskWord(token))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TaskWord {
    type Error = FormatError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        TaskWord::new(value)
    }
}

impl From<TaskWord> for String {
    fn from(value: TaskWord) -> Self {
        value.0
    }
}

impl fmt::Display for TaskWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One word-level unit: a label and the entity it tags.
///
/// Values are not validated on construction; malformed pairs coming back
/// from a model are kept so that [`validate_sample`] can report them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelEntityPair {
    pub label: String,
    pub entity: String,
}

impl LabelEntityPair {
    pub fn new(label: impl Into<String>, entity: impl Into<String>) -> Self {
        LabelEntityPair {
            label: label.into(),
            entity: entity.into(),
        }
    }

    fn check(&self, index: usize) -> Result<(), FormatError> {
        for (field, value) in [("label", &self.label), ("entity", &self.entity)] {
            if strip(value).is_empty() {
                return Err(FormatError::EmptyPairField { index, field });
            }
            if let Some(ch) = value.chars().find(|c| *c == PAIR_START || *c == PAIR_SEP) {
                return Err(FormatError::ReservedInPair {
                    index,
                    field,
                    value: value.clone(),
                    ch,
                });
            }
            if strip(value).len() != value.len() {
                return Err(FormatError::UntrimmedPairField {
                    index,
                    field,
                    value: value.clone(),
                });
            }
        }
        Ok(())
    }
}

/// One element of the parsed pair set: the `;`-separated fields of a chunk.
///
/// Well-formed chunks have exactly two fields. A chunk without `;` yields a
/// single field, and extra `;` yield more.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairTuple(pub Vec<String>);

impl PairTuple {
    pub fn from_chunk(chunk: &str) -> Self {
        PairTuple(chunk.split(PAIR_SEP).map(String::from).collect())
    }

    pub fn from_pair(pair: &LabelEntityPair) -> Self {
        PairTuple(alloc::vec![pair.label.clone(), pair.entity.clone()])
    }

    pub fn fields(&self) -> &[String] {
        &self.0
    }

    pub fn as_pair(&self) -> Option<(&str, &str)> {
        match self.0.as_slice() {
            [label, entity] => Some((label, entity)),
            _ => None,
        }
    }

    /// Lossy conversion into a pair: the first field is the label and the
    /// remaining fields, re-joined with `;`, the entity. A single-field
    /// tuple becomes a pair with an empty entity.
    pub fn to_pair(&self) -> LabelEntityPair {
        let mut fields = self.0.iter();
        let label = fields.next().cloned().unwrap_or_default();
        let rest: Vec<&str> = fields.map(String::as_str).collect();
        LabelEntityPair::new(label, rest.join(";"))
    }
}

impl fmt::Display for PairTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(";"))
    }
}

/// Decoded model or pipeline output.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub text_label: String,
    pub pairs: BTreeSet<PairTuple>,
    /// Stripped remainder after the task word, set only in TCREE mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_tail: Option<String>,
}

impl ParsedOutput {
    /// The element set scored at word level. In TCREE mode this is the
    /// single tuple obtained by splitting the tail on `;`.
    pub fn items(&self) -> BTreeSet<PairTuple> {
        match &self.raw_tail {
            Some(tail) => core::iter::once(PairTuple::from_chunk(tail)).collect(),
            None => self.pairs.clone(),
        }
    }
}

/// One MMM datum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub dataset: DatasetId,
    pub language: Language,
    pub text: String,
    pub task_word: TaskWord,
    pub text_label: String,
    pub pairs: Vec<LabelEntityPair>,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub meta: serde_json::Map<String, serde_json::Value>,
}

impl Sample {
    pub fn input_line(&self) -> Result<String, FormatError> {
        build_input(&self.text, &self.task_word)
    }

    pub fn output_line(&self) -> Result<String, FormatError> {
        serialize_output(&self.text_label, &self.pairs, &self.task_word)
    }

    /// Applies NFC to every textual field.
    pub fn normalize_nfc(&mut self) {
        fn nfc(s: &mut String) {
            if !unicode_normalization::is_nfc(s) {
                *s = s.nfc().collect();
            }
        }
        nfc(&mut self.text);
        nfc(&mut self.text_label);
        for pair in &mut self.pairs {
            nfc(&mut pair.label);
            nfc(&mut pair.entity);
        }
    }

    /// Word-level items the way the scorer sees a gold sample.
    pub fn gold_items(&self, tcree_mode: bool) -> BTreeSet<PairTuple> {
        if tcree_mode {
            let mut tail = String::new();
            for pair in &self.pairs {
                tail.push(PAIR_START);
                tail.push_str(&pair.label);
                tail.push(PAIR_SEP);
                tail.push_str(&pair.entity);
            }
            core::iter::once(PairTuple::from_chunk(strip(&tail))).collect()
        } else {
            self.pairs.iter().map(PairTuple::from_pair).collect()
        }
    }
}

/// Renders an input line: `text`, one space, `/`, task word.
pub fn build_input(text: &str, task_word: &TaskWord) -> Result<String, FormatError> {
    if text.is_empty() {
        return Err(FormatError::EmptyText);
    }
    let mut line = String::with_capacity(text.len() + task_word.0.len() + 2);
    line.push_str(text);
    line.push(' ');
    line.push(TASK_MARKER);
    line.push_str(&task_word.0);
    Ok(line)
}

/// Splits an input line at its last `/` into text and task word.
///
/// The marker must start the final whitespace-delimited token; exactly one
/// whitespace character before it is consumed, so the text comes back
/// byte-for-byte.
pub fn parse_input(line: &str) -> Result<(String, TaskWord), FormatError> {
    let at = line.rfind(TASK_MARKER).ok_or(FormatError::MissingMarker)?;
    let word = &line[at + 1..];
    if word.is_empty() {
        return Err(FormatError::EmptyTaskWord);
    }
    let task_word = TaskWord::new(word)?;
    let head = &line[..at];
    let sep = head.chars().next_back().ok_or(FormatError::EmptyText)?;
    if !is_strip_whitespace(sep) {
        return Err(FormatError::MissingMarker);
    }
    let text = &head[..head.len() - sep.len_utf8()];
    if text.is_empty() {
        return Err(FormatError::EmptyText);
    }
    Ok((text.to_string(), task_word))
}

/// Splits the remainder after the task word into ordered, de-duplicated
/// tuples. A chunk is kept if it is non-empty before stripping.
fn split_chunks(rest: &str) -> Vec<PairTuple> {
    let mut seen = BTreeSet::new();
    rest.split(PAIR_START)
        .filter(|chunk| !chunk.is_empty())
        .map(|chunk| PairTuple::from_chunk(strip(chunk)))
        .filter(|t| seen.insert(t.clone()))
        .collect()
}

/// Like [`parse_output`] outside TCREE mode but keeps first-occurrence
/// order, and returns `None` when the task word is absent.
pub fn parse_output_ordered(output: &str, instruct_word: &TaskWord) -> Option<(String, Vec<PairTuple>)> {
    let (label, rest) = output.split_once(instruct_word.as_str())?;
    Some((strip(label).to_string(), split_chunks(rest)))
}

/// Decodes an output string into a text label and a pair set.
///
/// Total over all strings. When the task word is absent the result is an
/// empty label with no pairs. Otherwise the output is split once on the
/// first occurrence of the task word; the stripped prefix is the label. In
/// TCREE mode the stripped remainder is kept whole as `raw_tail`; otherwise
/// it is split on `:`, each non-empty chunk stripped and split on `;`.
/// Tuple fields themselves are not stripped.
pub fn parse_output(output: &str, instruct_word: &TaskWord, tcree_mode: bool) -> ParsedOutput {
    let Some((label, rest)) = output.split_once(instruct_word.as_str()) else {
        return ParsedOutput::default();
    };
    let text_label = strip(label).to_string();
    if tcree_mode {
        ParsedOutput {
            text_label,
            pairs: BTreeSet::new(),
            raw_tail: Some(strip(rest).to_string()),
        }
    } else {
        ParsedOutput {
            text_label,
            pairs: split_chunks(rest).into_iter().collect(),
            raw_tail: None,
        }
    }
}

fn check_text_label(text_label: &str, task_word: &TaskWord) -> Result<(), FormatError> {
    if strip(text_label).is_empty() {
        return Err(FormatError::EmptyTextLabel);
    }
    if strip(text_label).len() != text_label.len() {
        return Err(FormatError::UntrimmedTextLabel(text_label.to_string()));
    }
    if text_label.contains(task_word.as_str()) {
        return Err(FormatError::TextLabelContainsTaskWord {
            label: text_label.to_string(),
            task_word: task_word.to_string(),
        });
    }
    Ok(())
}

/// Renders `<text_label> <TASKWORD>:l1;e1:l2;e2...` keeping pair order.
pub fn serialize_output(
    text_label: &str,
    pairs: &[LabelEntityPair],
    task_word: &TaskWord,
) -> Result<String, FormatError> {
    check_text_label(text_label, task_word)?;
    let mut out = String::new();
    out.push_str(text_label);
    out.push(' ');
    out.push_str(task_word.as_str());
    for (index, pair) in pairs.iter().enumerate() {
        pair.check(index)?;
        out.push(PAIR_START);
        out.push_str(&pair.label);
        out.push(PAIR_SEP);
        out.push_str(&pair.entity);
    }
    Ok(out)
}

/// Named sample-level rule broken by a [`Violation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    TextEmpty,
    TextLabelEmpty,
    TextLabelUntrimmed,
    TextLabelTaskWord,
    PairLabelEmpty,
    PairEntityEmpty,
    PairReserved,
    PairUntrimmed,
    EntityUngrounded,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::TextEmpty => "text-empty",
            Rule::TextLabelEmpty => "text-label-empty",
            Rule::TextLabelUntrimmed => "text-label-untrimmed",
            Rule::TextLabelTaskWord => "text-label-task-word",
            Rule::PairLabelEmpty => "pair-label-empty",
            Rule::PairEntityEmpty => "pair-entity-empty",
            Rule::PairReserved => "pair-reserved-char",
            Rule::PairUntrimmed => "pair-untrimmed",
            Rule::EntityUngrounded => "entity-ungrounded",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule.id())
    }
}

/// Lists every broken invariant of `sample`. With `grounding`, each entity
/// must also occur verbatim in the text.
pub fn validate_sample(sample: &Sample, grounding: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: String, rule: Rule| out.push(Violation { field, rule });

    if sample.text.is_empty() {
        push("text".into(), Rule::TextEmpty);
    }
    match check_text_label(&sample.text_label, &sample.task_word) {
        Ok(()) => {}
        Err(FormatError::EmptyTextLabel) => push("text_label".into(), Rule::TextLabelEmpty),
        Err(FormatError::UntrimmedTextLabel(_)) => push("text_label".into(), Rule::TextLabelUntrimmed),
        Err(_) => push("text_label".into(), Rule::TextLabelTaskWord),
    }
    for (i, pair) in sample.pairs.iter().enumerate() {
        if let Err(err) = pair.check(i) {
            let (field, rule) = match err {
                FormatError::EmptyPairField { field: "label", .. } => ("label", Rule::PairLabelEmpty),
                FormatError::EmptyPairField { .. } => ("entity", Rule::PairEntityEmpty),
                FormatError::ReservedInPair { field, .. } => (field, Rule::PairReserved),
                FormatError::UntrimmedPairField { field, .. } => (field, Rule::PairUntrimmed),
                _ => unreachable!("pair check only yields pair errors"),
            };
            push(alloc::format!("pairs[{i}].{field}"), rule);
        }
        if grounding && !pair.entity.is_empty() && !sample.text.contains(pair.entity.as_str()) {
            push(alloc::format!("pairs[{i}].entity"), Rule::EntityUngrounded);
        }
    }
    out
}
