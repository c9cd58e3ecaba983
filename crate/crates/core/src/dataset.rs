//! Dataset and language identifiers.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the seven MMM sub-dataset kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DatasetId {
    #[serde(rename = "SCNM")]
    Scnm,
    #[serde(rename = "SCPOS-RW")]
    ScposRw,
    #[serde(rename = "SCPOS-AdjN")]
    ScposAdjN,
    #[serde(rename = "SCPOS-Adj")]
    ScposAdj,
    #[serde(rename = "SCPOS-N")]
    ScposN,
    #[serde(rename = "TCREE")]
    Tcree,
    #[serde(rename = "TCONER")]
    Tconer,
}

impl DatasetId {
    pub const ALL: [DatasetId; 7] = [
        DatasetId::Scnm,
        DatasetId::ScposRw,
        DatasetId::ScposAdjN,
        DatasetId::ScposAdj,
        DatasetId::ScposN,
        DatasetId::Tcree,
        DatasetId::Tconer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Scnm => "SCNM",
            DatasetId::ScposRw => "SCPOS-RW",
            DatasetId::ScposAdjN => "SCPOS-AdjN",
            DatasetId::ScposAdj => "SCPOS-Adj",
            DatasetId::ScposN => "SCPOS-N",
            DatasetId::Tcree => "TCREE",
            DatasetId::Tconer => "TCONER",
        }
    }

    /// Task word used when a sample does not carry its own.
    pub fn default_task_word(self) -> &'static str {
        match self {
            DatasetId::Scnm | DatasetId::Tconer => "NER",
            DatasetId::ScposRw => "RW",
            DatasetId::ScposAdjN => "AdjN",
            DatasetId::ScposAdj => "Adj",
            DatasetId::ScposN => "N",
            DatasetId::Tcree => "TCREE",
        }
    }

    /// TCREE outputs carry an opaque relation/event tail instead of pairs.
    pub fn is_tcree(self) -> bool {
        matches!(self, DatasetId::Tcree)
    }

    /// Language the dataset was originally built in.
    pub fn source_language(self) -> Language {
        match self {
            DatasetId::Tconer => Language::En,
            _ => Language::Ja,
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownIdentifier {
    pub kind: &'static str,
    pub value: alloc::string::String,
}

impl FromStr for DatasetId {
    type Err = UnknownIdentifier;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DatasetId::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| UnknownIdentifier {
                kind: "dataset",
                value: s.into(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Ja,
    En,
    Zh,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::Ja, Language::En, Language::Zh];

    pub fn as_str(self) -> &'static str {
        match self {
            Language::Ja => "ja",
            Language::En => "en",
            Language::Zh => "zh",
        }
    }

    /// English name, used inside prompts.
    pub fn name(self) -> &'static str {
        match self {
            Language::Ja => "Japanese",
            Language::En => "English",
            Language::Zh => "Chinese",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = UnknownIdentifier;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Language::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| UnknownIdentifier {
                kind: "language",
                value: s.into(),
            })
    }
}

/// Source and target language of a translation direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LanguagePair {
    pub source: Language,
    pub target: Language,
}

impl LanguagePair {
    pub fn new(source: Language, target: Language) -> Self {
        LanguagePair { source, target }
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.source, self.target)
    }
}
