//! Rule-based label translation.
//!
//! Label sets are closed per sub-dataset, so labels are translated by table
//! lookup before any text reaches the model. The table is plain data: one
//! tab-separated row per mapping (columns aligned here for reading),
//!
//! ```text
//! # dataset  src_lang  tgt_lang  src_label  tgt_label
//! SCNM       ja        en        ポジティブ  positive
//! ```
//!
//! and loading checks it for totality against the bundled [`Registry`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::dataset::{DatasetId, Language, LanguagePair};
use crate::format::{strip, Sample};

/// Label registries shipped with the crate.
pub const BUNDLED_REGISTRIES: &str = include_str!("../data/registries.tsv");
/// Default lexicon shipped with the crate.
pub const BUNDLED_LEXICON: &str = include_str!("../data/lexicon.tsv");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LexiconError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: {key} maps to both {first:?} and {second:?}")]
    Conflict {
        line: usize,
        key: LexiconKey,
        first: String,
        second: String,
    },
    #[error("lexicon does not cover {} label(s): {}", .0.len(), join_keys(.0))]
    Uncovered(Vec<LexiconKey>),
    #[error("no lexicon entry for {0}")]
    UnknownLabel(LexiconKey),
    #[error("dataset {dataset} has no closed label set for {pair}")]
    UnsupportedPair { dataset: DatasetId, pair: LanguagePair },
}

fn join_keys(keys: &[LexiconKey]) -> String {
    keys.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LexiconKey {
    pub dataset: DatasetId,
    pub pair: LanguagePair,
    pub label: String,
}

impl fmt::Display for LexiconKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {:?}", self.dataset, self.pair, self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LabelLevel {
    Text,
    Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Inventory {
    Closed {
        language: Language,
        labels: BTreeMap<String, BTreeSet<LabelLevel>>,
    },
    Open {
        language: Language,
    },
}

/// Per-dataset label inventories in each dataset's source language.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Registry {
    datasets: BTreeMap<DatasetId, Inventory>,
}

fn rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split('\t').collect()))
        }
    })
}

fn malformed(line: usize, reason: impl Into<String>) -> LexiconError {
    LexiconError::Malformed {
        line,
        reason: reason.into(),
    }
}

impl Registry {
    pub fn bundled() -> Self {
        Registry::parse(BUNDLED_REGISTRIES).expect("bundled registry is well-formed")
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut datasets: BTreeMap<DatasetId, Inventory> = BTreeMap::new();
        for (line, cols) in rows(text) {
            let dataset: DatasetId = cols[0].parse().map_err(|e| malformed(line, alloc::format!("{e}")))?;
            let language: Language = cols
                .get(1)
                .ok_or_else(|| malformed(line, "missing language"))?
                .parse()
                .map_err(|e| malformed(line, alloc::format!("{e}")))?;
            let level = match cols.get(2).copied() {
                Some("text") => LabelLevel::Text,
                Some("word") => LabelLevel::Word,
                Some("open") => {
                    if cols.len() != 3 {
                        return Err(malformed(line, "open inventories take no label"));
                    }
                    if datasets.insert(dataset, Inventory::Open { language }).is_some() {
                        return Err(malformed(line, "open dataset also has closed labels"));
                    }
                    continue;
                }
                other => return Err(malformed(line, alloc::format!("bad level {other:?}"))),
            };
            let label = match cols.as_slice() {
                [_, _, _, label] if !strip(label).is_empty() => strip(label).to_string(),
                _ => return Err(malformed(line, "expected 4 columns")),
            };
            let entry = datasets.entry(dataset).or_insert_with(|| Inventory::Closed {
                language,
                labels: BTreeMap::new(),
            });
            match entry {
                Inventory::Closed { language: l, labels } if *l == language => {
                    labels.entry(label).or_default().insert(level);
                }
                _ => return Err(malformed(line, "conflicting inventory declaration")),
            }
        }
        Ok(Registry { datasets })
    }

    pub fn is_open_domain(&self, dataset: DatasetId) -> bool {
        matches!(self.datasets.get(&dataset), Some(Inventory::Open { .. }))
    }

    pub fn source_language(&self, dataset: DatasetId) -> Option<Language> {
        match self.datasets.get(&dataset)? {
            Inventory::Closed { language, .. } | Inventory::Open { language } => Some(*language),
        }
    }

    /// Registered labels of a closed dataset, empty for open ones.
    pub fn labels(&self, dataset: DatasetId) -> impl Iterator<Item = &str> {
        let labels = match self.datasets.get(&dataset) {
            Some(Inventory::Closed { labels, .. }) => Some(labels.keys().map(String::as_str)),
            _ => None,
        };
        labels.into_iter().flatten()
    }

    pub fn datasets(&self) -> impl Iterator<Item = DatasetId> + '_ {
        self.datasets.keys().copied()
    }

    /// Every lookup key a lexicon has to cover.
    pub fn required_keys(&self) -> Vec<LexiconKey> {
        let mut keys = Vec::new();
        for (dataset, inventory) in &self.datasets {
            let Inventory::Closed { language, labels } = inventory else {
                continue;
            };
            for target in Language::ALL.into_iter().filter(|t| t != language) {
                for label in labels.keys() {
                    keys.push(LexiconKey {
                        dataset: *dataset,
                        pair: LanguagePair::new(*language, target),
                        label: label.clone(),
                    });
                }
            }
        }
        keys
    }
}

/// Closed-set label maps, immutable once loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelLexicon {
    entries: BTreeMap<LexiconKey, String>,
    registry: Registry,
}

impl LabelLexicon {
    /// The bundled lexicon checked against the bundled registries.
    pub fn bundled() -> Self {
        LabelLexicon::parse(BUNDLED_LEXICON, Registry::bundled()).expect("bundled lexicon is total")
    }

    /// Parses a lexicon table and audits it for totality against `registry`.
    pub fn parse(text: &str, registry: Registry) -> Result<Self, LexiconError> {
        let mut entries: BTreeMap<LexiconKey, (usize, String)> = BTreeMap::new();
        for (line, cols) in rows(text) {
            let [dataset, src, tgt, src_label, tgt_label] = cols.as_slice() else {
                return Err(malformed(
                    line,
                    alloc::format!("expected 5 columns, found {}", cols.len()),
                ));
            };
            let bad = |e: crate::dataset::UnknownIdentifier| malformed(line, alloc::format!("{e}"));
            let key = LexiconKey {
                dataset: dataset.parse().map_err(bad)?,
                pair: LanguagePair::new(src.parse().map_err(bad)?, tgt.parse().map_err(bad)?),
                label: strip(src_label).to_string(),
            };
            let target = strip(tgt_label).to_string();
            if key.label.is_empty() || target.is_empty() {
                return Err(malformed(line, "empty label"));
            }
            if let Some((_, first)) = entries.get(&key) {
                if *first != target {
                    return Err(LexiconError::Conflict {
                        line,
                        key,
                        first: first.clone(),
                        second: target,
                    });
                }
                continue;
            }
            entries.insert(key, (line, target));
        }
        let entries: BTreeMap<_, _> = entries.into_iter().map(|(k, (_, v))| (k, v)).collect();
        let missing: Vec<_> = registry
            .required_keys()
            .into_iter()
            .filter(|k| !entries.contains_key(k))
            .collect();
        if !missing.is_empty() {
            return Err(LexiconError::Uncovered(missing));
        }
        Ok(LabelLexicon { entries, registry })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn is_open_domain(&self, dataset: DatasetId) -> bool {
        self.registry.is_open_domain(dataset)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Deterministic lookup; identity when source and target coincide.
    pub fn translate_label(
        &self,
        dataset: DatasetId,
        source: Language,
        target: Language,
        label: &str,
    ) -> Result<String, LexiconError> {
        let label = strip(label);
        if source == target {
            return Ok(label.to_string());
        }
        let key = LexiconKey {
            dataset,
            pair: LanguagePair::new(source, target),
            label: label.to_string(),
        };
        self.entries.get(&key).cloned().ok_or(LexiconError::UnknownLabel(key))
    }

    /// Copy of `sample` with its text-level and pair labels translated to
    /// `target`; text and entities are untouched. Open-domain datasets have
    /// no closed label set and come back unchanged.
    pub fn pretranslate(&self, sample: &Sample, target: Language) -> Result<Sample, LexiconError> {
        let mut out = sample.clone();
        if self.is_open_domain(sample.dataset) {
            return Ok(out);
        }
        let pair = LanguagePair::new(sample.language, target);
        if sample.language != target && self.registry.source_language(sample.dataset) != Some(sample.language) {
            return Err(LexiconError::UnsupportedPair {
                dataset: sample.dataset,
                pair,
            });
        }
        out.text_label = self.translate_label(sample.dataset, pair.source, target, &sample.text_label)?;
        for p in &mut out.pairs {
            p.label = self.translate_label(sample.dataset, pair.source, target, &p.label)?;
        }
        Ok(out)
    }
}
