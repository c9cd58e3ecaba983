//! JSONL persistence for samples and translation records, and split
//! manifests.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use mmm_core::split::{Split, SplitSpec};
use mmm_core::{Sample, TranslationRecord};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: duplicate id {id:?}")]
    DuplicateId { path: PathBuf, line: usize, id: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads JSONL values, skipping blank lines. `id_of` feeds the duplicate
/// check.
pub fn read_jsonl<T, F>(path: &Path, id_of: F) -> Result<Vec<T>, CorpusError>
where
    T: DeserializeOwned,
    F: Fn(&T) -> &str,
{
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T = serde_json::from_str(&line).map_err(|source| CorpusError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?;
        if !seen.insert(id_of(&value).to_owned()) {
            return Err(CorpusError::DuplicateId {
                path: path.to_path_buf(),
                line: i + 1,
                id: id_of(&value).to_owned(),
            });
        }
        out.push(value);
    }
    Ok(out)
}

/// Renders values as JSONL, one per line.
pub fn to_jsonl<'a, T: Serialize + 'a>(values: impl IntoIterator<Item = &'a T>) -> String {
    let mut out = String::new();
    for v in values {
        out.push_str(&serde_json::to_string(v).expect("values serialize"));
        out.push('\n');
    }
    out
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CorpusError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(path))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Reads a sample corpus. Text fields are NFC-normalized on the way in.
pub fn read_corpus(path: &Path) -> Result<Vec<Sample>, CorpusError> {
    let mut samples: Vec<Sample> = read_jsonl(path, |s: &Sample| &s.id)?;
    samples.iter_mut().for_each(Sample::normalize_nfc);
    Ok(samples)
}

pub fn write_corpus(samples: &[Sample], path: &Path) -> Result<(), CorpusError> {
    write_atomic(path, to_jsonl(samples).as_bytes())
}

pub fn read_records(path: &Path) -> Result<Vec<TranslationRecord>, CorpusError> {
    read_jsonl(path, |r: &TranslationRecord| &r.id)
}

pub fn write_records(records: &[TranslationRecord], path: &Path) -> Result<(), CorpusError> {
    write_atomic(path, to_jsonl(records).as_bytes())
}

/// Reproducibility record of a split: its settings and the ids on each side
/// per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub spec: SplitSpec,
    pub cells: BTreeMap<String, CellManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellManifest {
    pub train_size: usize,
    pub test_size: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitManifest {
    pub fn new(spec: &SplitSpec, split: &Split) -> Self {
        let mut cells: BTreeMap<String, CellManifest> = BTreeMap::new();
        let sides = [(&split.train, true), (&split.test, false)];
        for (samples, is_train) in sides {
            for s in samples {
                let cell = cells
                    .entry(SplitSpec::cell_key(s.dataset, s.language))
                    .or_insert_with(|| CellManifest {
                        train_size: 0,
                        test_size: 0,
                        train: Vec::new(),
                        test: Vec::new(),
                    });
                if is_train {
                    cell.train.push(s.id.clone());
                    cell.train_size += 1;
                } else {
                    cell.test.push(s.id.clone());
                    cell.test_size += 1;
                }
            }
        }
        SplitManifest {
            spec: spec.clone(),
            cells,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CorpusError> {
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        write_atomic(path, json.as_bytes())
    }
}
