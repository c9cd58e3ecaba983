//! Seeded train/test splits.
//!
//! Default train sizes per (dataset, language) follow the standard MMM
//! configuration; everything beyond the train size goes to test.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetId, Language};
use crate::format::Sample;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("train size {train_size} exceeds the {available} samples of {dataset}/{language}")]
    TooLarge {
        dataset: DatasetId,
        language: Language,
        train_size: usize,
        available: usize,
    },
}

/// Standard train size for a cell: 500, 1000 or 2000.
pub fn default_train_size(dataset: DatasetId, language: Language) -> usize {
    use DatasetId::*;
    use Language::*;
    match (dataset, language) {
        (Tconer, _) => 2000,
        (ScposRw | Tcree, En | Zh) => 500,
        _ => 1000,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    /// Per-cell overrides of the default train size.
    #[serde(default)]
    pub train_sizes: BTreeMap<String, usize>,
    /// Applies to every cell without an explicit override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_train_size: Option<usize>,
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            train_sizes: BTreeMap::new(),
            uniform_train_size: None,
        }
    }

    pub fn cell_key(dataset: DatasetId, language: Language) -> String {
        alloc::format!("{dataset}/{language}")
    }

    pub fn train_size(&self, dataset: DatasetId, language: Language) -> usize {
        self.train_sizes
            .get(&Self::cell_key(dataset, language))
            .copied()
            .or(self.uniform_train_size)
            .unwrap_or_else(|| default_train_size(dataset, language))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Splits one cell. Samples are ordered by id, shuffled with ChaCha8
/// seeded from `seed`, and the first `train_size` go to train. Both halves
/// come back sorted by id, so the result depends only on the sample set
/// and the seed.
pub fn split_cell(mut samples: Vec<Sample>, train_size: usize, seed: u64) -> Result<Split, usize> {
    if train_size > samples.len() {
        return Err(samples.len());
    }
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    samples.shuffle(&mut rng);
    let test = samples.split_off(train_size);
    let mut split = Split { train: samples, test };
    split.train.sort_by(|a, b| a.id.cmp(&b.id));
    split.test.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(split)
}

/// Splits a corpus cell by cell with the sizes from `spec`.
pub fn split_train_test(samples: Vec<Sample>, spec: &SplitSpec) -> Result<Split, SplitError> {
    let mut cells: BTreeMap<(DatasetId, Language), Vec<Sample>> = BTreeMap::new();
    for s in samples {
        cells.entry((s.dataset, s.language)).or_default().push(s);
    }
    let mut out = Split::default();
    for ((dataset, language), cell) in cells {
        let train_size = spec.train_size(dataset, language);
        let split = split_cell(cell, train_size, spec.seed).map_err(|available| SplitError::TooLarge {
            dataset,
            language,
            train_size,
            available,
        })?;
        out.train.extend(split.train);
        out.test.extend(split.test);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::TaskWord;
    use alloc::collections::BTreeSet;

    fn corpus(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| Sample {
                id: alloc::format!("s{i:05}"),
                dataset: DatasetId::Scnm,
                language: Language::Ja,
                text: "テキスト".into(),
                task_word: TaskWord::new("NER").unwrap(),
                text_label: "ポジティブ".into(),
                pairs: Vec::new(),
                meta: Default::default(),
            })
            .collect()
    }

    #[test]
    fn mmm_defaults() {
        let table = [
            (DatasetId::Scnm, [1000, 1000, 1000]),
            (DatasetId::ScposRw, [1000, 500, 500]),
            (DatasetId::ScposAdjN, [1000, 1000, 1000]),
            (DatasetId::ScposAdj, [1000, 1000, 1000]),
            (DatasetId::ScposN, [1000, 1000, 1000]),
            (DatasetId::Tcree, [1000, 500, 500]),
            (DatasetId::Tconer, [2000, 2000, 2000]),
        ];
        for (d, sizes) in table {
            for (l, size) in [Language::Ja, Language::En, Language::Zh].into_iter().zip(sizes) {
                assert_eq!(default_train_size(d, l), size, "{d}/{l}");
            }
        }
    }

    #[test]
    fn train_size_equal_to_corpus_leaves_test_empty() {
        let split = split_cell(corpus(10), 10, 1).unwrap();
        assert_eq!(split.train.len(), 10);
        assert!(split.test.is_empty());
        assert_eq!(split_cell(corpus(3), 4, 1).unwrap_err(), 3);
    }

    #[test]
    fn split_is_a_seeded_partition() {
        let a = split_cell(corpus(50), 20, 7).unwrap();
        let mut shuffled = corpus(50);
        shuffled.reverse();
        let b = split_cell(shuffled, 20, 7).unwrap();
        assert_eq!(a, b);
        let c = split_cell(corpus(50), 20, 8).unwrap();
        assert_ne!(a.train, c.train);
        let train: BTreeSet<_> = a.train.iter().map(|s| s.id.clone()).collect();
        let test: BTreeSet<_> = a.test.iter().map(|s| s.id.clone()).collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len() + test.len(), 50);
    }

    #[test]
    fn overrides_and_errors() {
        let mut spec = SplitSpec::with_seed(0);
        assert!(matches!(
            split_train_test(corpus(5), &spec),
            Err(SplitError::TooLarge {
                train_size: 1000,
                available: 5,
                ..
            })
        ));
        spec.train_sizes
            .insert(SplitSpec::cell_key(DatasetId::Scnm, Language::Ja), 2);
        let split = split_train_test(corpus(5), &spec).unwrap();
        assert_eq!((split.train.len(), split.test.len()), (2, 3));
    }
}
