//! Corpus statistics per (dataset, language) cell.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetId, Language};
use crate::format::Sample;
use crate::table::TextTable;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub samples: u64,
    pub pairs: u64,
    pub mean_pairs: f64,
    /// Distinct text-level labels.
    pub text_labels: u64,
    /// Distinct word-level labels.
    pub word_labels: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStats {
    pub cells: BTreeMap<(DatasetId, Language), CellStats>,
}

pub fn compute_stats<'a, I>(samples: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a Sample>,
{
    #[derive(Default)]
    struct Acc<'a> {
        samples: u64,
        pairs: u64,
        text_labels: BTreeSet<&'a str>,
        word_labels: BTreeSet<&'a str>,
    }
    let mut acc: BTreeMap<(DatasetId, Language), Acc<'a>> = BTreeMap::new();
    for s in samples {
        let a = acc.entry((s.dataset, s.language)).or_default();
        a.samples += 1;
        a.pairs += s.pairs.len() as u64;
        a.text_labels.insert(&s.text_label);
        a.word_labels.extend(s.pairs.iter().map(|p| p.label.as_str()));
    }
    let cells = acc
        .into_iter()
        .map(|(k, a)| {
            let cell = CellStats {
                samples: a.samples,
                pairs: a.pairs,
                mean_pairs: a.pairs as f64 / a.samples as f64,
                text_labels: a.text_labels.len() as u64,
                word_labels: a.word_labels.len() as u64,
            };
            (k, cell)
        })
        .collect();
    CorpusStats { cells }
}

impl CorpusStats {
    pub fn render_table(&self) -> String {
        let mut t = TextTable::new(&[
            "dataset",
            "language",
            "samples",
            "pairs",
            "mean-pairs",
            "text-labels",
            "word-labels",
        ]);
        for ((d, l), c) in &self.cells {
            let mut mean = String::new();
            let _ = write!(mean, "{:.2}", c.mean_pairs);
            t.row(alloc::vec![
                d.to_string(),
                l.to_string(),
                c.samples.to_string(),
                c.pairs.to_string(),
                mean,
                c.text_labels.to_string(),
                c.word_labels.to_string(),
            ]);
        }
        t.render()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("dataset\tlanguage\tsamples\tpairs\tmean_pairs\ttext_labels\tword_labels\n");
        for ((d, l), c) in &self.cells {
            let _ = writeln!(
                out,
                "{d}\t{l}\t{}\t{}\t{}\t{}\t{}",
                c.samples, c.pairs, c.mean_pairs, c.text_labels, c.word_labels
            );
        }
        out
    }
}
