//! TL / WL / ALL scoring of generated outputs against gold samples.
//!
//! Each generation is decoded with [`parse_output`] using the gold task
//! word. Text level compares the stripped labels. Word level treats the
//! label-entity tuples as a set and counts the intersection with the gold
//! set; corpus precision and recall are micro-averaged over those counts.
//! ALL is the fraction of samples where both levels are exactly right.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetId, Language};
use crate::format::{parse_output, strip, Sample};
use crate::table::TextTable;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleScore {
    pub tl_correct: bool,
    pub wl_intersection: usize,
    pub wl_generated: usize,
    pub wl_gold: usize,
    pub all_correct: bool,
}

/// Scores one generation against its gold sample. Never fails: output
/// without the task word parses to an empty label and no pairs.
pub fn score_sample(gold: &Sample, generated: &str, tcree_mode: bool) -> SampleScore {
    let parsed = parse_output(generated, &gold.task_word, tcree_mode);
    let tl_correct = strip(&parsed.text_label) == strip(&gold.text_label);
    let generated_items = parsed.items();
    let gold_items = gold.gold_items(tcree_mode);
    let wl_intersection = generated_items.intersection(&gold_items).count();
    SampleScore {
        tl_correct,
        wl_intersection,
        wl_generated: generated_items.len(),
        wl_gold: gold_items.len(),
        all_correct: tl_correct && generated_items == gold_items,
    }
}

/// Precision, recall and F1, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Zero when a denominator is zero.
    pub fn from_counts(intersection: u64, generated: u64, gold: u64) -> Self {
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        Prf::from_pr(ratio(intersection, generated), ratio(intersection, gold))
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: u64,
    pub tl: Prf,
    pub wl: Prf,
    pub all: f64,
    pub wl_intersection: u64,
    pub wl_generated: u64,
    pub wl_gold: u64,
}

/// Folds sample scores into corpus metrics; `None` for an empty slice.
pub fn aggregate(scores: &[SampleScore]) -> Option<Metrics> {
    if scores.is_empty() {
        return None;
    }
    let n = scores.len() as u64;
    let tl_hits = scores.iter().filter(|s| s.tl_correct).count() as u64;
    let all_hits = scores.iter().filter(|s| s.all_correct).count() as u64;
    let sum = |f: fn(&SampleScore) -> usize| scores.iter().map(|s| f(s) as u64).sum::<u64>();
    let (inter, generated, gold) = (sum(|s| s.wl_intersection), sum(|s| s.wl_generated), sum(|s| s.wl_gold));
    let tl = tl_hits as f64 / n as f64;
    Some(Metrics {
        samples: n,
        tl: Prf::from_pr(tl, tl),
        wl: Prf::from_counts(inter, generated, gold),
        all: all_hits as f64 / n as f64,
        wl_intersection: inter,
        wl_generated: generated,
        wl_gold: gold,
    })
}

/// Metrics per (dataset, language) cell. Cells with no samples are absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub cells: BTreeMap<(DatasetId, Language), Metrics>,
}

/// Flat, serializable form of one report cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: DatasetId,
    pub language: Language,
    #[serde(flatten)]
    pub metrics: Metrics,
}

impl EvalReport {
    pub fn from_scores<I>(scores: I) -> Self
    where
        I: IntoIterator<Item = (DatasetId, Language, SampleScore)>,
    {
        let mut grouped: BTreeMap<(DatasetId, Language), Vec<SampleScore>> = BTreeMap::new();
        for (d, l, s) in scores {
            grouped.entry((d, l)).or_default().push(s);
        }
        let cells = grouped
            .into_iter()
            .filter_map(|(k, v)| aggregate(&v).map(|m| (k, m)))
            .collect();
        EvalReport { cells }
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        self.cells
            .iter()
            .map(|((d, l), m)| ReportRow {
                dataset: *d,
                language: *l,
                metrics: *m,
            })
            .collect()
    }
}

fn percent(x: f64) -> String {
    let mut s = String::new();
    let _ = write!(s, "{:.2}", x * 100.0);
    s
}

/// TL, WL and ALL columns as percentages with two decimals, one row per
/// cell ordered by dataset then language.
pub fn render_report(report: &EvalReport) -> String {
    let mut t = TextTable::new(&["dataset", "language", "samples", "TL", "WL", "ALL"]);
    for ((d, l), m) in &report.cells {
        t.row(alloc::vec![
            d.to_string(),
            l.to_string(),
            m.samples.to_string(),
            percent(m.tl.f1),
            percent(m.wl.f1),
            percent(m.all),
        ]);
    }
    t.render()
}
