//! Core data model and algorithms for multilingual MRE mix (MMM) datasets.
//!
//! Everything in this crate is pure and allocation-only: the sample format
//! and its output decoder, the rule-based label lexicon,
//! prompt rendering for the translation stage, the residual-script and
//! grounding filters, TL/WL/ALL scoring, seeded splits and corpus
//! statistics. File formats, HTTP and the CLI live in `mmm-pipeline`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod eval;
pub mod filter;
pub mod format;
pub mod lexicon;
pub mod prompt;
pub mod record;
pub mod review;
pub mod script;
pub mod split;
pub mod stats;
mod table;

pub use dataset::{DatasetId, Language, LanguagePair};
pub use format::{
    build_input, parse_input, parse_output, serialize_output, validate_sample, FormatError, LabelEntityPair, PairTuple,
    ParsedOutput, Sample, TaskWord, Violation,
};
pub use record::{RecordStatus, TranslationRecord};
