//! Translation records and their lifecycle.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Language;
use crate::filter::FilterVerdict;
use crate::format::Sample;

/// Lifecycle of a record: `pending` after translation, then either
/// `rejected` by the filters or `pending-review`, from which a reviewer
/// moves it to `accepted`, `edited` or `rejected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Pending,
    PendingReview,
    Accepted,
    Edited,
    Rejected,
}

impl RecordStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordStatus::Pending => "pending",
            RecordStatus::PendingReview => "pending-review",
            RecordStatus::Accepted => "accepted",
            RecordStatus::Edited => "edited",
            RecordStatus::Rejected => "rejected",
        }
    }

    pub fn is_final(self) -> bool {
        matches!(
            self,
            RecordStatus::Accepted | RecordStatus::Edited | RecordStatus::Rejected
        )
    }

    pub fn can_become(self, next: RecordStatus) -> bool {
        use RecordStatus::*;
        matches!(
            (self, next),
            (Pending, PendingReview | Rejected) | (PendingReview, PendingReview | Accepted | Edited | Rejected)
        )
    }
}

impl fmt::Display for RecordStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for RecordStatus {
    type Err = crate::dataset::UnknownIdentifier;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        use RecordStatus::*;
        [Pending, PendingReview, Accepted, Edited, Rejected]
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| crate::dataset::UnknownIdentifier {
                kind: "status",
                value: s.into(),
            })
    }
}

/// A source sample, its translation attempt and everything decided since.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub id: String,
    pub source: Sample,
    pub target_language: Language,
    pub prompt_id: String,
    pub model: String,
    /// Model reply exactly as received, kept even when unparseable.
    pub raw_reply: String,
    pub candidate: Option<Sample>,
    #[serde(default)]
    pub verdicts: Vec<FilterVerdict>,
    pub status: RecordStatus,
    #[serde(default)]
    pub revision: u64,
    /// An edit failed a filter rule and needs another look.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub flagged: bool,
}

impl TranslationRecord {
    /// Identifier shared by a record and its candidate sample.
    pub fn make_id(source_id: &str, target: Language) -> String {
        alloc::format!("{source_id}-{target}")
    }
}
