//! Human review decisions over filtered records.
//!
//! Decisions use optimistic concurrency: each carries the revision the
//! reviewer saw, and a mismatch is a conflict rather than a silent
//! overwrite. Edited candidates go back through the filter chain; an edit
//! that fails a rule is stored but stays in review, flagged.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetId, Language};
use crate::filter::{check_format, evaluate_candidate, FilterConfig, FilterError};
use crate::format::Sample;
use crate::record::{RecordStatus, TranslationRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewAction {
    Accept,
    Edit,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub record_id: String,
    pub action: ReviewAction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edited: Option<Sample>,
    pub reviewer: String,
    pub expected_revision: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReviewError {
    #[error("record {0} not found")]
    NotFound(String),
    #[error("revision conflict on {record_id}: expected {expected}, current {current}")]
    Conflict {
        record_id: String,
        expected: u64,
        current: u64,
    },
    #[error("record {record_id} is {status}, not pending review")]
    NotPending { record_id: String, status: RecordStatus },
    #[error("edit decision without an edited sample")]
    MissingEdit,
    #[error("only edit decisions may carry an edited sample")]
    UnexpectedEdit,
    #[error("edited sample is malformed: {0}")]
    InvalidEdit(String),
    #[error("record {0} has failing verdicts; edit or reject it")]
    FailingVerdicts(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// One applied decision, enough to replay the store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    pub decision: ReviewDecision,
    pub status_before: RecordStatus,
    pub status_after: RecordStatus,
    pub revision_after: u64,
    pub flagged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
}

/// Applies `decision` to `record` in place. On error the record is left
/// untouched.
pub fn apply_decision(
    record: &mut TranslationRecord,
    decision: &ReviewDecision,
    config: &FilterConfig,
) -> Result<AuditEntry, ReviewError> {
    if record.status != RecordStatus::PendingReview {
        return Err(ReviewError::NotPending {
            record_id: record.id.clone(),
            status: record.status,
        });
    }
    if record.revision != decision.expected_revision {
        return Err(ReviewError::Conflict {
            record_id: record.id.clone(),
            expected: decision.expected_revision,
            current: record.revision,
        });
    }
    let before = record.status;
    match decision.action {
        ReviewAction::Accept | ReviewAction::Reject if decision.edited.is_some() => {
            return Err(ReviewError::UnexpectedEdit)
        }
        ReviewAction::Accept => {
            if record.flagged || record.verdicts.iter().any(|v| !v.passed) {
                return Err(ReviewError::FailingVerdicts(record.id.clone()));
            }
            record.status = RecordStatus::Accepted;
        }
        ReviewAction::Reject => record.status = RecordStatus::Rejected,
        ReviewAction::Edit => {
            let mut edited = decision.edited.clone().ok_or(ReviewError::MissingEdit)?;
            edited.id = record.id.clone();
            edited.dataset = record.source.dataset;
            edited.language = record.target_language;
            edited.task_word = record.source.task_word.clone();
            edited.normalize_nfc();
            let format = check_format(&edited);
            if !format.passed {
                let at = format.location.unwrap_or_default();
                return Err(ReviewError::InvalidEdit(alloc::format!("{at}: {}", format.detail)));
            }
            let verdicts = evaluate_candidate(&edited, record.source.language, config)?;
            let ok = verdicts.iter().all(|v| v.passed);
            record.candidate = Some(edited);
            record.verdicts = verdicts;
            record.flagged = !ok;
            record.status = if ok {
                RecordStatus::Edited
            } else {
                RecordStatus::PendingReview
            };
        }
    }
    record.revision += 1;
    Ok(AuditEntry {
        seq: 0,
        decision: decision.clone(),
        status_before: before,
        status_after: record.status,
        revision_after: record.revision,
        flagged: record.flagged,
        at: None,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFilter {
    #[serde(default)]
    pub status: Option<RecordStatus>,
    #[serde(default)]
    pub dataset: Option<DatasetId>,
    #[serde(default)]
    pub language: Option<Language>,
}

impl RecordFilter {
    pub fn matches(&self, r: &TranslationRecord) -> bool {
        self.status.is_none_or(|s| r.status == s)
            && self.dataset.is_none_or(|d| r.source.dataset == d)
            && self.language.is_none_or(|l| r.target_language == l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page<T> {
    pub items: Vec<T>,
    /// 1-based page number.
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
}

/// Pages through matching records in id order.
pub fn paginate<'a, I>(records: I, filter: &RecordFilter, page: usize, page_size: usize) -> Page<TranslationRecord>
where
    I: IntoIterator<Item = &'a TranslationRecord>,
{
    let mut matching: Vec<&TranslationRecord> = records.into_iter().filter(|r| filter.matches(r)).collect();
    matching.sort_by(|a, b| a.id.cmp(&b.id));
    let page = page.max(1);
    let page_size = page_size.max(1);
    let items = matching
        .iter()
        .skip((page - 1).saturating_mul(page_size))
        .take(page_size)
        .map(|r| (*r).clone())
        .collect();
    Page {
        items,
        page,
        page_size,
        total: matching.len(),
    }
}
