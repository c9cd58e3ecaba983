//! Rule-based filtering of translated candidates.
//!
//! Three rules run in a fixed order: residual source script, entity
//! grounding, and format conformance. Every rule is evaluated and recorded
//! on the record; the first failing one is charged for the rejection in
//! [`RetentionStats`].

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetId, Language, LanguagePair};
use crate::format::{validate_sample, Sample};
use crate::record::{RecordStatus, TranslationRecord};
use crate::script::{forbidden_classes, is_unspaced_script, ScriptClass};
use crate::table::TextTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterRule {
    ResidualScript,
    EntityGrounding,
    Format,
}

impl FilterRule {
    pub const ORDER: [FilterRule; 3] = [
        FilterRule::ResidualScript,
        FilterRule::EntityGrounding,
        FilterRule::Format,
    ];

    pub fn id(self) -> &'static str {
        match self {
            FilterRule::ResidualScript => "residual-script",
            FilterRule::EntityGrounding => "entity-grounding",
            FilterRule::Format => "format",
        }
    }
}

impl fmt::Display for FilterRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub rule: FilterRule,
    pub passed: bool,
    /// Offending character, entity or violation; empty on pass.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
    /// Where the offending value sits, e.g. `text@12`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl FilterVerdict {
    pub fn pass(rule: FilterRule) -> Self {
        FilterVerdict {
            rule,
            passed: true,
            detail: String::new(),
            location: None,
        }
    }

    pub fn fail(rule: FilterRule, detail: impl Into<String>, location: Option<String>) -> Self {
        let detail = detail.into();
        debug_assert!(!detail.is_empty());
        FilterVerdict {
            rule,
            passed: false,
            detail,
            location,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FilterError {
    #[error("residual-script filter does not support {0}")]
    UnsupportedPair(LanguagePair),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Skip grounding for TCREE, whose slots need not appear verbatim.
    pub tcree_grounding_exempt: bool,
    /// Require entity matches to sit on word boundaries.
    pub token_boundary: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            tcree_grounding_exempt: true,
            token_boundary: false,
        }
    }
}

/// Named fields of a candidate in scan order: text, text label, then each
/// pair's label and entity.
fn candidate_fields(c: &Sample) -> Vec<(String, &str)> {
    let mut fields = alloc::vec![
        ("text".to_string(), c.text.as_str()),
        ("text_label".to_string(), c.text_label.as_str())
    ];
    for (i, p) in c.pairs.iter().enumerate() {
        fields.push((alloc::format!("pairs[{i}].label"), p.label.as_str()));
        fields.push((alloc::format!("pairs[{i}].entity"), p.entity.as_str()));
    }
    fields
}

/// Fails on the first character from a script the direction forbids. The
/// detail is the character; the location is `field@char_offset`.
pub fn detect_residual_script<'a, I>(fields: I, pair: LanguagePair) -> Result<FilterVerdict, FilterError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let forbidden = forbidden_classes(pair).ok_or(FilterError::UnsupportedPair(pair))?;
    for (name, value) in fields {
        for (offset, c) in value.chars().enumerate() {
            if ScriptClass::of(c).is_some_and(|class| forbidden.contains(&class)) {
                return Ok(FilterVerdict::fail(
                    FilterRule::ResidualScript,
                    c.to_string(),
                    Some(alloc::format!("{name}@{offset}")),
                ));
            }
        }
    }
    Ok(FilterVerdict::pass(FilterRule::ResidualScript))
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() && !is_unspaced_script(c)
}

fn grounded(text: &str, entity: &str, token_boundary: bool) -> bool {
    if !token_boundary {
        return text.contains(entity);
    }
    text.match_indices(entity).any(|(at, _)| {
        let before = text[..at].chars().next_back();
        let after = text[at + entity.len()..].chars().next();
        let first = entity.chars().next();
        let last = entity.chars().next_back();
        let left_ok = !(before.is_some_and(is_word_char) && first.is_some_and(is_word_char));
        let right_ok = !(after.is_some_and(is_word_char) && last.is_some_and(is_word_char));
        left_ok && right_ok
    })
}

/// Fails on the first entity that is not an exact, case-sensitive
/// substring of the candidate text.
pub fn check_entity_grounding(candidate: &Sample, config: &FilterConfig) -> FilterVerdict {
    if config.tcree_grounding_exempt && candidate.dataset.is_tcree() {
        return FilterVerdict::pass(FilterRule::EntityGrounding);
    }
    for (i, p) in candidate.pairs.iter().enumerate() {
        if p.entity.is_empty() {
            // an empty entity is a format problem, not a grounding one
            continue;
        }
        if !grounded(&candidate.text, &p.entity, config.token_boundary) {
            return FilterVerdict::fail(
                FilterRule::EntityGrounding,
                p.entity.clone(),
                Some(alloc::format!("pairs[{i}].entity")),
            );
        }
    }
    FilterVerdict::pass(FilterRule::EntityGrounding)
}

/// Fails when the candidate breaks any sample invariant other than
/// grounding.
pub fn check_format(candidate: &Sample) -> FilterVerdict {
    match validate_sample(candidate, false).into_iter().next() {
        None => FilterVerdict::pass(FilterRule::Format),
        Some(v) => FilterVerdict::fail(FilterRule::Format, v.rule.id(), Some(v.field)),
    }
}

/// All three verdicts for a candidate, in rule order.
pub fn evaluate_candidate(
    candidate: &Sample,
    source_language: Language,
    config: &FilterConfig,
) -> Result<Vec<FilterVerdict>, FilterError> {
    let pair = LanguagePair::new(source_language, candidate.language);
    let fields = candidate_fields(candidate);
    let script = detect_residual_script(fields.iter().map(|(n, v)| (n.as_str(), *v)), pair)?;
    Ok(alloc::vec![
        script,
        check_entity_grounding(candidate, config),
        check_format(candidate),
    ])
}

/// How one record left the filter stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Accepted,
    ParseFailed,
    Rejected(FilterRule),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub input: u64,
    pub parse_failed: u64,
    pub residual_script: u64,
    pub entity_grounding: u64,
    pub format: u64,
    pub accepted: u64,
}

impl RetentionRow {
    fn record(&mut self, outcome: Outcome) {
        self.input += 1;
        match outcome {
            Outcome::Accepted => self.accepted += 1,
            Outcome::ParseFailed => self.parse_failed += 1,
            Outcome::Rejected(FilterRule::ResidualScript) => self.residual_script += 1,
            Outcome::Rejected(FilterRule::EntityGrounding) => self.entity_grounding += 1,
            Outcome::Rejected(FilterRule::Format) => self.format += 1,
        }
    }

    pub fn rejected(&self) -> u64 {
        self.residual_script + self.entity_grounding + self.format
    }

    pub fn is_balanced(&self) -> bool {
        self.input == self.accepted + self.parse_failed + self.rejected()
    }
}

/// Retention counts per (dataset, target language).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RetentionStats {
    pub rows: BTreeMap<(DatasetId, Language), RetentionRow>,
}

impl RetentionStats {
    pub fn record(&mut self, dataset: DatasetId, language: Language, outcome: Outcome) {
        self.rows.entry((dataset, language)).or_default().record(outcome);
    }

    pub fn total(&self) -> RetentionRow {
        self.rows.values().fold(RetentionRow::default(), |mut acc, r| {
            acc.input += r.input;
            acc.parse_failed += r.parse_failed;
            acc.residual_script += r.residual_script;
            acc.entity_grounding += r.entity_grounding;
            acc.format += r.format;
            acc.accepted += r.accepted;
            acc
        })
    }

    pub fn is_balanced(&self) -> bool {
        self.rows.values().all(RetentionRow::is_balanced)
    }

    /// Aligned table, one row per cell.
    pub fn render_table(&self) -> String {
        let mut t = TextTable::new(&[
            "dataset",
            "language",
            "input",
            "parse-failed",
            "residual-script",
            "entity-grounding",
            "format",
            "accepted",
        ]);
        for ((d, l), r) in &self.rows {
            t.row(alloc::vec![
                d.to_string(),
                l.to_string(),
                r.input.to_string(),
                r.parse_failed.to_string(),
                r.residual_script.to_string(),
                r.entity_grounding.to_string(),
                r.format.to_string(),
                r.accepted.to_string(),
            ]);
        }
        t.render()
    }

    /// Accepted counts laid out dataset by language.
    pub fn render_pivot(&self) -> String {
        let mut t = TextTable::new(&["dataset", "ja", "en", "zh"]);
        let datasets: alloc::collections::BTreeSet<_> = self.rows.keys().map(|(d, _)| *d).collect();
        for d in datasets {
            let mut cells = alloc::vec![d.to_string()];
            for l in Language::ALL {
                cells.push(match self.rows.get(&(d, l)) {
                    Some(r) => r.accepted.to_string(),
                    None => "-".to_string(),
                });
            }
            t.row(cells);
        }
        t.render()
    }

    /// Tab-separated machine-readable rows with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "dataset\tlanguage\tinput\tparse_failed\tresidual_script\tentity_grounding\tformat\taccepted\n",
        );
        for ((d, l), r) in &self.rows {
            let _ = writeln!(
                out,
                "{d}\t{l}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.input, r.parse_failed, r.residual_script, r.entity_grounding, r.format, r.accepted
            );
        }
        out
    }
}

/// Accepted and rejected partitions of a filter run.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub accepted: Vec<TranslationRecord>,
    pub rejected: Vec<TranslationRecord>,
    pub stats: RetentionStats,
}

/// Classifies one record, replacing its verdicts. Records without a
/// candidate keep their parse-failure verdict.
pub fn filter_record(record: &mut TranslationRecord, config: &FilterConfig) -> Result<Outcome, FilterError> {
    let outcome = match &record.candidate {
        None => {
            record.verdicts.retain(|v| v.rule == FilterRule::Format && !v.passed);
            if record.verdicts.is_empty() {
                record
                    .verdicts
                    .push(FilterVerdict::fail(FilterRule::Format, "no candidate", None));
            }
            Outcome::ParseFailed
        }
        Some(candidate) => {
            record.verdicts = evaluate_candidate(candidate, record.source.language, config)?;
            match record.verdicts.iter().find(|v| !v.passed) {
                Some(v) => Outcome::Rejected(v.rule),
                None => Outcome::Accepted,
            }
        }
    };
    record.status = match outcome {
        Outcome::Accepted => RecordStatus::PendingReview,
        _ => RecordStatus::Rejected,
    };
    Ok(outcome)
}

/// Runs the filter chain over freshly translated records.
pub fn run_filters(records: Vec<TranslationRecord>, config: &FilterConfig) -> Result<FilterOutcome, FilterError> {
    let mut out = FilterOutcome::default();
    for mut record in records {
        let outcome = filter_record(&mut record, config)?;
        out.stats.record(record.source.dataset, record.target_language, outcome);
        match outcome {
            Outcome::Accepted => out.accepted.push(record),
            _ => out.rejected.push(record),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::{LabelEntityPair, TaskWord};
    use alloc::vec;

    fn candidate(text: &str, pairs: &[(&str, &str)]) -> Sample {
        Sample {
            id: "c".into(),
            dataset: DatasetId::Scnm,
            language: Language::En,
            text: text.into(),
            task_word: TaskWord::new("NER").unwrap(),
            text_label: "positive".into(),
            pairs: pairs.iter().map(|(l, e)| LabelEntityPair::new(*l, *e)).collect(),
            meta: Default::default(),
        }
    }

    const JA_EN: LanguagePair = LanguagePair {
        source: Language::Ja,
        target: Language::En,
    };

    #[test]
    fn residual_katakana_is_reported() {
        let v = detect_residual_script([("text_label", "ポジティブ")], JA_EN).unwrap();
        assert!(!v.passed);
        assert_eq!(v.detail, "ポ");
        assert_eq!(v.location.as_deref(), Some("text_label@0"));

        let v = detect_residual_script([("text", "The weather is nice.")], JA_EN).unwrap();
        assert!(v.passed);
    }

    #[test]
    fn ideographs_pass_into_chinese() {
        let pair = LanguagePair::new(Language::Ja, Language::Zh);
        let v = detect_residual_script([("text", "山田住在东京。")], pair).unwrap();
        assert!(v.passed);
        let v = detect_residual_script([("text", "山田住在东京です")], pair).unwrap();
        assert_eq!(v.detail, "で");
        assert_eq!(v.location.as_deref(), Some("text@6"));
        let v = detect_residual_script([("text", "山田")], JA_EN).unwrap();
        assert!(!v.passed);
    }

    #[test]
    fn unsupported_direction_is_an_error() {
        let pair = LanguagePair::new(Language::Zh, Language::En);
        assert_eq!(
            detect_residual_script([("text", "x")], pair),
            Err(FilterError::UnsupportedPair(pair))
        );
    }

    #[test]
    fn grounding_examples() {
        let config = FilterConfig::default();
        let c = candidate(
            "Giant pandas are mammals, endemic to China.",
            &[("Animal Name", "pandas"), ("Nation", "China")],
        );
        assert!(check_entity_grounding(&c, &config).passed);
        let c = candidate(
            "Giant pandas are mammals, endemic to China.",
            &[("Animal Name", "panda bears")],
        );
        let v = check_entity_grounding(&c, &config);
        assert!(!v.passed);
        assert_eq!(v.detail, "panda bears");
        let c = candidate("Anything.", &[]);
        assert!(check_entity_grounding(&c, &config).passed);
        let c = candidate("Giant pandas.", &[("Animal", "Pandas")]);
        assert!(!check_entity_grounding(&c, &config).passed);
    }

    #[test]
    fn token_boundary_switch() {
        let strict = FilterConfig {
            token_boundary: true,
            ..FilterConfig::default()
        };
        let c = candidate("Giant pandas live here.", &[("Animal", "panda")]);
        assert!(check_entity_grounding(&c, &FilterConfig::default()).passed);
        assert!(!check_entity_grounding(&c, &strict).passed);
        let c = candidate("Giant panda, pandas.", &[("Animal", "panda")]);
        assert!(check_entity_grounding(&c, &strict).passed);
        let mut c = candidate("山田住在东京。", &[("Person", "山田")]);
        c.language = Language::Zh;
        assert!(check_entity_grounding(&c, &strict).passed);
    }

    #[test]
    fn tcree_exemption_is_switchable() {
        let mut c = candidate("Acme bought Beta.", &[("acquisition", "Acme and Beta")]);
        c.dataset = DatasetId::Tcree;
        c.task_word = TaskWord::new("TCREE").unwrap();
        assert!(check_entity_grounding(&c, &FilterConfig::default()).passed);
        let strict = FilterConfig {
            tcree_grounding_exempt: false,
            ..FilterConfig::default()
        };
        assert!(!check_entity_grounding(&c, &strict).passed);
    }

    #[test]
    fn format_examples() {
        assert!(check_format(&candidate("Tokyo.", &[("Location", "Tokyo")])).passed);
        let v = check_format(&candidate("Tokyo.", &[("Location", "")]));
        assert!(!v.passed);
        assert_eq!(v.detail, "pair-entity-empty");
        let v = check_format(&candidate("Tokyo.", &[("Loc;ation", "Tokyo")]));
        assert!(!v.passed);
        assert_eq!(v.detail, "pair-reserved-char");
    }

    #[test]
    fn empty_input_gives_zero_counts() {
        let out = run_filters(vec![], &FilterConfig::default()).unwrap();
        assert!(out.accepted.is_empty() && out.rejected.is_empty());
        assert_eq!(out.stats.total(), RetentionRow::default());
        assert!(out.stats.render_pivot().lines().count() <= 2);
    }
}
