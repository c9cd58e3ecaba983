//! Translation and annotation runs against the gateway.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use mmm_core::filter::{check_format, FilterRule, FilterVerdict};
use mmm_core::lexicon::{LabelLexicon, LexiconError};
use mmm_core::prompt::{
    build_annotation_prompt, build_translation_prompt, parse_annotation_reply, parse_translation_reply,
    CompletionRequest, DecodingParams, PromptError, Purpose,
};
use mmm_core::{Language, LanguagePair, RecordStatus, Sample, TranslationRecord};

use crate::config::{ConfigError, TemplateSet};
use crate::gateway::{GatewayError, Provider};

pub const DEFAULT_CONCURRENCY: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error("{id}: {source}")]
    Lexicon {
        id: String,
        #[source]
        source: LexiconError,
    },
    #[error("{id}: {source}")]
    Template {
        id: String,
        #[source]
        source: Box<ConfigError>,
    },
    #[error("{id}: {source}")]
    Prompt {
        id: String,
        #[source]
        source: PromptError,
    },
    #[error("{id}: {source}")]
    Gateway {
        id: String,
        #[source]
        source: GatewayError,
    },
    #[error("{id}: {message}")]
    Annotation { id: String, message: String },
}

pub struct Translator<'a> {
    pub lexicon: &'a LabelLexicon,
    pub templates: &'a TemplateSet,
    pub provider: &'a Provider,
    pub model: String,
}

impl Translator<'_> {
    /// Translates one sample. A reply that cannot be parsed still yields a
    /// record, with no candidate and a failing format verdict.
    pub fn translate_sample(&self, source: &Sample, target: Language) -> Result<TranslationRecord, TranslateError> {
        let id = TranslationRecord::make_id(&source.id, target);
        let pair = LanguagePair::new(source.language, target);
        let pre = self
            .lexicon
            .pretranslate(source, target)
            .map_err(|e| TranslateError::Lexicon {
                id: id.clone(),
                source: e,
            })?;
        let template = self
            .templates
            .resolve(Purpose::Translation, source.dataset, pair)
            .map_err(|e| TranslateError::Template {
                id: id.clone(),
                source: Box::new(e),
            })?;
        let prompt = build_translation_prompt(&pre, target, template).map_err(|e| TranslateError::Prompt {
            id: id.clone(),
            source: e,
        })?;
        let request = CompletionRequest::new(prompt, DecodingParams::for_source(&self.model, source_chars(source)));
        let reply = self.provider.complete(&request).map_err(|e| TranslateError::Gateway {
            id: id.clone(),
            source: e,
        })?;
        let (candidate, verdicts) = match parse_translation_reply(&reply.text, &pre, target, &id) {
            Ok(c) => (Some(c), Vec::new()),
            Err(e) => {
                let detail = format!("parse failure: {e}");
                (None, vec![FilterVerdict::fail(FilterRule::Format, detail, None)])
            }
        };
        Ok(TranslationRecord {
            id,
            source: source.clone(),
            target_language: target,
            prompt_id: template.id.clone(),
            model: reply.model,
            raw_reply: reply.text,
            candidate,
            verdicts,
            status: RecordStatus::Pending,
            revision: 0,
            flagged: false,
        })
    }

    /// Every (source, target) combination except identity, in input order.
    pub fn translate_batch(
        &self,
        sources: &[Sample],
        targets: &[Language],
        concurrency: usize,
    ) -> Result<Vec<TranslationRecord>, TranslateError> {
        let jobs: Vec<(&Sample, Language)> = sources
            .iter()
            .flat_map(|s| targets.iter().filter(move |t| **t != s.language).map(move |t| (s, *t)))
            .collect();
        parallel_map(&jobs, concurrency, |(s, t)| self.translate_sample(s, *t))
    }

    fn annotation_reply(&self, sample: &Sample) -> Result<(String, String, String), TranslateError> {
        let id = sample.id.clone();
        let pair = LanguagePair::new(sample.language, sample.language);
        let template = self
            .templates
            .resolve(Purpose::Annotation, sample.dataset, pair)
            .map_err(|e| TranslateError::Template {
                id: id.clone(),
                source: Box::new(e),
            })?;
        let prompt =
            build_annotation_prompt(&sample.text, &sample.pairs, template).map_err(|e| TranslateError::Prompt {
                id: id.clone(),
                source: e,
            })?;
        let request = CompletionRequest::new(
            prompt,
            DecodingParams::for_source(&self.model, sample.text.chars().count()),
        );
        let reply = self
            .provider
            .complete(&request)
            .map_err(|e| TranslateError::Gateway { id, source: e })?;
        Ok((template.id.clone(), reply.model, reply.text))
    }

    /// Asks the model for a text-level label of an open-domain sample.
    pub fn annotate_text_label(&self, sample: &Sample) -> Result<String, TranslateError> {
        let (_, _, reply) = self.annotation_reply(sample)?;
        parse_annotation_reply(&reply).map_err(|e| TranslateError::Annotation {
            id: sample.id.clone(),
            message: e.to_string(),
        })
    }

    /// Annotation as a review record: the candidate is the sample with the
    /// model's label. Unusable replies give a rejected record without a
    /// candidate, keeping the raw reply.
    pub fn annotate_record(&self, sample: &Sample) -> Result<TranslationRecord, TranslateError> {
        let (prompt_id, model, raw_reply) = self.annotation_reply(sample)?;
        let mut candidate = None;
        let verdict = match parse_annotation_reply(&raw_reply) {
            Err(e) => FilterVerdict::fail(FilterRule::Format, format!("annotation failure: {e}"), None),
            Ok(label) => {
                let mut annotated = Sample {
                    id: TranslationRecord::make_id(&sample.id, sample.language),
                    text_label: label,
                    ..sample.clone()
                };
                annotated.normalize_nfc();
                let verdict = check_format(&annotated);
                candidate = Some(annotated);
                verdict
            }
        };
        let status = if verdict.passed {
            RecordStatus::PendingReview
        } else {
            RecordStatus::Rejected
        };
        Ok(TranslationRecord {
            id: TranslationRecord::make_id(&sample.id, sample.language),
            source: sample.clone(),
            target_language: sample.language,
            prompt_id,
            model,
            raw_reply,
            candidate,
            verdicts: vec![verdict],
            status,
            revision: 0,
            flagged: false,
        })
    }

    pub fn annotate_batch(
        &self,
        samples: &[Sample],
        concurrency: usize,
    ) -> Result<Vec<TranslationRecord>, TranslateError> {
        parallel_map(samples, concurrency, |s| self.annotate_record(s))
    }
}

fn source_chars(sample: &Sample) -> usize {
    let output = sample.output_line().unwrap_or_default();
    sample.text.chars().count() + output.chars().count()
}

/// Applies `f` to every item on at most `workers` threads, keeping input
/// order. Stops handing out work after the first error and returns the
/// error of the lowest failing index.
pub fn parallel_map<T, R, E, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<R, E>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..workers.clamp(1, items.len().max(1)) {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let result = f(item);
                if result.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(result);
            });
        }
    });
    let slots = slots.into_inner().unwrap_or_else(|p| p.into_inner());
    let mut out = Vec::with_capacity(items.len());
    for slot in slots {
        match slot {
            Some(Ok(r)) => out.push(r),
            Some(Err(e)) => return Err(e),
            None => unreachable!("unfilled slot without an earlier error"),
        }
    }
    Ok(out)
}
