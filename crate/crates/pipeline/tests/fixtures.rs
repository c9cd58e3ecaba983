//! Keeps the bundled cassettes in step with the fixture corpora.
//!
//! Set `MMM_REGENERATE_FIXTURES=1` to rewrite `fixtures/cassette.jsonl` and
//! `fixtures/annotate-cassette.jsonl` from `replies.json` and
//! `annotations.json` after changing prompts, templates or the lexicon.

mod common;

use common::{fixture, ReplyTable, MODEL};
use mmm_core::lexicon::LabelLexicon;
use mmm_core::Language;
use mmm_pipeline::config::TemplateSet;
use mmm_pipeline::gateway::{Cassette, Provider, RetryPolicy};
use mmm_pipeline::translate::Translator;

const TARGETS: [Language; 2] = [Language::En, Language::Zh];

fn regenerate() -> bool {
    std::env::var_os("MMM_REGENERATE_FIXTURES").is_some()
}

fn with_translator<R>(provider: Provider, f: impl FnOnce(&Translator) -> R) -> R {
    let (lexicon, templates) = (LabelLexicon::bundled(), TemplateSet::bundled());
    let t = Translator {
        lexicon: &lexicon,
        templates: &templates,
        provider: &provider,
        model: MODEL.into(),
    };
    f(&t)
}

fn recorder(path: &std::path::Path) -> Provider {
    let _ = std::fs::remove_file(path);
    Provider::record(
        Box::new(ReplyTable::load()),
        Cassette::open(path).unwrap(),
        RetryPolicy::default(),
    )
}

#[test]
fn cassette_covers_translation_fixture() {
    let path = fixture("cassette.jsonl");
    let table = ReplyTable::load();
    if regenerate() {
        with_translator(recorder(&path), |t| {
            t.translate_batch(&table.sources, &TARGETS, 1).unwrap()
        });
    }
    let cassette = Cassette::open(&path).unwrap();
    assert_eq!(cassette.len(), table.replies.len());
    let records = with_translator(Provider::replay(cassette), |t| {
        t.translate_batch(&table.sources, &TARGETS, 4).unwrap()
    });
    for r in &records {
        assert_eq!(&r.raw_reply, &table.replies[&r.id], "{}", r.id);
    }
}

#[test]
fn cassette_covers_annotation_fixture() {
    let path = fixture("annotate-cassette.jsonl");
    let table = ReplyTable::load();
    if regenerate() {
        with_translator(recorder(&path), |t| {
            t.annotate_batch(&table.annotate_sources, 1).unwrap()
        });
    }
    let cassette = Cassette::open(&path).unwrap();
    assert_eq!(cassette.len(), table.annotations.len());
    let records = with_translator(Provider::replay(cassette), |t| {
        t.annotate_batch(&table.annotate_sources, 4).unwrap()
    });
    for (r, s) in records.iter().zip(&table.annotate_sources) {
        assert_eq!(&r.raw_reply, &table.annotations[&s.id], "{}", r.id);
    }
}
