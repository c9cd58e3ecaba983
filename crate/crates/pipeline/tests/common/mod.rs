#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mmm_core::prompt::CompletionRequest;
use mmm_core::{Language, Sample};
use mmm_pipeline::gateway::{Transport, TransportError, TransportReply};

pub const MODEL: &str = "gpt-3.5-turbo";

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Answers translation prompts from a table keyed by record id, finding
/// the sample by its input line and the target by the instruction.
pub struct ReplyTable {
    pub sources: Vec<Sample>,
    pub replies: BTreeMap<String, String>,
    pub annotate_sources: Vec<Sample>,
    pub annotations: BTreeMap<String, String>,
}

impl ReplyTable {
    pub fn load() -> Self {
        let sources = mmm_pipeline::corpus::read_corpus(&fixture("source.jsonl")).unwrap();
        let replies = serde_json::from_str(&std::fs::read_to_string(fixture("replies.json")).unwrap()).unwrap();
        let annotate_sources = mmm_pipeline::corpus::read_corpus(&fixture("annotate-source.jsonl")).unwrap();
        let annotations = serde_json::from_str(&std::fs::read_to_string(fixture("annotations.json")).unwrap()).unwrap();
        ReplyTable {
            sources,
            replies,
            annotate_sources,
            annotations,
        }
    }
}

impl Transport for ReplyTable {
    fn complete(&self, request: &CompletionRequest) -> Result<TransportReply, TransportError> {
        if let Some(s) = self
            .annotate_sources
            .iter()
            .find(|s| request.prompt.contains(&format!("\nInput:\n{}\n", s.text)))
        {
            return Ok(TransportReply {
                text: self.annotations[&s.id].clone(),
                model: format!("{MODEL}-0613"),
            });
        }
        let target = Language::ALL
            .into_iter()
            .find(|l| request.prompt.contains(&format!("into {}.", l.name())))
            .ok_or_else(|| TransportError::Fatal("no target language in prompt".into()))?;
        let source = self
            .sources
            .iter()
            .find(|s| request.prompt.contains(&format!("\n{} /", s.text)))
            .ok_or_else(|| TransportError::Fatal("unknown source sample".into()))?;
        let id = format!("{}-{}", source.id, target);
        let text = self
            .replies
            .get(&id)
            .ok_or_else(|| TransportError::Fatal(format!("no reply for {id}")))?;
        Ok(TransportReply {
            text: text.clone(),
            model: format!("{MODEL}-0613"),
        })
    }
}

pub fn mmm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmm"))
        .args(args)
        .env_remove("MMM_LLM_ENDPOINT")
        .output()
        .expect("run mmm")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}
