//! Editable data files: the label lexicon and prompt templates.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use mmm_core::lexicon::{LabelLexicon, LexiconError, Registry};
use mmm_core::prompt::{PromptTemplate, Purpose};
use mmm_core::{DatasetId, LanguagePair};

const BUNDLED_TEMPLATES: [(&str, &str); 5] = [
    ("ja-en.toml", include_str!("../templates/ja-en.toml")),
    ("ja-zh.toml", include_str!("../templates/ja-zh.toml")),
    ("en-ja.toml", include_str!("../templates/en-ja.toml")),
    ("en-zh.toml", include_str!("../templates/en-zh.toml")),
    ("annotate-en.toml", include_str!("../templates/annotate-en.toml")),
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Lexicon {
        path: PathBuf,
        #[source]
        source: LexiconError,
    },
    #[error("{name}: {source}")]
    Template {
        name: String,
        #[source]
        source: toml::de::Error,
    },
    #[error("template {name}: {reason}")]
    InvalidTemplate { name: String, reason: String },
    #[error("no template with id {0:?}")]
    UnknownTemplate(String),
    #[error("no {purpose:?} template for {dataset} {pair}")]
    NoTemplate {
        purpose: Purpose,
        dataset: DatasetId,
        pair: LanguagePair,
    },
}

/// Loads a lexicon table and audits it against the bundled registries.
pub fn load_lexicon(path: &Path) -> Result<LabelLexicon, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    LabelLexicon::parse(&text, Registry::bundled()).map_err(|source| ConfigError::Lexicon {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Default)]
pub struct TemplateSet {
    templates: Vec<PromptTemplate>,
}

impl TemplateSet {
    pub fn bundled() -> Self {
        let mut set = TemplateSet::default();
        for (name, text) in BUNDLED_TEMPLATES {
            set.add_toml(name, text).expect("bundled templates parse");
        }
        set
    }

    /// Every `*.toml` file in `dir`, in file-name order.
    pub fn load_dir(dir: &Path) -> Result<Self, ConfigError> {
        let io_err = |source| ConfigError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io_err)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io_err)?;
        paths.retain(|p| p.extension().is_some_and(|e| e == "toml"));
        paths.sort();
        let mut set = TemplateSet::default();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            set.add_toml(&path.display().to_string(), &text)?;
        }
        Ok(set)
    }

    pub fn add_toml(&mut self, name: &str, text: &str) -> Result<(), ConfigError> {
        let template: PromptTemplate = toml::from_str(text).map_err(|source| ConfigError::Template {
            name: name.to_owned(),
            source,
        })?;
        let invalid = |reason: &str| ConfigError::InvalidTemplate {
            name: name.to_owned(),
            reason: reason.to_owned(),
        };
        if template.instruction.trim().is_empty() {
            return Err(invalid("empty instruction"));
        }
        if template.one_shot.input.trim().is_empty() || template.one_shot.output.trim().is_empty() {
            return Err(invalid("one-shot example must have an input and an output"));
        }
        if self.templates.iter().any(|t| t.id == template.id) {
            return Err(invalid("duplicate template id"));
        }
        self.templates.push(template);
        Ok(())
    }

    /// Drops every template except `id`.
    pub fn retain_id(&mut self, id: &str) -> Result<(), ConfigError> {
        if !self.templates.iter().any(|t| t.id == id) {
            return Err(ConfigError::UnknownTemplate(id.to_owned()));
        }
        self.templates.retain(|t| t.id == id);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.iter()
    }

    /// The applicable template, preferring ones that name the dataset over
    /// generic ones.
    pub fn resolve(
        &self,
        purpose: Purpose,
        dataset: DatasetId,
        pair: LanguagePair,
    ) -> Result<&PromptTemplate, ConfigError> {
        let candidates = || {
            self.templates
                .iter()
                .filter(move |t| t.purpose == purpose && t.applies_to(dataset, pair))
        };
        candidates()
            .find(|t| !t.applicable.datasets.is_empty())
            .or_else(|| candidates().next())
            .ok_or(ConfigError::NoTemplate { purpose, dataset, pair })
    }
}
