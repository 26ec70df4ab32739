//! Prompt templates. Defaults are compiled in from `assets/prompts/`; a
//! directory of `.txt` files with the same names overrides them.
//!
//! Placeholders are `{name}`; braces that do not name a supplied variable are
//! left alone, so templates can show literal JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown prompt template `{0}`")]
    Unknown(String),
    #[error("reading prompt override {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

const EMBEDDED: &[(&str, &str)] = &[
    ("mcsr_system", include_str!("../assets/prompts/mcsr_system.txt")),
    ("mcsr_user", include_str!("../assets/prompts/mcsr_user.txt")),
    ("cisc_system", include_str!("../assets/prompts/cisc_system.txt")),
    ("cisc_user", include_str!("../assets/prompts/cisc_user.txt")),
    ("direct_system", include_str!("../assets/prompts/direct_system.txt")),
    ("direct_user", include_str!("../assets/prompts/direct_user.txt")),
    ("rerank_system", include_str!("../assets/prompts/rerank_system.txt")),
    ("rerank_user", include_str!("../assets/prompts/rerank_user.txt")),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<String, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::embedded()
    }
}

impl PromptSet {
    pub fn embedded() -> Self {
        Self {
            templates: EMBEDDED
                .iter()
                .map(|(k, v)| (k.to_string(), v.trim_end().to_string()))
                .collect(),
        }
    }

    /// Embedded templates, with any `<name>.txt` found in `dir` taking
    /// precedence.
    pub fn with_overrides(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let mut set = Self::embedded();
        for name in EMBEDDED.iter().map(|(k, _)| *k) {
            let path = dir.as_ref().join(format!("{name}.txt"));
            if path.exists() {
                let text = fs::read_to_string(&path).map_err(|source| PromptError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                set.templates.insert(name.to_string(), text.trim_end().to_string());
            }
        }
        Ok(set)
    }

    pub fn template(&self, name: &str) -> Result<&str, PromptError> {
        self.templates
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| PromptError::Unknown(name.to_string()))
    }

    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String, PromptError> {
        let mut out = self.template(name)?.to_string();
        for (key, value) in vars {
            out = out.replace(&format!("{{{key}}}"), value);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_known_placeholders_only() {
        let set = PromptSet::embedded();
        let out = set.render("rerank_user", &[("query", "Zahlung"), ("chunk", "30 Tage netto")]).unwrap();
        assert!(out.contains("Search request: Zahlung"));
        assert!(out.contains("{\"score\": number}"));
        assert!(set.render("nope", &[]).is_err());
    }

    #[test]
    fn directory_overrides() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("cisc_system.txt"), "custom system\n").unwrap();
        let set = PromptSet::with_overrides(dir.path()).unwrap();
        assert_eq!(set.template("cisc_system").unwrap(), "custom system");
        assert_eq!(set.template("mcsr_system").unwrap(), PromptSet::embedded().template("mcsr_system").unwrap());
    }
}
