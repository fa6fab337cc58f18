//! User style profiles: a label set plus exemplar texts per language.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::applicator::GuidanceSet;
use crate::backend::ModelBackend;
use crate::error::{Error, Result};

/// Style labels in tie-breaking order and, for each language, exemplar
/// texts per label. Labels correspond across languages by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StyleProfile {
    pub name: String,
    pub labels: Vec<String>,
    /// language -> label -> samples
    pub samples: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

impl StyleProfile {
    pub fn new(
        name: impl Into<String>,
        labels: Vec<String>,
        samples: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    ) -> Result<Self> {
        let p = Self {
            name: name.into(),
            labels,
            samples,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let p: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let unique: HashSet<_> = self.labels.iter().collect();
        if self.labels.is_empty() || unique.len() != self.labels.len() {
            return Err(Error::validation(format!(
                "profile {:?} needs a non-empty list of distinct labels",
                self.name
            )));
        }
        if self.samples.is_empty() {
            return Err(Error::validation(format!(
                "profile {:?} declares no languages",
                self.name
            )));
        }
        for (lang, by_label) in &self.samples {
            for label in by_label.keys() {
                if !unique.contains(label) {
                    return Err(Error::validation(format!(
                        "profile {:?}: samples for unknown label {label:?} in {lang:?}",
                        self.name
                    )));
                }
            }
            for label in &self.labels {
                let ok = by_label
                    .get(label)
                    .is_some_and(|s| s.iter().any(|t| !t.trim().is_empty()));
                if !ok {
                    return Err(Error::validation(format!(
                        "profile {:?}: label {label:?} has no samples in {lang:?}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn languages(&self) -> impl Iterator<Item = &str> {
        self.samples.keys().map(String::as_str)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn samples(&self, language: &str, label: &str) -> Result<&[String]> {
        self.samples
            .get(language)
            .and_then(|m| m.get(label))
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::Config(format!(
                    "profile {:?} has no {label:?} samples for {language:?}",
                    self.name
                ))
            })
    }

    /// Guidance set built from the `label` exemplars in `language`.
    pub fn guidance(&self, language: &str, label: &str, backend: &dyn ModelBackend) -> Result<GuidanceSet> {
        let samples: Vec<String> = self
            .samples(language, label)?
            .iter()
            .filter(|s| !s.trim().is_empty())
            .cloned()
            .collect();
        GuidanceSet::from_samples(&samples, language, backend)
    }
}
