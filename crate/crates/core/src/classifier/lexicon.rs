use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::ClassifierError;
use crate::fingerprint;

/// Which part of a method signature a feature inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    ClassName,
    MethodName,
    ParamName,
    ReturnType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Contains,
    StartsWith,
    Equals,
}

impl Matcher {
    /// `subject` must already be lowercased.
    pub fn matches(self, subject: &str, pattern: &str) -> bool {
        match self {
            Matcher::Contains => subject.contains(pattern),
            Matcher::StartsWith => subject.starts_with(pattern),
            Matcher::Equals => subject == pattern,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub category: Category,
    pub matcher: Matcher,
    pub pattern: String,
}

/// Ordered set of presence features. The order fixes the bit layout of
/// every [`FeatureVector`](super::FeatureVector) built from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureEntry>", into = "Vec<FeatureEntry>")]
pub struct FeatureLexicon {
    entries: Vec<FeatureEntry>,
    fingerprint: String,
}

impl TryFrom<Vec<FeatureEntry>> for FeatureLexicon {
    type Error = ClassifierError;

    fn try_from(entries: Vec<FeatureEntry>) -> Result<Self, Self::Error> {
        FeatureLexicon::new(entries)
    }
}

impl From<FeatureLexicon> for Vec<FeatureEntry> {
    fn from(l: FeatureLexicon) -> Self {
        l.entries
    }
}

impl FeatureLexicon {
    pub fn new(entries: Vec<FeatureEntry>) -> Result<Self, ClassifierError> {
        if entries.is_empty() {
            return Err(ClassifierError::InvalidLexicon(
                "lexicon has no entries".into(),
            ));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if e.pattern.is_empty() {
                return Err(ClassifierError::InvalidLexicon("empty pattern".into()));
            }
            if e.pattern != e.pattern.to_lowercase() {
                return Err(ClassifierError::InvalidLexicon(format!(
                    "pattern `{}` is not lowercase",
                    e.pattern
                )));
            }
            if !seen.insert(e) {
                return Err(ClassifierError::InvalidLexicon(format!(
                    "duplicate entry {:?}/{:?}/`{}`",
                    e.category, e.matcher, e.pattern
                )));
            }
        }
        let fingerprint = fingerprint::of_json(&entries);
        Ok(FeatureLexicon {
            entries,
            fingerprint,
        })
    }

    pub fn entries(&self) -> &[FeatureEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}
