//! From `resource_control` words to abstract operations (layer 1) and on to
//! the candidate method set #TM.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::MethodId;
use crate::fingerprint;
use crate::oal::{MethodAoMap, OalTable};
use crate::uppt::{word, Control, Resource};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MappingError {
    #[error("`{0}` is not a resource_control word (controls: disable, obfuscate)")]
    UnknownWord(String),
    #[error("`{word}` maps to operation `{op}`, which the operation table does not define")]
    UnknownOperation { word: String, op: String },
    #[error("no entry for `{0}`")]
    MissingWord(String),
    #[error("entry for `{0}` is empty and not listed under _allow_empty")]
    EmptyEntry(String),
    #[error("malformed layer-1 document: {0}")]
    Json(String),
}

/// Words a layer-1 map must cover.
pub fn required_words() -> Vec<String> {
    Resource::ALL
        .iter()
        .flat_map(|&r| [word(r, Control::Disable), word(r, Control::Obfuscate)])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer1Repr {
    #[serde(
        rename = "_confidence",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    confidence: Option<BTreeMap<String, serde_json::Value>>,
    #[serde(
        rename = "_allow_empty",
        default,
        skip_serializing_if = "BTreeSet::is_empty"
    )]
    allow_empty: BTreeSet<String>,
    #[serde(flatten)]
    entries: BTreeMap<String, BTreeSet<String>>,
}

/// Validated layer-1 map. JSON form: `{"gps_disable": ["start_GPS", ...]}`
/// with optional `_confidence` (documentation only) and `_allow_empty`
/// (words whose empty entry is deliberate).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "Layer1Repr")]
pub struct Layer1Map {
    repr: Layer1Repr,
}

impl From<Layer1Map> for Layer1Repr {
    fn from(m: Layer1Map) -> Self {
        m.repr
    }
}

fn parse_word(w: &str) -> Option<(Resource, Control)> {
    let (r, c) = w.rsplit_once('_')?;
    let r: Resource = r.parse().ok()?;
    let c: Control = c.parse().ok()?;
    (c != Control::Allow).then_some((r, c))
}

impl Layer1Map {
    pub fn from_json(text: &str, oal: &OalTable) -> Result<Self, MappingError> {
        let repr: Layer1Repr =
            serde_json::from_str(text).map_err(|e| MappingError::Json(e.to_string()))?;
        Self::validate(repr, oal)
    }

    pub fn new(
        entries: BTreeMap<String, BTreeSet<String>>,
        oal: &OalTable,
    ) -> Result<Self, MappingError> {
        Self::validate(
            Layer1Repr {
                confidence: None,
                allow_empty: BTreeSet::new(),
                entries,
            },
            oal,
        )
    }

    fn validate(repr: Layer1Repr, oal: &OalTable) -> Result<Self, MappingError> {
        for w in repr.entries.keys().chain(&repr.allow_empty) {
            if parse_word(w).is_none() {
                return Err(MappingError::UnknownWord(w.clone()));
            }
        }
        for (w, ops) in &repr.entries {
            if let Some(op) = ops.iter().find(|o| !oal.contains(o)) {
                return Err(MappingError::UnknownOperation {
                    word: w.clone(),
                    op: op.clone(),
                });
            }
        }
        for w in required_words() {
            match repr.entries.get(&w) {
                None => return Err(MappingError::MissingWord(w)),
                Some(ops) if ops.is_empty() && !repr.allow_empty.contains(&w) => {
                    return Err(MappingError::EmptyEntry(w))
                }
                Some(_) => {}
            }
        }
        Ok(Layer1Map { repr })
    }

    pub fn get(&self, word: &str) -> Option<&BTreeSet<String>> {
        self.repr.entries.get(word)
    }

    pub fn entries(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.repr.entries
    }

    /// Words whose entry is deliberately empty.
    pub fn empty_words(&self) -> impl Iterator<Item = &String> {
        self.repr
            .entries
            .iter()
            .filter(|(_, o)| o.is_empty())
            .map(|(w, _)| w)
    }

    pub fn ops_for(&self, r: Resource, c: Control) -> &BTreeSet<String> {
        static NONE: BTreeSet<String> = BTreeSet::new();
        self.repr.entries.get(&word(r, c)).unwrap_or(&NONE)
    }

    /// Union of the entries of `words`.
    pub fn relevant_ops<'a>(
        &self,
        words: impl IntoIterator<Item = &'a String>,
    ) -> Result<BTreeSet<String>, MappingError> {
        let mut out = BTreeSet::new();
        for w in words {
            let ops = self
                .get(w)
                .ok_or_else(|| MappingError::UnknownWord(w.clone()))?;
            out.extend(ops.iter().cloned());
        }
        Ok(out)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint::of_json(self)
    }
}

/// Candidate methods for a set of words, with per-word provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub tm: BTreeSet<MethodId>,
    /// word → operation → methods performing it.
    pub provenance: BTreeMap<String, BTreeMap<String, BTreeSet<MethodId>>>,
    pub warnings: Vec<String>,
}

/// `#TM = { m : ops(m) ∩ ⋃ l1[w] ≠ ∅ }`.
pub fn resolve_methods(
    words: &BTreeSet<String>,
    l1: &Layer1Map,
    aomap: &MethodAoMap,
) -> Result<Selection, MappingError> {
    let mut sel = Selection::default();
    for w in words {
        let ops = l1
            .get(w)
            .ok_or_else(|| MappingError::UnknownWord(w.clone()))?;
        if ops.is_empty() {
            sel.warnings.push(format!("`{w}` maps to no operation"));
        }
        let mut per_op = BTreeMap::new();
        for op in ops {
            let performers: BTreeSet<MethodId> = aomap
                .iter()
                .filter(|(_, a)| a.ops.contains(op))
                .map(|(id, _)| id.clone())
                .collect();
            if performers.is_empty() {
                sel.warnings.push(format!(
                    "operation `{op}` (from `{w}`) is performed by no method"
                ));
            }
            sel.tm.extend(performers.iter().cloned());
            per_op.insert(op.clone(), performers);
        }
        sel.provenance.insert(w.clone(), per_op);
    }
    Ok(sel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oal::{KeywordEntry, KeywordKind, MethodAo, Operation};

    fn oal() -> OalTable {
        let op = |r| Operation {
            resource: r,
            keywords: vec![KeywordEntry::new(KeywordKind::SdsType, "T")],
        };
        OalTable::new(
            [
                ("start_GPS".to_string(), op(Resource::Gps)),
                ("return_GPS".to_string(), op(Resource::Gps)),
                ("return_Camera".to_string(), op(Resource::Camera)),
            ]
            .into_iter()
            .collect(),
        )
        .unwrap()
    }

    fn full_doc(gps_disable: &str) -> String {
        let mut parts = vec![format!("\"gps_disable\": {gps_disable}")];
        for w in required_words() {
            if w != "gps_disable" {
                parts.push(format!("\"{w}\": []"));
            }
        }
        let empties: Vec<String> = required_words()
            .into_iter()
            .filter(|w| w != "gps_disable")
            .map(|w| format!("\"{w}\""))
            .collect();
        format!(
            "{{{}, \"_allow_empty\": [{}]}}",
            parts.join(", "),
            empties.join(", ")
        )
    }

    #[test]
    fn valid_gps_entry() {
        let l1 = Layer1Map::from_json(&full_doc(r#"["start_GPS", "return_GPS"]"#), &oal()).unwrap();
        assert_eq!(l1.get("gps_disable").unwrap().len(), 2);
    }

    #[test]
    fn dangling_operation() {
        let err = Layer1Map::from_json(&full_doc(r#"["fly_GPS"]"#), &oal()).unwrap_err();
        assert_eq!(
            err,
            MappingError::UnknownOperation {
                word: "gps_disable".into(),
                op: "fly_GPS".into()
            }
        );
    }

    #[test]
    fn empty_map_and_missing_marker() {
        assert!(matches!(
            Layer1Map::from_json("{}", &oal()),
            Err(MappingError::MissingWord(_))
        ));
        let doc = full_doc("[]");
        assert_eq!(
            Layer1Map::from_json(&doc, &oal()),
            Err(MappingError::EmptyEntry("gps_disable".into()))
        );
    }

    #[test]
    fn unknown_word() {
        let doc = full_doc(r#"["start_GPS"]"#).replacen('{', r#"{"gps_allow": [], "#, 1);
        assert_eq!(
            Layer1Map::from_json(&doc, &oal()),
            Err(MappingError::UnknownWord("gps_allow".into()))
        );
    }

    #[test]
    fn serializes_back_to_the_same_document() {
        let l1 = Layer1Map::from_json(&full_doc(r#"["start_GPS"]"#), &oal()).unwrap();
        let again = Layer1Map::from_json(&serde_json::to_string(&l1).unwrap(), &oal()).unwrap();
        assert_eq!(again, l1);
    }

    fn aomap(entries: &[(&str, &[&str])]) -> MethodAoMap {
        MethodAoMap(
            entries
                .iter()
                .map(|(id, ops)| {
                    (
                        MethodId::from(*id),
                        MethodAo {
                            ops: ops.iter().map(|o| o.to_string()).collect(),
                            ..Default::default()
                        },
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn resolves_through_both_layers() {
        let l1 = Layer1Map::from_json(&full_doc(r#"["start_GPS", "return_GPS"]"#), &oal()).unwrap();
        let ao = aomap(&[
            ("A.f/0", &["return_GPS"]),
            ("B.g/0", &["return_GPS"]),
            ("C.h/0", &["return_Camera"]),
        ]);
        let words: BTreeSet<String> = ["gps_disable".to_string()].into_iter().collect();
        let sel = resolve_methods(&words, &l1, &ao).unwrap();
        assert_eq!(sel.tm.len(), 2);
        assert!(sel.warnings.iter().any(|w| w.contains("start_GPS")));
        assert_eq!(sel.provenance["gps_disable"]["return_GPS"].len(), 2);
        assert!(resolve_methods(&BTreeSet::new(), &l1, &ao)
            .unwrap()
            .tm
            .is_empty());
        let bad: BTreeSet<String> = ["gps_allow".to_string()].into_iter().collect();
        assert!(resolve_methods(&bad, &l1, &ao).is_err());
    }
}
