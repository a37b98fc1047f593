use serde::{Deserialize, Serialize};

use super::lexicon::{Category, FeatureLexicon};
use crate::corpus::MethodRecord;

/// Binary feature vector; one bit per lexicon entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<u8>);

impl FeatureVector {
    /// Panics if any value is not 0 or 1.
    pub fn from_bits(bits: Vec<u8>) -> Self {
        assert!(bits.iter().all(|&b| b <= 1), "feature bits must be 0 or 1");
        FeatureVector(bits)
    }

    pub fn zeros(len: usize) -> Self {
        FeatureVector(vec![0; len])
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i] == 1
    }

    /// Squared Euclidean distance; for binary vectors this is the Hamming
    /// distance. Callers check lengths.
    pub(crate) fn sq_dist(&self, other: &FeatureVector) -> f64 {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count() as f64
    }
}

/// Bit `i` is set iff entry `i` matches the method, case-insensitively:
/// class names against the unit name, method names against the method
/// name, parameter entries against every parameter name and type, return
/// entries against the return type.
pub fn featurize(m: &MethodRecord, lex: &FeatureLexicon) -> FeatureVector {
    let unit = m.unit.to_lowercase();
    let name = m.name.to_lowercase();
    let ret = m.return_type.to_lowercase();
    let params: Vec<String> = m
        .params
        .iter()
        .flat_map(|p| [p.name.to_lowercase(), p.ty.to_lowercase()])
        .collect();
    let bits = lex
        .entries()
        .iter()
        .map(|e| {
            let hit = match e.category {
                Category::ClassName => e.matcher.matches(&unit, &e.pattern),
                Category::MethodName => e.matcher.matches(&name, &e.pattern),
                Category::ReturnType => e.matcher.matches(&ret, &e.pattern),
                Category::ParamName => params.iter().any(|p| e.matcher.matches(p, &e.pattern)),
            };
            u8::from(hit)
        })
        .collect();
    FeatureVector(bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::lexicon::{FeatureEntry, Matcher};
    use crate::corpus::{MethodRecord, Param};

    fn lex(entries: &[(Category, Matcher, &str)]) -> FeatureLexicon {
        FeatureLexicon::new(
            entries
                .iter()
                .map(|&(category, matcher, p)| FeatureEntry {
                    category,
                    matcher,
                    pattern: p.into(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn method(unit: &str, name: &str, params: &[(&str, &str)], ret: &str) -> MethodRecord {
        MethodRecord::new(
            unit,
            name,
            params
                .iter()
                .map(|&(ty, n)| Param {
                    ty: ty.into(),
                    name: n.into(),
                })
                .collect(),
            ret,
            vec![],
        )
    }

    #[test]
    fn method_name_contains_camera() {
        let l = lex(&[(Category::MethodName, Matcher::Contains, "camera")]);
        let m = method(
            "CameraService",
            "getCameraInfo",
            &[("int", "cameraId")],
            "CameraInfo",
        );
        assert_eq!(featurize(&m, &l).bits(), &[1]);
    }

    #[test]
    fn void_return_equals() {
        let l = lex(&[(Category::ReturnType, Matcher::Equals, "void")]);
        let m = method("U", "f", &[], "void");
        assert_eq!(featurize(&m, &l).bits(), &[1]);
    }

    #[test]
    fn singleton_lexicon_without_match() {
        let l = lex(&[(Category::ClassName, Matcher::Contains, "machine")]);
        let m = method("PowerManagerService", "goToSleep", &[], "void");
        assert_eq!(featurize(&m, &l), FeatureVector::zeros(1));
    }

    #[test]
    fn categories_and_matchers() {
        let l = lex(&[
            (Category::ClassName, Matcher::Contains, "location"),
            (Category::MethodName, Matcher::StartsWith, "start"),
            (Category::MethodName, Matcher::StartsWith, "callback"),
            (Category::ParamName, Matcher::Contains, "buffer"),
            (Category::ParamName, Matcher::Equals, "sensors_event_t"),
            (Category::ReturnType, Matcher::Equals, "void"),
        ]);
        let m = method(
            "LocationManagerService",
            "startNavigating",
            &[("sensors_event_t", "evt"), ("int", "mBufferSize")],
            "boolean",
        );
        assert_eq!(featurize(&m, &l).bits(), &[1, 1, 0, 1, 1, 0]);
    }
}
