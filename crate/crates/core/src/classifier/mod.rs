//! Discovery of the potential method set (PMS).
//!
//! Each method is reduced to binary presence features over its unit name,
//! method name, parameters and return type ([`lexicon`], [`featurize`]). An
//! RBF-kernel SVM trained with SMO ([`svm`]) then labels every method of a
//! corpus as sensitive (+1) or not (-1).

mod crossval;
mod features;
pub mod lexicon;
pub mod svm;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::corpus::{Corpus, MethodId};

pub use crossval::{cross_validate, cross_validate_against, FoldMetrics, Metrics};
pub use features::{featurize, FeatureVector};
pub use lexicon::{Category, FeatureEntry, FeatureLexicon, Matcher};
pub use svm::{predict, rbf_kernel, train_svm, SvmModel, SvmParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("feature length mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("need at least 2 examples, got {0}")]
    TooFewExamples(usize),
    #[error("label must be +1 or -1, got {0}")]
    InvalidLabel(i64),
    #[error("no shuffle in {0} attempts left both classes in every training split")]
    ClassStarved(u64),
    #[error("model was trained with lexicon {model}, but lexicon {given} was supplied")]
    LexiconMismatch { model: String, given: String },
    #[error("labelled method {0} is not in the corpus")]
    UnknownMethod(MethodId),
}

/// Annotations: method id to 1 (sensitive) or 0.
pub type Labels = BTreeMap<MethodId, u8>;

/// Featurizes every labelled method, in id order.
pub fn training_set(
    corpus: &Corpus,
    labels: &Labels,
    lex: &FeatureLexicon,
) -> Result<Vec<(FeatureVector, i8)>, ClassifierError> {
    labels
        .iter()
        .map(|(id, &l)| {
            let m = corpus
                .method(id.as_str())
                .ok_or_else(|| ClassifierError::UnknownMethod(id.clone()))?;
            let label = match l {
                1 => 1,
                0 => -1,
                other => return Err(ClassifierError::InvalidLabel(i64::from(other))),
            };
            Ok((featurize(m, lex), label))
        })
        .collect()
}

/// Trains on the labelled methods of `corpus` and stamps the model with the
/// lexicon fingerprint.
pub fn train_on_corpus(
    corpus: &Corpus,
    labels: &Labels,
    lex: &FeatureLexicon,
    params: &SvmParams,
) -> Result<SvmModel, ClassifierError> {
    let data = training_set(corpus, labels, lex)?;
    let mut model = train_svm(&data, params)?;
    model.lexicon_fingerprint = lex.fingerprint().to_string();
    Ok(model)
}

/// All methods the model labels +1.
pub fn discover_pms(
    corpus: &Corpus,
    model: &SvmModel,
    lex: &FeatureLexicon,
) -> Result<BTreeSet<MethodId>, ClassifierError> {
    if model.lexicon_fingerprint != lex.fingerprint() {
        return Err(ClassifierError::LexiconMismatch {
            model: model.lexicon_fingerprint.clone(),
            given: lex.fingerprint().to_string(),
        });
    }
    let mut pms = BTreeSet::new();
    for m in corpus.methods() {
        let (label, _) = predict(model, &featurize(m, lex))?;
        if label > 0 {
            pms.insert(m.id.clone());
        }
    }
    Ok(pms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;

    fn lex() -> FeatureLexicon {
        FeatureLexicon::new(vec![
            FeatureEntry {
                category: Category::MethodName,
                matcher: Matcher::Contains,
                pattern: "location".into(),
            },
            FeatureEntry {
                category: Category::ReturnType,
                matcher: Matcher::Equals,
                pattern: "void".into(),
            },
        ])
        .unwrap()
    }

    fn corpus() -> Corpus {
        parse_corpus(&[(
            "c.mfw".into(),
            "service S [process=p, side=service, lang=java] {\n\
             Location getLocation() { }\n void dump() { }\n Location lastLocation(int a) { }\n void reset() { }\n}"
                .into(),
        )])
        .unwrap()
    }

    #[test]
    fn empty_corpus_empty_pms() {
        let c = corpus();
        let mut labels = Labels::new();
        labels.insert("S.getLocation/0".into(), 1);
        labels.insert("S.dump/0".into(), 0);
        let p = SvmParams::defaults_for(2);
        let model = train_on_corpus(&c, &labels, &lex(), &p).unwrap();
        let pms = discover_pms(&Corpus::default(), &model, &lex()).unwrap();
        assert!(pms.is_empty());
    }

    #[test]
    fn discovers_lookalikes_of_positive_examples() {
        let c = corpus();
        let mut labels = Labels::new();
        labels.insert("S.getLocation/0".into(), 1);
        labels.insert("S.dump/0".into(), 0);
        let p = SvmParams {
            c: 10.0,
            gamma: 1.0,
            ..SvmParams::defaults_for(2)
        };
        let model = train_on_corpus(&c, &labels, &lex(), &p).unwrap();
        let pms = discover_pms(&c, &model, &lex()).unwrap();
        let ids: Vec<&str> = pms.iter().map(|m| m.as_str()).collect();
        assert_eq!(ids, vec!["S.getLocation/0", "S.lastLocation/1"]);
    }

    #[test]
    fn lexicon_mismatch_is_an_error() {
        let c = corpus();
        let mut labels = Labels::new();
        labels.insert("S.getLocation/0".into(), 1);
        labels.insert("S.dump/0".into(), 0);
        let model = train_on_corpus(&c, &labels, &lex(), &SvmParams::defaults_for(2)).unwrap();
        let other = FeatureLexicon::new(vec![FeatureEntry {
            category: Category::ClassName,
            matcher: Matcher::Contains,
            pattern: "x".into(),
        }])
        .unwrap();
        assert!(matches!(
            discover_pms(&c, &model, &other),
            Err(ClassifierError::LexiconMismatch { .. })
        ));
    }

    #[test]
    fn unknown_labelled_method() {
        let mut labels = Labels::new();
        labels.insert("S.nope/0".into(), 1);
        assert!(matches!(
            training_set(&corpus(), &labels, &lex()),
            Err(ClassifierError::UnknownMethod(_))
        ));
    }
}
