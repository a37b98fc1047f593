use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::svm::{predict, train_svm, SvmParams};
use super::{ClassifierError, FeatureVector};

const MAX_SHUFFLES: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Mean precision and recall over folds, for the positive (sensitive) class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub per_fold: Vec<FoldMetrics>,
    /// Seed of the shuffle that produced class-complete training splits.
    pub shuffle_seed: u64,
}

/// Ratio with the vacuous case (no predicted / no actual positives) as 1.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Splits `0..n` into `k` contiguous groups whose sizes differ by at most one.
fn fold_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        out.push((start, start + len));
        start += len;
    }
    out
}

/// k-fold cross validation. Training uses the labels in `data`; predictions
/// on each held-out fold are scored against `eval_labels`, which may equal
/// the training labels or be a separate reference labelling.
pub fn cross_validate_against(
    data: &[(FeatureVector, i8)],
    eval_labels: &[i8],
    folds: usize,
    params: &SvmParams,
    seed: u64,
) -> Result<Metrics, ClassifierError> {
    if folds < 2 {
        return Err(ClassifierError::InvalidParam(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if data.len() < folds {
        return Err(ClassifierError::TooFewExamples(data.len()));
    }
    assert_eq!(
        data.len(),
        eval_labels.len(),
        "one evaluation label per example"
    );
    let bounds = fold_bounds(data.len(), folds);

    let mut order: Vec<usize> = Vec::new();
    let mut shuffle_seed = None;
    for attempt in 0..MAX_SHUFFLES {
        let s = seed.wrapping_add(attempt);
        order = (0..data.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
        let complete = bounds.iter().all(|&(lo, hi)| {
            let train = order[..lo].iter().chain(&order[hi..]);
            let (mut pos, mut neg) = (false, false);
            for &i in train {
                if data[i].1 > 0 {
                    pos = true;
                } else {
                    neg = true;
                }
            }
            pos && neg
        });
        if complete {
            shuffle_seed = Some(s);
            break;
        }
    }
    let shuffle_seed = shuffle_seed.ok_or(ClassifierError::ClassStarved(MAX_SHUFFLES))?;

    let mut per_fold = Vec::with_capacity(folds);
    for &(lo, hi) in &bounds {
        let train: Vec<(FeatureVector, i8)> = order[..lo]
            .iter()
            .chain(&order[hi..])
            .map(|&i| data[i].clone())
            .collect();
        let model = train_svm(&train, params)?;
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for &i in &order[lo..hi] {
            let (pred, _) = predict(&model, &data[i].0)?;
            match (pred > 0, eval_labels[i] > 0) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        per_fold.push(FoldMetrics {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            tp,
            fp,
            fn_,
        });
    }
    let k = per_fold.len() as f64;
    Ok(Metrics {
        precision: per_fold.iter().map(|f| f.precision).sum::<f64>() / k,
        recall: per_fold.iter().map(|f| f.recall).sum::<f64>() / k,
        per_fold,
        shuffle_seed,
    })
}

/// k-fold cross validation scored against the training labels.
pub fn cross_validate(
    data: &[(FeatureVector, i8)],
    folds: usize,
    params: &SvmParams,
    seed: u64,
) -> Result<Metrics, ClassifierError> {
    let labels: Vec<i8> = data.iter().map(|(_, l)| *l).collect();
    cross_validate_against(data, &labels, folds, params, seed)
}
