//! Binary soft-margin SVM with an RBF kernel, trained by simplified Platt SMO.
//!
//! The dual problem solved is
//!
//! ```text
//! max  W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
//! s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0
//! ```
//!
//! and the decision function is `f(x) = sum_i a_i y_i K(s_i, x) + b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, FeatureVector};

/// Threshold below which an alpha counts as zero (relative to `C`).
const ALPHA_EPS: f64 = 1e-8;
/// Smallest alpha movement accepted as progress.
const STEP_EPS: f64 = 1e-12;

/// `exp(-gamma * ||x - z||^2)`.
pub fn rbf_kernel(
    x: &FeatureVector,
    z: &FeatureVector,
    gamma: f64,
) -> Result<f64, ClassifierError> {
    if x.len() != z.len() {
        return Err(ClassifierError::DimensionMismatch {
            expected: x.len(),
            found: z.len(),
        });
    }
    Ok((-gamma * x.sq_dist(z)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    pub max_passes: usize,
    pub seed: u64,
}

impl SvmParams {
    /// Conventional defaults: `C = 1`, `gamma = 1/dim`, `tol = 1e-3`,
    /// ten quiet passes.
    pub fn defaults_for(dim: usize) -> Self {
        SvmParams {
            c: 1.0,
            gamma: 1.0 / dim.max(1) as f64,
            tol: 1e-3,
            max_passes: 10,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ClassifierError::InvalidParam(format!(
                "C must be positive, got {}",
                self.c
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ClassifierError::InvalidParam(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ClassifierError::InvalidParam(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Full solver output over the training set, before support vectors are
/// extracted.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// Number of successful pair updates.
    pub steps: usize,
}

/// Dual objective `W(a)` for labels `y` (values ±1) and kernel matrix `k`.
pub fn dual_objective(alphas: &[f64], y: &[f64], k: &[Vec<f64>]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * k[i][j];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

struct Smo<'a> {
    k: &'a [Vec<f64>],
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    b: f64,
    /// `f(x_i)` for the current alphas and bias.
    f: Vec<f64>,
}

impl<'a> Smo<'a> {
    fn err(&self, i: usize) -> f64 {
        self.f[i] - self.y[i]
    }

    fn violates(&self, i: usize, tol: f64) -> bool {
        let r = self.y[i] * self.err(i);
        (r < -tol && self.alpha[i] < self.c) || (r > tol && self.alpha[i] > 0.0)
    }

    /// Change in `W` when alphas i and j move by `di` and `dj`.
    fn gain(&self, i: usize, j: usize, di: f64, dj: f64) -> f64 {
        let gi = self.f[i] - self.b;
        let gj = self.f[j] - self.b;
        let (k, y) = (self.k, self.y);
        di + dj
            - (di * y[i] * gi + dj * y[j] * gj)
            - 0.5 * (di * di * k[i][i] + dj * dj * k[j][j] + 2.0 * di * dj * y[i] * y[j] * k[i][j])
    }

    fn take_step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (y, k, c) = (self.y, self.k, self.c);
        let (ai, aj) = (self.alpha[i], self.alpha[j]);
        let (lo, hi) = if y[i] != y[j] {
            ((aj - ai).max(0.0), (c + aj - ai).min(c))
        } else {
            ((ai + aj - c).max(0.0), (ai + aj).min(c))
        };
        if hi - lo < STEP_EPS {
            return false;
        }
        let s = y[i] * y[j];
        let (ei, ej) = (self.err(i), self.err(j));
        let eta = 2.0 * k[i][j] - k[i][i] - k[j][j];
        let mut new_aj = if eta < -STEP_EPS {
            (aj - y[j] * (ei - ej) / eta).clamp(lo, hi)
        } else {
            // Flat or degenerate direction: take the better endpoint.
            let at = |v: f64| self.gain(i, j, s * (aj - v), v - aj);
            let (g_lo, g_hi) = (at(lo), at(hi));
            if g_lo > g_hi + STEP_EPS {
                lo
            } else if g_hi > g_lo + STEP_EPS {
                hi
            } else {
                aj
            }
        };
        if new_aj < ALPHA_EPS * c {
            new_aj = 0.0;
        } else if new_aj > c * (1.0 - ALPHA_EPS) {
            new_aj = c;
        }
        if (new_aj - aj).abs() < STEP_EPS * (new_aj + aj + STEP_EPS) {
            return false;
        }
        let mut new_ai = ai + s * (aj - new_aj);
        if new_ai < ALPHA_EPS * c {
            new_ai = 0.0;
        } else if new_ai > c * (1.0 - ALPHA_EPS) {
            new_ai = c;
        }
        let (di, dj) = (new_ai - ai, new_aj - aj);
        let b1 = self.b - ei - y[i] * di * k[i][i] - y[j] * dj * k[i][j];
        let b2 = self.b - ej - y[i] * di * k[i][j] - y[j] * dj * k[j][j];
        let new_b = if new_ai > 0.0 && new_ai < c {
            b1
        } else if new_aj > 0.0 && new_aj < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_b - self.b;
        for (t, ft) in self.f.iter_mut().enumerate() {
            *ft += y[i] * di * k[i][t] + y[j] * dj * k[j][t] + db;
        }
        self.alpha[i] = new_ai;
        self.alpha[j] = new_aj;
        self.b = new_b;
        true
    }

    /// Second-choice heuristic: the partner maximizing `|E_i - E_j|`.
    fn best_partner(&self, i: usize) -> Option<usize> {
        let ei = self.err(i);
        (0..self.alpha.len()).filter(|&j| j != i).max_by(|&a, &b| {
            let da = (ei - self.err(a)).abs();
            let db = (ei - self.err(b)).abs();
            da.partial_cmp(&db).unwrap().then(b.cmp(&a))
        })
    }
}

/// Bias consistent with the KKT conditions for fixed alphas: the mean over
/// free support vectors of `y_i - g_i`, or, with none free, the midpoint of
/// the interval allowed by the bound vectors.
pub fn kkt_bias(alphas: &[f64], y: &[f64], k: &[Vec<f64>], c: f64) -> f64 {
    let n = alphas.len();
    let g: Vec<f64> = (0..n)
        .map(|t| (0..n).map(|l| alphas[l] * y[l] * k[l][t]).sum())
        .collect();
    let free: Vec<usize> = (0..n)
        .filter(|&i| alphas[i] > ALPHA_EPS * c && alphas[i] < c * (1.0 - ALPHA_EPS))
        .collect();
    if !free.is_empty() {
        return free.iter().map(|&i| y[i] - g[i]).sum::<f64>() / free.len() as f64;
    }
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..n {
        let at_zero = alphas[i] <= ALPHA_EPS * c;
        // a_i = 0 requires y_i f_i >= 1; a_i = C requires y_i f_i <= 1.
        let lower = (y[i] > 0.0) == at_zero;
        let bound = y[i] - g[i];
        if lower {
            lo = lo.max(bound);
        } else {
            hi = hi.min(bound);
        }
    }
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => 0.0,
    }
}

/// Runs simplified SMO on a precomputed kernel matrix. The second index is
/// drawn from a seeded generator; when that pair makes no progress the
/// largest-|E_i - E_j| partner is tried.
pub fn smo_solve(
    k: &[Vec<f64>],
    y: &[f64],
    params: &SvmParams,
) -> Result<SmoSolution, ClassifierError> {
    params.validate()?;
    let n = y.len();
    if n < 2 {
        return Err(ClassifierError::TooFewExamples(n));
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(ClassifierError::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut smo = Smo {
        k,
        y,
        c: params.c,
        alpha: vec![0.0; n],
        b: 0.0,
        f: vec![0.0; n],
    };
    let max_sweeps = 2000 + 50 * n;
    let mut passes = 0;
    let mut sweeps = 0;
    let mut steps = 0;
    while passes < params.max_passes && sweeps < max_sweeps {
        sweeps += 1;
        let mut changed = 0;
        for i in 0..n {
            if !smo.violates(i, params.tol) {
                continue;
            }
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let mut moved = smo.take_step(i, j);
            if !moved {
                if let Some(j2) = smo.best_partner(i) {
                    if j2 != j {
                        moved = smo.take_step(i, j2);
                    }
                }
            }
            if moved {
                changed += 1;
                steps += 1;
            }
        }
        passes = if changed == 0 { passes + 1 } else { 0 };
    }
    let bias = kkt_bias(&smo.alpha, y, k, params.c);
    Ok(SmoSolution {
        alphas: smo.alpha,
        bias,
        steps,
    })
}

pub fn kernel_matrix(xs: &[&FeatureVector], gamma: f64) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        k[i][i] = 1.0;
        for j in (i + 1)..n {
            let v = (-gamma * xs[i].sq_dist(xs[j])).exp();
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// Trained classifier. Only support vectors (alpha > 0) are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<FeatureVector>,
    pub alphas: Vec<f64>,
    pub labels: Vec<i8>,
    pub bias: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub gamma: f64,
    pub lexicon_fingerprint: String,
    pub seed: u64,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, FeatureVector::len)
    }

    pub fn decision_value(&self, x: &FeatureVector) -> Result<f64, ClassifierError> {
        if x.len() != self.dim() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut f = 0.0;
        for ((s, a), y) in self
            .support_vectors
            .iter()
            .zip(&self.alphas)
            .zip(&self.labels)
        {
            f += a * f64::from(*y) * (-self.gamma * s.sq_dist(x)).exp();
        }
        Ok(f + self.bias)
    }
}

/// Trains on `(features, label)` pairs with labels ±1.
pub fn train_svm(
    data: &[(FeatureVector, i8)],
    params: &SvmParams,
) -> Result<SvmModel, ClassifierError> {
    if data.len() < 2 {
        return Err(ClassifierError::TooFewExamples(data.len()));
    }
    let dim = data[0].0.len();
    if let Some((x, _)) = data.iter().find(|(x, _)| x.len() != dim) {
        return Err(ClassifierError::DimensionMismatch {
            expected: dim,
            found: x.len(),
        });
    }
    if let Some((_, l)) = data.iter().find(|(_, l)| *l != 1 && *l != -1) {
        return Err(ClassifierError::InvalidLabel(i64::from(*l)));
    }
    let xs: Vec<&FeatureVector> = data.iter().map(|(x, _)| x).collect();
    let y: Vec<f64> = data.iter().map(|(_, l)| f64::from(*l)).collect();
    let k = kernel_matrix(&xs, params.gamma);
    let sol = smo_solve(&k, &y, params)?;
    let mut model = SvmModel {
        support_vectors: Vec::new(),
        alphas: Vec::new(),
        labels: Vec::new(),
        bias: sol.bias,
        c: params.c,
        gamma: params.gamma,
        lexicon_fingerprint: String::new(),
        seed: params.seed,
    };
    for (i, a) in sol.alphas.iter().enumerate() {
        if *a > 0.0 {
            model.support_vectors.push(data[i].0.clone());
            model.alphas.push(*a);
            model.labels.push(data[i].1);
        }
    }
    Ok(model)
}

/// Label and decision value. A decision value of exactly zero maps to +1,
/// i.e. ties count as sensitive.
pub fn predict(model: &SvmModel, x: &FeatureVector) -> Result<(i8, f64), ClassifierError> {
    let v = model.decision_value(x)?;
    Ok((if v >= 0.0 { 1 } else { -1 }, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(bits: &[u8]) -> FeatureVector {
        FeatureVector::from_bits(bits.to_vec())
    }

    fn params(c: f64, gamma: f64) -> SvmParams {
        SvmParams {
            c,
            gamma,
            tol: 1e-6,
            max_passes: 20,
            seed: 7,
        }
    }

    #[test]
    fn kernel_values() {
        assert_eq!(
            rbf_kernel(&fv(&[1, 0, 1]), &fv(&[1, 0, 1]), 0.3).unwrap(),
            1.0
        );
        let v = rbf_kernel(&fv(&[1, 0]), &fv(&[0, 1]), 0.5).unwrap();
        assert!((v - 0.367_879_441_171_442_3).abs() < 1e-12);
        let tiny = rbf_kernel(&fv(&[1, 1, 1]), &fv(&[0, 0, 0]), 1e-9).unwrap();
        assert!((tiny - 1.0).abs() < 1e-8);
        assert!(rbf_kernel(&fv(&[1]), &fv(&[1, 0]), 1.0).is_err());
    }

    #[test]
    fn two_point_problem_closed_form() {
        // With K12 = e^-2 the dual reduces to max 2a - a^2 (1 - e^-2).
        let data = vec![(fv(&[0, 0]), -1), (fv(&[1, 1]), 1)];
        let m = train_svm(&data, &params(10.0, 1.0)).unwrap();
        let expect = 1.0 / (1.0 - (-2.0f64).exp());
        assert_eq!(m.alphas.len(), 2);
        assert!((m.alphas[0] - expect).abs() < 1e-9);
        assert!((m.alphas[1] - expect).abs() < 1e-9);
        assert!(m.bias.abs() < 1e-12);
        let (l0, v0) = predict(&m, &fv(&[0, 0])).unwrap();
        let (l1, v1) = predict(&m, &fv(&[1, 1])).unwrap();
        assert_eq!((l0, l1), (-1, 1));
        assert!((v0 + 1.0).abs() < 1e-9 && (v1 - 1.0).abs() < 1e-9);
        // Equidistant point: decision value is exactly zero and ties go to +1.
        let (l, v) = predict(&m, &fv(&[1, 0])).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(l, 1);
    }

    #[test]
    fn duplicate_point_with_both_labels_saturates() {
        let data = vec![(fv(&[1, 0]), 1), (fv(&[1, 0]), -1)];
        let m = train_svm(&data, &params(0.5, 1.0)).unwrap();
        assert_eq!(m.alphas, vec![0.5, 0.5]);
        assert!(m.bias.abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let one = vec![(fv(&[1]), 1), (fv(&[0]), 1)];
        assert!(matches!(
            train_svm(&one, &params(1.0, 1.0)),
            Err(ClassifierError::SingleClass)
        ));
        let two = vec![(fv(&[1]), 1), (fv(&[0]), -1)];
        assert!(train_svm(&two, &params(0.0, 1.0)).is_err());
        assert!(train_svm(&two, &params(1.0, -1.0)).is_err());
        assert!(train_svm(&two[..1], &params(1.0, 1.0)).is_err());
        let m = train_svm(&two, &params(1.0, 1.0)).unwrap();
        assert!(predict(&m, &fv(&[1, 0])).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let data: Vec<(FeatureVector, i8)> = (0..16u8)
            .map(|v| {
                let bits = vec![v & 1, (v >> 1) & 1, (v >> 2) & 1, (v >> 3) & 1];
                let label = if (v & 1) ^ ((v >> 2) & 1) == 1 { 1 } else { -1 };
                (fv(&bits), label)
            })
            .collect();
        let p = params(5.0, 0.7);
        assert_eq!(train_svm(&data, &p).unwrap(), train_svm(&data, &p).unwrap());
    }
}
