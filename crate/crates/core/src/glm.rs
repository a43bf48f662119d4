//! Ridge-penalized logistic and multinomial logistic regression, fitted by
//! Newton iterations (iteratively reweighted least squares). Convergence is
//! declared when every component of the penalized score drops below 1e-8.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::stats::expit;

pub const SCORE_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 100;
/// Ridge used by callers to recover from separation.
pub const SEPARATION_RIDGE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coef: DVector<f64>,
    pub iterations: usize,
    pub max_score: f64,
}

impl LogisticFit {
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let z: f64 = row.iter().zip(self.coef.iter()).map(|(x, b)| x * b).sum();
        expit(z)
    }
}

/// Maximize the Bernoulli log-likelihood minus `ridge/2 * ||beta||^2`.
///
/// `labels` must be 0/1. Fails with [`Error::Separation`] when the
/// unpenalized fit diverges (callers retry with [`SEPARATION_RIDGE`])
/// and with [`Error::RankDeficient`] when the weighted normal equations
/// cannot be factorized.
pub fn fit_logistic(x: &DMatrix<f64>, labels: &[f64], ridge: f64) -> Result<LogisticFit> {
    let n = x.nrows();
    let d = x.ncols();
    assert_eq!(labels.len(), n, "labels must match design rows");
    if n == 0 {
        return Err(Error::RankDeficient {
            detail: "no rows".into(),
        });
    }

    let mut beta = DVector::zeros(d);
    let mut eta = DVector::zeros(n);
    let mut prob = vec![0.0; n];
    let mut ll = penalized_ll(&eta, labels, &beta, ridge);

    for iter in 1..=MAX_ITER {
        for (pi, e) in prob.iter_mut().zip(eta.iter()) {
            *pi = expit(*e);
        }
        // score = X'(y - p) - ridge * beta
        let mut score = DVector::zeros(d);
        for i in 0..n {
            let resid = labels[i] - prob[i];
            for j in 0..d {
                score[j] += x[(i, j)] * resid;
            }
        }
        score -= ridge * &beta;
        let max_score = score.amax();
        if max_score < SCORE_TOL {
            // A perfectly classified training set means the unpenalized MLE
            // does not exist; the score still vanishes as beta diverges.
            if ridge == 0.0 {
                let perfect = labels
                    .iter()
                    .zip(prob.iter())
                    .all(|(y, p)| (y - p).abs() < 1e-5);
                if perfect {
                    return Err(Error::Separation);
                }
            }
            return Ok(LogisticFit {
                coef: beta,
                iterations: iter - 1,
                max_score,
            });
        }

        // Hessian = X' W X + ridge I with W = p(1-p)
        let mut hess = DMatrix::zeros(d, d);
        for i in 0..n {
            let w = prob[i] * (1.0 - prob[i]);
            if w <= 0.0 {
                continue;
            }
            for j in 0..d {
                let xw = x[(i, j)] * w;
                for k in j..d {
                    hess[(j, k)] += xw * x[(i, k)];
                }
            }
        }
        for j in 0..d {
            hess[(j, j)] += ridge;
            for k in 0..j {
                hess[(j, k)] = hess[(k, j)];
            }
        }
        let chol = Cholesky::new(hess).ok_or_else(|| {
            if ridge == 0.0 {
                Error::Separation
            } else {
                Error::RankDeficient {
                    detail: "logistic normal equations not positive definite".into(),
                }
            }
        })?;
        let step = chol.solve(&score);

        // Step halving to keep the penalized log-likelihood non-decreasing.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &beta + scale * &step;
            let cand_eta = x * &cand;
            let cand_ll = penalized_ll(&cand_eta, labels, &cand, ridge);
            if cand_ll >= ll - 1e-12 {
                beta = cand;
                eta = cand_eta;
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
        if ridge == 0.0 && beta.amax() > 1e4 {
            return Err(Error::Separation);
        }
    }

    // Ran out of iterations without the score dropping below tolerance.
    if ridge == 0.0 {
        Err(Error::Separation)
    } else {
        // With a ridge the optimum exists; report the final state.
        for (pi, e) in prob.iter_mut().zip(eta.iter()) {
            *pi = expit(*e);
        }
        let mut score = DVector::zeros(x.ncols());
        for i in 0..n {
            let resid = labels[i] - prob[i];
            for j in 0..x.ncols() {
                score[j] += x[(i, j)] * resid;
            }
        }
        score -= ridge * &beta;
        Ok(LogisticFit {
            max_score: score.amax(),
            iterations: MAX_ITER,
            coef: beta,
        })
    }
}

/// Ordinary least squares via the normal equations (tiny jitter for
/// near-singular designs; hard failures surface as RankDeficient).
pub fn fit_linear(x: &DMatrix<f64>, y: &[f64]) -> Result<DVector<f64>> {
    let d = x.ncols();
    let mut gram = x.transpose() * x;
    let jitter = 1e-10 * (gram.trace() / d as f64).max(1.0);
    for i in 0..d {
        gram[(i, i)] += jitter;
    }
    let xty = x.transpose() * DVector::from_column_slice(y);
    let chol = Cholesky::new(gram).ok_or_else(|| Error::RankDeficient {
        detail: "linear normal equations not positive definite".into(),
    })?;
    Ok(chol.solve(&xty))
}

fn penalized_ll(eta: &DVector<f64>, labels: &[f64], beta: &DVector<f64>, ridge: f64) -> f64 {
    let mut ll = 0.0;
    for (e, &y) in eta.iter().zip(labels.iter()) {
        // y*eta - log(1 + exp(eta)), stable on both tails
        let log1pexp = if *e > 0.0 {
            e + (-e).exp().ln_1p()
        } else {
            e.exp().ln_1p()
        };
        ll += y * e - log1pexp;
    }
    ll - 0.5 * ridge * beta.norm_squared()
}

#[derive(Debug, Clone)]
pub struct MultinomialFit {
    /// One coefficient vector per non-reference class (classes 0..m-2);
    /// class m-1 is the reference with coefficients fixed at zero.
    pub coef: Vec<DVector<f64>>,
    pub n_classes: usize,
    pub iterations: usize,
    pub max_score: f64,
}

impl MultinomialFit {
    /// Class probabilities via softmax against the reference class.
    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self
            .coef
            .iter()
            .map(|b| row.iter().zip(b.iter()).map(|(x, c)| x * c).sum::<f64>())
            .collect();
        z.push(0.0);
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
        let total: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= total;
        }
        probs
    }
}

/// Multinomial logistic regression with softmax link and the last class as
/// reference. Reduces exactly to `fit_logistic` when `n_classes == 2`.
pub fn fit_multinomial(
    x: &DMatrix<f64>,
    labels: &[usize],
    n_classes: usize,
    ridge: f64,
) -> Result<MultinomialFit> {
    let n = x.nrows();
    let d = x.ncols();
    assert_eq!(labels.len(), n);
    assert!(n_classes >= 2, "need at least two classes");
    let m = n_classes - 1; // free classes
    let dim = m * d;

    let mut theta = DVector::zeros(dim);
    let mut ll = multinomial_pll(x, labels, &theta, m, ridge);

    for iter in 1..=MAX_ITER {
        let probs = class_probs(x, &theta, m);
        // score_j = X'(I(y=j) - p_j) - ridge * beta_j, stacked
        let mut score = DVector::zeros(dim);
        for i in 0..n {
            for j in 0..m {
                let resid = if labels[i] == j { 1.0 } else { 0.0 } - probs[(i, j)];
                for c in 0..d {
                    score[j * d + c] += x[(i, c)] * resid;
                }
            }
        }
        score -= ridge * &theta;
        let max_score = score.amax();
        if max_score < SCORE_TOL {
            if ridge == 0.0 {
                let perfect = (0..n).all(|i| {
                    let p_label = if labels[i] < m {
                        probs[(i, labels[i])]
                    } else {
                        1.0 - (0..m).map(|j| probs[(i, j)]).sum::<f64>()
                    };
                    p_label > 1.0 - 1e-5
                });
                if perfect {
                    return Err(Error::Separation);
                }
            }
            return Ok(MultinomialFit {
                coef: unstack(&theta, m, d),
                n_classes,
                iterations: iter - 1,
                max_score,
            });
        }

        let mut hess = DMatrix::zeros(dim, dim);
        for i in 0..n {
            for j in 0..m {
                let pj = probs[(i, j)];
                for k in j..m {
                    let w = if j == k {
                        pj * (1.0 - pj)
                    } else {
                        -pj * probs[(i, k)]
                    };
                    if w == 0.0 {
                        continue;
                    }
                    for c in 0..d {
                        let xw = x[(i, c)] * w;
                        for e in 0..d {
                            hess[(j * d + c, k * d + e)] += xw * x[(i, e)];
                        }
                    }
                }
            }
        }
        for a in 0..dim {
            hess[(a, a)] += ridge;
            for b in 0..a {
                let ja = a / d;
                let jb = b / d;
                if jb < ja {
                    hess[(a, b)] = hess[(b, a)];
                }
            }
        }
        // mirror upper block triangle into lower
        for a in 0..dim {
            for b in (a + 1)..dim {
                hess[(b, a)] = hess[(a, b)];
            }
        }

        let chol = Cholesky::new(hess).ok_or_else(|| {
            if ridge == 0.0 {
                Error::Separation
            } else {
                Error::RankDeficient {
                    detail: "multinomial normal equations not positive definite".into(),
                }
            }
        })?;
        let step = chol.solve(&score);

        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &theta + scale * &step;
            let cand_ll = multinomial_pll(x, labels, &cand, m, ridge);
            if cand_ll >= ll - 1e-12 {
                theta = cand;
                ll = cand_ll;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
        if ridge == 0.0 && theta.amax() > 1e4 {
            return Err(Error::Separation);
        }
    }

    if ridge == 0.0 {
        Err(Error::Separation)
    } else {
        let probs = class_probs(x, &theta, m);
        let mut score = DVector::zeros(dim);
        for i in 0..n {
            for j in 0..m {
                let resid = if labels[i] == j { 1.0 } else { 0.0 } - probs[(i, j)];
                for c in 0..d {
                    score[j * d + c] += x[(i, c)] * resid;
                }
            }
        }
        score -= ridge * &theta;
        Ok(MultinomialFit {
            max_score: score.amax(),
            coef: unstack(&theta, m, d),
            n_classes,
            iterations: MAX_ITER,
        })
    }
}

fn unstack(theta: &DVector<f64>, m: usize, d: usize) -> Vec<DVector<f64>> {
    (0..m)
        .map(|j| DVector::from_iterator(d, (0..d).map(|c| theta[j * d + c])))
        .collect()
}

/// n-by-m matrix of non-reference class probabilities.
fn class_probs(x: &DMatrix<f64>, theta: &DVector<f64>, m: usize) -> DMatrix<f64> {
    let n = x.nrows();
    let d = x.ncols();
    let mut probs = DMatrix::zeros(n, m);
    for i in 0..n {
        let mut z = vec![0.0; m + 1];
        for (j, zj) in z.iter_mut().enumerate().take(m) {
            for c in 0..d {
                *zj += x[(i, c)] * theta[j * d + c];
            }
        }
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = z.iter().map(|v| (v - zmax).exp()).collect();
        let total: f64 = exps.iter().sum();
        for j in 0..m {
            probs[(i, j)] = exps[j] / total;
        }
    }
    probs
}

fn multinomial_pll(
    x: &DMatrix<f64>,
    labels: &[usize],
    theta: &DVector<f64>,
    m: usize,
    ridge: f64,
) -> f64 {
    let d = x.ncols();
    let mut ll = 0.0;
    for i in 0..x.nrows() {
        let mut z = vec![0.0; m + 1];
        for (j, zj) in z.iter_mut().enumerate().take(m) {
            for c in 0..d {
                *zj += x[(i, c)] * theta[j * d + c];
            }
        }
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
        ll += z[labels[i]] - lse;
    }
    ll - 0.5 * ridge * theta.norm_squared()
}
