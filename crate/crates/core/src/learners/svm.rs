use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::Decision;
use crate::data::AffectLabel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
        match self {
            Kernel::Linear => a.dot(&b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

pub fn kernel_matrix(x: ArrayView2<'_, f64>, kernel: Kernel) -> Array2<f64> {
    let gram = x.dot(&x.t());
    match kernel {
        Kernel::Linear => gram,
        Kernel::Rbf { gamma } => {
            let n = x.nrows();
            let sq: Vec<f64> = (0..n).map(|i| gram[[i, i]]).collect();
            Array2::from_shape_fn((n, n), |(i, j)| {
                let d2 = (sq[i] + sq[j] - 2.0 * gram[[i, j]]).max(0.0);
                (-gamma * d2).exp()
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoConfig {
    pub c: f64,
    /// Maximal KKT violation at termination.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            c: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `sum alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    /// `max_{I_up} -y G - min_{I_low} -y G` at exit.
    pub kkt_gap: f64,
}

const TAU: f64 = 1e-12;

/// Dual C-SVM by sequential minimal optimization with second-order working
/// set selection. `y` holds +1/-1.
pub fn smo_solve(k: &Array2<f64>, y: &[f64], cfg: &SmoConfig) -> SmoSolution {
    let n = y.len();
    let c = cfg.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * k[[i, j]];
    let in_up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < c) || (y[t] < 0.0 && a[t] > 0.0);
    let in_low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < c);

    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    while iterations < cfg.max_iter {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(t, &alpha) && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(t, &alpha) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX {
                let b = gmax - v;
                if b > 0.0 {
                    let a = k[[i, i]] + k[[t, t]] - 2.0 * k[[i, t]];
                    let a = if a > 0.0 { a } else { TAU };
                    let obj = -(b * b) / a;
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap < cfg.tol {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (k[[i, i]] + k[[j, j]] + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k[[i, i]] + k[[j, j]] - 2.0 * q(i, j) * y[i] * y[j]).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(i, t) * di + q(j, t) * dj;
        }
    }

    // Offset from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] > 0.0 {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    SmoSolution {
        alpha,
        rho,
        iterations,
        kkt_gap: gap,
    }
}

fn signs(y: &[AffectLabel]) -> Vec<f64> {
    y.iter().map(|l| l.sign()).collect()
}

/// Trains on all rows and stores either the primal weights (linear kernel)
/// or the support vectors.
pub(crate) fn fit_decision(x: ArrayView2<'_, f64>, y: &[AffectLabel], kernel: Kernel, c: f64) -> Result<Decision> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C = {c} must be positive")));
    }
    let ys = signs(y);
    let k = kernel_matrix(x, kernel);
    let sol = smo_solve(&k, &ys, &SmoConfig { c, ..SmoConfig::default() });
    let coef: Vec<f64> = sol.alpha.iter().zip(&ys).map(|(a, y)| a * y).collect();
    Ok(match kernel {
        Kernel::Linear => {
            let w = x.t().dot(&Array1::from(coef));
            Decision::Linear { w, b: -sol.rho }
        }
        Kernel::Rbf { gamma } => {
            let sv: Vec<usize> = (0..ys.len()).filter(|&i| sol.alpha[i] > 0.0).collect();
            Decision::Kernel {
                support: x.select(Axis(0), &sv),
                coef: Array1::from_iter(sv.iter().map(|&i| coef[i])),
                b: -sol.rho,
                gamma,
            }
        }
    })
}

/// Deterministic stratified assignment: the i-th item of each class goes to
/// fold `i mod folds`.
pub(crate) fn interleaved_folds(y: &[AffectLabel], folds: usize) -> Vec<usize> {
    let mut seen = [0usize; 2];
    y.iter()
        .map(|l| {
            let c = usize::from(*l == AffectLabel::High);
            let f = seen[c] % folds;
            seen[c] += 1;
            f
        })
        .collect()
}

/// Decision values for every training item from models that did not see it.
/// Falls back to in-sample values when a class is too small to split.
pub(crate) fn out_of_fold_decisions(x: ArrayView2<'_, f64>, y: &[AffectLabel], kernel: Kernel, c: f64) -> Result<Vec<f64>> {
    const FOLDS: usize = 5;
    let highs = y.iter().filter(|l| **l == AffectLabel::High).count();
    let lows = y.len() - highs;
    if highs.min(lows) < FOLDS {
        let d = fit_decision(x, y, kernel, c)?;
        return Ok(x.rows().into_iter().map(|r| d.value(r)).collect());
    }
    let fold = interleaved_folds(y, FOLDS);
    let mut out = vec![0.0; y.len()];
    for f in 0..FOLDS {
        let train: Vec<usize> = (0..y.len()).filter(|&i| fold[i] != f).collect();
        let test: Vec<usize> = (0..y.len()).filter(|&i| fold[i] == f).collect();
        let ty: Vec<AffectLabel> = train.iter().map(|&i| y[i]).collect();
        let d = fit_decision(x.select(Axis(0), &train).view(), &ty, kernel, c)?;
        for &i in &test {
            out[i] = d.value(x.row(i));
        }
    }
    Ok(out)
}

/// Logistic map `P(High | f) = 1 / (1 + exp(a f + b))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn probability(&self, f: f64) -> f64 {
        super::sigmoid(-(self.a * f + self.b))
    }
}

/// Platt scaling by Newton's method with backtracking on regularized
/// targets `(N+ + 1)/(N+ + 2)` and `1/(N- + 2)`.
pub fn fit_platt(dec: &[f64], y: &[AffectLabel]) -> Platt {
    let prior1 = y.iter().filter(|l| **l == AffectLabel::High).count() as f64;
    let prior0 = y.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = y.iter().map(|l| if *l == AffectLabel::High { hi } else { lo }).collect();

    let objective = |a: f64, b: f64| -> f64 {
        dec.iter()
            .zip(&t)
            .map(|(f, ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (f, ti) in dec.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            break;
        }
    }
    Platt { a, b }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn xor() -> (Array2<f64>, Vec<AffectLabel>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for (cx, cy, l) in [(1.0f64, 1.0f64, AffectLabel::High), (-1.0, -1.0, AffectLabel::High), (1.0, -1.0, AffectLabel::Low), (-1.0, 1.0, AffectLabel::Low)] {
            for k in 0..5 {
                let off = 0.1 * k as f64;
                rows.extend([cx + off * cx.signum() * 0.5, cy - off * 0.3]);
                y.push(l);
            }
        }
        (Array2::from_shape_vec((20, 2), rows).unwrap(), y)
    }

    fn kkt_gap(k: &Array2<f64>, y: &[f64], sol: &SmoSolution, c: f64) -> f64 {
        // Independent recomputation of the maximal violating pair.
        let n = y.len();
        let g: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| y[i] * y[j] * k[[i, j]] * sol.alpha[j]).sum::<f64>() - 1.0)
            .collect();
        let up = (0..n).filter(|&t| (y[t] > 0.0 && sol.alpha[t] < c) || (y[t] < 0.0 && sol.alpha[t] > 0.0));
        let low = (0..n).filter(|&t| (y[t] > 0.0 && sol.alpha[t] > 0.0) || (y[t] < 0.0 && sol.alpha[t] < c));
        let m = up.map(|t| -y[t] * g[t]).fold(f64::NEG_INFINITY, f64::max);
        let mm = low.map(|t| -y[t] * g[t]).fold(f64::INFINITY, f64::min);
        m - mm
    }

    #[test]
    fn two_point_problem() {
        // Points at -1 and +1: w = 1, b = 0, alpha = 0.5 each.
        let x = array![[-1.0], [1.0]];
        let y = [-1.0, 1.0];
        let sol = smo_solve(&kernel_matrix(x.view(), Kernel::Linear), &y, &SmoConfig { c: 10.0, ..SmoConfig::default() });
        assert!((sol.alpha[0] - 0.5).abs() < 1e-12 && (sol.alpha[1] - 0.5).abs() < 1e-12);
        assert!(sol.rho.abs() < 1e-12);
    }

    #[test]
    fn box_and_kkt() {
        let (x, y) = xor();
        let ys = signs(&y);
        for kernel in [Kernel::Linear, Kernel::Rbf { gamma: 0.5 }] {
            for c in [0.1, 1.0, 100.0] {
                let k = kernel_matrix(x.view(), kernel);
                let sol = smo_solve(&k, &ys, &SmoConfig { c, ..SmoConfig::default() });
                assert!(sol.alpha.iter().all(|a| (0.0..=c).contains(a)));
                let eq: f64 = sol.alpha.iter().zip(&ys).map(|(a, y)| a * y).sum();
                assert!(eq.abs() < 1e-9);
                assert!(kkt_gap(&k, &ys, &sol, c) <= 1e-3);
            }
        }
    }

    #[test]
    fn xor_needs_kernel() {
        let (x, y) = xor();
        let rate = |d: &Decision| {
            x.rows()
                .into_iter()
                .zip(&y)
                .filter(|(r, l)| AffectLabel::from_score(d.value(r.view())) == **l)
                .count() as f64
                / y.len() as f64
        };
        let rbf = fit_decision(x.view(), &y, Kernel::Rbf { gamma: 1.0 }, 100.0).unwrap();
        assert_eq!(rate(&rbf), 1.0);
        let lin = fit_decision(x.view(), &y, Kernel::Linear, 100.0).unwrap();
        assert!(rate(&lin) <= 0.75);
    }

    #[test]
    fn platt_is_monotone_and_symmetric() {
        let dec: Vec<f64> = (-10..=10).map(|i| i as f64 / 2.0).filter(|v: &f64| *v != 0.0).collect();
        let y: Vec<AffectLabel> = dec.iter().map(|d| AffectLabel::from_score(*d)).collect();
        let p = fit_platt(&dec, &y);
        assert!(p.a < 0.0);
        assert!((p.probability(0.0) - 0.5).abs() < 1e-6);
        assert!(p.probability(3.0) > p.probability(1.0));
    }

    #[test]
    fn interleaved_folds_are_stratified() {
        let y: Vec<AffectLabel> = (0..20).map(|i| if i < 10 { AffectLabel::High } else { AffectLabel::Low }).collect();
        let f = interleaved_folds(&y, 5);
        for k in 0..5 {
            assert_eq!(f.iter().filter(|&&v| v == k).count(), 4);
        }
    }
}
