use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::data::AffectLabel;
use crate::linalg::solve_spd;
use crate::{Error, Result};

/// Fisher discriminant `f(x) = w.x + b`, positive for High.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaFit {
    pub w: Array1<f64>,
    pub b: f64,
}

/// Shrinkage LDA. The pooled within-class covariance `S` is replaced by
/// `(1 - s) S + s (tr S / d) I`; then `w = Sigma^-1 (mu_H - mu_L)` and
/// `b = -w.(mu_H + mu_L)/2 + ln(n_H / n_L)`.
pub fn fit_lda(x: ArrayView2<'_, f64>, y: &[AffectLabel], shrinkage: f64) -> Result<LdaFit> {
    if !(0.0..=1.0).contains(&shrinkage) {
        return Err(Error::InvalidParameter(format!("shrinkage {shrinkage} outside [0, 1]")));
    }
    let (n, d) = x.dim();
    let hi: Vec<usize> = (0..n).filter(|&i| y[i] == AffectLabel::High).collect();
    let lo: Vec<usize> = (0..n).filter(|&i| y[i] == AffectLabel::Low).collect();
    if hi.is_empty() || lo.is_empty() {
        return Err(Error::SingleClass);
    }
    let mu_h = x.select(Axis(0), &hi).mean_axis(Axis(0)).expect("non-empty");
    let mu_l = x.select(Axis(0), &lo).mean_axis(Axis(0)).expect("non-empty");

    // Within-class deviations, one row per item.
    let mut u = x.to_owned();
    for (i, mut row) in u.rows_mut().into_iter().enumerate() {
        row -= if y[i] == AffectLabel::High { &mu_h } else { &mu_l };
    }
    let dof = (n.saturating_sub(2)).max(1) as f64;
    let trace = u.iter().map(|v| v * v).sum::<f64>() / dof;
    let a = shrinkage * trace / d as f64;
    let s = (1.0 - shrinkage) / dof;
    let diff = &mu_h - &mu_l;

    let w = if a > 0.0 && (s == 0.0 || d > n) {
        // Woodbury: (aI + s U^T U)^-1 v = (v - U^T (a/s I + U U^T)^-1 U v) / a
        if s == 0.0 {
            &diff / a
        } else {
            let mut inner: Array2<f64> = u.dot(&u.t());
            for i in 0..n {
                inner[[i, i]] += a / s;
            }
            let z = solve_spd(inner.view(), &u.dot(&diff))?;
            (&diff - &u.t().dot(&z)) / a
        }
    } else {
        let mut sigma = u.t().dot(&u) * s;
        for i in 0..d {
            sigma[[i, i]] += a;
        }
        solve_spd(sigma.view(), &diff)?
    };
    let b = -w.dot(&(&mu_h + &mu_l)) / 2.0 + (hi.len() as f64 / lo.len() as f64).ln();
    Ok(LdaFit { w, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    /// Sample pooled covariance computed the textbook way, per class.
    fn oracle_direction(x: &Array2<f64>, y: &[AffectLabel]) -> Array1<f64> {
        let d = x.ncols();
        let mut sums = [Array1::<f64>::zeros(d), Array1::zeros(d)];
        let mut counts = [0usize; 2];
        for (row, l) in x.rows().into_iter().zip(y) {
            let c = usize::from(*l == AffectLabel::High);
            sums[c] += &row;
            counts[c] += 1;
        }
        let means = [&sums[0] / counts[0] as f64, &sums[1] / counts[1] as f64];
        let mut cov = Array2::<f64>::zeros((d, d));
        for (row, l) in x.rows().into_iter().zip(y) {
            let c = usize::from(*l == AffectLabel::High);
            let dev = &row - &means[c];
            for i in 0..d {
                for j in 0..d {
                    cov[[i, j]] += dev[i] * dev[j];
                }
            }
        }
        cov /= (x.nrows() - 2) as f64;
        // 2x2 inverse by cofactors.
        let det = cov[[0, 0]] * cov[[1, 1]] - cov[[0, 1]] * cov[[1, 0]];
        let inv = array![[cov[[1, 1]], -cov[[0, 1]]], [-cov[[1, 0]], cov[[0, 0]]]] / det;
        inv.dot(&(&means[1] - &means[0]))
    }

    #[test]
    fn matches_closed_form_direction() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let chol: Array2<f64> = array![[1.0, 0.0], [0.6, 0.8]];
        let n = 400;
        let y: Vec<AffectLabel> = (0..n)
            .map(|i| if i < n / 2 { AffectLabel::High } else { AffectLabel::Low })
            .collect();
        let mut x = Array2::zeros((n, 2));
        for i in 0..n {
            let z: Array1<f64> = array![StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
            let shift: Array1<f64> = if y[i] == AffectLabel::High { array![1.0, 0.5] } else { array![-1.0, 0.0] };
            x.row_mut(i).assign(&(chol.dot(&z) + shift));
        }
        let fit = fit_lda(x.view(), &y, 0.0).unwrap();
        let oracle = oracle_direction(&x, &y);
        let cos = fit.w.dot(&oracle) / (fit.w.dot(&fit.w).sqrt() * oracle.dot(&oracle).sqrt());
        assert!(cos.clamp(-1.0, 1.0).acos() < 1e-3);
    }

    #[test]
    fn woodbury_matches_direct() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let x = Array2::from_shape_simple_fn((10, 25), || StandardNormal.sample(&mut rng));
        let y: Vec<AffectLabel> = (0..10).map(|i| if i % 2 == 0 { AffectLabel::High } else { AffectLabel::Low }).collect();
        let fast = fit_lda(x.view(), &y, 0.3).unwrap();
        // Direct d x d solve on the same shrunk covariance.
        let mu_h = x.select(Axis(0), &[0, 2, 4, 6, 8]).mean_axis(Axis(0)).unwrap();
        let mu_l = x.select(Axis(0), &[1, 3, 5, 7, 9]).mean_axis(Axis(0)).unwrap();
        let mut u = x.clone();
        for (i, mut r) in u.rows_mut().into_iter().enumerate() {
            r -= if i % 2 == 0 { &mu_h } else { &mu_l };
        }
        let s = u.t().dot(&u) / 8.0;
        let tr: f64 = (0..25).map(|i| s[[i, i]]).sum();
        let mut sigma = &s * 0.7;
        for i in 0..25 {
            sigma[[i, i]] += 0.3 * tr / 25.0;
        }
        let direct = solve_spd(sigma.view(), &(&mu_h - &mu_l)).unwrap();
        for (a, b) in fast.w.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
