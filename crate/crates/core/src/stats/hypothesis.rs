use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;

use super::{TestMethod, TestResult};
use crate::{Error, Result};

/// Sample Pearson correlation with a two-sided p-value from the t
/// distribution on `n - 2` degrees of freedom.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            what: "pearson_r inputs",
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!("pearson_r needs at least 3 pairs, got {n}")));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy <= 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if (1.0 - r.abs()) < 1e-15 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
        (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
    };
    Ok(TestResult {
        statistic: r,
        p_value,
        method: TestMethod::PearsonR,
    })
}

/// How the rank-sum p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WilcoxonMethod {
    /// Exact when the pooled sample has at most 12 values, normal otherwise.
    Auto,
    Exact,
    Normal,
}

const EXACT_LIMIT: usize = 12;

/// Two-sided Wilcoxon rank-sum test. The statistic is the sum of the
/// midranks of `x` in the pooled sample.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64]) -> Result<TestResult> {
    wilcoxon_rank_sum_with(x, y, WilcoxonMethod::Auto)
}

pub fn wilcoxon_rank_sum_with(x: &[f64], y: &[f64], method: WilcoxonMethod) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("wilcoxon_rank_sum sample"));
    }
    let (nx, ny) = (x.len(), y.len());
    let n = nx + ny;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, tie_sizes) = midranks(&pooled);
    let w: f64 = ranks[..nx].iter().sum();
    let expected = nx as f64 * (n + 1) as f64 / 2.0;

    let exact = match method {
        WilcoxonMethod::Auto => n <= EXACT_LIMIT,
        WilcoxonMethod::Exact => true,
        WilcoxonMethod::Normal => false,
    };
    let p_value = if exact {
        exact_p(&ranks, nx, w, expected)
    } else {
        let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum();
        let nf = n as f64;
        let var = nx as f64 * ny as f64 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
        if var <= 0.0 {
            1.0
        } else {
            let z = ((w - expected).abs() - 0.5).max(0.0) / var.sqrt();
            erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
        }
    };
    Ok(TestResult {
        statistic: w,
        p_value,
        method: TestMethod::WilcoxonRankSum,
    })
}

/// Midranks (1-based) and the sizes of tie groups.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        ties.push(end - start);
        start = end;
    }
    (ranks, ties)
}

/// Exact null distribution of the rank sum over all `C(n, nx)` equally likely
/// assignments, counted by dynamic programming on doubled (integral) ranks.
fn exact_p(ranks: &[f64], nx: usize, observed: f64, expected: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[j][s]: subsets of size j with doubled sum s
    let mut counts = vec![vec![0.0f64; max_sum + 1]; nx + 1];
    counts[0][0] = 1.0;
    for &r in &doubled {
        for j in (1..=nx).rev() {
            for s in (r..=max_sum).rev() {
                let add = counts[j - 1][s - r];
                if add != 0.0 {
                    counts[j][s] += add;
                }
            }
        }
    }
    let total: f64 = counts[nx].iter().sum();
    let obs_dev = (2.0 * observed - 2.0 * expected).abs();
    let extreme: f64 = counts[nx]
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as f64 - 2.0 * expected).abs() >= obs_dev - 1e-9)
        .map(|(_, c)| c)
        .sum();
    (extreme / total).clamp(0.0, 1.0)
}

/// Benjamini-Hochberg step-up procedure at false discovery rate `q`.
/// Returns a rejection mask aligned with `p`.
pub fn bh_fdr(p: &[f64], q: f64) -> Result<Vec<bool>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} outside (0, 1)")));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidParameter(format!("p-value {bad} outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    let k_star = (1..=m)
        .rev()
        .find(|&k| p[order[k - 1]] <= k as f64 * q / m as f64);
    let mut reject = vec![false; m];
    if let Some(k) = k_star {
        for &i in &order[..k] {
            reject[i] = true;
        }
    }
    Ok(reject)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(pearson_r(&x, &x).unwrap().statistic, 1.0, epsilon = 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson_r(&x, &neg).unwrap().statistic, -1.0, epsilon = 1e-12);
        let r = pearson_r(&x, &[2.0, 1.0, 4.0, 3.0]).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.6, epsilon = 1e-12);
        // t = 0.6 * sqrt(2 / 0.64) = 1.0607; two-sided p on 2 df = 0.4
        assert_abs_diff_eq!(r.p_value, 0.4, epsilon = 1e-9);
        assert!(matches!(pearson_r(&x, &[1.0; 4]), Err(Error::ZeroVariance(_))));
        assert!(pearson_r(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn wilcoxon_exact_extreme() {
        let r = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert_abs_diff_eq!(r.p_value, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn wilcoxon_same_sample() {
        let x = [1.0, 2.0, 3.0, 5.0];
        let r = wilcoxon_rank_sum(&x, &x).unwrap();
        assert!(r.p_value >= 0.99);
    }

    #[test]
    fn wilcoxon_large_shift() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let norm = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..200).map(|_| norm.sample(&mut rng)).collect();
        let y: Vec<f64> = (0..200).map(|_| norm.sample(&mut rng) + 1.0).collect();
        let r = wilcoxon_rank_sum(&x, &y).unwrap();
        assert!(r.p_value < 0.001, "p = {}", r.p_value);
    }

    #[test]
    fn wilcoxon_all_tied() {
        let r = wilcoxon_rank_sum_with(&[2.0; 10], &[2.0; 10], WilcoxonMethod::Normal).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn midranks_with_ties() {
        let (r, t) = midranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(t, vec![1, 1, 2]);
    }

    #[test]
    fn bh_examples() {
        assert_eq!(bh_fdr(&[0.01, 0.02, 0.04, 0.8], 0.05).unwrap(), vec![true, true, false, false]);
        assert_eq!(bh_fdr(&[1.0; 5], 0.05).unwrap(), vec![false; 5]);
        assert_eq!(bh_fdr(&[0.0; 5], 0.05).unwrap(), vec![true; 5]);
        assert!(bh_fdr(&[0.5], 1.5).is_err());
    }

    proptest! {
        #[test]
        fn bh_monotone_in_q(p in prop::collection::vec(0.0f64..=1.0, 1..30), q1 in 0.001f64..0.5, dq in 0.0f64..0.49) {
            let a = bh_fdr(&p, q1).unwrap();
            let b = bh_fdr(&p, q1 + dq).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(!x || *y);
            }
        }

        #[test]
        fn exact_and_normal_agree_balanced(seed in any::<u64>(), n in 10usize..=14) {
            use rand::seq::SliceRandom;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut pool: Vec<f64> = (0..2 * n).map(|i| i as f64).collect();
            pool.shuffle(&mut rng);
            let (x, y) = pool.split_at(n);
            let e = wilcoxon_rank_sum_with(x, y, WilcoxonMethod::Exact).unwrap();
            let a = wilcoxon_rank_sum_with(x, y, WilcoxonMethod::Normal).unwrap();
            prop_assert!((e.p_value - a.p_value).abs() < 0.05, "exact {} normal {}", e.p_value, a.p_value);
        }

        #[test]
        fn pearson_bounds(xy in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)) {
            let x: Vec<f64> = xy.iter().map(|p| p.0).collect();
            let y: Vec<f64> = xy.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson_r(&x, &y) {
                prop_assert!((-1.0..=1.0).contains(&r.statistic));
                prop_assert!((0.0..=1.0).contains(&r.p_value));
            }
        }
    }
}
