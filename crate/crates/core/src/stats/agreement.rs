use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{AgreementMethod, AgreementResult};
use crate::data::RatingMatrix;
use crate::{Error, Result};

/// Cohen's kappa between two raters labelling the same items.
pub fn cohen_kappa<T: Ord + Clone>(a: &[T], b: &[T]) -> Result<AgreementResult> {
    if a.is_empty() {
        return Err(Error::Empty("cohen_kappa input"));
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "cohen_kappa labels",
            expected: a.len(),
            actual: b.len(),
        });
    }
    let n = a.len() as f64;
    let mut marg: BTreeMap<&T, (usize, usize)> = BTreeMap::new();
    let mut agree = 0usize;
    for (x, y) in a.iter().zip(b) {
        marg.entry(x).or_default().0 += 1;
        marg.entry(y).or_default().1 += 1;
        if x == y {
            agree += 1;
        }
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = marg
        .values()
        .map(|&(ca, cb)| (ca as f64 / n) * (cb as f64 / n))
        .sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Err(Error::UndefinedKappa);
    }
    Ok(AgreementResult {
        statistic: (p_o - p_e) / (1.0 - p_e),
        method: AgreementMethod::CohenKappa,
    })
}

/// Fleiss' kappa from an items x categories tally grid. Every item must carry
/// the same number of ratings, at least two.
pub fn fleiss_kappa(tallies: &Array2<usize>) -> Result<AgreementResult> {
    let (n_items, _) = tallies.dim();
    if n_items == 0 {
        return Err(Error::Empty("fleiss_kappa tallies"));
    }
    let per_item: Vec<usize> = tallies.rows().into_iter().map(|r| r.sum()).collect();
    let n = per_item[0];
    if let Some(&other) = per_item.iter().find(|&&c| c != n) {
        return Err(Error::UnequalRatings { first: n, other });
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "fleiss_kappa needs at least two ratings per item, got {n}"
        )));
    }
    let nf = n as f64;
    let p_bar = tallies
        .rows()
        .into_iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            (sq - nf) / (nf * (nf - 1.0))
        })
        .sum::<f64>()
        / n_items as f64;
    let total = (n_items * n) as f64;
    let p_e: f64 = tallies
        .columns()
        .into_iter()
        .map(|col| {
            let p = col.sum() as f64 / total;
            p * p
        })
        .sum();
    if (1.0 - p_e).abs() < f64::EPSILON {
        return Err(Error::UndefinedKappa);
    }
    Ok(AgreementResult {
        statistic: (p_bar - p_e) / (1.0 - p_e),
        method: AgreementMethod::FleissKappa,
    })
}

/// Tallies a raters x items label grid into items x categories counts,
/// categories in sorted order. Missing labels are skipped, so items with
/// missing labels make the grid unequal (and [`fleiss_kappa`] rejects it).
pub fn fleiss_tallies<T: Ord + Clone>(labels: &Array2<Option<T>>) -> Array2<usize> {
    let categories: Vec<T> = labels
        .iter()
        .flatten()
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut out = Array2::zeros((labels.ncols(), categories.len()));
    for ((_, item), v) in labels.indexed_iter() {
        if let Some(v) = v {
            let c = categories.binary_search(v).expect("category collected above");
            out[[item, c]] += 1;
        }
    }
    out
}

/// Difference function for Krippendorff's alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    /// Rank distance through the cumulative value frequencies.
    Ordinal,
    /// Squared numeric difference.
    Interval,
}

/// Krippendorff's alpha via the coincidence matrix. Items rated by fewer
/// than two raters do not contribute.
pub fn krippendorff_alpha(m: &RatingMatrix, metric: DistanceMetric) -> Result<AgreementResult> {
    if m.n_raters() < 2 {
        return Err(Error::NoPairableValues);
    }

    // Distinct values in ascending order.
    // Adding 0.0 maps -0.0 to 0.0 so both land in one category.
    let mut values: Vec<f64> = m.values().iter().flatten().map(|x| x + 0.0).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let v = values.len();
    let index = |x: f64| values.binary_search_by(|p| p.total_cmp(&(x + 0.0))).expect("value collected above");

    let mut coincidence = Array2::<f64>::zeros((v, v));
    for unit in m.values().columns() {
        let present: Vec<usize> = unit.iter().flatten().map(|&x| index(x)).collect();
        let m_u = present.len();
        if m_u < 2 {
            continue;
        }
        let w = 1.0 / (m_u - 1) as f64;
        for (a, &c) in present.iter().enumerate() {
            for (b, &k) in present.iter().enumerate() {
                if a != b {
                    coincidence[[c, k]] += w;
                }
            }
        }
    }
    let marginals: Vec<f64> = coincidence.rows().into_iter().map(|r| r.sum()).collect();
    let n: f64 = marginals.iter().sum();
    if n < 2.0 {
        return Err(Error::NoPairableValues);
    }

    let delta2 = |c: usize, k: usize| -> f64 {
        match metric {
            DistanceMetric::Interval => (values[c] - values[k]).powi(2),
            DistanceMetric::Ordinal => {
                let (lo, hi) = if c <= k { (c, k) } else { (k, c) };
                let between: f64 = marginals[lo..=hi].iter().sum();
                (between - (marginals[c] + marginals[k]) / 2.0).powi(2)
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..v {
        for k in 0..v {
            if c == k {
                continue;
            }
            let d = delta2(c, k);
            observed += coincidence[[c, k]] * d;
            expected += marginals[c] * marginals[k] * d;
        }
    }
    if expected <= 0.0 {
        return Err(Error::NoPairableValues);
    }
    Ok(AgreementResult {
        statistic: 1.0 - (n - 1.0) * observed / expected,
        method: match metric {
            DistanceMetric::Ordinal => AgreementMethod::KrippendorffAlphaOrdinal,
            DistanceMetric::Interval => AgreementMethod::KrippendorffAlphaInterval,
        },
    })
}
