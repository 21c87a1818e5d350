use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::linalg::symmetric_eigen;
use crate::{Error, Result};

/// Principal subspace retaining a target fraction of the variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Array1<f64>,
    /// `k x dims`, orthonormal rows.
    pub components: Array2<f64>,
    pub explained_variance: Array1<f64>,
    pub retained_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcaMethod {
    /// Gram matrix when rows < dims, covariance otherwise.
    #[default]
    Auto,
    Gram,
    Covariance,
}

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;

pub fn pca_fit(rows: ArrayView2<'_, f64>, retain: f64) -> Result<PcaModel> {
    pca_fit_with(rows, retain, PcaMethod::Auto)
}

pub fn pca_fit_with(rows: ArrayView2<'_, f64>, retain: f64, method: PcaMethod) -> Result<PcaModel> {
    let (n, d) = rows.dim();
    if n < 2 {
        return Err(Error::InvalidParameter(format!("PCA needs at least 2 rows, got {n}")));
    }
    if !(retain > 0.0 && retain <= 1.0) {
        return Err(Error::InvalidParameter(format!("retain = {retain} outside (0, 1]")));
    }
    if let Some(((row, col), _)) = rows.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    let mean = rows.mean_axis(Axis(0)).expect("n >= 2");
    let centred = &rows - &mean;
    let denom = (n - 1) as f64;
    let use_gram = match method {
        PcaMethod::Auto => n < d,
        PcaMethod::Gram => true,
        PcaMethod::Covariance => false,
    };

    let (values, vectors) = if use_gram {
        let gram = centred.dot(&centred.t());
        let (vals, u) = symmetric_eigen(gram.view());
        let top = vals.first().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| top > 0.0 && vals[i] > top * RANK_TOL).collect();
        let mut v = Array2::zeros((keep.len(), d));
        for (r, &i) in keep.iter().enumerate() {
            let col = centred.t().dot(&u.column(i)) / vals[i].sqrt();
            v.row_mut(r).assign(&col);
        }
        orthonormalise(&mut v);
        (Array1::from_iter(keep.iter().map(|&i| vals[i] / denom)), v)
    } else {
        let cov = centred.t().dot(&centred) / denom;
        let (vals, u) = symmetric_eigen(cov.view());
        let top = vals.first().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| top > 0.0 && vals[i] > top * RANK_TOL).collect();
        let mut v = Array2::zeros((keep.len(), d));
        for (r, &i) in keep.iter().enumerate() {
            v.row_mut(r).assign(&u.column(i));
        }
        (Array1::from_iter(keep.iter().map(|&i| vals[i])), v)
    };
    if values.is_empty() {
        return Err(Error::RankZero);
    }

    let total_variance = centred.iter().map(|v| v * v).sum::<f64>() / denom;
    let mut cumulative = 0.0;
    let mut k = values.len();
    for (i, v) in values.iter().enumerate() {
        cumulative += v;
        if cumulative / total_variance >= retain - 1e-12 {
            k = i + 1;
            break;
        }
    }
    let mut components = vectors.slice(ndarray::s![..k, ..]).to_owned();
    for mut row in components.rows_mut() {
        let pivot = row.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        if pivot < 0.0 {
            row.mapv_inplace(|v| -v);
        }
    }
    let explained = values.slice(ndarray::s![..k]).to_owned();
    let retained_fraction = (explained.sum() / total_variance).min(1.0);
    Ok(PcaModel {
        mean,
        components,
        explained_variance: explained,
        retained_fraction,
    })
}

/// Modified Gram-Schmidt on the rows, in order.
fn orthonormalise(v: &mut Array2<f64>) {
    for i in 0..v.nrows() {
        for j in 0..i {
            let proj = v.row(i).dot(&v.row(j));
            let rj = v.row(j).to_owned();
            v.row_mut(i).scaled_add(-proj, &rj);
        }
        let norm = v.row(i).dot(&v.row(i)).sqrt();
        if norm > 0.0 {
            v.row_mut(i).mapv_inplace(|x| x / norm);
        }
    }
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn dims(&self) -> usize {
        self.mean.len()
    }

    /// Projects rows onto the components: `(X - mean) C^T`.
    pub fn apply(&self, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if rows.ncols() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: rows.ncols(),
            });
        }
        Ok((&rows - &self.mean).dot(&self.components.t()))
    }

    pub fn reconstruct(&self, scores: ArrayView2<'_, f64>) -> Array2<f64> {
        scores.dot(&self.components) + &self.mean
    }
}

pub fn pca_apply(model: &PcaModel, rows: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    model.apply(rows)
}
