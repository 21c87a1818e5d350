//! Classifiers: shrinkage LDA, SMO-trained linear and RBF SVMs with Platt
//! calibration, sparse graph-regularized multi-task regression and a small
//! 1-D convolutional network.

mod cnn;
mod gradcheck;
mod lda;
mod mtl;
mod svm;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{AffectLabel, FeatureMatrix};
use crate::{Error, Result};

pub use cnn::{cnn_predict_proba, cnn_train, CnnConfig, CnnModel, CnnTrainReport, EarlyStopping};
pub use gradcheck::{cnn_grad_check, grad_check, mtl_grad_check, GradCheckReport};
pub use lda::{fit_lda, LdaFit};
pub use mtl::{
    build_task_graph, mtl_fit, mtl_fit_arrays, mtl_predict, MtlConfig, MtlFitReport, MtlModel, MtlPrediction, MtlProblem,
    TaskAssignment, TaskGraph,
};
pub use svm::{fit_platt, kernel_matrix, smo_solve, Kernel, Platt, SmoConfig, SmoSolution};
pub(crate) use svm::fit_decision;

/// Two-class posterior. Sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub high: f64,
    pub low: f64,
}

impl Posterior {
    pub fn from_high(high: f64) -> Self {
        let high = high.clamp(0.0, 1.0);
        Posterior { high, low: 1.0 - high }
    }

    /// Argmax; an exact tie yields Low.
    pub fn label(&self) -> AffectLabel {
        if self.high > self.low {
            AffectLabel::High
        } else {
            AffectLabel::Low
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShallowKind {
    Lda,
    LinearSvm,
    RbfSvm,
}

impl ShallowKind {
    pub fn name(self) -> &'static str {
        match self {
            ShallowKind::Lda => "lda",
            ShallowKind::LinearSvm => "linear_svm",
            ShallowKind::RbfSvm => "rbf_svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShallowHyper {
    /// SVM box constraint.
    pub c: f64,
    /// RBF width; `None` means `1 / dims`.
    pub gamma: Option<f64>,
    /// LDA covariance shrinkage toward a scaled identity.
    pub shrinkage: f64,
}

impl Default for ShallowHyper {
    fn default() -> Self {
        ShallowHyper {
            c: 1.0,
            gamma: None,
            shrinkage: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Decision {
    Linear { w: Array1<f64>, b: f64 },
    Kernel {
        support: ndarray::Array2<f64>,
        /// `alpha_i * y_i` per support vector.
        coef: Array1<f64>,
        b: f64,
        gamma: f64,
    },
}

impl Decision {
    pub fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        match self {
            Decision::Linear { w, b } => w.dot(&x) + b,
            Decision::Kernel { support, coef, b, gamma } => {
                let mut s = *b;
                for (sv, c) in support.rows().into_iter().zip(coef) {
                    let d2: f64 = sv.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                    s += c * (-gamma * d2).exp();
                }
                s
            }
        }
    }
}

/// LDA or SVM with a logistic map from decision value to posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShallowModel {
    pub kind: ShallowKind,
    pub hyper: ShallowHyper,
    pub dims: usize,
    pub decision: Decision,
    pub calibration: Platt,
}

fn check_training(x: ArrayView2<'_, f64>, y: &[AffectLabel]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            what: "training labels",
            expected: x.nrows(),
            actual: y.len(),
        });
    }
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    let highs = y.iter().filter(|l| **l == AffectLabel::High).count();
    if highs == 0 || highs == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub fn shallow_fit(x: &FeatureMatrix, kind: ShallowKind, hyper: &ShallowHyper) -> Result<ShallowModel> {
    shallow_fit_arrays(x.rows().view(), x.labels(), kind, hyper)
}

pub fn shallow_fit_arrays(
    x: ArrayView2<'_, f64>,
    y: &[AffectLabel],
    kind: ShallowKind,
    hyper: &ShallowHyper,
) -> Result<ShallowModel> {
    check_training(x, y)?;
    let dims = x.ncols();
    let (decision, calibration) = match kind {
        ShallowKind::Lda => {
            let fit = fit_lda(x, y, hyper.shrinkage)?;
            // The discriminant is already a log-odds under the Gaussian model.
            (
                Decision::Linear { w: fit.w, b: fit.b },
                Platt { a: -1.0, b: 0.0 },
            )
        }
        ShallowKind::LinearSvm | ShallowKind::RbfSvm => {
            let kernel = svm_kernel(kind, hyper, dims);
            let decision = svm::fit_decision(x, y, kernel, hyper.c)?;
            let oof = svm::out_of_fold_decisions(x, y, kernel, hyper.c)?;
            let calibration = fit_platt(&oof, y);
            (decision, calibration)
        }
    };
    Ok(ShallowModel {
        kind,
        hyper: *hyper,
        dims,
        decision,
        calibration,
    })
}

pub(crate) fn svm_kernel(kind: ShallowKind, hyper: &ShallowHyper, dims: usize) -> Kernel {
    match kind {
        ShallowKind::RbfSvm => Kernel::Rbf {
            gamma: hyper.gamma.unwrap_or(1.0 / dims.max(1) as f64),
        },
        _ => Kernel::Linear,
    }
}

impl ShallowModel {
    fn check_dims(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn decision_values(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        Ok(x.rows().into_iter().map(|r| self.decision.value(r)).collect())
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Posterior>> {
        Ok(self
            .decision_values(x)?
            .into_iter()
            .map(|f| Posterior::from_high(self.calibration.probability(f)))
            .collect())
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<AffectLabel>> {
        Ok(self.predict_proba(x)?.iter().map(Posterior::label).collect())
    }
}

pub fn shallow_predict_proba(m: &ShallowModel, x: ArrayView2<'_, f64>) -> Result<Vec<Posterior>> {
    m.predict_proba(x)
}
