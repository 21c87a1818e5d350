//! Metrics, model specifications, repeated stratified cross-validation and
//! weighted decision fusion.

mod cv;
mod fusion;

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use crate::data::{AffectLabel, FeatureMatrix, Quadrant};
use crate::learners::{
    build_task_graph, cnn_train, fit_decision, mtl_fit, shallow_fit, svm_kernel, CnnConfig, CnnModel, MtlConfig, MtlModel,
    Posterior, ShallowHyper, ShallowKind, ShallowModel, TaskAssignment,
};
use crate::{Error, Result};

pub use cv::{cross_validate, stratified_folds, CvConfig, CvReport, CvRun};
pub use fusion::{fuse_posteriors, tune_fusion, west_fuse, FusedScore, FusionConfig, FusionTuning, GridMode};

/// F1 of the `positive` class. Zero when precision and recall are both zero.
pub fn f1_score(pred: &[AffectLabel], truth: &[AffectLabel], positive: AffectLabel) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            what: "predictions",
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (p, t) in pred.iter().zip(truth) {
        match (*p == positive, *t == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fnn > 0 { tp as f64 / (tp + fnn) as f64 } else { 0.0 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Mean positive-class posterior over an ad's segments.
pub fn ad_level_score(segment_high: &[f64]) -> Result<f64> {
    if segment_high.is_empty() {
        return Err(Error::Empty("segment posteriors"));
    }
    Ok(segment_high.iter().sum::<f64>() / segment_high.len() as f64)
}

/// Candidate SVM hyperparameters for the inner grid search. A `None` gamma
/// stands for `1 / dims`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmGrid {
    pub c: Vec<f64>,
    pub gamma: Vec<Option<f64>>,
    pub folds: usize,
}

impl Default for SvmGrid {
    fn default() -> Self {
        SvmGrid {
            c: vec![0.1, 1.0, 10.0, 100.0],
            gamma: vec![None, Some(0.01), Some(0.1)],
            folds: 5,
        }
    }
}

/// What to train on each split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Shallow {
        kind: ShallowKind,
        hyper: ShallowHyper,
        /// Inner grid search over SVM hyperparameters; ignored for LDA.
        grid: Option<SvmGrid>,
    },
    Mtl {
        config: MtlConfig,
        assignment: TaskAssignment,
    },
    Cnn {
        config: CnnConfig,
    },
}

impl ModelSpec {
    pub fn lda() -> Self {
        ModelSpec::Shallow {
            kind: ShallowKind::Lda,
            hyper: ShallowHyper::default(),
            grid: None,
        }
    }

    pub fn svm(kind: ShallowKind) -> Self {
        ModelSpec::Shallow {
            kind,
            hyper: ShallowHyper::default(),
            grid: Some(SvmGrid::default()),
        }
    }

    pub fn mtl() -> Self {
        ModelSpec::Mtl {
            config: MtlConfig::default(),
            assignment: TaskAssignment::default(),
        }
    }

    pub fn cnn() -> Self {
        ModelSpec::Cnn {
            config: CnnConfig::default(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Shallow { kind, .. } => kind.name(),
            ModelSpec::Mtl { .. } => "mtl",
            ModelSpec::Cnn { .. } => "cnn",
        }
    }

    /// Trains on `train`; `seed` drives every random choice.
    pub fn fit(&self, train: &FeatureMatrix, seed: u64) -> Result<TrainedModel> {
        match self {
            ModelSpec::Shallow { kind, hyper, grid } => {
                let hyper = match (kind, grid) {
                    (ShallowKind::Lda, _) | (_, None) => *hyper,
                    (_, Some(g)) => grid_search(train, *kind, hyper, g, seed)?,
                };
                Ok(TrainedModel::Shallow(shallow_fit(train, *kind, &hyper)?))
            }
            ModelSpec::Mtl { config, assignment } => {
                let graph = build_task_graph(&Quadrant::ALL)?;
                let (model, _) = mtl_fit(train, &graph, config)?;
                Ok(TrainedModel::Mtl {
                    model,
                    assignment: *assignment,
                })
            }
            ModelSpec::Cnn { config } => {
                let cfg = CnnConfig { seed, ..*config };
                let (model, _) = cnn_train(train.rows().view(), train.labels(), &cfg)?;
                Ok(TrainedModel::Cnn(model))
            }
        }
    }
}

/// Inner stratified CV over the grid; the first best cell in grid order wins.
fn grid_search(train: &FeatureMatrix, kind: ShallowKind, base: &ShallowHyper, grid: &SvmGrid, seed: u64) -> Result<ShallowHyper> {
    let folds = grid.folds.max(2);
    let counts = class_counts(train.labels());
    if counts.iter().any(|&c| c < folds) {
        return Ok(*base);
    }
    let assign = stratified_folds(train.labels(), train.tasks(), folds, seed)?;
    let gammas: Vec<Option<f64>> = match kind {
        ShallowKind::RbfSvm => grid.gamma.clone(),
        _ => vec![base.gamma],
    };
    let mut best = (*base, f64::NEG_INFINITY);
    for &c in &grid.c {
        for &gamma in &gammas {
            let hyper = ShallowHyper { c, gamma, ..*base };
            let kernel = svm_kernel(kind, &hyper, train.dims());
            let mut total = 0.0;
            for f in 0..folds {
                let tr: Vec<usize> = (0..train.len()).filter(|&i| assign[i] != f).collect();
                let te: Vec<usize> = (0..train.len()).filter(|&i| assign[i] == f).collect();
                let xtr = train.rows().select(Axis(0), &tr);
                let ytr: Vec<AffectLabel> = tr.iter().map(|&i| train.labels()[i]).collect();
                let decision = fit_decision(xtr.view(), &ytr, kernel, c)?;
                let pred: Vec<AffectLabel> = te
                    .iter()
                    .map(|&i| AffectLabel::from_score(decision.value(train.rows().row(i))))
                    .collect();
                let truth: Vec<AffectLabel> = te.iter().map(|&i| train.labels()[i]).collect();
                total += f1_score(&pred, &truth, AffectLabel::High)?;
            }
            if total > best.1 {
                best = (hyper, total);
            }
        }
    }
    Ok(best.0)
}

pub(crate) fn class_counts(labels: &[AffectLabel]) -> [usize; 2] {
    let highs = labels.iter().filter(|l| **l == AffectLabel::High).count();
    [labels.len() - highs, highs]
}

/// A fitted classifier of any supported family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TrainedModel {
    Shallow(ShallowModel),
    Mtl { model: MtlModel, assignment: TaskAssignment },
    Cnn(CnnModel),
}

impl TrainedModel {
    pub fn name(&self) -> &'static str {
        match self {
            TrainedModel::Shallow(m) => m.kind.name(),
            TrainedModel::Mtl { .. } => "mtl",
            TrainedModel::Cnn(_) => "cnn",
        }
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<Posterior>> {
        match self {
            TrainedModel::Shallow(m) => m.predict_proba(x.rows().view()),
            TrainedModel::Mtl { model, assignment } => {
                Ok(model.predict_matrix(x, *assignment)?.into_iter().map(|p| p.posterior).collect())
            }
            TrainedModel::Cnn(m) => m.predict_proba(x.rows().view()),
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<AffectLabel>> {
        match self {
            TrainedModel::Mtl { model, assignment } => {
                Ok(model.predict_matrix(x, *assignment)?.into_iter().map(|p| p.label).collect())
            }
            _ => Ok(self.predict_proba(x)?.iter().map(Posterior::label).collect()),
        }
    }
}
