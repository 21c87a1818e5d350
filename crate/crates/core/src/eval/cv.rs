use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{class_counts, f1_score, ModelSpec};
use crate::data::{AffectLabel, FeatureMatrix, Quadrant};
use crate::{Error, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stratified fold ids. Items are grouped by `(label, task)`, shuffled, and
/// dealt round-robin with the dealer position carried across groups so
/// fold sizes differ by at most one.
pub fn stratified_folds(labels: &[AffectLabel], tasks: &[Quadrant], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!("{folds} folds")));
    }
    if labels.len() != tasks.len() {
        return Err(Error::LengthMismatch {
            what: "tasks",
            expected: labels.len(),
            actual: tasks.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign = vec![0; labels.len()];
    let mut dealer = 0;
    for label in [AffectLabel::Low, AffectLabel::High] {
        for q in Quadrant::ALL {
            let mut group: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label && tasks[i] == q).collect();
            group.shuffle(&mut rng);
            for i in group {
                assign[i] = dealer % folds;
                dealer += 1;
            }
        }
    }
    Ok(assign)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub reps: usize,
    pub folds: usize,
    pub seed: u64,
    /// Free-form description such as `valence/first30/mtl/eeg`.
    pub setting: String,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            reps: 10,
            folds: 5,
            seed: 0,
            setting: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvRun {
    pub run: usize,
    pub fold: usize,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub setting: String,
    pub runs: Vec<CvRun>,
    pub mean: f64,
    /// Population standard deviation over all runs.
    pub std: f64,
}

impl CvReport {
    pub fn from_runs(setting: String, runs: Vec<CvRun>) -> Self {
        let n = runs.len().max(1) as f64;
        let mean = runs.iter().map(|r| r.f1).sum::<f64>() / n;
        let var = runs.iter().map(|r| (r.f1 - mean).powi(2)).sum::<f64>() / n;
        CvReport {
            setting,
            runs,
            mean,
            std: var.sqrt(),
        }
    }

    /// `setting,run,fold,f1` rows followed by a `mean,std` summary.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,run,fold,f1\n");
        for r in &self.runs {
            let _ = writeln!(out, "{},{},{},{}", self.setting, r.run, r.fold, r.f1);
        }
        let _ = writeln!(out, "mean,std\n{},{}", self.mean, self.std);
        out
    }
}

/// `reps` repetitions of stratified `folds`-fold CV. Reports the High-class
/// F1 of every held-out fold. Splits run in parallel; results are ordered
/// by `(run, fold)` and do not depend on scheduling.
pub fn cross_validate(x: &FeatureMatrix, spec: &ModelSpec, cfg: &CvConfig) -> Result<CvReport> {
    let counts = class_counts(x.labels());
    for (label, count) in [(AffectLabel::Low, counts[0]), (AffectLabel::High, counts[1])] {
        if count < cfg.folds {
            return Err(Error::InsufficientClassCount {
                label: label.to_string(),
                count,
                needed: cfg.folds,
            });
        }
    }
    let assignments: Vec<Vec<usize>> = (0..cfg.reps)
        .map(|rep| stratified_folds(x.labels(), x.tasks(), cfg.folds, cfg.seed ^ (rep as u64 + 1).wrapping_mul(GOLDEN)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.reps).flat_map(|r| (0..cfg.folds).map(move |f| (r, f))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(rep, fold)| {
            let assign = &assignments[rep];
            let train: Vec<usize> = (0..x.len()).filter(|&i| assign[i] != fold).collect();
            let test: Vec<usize> = (0..x.len()).filter(|&i| assign[i] == fold).collect();
            let seed = cfg.seed.wrapping_add(((rep * cfg.folds + fold) as u64 + 1).wrapping_mul(GOLDEN).rotate_left(17));
            let model = spec.fit(&x.select(&train), seed)?;
            let held = x.select(&test);
            let pred = model.predict(&held)?;
            Ok(CvRun {
                run: rep,
                fold,
                f1: f1_score(&pred, held.labels(), AffectLabel::High)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvReport::from_runs(cfg.setting.clone(), runs))
}
