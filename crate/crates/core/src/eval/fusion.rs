use serde::{Deserialize, Serialize};

use super::f1_score;
use crate::data::AffectLabel;
use crate::learners::Posterior;
use crate::{Error, Result};

/// Fused class scores. Not normalized: they sum to `sum_i alpha_i t_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusedScore {
    pub high: f64,
    pub low: f64,
}

impl FusedScore {
    /// Argmax; a tie yields Low.
    pub fn label(&self) -> AffectLabel {
        if self.high > self.low {
            AffectLabel::High
        } else {
            AffectLabel::Low
        }
    }

    pub fn normalized(&self) -> Posterior {
        let s = self.high + self.low;
        if s > 0.0 {
            Posterior::from_high(self.high / s)
        } else {
            Posterior::from_high(0.5)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// Independent `alpha_1, alpha_2` over the unit square.
    #[default]
    Joint,
    /// `alpha_2 = 1 - alpha_1`.
    Constrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub grid_step: f64,
    pub mode: GridMode,
    /// Tune on the evaluation items themselves. Optimistic; off by default.
    pub leaky: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            grid_step: 0.01,
            mode: GridMode::Joint,
            leaky: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionTuning {
    pub alphas: [f64; 2],
    pub f1: f64,
}

/// Modality weights `t_i = alpha_i F_i / sum_k alpha_k F_k`. When every
/// `alpha_i F_i` vanishes the weights fall back to `alpha_i / sum_k alpha_k`.
fn modality_weights(f1: &[f64], alphas: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = alphas.iter().zip(f1).map(|(a, f)| a * f).sum();
    if total > 0.0 {
        return Ok(alphas.iter().zip(f1).map(|(a, f)| a * f / total).collect());
    }
    let sum_a: f64 = alphas.iter().sum();
    if sum_a > 0.0 {
        return Ok(alphas.iter().map(|a| a / sum_a).collect());
    }
    Err(Error::InvalidParameter("all fusion weights are zero".into()))
}

/// `P_j = sum_i alpha_i t_i p_ij` for every item.
pub fn fuse_posteriors(posteriors: &[&[Posterior]], f1: &[f64], alphas: &[f64]) -> Result<Vec<FusedScore>> {
    let m = posteriors.len();
    if m == 0 {
        return Err(Error::Empty("modalities"));
    }
    if f1.len() != m || alphas.len() != m {
        return Err(Error::Misaligned(format!(
            "{m} modalities but {} F1 values and {} weights",
            f1.len(),
            alphas.len()
        )));
    }
    let n = posteriors[0].len();
    if let Some(bad) = posteriors.iter().find(|p| p.len() != n) {
        return Err(Error::Misaligned(format!("{n} items against {}", bad.len())));
    }
    if alphas.iter().chain(f1).any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter("fusion weights and F1 values must lie in [0, 1]".into()));
    }
    let t = modality_weights(f1, alphas)?;
    Ok((0..n)
        .map(|j| {
            let mut s = FusedScore { high: 0.0, low: 0.0 };
            for i in 0..m {
                let w = alphas[i] * t[i];
                s.high += w * posteriors[i][j].high;
                s.low += w * posteriors[i][j].low;
            }
            s
        })
        .collect())
}

/// Two-modality fusion at fixed weights.
pub fn west_fuse(
    p1: &[Posterior],
    p2: &[Posterior],
    f1_train: f64,
    f2_train: f64,
    alphas: [f64; 2],
) -> Result<(Vec<AffectLabel>, Vec<FusedScore>)> {
    let scores = fuse_posteriors(&[p1, p2], &[f1_train, f2_train], &alphas)?;
    Ok((scores.iter().map(FusedScore::label).collect(), scores))
}

fn grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(format!("grid step {step}")));
    }
    let n = (1.0 / step).round() as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// Grid search for the weights maximizing High-class F1 on a tuning set.
/// Ties keep the lexicographically smallest `(alpha_1, alpha_2)`.
pub fn tune_fusion(
    p1: &[Posterior],
    p2: &[Posterior],
    truth: &[AffectLabel],
    f1_train: [f64; 2],
    cfg: &FusionConfig,
) -> Result<FusionTuning> {
    if p1.len() != truth.len() || p2.len() != truth.len() {
        return Err(Error::Misaligned(format!(
            "{} and {} posteriors for {} items",
            p1.len(),
            p2.len(),
            truth.len()
        )));
    }
    let values = grid(cfg.grid_step)?;
    let pairs: Vec<[f64; 2]> = match cfg.mode {
        GridMode::Joint => values.iter().flat_map(|&a| values.iter().map(move |&b| [a, b])).collect(),
        GridMode::Constrained => values.iter().map(|&a| [a, 1.0 - a]).collect(),
    };
    let mut best: Option<FusionTuning> = None;
    for alphas in pairs {
        if alphas == [0.0, 0.0] {
            continue;
        }
        let (labels, _) = west_fuse(p1, p2, f1_train[0], f1_train[1], alphas)?;
        let f1 = f1_score(&labels, truth, AffectLabel::High)?;
        if best.is_none_or(|b| f1 > b.f1) {
            best = Some(FusionTuning { alphas, f1 });
        }
    }
    best.ok_or(Error::Empty("fusion grid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(h: f64) -> Posterior {
        Posterior { high: h, low: 1.0 - h }
    }

    #[test]
    fn hand_example() {
        let (labels, s) = west_fuse(&[p(0.9)], &[p(0.4)], 0.5, 0.5, [0.5, 0.5]).unwrap();
        assert!((s[0].high - 0.325).abs() < 1e-12);
        assert!((s[0].low - 0.175).abs() < 1e-12);
        assert_eq!(labels, vec![AffectLabel::High]);
    }

    #[test]
    fn endpoint_copies_modality() {
        let a = [p(0.7), p(0.2), p(0.5)];
        let b = [p(0.1), p(0.9), p(0.8)];
        let (labels, _) = west_fuse(&a, &b, 0.6, 0.9, [1.0, 0.0]).unwrap();
        let expected: Vec<AffectLabel> = a.iter().map(Posterior::label).collect();
        assert_eq!(labels, expected);
    }

    #[test]
    fn grid_has_endpoints() {
        let g = grid(0.01).unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[100], 1.0);
    }

    #[test]
    fn misaligned_rejected() {
        assert!(matches!(west_fuse(&[p(0.1)], &[], 0.5, 0.5, [0.5, 0.5]), Err(Error::Misaligned(_))));
    }
}
