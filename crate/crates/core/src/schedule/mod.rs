//! Ad insertion at scene transitions: choose `k` of the `N` slots and a
//! distinct ad for each to maximize affective relevance.

mod exact;
mod ga;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use exact::{brute_force_schedule, candidate_count, BRUTE_FORCE_LIMIT};
pub use ga::{ga_optimize, ga_optimize_from, GaConfig, GaResult};

/// A program scene with normalized arousal and valence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub id: String,
    pub asl: f64,
    pub val: f64,
}

/// An insertable ad with normalized arousal and valence scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdScore {
    pub id: String,
    pub asl: f64,
    pub val: f64,
}

/// Which scene an ad in slot `i` (between scenes `i` and `i + 1`) is
/// compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    #[default]
    Preceding,
    Following,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelevanceWeights {
    pub valence: f64,
    pub arousal: f64,
}

impl Default for RelevanceWeights {
    fn default() -> Self {
        RelevanceWeights {
            valence: 1.0,
            arousal: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleProblem {
    scenes: Vec<SceneRecord>,
    ads: Vec<AdScore>,
    k: usize,
    weights: RelevanceWeights,
    anchor: Anchor,
}

fn unit(what: &str, id: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} score {v} of `{id}` outside [0, 1]")))
    }
}

impl ScheduleProblem {
    pub fn new(scenes: Vec<SceneRecord>, ads: Vec<AdScore>, k: usize, weights: RelevanceWeights, anchor: Anchor) -> Result<Self> {
        if scenes.len() < 2 {
            return Err(Error::InfeasibleSchedule(format!("{} scenes leave no transition slot", scenes.len())));
        }
        let slots = scenes.len() - 1;
        if k > slots.min(ads.len()) {
            return Err(Error::InfeasibleSchedule(format!(
                "{k} insertions requested with {slots} slots and {} ads",
                ads.len()
            )));
        }
        if !(weights.valence >= 0.0 && weights.arousal >= 0.0) {
            return Err(Error::InvalidParameter("relevance weights must be nonnegative".into()));
        }
        for s in &scenes {
            unit("scene asl", &s.id, s.asl)?;
            unit("scene val", &s.id, s.val)?;
        }
        for a in &ads {
            unit("ad asl", &a.id, a.asl)?;
            unit("ad val", &a.id, a.val)?;
        }
        Ok(ScheduleProblem {
            scenes,
            ads,
            k,
            weights,
            anchor,
        })
    }

    pub fn scenes(&self) -> &[SceneRecord] {
        &self.scenes
    }

    pub fn ads(&self) -> &[AdScore] {
        &self.ads
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn slots(&self) -> usize {
        self.scenes.len() - 1
    }

    pub fn weights(&self) -> RelevanceWeights {
        self.weights
    }

    /// Relevance of placing `ad` in `slot`.
    pub fn contribution(&self, slot: usize, ad: usize) -> f64 {
        let scene = match self.anchor {
            Anchor::Preceding => &self.scenes[slot],
            Anchor::Following => &self.scenes[slot + 1],
        };
        let a = &self.ads[ad];
        self.weights.valence * (1.0 - (a.val - scene.val).abs()) + self.weights.arousal * (1.0 - (a.asl - scene.asl).abs())
    }

    /// Largest attainable fitness, `k (lambda_v + lambda_a)`.
    pub fn upper_bound(&self) -> f64 {
        self.k as f64 * (self.weights.valence + self.weights.arousal)
    }
}

/// One ad index (or nothing) per slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AdSchedule {
    pub slots: Vec<Option<usize>>,
}

impl AdSchedule {
    pub fn empty(slots: usize) -> Self {
        AdSchedule { slots: vec![None; slots] }
    }

    /// `(slot, ad)` pairs in slot order.
    pub fn assignments(&self) -> Vec<(usize, usize)> {
        self.slots.iter().enumerate().filter_map(|(s, a)| a.map(|a| (s, a))).collect()
    }

    pub fn check(&self, p: &ScheduleProblem) -> Result<()> {
        if self.slots.len() != p.slots() {
            return Err(Error::InfeasibleSchedule(format!("{} slots, problem has {}", self.slots.len(), p.slots())));
        }
        let pairs = self.assignments();
        if pairs.len() != p.k {
            return Err(Error::InfeasibleSchedule(format!("{} insertions, need {}", pairs.len(), p.k)));
        }
        let mut seen = vec![false; p.ads.len()];
        for (_, a) in pairs {
            if a >= p.ads.len() {
                return Err(Error::InfeasibleSchedule(format!("ad index {a} out of range")));
            }
            if std::mem::replace(&mut seen[a], true) {
                return Err(Error::InfeasibleSchedule(format!("ad `{}` inserted twice", p.ads[a].id)));
            }
        }
        Ok(())
    }

    pub fn is_feasible(&self, p: &ScheduleProblem) -> bool {
        self.check(p).is_ok()
    }
}

/// Sum of slot contributions, in slot order.
pub fn schedule_fitness(p: &ScheduleProblem, s: &AdSchedule) -> Result<f64> {
    s.check(p)?;
    Ok(unchecked_fitness(p, s))
}

pub(crate) fn unchecked_fitness(p: &ScheduleProblem, s: &AdSchedule) -> f64 {
    s.slots
        .iter()
        .enumerate()
        .filter_map(|(slot, a)| a.map(|a| p.contribution(slot, a)))
        .sum()
}

/// `slot_index,ad_id,fitness_contribution` rows and a closing `total` row.
pub fn schedule_csv(p: &ScheduleProblem, s: &AdSchedule) -> Result<String> {
    let total = schedule_fitness(p, s)?;
    let mut out = String::from("slot_index,ad_id,fitness_contribution\n");
    for (slot, ad) in s.assignments() {
        let _ = writeln!(out, "{slot},{},{}", p.ads[ad].id, p.contribution(slot, ad));
    }
    let _ = writeln!(out, "total,,{total}");
    Ok(out)
}
