use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{unchecked_fitness, AdSchedule, ScheduleProblem};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover: f64,
    pub mutation: f64,
    pub tournament: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 100,
            generations: 200,
            crossover: 0.8,
            mutation: 0.1,
            tournament: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub schedule: AdSchedule,
    pub fitness: f64,
    /// Best-ever fitness after initialization and after each generation.
    pub history: Vec<f64>,
}

fn random_individual(p: &ScheduleProblem, rng: &mut ChaCha8Rng) -> AdSchedule {
    let mut slots: Vec<usize> = (0..p.slots()).collect();
    slots.shuffle(rng);
    let mut ads: Vec<usize> = (0..p.ads().len()).collect();
    ads.shuffle(rng);
    let mut s = AdSchedule::empty(p.slots());
    for (slot, ad) in slots.iter().zip(&ads).take(p.k()) {
        s.slots[*slot] = Some(*ad);
    }
    s
}

/// Drops duplicate ads, then removes or adds random insertions until exactly
/// `k` slots hold distinct ads.
fn repair(p: &ScheduleProblem, s: &mut AdSchedule, rng: &mut ChaCha8Rng) {
    let mut used = vec![false; p.ads().len()];
    let mut order: Vec<usize> = (0..s.slots.len()).collect();
    order.shuffle(rng);
    for &i in &order {
        if let Some(a) = s.slots[i] {
            if std::mem::replace(&mut used[a], true) {
                s.slots[i] = None;
            }
        }
    }
    let mut filled: Vec<usize> = (0..s.slots.len()).filter(|&i| s.slots[i].is_some()).collect();
    filled.shuffle(rng);
    while filled.len() > p.k() {
        let i = filled.pop().expect("nonempty");
        used[s.slots[i].take().expect("filled")] = false;
    }
    if filled.len() < p.k() {
        let mut empty: Vec<usize> = (0..s.slots.len()).filter(|&i| s.slots[i].is_none()).collect();
        empty.shuffle(rng);
        let mut free: Vec<usize> = (0..used.len()).filter(|&a| !used[a]).collect();
        free.shuffle(rng);
        for (slot, ad) in empty.into_iter().zip(free).take(p.k() - filled.len()) {
            s.slots[slot] = Some(ad);
        }
    }
}

fn crossover(a: &AdSchedule, b: &AdSchedule, rng: &mut ChaCha8Rng) -> AdSchedule {
    AdSchedule {
        slots: a
            .slots
            .iter()
            .zip(&b.slots)
            .map(|(x, y)| if rng.random::<bool>() { *x } else { *y })
            .collect(),
    }
}

/// Swaps the contents of two slots, or replaces one inserted ad with an
/// unused one.
fn mutate(p: &ScheduleProblem, s: &mut AdSchedule, rng: &mut ChaCha8Rng) {
    let n = s.slots.len();
    let mut used = vec![false; p.ads().len()];
    for a in s.slots.iter().flatten() {
        used[*a] = true;
    }
    let free: Vec<usize> = (0..used.len()).filter(|&a| !used[a]).collect();
    if rng.random::<bool>() || free.is_empty() {
        if n >= 2 {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            s.slots.swap(i, j);
        }
    } else {
        let filled: Vec<usize> = (0..n).filter(|&i| s.slots[i].is_some()).collect();
        if let Some(&i) = filled.choose(rng) {
            s.slots[i] = free.choose(rng).copied();
        }
    }
}

fn tournament<'a>(pop: &'a [(AdSchedule, f64)], size: usize, rng: &mut ChaCha8Rng) -> &'a AdSchedule {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size.max(1) {
        let c = rng.random_range(0..pop.len());
        if pop[c].1 > pop[best].1 {
            best = c;
        }
    }
    &pop[best].0
}

fn fittest(pop: &[(AdSchedule, f64)]) -> usize {
    (0..pop.len()).fold(0, |b, i| if pop[i].1 > pop[b].1 { i } else { b })
}

pub fn ga_optimize(p: &ScheduleProblem, cfg: &GaConfig) -> Result<GaResult> {
    ga_optimize_from(p, cfg, Vec::new())
}

/// Genetic search seeded with `initial` individuals; random ones fill the
/// rest of the population. Every individual stays feasible throughout.
pub fn ga_optimize_from(p: &ScheduleProblem, cfg: &GaConfig, initial: Vec<AdSchedule>) -> Result<GaResult> {
    if cfg.population == 0 {
        return Err(Error::InvalidParameter("empty population".into()));
    }
    for s in &initial {
        s.check(p)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pop: Vec<(AdSchedule, f64)> = initial
        .into_iter()
        .take(cfg.population)
        .map(|s| {
            let f = unchecked_fitness(p, &s);
            (s, f)
        })
        .collect();
    while pop.len() < cfg.population {
        let s = random_individual(p, &mut rng);
        let f = unchecked_fitness(p, &s);
        pop.push((s, f));
    }
    let mut best = pop[fittest(&pop)].clone();
    let mut history = vec![best.1];
    for _ in 0..cfg.generations {
        let mut next = Vec::with_capacity(cfg.population);
        next.push(pop[fittest(&pop)].clone());
        while next.len() < cfg.population {
            let a = tournament(&pop, cfg.tournament, &mut rng);
            let mut child = if rng.random::<f64>() < cfg.crossover {
                let b = tournament(&pop, cfg.tournament, &mut rng);
                crossover(a, b, &mut rng)
            } else {
                a.clone()
            };
            if rng.random::<f64>() < cfg.mutation {
                mutate(p, &mut child, &mut rng);
            }
            repair(p, &mut child, &mut rng);
            let f = unchecked_fitness(p, &child);
            next.push((child, f));
        }
        pop = next;
        let i = fittest(&pop);
        if pop[i].1 > best.1 {
            best = pop[i].clone();
        }
        history.push(best.1);
    }
    Ok(GaResult {
        schedule: best.0,
        fitness: best.1,
        history,
    })
}
