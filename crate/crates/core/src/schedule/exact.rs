use super::{unchecked_fitness, AdSchedule, ScheduleProblem};
use crate::{Error, Result};

/// Largest search space enumerated exhaustively.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// `C(slots, k) * P(ads, k)`.
pub fn candidate_count(slots: usize, ads: usize, k: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..k as u128 {
        c = c * (slots as u128 - i) / (i + 1);
    }
    let mut p: u128 = 1;
    for i in 0..k as u128 {
        p *= ads as u128 - i;
    }
    c * p
}

/// Advances `idx` to the next `k`-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Calls `f` on every ordered selection of `k` distinct values from `0..n`,
/// in lexicographic order.
fn for_each_arrangement(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(n: usize, k: usize, used: &mut [bool], cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                cur.push(v);
                rec(n, k, used, cur, f);
                cur.pop();
                used[v] = false;
            }
        }
    }
    rec(n, k, &mut vec![false; n], &mut Vec::with_capacity(k), f);
}

/// Exhaustive maximum. Slot sets are visited in lexicographic order and,
/// within each, ad sequences in lexicographic order; the first maximum wins.
pub fn brute_force_schedule(p: &ScheduleProblem) -> Result<(AdSchedule, f64)> {
    let (n, k, m) = (p.slots(), p.k(), p.ads().len());
    let candidates = candidate_count(n, m, k);
    if candidates > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge {
            candidates,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut best: Option<(AdSchedule, f64)> = None;
    let mut slots: Vec<usize> = (0..k).collect();
    let mut schedule = AdSchedule::empty(n);
    loop {
        for_each_arrangement(m, k, &mut |ads: &[usize]| {
            schedule.slots.iter_mut().for_each(|s| *s = None);
            for (s, a) in slots.iter().zip(ads) {
                schedule.slots[*s] = Some(*a);
            }
            let f = unchecked_fitness(p, &schedule);
            if best.as_ref().is_none_or(|(_, b)| f > *b) {
                best = Some((schedule.clone(), f));
            }
        });
        if k == 0 || !next_combination(&mut slots, n) {
            break;
        }
    }
    Ok(best.expect("at least one candidate"))
}
