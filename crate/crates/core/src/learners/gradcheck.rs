use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cnn::CnnModel;
use super::mtl::MtlProblem;
use crate::data::AffectLabel;

const STEP: f64 = 1e-5;
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Index of the worst coordinate.
    pub worst: usize,
}

/// Compares `grad` against central differences of `f` on up to `max_params`
/// randomly chosen coordinates. Relative error is
/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check<F>(mut f: F, params: &[f64], grad: &[f64], max_params: usize, seed: u64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    let n = params.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<usize> = sample(&mut rng, n, max_params.min(n)).into_vec();
    chosen.sort_unstable();
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        checked: chosen.len(),
        max_relative_error: 0.0,
        worst: 0,
    };
    for &i in &chosen {
        let orig = probe[i];
        probe[i] = orig + STEP;
        let up = f(&probe);
        probe[i] = orig - STEP;
        let down = f(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(FLOOR);
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst = i;
        }
    }
    report
}

pub fn cnn_grad_check(model: &CnnModel, x: ArrayView2<'_, f64>, y: &[AffectLabel], max_params: usize, seed: u64) -> GradCheckReport {
    let params = model.to_flat();
    let grad = model.gradient(x, y);
    let mut scratch = model.clone();
    let f = |p: &[f64]| {
        scratch.set_flat(p);
        scratch.objective(x, y)
    };
    grad_check(f, &params, &grad, max_params, seed)
}

/// Checks the gradient of the differentiable part of the multi-task objective.
pub fn mtl_grad_check(problem: &MtlProblem, w: &Array2<f64>, max_params: usize, seed: u64) -> GradCheckReport {
    let shape = w.dim();
    let params: Vec<f64> = w.iter().copied().collect();
    let grad: Vec<f64> = problem.smooth_grad(w).iter().copied().collect();
    let f = |p: &[f64]| {
        let m = Array2::from_shape_vec(shape, p.to_vec()).expect("shape");
        problem.smooth_value(&m)
    };
    grad_check(f, &params, &grad, max_params, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Quadrant;
    use crate::learners::{build_task_graph, CnnConfig};
    use ndarray::Array1;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn quadratic_is_exact() {
        let p = [1.0, -2.0, 0.5];
        let g: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        let r = grad_check(|q| q.iter().map(|v| v * v).sum(), &p, &g, 10, 0);
        assert_eq!(r.checked, 3);
        assert!(r.max_relative_error < 1e-8);
    }

    #[test]
    fn detects_wrong_gradient() {
        let p = [1.0, 2.0];
        let r = grad_check(|q| q[0] * q[0] + q[1], &p, &[2.0, 3.0], 10, 0);
        assert!(r.max_relative_error > 0.5);
        assert_eq!(r.worst, 1);
    }

    #[test]
    fn cnn_backprop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_simple_fn((6, 9), || StandardNormal.sample(&mut rng));
        let y: Vec<AffectLabel> = (0..6).map(|i| if i % 3 == 0 { AffectLabel::High } else { AffectLabel::Low }).collect();
        let m = CnnModel::new(9, CnnConfig::default()).unwrap();
        let r = cnn_grad_check(&m, x.view(), &y, 200, 1);
        assert!(r.max_relative_error < 1e-4, "{r:?}");
    }

    #[test]
    fn mtl_smooth_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let graph = build_task_graph(&Quadrant::ALL).unwrap();
        let xs: Vec<Array2<f64>> = (0..4).map(|_| Array2::from_shape_simple_fn((5, 3), || StandardNormal.sample(&mut rng))).collect();
        let ys: Vec<Array1<f64>> = (0..4).map(|_| Array1::from_shape_simple_fn(5, || StandardNormal.sample(&mut rng))).collect();
        let problem = MtlProblem::new(xs, ys, &graph, 0.7, 0.01, 0.2).unwrap();
        let w = Array2::from_shape_simple_fn((3, 4), || StandardNormal.sample(&mut rng));
        let r = mtl_grad_check(&problem, &w, 200, 4);
        assert_eq!(r.checked, 12);
        assert!(r.max_relative_error < 1e-6, "{r:?}");
    }
}
