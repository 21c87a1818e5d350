use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::{sigmoid, Posterior};
use crate::data::{AffectLabel, FeatureMatrix, Quadrant};
use crate::linalg::power_iteration;
use crate::{Error, Result};

/// Task-relatedness graph over quadrants. Two tasks are joined iff they
/// share the arousal or the valence level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGraph {
    pub tasks: Vec<Quadrant>,
    pub edges: Vec<(usize, usize)>,
    /// `T x E`; column `e` is `+1` at `edges[e].0` and `-1` at `edges[e].1`.
    pub incidence: Array2<f64>,
}

pub fn build_task_graph(quadrants: &[Quadrant]) -> Result<TaskGraph> {
    for (i, q) in quadrants.iter().enumerate() {
        if quadrants[..i].contains(q) {
            return Err(Error::InvalidParameter(format!("duplicate task {q}")));
        }
    }
    let t = quadrants.len();
    let edges: Vec<(usize, usize)> = (0..t)
        .flat_map(|i| (i + 1..t).map(move |j| (i, j)))
        .filter(|&(i, j)| quadrants[i].is_related(quadrants[j]))
        .collect();
    let mut incidence = Array2::zeros((t, edges.len()));
    for (e, &(i, j)) in edges.iter().enumerate() {
        incidence[[i, e]] = 1.0;
        incidence[[j, e]] = -1.0;
    }
    Ok(TaskGraph {
        tasks: quadrants.to_vec(),
        edges,
        incidence,
    })
}

impl TaskGraph {
    /// Edge weight: 1 for related tasks, 0 otherwise.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if self.edges.contains(&(i.min(j), i.max(j))) {
            1.0
        } else {
            0.0
        }
    }

    pub fn task_index(&self, q: Quadrant) -> Option<usize> {
        self.tasks.iter().position(|t| *t == q)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtlConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Per-task intercepts via centring of each task's data.
    pub fit_intercept: bool,
    pub max_iter: usize,
    /// Relative objective change that ends the iteration.
    pub tol: f64,
}

impl Default for MtlConfig {
    fn default() -> Self {
        MtlConfig {
            alpha: 1.0,
            beta: 0.01,
            gamma: 0.1,
            fit_intercept: true,
            max_iter: 10_000,
            tol: 1e-6,
        }
    }
}

/// The objective
/// `sum_t ||X_t W_t - Y_t||^2 + alpha ||W R||_F^2 + beta ||W||_1 + gamma ||W||_F^2`
/// on fixed data.
#[derive(Debug, Clone)]
pub struct MtlProblem {
    pub xs: Vec<Array2<f64>>,
    pub ys: Vec<Array1<f64>>,
    pub rrt: Array2<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MtlProblem {
    pub fn new(xs: Vec<Array2<f64>>, ys: Vec<Array1<f64>>, graph: &TaskGraph, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if xs.len() != graph.len() || ys.len() != graph.len() {
            return Err(Error::LengthMismatch {
                what: "per-task data",
                expected: graph.len(),
                actual: xs.len().min(ys.len()),
            });
        }
        let d = xs.first().map_or(0, |x| x.ncols());
        for (t, (x, y)) in xs.iter().zip(&ys).enumerate() {
            if x.nrows() == 0 {
                return Err(Error::EmptyTask(graph.tasks[t].to_string()));
            }
            if x.nrows() != y.len() {
                return Err(Error::LengthMismatch {
                    what: "task targets",
                    expected: x.nrows(),
                    actual: y.len(),
                });
            }
            if x.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: x.ncols(),
                });
            }
        }
        if [alpha, beta, gamma].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("regularizers must be nonnegative".into()));
        }
        let rrt = graph.incidence.dot(&graph.incidence.t());
        Ok(MtlProblem {
            xs,
            ys,
            rrt,
            alpha,
            beta,
            gamma,
        })
    }

    pub fn dims(&self) -> usize {
        self.xs[0].ncols()
    }

    pub fn tasks(&self) -> usize {
        self.xs.len()
    }

    /// Differentiable part: squared losses plus the graph and ridge terms.
    pub fn smooth_value(&self, w: &Array2<f64>) -> f64 {
        let mut f = 0.0;
        for (t, (x, y)) in self.xs.iter().zip(&self.ys).enumerate() {
            let r = x.dot(&w.column(t)) - y;
            f += r.dot(&r);
        }
        let wr_sq: f64 = (w.dot(&self.rrt) * w).sum();
        f + self.alpha * wr_sq + self.gamma * w.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn smooth_grad(&self, w: &Array2<f64>) -> Array2<f64> {
        let mut g = w.dot(&self.rrt) * (2.0 * self.alpha) + w * (2.0 * self.gamma);
        for (t, (x, y)) in self.xs.iter().zip(&self.ys).enumerate() {
            let r = x.dot(&w.column(t)) - y;
            let gt = x.t().dot(&r) * 2.0;
            g.column_mut(t).scaled_add(1.0, &gt);
        }
        g
    }

    pub fn objective(&self, w: &Array2<f64>) -> f64 {
        self.smooth_value(w) + self.beta * w.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Upper estimate of the Lipschitz constant of the smooth gradient.
    fn lipschitz(&self) -> f64 {
        let data = self
            .xs
            .iter()
            .map(|x| power_iteration(|v| x.t().dot(&x.dot(v)), x.ncols(), 100))
            .fold(0.0, f64::max);
        let graph = power_iteration(|v| self.rrt.dot(v), self.rrt.nrows(), 100);
        2.0 * (data + self.alpha * graph + self.gamma)
    }
}

fn soft_threshold(v: &Array2<f64>, thr: f64) -> Array2<f64> {
    v.mapv(|x| {
        if x > thr {
            x - thr
        } else if x < -thr {
            x + thr
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtlFitReport {
    /// Objective at the start and after every iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Monotone accelerated proximal gradient with backtracking. Returns the
/// weights and the per-iteration objective.
pub fn solve(problem: &MtlProblem, cfg: &MtlConfig) -> (Array2<f64>, MtlFitReport) {
    let (d, t) = (problem.dims(), problem.tasks());
    let mut x = Array2::<f64>::zeros((d, t));
    let mut fx = problem.objective(&x);
    let mut history = vec![fx];
    let mut y = x.clone();
    let mut tk = 1.0f64;
    let mut lip = problem.lipschitz().max(1e-12);
    let mut converged = fx < 1e-24;
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iter {
        iterations += 1;
        let fy = problem.smooth_value(&y);
        let gy = problem.smooth_grad(&y);
        let z = loop {
            let z = soft_threshold(&(&y - &(&gy / lip)), problem.beta / lip);
            let diff = &z - &y;
            let model = fy + (&gy * &diff).sum() + 0.5 * lip * diff.iter().map(|v| v * v).sum::<f64>();
            let fz = problem.smooth_value(&z);
            if fz <= model + 1e-12 * fy.abs().max(1.0) {
                break z;
            }
            lip *= 2.0;
        };
        let fz = problem.objective(&z);
        let t_next = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
        if fz <= fx {
            let change = fx - fz;
            let prev = x;
            x = z;
            y = &x + &((&x - &prev) * ((tk - 1.0) / t_next));
            converged = fz < 1e-24 || change <= cfg.tol * fx.abs();
            fx = fz;
            tk = t_next;
        } else {
            // Rejected step: keep x and restart the momentum.
            y = x.clone();
            tk = 1.0;
        }
        history.push(fx);
    }
    (
        x,
        MtlFitReport {
            objective_history: history,
            iterations,
            converged,
        },
    )
}

/// Learned multi-task model. Column `t` of `w` scores task `graph.tasks[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtlModel {
    pub w: Array2<f64>,
    pub bias: Array1<f64>,
    pub graph: TaskGraph,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Slope of the logistic map from score to confidence.
    pub confidence_scale: f64,
}

/// Fits on raw per-task arrays with `y` in {+1, -1}.
pub fn mtl_fit_arrays(
    xs: &[Array2<f64>],
    ys: &[Array1<f64>],
    graph: &TaskGraph,
    cfg: &MtlConfig,
) -> Result<(MtlModel, MtlFitReport)> {
    let mut means = Vec::with_capacity(xs.len());
    let (cx, cy): (Vec<_>, Vec<_>) = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            if cfg.fit_intercept && x.nrows() > 0 {
                let mx = x.mean_axis(Axis(0)).expect("non-empty");
                let my = y.mean().expect("non-empty");
                means.push((mx.clone(), my));
                (x - &mx, y - my)
            } else {
                means.push((Array1::zeros(x.ncols()), 0.0));
                (x.clone(), y.clone())
            }
        })
        .unzip();
    let problem = MtlProblem::new(cx, cy, graph, cfg.alpha, cfg.beta, cfg.gamma)?;
    let (w, report) = solve(&problem, cfg);
    let bias = Array1::from_iter(means.iter().enumerate().map(|(t, (mx, my))| my - mx.dot(&w.column(t))));

    let mut scores = Vec::new();
    let mut signs = Vec::new();
    for (t, (x, y)) in xs.iter().zip(ys).enumerate() {
        for (row, yi) in x.rows().into_iter().zip(y) {
            scores.push(row.dot(&w.column(t)) + bias[t]);
            signs.push(*yi);
        }
    }
    let model = MtlModel {
        w,
        bias,
        graph: graph.clone(),
        alpha: cfg.alpha,
        beta: cfg.beta,
        gamma: cfg.gamma,
        confidence_scale: fit_scale(&scores, &signs),
    };
    Ok((model, report))
}

/// Ridge-damped logistic slope without offset, by Newton's method.
fn fit_scale(scores: &[f64], signs: &[f64]) -> f64 {
    const RIDGE: f64 = 1e-2;
    let mut s = 1.0;
    for _ in 0..50 {
        let (mut g, mut h) = (RIDGE * s, RIDGE);
        for (f, y) in scores.iter().zip(signs) {
            let p = sigmoid(-y * s * f);
            g -= y * f * p;
            h += f * f * p * (1.0 - p);
        }
        let step = g / h;
        s -= step;
        if step.abs() < 1e-10 {
            break;
        }
    }
    s.max(1e-3)
}

/// Fits one model on a feature matrix; rows are grouped by their task.
pub fn mtl_fit(x: &FeatureMatrix, graph: &TaskGraph, cfg: &MtlConfig) -> Result<(MtlModel, MtlFitReport)> {
    let mut xs = Vec::with_capacity(graph.len());
    let mut ys = Vec::with_capacity(graph.len());
    for q in &graph.tasks {
        let idx: Vec<usize> = (0..x.len()).filter(|&i| x.tasks()[i] == *q).collect();
        if idx.is_empty() {
            return Err(Error::EmptyTask(q.to_string()));
        }
        xs.push(x.rows().select(Axis(0), &idx));
        ys.push(Array1::from_iter(idx.iter().map(|&i| x.labels()[i].sign())));
    }
    if x.tasks().iter().any(|q| graph.task_index(*q).is_none()) {
        return Err(Error::InvalidParameter("feature matrix holds a task outside the graph".into()));
    }
    mtl_fit_arrays(&xs, &ys, graph, cfg)
}

/// How a test item is mapped to a task column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskAssignment {
    /// Use the item's own quadrant.
    Known,
    /// Score every task and keep the largest magnitude.
    #[default]
    MaxScore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtlPrediction {
    pub label: AffectLabel,
    pub task: usize,
    pub score: f64,
    pub posterior: Posterior,
}

pub fn mtl_predict(m: &MtlModel, x: ArrayView1<'_, f64>, task: Option<Quadrant>) -> Result<MtlPrediction> {
    if x.len() != m.w.nrows() {
        return Err(Error::DimensionMismatch {
            expected: m.w.nrows(),
            actual: x.len(),
        });
    }
    let score_of = |t: usize| m.w.column(t).dot(&x) + m.bias[t];
    let t = match task {
        Some(q) => m
            .graph
            .task_index(q)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown task {q}")))?,
        None => (0..m.graph.len())
            .map(|t| (t, score_of(t).abs()))
            .fold((0, f64::NEG_INFINITY), |b, (t, s)| if s > b.1 { (t, s) } else { b })
            .0,
    };
    let score = score_of(t);
    let label = AffectLabel::from_score(score);
    let high = sigmoid(m.confidence_scale * score);
    Ok(MtlPrediction {
        label,
        task: t,
        score,
        posterior: Posterior { high, low: 1.0 - high },
    })
}

impl MtlModel {
    pub fn predict_matrix(&self, x: &FeatureMatrix, assign: TaskAssignment) -> Result<Vec<MtlPrediction>> {
        x.rows()
            .rows()
            .into_iter()
            .zip(x.tasks())
            .map(|(row, q)| {
                let task = match assign {
                    TaskAssignment::Known => Some(*q),
                    TaskAssignment::MaxScore => None,
                };
                mtl_predict(self, row, task)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn no_reg() -> MtlConfig {
        MtlConfig {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            fit_intercept: false,
            ..MtlConfig::default()
        }
    }

    #[test]
    fn graph_edges() {
        let g = build_task_graph(&Quadrant::ALL).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
        assert_eq!(g.weight(0, 3), 0.0);
        assert_eq!(g.weight(1, 2), 0.0);
        assert_eq!(g.weight(3, 1), 1.0);
        let col = g.incidence.column(0);
        assert_eq!(col.to_vec(), vec![1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn scalar_prox_case() {
        let g = build_task_graph(&[Quadrant::HH]).unwrap();
        let cfg = MtlConfig { beta: 1.0, ..no_reg() };
        let (m, _) = mtl_fit_arrays(&[array![[1.0]]], &[array![1.0]], &g, &cfg).unwrap();
        assert!((m.w[[0, 0]] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn uncoupled_least_squares() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = build_task_graph(&Quadrant::ALL).unwrap();
        let truth = Array2::from_shape_simple_fn((5, 4), || StandardNormal.sample(&mut rng));
        let xs: Vec<Array2<f64>> = (0..4)
            .map(|_| Array2::from_shape_simple_fn((30, 5), || StandardNormal.sample(&mut rng)))
            .collect();
        let ys: Vec<Array1<f64>> = xs.iter().enumerate().map(|(t, x)| x.dot(&truth.column(t))).collect();
        let (m, report) = mtl_fit_arrays(&xs, &ys, &g, &no_reg()).unwrap();
        for t in 0..4 {
            let r = xs[t].dot(&m.w.column(t)) - &ys[t];
            assert!(r.dot(&r).sqrt() <= 1e-6);
        }
        assert!(report.objective_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn strong_coupling_equalises_columns() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let g = build_task_graph(&[Quadrant::HH, Quadrant::HL]).unwrap();
        let x = Array2::from_shape_simple_fn((20, 3), || StandardNormal.sample(&mut rng));
        let y1 = x.dot(&array![1.0, -1.0, 0.5]);
        let y2 = x.dot(&array![-0.5, 2.0, 1.0]);
        let cfg = MtlConfig { alpha: 1e6, ..no_reg() };
        let (m, _) = mtl_fit_arrays(&[x.clone(), x], &[y1, y2], &g, &cfg).unwrap();
        let diff = &m.w.column(0) - &m.w.column(1);
        assert!(diff.dot(&diff).sqrt() <= 1e-3);
    }

    #[test]
    fn l1_yields_exact_zeros() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let g = build_task_graph(&Quadrant::ALL).unwrap();
        let xs: Vec<Array2<f64>> = (0..4)
            .map(|_| Array2::from_shape_simple_fn((25, 8), || StandardNormal.sample(&mut rng)))
            .collect();
        let ys: Vec<Array1<f64>> = xs.iter().map(|x| x.column(0).mapv(|v| v.signum())).collect();
        let cfg = MtlConfig { beta: 5.0, ..MtlConfig::default() };
        let (m, _) = mtl_fit_arrays(&xs, &ys, &g, &cfg).unwrap();
        assert!(m.w.iter().any(|v| *v == 0.0));
        assert!(m.w.row(0).iter().all(|v| *v != 0.0));
    }

    #[test]
    fn prediction_rules() {
        let g = build_task_graph(&Quadrant::ALL).unwrap();
        let model = MtlModel {
            w: array![[2.0, -1.0, 0.5, -0.2]],
            bias: Array1::zeros(4),
            graph: g.clone(),
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            confidence_scale: 1.0,
        };
        let x = array![1.0];
        let p = mtl_predict(&model, x.view(), None).unwrap();
        assert_eq!((p.task, p.label), (0, AffectLabel::High));
        let p = mtl_predict(&model, x.view(), Some(Quadrant::HL)).unwrap();
        assert_eq!(p.label, AffectLabel::Low);

        let zero = MtlModel { w: Array2::zeros((1, 4)), ..model };
        let p = mtl_predict(&zero, x.view(), Some(Quadrant::HH)).unwrap();
        assert_eq!(p.label, AffectLabel::Low);
        assert_eq!(p.posterior.high, 0.5);
        assert!(mtl_predict(&zero, array![1.0, 2.0].view(), None).is_err());
    }

    #[test]
    fn empty_task_rejected() {
        let g = build_task_graph(&[Quadrant::HH, Quadrant::LL]).unwrap();
        let xs = [Array2::zeros((2, 2)), Array2::zeros((0, 2))];
        let ys = [Array1::zeros(2), Array1::zeros(0)];
        assert!(matches!(mtl_fit_arrays(&xs, &ys, &g, &no_reg()), Err(Error::EmptyTask(_))));
    }
}
