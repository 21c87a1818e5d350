use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Posterior;
use crate::data::AffectLabel;
use crate::{Error, Result};

const FILTERS: usize = 64;
const TAPS: usize = 3;
const HIDDEN: usize = 128;
const CLASSES: usize = 2;
/// Smallest input length the two valid convolutions accept.
pub const MIN_INPUT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    /// Fraction carved off for early stopping; 0 disables validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            lr: 1e-4,
            momentum: 0.9,
            weight_decay: 5e-4,
            dropout: 0.5,
            max_epochs: 100,
            patience: 5,
            batch_size: 32,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

/// conv(64 x 1x3) - ReLU - conv(64 x 64x3) - ReLU - dropout - fc(128) - ReLU
/// - dropout - fc(2) - softmax, with valid convolutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub input_len: usize,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `64 x (64 * 3)`, column `c_in * 3 + tap`.
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    /// `128 x (64 * (k - 4))`, column `c * (k - 4) + position`.
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
    pub w4: Array2<f64>,
    pub b4: Array1<f64>,
    pub input_mean: Array1<f64>,
    pub input_scale: f64,
    pub config: CnnConfig,
}

/// Stops after `patience` consecutive epochs whose validation loss rose
/// over the previous epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    last: Option<f64>,
    rises: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            last: None,
            rises: 0,
        }
    }

    /// Records one epoch's loss; true when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        if let Some(prev) = self.last {
            if loss > prev {
                self.rises += 1;
            } else {
                self.rises = 0;
            }
        }
        self.last = Some(loss);
        self.patience > 0 && self.rises >= self.patience
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnTrainReport {
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub stopped_early: bool,
}

/// Intermediate activations kept for the backward pass.
struct Cache {
    x1: Array2<f64>,
    z1: Array2<f64>,
    x2: Array2<f64>,
    z2: Array2<f64>,
    f: Array2<f64>,
    m1: Option<Array2<f64>>,
    z3: Array2<f64>,
    a3: Array2<f64>,
    m2: Option<Array2<f64>>,
    probs: Array2<f64>,
}

/// Gradients in the same layout as the parameters.
pub(crate) struct Grads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
    pub w4: Array2<f64>,
    pub b4: Array1<f64>,
}

fn relu(a: &Array2<f64>) -> Array2<f64> {
    a.mapv(|v| v.max(0.0))
}

fn he(rng: &mut ChaCha8Rng, shape: (usize, usize), fan_in: usize) -> Array2<f64> {
    let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("valid std");
    Array2::from_shape_simple_fn(shape, || dist.sample(rng))
}

impl CnnModel {
    /// Freshly initialized network for inputs of length `k`.
    pub fn new(k: usize, config: CnnConfig) -> Result<CnnModel> {
        if k < MIN_INPUT {
            return Err(Error::InputTooShort { actual: k, min: MIN_INPUT });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let flat = FILTERS * (k - 4);
        Ok(CnnModel {
            input_len: k,
            w1: he(&mut rng, (FILTERS, TAPS), TAPS),
            b1: Array1::zeros(FILTERS),
            w2: he(&mut rng, (FILTERS, FILTERS * TAPS), FILTERS * TAPS),
            b2: Array1::zeros(FILTERS),
            w3: he(&mut rng, (HIDDEN, flat), flat),
            b3: Array1::zeros(HIDDEN),
            w4: he(&mut rng, (CLASSES, HIDDEN), HIDDEN) / 2f64.sqrt(),
            b4: Array1::zeros(CLASSES),
            input_mean: Array1::zeros(k),
            input_scale: 1.0,
            config,
        })
    }

    /// Parameter count as a closed-form function of the input length.
    pub fn param_count_for(k: usize) -> usize {
        FILTERS * TAPS + FILTERS + FILTERS * FILTERS * TAPS + FILTERS + HIDDEN * FILTERS * (k - 4) + HIDDEN + CLASSES * HIDDEN + CLASSES
    }

    pub fn param_count(&self) -> usize {
        [self.w1.len(), self.b1.len(), self.w2.len(), self.b2.len(), self.w3.len(), self.b3.len(), self.w4.len(), self.b4.len()]
            .iter()
            .sum()
    }

    fn normalise(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.input_mean) / self.input_scale
    }

    /// Forward pass on normalized inputs. Masks are inverted-dropout
    /// multipliers; `None` disables dropout.
    fn forward(&self, x: ArrayView2<'_, f64>, m1: Option<Array2<f64>>, m2: Option<Array2<f64>>) -> Cache {
        let (b, k) = x.dim();
        let (l1, l2) = (k - 2, k - 4);

        let mut x1 = Array2::zeros((b * l1, TAPS));
        for i in 0..b {
            for p in 0..l1 {
                for t in 0..TAPS {
                    x1[[i * l1 + p, t]] = x[[i, p + t]];
                }
            }
        }
        let z1 = x1.dot(&self.w1.t()) + &self.b1;
        let a1 = relu(&z1);

        let mut x2 = Array2::zeros((b * l2, FILTERS * TAPS));
        for i in 0..b {
            for p in 0..l2 {
                let mut row = x2.row_mut(i * l2 + p);
                for c in 0..FILTERS {
                    for t in 0..TAPS {
                        row[c * TAPS + t] = a1[[i * l1 + p + t, c]];
                    }
                }
            }
        }
        let z2 = x2.dot(&self.w2.t()) + &self.b2;

        let mut f = Array2::zeros((b, FILTERS * l2));
        for i in 0..b {
            for p in 0..l2 {
                for c in 0..FILTERS {
                    f[[i, c * l2 + p]] = z2[[i * l2 + p, c]].max(0.0);
                }
            }
        }
        let fd = match &m1 {
            Some(m) => &f * m,
            None => f.clone(),
        };
        let z3 = fd.dot(&self.w3.t()) + &self.b3;
        let a3 = relu(&z3);
        let a3d = match &m2 {
            Some(m) => &a3 * m,
            None => a3.clone(),
        };
        let z4 = a3d.dot(&self.w4.t()) + &self.b4;
        let mut probs = z4;
        for mut row in probs.rows_mut() {
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - mx).exp());
            let sum = row.sum();
            row /= sum;
        }
        Cache {
            x1,
            z1,
            x2,
            z2,
            f,
            m1,
            z3,
            a3,
            m2,
            probs,
        }
    }

    /// Mean cross-entropy of normalized inputs against class indices
    /// (0 = Low, 1 = High).
    fn cross_entropy(probs: &Array2<f64>, y: &[usize]) -> f64 {
        -y.iter()
            .enumerate()
            .map(|(i, &c)| probs[[i, c]].max(1e-300).ln())
            .sum::<f64>()
            / y.len() as f64
    }

    fn backward(&self, cache: &Cache, y: &[usize]) -> Grads {
        let b = y.len();
        let k = self.input_len;
        let (l1, l2) = (k - 2, k - 4);

        let mut dz4 = cache.probs.clone();
        for (i, &c) in y.iter().enumerate() {
            dz4[[i, c]] -= 1.0;
        }
        dz4 /= b as f64;
        let a3d = match &cache.m2 {
            Some(m) => &cache.a3 * m,
            None => cache.a3.clone(),
        };
        let w4 = dz4.t().dot(&a3d);
        let b4 = dz4.sum_axis(Axis(0));
        let mut da3 = dz4.dot(&self.w4);
        if let Some(m) = &cache.m2 {
            da3 *= m;
        }
        let dz3 = &da3 * &cache.z3.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        let fd = match &cache.m1 {
            Some(m) => &cache.f * m,
            None => cache.f.clone(),
        };
        let w3 = dz3.t().dot(&fd);
        let b3 = dz3.sum_axis(Axis(0));
        let mut df = dz3.dot(&self.w3);
        if let Some(m) = &cache.m1 {
            df *= m;
        }

        let mut dz2 = Array2::zeros((b * l2, FILTERS));
        for i in 0..b {
            for p in 0..l2 {
                for c in 0..FILTERS {
                    let r = i * l2 + p;
                    if cache.z2[[r, c]] > 0.0 {
                        dz2[[r, c]] = df[[i, c * l2 + p]];
                    }
                }
            }
        }
        let w2 = dz2.t().dot(&cache.x2);
        let b2 = dz2.sum_axis(Axis(0));
        let dx2 = dz2.dot(&self.w2);

        let mut dz1 = Array2::zeros((b * l1, FILTERS));
        for i in 0..b {
            for p in 0..l2 {
                let row = dx2.row(i * l2 + p);
                for c in 0..FILTERS {
                    for t in 0..TAPS {
                        dz1[[i * l1 + p + t, c]] += row[c * TAPS + t];
                    }
                }
            }
        }
        dz1.zip_mut_with(&cache.z1, |d, z| {
            if *z <= 0.0 {
                *d = 0.0;
            }
        });
        let w1 = dz1.t().dot(&cache.x1);
        let b1 = dz1.sum_axis(Axis(0));
        Grads {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            w4,
            b4,
        }
    }

    fn zero_grads(&self) -> Grads {
        Grads {
            w1: Array2::zeros(self.w1.dim()),
            b1: Array1::zeros(self.b1.len()),
            w2: Array2::zeros(self.w2.dim()),
            b2: Array1::zeros(self.b2.len()),
            w3: Array2::zeros(self.w3.dim()),
            b3: Array1::zeros(self.b3.len()),
            w4: Array2::zeros(self.w4.dim()),
            b4: Array1::zeros(self.b4.len()),
        }
    }

    /// `v = mu v - lr (g + wd w)` then `w += v`; biases are not decayed.
    fn sgd_step(&mut self, g: &Grads, v: &mut Grads, cfg: &CnnConfig) {
        let (mu, lr, wd) = (cfg.momentum, cfg.lr, cfg.weight_decay);
        let weights = [
            (&mut self.w1, &g.w1, &mut v.w1),
            (&mut self.w2, &g.w2, &mut v.w2),
            (&mut self.w3, &g.w3, &mut v.w3),
            (&mut self.w4, &g.w4, &mut v.w4),
        ];
        for (w, gw, vw) in weights {
            ndarray::Zip::from(&mut *w).and(gw).and(&mut *vw).for_each(|w, &g, v| {
                *v = mu * *v - lr * (g + wd * *w);
                *w += *v;
            });
        }
        let biases = [
            (&mut self.b1, &g.b1, &mut v.b1),
            (&mut self.b2, &g.b2, &mut v.b2),
            (&mut self.b3, &g.b3, &mut v.b3),
            (&mut self.b4, &g.b4, &mut v.b4),
        ];
        for (b, gb, vb) in biases {
            ndarray::Zip::from(&mut *b).and(gb).and(&mut *vb).for_each(|b, &g, v| {
                *v = mu * *v - lr * g;
                *b += *v;
            });
        }
    }

    /// Loss `CE + wd/2 sum ||W||^2` (weights only) and its gradient on
    /// normalized inputs, without dropout.
    pub(crate) fn loss_and_grad(&self, x: ArrayView2<'_, f64>, y: &[usize]) -> (f64, Grads) {
        let cache = self.forward(x, None, None);
        let mut g = self.backward(&cache, y);
        let wd = self.config.weight_decay;
        let mut penalty = 0.0;
        for (gw, w) in [(&mut g.w1, &self.w1), (&mut g.w2, &self.w2), (&mut g.w3, &self.w3), (&mut g.w4, &self.w4)] {
            gw.scaled_add(wd, w);
            penalty += w.iter().map(|v| v * v).sum::<f64>();
        }
        (Self::cross_entropy(&cache.probs, y) + 0.5 * wd * penalty, g)
    }

    /// All parameters flattened in declaration order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend(self.w1.iter());
        v.extend(self.b1.iter());
        v.extend(self.w2.iter());
        v.extend(self.b2.iter());
        v.extend(self.w3.iter());
        v.extend(self.b3.iter());
        v.extend(self.w4.iter());
        v.extend(self.b4.iter());
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter().copied();
        for v in self.w1.iter_mut() {
            *v = it.next().expect("flat length");
        }
        for v in self.b1.iter_mut() {
            *v = it.next().expect("flat length");
        }
        for v in self.w2.iter_mut() {
            *v = it.next().expect("flat length");
        }
        for v in self.b2.iter_mut() {
            *v = it.next().expect("flat length");
        }
        for v in self.w3.iter_mut() {
            *v = it.next().expect("flat length");
        }
        for v in self.b3.iter_mut() {
            *v = it.next().expect("flat length");
        }
        for v in self.w4.iter_mut() {
            *v = it.next().expect("flat length");
        }
        for v in self.b4.iter_mut() {
            *v = it.next().expect("flat length");
        }
    }

    pub(crate) fn flatten_grads(g: &Grads) -> Vec<f64> {
        let mut v = Vec::new();
        v.extend(g.w1.iter());
        v.extend(g.b1.iter());
        v.extend(g.w2.iter());
        v.extend(g.b2.iter());
        v.extend(g.w3.iter());
        v.extend(g.b3.iter());
        v.extend(g.w4.iter());
        v.extend(g.b4.iter());
        v
    }

    /// Objective on raw inputs (normalized internally), for gradient checks.
    pub fn objective(&self, x: ArrayView2<'_, f64>, y: &[AffectLabel]) -> f64 {
        let idx = class_indices(y);
        self.loss_and_grad(self.normalise(x).view(), &idx).0
    }

    pub fn gradient(&self, x: ArrayView2<'_, f64>, y: &[AffectLabel]) -> Vec<f64> {
        let idx = class_indices(y);
        Self::flatten_grads(&self.loss_and_grad(self.normalise(x).view(), &idx).1)
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Result<Vec<Posterior>> {
        if x.ncols() != self.input_len {
            return Err(Error::DimensionMismatch {
                expected: self.input_len,
                actual: x.ncols(),
            });
        }
        if x.nrows() == 0 {
            return Ok(Vec::new());
        }
        let cache = self.forward(self.normalise(x).view(), None, None);
        Ok(cache
            .probs
            .rows()
            .into_iter()
            .map(|r| Posterior { high: r[1], low: r[0] })
            .collect())
    }
}

fn class_indices(y: &[AffectLabel]) -> Vec<usize> {
    y.iter().map(|l| usize::from(*l == AffectLabel::High)).collect()
}

fn dropout_mask(rng: &mut ChaCha8Rng, shape: (usize, usize), rate: f64) -> Option<Array2<f64>> {
    if rate <= 0.0 {
        return None;
    }
    let keep = 1.0 - rate;
    Some(Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < keep {
            1.0 / keep
        } else {
            0.0
        }
    }))
}

/// Stratified hold-out of roughly `fraction` of each class.
fn carve_validation(y: &[AffectLabel], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [AffectLabel::Low, AffectLabel::High] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        let n_val = ((idx.len() as f64 * fraction).round() as usize).min(idx.len().saturating_sub(1));
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Minibatch SGD with momentum and weight decay on cross-entropy, early
/// stopping on the validation loss. The parameters with the lowest
/// validation loss are returned.
pub fn cnn_train(x: ArrayView2<'_, f64>, y: &[AffectLabel], config: &CnnConfig) -> Result<(CnnModel, CnnTrainReport)> {
    let (n, k) = x.dim();
    if k < MIN_INPUT {
        return Err(Error::InputTooShort { actual: k, min: MIN_INPUT });
    }
    if n != y.len() {
        return Err(Error::LengthMismatch {
            what: "training labels",
            expected: n,
            actual: y.len(),
        });
    }
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite { row, col });
    }
    let highs = y.iter().filter(|l| **l == AffectLabel::High).count();
    if highs == 0 || highs == n {
        return Err(Error::SingleClass);
    }
    let mut model = CnnModel::new(k, *config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_cafe);

    model.input_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let centred = &x - &model.input_mean;
    let std = (centred.iter().map(|v| v * v).sum::<f64>() / centred.len() as f64).sqrt();
    model.input_scale = if std > 0.0 { std } else { 1.0 };
    let xn = centred / model.input_scale;
    let classes = class_indices(y);

    let (train, val) = if config.val_fraction > 0.0 {
        carve_validation(y, config.val_fraction, &mut rng)
    } else {
        ((0..n).collect(), Vec::new())
    };
    let xv = xn.select(Axis(0), &val);
    let yv: Vec<usize> = val.iter().map(|&i| classes[i]).collect();

    let flat = FILTERS * (k - 4);
    let mut velocity = model.zero_grads();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut report = CnnTrainReport {
        epochs_run: 0,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        stopped_early: false,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut order = train.clone();
    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size.max(1)) {
            let xb = xn.select(Axis(0), batch);
            let yb: Vec<usize> = batch.iter().map(|&i| classes[i]).collect();
            let m1 = dropout_mask(&mut rng, (batch.len(), flat), config.dropout);
            let m2 = dropout_mask(&mut rng, (batch.len(), HIDDEN), config.dropout);
            let cache = model.forward(xb.view(), m1, m2);
            epoch_loss += CnnModel::cross_entropy(&cache.probs, &yb) * batch.len() as f64;
            let g = model.backward(&cache, &yb);
            model.sgd_step(&g, &mut velocity, config);
        }
        report.epochs_run += 1;
        report.train_loss.push(epoch_loss / order.len() as f64);
        if !val.is_empty() {
            let vl = CnnModel::cross_entropy(&model.forward(xv.view(), None, None).probs, &yv);
            report.val_loss.push(vl);
            if best.as_ref().is_none_or(|(b, _)| vl < *b) {
                best = Some((vl, model.to_flat()));
            }
            if stopper.observe(vl) {
                report.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, params)) = best {
        model.set_flat(&params);
    }
    Ok((model, report))
}

pub fn cnn_predict_proba(m: &CnnModel, x: ArrayView2<'_, f64>) -> Result<Vec<Posterior>> {
    m.predict_proba(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn separable(n: usize, k: usize, seed: u64) -> (Array2<f64>, Vec<AffectLabel>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<AffectLabel> = (0..n)
            .map(|i| if i % 2 == 0 { AffectLabel::High } else { AffectLabel::Low })
            .collect();
        let x = Array2::from_shape_fn((n, k), |(i, _)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            y[i].sign() * 2.0 + 0.3 * z
        });
        (x, y)
    }

    #[test]
    fn early_stopping_patience() {
        let mut es = EarlyStopping::new(5);
        let stops: Vec<bool> = (1..=8).map(|e| es.observe(e as f64)).collect();
        assert_eq!(stops.iter().position(|s| *s), Some(5));
    }

    #[test]
    fn parameter_count() {
        for k in [8, 20, 57] {
            let m = CnnModel::new(k, CnnConfig::default()).unwrap();
            assert_eq!(m.param_count(), CnnModel::param_count_for(k));
            assert_eq!(m.to_flat().len(), m.param_count());
        }
        assert!(matches!(CnnModel::new(7, CnnConfig::default()), Err(Error::InputTooShort { .. })));
    }

    #[test]
    fn overfits_tiny_separable_set() {
        let (x, y) = separable(32, 10, 3);
        let cfg = CnnConfig {
            dropout: 0.0,
            val_fraction: 0.0,
            ..CnnConfig::default()
        };
        let (m, report) = cnn_train(x.view(), &y, &cfg).unwrap();
        assert!(report.epochs_run <= 100);
        let pred: Vec<AffectLabel> = m.predict_proba(x.view()).unwrap().iter().map(Posterior::label).collect();
        assert_eq!(pred, y);
    }

    #[test]
    fn constant_inputs_plateau_at_ln2() {
        let x = Array2::from_elem((40, 10), 1.5);
        let y: Vec<AffectLabel> = (0..40).map(|i| if i % 2 == 0 { AffectLabel::High } else { AffectLabel::Low }).collect();
        let cfg = CnnConfig {
            val_fraction: 0.0,
            max_epochs: 30,
            ..CnnConfig::default()
        };
        let (_, report) = cnn_train(x.view(), &y, &cfg).unwrap();
        let last = *report.train_loss.last().unwrap();
        assert!((last - 2f64.ln()).abs() < 0.05, "{last}");
    }

    #[test]
    fn deterministic_and_normalised() {
        let (x, y) = separable(40, 12, 4);
        let cfg = CnnConfig {
            max_epochs: 5,
            seed: 9,
            ..CnnConfig::default()
        };
        let (a, _) = cnn_train(x.view(), &y, &cfg).unwrap();
        let (b, _) = cnn_train(x.view(), &y, &cfg).unwrap();
        assert_eq!(a, b);
        let p1 = a.predict_proba(x.view()).unwrap();
        let p2 = a.predict_proba(x.view()).unwrap();
        assert_eq!(p1, p2);
        for p in p1 {
            assert!((p.high + p.low - 1.0).abs() < 1e-12);
        }
        assert!(a.predict_proba(Array2::zeros((1, 5)).view()).is_err());
    }
}
