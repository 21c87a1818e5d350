//! Seeded generators for quadrant-structured features, rating matrices,
//! synthetic EEG and test media.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{AffectLabel, Attribute, FeatureMatrix, Quadrant, RatingMatrix};
use crate::eeg::{EegEpoch, CHANNELS, SAMPLE_RATE};
use crate::media::{AudioClip, Frame, FrameSequence};
use crate::{Error, Result};

/// Distance of every task centre from the origin.
const CENTRE_RADIUS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub n_per_task: usize,
    pub dims: usize,
    /// Distance between the two class means of a task along its weight.
    pub class_separation: f64,
    /// Cosine between each task's weight and the shared direction.
    pub task_correlation: f64,
    pub noise_std: f64,
}

impl Default for GenSpec {
    fn default() -> Self {
        GenSpec {
            seed: 7,
            n_per_task: 30,
            dims: 10,
            class_separation: 2.0,
            task_correlation: 0.9,
            noise_std: 0.5,
        }
    }
}

impl GenSpec {
    fn validate(&self) -> Result<()> {
        if self.n_per_task < 2 || self.dims < 2 {
            return Err(Error::InvalidParameter("n_per_task and dims must be at least 2".into()));
        }
        if !(self.class_separation >= 0.0 && self.noise_std >= 0.0 && (0.0..=1.0).contains(&self.task_correlation)) {
            return Err(Error::InvalidParameter(format!("invalid generator spec {self:?}")));
        }
        Ok(())
    }
}

/// Generated features with the ground truth behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadrantData {
    pub features: FeatureMatrix,
    /// `dims x 4`, unit column per task in [`Quadrant::ALL`] order.
    pub weights: Array2<f64>,
    /// `dims x 4` task centres, each orthogonal to its weight.
    pub centres: Array2<f64>,
    /// Noiseless projection `w_t . (x - mu_t)` of every item.
    pub projections: Vec<f64>,
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || StandardNormal.sample(rng))
}

fn unit(v: Array1<f64>) -> Array1<f64> {
    let n = v.dot(&v).sqrt();
    v / n
}

/// Random unit vector orthogonal to every vector in `basis` (assumed
/// orthonormal).
fn orthogonal_unit(rng: &mut ChaCha8Rng, dims: usize, basis: &[&Array1<f64>]) -> Array1<f64> {
    let mut v = gaussian(rng, dims);
    for b in basis {
        let c = v.dot(*b);
        v.scaled_add(-c, *b);
    }
    unit(v)
}

pub fn gen_quadrant_data(spec: &GenSpec) -> Result<FeatureMatrix> {
    Ok(gen_quadrant_data_full(spec)?.features)
}

/// Four tasks, one per quadrant. Task `t` has weight
/// `w_t = c u + sqrt(1 - c^2) e_t` for a shared unit `u` and task-specific
/// unit `e_t` orthogonal to it, and a centre `mu_t` orthogonal to `w_t`.
/// Labels are balanced within each task; an item of label `l` sits at
/// `mu_t + l (s / 2) w_t` plus isotropic noise of std `noise_std`.
pub fn gen_quadrant_data_full(spec: &GenSpec) -> Result<QuadrantData> {
    spec.validate()?;
    let d = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u = unit(gaussian(&mut rng, d));
    let c = spec.task_correlation;
    let mut weights = Array2::zeros((d, 4));
    let mut centres = Array2::zeros((d, 4));
    for t in 0..4 {
        let e = orthogonal_unit(&mut rng, d, &[&u]);
        let s = (1.0 - c * c).sqrt();
        let w = &u * c + &e * s;
        let side = Quadrant::ALL[t].arousal.sign();
        let mu = (&u * s - &e * c) * (CENTRE_RADIUS * side);
        weights.column_mut(t).assign(&w);
        centres.column_mut(t).assign(&mu);
    }

    let n = 4 * spec.n_per_task;
    let mut rows = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut tasks = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    let mut projections = Vec::with_capacity(n);
    for (t, q) in Quadrant::ALL.iter().enumerate() {
        let mut task_labels: Vec<AffectLabel> = (0..spec.n_per_task)
            .map(|i| if i % 2 == 0 { AffectLabel::High } else { AffectLabel::Low })
            .collect();
        task_labels.shuffle(&mut rng);
        let w = weights.column(t);
        for (i, label) in task_labels.into_iter().enumerate() {
            let r = t * spec.n_per_task + i;
            let offset = label.sign() * spec.class_separation / 2.0;
            let noise = gaussian(&mut rng, d) * spec.noise_std;
            let x = &centres.column(t) + &(&w * offset) + &noise;
            rows.row_mut(r).assign(&x);
            projections.push(offset);
            labels.push(label);
            tasks.push(*q);
            ids.push(format!("q{}_{i:03}", q.code()));
        }
    }
    Ok(QuadrantData {
        features: FeatureMatrix::new(rows, labels, tasks, ids)?,
        weights,
        centres,
        projections,
    })
}

/// Same features with labels permuted by a seeded shuffle.
pub fn shuffle_labels(x: &FeatureMatrix, seed: u64) -> Result<FeatureMatrix> {
    let mut labels = x.labels().to_vec();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    x.with_labels(labels)
}

/// Integer ratings on the attribute's scale. Each rating blends a shared
/// latent item score (weight `agreement_level`) with an independent draw
/// for that rater (weight `1 - agreement_level`), rounded to the scale.
pub fn gen_rating_matrix(raters: usize, items: usize, agreement_level: f64, seed: u64, attribute: Attribute) -> Result<RatingMatrix> {
    if raters < 2 || items == 0 {
        return Err(Error::InvalidParameter(format!("{raters} raters x {items} items")));
    }
    if !(0.0..=1.0).contains(&agreement_level) {
        return Err(Error::InvalidParameter(format!("agreement level {agreement_level}")));
    }
    let (lo, hi) = attribute.default_scale();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent: Vec<f64> = (0..items).map(|_| rng.random_range(lo..=hi)).collect();
    let values = Array2::from_shape_fn((raters, items), |(_, i)| {
        let own: f64 = rng.random_range(lo..=hi);
        let v = agreement_level * latent[i] + (1.0 - agreement_level) * own;
        Some(v.round().clamp(lo, hi) + 0.0)
    });
    RatingMatrix::new(
        values,
        (0..raters).map(|r| format!("r{r:02}")).collect(),
        (0..items).map(|i| format!("ad{i:03}")).collect(),
        (lo, hi),
        attribute,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EegGenSpec {
    pub seed: u64,
    pub epochs: usize,
    pub samples: usize,
    /// Ratio of in-band sinusoid power to noise power for positive epochs.
    pub snr: f64,
    pub class_band: (f64, f64),
    /// Fraction of epochs flagged as not clean.
    pub dirty_fraction: f64,
}

impl Default for EegGenSpec {
    fn default() -> Self {
        EegGenSpec {
            seed: 7,
            epochs: 40,
            samples: 512,
            snr: 10.0,
            class_band: (8.0, 12.0),
            dirty_fraction: 0.0,
        }
    }
}

/// White noise through two cascaded one-pole low-pass stages, scaled to
/// unit variance.
fn pinkish(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    const POLES: [f64; 2] = [0.5, 0.9];
    let mut x: Vec<f64> = (0..n + 256).map(|_| StandardNormal.sample(rng)).collect();
    for a in POLES {
        let mut y = 0.0;
        for v in x.iter_mut() {
            y = a * y + (1.0 - a) * *v;
            *v = y;
        }
    }
    let x = x.split_off(256);
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    x.into_iter().map(|v| (v - mean) / sd).collect()
}

/// Balanced epochs with a one-second baseline each. Positive epochs carry a
/// stimulus-locked sinusoid whose frequency (inside `class_band`) and
/// per-channel phases are drawn once per data set. Every channel also
/// carries a constant offset shared with its baseline.
pub fn gen_synthetic_eeg(spec: &EegGenSpec) -> Result<Vec<(EegEpoch, AffectLabel)>> {
    let (lo, hi) = spec.class_band;
    if !(lo > 0.1 && lo < hi && hi < 45.0) {
        return Err(Error::InvalidBand {
            low: lo,
            high: hi,
            sample_rate: SAMPLE_RATE,
        });
    }
    if spec.samples == 0 || spec.epochs == 0 || spec.snr < 0.0 {
        return Err(Error::InvalidParameter(format!("invalid EEG spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base_len = SAMPLE_RATE as usize;
    let dirty = (spec.epochs as f64 * spec.dirty_fraction).round() as usize;
    let amplitude = (2.0 * spec.snr).sqrt();
    let freq = rng.random_range(lo..hi);
    let phases: Vec<f64> = (0..CHANNELS).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    (0..spec.epochs)
        .map(|e| {
            let label = if e % 2 == 0 { AffectLabel::High } else { AffectLabel::Low };
            let mut data = Array2::zeros((CHANNELS, spec.samples));
            let mut baseline = Array2::zeros((CHANNELS, base_len));
            for (ch, &phase) in phases.iter().enumerate() {
                let offset: f64 = rng.random_range(-20.0..20.0);
                let noise = pinkish(&mut rng, base_len + spec.samples);
                for (j, v) in noise[..base_len].iter().enumerate() {
                    baseline[[ch, j]] = offset + v;
                }
                for (j, v) in noise[base_len..].iter().enumerate() {
                    let mut s = offset + v;
                    if label == AffectLabel::High {
                        s += amplitude * (2.0 * PI * freq * j as f64 / SAMPLE_RATE + phase).sin();
                    }
                    data[[ch, j]] = s;
                }
            }
            let epoch = EegEpoch::new(data, format!("stim{e:04}"), e >= dirty, Some(baseline))?;
            Ok((epoch, label))
        })
        .collect()
}

/// Parameters of a synthetic test clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MediaSpec {
    Tone {
        freq_hz: f64,
        sample_rate: u32,
        seconds: f64,
        amplitude: f64,
    },
    Sweep {
        start_hz: f64,
        end_hz: f64,
        sample_rate: u32,
        seconds: f64,
    },
    /// Black frames, then white from frame `cut_at` on.
    CutSequence {
        frames: usize,
        cut_at: usize,
        fps: f64,
        width: usize,
        height: usize,
    },
    /// Identical colour-gradient frames.
    StaticSequence {
        frames: usize,
        fps: f64,
        width: usize,
        height: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Media {
    Audio(AudioClip),
    Video(FrameSequence),
}

pub fn gen_test_media(spec: &MediaSpec) -> Result<Media> {
    match *spec {
        MediaSpec::Tone {
            freq_hz,
            sample_rate,
            seconds,
            amplitude,
        } => {
            let n = (seconds * sample_rate as f64).round() as usize;
            let sr = sample_rate as f64;
            let samples = (0..n).map(|i| amplitude * (2.0 * PI * freq_hz * i as f64 / sr).sin()).collect();
            Ok(Media::Audio(AudioClip::mono(samples, sample_rate)?))
        }
        MediaSpec::Sweep {
            start_hz,
            end_hz,
            sample_rate,
            seconds,
        } => {
            let n = (seconds * sample_rate as f64).round() as usize;
            let sr = sample_rate as f64;
            let rate = (end_hz - start_hz) / seconds;
            let samples = (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    0.5 * (2.0 * PI * (start_hz * t + 0.5 * rate * t * t)).sin()
                })
                .collect();
            Ok(Media::Audio(AudioClip::mono(samples, sample_rate)?))
        }
        MediaSpec::CutSequence {
            frames,
            cut_at,
            fps,
            width,
            height,
        } => {
            let seq = (0..frames)
                .map(|i| Frame::filled(width, height, if i < cut_at { [0.0; 3] } else { [1.0; 3] }))
                .collect();
            Ok(Media::Video(FrameSequence::new(seq, fps)?))
        }
        MediaSpec::StaticSequence { frames, fps, width, height } => {
            let mut data = Vec::with_capacity(width * height * 3);
            for y in 0..height {
                for x in 0..width {
                    let r = x as f32 / width.max(1) as f32;
                    let g = y as f32 / height.max(1) as f32;
                    data.extend([r, g, 0.5]);
                }
            }
            let frame = Frame::new(width, height, data)?;
            Ok(Media::Video(FrameSequence::new(vec![frame; frames], fps)?))
        }
    }
}
