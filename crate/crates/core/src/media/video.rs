use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DescriptorSeries, Frame, FrameSequence};
use crate::{Error, Result};

/// Column names of [`hanjalic_video`] output.
pub const VIDEO_DESCRIPTORS: [&str; 3] = ["shot_changes", "motion_activity", "colorfulness"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoDescriptorConfig {
    pub histogram_bins: usize,
    /// Cut threshold is `mean + k * std` of the clip's histogram distances.
    pub threshold_std: f64,
    /// Distances at or below this floor never count as cuts.
    pub min_distance: f64,
}

impl Default for VideoDescriptorConfig {
    fn default() -> Self {
        VideoDescriptorConfig {
            histogram_bins: 64,
            threshold_std: 3.0,
            min_distance: 0.2,
        }
    }
}

/// Keyframe indices at `t = 0, period, 2 period, ...` strictly below the clip
/// duration.
pub fn sample_keyframes(v: &FrameSequence, period_s: f64) -> Vec<usize> {
    if v.is_empty() || !(period_s > 0.0) {
        return Vec::new();
    }
    let duration = v.duration_s();
    let mut out = Vec::new();
    let mut m = 0usize;
    loop {
        let t = m as f64 * period_s;
        if t >= duration - 1e-9 {
            break;
        }
        let idx = ((t * v.frame_rate()) + 1e-9).floor() as usize;
        if idx >= v.len() {
            break;
        }
        out.push(idx);
        m += 1;
    }
    out
}

fn luma_histogram(luma: &[f32], bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &y in luma {
        let b = ((y.clamp(0.0, 1.0) * bins as f32) as usize).min(bins - 1);
        h[b] += 1.0;
    }
    let n = luma.len().max(1) as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

/// Opponent-axis colorfulness: `sqrt(s_rg^2 + s_yb^2) + 0.3 sqrt(m_rg^2 + m_yb^2)`.
pub fn colorfulness(frame: &Frame) -> f64 {
    let n = (frame.width() * frame.height()).max(1) as f64;
    let (mut srg, mut syb, mut srg2, mut syb2) = (0.0, 0.0, 0.0, 0.0);
    for [r, g, b] in frame.pixels() {
        let rg = (r - g) as f64;
        let yb = 0.5 * (r + g) as f64 - b as f64;
        srg += rg;
        syb += yb;
        srg2 += rg * rg;
        syb2 += yb * yb;
    }
    let (mrg, myb) = (srg / n, syb / n);
    let vrg = (srg2 / n - mrg * mrg).max(0.0);
    let vyb = (syb2 / n - myb * myb).max(0.0);
    (vrg + vyb).sqrt() + 0.3 * (mrg * mrg + myb * myb).sqrt()
}

/// Per-second shot-change count, motion activity (mean absolute luma
/// difference between consecutive frames) and mean colorfulness. The frame
/// pair `(i - 1, i)` belongs to the second containing frame `i`.
pub fn hanjalic_video(v: &FrameSequence, cfg: &VideoDescriptorConfig) -> Result<DescriptorSeries> {
    if v.len() < 2 {
        return Err(Error::TooShort {
            samples: v.len(),
            needed: 2,
        });
    }
    if cfg.histogram_bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let fps = v.frame_rate();
    let second_of = |i: usize| (i as f64 / fps + 1e-9).floor() as usize;
    let seconds = second_of(v.len()).max(1);

    let lumas: Vec<Vec<f32>> = v.frames().iter().map(Frame::luma).collect();
    let hists: Vec<Vec<f64>> = lumas.iter().map(|l| luma_histogram(l, cfg.histogram_bins)).collect();
    let dists: Vec<f64> = hists
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).sum())
        .collect();
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    let std = (dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / dists.len() as f64).sqrt();
    let threshold = (mean + cfg.threshold_std * std).max(cfg.min_distance);

    let mut values = Array2::zeros((seconds, VIDEO_DESCRIPTORS.len()));
    let mut pairs = vec![0usize; seconds];
    let mut frames = vec![0usize; seconds];
    for (i, frame) in v.frames().iter().enumerate() {
        let s = second_of(i);
        if s >= seconds {
            break;
        }
        values[[s, 2]] += colorfulness(frame);
        frames[s] += 1;
        if i > 0 {
            let d = dists[i - 1];
            if d > threshold {
                values[[s, 0]] += 1.0;
            }
            let (a, b) = (&lumas[i - 1], &lumas[i]);
            let motion = a.iter().zip(b).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.len().max(1) as f64;
            values[[s, 1]] += motion;
            pairs[s] += 1;
        }
    }
    for s in 0..seconds {
        if pairs[s] > 0 {
            values[[s, 1]] /= pairs[s] as f64;
        }
        if frames[s] > 0 {
            values[[s, 2]] /= frames[s] as f64;
        }
    }
    DescriptorSeries::new(values, VIDEO_DESCRIPTORS.iter().map(|s| s.to_string()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sequence(n: usize, fps: f64, f: impl Fn(usize) -> [f32; 3]) -> FrameSequence {
        FrameSequence::new((0..n).map(|i| Frame::filled(8, 6, f(i))).collect(), fps).unwrap()
    }

    #[test]
    fn keyframes_every_three_seconds() {
        let v = sequence(1500, 25.0, |_| [0.0; 3]);
        let k = sample_keyframes(&v, 3.0);
        assert_eq!(k.len(), 20);
        assert_eq!(&k[..3], &[0, 75, 150]);
        let short = sequence(50, 25.0, |_| [0.0; 3]);
        assert_eq!(sample_keyframes(&short, 3.0), vec![0]);
    }

    #[test]
    fn static_frames() {
        let v = sequence(100, 25.0, |_| [0.4, 0.4, 0.4]);
        let d = hanjalic_video(&v, &VideoDescriptorConfig::default()).unwrap();
        assert_eq!(d.seconds(), 4);
        assert!(d.values().iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn single_hard_cut() {
        let v = sequence(125, 25.0, |i| if i < 50 { [0.0; 3] } else { [1.0; 3] });
        let d = hanjalic_video(&v, &VideoDescriptorConfig::default()).unwrap();
        let shots = d.column("shot_changes").unwrap();
        assert_eq!(shots, vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        let motion = d.column("motion_activity").unwrap();
        assert!(motion[2] > 0.0 && motion[1] == 0.0);
    }

    #[test]
    fn colorfulness_of_pure_colours() {
        assert_eq!(colorfulness(&Frame::filled(4, 4, [0.5, 0.5, 0.5])), 0.0);
        // Uniform red: rg = 1, yb = 0.5, no spread.
        let red = colorfulness(&Frame::filled(4, 4, [1.0, 0.0, 0.0]));
        assert!((red - 0.3 * 1.25f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn brightness_offset_keeps_cut_count() {
        let base = |i: usize| if i < 60 { [0.1f32; 3] } else { [0.8f32; 3] };
        let a = hanjalic_video(&sequence(100, 25.0, base), &VideoDescriptorConfig::default()).unwrap();
        let shifted = |i: usize| base(i).map(|c| c + 0.005);
        let b = hanjalic_video(&sequence(100, 25.0, shifted), &VideoDescriptorConfig::default()).unwrap();
        assert_eq!(a.column("shot_changes"), b.column("shot_changes"));
    }

    #[test]
    fn needs_two_frames() {
        assert!(hanjalic_video(&sequence(1, 25.0, |_| [0.0; 3]), &VideoDescriptorConfig::default()).is_err());
    }
}
