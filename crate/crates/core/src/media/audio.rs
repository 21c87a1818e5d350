use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{AudioClip, DescriptorSeries};
use crate::{Error, Result};

/// Column names of [`hanjalic_audio`] output.
pub const AUDIO_DESCRIPTORS: [&str; 4] = ["sound_energy", "pitch_mean", "pitch_std", "voiced_fraction"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioDescriptorConfig {
    /// Pitch analysis frame length.
    pub frame_ms: f64,
    pub min_pitch_hz: f64,
    pub max_pitch_hz: f64,
    /// Minimum normalized autocorrelation peak for a voiced frame.
    pub voicing_threshold: f64,
    /// Optional Kaiser smoothing `(length in seconds, beta)` over the series.
    pub smoothing: Option<(usize, f64)>,
}

impl Default for AudioDescriptorConfig {
    fn default() -> Self {
        AudioDescriptorConfig {
            frame_ms: 40.0,
            min_pitch_hz: 60.0,
            max_pitch_hz: 500.0,
            voicing_threshold: 0.3,
            smoothing: None,
        }
    }
}

/// Per-second sound energy (mean square amplitude) and pitch statistics over
/// voiced frames. Unvoiced seconds report pitch 0 and voiced fraction 0.
pub fn hanjalic_audio(a: &AudioClip, cfg: &AudioDescriptorConfig) -> Result<DescriptorSeries> {
    let mono = a.to_mono();
    let x = mono.samples();
    let sr = a.sample_rate() as usize;
    let seconds = x.len() / sr;
    if seconds == 0 {
        return Err(Error::TooShort { samples: x.len(), needed: sr });
    }
    let frame = ((cfg.frame_ms * sr as f64 / 1000.0).round() as usize).max(2);
    let min_lag = ((sr as f64 / cfg.max_pitch_hz).ceil() as usize).max(1);
    let max_lag = ((sr as f64 / cfg.min_pitch_hz).floor() as usize).min(frame - 1);

    let mut values = Array2::zeros((seconds, AUDIO_DESCRIPTORS.len()));
    for s in 0..seconds {
        let block = &x[s * sr..(s + 1) * sr];
        values[[s, 0]] = block.iter().map(|v| v * v).sum::<f64>() / sr as f64;

        let pitches: Vec<f64> = block
            .chunks_exact(frame)
            .filter_map(|f| frame_pitch(f, sr as f64, min_lag, max_lag, cfg.voicing_threshold))
            .collect();
        let n_frames = (sr / frame).max(1);
        if !pitches.is_empty() {
            let mean = pitches.iter().sum::<f64>() / pitches.len() as f64;
            let var = pitches.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / pitches.len() as f64;
            values[[s, 1]] = mean;
            values[[s, 2]] = var.sqrt();
            values[[s, 3]] = pitches.len() as f64 / n_frames as f64;
        }
    }
    let series = DescriptorSeries::new(values, AUDIO_DESCRIPTORS.iter().map(|s| s.to_string()).collect())?;
    Ok(match cfg.smoothing {
        Some((len, beta)) => smooth_kaiser(&series, len, beta),
        None => series,
    })
}

/// Autocorrelation pitch of one frame, `None` when unvoiced.
fn frame_pitch(frame: &[f64], sr: f64, min_lag: usize, max_lag: usize, threshold: f64) -> Option<f64> {
    if min_lag >= max_lag {
        return None;
    }
    let mean = frame.iter().sum::<f64>() / frame.len() as f64;
    let centred: Vec<f64> = frame.iter().map(|v| v - mean).collect();
    let acf = |lag: usize| -> f64 {
        centred[..centred.len() - lag]
            .iter()
            .zip(&centred[lag..])
            .map(|(a, b)| a * b)
            .sum()
    };
    let r0 = acf(0);
    if r0 <= 1e-12 {
        return None;
    }
    let lo = min_lag.saturating_sub(1).max(1);
    let hi = (max_lag + 1).min(centred.len() - 1);
    let r: Vec<f64> = (lo..=hi).map(|lag| acf(lag) / r0).collect();

    // Highest local maximum within [min_lag, max_lag].
    let mut best: Option<(usize, f64)> = None;
    for i in 1..r.len() - 1 {
        let lag = lo + i;
        if lag < min_lag || lag > max_lag {
            continue;
        }
        if r[i] >= r[i - 1] && r[i] >= r[i + 1] && best.is_none_or(|(_, v)| r[i] > v) {
            best = Some((i, r[i]));
        }
    }
    let (i, peak) = best?;
    if peak < threshold {
        return None;
    }
    // Parabolic refinement of the peak position.
    let (a, b, c) = (r[i - 1], r[i], r[i + 1]);
    let denom = a - 2.0 * b + c;
    let offset = if denom.abs() > 1e-12 { 0.5 * (a - c) / denom } else { 0.0 };
    Some(sr / ((lo + i) as f64 + offset.clamp(-0.5, 0.5)))
}

/// Kaiser window of length `len` (zeroth-order Bessel form).
pub fn kaiser_window(len: usize, beta: f64) -> Vec<f64> {
    if len <= 1 {
        return vec![1.0; len];
    }
    let denom = bessel_i0(beta);
    let m = (len - 1) as f64;
    (0..len)
        .map(|n| {
            let r = 2.0 * n as f64 / m - 1.0;
            bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom
        })
        .collect()
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..60 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Centred Kaiser-weighted moving average of every column, renormalised at
/// the edges.
pub fn smooth_kaiser(series: &DescriptorSeries, len: usize, beta: f64) -> DescriptorSeries {
    let w = kaiser_window(len.max(1), beta);
    let half = w.len() / 2;
    let v = series.values();
    let rows = v.nrows();
    let out = Array2::from_shape_fn(v.dim(), |(r, c)| {
        let (mut acc, mut norm) = (0.0, 0.0);
        for (k, wk) in w.iter().enumerate() {
            let idx = r as isize + k as isize - half as isize;
            if idx >= 0 && (idx as usize) < rows {
                acc += wk * v[[idx as usize, c]];
                norm += wk;
            }
        }
        acc / norm
    });
    DescriptorSeries::new(out, series.names().to_vec()).expect("smoothing preserves finiteness")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sawtooth(freq: f64, sr: u32, seconds: f64, amp: f64) -> AudioClip {
        let n = (seconds * sr as f64) as usize;
        let samples = (0..n)
            .map(|i| {
                let phase = (freq * i as f64 / sr as f64).fract();
                amp * (2.0 * phase - 1.0)
            })
            .collect();
        AudioClip::mono(samples, sr).unwrap()
    }

    #[test]
    fn zero_signal() {
        let clip = AudioClip::mono(vec![0.0; 32000], 16000).unwrap();
        let d = hanjalic_audio(&clip, &AudioDescriptorConfig::default()).unwrap();
        assert_eq!(d.seconds(), 2);
        assert!(d.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn square_wave_energy() {
        let samples: Vec<f64> = (0..16000).map(|i| if (i / 40) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let clip = AudioClip::mono(samples, 16000).unwrap();
        let d = hanjalic_audio(&clip, &AudioDescriptorConfig::default()).unwrap();
        assert_eq!(d.values()[[0, 0]], 1.0);
    }

    #[test]
    fn sawtooth_pitch() {
        let clip = sawtooth(200.0, 16000, 3.0, 0.8);
        let d = hanjalic_audio(&clip, &AudioDescriptorConfig::default()).unwrap();
        for s in 0..3 {
            let p = d.values()[[s, 1]];
            assert!((p - 200.0).abs() < 4.0, "second {s}: pitch {p}");
            assert_eq!(d.values()[[s, 3]], 1.0);
        }
    }

    #[test]
    fn non_integer_period_pitch() {
        // 16000 / 220 = 72.7 samples per period; needs the parabolic step.
        let n = 16000;
        let samples = (0..n).map(|i| (2.0 * PI * 220.0 * i as f64 / 16000.0).sin()).collect();
        let clip = AudioClip::mono(samples, 16000).unwrap();
        let d = hanjalic_audio(&clip, &AudioDescriptorConfig::default()).unwrap();
        assert!((d.values()[[0, 1]] - 220.0).abs() < 2.0);
    }

    #[test]
    fn scaling_scales_energy_not_pitch() {
        let cfg = AudioDescriptorConfig::default();
        let a = hanjalic_audio(&sawtooth(150.0, 16000, 2.0, 0.2), &cfg).unwrap();
        let b = hanjalic_audio(&sawtooth(150.0, 16000, 2.0, 0.6), &cfg).unwrap();
        for s in 0..2 {
            let ratio = b.values()[[s, 0]] / a.values()[[s, 0]];
            assert!((ratio - 9.0).abs() < 1e-9);
            assert!((a.values()[[s, 1]] - b.values()[[s, 1]]).abs() < 1.0);
        }
    }

    #[test]
    fn kaiser_window_shape() {
        let w = kaiser_window(5, 4.0);
        assert!((w[2] - 1.0).abs() < 1e-15);
        assert!((w[0] - w[4]).abs() < 1e-15 && w[0] < w[1]);
        let values = Array2::from_elem((6, 1), 3.0);
        let series = DescriptorSeries::new(values, vec!["x".into()]).unwrap();
        let sm = smooth_kaiser(&series, 3, 2.0);
        assert!(sm.values().iter().all(|v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn sub_second_clip_is_rejected() {
        let clip = AudioClip::mono(vec![0.0; 100], 16000).unwrap();
        assert!(hanjalic_audio(&clip, &AudioDescriptorConfig::default()).is_err());
    }
}
