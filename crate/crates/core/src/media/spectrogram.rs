use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::AudioClip;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFn {
    Hann,
    Hamming,
    Rectangular,
}

impl WindowFn {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let phase = 2.0 * PI * i as f64 / nf;
                match self {
                    WindowFn::Hann => 0.5 - 0.5 * phase.cos(),
                    WindowFn::Hamming => 0.54 - 0.46 * phase.cos(),
                    WindowFn::Rectangular => 1.0,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub window_fn: WindowFn,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            window_ms: 40.0,
            hop_ms: 20.0,
            window_fn: WindowFn::Hann,
        }
    }
}

impl StftConfig {
    pub fn window_len(&self, sample_rate: u32) -> usize {
        (self.window_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        ((self.hop_ms * sample_rate as f64 / 1000.0).round() as usize).max(1)
    }
}

/// Linear magnitude spectrogram: frames x (window/2 + 1) one-sided bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub window_len: usize,
    pub hop_len: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn bins(&self) -> usize {
        self.magnitudes.ncols()
    }

    /// Centre frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate as f64 / self.window_len as f64
    }

    /// Index of the strongest bin in each frame.
    pub fn peak_bins(&self) -> Vec<usize> {
        self.magnitudes
            .rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (k, &m)| if m > best.1 { (k, m) } else { best })
                    .0
            })
            .collect()
    }

    /// Energy implied by the one-sided magnitudes,
    /// `sum |X_k|^2 / N` with interior bins counted twice.
    pub fn spectral_energy(&self) -> f64 {
        let n = self.window_len;
        let last = self.bins() - 1;
        let mut total = 0.0;
        for row in self.magnitudes.rows() {
            for (k, m) in row.iter().enumerate() {
                let w = if k == 0 || (n % 2 == 0 && k == last) { 1.0 } else { 2.0 };
                total += w * m * m;
            }
        }
        total / n as f64
    }

    /// `20 log10(|X| + floor)`, for display.
    pub fn to_db(&self, floor: f64) -> Array2<f64> {
        self.magnitudes.mapv(|m| 20.0 * (m + floor).log10())
    }
}

/// Short-time Fourier magnitude of the channel-averaged clip. Yields
/// `floor((N - W) / H) + 1` frames.
pub fn stft_spectrogram(a: &AudioClip, cfg: &StftConfig) -> Result<Spectrogram> {
    let mono = a.to_mono();
    let x = mono.samples();
    let sr = a.sample_rate();
    let w = cfg.window_len(sr);
    let h = cfg.hop_len(sr);
    if w == 0 || x.len() < w {
        return Err(Error::TooShort {
            samples: x.len(),
            needed: w.max(1),
        });
    }
    let frames = (x.len() - w) / h + 1;
    let bins = w / 2 + 1;
    let window = cfg.window_fn.coefficients(w);
    let fft = FftPlanner::new().plan_fft_forward(w);
    let mut buf = vec![Complex::new(0.0, 0.0); w];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut magnitudes = Array2::zeros((frames, bins));
    for f in 0..frames {
        let start = f * h;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(x[start + i] * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for k in 0..bins {
            magnitudes[[f, k]] = buf[k].norm();
        }
    }
    Ok(Spectrogram {
        magnitudes,
        window_ms: cfg.window_ms,
        hop_ms: cfg.hop_ms,
        window_len: w,
        hop_len: h,
        sample_rate: sr,
    })
}

/// One spectrogram per consecutive `segment_s`-second block. A trailing
/// partial block is kept when it holds at least one window.
pub fn segment_spectrograms(a: &AudioClip, segment_s: f64, cfg: &StftConfig) -> Result<Vec<Spectrogram>> {
    let seg = (segment_s * a.sample_rate() as f64).round() as usize;
    if seg == 0 {
        return Err(Error::InvalidParameter(format!("segment length {segment_s} s is empty")));
    }
    let w = cfg.window_len(a.sample_rate());
    let total = a.frames();
    let mut out = Vec::new();
    let mut start = 0;
    while start < total {
        let end = (start + seg).min(total);
        if end - start < w {
            break;
        }
        out.push(stft_spectrogram(&a.slice(start, end), cfg)?);
        start = end;
    }
    if out.is_empty() {
        return Err(Error::TooShort { samples: total, needed: w });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, sr: u32, seconds: f64) -> AudioClip {
        let n = (seconds * sr as f64) as usize;
        let samples = (0..n).map(|i| (2.0 * PI * freq * i as f64 / sr as f64).sin()).collect();
        AudioClip::mono(samples, sr).unwrap()
    }

    /// Direct O(N^2) DFT magnitude of one frame.
    fn dft_magnitudes(frame: &[f64]) -> Vec<f64> {
        let n = frame.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, x) in frame.iter().enumerate() {
                    let ang = -2.0 * PI * (k * t) as f64 / n as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn silence_is_zero() {
        let clip = AudioClip::mono(vec![0.0; 16000], 16000).unwrap();
        let sg = stft_spectrogram(&clip, &StftConfig::default()).unwrap();
        assert!(sg.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn kilohertz_tone_peaks_at_bin_40() {
        let clip = tone(1000.0, 16000, 10.0);
        let sg = stft_spectrogram(&clip, &StftConfig::default()).unwrap();
        assert_eq!(sg.window_len, 640);
        assert_eq!(sg.hop_len, 320);
        assert_eq!(sg.frames(), 499);
        assert_eq!(sg.bin_hz(1), 25.0);
        assert!(sg.peak_bins().iter().all(|&k| k == 40));
    }

    #[test]
    fn matches_direct_dft() {
        let clip = tone(1000.0, 16000, 0.1);
        let cfg = StftConfig::default();
        let sg = stft_spectrogram(&clip, &cfg).unwrap();
        let win = cfg.window_fn.coefficients(640);
        let frame: Vec<f64> = clip.samples()[320..960].iter().zip(&win).map(|(x, w)| x * w).collect();
        let oracle = dft_magnitudes(&frame);
        let peak = oracle
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (k, &m)| if m > b.1 { (k, m) } else { b })
            .0;
        assert_eq!(peak, 40);
        for (a, b) in sg.magnitudes.row(1).iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn parseval_rectangular() {
        let sr = 16000;
        let n = 640 * 25;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / sr as f64;
                0.5 * (2.0 * PI * 440.0 * t).sin() + 0.25 * (2.0 * PI * 3130.0 * t).cos() + 0.1 * ((i * 37 % 101) as f64 / 101.0 - 0.5)
            })
            .collect();
        let clip = AudioClip::mono(samples.clone(), sr).unwrap();
        let cfg = StftConfig {
            window_ms: 40.0,
            hop_ms: 40.0,
            window_fn: WindowFn::Rectangular,
        };
        let sg = stft_spectrogram(&clip, &cfg).unwrap();
        let time_energy: f64 = samples.iter().map(|x| x * x).sum();
        assert!((sg.spectral_energy() - time_energy).abs() / time_energy < 1e-6);
    }

    #[test]
    fn too_short_and_segments() {
        let short = AudioClip::mono(vec![0.0; 100], 16000).unwrap();
        assert!(matches!(
            stft_spectrogram(&short, &StftConfig::default()),
            Err(Error::TooShort { .. })
        ));
        let clip = tone(500.0, 8000, 25.0);
        let segs = segment_spectrograms(&clip, 10.0, &StftConfig::default()).unwrap();
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[0].frames(), (80000 - 320) / 160 + 1);
    }

    #[test]
    fn stereo_is_mixed() {
        let l = tone(1000.0, 16000, 0.5);
        let interleaved: Vec<f64> = l.samples().iter().flat_map(|&x| [x, x]).collect();
        let stereo = AudioClip::new(interleaved, 16000, 2).unwrap();
        let a = stft_spectrogram(&l, &StftConfig::default()).unwrap();
        let b = stft_spectrogram(&stereo, &StftConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
