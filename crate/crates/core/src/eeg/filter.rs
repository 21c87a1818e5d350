use std::f64::consts::PI;

use crate::{Error, Result};

/// One second-order section, `[b0, b1, b2, a1, a2]` with `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

/// Q factors of the two sections of a 4th-order Butterworth response.
const BUTTER4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_5];

impl Biquad {
    fn lowpass(fc: f64, fs: f64, q: f64) -> Biquad {
        let k = (PI * fc / fs).tan();
        let norm = 1.0 / (1.0 + k / q + k * k);
        let b0 = k * k * norm;
        Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
        }
    }

    fn highpass(fc: f64, fs: f64, q: f64) -> Biquad {
        let k = (PI * fc / fs).tan();
        let norm = 1.0 / (1.0 + k / q + k * k);
        Biquad {
            b: [norm, -2.0 * norm, norm],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - k / q + k * k) * norm],
        }
    }

    /// DC gain `H(1)`.
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form II state reached after a unit step has settled.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[1] * g;
        let z1 = self.b[1] - self.a[0] * g + z2;
        [z1, z2]
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// 4th-order Butterworth high-pass at `low` followed by a 4th-order
    /// Butterworth low-pass at `high`.
    pub fn butterworth_bandpass(low: f64, high: f64, fs: f64) -> Result<SosFilter> {
        if !(low > 0.0 && low < high && high < fs / 2.0) {
            return Err(Error::InvalidBand {
                low,
                high,
                sample_rate: fs,
            });
        }
        let mut sections: Vec<Biquad> = BUTTER4_Q.iter().map(|&q| Biquad::highpass(low, fs, q)).collect();
        sections.extend(BUTTER4_Q.iter().map(|&q| Biquad::lowpass(high, fs, q)));
        Ok(SosFilter { sections })
    }

    /// Causal filtering with the initial state scaled to `x[0]`.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let Some(&x0) = x.first() else { return y };
        let mut scale = x0;
        for sec in &self.sections {
            let [mut z1, mut z2] = sec.step_state().map(|z| z * scale);
            for v in y.iter_mut() {
                let input = *v;
                let out = sec.b[0] * input + z1;
                z1 = sec.b[1] * input - sec.a[0] * out + z2;
                z2 = sec.b[2] * input - sec.a[1] * out;
                *v = out;
            }
            scale *= sec.dc_gain();
        }
        y
    }

    /// Edge padding length used by [`SosFilter::filtfilt`].
    pub fn pad_len(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Zero-phase forward-backward filtering with odd reflection padding at
    /// both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = self.pad_len().min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let mut y = self.filter(&ext);
        y.reverse();
        let mut y = self.filter(&y);
        y.reverse();
        y[pad..pad + n].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn butterworth_magnitude_at_cutoff() {
        // Evaluate |H(e^{jw})| of each section directly.
        let f = SosFilter::butterworth_bandpass(0.1, 45.0, 128.0).unwrap();
        let gain = |freq: f64| -> f64 {
            let w = 2.0 * PI * freq / 128.0;
            f.sections
                .iter()
                .map(|s| {
                    let z1 = num_c(-w);
                    let z2 = num_c(-2.0 * w);
                    let num = add(add((s.b[0], 0.0), scale(z1, s.b[1])), scale(z2, s.b[2]));
                    let den = add(add((1.0, 0.0), scale(z1, s.a[0])), scale(z2, s.a[1]));
                    abs(num) / abs(den)
                })
                .product()
        };
        assert!((gain(45.0) - 0.5f64.sqrt()).abs() < 1e-6);
        assert!((gain(0.1) - 0.5f64.sqrt()).abs() < 1e-6);
        assert!((gain(10.0) - 1.0).abs() < 1e-3);

        fn num_c(t: f64) -> (f64, f64) {
            (t.cos(), t.sin())
        }
        fn add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
            (a.0 + b.0, a.1 + b.1)
        }
        fn scale(a: (f64, f64), k: f64) -> (f64, f64) {
            (a.0 * k, a.1 * k)
        }
        fn abs(a: (f64, f64)) -> f64 {
            a.0.hypot(a.1)
        }
    }

    #[test]
    fn passband_and_stopband() {
        let f = SosFilter::butterworth_bandpass(0.1, 45.0, 128.0).unwrap();
        let n = 128 * 40;
        let mid = n / 4..3 * n / 4;
        let pass = f.filtfilt(&sine(10.0, 128.0, n));
        let ratio = rms(&pass[mid.clone()]) / rms(&sine(10.0, 128.0, n)[mid.clone()]);
        assert!((ratio - 1.0).abs() < 0.05, "10 Hz gain {ratio}");
        let stop = f.filtfilt(&sine(60.0, 128.0, n));
        let db = 20.0 * (rms(&stop[mid.clone()]) / rms(&pass[mid])).log10();
        assert!(db <= -20.0, "60 Hz attenuation {db} dB");
    }

    #[test]
    fn constant_is_removed() {
        let f = SosFilter::butterworth_bandpass(0.1, 45.0, 128.0).unwrap();
        let y = f.filtfilt(&vec![3.5; 1000]);
        assert!(y.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn invalid_bands() {
        assert!(SosFilter::butterworth_bandpass(45.0, 0.1, 128.0).is_err());
        assert!(SosFilter::butterworth_bandpass(0.1, 64.0, 128.0).is_err());
        assert!(SosFilter::butterworth_bandpass(0.0, 10.0, 128.0).is_err());
    }
}
