//! Content-side descriptors: keyframes, spectrograms and the low-level
//! audio/video affect correlates (sound energy, pitch, shot changes, motion,
//! colorfulness).

mod audio;
mod spectrogram;
mod video;

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use audio::{hanjalic_audio, kaiser_window, smooth_kaiser, AudioDescriptorConfig, AUDIO_DESCRIPTORS};
pub use spectrogram::{segment_spectrograms, stft_spectrogram, Spectrogram, StftConfig, WindowFn};
pub use video::{colorfulness, hanjalic_video, sample_keyframes, VideoDescriptorConfig, VIDEO_DESCRIPTORS};

/// PCM audio with interleaved channels, samples in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    channels: u16,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, channels: u16) -> Result<Self> {
        if sample_rate == 0 || channels == 0 {
            return Err(Error::InvalidParameter("sample rate and channel count must be positive".into()));
        }
        if samples.len() % channels as usize != 0 {
            return Err(Error::InvalidParameter(format!(
                "{} samples do not divide into {channels} channels",
                samples.len()
            )));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
            channels,
        })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(samples, sample_rate, 1)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    /// Samples per channel.
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    /// Channel average; a single track regardless of the input layout.
    pub fn to_mono(&self) -> AudioClip {
        if self.channels == 1 {
            return self.clone();
        }
        let c = self.channels as usize;
        let samples = self
            .samples
            .chunks_exact(c)
            .map(|frame| frame.iter().sum::<f64>() / c as f64)
            .collect();
        AudioClip {
            samples,
            sample_rate: self.sample_rate,
            channels: 1,
        }
    }

    /// Mono sub-clip `[start, end)` in per-channel sample indices.
    pub fn slice(&self, start: usize, end: usize) -> AudioClip {
        let c = self.channels as usize;
        AudioClip {
            samples: self.samples[start * c..end * c].to_vec(),
            sample_rate: self.sample_rate,
            channels: self.channels,
        }
    }
}

/// One RGB frame, row-major, interleaved channels, intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::LengthMismatch {
                what: "frame pixels",
                expected: width * height * 3,
                actual: data.len(),
            });
        }
        Ok(Frame { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Frame { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f32; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    /// Rec. 601 luma per pixel.
    pub fn luma(&self) -> Vec<f32> {
        self.pixels()
            .map(|[r, g, b]| 0.299 * r + 0.587 * g + 0.114 * b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    frame_rate: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, frame_rate: f64) -> Result<Self> {
        if !(frame_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("frame rate {frame_rate} must be positive")));
        }
        if let Some(first) = frames.first() {
            if let Some(bad) = frames.iter().find(|f| f.width != first.width || f.height != first.height) {
                return Err(Error::InvalidParameter(format!(
                    "frame size {}x{} differs from {}x{}",
                    bad.width, bad.height, first.width, first.height
                )));
            }
        }
        Ok(FrameSequence { frames, frame_rate })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.frames.len() as f64 / self.frame_rate
    }
}

/// Per-second descriptor table: one row per full second, one named column
/// per descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSeries {
    values: Array2<f64>,
    names: Vec<String>,
}

impl DescriptorSeries {
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::LengthMismatch {
                what: "descriptor names",
                expected: values.ncols(),
                actual: names.len(),
            });
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(DescriptorSeries { values, names })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn seconds(&self) -> usize {
        self.values.nrows()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.names.iter().position(|n| n == name)?;
        Some(self.values.column(c).to_vec())
    }

    /// Per-column mean over time: a fixed-length summary of the clip.
    pub fn column_means(&self) -> Vec<f64> {
        let n = self.values.nrows().max(1) as f64;
        self.values.columns().into_iter().map(|c| c.sum() / n).collect()
    }
}

/// Temporal analysis span: the whole clip, the first or last 30 s, or the
/// last 10 s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalWindow {
    All,
    First30,
    Last30,
    Last10,
}

impl TemporalWindow {
    pub fn name(self) -> &'static str {
        match self {
            TemporalWindow::All => "all",
            TemporalWindow::First30 => "first30",
            TemporalWindow::Last30 => "last30",
            TemporalWindow::Last10 => "last10",
        }
    }

    /// Row range `[start, end)` selected from a series of `len` units, when
    /// the window spans `span` units. Short inputs return everything.
    pub fn range(self, len: usize, span30: usize, span10: usize) -> (usize, usize) {
        match self {
            TemporalWindow::All => (0, len),
            TemporalWindow::First30 => (0, span30.min(len)),
            TemporalWindow::Last30 => (len.saturating_sub(span30), len),
            TemporalWindow::Last10 => (len.saturating_sub(span10), len),
        }
    }
}

impl fmt::Display for TemporalWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemporalWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(TemporalWindow::All),
            "first30" | "f30" => Ok(TemporalWindow::First30),
            "last30" | "l30" => Ok(TemporalWindow::Last30),
            "last10" | "l10" => Ok(TemporalWindow::Last10),
            other => Err(Error::Format(format!("unknown temporal window `{other}`"))),
        }
    }
}

/// Truncation to a [`TemporalWindow`].
pub trait Windowed: Sized {
    fn temporal_window(&self, window: TemporalWindow) -> Self;
}

impl Windowed for DescriptorSeries {
    fn temporal_window(&self, window: TemporalWindow) -> Self {
        let (start, end) = window.range(self.values.nrows(), 30, 10);
        DescriptorSeries {
            values: self.values.slice(s![start..end, ..]).to_owned(),
            names: self.names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(rows: usize) -> DescriptorSeries {
        let values = Array2::from_shape_fn((rows, 2), |(r, c)| (r * 10 + c) as f64);
        DescriptorSeries::new(values, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn windows_on_series() {
        let s60 = series(60);
        let l10 = s60.temporal_window(TemporalWindow::Last10);
        assert_eq!(l10.seconds(), 10);
        assert_eq!(l10.values()[[0, 0]], 500.0);
        assert_eq!(s60.temporal_window(TemporalWindow::First30).values()[[29, 0]], 290.0);
        assert_eq!(s60.temporal_window(TemporalWindow::All).seconds(), 60);

        let s8 = series(8);
        assert_eq!(s8.temporal_window(TemporalWindow::Last30), s8);
    }

    #[test]
    fn stereo_mixdown() {
        let clip = AudioClip::new(vec![1.0, 0.0, 0.5, 0.5, -1.0, 1.0], 8000, 2).unwrap();
        assert_eq!(clip.to_mono().samples(), &[0.5, 0.5, 0.0]);
        assert!(AudioClip::new(vec![0.0; 3], 8000, 2).is_err());
    }

    #[test]
    fn frame_sequence_rejects_mixed_sizes() {
        let a = Frame::filled(2, 2, [0.0; 3]);
        let b = Frame::filled(3, 2, [0.0; 3]);
        assert!(FrameSequence::new(vec![a, b], 25.0).is_err());
    }
}
