//! EEG epoch conditioning: band-limiting, fixation-baseline removal,
//! temporal windowing, vectorization and PCA.

mod filter;
mod pca;

use ndarray::{s, Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::media::{TemporalWindow, Windowed};
use crate::{Error, Result};

pub use filter::{Biquad, SosFilter};
pub use pca::{pca_apply, pca_fit, pca_fit_with, PcaMethod, PcaModel};

pub const CHANNELS: usize = 14;
pub const SAMPLE_RATE: f64 = 128.0;
/// Samples in the first/last 30 s windows.
pub const SPAN_30S: usize = 3667;
/// Samples in the last 10 s window.
pub const SPAN_10S: usize = 1280;

/// One stimulus-locked recording: channels x samples in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EegEpoch {
    data: Array2<f64>,
    sample_rate: f64,
    stimulus_id: String,
    clean: bool,
    baseline: Option<Array2<f64>>,
}

impl EegEpoch {
    pub fn new(data: Array2<f64>, stimulus_id: impl Into<String>, clean: bool, baseline: Option<Array2<f64>>) -> Result<Self> {
        if data.nrows() != CHANNELS {
            return Err(Error::LengthMismatch {
                what: "EEG channels",
                expected: CHANNELS,
                actual: data.nrows(),
            });
        }
        if data.ncols() == 0 {
            return Err(Error::Empty("EEG epoch"));
        }
        if let Some(b) = &baseline {
            if b.nrows() != CHANNELS || b.ncols() == 0 {
                return Err(Error::InvalidParameter(format!(
                    "baseline shape {}x{} does not match {CHANNELS} channels",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
        Ok(EegEpoch {
            data,
            sample_rate: SAMPLE_RATE,
            stimulus_id: stimulus_id.into(),
            clean,
            baseline,
        })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn stimulus_id(&self) -> &str {
        &self.stimulus_id
    }

    pub fn is_clean(&self) -> bool {
        self.clean
    }

    pub fn baseline(&self) -> Option<&Array2<f64>> {
        self.baseline.as_ref()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    fn with_data(&self, data: Array2<f64>) -> EegEpoch {
        EegEpoch {
            data,
            sample_rate: self.sample_rate,
            stimulus_id: self.stimulus_id.clone(),
            clean: self.clean,
            baseline: self.baseline.clone(),
        }
    }
}

impl Windowed for EegEpoch {
    fn temporal_window(&self, window: TemporalWindow) -> Self {
        let (start, end) = window.range(self.samples(), SPAN_30S, SPAN_10S);
        self.with_data(self.data.slice(s![.., start..end]).to_owned())
    }
}

/// Zero-phase 4th-order Butterworth band-pass applied to every channel.
pub fn bandpass_filter(e: &EegEpoch, low: f64, high: f64) -> Result<EegEpoch> {
    let f = SosFilter::butterworth_bandpass(low, high, e.sample_rate)?;
    let mut out = e.data.clone();
    for mut row in out.rows_mut() {
        let y = f.filtfilt(&row.to_vec());
        row.assign(&Array1::from(y));
    }
    Ok(e.with_data(out))
}

/// Subtracts each channel's fixation-segment mean.
pub fn baseline_correct(e: &EegEpoch) -> Result<EegEpoch> {
    let base = e
        .baseline
        .as_ref()
        .ok_or_else(|| Error::MissingBaseline(e.stimulus_id.clone()))?;
    let means = base.mean_axis(Axis(1)).expect("baseline is non-empty");
    let out = &e.data - &means.insert_axis(Axis(1));
    Ok(e.with_data(out))
}

/// Channel-major concatenation of the windowed epoch.
pub fn vectorize(e: &EegEpoch, window: TemporalWindow) -> Array1<f64> {
    let w = e.temporal_window(window);
    Array1::from_iter(w.data.iter().copied())
}

/// Inverse of [`vectorize`] for a known channel count.
pub fn unvectorize(v: &Array1<f64>, channels: usize) -> Result<Array2<f64>> {
    if channels == 0 || v.len() % channels != 0 {
        return Err(Error::InvalidParameter(format!(
            "{} values do not split into {channels} channels",
            v.len()
        )));
    }
    Array2::from_shape_vec((channels, v.len() / channels), v.to_vec()).map_err(|e| Error::Numerical(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub low_hz: f64,
    pub high_hz: f64,
    pub window: TemporalWindow,
    /// Remove the fixation baseline before filtering when one is present.
    pub baseline: bool,
    /// Drop epochs not flagged clean.
    pub clean_only: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            low_hz: 0.1,
            high_hz: 45.0,
            window: TemporalWindow::First30,
            baseline: true,
            clean_only: false,
        }
    }
}

/// Baseline removal, band-pass, windowing and vectorization of one epoch.
pub fn preprocess_epoch(e: &EegEpoch, cfg: &PreprocessConfig) -> Result<Array1<f64>> {
    let e = match (cfg.baseline, e.baseline.is_some()) {
        (true, true) => baseline_correct(e)?,
        _ => e.clone(),
    };
    let filtered = bandpass_filter(&e, cfg.low_hz, cfg.high_hz)?;
    Ok(vectorize(&filtered, cfg.window))
}

/// Preprocesses a batch in parallel. Rows follow the retained epochs' order.
/// Epochs shorter than the window are zero-padded on the right so all rows
/// share one length.
pub fn preprocess_epochs(epochs: &[EegEpoch], cfg: &PreprocessConfig) -> Result<(Array2<f64>, Vec<usize>)> {
    let kept: Vec<usize> = (0..epochs.len())
        .filter(|&i| !cfg.clean_only || epochs[i].clean)
        .collect();
    if kept.is_empty() {
        return Err(Error::Empty("no epochs left after filtering"));
    }
    let vectors: Vec<Array1<f64>> = kept
        .par_iter()
        .map(|&i| preprocess_epoch(&epochs[i], cfg))
        .collect::<Result<_>>()?;
    let width = vectors.iter().map(|v| v.len()).max().unwrap_or(0);
    let mut rows = Array2::zeros((vectors.len(), width));
    for (r, v) in vectors.iter().enumerate() {
        rows.slice_mut(s![r, ..v.len()]).assign(v);
    }
    Ok((rows, kept))
}

/// Clean/dirty bookkeeping over an epoch set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochCounts {
    pub total: usize,
    pub clean: usize,
    pub dirty: usize,
}

pub fn epoch_counts<'a>(flags: impl IntoIterator<Item = &'a EegEpoch>) -> EpochCounts {
    let (total, clean) = flags
        .into_iter()
        .fold((0, 0), |(t, c), e| (t + 1, c + usize::from(e.clean)));
    EpochCounts {
        total,
        clean,
        dirty: total - clean,
    }
}
