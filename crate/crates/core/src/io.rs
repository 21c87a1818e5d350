//! On-disk formats: feature and posterior CSVs, WAV audio, PPM frame
//! directories, EEG binaries with JSON sidecars, scene/ad documents and
//! model documents. Writers are atomic.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{AffectLabel, FeatureMatrix, Quadrant};
use crate::eeg::{EegEpoch, CHANNELS, SAMPLE_RATE};
use crate::eval::TrainedModel;
use crate::learners::Posterior;
use crate::media::{AudioClip, DescriptorSeries, Frame, FrameSequence, Spectrogram};
use crate::schedule::{AdScore, SceneRecord};
use crate::{Error, Result};

/// Version stamped into model documents.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("`{}` has no file name", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_error(path, line, e.to_string())
}

/// `item_id,label,quadrant,f0,f1,...`.
pub fn features_csv(x: &FeatureMatrix) -> String {
    let mut out = String::from("item_id,label,quadrant");
    for j in 0..x.dims() {
        let _ = write!(out, ",f{j}");
    }
    out.push('\n');
    for i in 0..x.len() {
        let _ = write!(out, "{},{},{}", x.item_ids()[i], x.labels()[i], x.tasks()[i]);
        for v in x.rows().row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_features(path: &Path, x: &FeatureMatrix) -> Result<()> {
    write_atomic(path, features_csv(x).as_bytes())
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut tasks = Vec::new();
    let mut ids = Vec::new();
    let mut dims = None;
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < 3 {
            return Err(parse_error(path, line, "expected item_id,label,quadrant columns"));
        }
        let d = rec.len() - 3;
        if *dims.get_or_insert(d) != d {
            return Err(parse_error(path, line, format!("{d} features, earlier rows have {}", dims.unwrap_or(0))));
        }
        ids.push(rec[0].to_string());
        labels.push(rec[1].parse::<AffectLabel>().map_err(|e| parse_error(path, line, e.to_string()))?);
        tasks.push(rec[2].parse::<Quadrant>().map_err(|e| parse_error(path, line, e.to_string()))?);
        for field in rec.iter().skip(3) {
            rows.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse_error(path, line, format!("`{field}`: {e}")))?,
            );
        }
    }
    let n = ids.len();
    let rows = Array2::from_shape_vec((n, dims.unwrap_or(0)), rows).map_err(|e| Error::Format(e.to_string()))?;
    FeatureMatrix::new(rows, labels, tasks, ids)
}

/// `item_id,p_high,p_low,label`.
pub fn posteriors_csv(ids: &[String], p: &[Posterior]) -> Result<String> {
    if ids.len() != p.len() {
        return Err(Error::Misaligned(format!("{} ids for {} posteriors", ids.len(), p.len())));
    }
    let mut out = String::from("item_id,p_high,p_low,label\n");
    for (id, q) in ids.iter().zip(p) {
        let _ = writeln!(out, "{id},{},{},{}", q.high, q.low, q.label());
    }
    Ok(out)
}

pub fn read_posteriors(path: &Path) -> Result<(Vec<String>, Vec<Posterior>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut ids = Vec::new();
    let mut ps = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() < 3 {
            return Err(parse_error(path, line, "expected item_id,p_high,p_low"));
        }
        let num = |i: usize| rec[i].trim().parse::<f64>().map_err(|e| parse_error(path, line, e.to_string()));
        ids.push(rec[0].to_string());
        ps.push(Posterior {
            high: num(1)?,
            low: num(2)?,
        });
    }
    Ok((ids, ps))
}

/// Reads 16-bit integer or 32-bit float PCM.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => return Err(Error::Format(format!("{bits}-bit {fmt:?} WAV"))),
    };
    AudioClip::new(samples, spec.sample_rate, spec.channels)
}

/// Writes 32-bit float PCM.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: clip.channels(),
        sample_rate: clip.sample_rate(),
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut buf = std::io::Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut buf, spec)?;
        for s in clip.samples() {
            w.write_sample(*s as f32)?;
        }
        w.finalize()?;
    }
    write_atomic(path, buf.get_ref())
}

/// Name of the frame-rate sidecar inside a frame directory.
pub const FPS_FILE: &str = "fps.txt";

fn frame_name(i: usize) -> String {
    format!("frame_{i:06}.ppm")
}

fn parse_ppm(path: &Path, bytes: &[u8]) -> Result<Frame> {
    let bad = |m: &str| Error::Format(format!("{}: {m}", path.display()));
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("header is not text"))?.to_string());
    }
    if fields[0] != "P6" {
        return Err(bad("not a binary PPM (P6)"));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit PPM is supported"));
    }
    pos += 1;
    let body = bytes.get(pos..pos + w * h * 3).ok_or_else(|| bad("truncated pixel data"))?;
    Frame::new(w, h, body.iter().map(|&b| b as f32 / maxval as f32).collect())
}

fn ppm_bytes(f: &Frame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", f.width(), f.height()).into_bytes();
    out.extend(f.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

pub fn read_frames(dir: &Path) -> Result<FrameSequence> {
    let fps_text = fs::read_to_string(dir.join(FPS_FILE))?;
    let fps: f64 = fps_text
        .trim()
        .parse()
        .map_err(|_| parse_error(&dir.join(FPS_FILE), 1, format!("bad fps `{}`", fps_text.trim())))?;
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("frame_") && n.ends_with(".ppm"))
        .collect();
    names.sort();
    let frames = names
        .iter()
        .map(|n| {
            let p = dir.join(n);
            parse_ppm(&p, &fs::read(&p)?)
        })
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, fps)
}

pub fn write_frames(dir: &Path, seq: &FrameSequence) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in seq.frames().iter().enumerate() {
        write_atomic(&dir.join(frame_name(i)), &ppm_bytes(f))?;
    }
    write_atomic(&dir.join(FPS_FILE), format!("{}\n", seq.frame_rate()).as_bytes())
}

/// JSON sidecar of an EEG binary. The binary holds, per channel, the
/// `baseline_offset` baseline samples followed by the `samples` epoch
/// samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegSidecar {
    pub channels: usize,
    pub sample_rate: f64,
    pub samples: usize,
    pub stimulus_id: String,
    pub clean: bool,
    pub baseline_offset: usize,
}

/// Sidecar path for an EEG binary: same stem, `.json` extension.
pub fn eeg_sidecar_path(bin: &Path) -> PathBuf {
    bin.with_extension("json")
}

pub fn write_eeg(bin: &Path, e: &EegEpoch) -> Result<()> {
    let base = e.baseline().map_or(0, |b| b.ncols());
    let mut bytes = Vec::with_capacity(CHANNELS * (base + e.samples()) * 4);
    for ch in 0..CHANNELS {
        if let Some(b) = e.baseline() {
            for v in b.row(ch) {
                bytes.extend((*v as f32).to_le_bytes());
            }
        }
        for v in e.data().row(ch) {
            bytes.extend((*v as f32).to_le_bytes());
        }
    }
    let sidecar = EegSidecar {
        channels: CHANNELS,
        sample_rate: e.sample_rate(),
        samples: e.samples(),
        stimulus_id: e.stimulus_id().to_string(),
        clean: e.is_clean(),
        baseline_offset: base,
    };
    write_atomic(bin, &bytes)?;
    write_atomic(&eeg_sidecar_path(bin), serde_json::to_string_pretty(&sidecar)?.as_bytes())
}

pub fn read_eeg(bin: &Path) -> Result<EegEpoch> {
    let sidecar: EegSidecar = serde_json::from_str(&fs::read_to_string(eeg_sidecar_path(bin))?)?;
    if sidecar.channels != CHANNELS || sidecar.sample_rate != SAMPLE_RATE {
        return Err(Error::Format(format!(
            "EEG must have {CHANNELS} channels at {SAMPLE_RATE} Hz, sidecar declares {} at {}",
            sidecar.channels, sidecar.sample_rate
        )));
    }
    let bytes = fs::read(bin)?;
    let per_channel = sidecar.baseline_offset + sidecar.samples;
    if bytes.len() != CHANNELS * per_channel * 4 {
        return Err(Error::Format(format!(
            "{}: {} bytes, sidecar implies {}",
            bin.display(),
            bytes.len(),
            CHANNELS * per_channel * 4
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let all = Array2::from_shape_vec((CHANNELS, per_channel), values).map_err(|e| Error::Format(e.to_string()))?;
    let base = sidecar.baseline_offset;
    let baseline = (base > 0).then(|| all.slice(ndarray::s![.., ..base]).to_owned());
    let data = all.slice(ndarray::s![.., base..]).to_owned();
    EegEpoch::new(data, sidecar.stimulus_id, sidecar.clean, baseline)
}

/// `second,<descriptor names>`.
pub fn descriptor_csv(d: &DescriptorSeries) -> String {
    let mut out = String::from("second");
    for n in d.names() {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for (s, row) in d.values().rows().into_iter().enumerate() {
        let _ = write!(out, "{s}");
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// A `#` header line with window, hop and rate, then one row of bin
/// magnitudes per frame.
pub fn spectrogram_csv(s: &Spectrogram) -> String {
    let mut out = format!(
        "# window_ms={},hop_ms={},sample_rate={},window_len={},hop_len={}\n",
        s.window_ms, s.hop_ms, s.sample_rate, s.window_len, s.hop_len
    );
    for row in s.magnitudes.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn read_scenes(path: &Path) -> Result<Vec<SceneRecord>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_ads(path: &Path) -> Result<Vec<AdScore>> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub kind: String,
    pub model: TrainedModel,
}

pub fn model_json(m: &TrainedModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelDocument {
        format_version: MODEL_FORMAT_VERSION,
        kind: m.name().to_string(),
        model: m.clone(),
    })?)
}

pub fn save_model(path: &Path, m: &TrainedModel) -> Result<()> {
    write_atomic(path, model_json(m)?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let doc: ModelDocument = serde_json::from_str(&fs::read_to_string(path)?)?;
    if doc.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!("model format version {}", doc.format_version)));
    }
    Ok(doc.model)
}
