use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use adaffect::io::write_atomic;

const SECTIONS: [&str; 13] = [
    "cnn",
    "mtl",
    "shallow",
    "svm_grid",
    "cv",
    "fusion",
    "ga",
    "preprocess",
    "audio",
    "video",
    "stft",
    "quadrant",
    "eeg",
];

/// Seed and config file shared by every subcommand.
pub struct Context {
    pub seed: u64,
    config: Map<String, Value>,
    config_path: Option<PathBuf>,
}

/// Replaces fields of `base` with those of `patch`, recursing into objects.
/// Keys absent from `base` are rejected.
fn overlay(base: &mut Value, patch: &Value, at: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let path = format!("{at}.{k}");
                match b.get_mut(k) {
                    Some(slot) => overlay(slot, v, &path)?,
                    None => bail!("unknown config key `{path}`"),
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
    Ok(())
}

impl Context {
    pub fn new(seed: u64, config: Option<&Path>) -> Result<Self> {
        let map = match config {
            None => Map::new(),
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
                let Value::Object(map) = value else {
                    bail!("config {} must be a JSON object", path.display());
                };
                if let Some(k) = map.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
                    bail!("unknown config section `{k}` (expected one of {})", SECTIONS.join(", "));
                }
                map
            }
        };
        Ok(Context {
            seed,
            config: map,
            config_path: config.map(Path::to_path_buf),
        })
    }

    /// `default` with the named config section laid over it.
    pub fn section<T: Serialize + DeserializeOwned>(&self, name: &str, default: T) -> Result<T> {
        debug_assert!(SECTIONS.contains(&name));
        let Some(patch) = self.config.get(name) else {
            return Ok(default);
        };
        let mut base = serde_json::to_value(&default)?;
        overlay(&mut base, patch, name)?;
        serde_json::from_value(base).with_context(|| format!("config section `{name}`"))
    }

    /// Writes `bytes` to `out` atomically, then the run-metadata sidecar.
    pub fn emit(&self, command: &str, out: &Path, bytes: &[u8], settings: Value) -> Result<()> {
        write_atomic(out, bytes).with_context(|| format!("writing {}", out.display()))?;
        self.write_meta(command, out, settings)
    }

    /// Writes `<out>.meta.json` describing the run that produced `out`.
    pub fn write_meta(&self, command: &str, out: &Path, settings: Value) -> Result<()> {
        let meta = json!({
            "tool": "adaffect",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": command,
            "seed": self.seed,
            "config_file": self.config_path.as_ref().map(|p| p.display().to_string()),
            "settings": settings,
        });
        let path = meta_path(out);
        let text = serde_json::to_string_pretty(&meta)? + "\n";
        write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn meta_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

pub fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(())
}

pub fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        bail!("input directory {} does not exist", path.display());
    }
    Ok(())
}

/// The output's parent directory must already exist.
pub fn require_output(path: &Path) -> Result<()> {
    if path.file_name().is_none() {
        bail!("output path {} has no file name", path.display());
    }
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            bail!("output directory {} does not exist", p.display())
        }
        _ => Ok(()),
    }
}
