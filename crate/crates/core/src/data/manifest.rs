//! Dataset manifest: JSON lines, one ad per line, with an optional header
//! line pointing at the ratings CSV and declaring the rating scales.
//!
//! ```text
//! {"ratings": "ratings.csv", "scales": {"valence": [-2, 2], "arousal": [0, 4]}}
//! {"id": "ad001", "duration_s": 48.2, "expert_arousal": "H", "expert_valence": "H"}
//! ```
//!
//! Ratings CSV header: `rater_id,item_id,attribute,score`. An empty score
//! is a missing rating.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{AdRecord, AffectLabel, Attribute, Quadrant, RatingMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    /// Ratings CSV, relative to the manifest's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scales: BTreeMap<Attribute, (f64, f64)>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestLine {
    id: String,
    duration_s: f64,
    expert_arousal: String,
    expert_valence: String,
    #[serde(default)]
    asl_score: Option<f64>,
    #[serde(default)]
    val_score: Option<f64>,
}

/// Ads plus whatever rating matrices the manifest references.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<AdRecord>,
    pub arousal: Option<RatingMatrix>,
    pub valence: Option<RatingMatrix>,
}

impl Dataset {
    pub fn ratings(&self, attribute: Attribute) -> Option<&RatingMatrix> {
        match attribute {
            Attribute::Arousal => self.arousal.as_ref(),
            Attribute::Valence => self.valence.as_ref(),
        }
    }

    /// Number of ads per quadrant in canonical order.
    pub fn quadrant_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for r in &self.records {
            counts[r.expert_quadrant.index()] += 1;
        }
        counts
    }

    pub fn record(&self, id: &str) -> Option<&AdRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Reads a manifest and, if its header names one, the ratings CSV.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut header = ManifestHeader::default();
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| parse_err(line_no, e.to_string()))?;
        if value.get("id").is_none() {
            if !records.is_empty() {
                return Err(parse_err(line_no, "header must precede ad records".into()));
            }
            header = serde_json::from_value(value).map_err(|e| parse_err(line_no, e.to_string()))?;
            continue;
        }
        let rec: ManifestLine =
            serde_json::from_value(value).map_err(|e| parse_err(line_no, e.to_string()))?;
        let arousal: AffectLabel = rec.expert_arousal.parse().map_err(|e: Error| parse_err(line_no, e.to_string()))?;
        let valence: AffectLabel = rec.expert_valence.parse().map_err(|e: Error| parse_err(line_no, e.to_string()))?;
        let record = AdRecord {
            id: rec.id,
            duration_s: rec.duration_s,
            expert_quadrant: Quadrant::new(arousal, valence),
            asl_score: rec.asl_score,
            val_score: rec.val_score,
        };
        record.validate().map_err(|e| parse_err(line_no, e.to_string()))?;
        if !seen.insert(record.id.clone()) {
            return Err(parse_err(line_no, format!("duplicate ad id `{}`", record.id)));
        }
        records.push(record);
    }

    let (mut arousal, mut valence) = (None, None);
    if let Some(rel) = &header.ratings {
        let ratings_path = path.parent().unwrap_or(Path::new(".")).join(rel);
        let items: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
        let mut matrices = parse_ratings_csv(&ratings_path, Some(&items), &header.scales)?;
        arousal = matrices.remove(&Attribute::Arousal);
        valence = matrices.remove(&Attribute::Valence);
    }
    Ok(Dataset {
        records,
        arousal,
        valence,
    })
}

/// Parses a `rater_id,item_id,attribute,score` CSV into one matrix per
/// attribute. With `items` given, columns follow that order and unknown item
/// ids are rejected; otherwise columns follow first appearance. Raters are
/// sorted by id.
pub fn parse_ratings_csv(
    path: &Path,
    items: Option<&[String]>,
    scales: &BTreeMap<Attribute, (f64, f64)>,
) -> Result<BTreeMap<Attribute, RatingMatrix>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, 1, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, 1, e))?.clone();
    let expected = ["rater_id", "item_id", "attribute", "score"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }

    let mut item_order: Vec<String> = items.map(<[String]>::to_vec).unwrap_or_default();
    let mut item_index: HashMap<String, usize> =
        item_order.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
    let mut cells: BTreeMap<Attribute, Vec<(String, usize, Option<f64>, usize)>> = BTreeMap::new();

    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| csv_err(path, line, e))?;
        let perr = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let rater = row[0].to_string();
        let item = row[1].to_string();
        let attribute: Attribute = row[2].parse().map_err(|e: Error| perr(e.to_string()))?;
        let score = match &row[3] {
            "" | "NA" | "nan" => None,
            s => Some(s.parse::<f64>().map_err(|e| perr(format!("bad score `{s}`: {e}")))?),
        };
        let col = match item_index.get(&item) {
            Some(&c) => c,
            None if items.is_some() => return Err(perr(format!("rating for unknown item `{item}`"))),
            None => {
                item_order.push(item.clone());
                item_index.insert(item.clone(), item_order.len() - 1);
                item_order.len() - 1
            }
        };
        cells.entry(attribute).or_default().push((rater, col, score, line));
    }

    let mut out = BTreeMap::new();
    for (attribute, entries) in cells {
        let raters: Vec<String> = entries
            .iter()
            .map(|e| e.0.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let rater_index: HashMap<&str, usize> =
            raters.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let mut values = Array2::from_elem((raters.len(), item_order.len()), None);
        for (rater, col, score, line) in &entries {
            let r = rater_index[rater.as_str()];
            if values[[r, *col]].is_some() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: *line,
                    message: format!("duplicate rating by `{rater}` for `{}`", item_order[*col]),
                });
            }
            values[[r, *col]] = *score;
        }
        let scale = scales
            .get(&attribute)
            .copied()
            .unwrap_or_else(|| attribute.default_scale());
        let matrix = RatingMatrix::new(values, raters, item_order.clone(), scale, attribute)?;
        out.insert(attribute, matrix);
    }
    Ok(out)
}

fn csv_err(path: &Path, line: usize, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(line);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn four_quadrants() {
        let dir = tempfile::tempdir().unwrap();
        let m = write(
            dir.path(),
            "m.jsonl",
            r#"{"ratings": "r.csv", "scales": {"valence": [-2, 2], "arousal": [0, 4]}}
{"id": "a", "duration_s": 30, "expert_arousal": "H", "expert_valence": "H"}
{"id": "b", "duration_s": 40, "expert_arousal": "H", "expert_valence": "L"}
{"id": "c", "duration_s": 50, "expert_arousal": "L", "expert_valence": "H"}
{"id": "d", "duration_s": 60, "expert_arousal": "L", "expert_valence": "L"}
"#,
        );
        write(
            dir.path(),
            "r.csv",
            "rater_id,item_id,attribute,score\nu1,a,valence,2\nu1,b,valence,-1\nu2,a,valence,1\nu1,a,arousal,4\nu2,d,arousal,\n",
        );
        let ds = load_manifest(&m).unwrap();
        assert_eq!(ds.records.len(), 4);
        assert_eq!(ds.quadrant_counts(), [1, 1, 1, 1]);
        let val = ds.valence.as_ref().unwrap();
        assert_eq!(val.scale(), (-2.0, 2.0));
        assert_eq!(val.item_ids(), &["a", "b", "c", "d"]);
        assert_eq!(val.item_mean("a"), Some(1.5));
        let asl = ds.arousal.as_ref().unwrap();
        assert_eq!(asl.values()[[1, 3]], None);
    }

    #[test]
    fn scale_violation_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let m = write(
            dir.path(),
            "m.jsonl",
            "{\"ratings\": \"r.csv\"}\n{\"id\": \"a\", \"duration_s\": 30, \"expert_arousal\": \"H\", \"expert_valence\": \"H\"}\n",
        );
        write(dir.path(), "r.csv", "rater_id,item_id,attribute,score\nu1,a,valence,3\n");
        match load_manifest(&m) {
            Err(Error::ScaleViolation { rater, item, value, .. }) => {
                assert_eq!((rater.as_str(), item.as_str(), value), ("u1", "a", 3.0));
            }
            other => panic!("expected scale violation, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let m = write(
            dir.path(),
            "m.jsonl",
            "{\"id\": \"a\", \"duration_s\": 30, \"expert_arousal\": \"H\", \"expert_valence\": \"H\"}\n{\"id\": \"b\", \"duration_s\": oops}\n",
        );
        match load_manifest(&m) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_label = write(
            dir.path(),
            "b.jsonl",
            "{\"id\": \"a\", \"duration_s\": 30, \"expert_arousal\": \"X\", \"expert_valence\": \"H\"}\n",
        );
        assert!(matches!(load_manifest(&bad_label), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn table_row_mean_length() {
        // Five H/H ads whose lengths average to 48.16 s.
        let dir = tempfile::tempdir().unwrap();
        let body: String = [40.0, 45.5, 48.16, 50.84, 56.3]
            .iter()
            .enumerate()
            .map(|(i, d)| {
                format!("{{\"id\": \"hh{i}\", \"duration_s\": {d}, \"expert_arousal\": \"H\", \"expert_valence\": \"H\"}}\n")
            })
            .collect();
        let m = write(dir.path(), "m.jsonl", &body);
        let ds = load_manifest(&m).unwrap();
        let s = crate::data::quadrant_summary(&ds.records, None, None).unwrap();
        assert_eq!(s[0].quadrant, Quadrant::HH);
        assert!((s[0].mean_length_s - 48.16).abs() < 1e-9);
    }
}
