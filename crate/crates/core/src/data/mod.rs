//! Domain types shared across the pipeline, plus rating normalization and
//! per-quadrant bookkeeping.

mod manifest;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use manifest::{load_manifest, parse_ratings_csv, Dataset, ManifestHeader};

/// Binary affect level. `High > Low`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AffectLabel {
    Low,
    High,
}

impl AffectLabel {
    pub fn code(self) -> &'static str {
        match self {
            AffectLabel::High => "H",
            AffectLabel::Low => "L",
        }
    }

    /// `+1` for High, `-1` for Low.
    pub fn sign(self) -> f64 {
        match self {
            AffectLabel::High => 1.0,
            AffectLabel::Low => -1.0,
        }
    }

    /// Strictly positive scores are High; zero breaks toward Low.
    pub fn from_score(score: f64) -> Self {
        if score > 0.0 {
            AffectLabel::High
        } else {
            AffectLabel::Low
        }
    }

    pub fn flip(self) -> Self {
        match self {
            AffectLabel::High => AffectLabel::Low,
            AffectLabel::Low => AffectLabel::High,
        }
    }
}

impl fmt::Display for AffectLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for AffectLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "H" | "h" | "High" | "high" => Ok(AffectLabel::High),
            "L" | "l" | "Low" | "low" => Ok(AffectLabel::Low),
            other => Err(Error::Format(format!("unknown affect label `{other}`"))),
        }
    }
}

/// Rated affect dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Valence,
    Arousal,
}

impl Attribute {
    pub fn name(self) -> &'static str {
        match self {
            Attribute::Valence => "valence",
            Attribute::Arousal => "arousal",
        }
    }

    /// Rating scale used by the annotation protocol: valence in [-2, 2],
    /// arousal in [0, 4].
    pub fn default_scale(self) -> (f64, f64) {
        match self {
            Attribute::Valence => (-2.0, 2.0),
            Attribute::Arousal => (0.0, 4.0),
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "valence" | "val" => Ok(Attribute::Valence),
            "arousal" | "asl" => Ok(Attribute::Arousal),
            other => Err(Error::Format(format!("unknown attribute `{other}`"))),
        }
    }
}

/// One cell of the arousal x valence plane. Doubles as a multi-task id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Quadrant {
    pub arousal: AffectLabel,
    pub valence: AffectLabel,
}

impl Quadrant {
    pub const HH: Quadrant = Quadrant::new(AffectLabel::High, AffectLabel::High);
    pub const HL: Quadrant = Quadrant::new(AffectLabel::High, AffectLabel::Low);
    pub const LH: Quadrant = Quadrant::new(AffectLabel::Low, AffectLabel::High);
    pub const LL: Quadrant = Quadrant::new(AffectLabel::Low, AffectLabel::Low);

    /// All four quadrants in canonical task order.
    pub const ALL: [Quadrant; 4] = [Self::HH, Self::HL, Self::LH, Self::LL];

    pub const fn new(arousal: AffectLabel, valence: AffectLabel) -> Self {
        Quadrant { arousal, valence }
    }

    pub fn label(self, attribute: Attribute) -> AffectLabel {
        match attribute {
            Attribute::Arousal => self.arousal,
            Attribute::Valence => self.valence,
        }
    }

    /// Related quadrants share the arousal or the valence level.
    pub fn is_related(self, other: Quadrant) -> bool {
        self != other && (self.arousal == other.arousal || self.valence == other.valence)
    }

    /// Position in [`Quadrant::ALL`].
    pub fn index(self) -> usize {
        Self::ALL.iter().position(|q| *q == self).expect("all quadrants are enumerated")
    }

    /// Two-letter code, arousal first: `"HL"` is high arousal, low valence.
    pub fn code(self) -> String {
        format!("{}{}", self.arousal.code(), self.valence.code())
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.arousal, self.valence)
    }
}

impl FromStr for Quadrant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut chars = s.chars();
        match (chars.next(), chars.next(), chars.next()) {
            (Some(a), Some(v), None) => Ok(Quadrant::new(
                a.to_string().parse()?,
                v.to_string().parse()?,
            )),
            _ => Err(Error::Format(format!("unknown quadrant `{s}`"))),
        }
    }
}

/// Catalogue entry for one ad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdRecord {
    pub id: String,
    pub duration_s: f64,
    pub expert_quadrant: Quadrant,
    pub asl_score: Option<f64>,
    pub val_score: Option<f64>,
}

impl AdRecord {
    pub fn new(id: impl Into<String>, duration_s: f64, expert_quadrant: Quadrant) -> Result<Self> {
        let record = AdRecord {
            id: id.into(),
            duration_s,
            expert_quadrant,
            asl_score: None,
            val_score: None,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ad `{}` has non-positive duration {}",
                self.id, self.duration_s
            )));
        }
        for (name, score) in [("asl_score", self.asl_score), ("val_score", self.val_score)] {
            if let Some(s) = score {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::InvalidParameter(format!(
                        "ad `{}` has {name} {s} outside [0, 1]",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Raters x items grid of ordinal scores on a declared scale.
/// `None` marks a missing rating.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    values: Array2<Option<f64>>,
    rater_ids: Vec<String>,
    item_ids: Vec<String>,
    scale_min: f64,
    scale_max: f64,
    attribute: Attribute,
}

impl RatingMatrix {
    /// Builds a matrix, checking every present value against the scale.
    pub fn new(
        values: Array2<Option<f64>>,
        rater_ids: Vec<String>,
        item_ids: Vec<String>,
        scale: (f64, f64),
        attribute: Attribute,
    ) -> Result<Self> {
        let (scale_min, scale_max) = scale;
        if !(scale_min < scale_max) {
            return Err(Error::InvalidParameter(format!(
                "scale [{scale_min}, {scale_max}] is empty"
            )));
        }
        if rater_ids.len() != values.nrows() {
            return Err(Error::LengthMismatch {
                what: "rater ids",
                expected: values.nrows(),
                actual: rater_ids.len(),
            });
        }
        if item_ids.len() != values.ncols() {
            return Err(Error::LengthMismatch {
                what: "item ids",
                expected: values.ncols(),
                actual: item_ids.len(),
            });
        }
        for ((r, i), v) in values.indexed_iter() {
            if let Some(v) = *v {
                if !v.is_finite() || v < scale_min || v > scale_max {
                    return Err(Error::ScaleViolation {
                        rater: rater_ids[r].clone(),
                        item: item_ids[i].clone(),
                        attribute: attribute.name().to_string(),
                        value: v,
                        min: scale_min,
                        max: scale_max,
                    });
                }
            }
        }
        Ok(RatingMatrix {
            values,
            rater_ids,
            item_ids,
            scale_min,
            scale_max,
            attribute,
        })
    }

    /// Convenience constructor with generated ids (`r0..`, `i0..`).
    pub fn from_rows(rows: &[Vec<Option<f64>>], scale: (f64, f64), attribute: Attribute) -> Result<Self> {
        let n_raters = rows.len();
        let n_items = rows.first().map_or(0, Vec::len);
        let mut values = Array2::from_elem((n_raters, n_items), None);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_items {
                return Err(Error::LengthMismatch {
                    what: "rating row",
                    expected: n_items,
                    actual: row.len(),
                });
            }
            for (i, v) in row.iter().enumerate() {
                values[[r, i]] = *v;
            }
        }
        let raters = (0..n_raters).map(|r| format!("r{r}")).collect();
        let items = (0..n_items).map(|i| format!("i{i}")).collect();
        Self::new(values, raters, items, scale, attribute)
    }

    pub fn values(&self) -> &Array2<Option<f64>> {
        &self.values
    }

    pub fn rater_ids(&self) -> &[String] {
        &self.rater_ids
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn scale(&self) -> (f64, f64) {
        (self.scale_min, self.scale_max)
    }

    pub fn attribute(&self) -> Attribute {
        self.attribute
    }

    pub fn n_raters(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.values.ncols()
    }

    /// Mean over raters for each item; `None` where nobody rated the item.
    pub fn item_means(&self) -> Vec<Option<f64>> {
        self.values.columns().into_iter().map(present_mean).collect()
    }

    pub fn item_mean(&self, item_id: &str) -> Option<f64> {
        let col = self.item_ids.iter().position(|i| i == item_id)?;
        present_mean(self.values.column(col))
    }
}

fn present_mean(values: ArrayView1<'_, Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Items x dimensions descriptors with per-item label, task and id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Array2<f64>,
    labels: Vec<AffectLabel>,
    tasks: Vec<Quadrant>,
    item_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        rows: Array2<f64>,
        labels: Vec<AffectLabel>,
        tasks: Vec<Quadrant>,
        item_ids: Vec<String>,
    ) -> Result<Self> {
        let n = rows.nrows();
        for (what, len) in [("labels", labels.len()), ("tasks", tasks.len()), ("item ids", item_ids.len())] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what,
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(((row, col), _)) = rows.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(FeatureMatrix {
            rows,
            labels,
            tasks,
            item_ids,
        })
    }

    pub fn rows(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn labels(&self) -> &[AffectLabel] {
        &self.labels
    }

    pub fn tasks(&self) -> &[Quadrant] {
        &self.tasks
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dims(&self) -> usize {
        self.rows.ncols()
    }

    /// Row subset in the given order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows.select(ndarray::Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            tasks: indices.iter().map(|&i| self.tasks[i]).collect(),
            item_ids: indices.iter().map(|&i| self.item_ids[i].clone()).collect(),
        }
    }

    /// Same rows with labels replaced.
    pub fn with_labels(&self, labels: Vec<AffectLabel>) -> Result<FeatureMatrix> {
        FeatureMatrix::new(self.rows.clone(), labels, self.tasks.clone(), self.item_ids.clone())
    }

    /// Column-wise concatenation of two aligned matrices (feature fusion).
    pub fn concat(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.item_ids != other.item_ids {
            return Err(Error::Misaligned("feature matrices cover different items".into()));
        }
        let rows = ndarray::concatenate(ndarray::Axis(1), &[self.rows.view(), other.rows.view()])
            .map_err(|e| Error::Numerical(e.to_string()))?;
        FeatureMatrix::new(rows, self.labels.clone(), self.tasks.clone(), self.item_ids.clone())
    }
}

/// Rescales values to [0, 1]: `(x - min) / (max - min)`.
pub fn min_max_normalize(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty("min_max_normalize input"));
    }
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::DegenerateRange(min));
    }
    let range = max - min;
    Ok(x.iter().map(|v| (v - min) / range).collect())
}

/// Threshold used when binarizing ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinarizeReference {
    /// Each rater's own mean rating.
    PerRaterMean,
    /// Mean over every present rating in the matrix.
    GroupMean,
}

/// High/Low labels: a rating is High iff it is strictly above the threshold,
/// so ties fall to Low. Missing ratings stay missing.
pub fn binarize_ratings(
    m: &RatingMatrix,
    reference: BinarizeReference,
) -> Result<Array2<Option<AffectLabel>>> {
    let rater_means: Vec<f64> = m
        .values
        .rows()
        .into_iter()
        .zip(&m.rater_ids)
        .map(|(row, id)| present_mean(row).ok_or_else(|| Error::EmptyRater(id.clone())))
        .collect::<Result<_>>()?;
    let group_mean = {
        let (s, n) = m
            .values
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        s / n as f64
    };
    Ok(Array2::from_shape_fn(m.values.dim(), |(r, i)| {
        let threshold = match reference {
            BinarizeReference::PerRaterMean => rater_means[r],
            BinarizeReference::GroupMean => group_mean,
        };
        m.values[[r, i]].map(|v| {
            if v > threshold {
                AffectLabel::High
            } else {
                AffectLabel::Low
            }
        })
    }))
}

/// Per-quadrant means, one row of the dataset summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantStats {
    pub quadrant: Quadrant,
    pub n_ads: usize,
    pub mean_length_s: f64,
    pub mean_arousal: Option<f64>,
    pub mean_valence: Option<f64>,
}

/// Mean length and mean (rater-averaged) arousal/valence per expert
/// quadrant. Quadrants without ads are omitted.
pub fn quadrant_summary(
    records: &[AdRecord],
    arousal: Option<&RatingMatrix>,
    valence: Option<&RatingMatrix>,
) -> Result<Vec<QuadrantStats>> {
    if records.is_empty() {
        return Err(Error::Empty("quadrant_summary records"));
    }
    let mean_of = |vals: &[f64]| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    let mut out = Vec::new();
    for q in Quadrant::ALL {
        let members: Vec<&AdRecord> = records.iter().filter(|r| r.expert_quadrant == q).collect();
        if members.is_empty() {
            continue;
        }
        let lengths: Vec<f64> = members.iter().map(|r| r.duration_s).collect();
        let per_ad = |m: Option<&RatingMatrix>| -> Vec<f64> {
            m.map(|m| members.iter().filter_map(|r| m.item_mean(&r.id)).collect())
                .unwrap_or_default()
        };
        out.push(QuadrantStats {
            quadrant: q,
            n_ads: members.len(),
            mean_length_s: mean_of(&lengths).unwrap_or(0.0),
            mean_arousal: mean_of(&per_ad(arousal)),
            mean_valence: mean_of(&per_ad(valence)),
        });
    }
    Ok(out)
}
