//! Human-rating panel management: balanced batch assignment of images to
//! raters, and ingestion/validation of collected ratings.

use crate::prompt::PromptModel;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;
use thiserror::Error;

/// Rater residency group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaterGroup {
    LocalResident,
    NonResident,
}

impl RaterGroup {
    pub fn label(self) -> &'static str {
        match self {
            RaterGroup::LocalResident => "local_residents",
            RaterGroup::NonResident => "non_residents",
        }
    }
}

impl std::str::FromStr for RaterGroup {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local_resident" => Ok(RaterGroup::LocalResident),
            "non_resident" => Ok(RaterGroup::NonResident),
            other => Err(format!("unknown rater group {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rater {
    pub id: String,
    pub group: RaterGroup,
}

/// Who produced a rating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaterKind {
    Human,
    Model,
}

/// One raw 1–7 integer score from one rater (human or model persona) for one
/// image. Model records additionally carry the prompt they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub rater_id: String,
    pub point_id: String,
    pub score: i32,
    pub rater_kind: RaterKind,
    pub prompt: Option<PromptModel>,
}

/// Map from rater id to the ordered list of point ids they rate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment(pub BTreeMap<String, Vec<String>>);

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("coverage {coverage} exceeds rater count {raters}")]
    CoverageExceedsRaters { coverage: usize, raters: usize },
    #[error("coverage must be >= 1")]
    ZeroCoverage,
    #[error("per_rater_min {per_rater_min} exceeds image count {images}; lists cannot repeat images")]
    MinExceedsImages { per_rater_min: usize, images: usize },
    #[error("no images to assign")]
    NoImages,
    #[error("no raters")]
    NoRaters,
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
    #[error("ratings file read: {0}")]
    Io(#[from] std::io::Error),
    #[error("ratings file parse: {0}")]
    Csv(#[from] csv::Error),
}

/// Assigns each image to `coverage` distinct raters by a round-robin pass
/// over a seeded random image permutation, then tops up raters short of
/// `per_rater_min`. List lengths before top-up differ by at most one.
/// Deterministic for a fixed seed; invariant to rater list ordering.
pub fn assign_batches(
    images: &[String],
    raters: &[Rater],
    coverage: usize,
    per_rater_min: usize,
    seed: u64,
) -> Result<Assignment, PanelError> {
    if images.is_empty() {
        return Err(PanelError::NoImages);
    }
    if raters.is_empty() {
        return Err(PanelError::NoRaters);
    }
    if coverage == 0 {
        return Err(PanelError::ZeroCoverage);
    }
    if coverage > raters.len() {
        return Err(PanelError::CoverageExceedsRaters { coverage, raters: raters.len() });
    }
    if per_rater_min > images.len() {
        return Err(PanelError::MinExceedsImages { per_rater_min, images: images.len() });
    }

    let mut rater_ids: Vec<&str> = raters.iter().map(|r| r.id.as_str()).collect();
    rater_ids.sort();
    rater_ids.dedup();

    let mut order: Vec<&str> = images.iter().map(String::as_str).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut lists: BTreeMap<String, Vec<String>> =
        rater_ids.iter().map(|&r| (r.to_string(), Vec::new())).collect();

    // Round-robin: consecutive cyclic rater positions are distinct because
    // coverage <= rater count.
    let mut cursor = 0usize;
    for img in &order {
        for _ in 0..coverage {
            let r = rater_ids[cursor % rater_ids.len()];
            lists.get_mut(r).expect("known rater").push((*img).to_string());
            cursor += 1;
        }
    }

    // Top-ups: extend short lists with images they do not already hold,
    // walking the same permutation so the result stays seed-deterministic.
    for r in &rater_ids {
        let list = lists.get_mut(*r).expect("known rater");
        if list.len() >= per_rater_min {
            continue;
        }
        let have: HashSet<&str> = list.iter().map(String::as_str).collect();
        let mut extra: Vec<String> = order
            .iter()
            .filter(|img| !have.contains(**img))
            .take(per_rater_min - list.len())
            .map(|s| s.to_string())
            .collect();
        list.append(&mut extra);
    }

    Ok(Assignment(lists))
}

/// How ingest reacts to invalid rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    /// First bad row aborts the ingest.
    Strict,
    /// Bad rows are skipped and reported.
    Lenient,
}

/// Ingest outcome: accepted records plus the skipped-row log (lenient mode).
#[derive(Debug, Default)]
pub struct IngestReport {
    pub records: Vec<RatingRecord>,
    pub skipped: Vec<(usize, String)>,
}

/// Reads and validates a human ratings CSV with header
/// `rater_id,point_id,score`. Rejects non-integer or out-of-range scores,
/// unknown point ids (when a known set is supplied), and duplicate
/// (rater_id, point_id) pairs.
pub fn ingest_ratings<R: Read>(
    reader: R,
    known_points: Option<&HashSet<String>>,
    mode: IngestMode,
) -> Result<IngestReport, PanelError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (ri, pi, si) = match (col("rater_id"), col("point_id"), col("score")) {
        (Some(r), Some(p), Some(s)) => (r, p, s),
        _ => {
            return Err(PanelError::Row {
                line: 1,
                reason: "header must contain rater_id,point_id,score".into(),
            })
        }
    };

    let mut report = IngestReport::default();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (idx, row) in rdr.records().enumerate() {
        let line = idx + 2; // 1-based, after header
        let row = row?;
        let reject = |reason: String, report: &mut IngestReport| -> Result<(), PanelError> {
            match mode {
                IngestMode::Strict => Err(PanelError::Row { line, reason }),
                IngestMode::Lenient => {
                    report.skipped.push((line, reason));
                    Ok(())
                }
            }
        };

        let rater_id = row.get(ri).unwrap_or("").trim().to_string();
        let point_id = row.get(pi).unwrap_or("").trim().to_string();
        let score_raw = row.get(si).unwrap_or("").trim();
        if rater_id.is_empty() || point_id.is_empty() {
            reject("empty rater_id or point_id".into(), &mut report)?;
            continue;
        }
        let score: i32 = match score_raw.parse() {
            Ok(v) => v,
            Err(_) => {
                reject(format!("non-integer score {score_raw:?}"), &mut report)?;
                continue;
            }
        };
        if !(1..=7).contains(&score) {
            reject(format!("score {score} outside [1, 7]"), &mut report)?;
            continue;
        }
        if let Some(known) = known_points {
            if !known.contains(&point_id) {
                reject(format!("unknown point_id {point_id:?}"), &mut report)?;
                continue;
            }
        }
        if !seen.insert((rater_id.clone(), point_id.clone())) {
            reject(format!("duplicate rating ({rater_id}, {point_id})"), &mut report)?;
            continue;
        }
        report.records.push(RatingRecord {
            rater_id,
            point_id,
            score,
            rater_kind: RaterKind::Human,
            prompt: None,
        });
    }
    Ok(report)
}

/// Reads a raters CSV with header `id,group` (group: local_resident or
/// non_resident).
pub fn read_raters(path: &Path) -> Result<Vec<Rater>, PanelError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let id = row.get(0).unwrap_or("").trim().to_string();
        let group: RaterGroup = row
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e: String| PanelError::Row { line: idx + 2, reason: e })?;
        out.push(Rater { id, group });
    }
    Ok(out)
}

/// Writes an assignment as CSV `rater_id,point_id,sequence_index`.
pub fn write_assignment_csv<W: std::io::Write>(a: &Assignment, w: W) -> Result<(), PanelError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["rater_id", "point_id", "sequence_index"])?;
    for (rater, list) in &a.0 {
        for (i, point) in list.iter().enumerate() {
            wtr.write_record([rater.as_str(), point.as_str(), &i.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Panel coverage counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelSummary {
    pub total_ratings: usize,
    pub per_rater: BTreeMap<String, usize>,
    pub per_image: BTreeMap<String, usize>,
    pub min_per_image: usize,
    pub mean_per_image: f64,
    pub mean_per_rater: f64,
}

pub fn panel_summary(records: &[RatingRecord]) -> PanelSummary {
    let mut per_rater: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_image: BTreeMap<String, usize> = BTreeMap::new();
    for r in records {
        *per_rater.entry(r.rater_id.clone()).or_insert(0) += 1;
        *per_image.entry(r.point_id.clone()).or_insert(0) += 1;
    }
    let total = records.len();
    let min_per_image = per_image.values().copied().min().unwrap_or(0);
    let mean_per_image = if per_image.is_empty() {
        0.0
    } else {
        total as f64 / per_image.len() as f64
    };
    let mean_per_rater = if per_rater.is_empty() {
        0.0
    } else {
        total as f64 / per_rater.len() as f64
    };
    PanelSummary {
        total_ratings: total,
        per_rater,
        per_image,
        min_per_image,
        mean_per_image,
        mean_per_rater,
    }
}
