//! Georeferenced image locations: interval sampling along a street network,
//! random subsampling, landmark-proximity augmentation, and deduplication.
//!
//! All distances are great-circle (haversine) on a sphere of radius
//! 6,371,000 m. Planar approximations are not used anywhere in this module.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in metres.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("empty street network")]
    EmptyNetwork,
    #[error("sampling interval must be positive, got {0}")]
    NonPositiveInterval(f64),
    #[error("landmark radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("dedup epsilon must be non-negative, got {0}")]
    NegativeEpsilon(f64),
    #[error("coordinate out of WGS84 range: lon {lon}, lat {lat}")]
    InvalidCoordinate { lon: f64, lat: f64 },
    #[error("polyline {0} has fewer than 2 vertices")]
    DegeneratePolyline(usize),
    #[error("polyline {0} has zero total length")]
    ZeroLengthPolyline(usize),
    #[error("duplicate point id {0:?}")]
    DuplicateId(String),
}

/// Where a sample point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    IntervalSample,
    LandmarkAugment,
}

impl std::fmt::Display for PointSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PointSource::IntervalSample => write!(f, "interval_sample"),
            PointSource::LandmarkAugment => write!(f, "landmark_augment"),
        }
    }
}

impl std::str::FromStr for PointSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interval_sample" => Ok(PointSource::IntervalSample),
            "landmark_augment" => Ok(PointSource::LandmarkAugment),
            other => Err(format!("unknown point source {other:?}")),
        }
    }
}

/// A georeferenced candidate image location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
    /// Capture timestamp as "YYYY-MM", when known.
    pub captured: Option<String>,
    pub source: PointSource,
}

impl SamplePoint {
    pub fn new(id: impl Into<String>, lon: f64, lat: f64, source: PointSource) -> Result<Self, GeoError> {
        check_coord(lon, lat)?;
        Ok(Self { id: id.into(), lon, lat, captured: None, source })
    }
}

/// An ordered set of street polylines.
#[derive(Debug, Clone, Default)]
pub struct StreetNetwork {
    /// Each polyline is an ordered list of (lon, lat) vertices.
    pub segments: Vec<Vec<(f64, f64)>>,
}

impl StreetNetwork {
    pub fn new(segments: Vec<Vec<(f64, f64)>>) -> Result<Self, GeoError> {
        let net = Self { segments };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if self.segments.is_empty() {
            return Err(GeoError::EmptyNetwork);
        }
        for (i, poly) in self.segments.iter().enumerate() {
            if poly.len() < 2 {
                return Err(GeoError::DegeneratePolyline(i));
            }
            for &(lon, lat) in poly {
                check_coord(lon, lat)?;
            }
            if polyline_length_m(poly) <= 0.0 {
                return Err(GeoError::ZeroLengthPolyline(i));
            }
        }
        Ok(())
    }
}

/// A mapped location of local importance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
}

impl Landmark {
    pub fn new(id: impl Into<String>, lon: f64, lat: f64) -> Result<Self, GeoError> {
        check_coord(lon, lat)?;
        Ok(Self { id: id.into(), lon, lat })
    }
}

fn check_coord(lon: f64, lat: f64) -> Result<(), GeoError> {
    if !(-180.0..=180.0).contains(&lon) || !(-90.0..=90.0).contains(&lat) || lon.is_nan() || lat.is_nan() {
        return Err(GeoError::InvalidCoordinate { lon, lat });
    }
    Ok(())
}

/// Great-circle distance in metres between two (lon, lat) positions.
pub fn haversine_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lon1, lat1) = (a.0.to_radians(), a.1.to_radians());
    let (lon2, lat2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Position at fraction `t` of the great-circle arc from `a` to `b`.
pub fn great_circle_interpolate(a: (f64, f64), b: (f64, f64), t: f64) -> (f64, f64) {
    let va = to_unit_vec(a);
    let vb = to_unit_vec(b);
    let dot = (va.0 * vb.0 + va.1 * vb.1 + va.2 * vb.2).clamp(-1.0, 1.0);
    let omega = dot.acos();
    if omega < 1e-12 {
        return a;
    }
    let s = omega.sin();
    let f0 = ((1.0 - t) * omega).sin() / s;
    let f1 = (t * omega).sin() / s;
    from_unit_vec((
        f0 * va.0 + f1 * vb.0,
        f0 * va.1 + f1 * vb.1,
        f0 * va.2 + f1 * vb.2,
    ))
}

fn to_unit_vec((lon, lat): (f64, f64)) -> (f64, f64, f64) {
    let (lon, lat) = (lon.to_radians(), lat.to_radians());
    (lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin())
}

fn from_unit_vec((x, y, z): (f64, f64, f64)) -> (f64, f64) {
    let lat = z.atan2((x * x + y * y).sqrt());
    let lon = y.atan2(x);
    (lon.to_degrees(), lat.to_degrees())
}

/// Total arc length of a polyline in metres.
pub fn polyline_length_m(poly: &[(f64, f64)]) -> f64 {
    poly.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

/// Position at arc length `s` metres along a polyline.
///
/// `s` beyond the total length clamps to the final vertex.
pub fn point_at_arc_length(poly: &[(f64, f64)], s: f64) -> (f64, f64) {
    let mut remaining = s.max(0.0);
    for w in poly.windows(2) {
        let seg = haversine_m(w[0], w[1]);
        if remaining <= seg {
            if seg == 0.0 {
                return w[0];
            }
            return great_circle_interpolate(w[0], w[1], remaining / seg);
        }
        remaining -= seg;
    }
    *poly.last().expect("polyline has vertices")
}

/// Place points along every polyline at arc lengths 0, interval, 2·interval, …
/// plus the final vertex when the total length is not a multiple of the
/// interval. Both endpoints are always included.
pub fn sample_along_network(net: &StreetNetwork, interval_m: f64) -> Result<Vec<SamplePoint>, GeoError> {
    if interval_m <= 0.0 || interval_m.is_nan() {
        return Err(GeoError::NonPositiveInterval(interval_m));
    }
    net.validate()?;
    // Arc lengths within this slack of the total length collapse onto the
    // final vertex instead of producing a near-duplicate grid point.
    const END_SLACK_M: f64 = 1e-6;
    let mut out = Vec::new();
    for (seg_idx, poly) in net.segments.iter().enumerate() {
        let total = polyline_length_m(poly);
        let mut k = 0usize;
        loop {
            let s = k as f64 * interval_m;
            if s >= total - END_SLACK_M {
                break;
            }
            let (lon, lat) = point_at_arc_length(poly, s);
            out.push(SamplePoint {
                id: format!("s{seg_idx:05}_{k:05}"),
                lon,
                lat,
                captured: None,
                source: PointSource::IntervalSample,
            });
            k += 1;
        }
        let &(lon, lat) = poly.last().expect("validated polyline");
        out.push(SamplePoint {
            id: format!("s{seg_idx:05}_{k:05}"),
            lon,
            lat,
            captured: None,
            source: PointSource::IntervalSample,
        });
    }
    Ok(out)
}

/// Uniform sample of `n` points without replacement, deterministic for a
/// fixed seed. Output is ordered by id. `n >= |points|` returns all points.
pub fn random_subsample(points: &[SamplePoint], n: usize, seed: u64) -> Vec<SamplePoint> {
    let mut picked: Vec<SamplePoint> = if n >= points.len() {
        points.to_vec()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(n);
        idx.into_iter().map(|i| points[i].clone()).collect()
    };
    picked.sort_by(|a, b| a.id.cmp(&b.id));
    picked
}

/// Every pool point whose great-circle distance to any landmark is within
/// `radius_m` (closed ball), with source re-tagged as landmark augmentation.
pub fn augment_near_landmarks(
    pool: &[SamplePoint],
    landmarks: &[Landmark],
    radius_m: f64,
) -> Result<Vec<SamplePoint>, GeoError> {
    if radius_m <= 0.0 || radius_m.is_nan() {
        return Err(GeoError::NonPositiveRadius(radius_m));
    }
    Ok(pool
        .iter()
        .filter(|p| {
            landmarks
                .iter()
                .any(|l| haversine_m((p.lon, p.lat), (l.lon, l.lat)) <= radius_m)
        })
        .map(|p| SamplePoint { source: PointSource::LandmarkAugment, ..p.clone() })
        .collect())
}

/// Greedy pass in input order: a point is dropped when it lies within
/// `epsilon_m` of any already-kept point. Kept points are unchanged.
pub fn dedup(points: &[SamplePoint], epsilon_m: f64) -> Result<Vec<SamplePoint>, GeoError> {
    if epsilon_m < 0.0 || epsilon_m.is_nan() {
        return Err(GeoError::NegativeEpsilon(epsilon_m));
    }
    let mut kept: Vec<SamplePoint> = Vec::new();
    for p in points {
        let dup = kept
            .iter()
            .any(|q| haversine_m((p.lon, p.lat), (q.lon, q.lat)) <= epsilon_m);
        if !dup {
            kept.push(p.clone());
        }
    }
    Ok(kept)
}

/// Checks id uniqueness across a point set.
pub fn check_unique_ids(points: &[SamplePoint]) -> Result<(), GeoError> {
    let mut seen = std::collections::HashSet::new();
    for p in points {
        if !seen.insert(p.id.as_str()) {
            return Err(GeoError::DuplicateId(p.id.clone()));
        }
    }
    Ok(())
}
