//! File formats: GeoJSON and CSV readers/writers for networks, landmarks,
//! sample points, score surfaces, labeled sites, luminosity, and model
//! ratings, plus stage manifests with content hashes.

use crate::adjust::ScoreSurface;
use crate::backend::RawModelRating;
use crate::geo::{GeoError, Landmark, SamplePoint, StreetNetwork};
use crate::imagery::LuminosityRecord;
use crate::prompt::{aggregate, format_response, parse_response, PromptModel};
use crate::spatial::{GStarLabel, MoranLabel, SiteStat};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("missing input file: {0}")]
    Missing(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_json(path: &Path) -> Result<Value, IoError> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a street network from a GeoJSON FeatureCollection of LineString
/// features (MultiLineStrings are split into their parts).
pub fn read_network_geojson(path: &Path) -> Result<StreetNetwork, IoError> {
    let doc = read_json(path)?;
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| format_err(path, "expected a FeatureCollection with a features array"))?;
    let mut segments: Vec<Vec<(f64, f64)>> = Vec::new();
    for (i, feature) in features.iter().enumerate() {
        let geom = &feature["geometry"];
        let gtype = geom["type"].as_str().unwrap_or("");
        match gtype {
            "LineString" => segments.push(coords_to_line(path, &geom["coordinates"], i)?),
            "MultiLineString" => {
                let parts = geom["coordinates"].as_array().ok_or_else(|| {
                    format_err(path, format!("feature {i}: MultiLineString without coordinates"))
                })?;
                for part in parts {
                    segments.push(coords_to_line(path, part, i)?);
                }
            }
            other => {
                return Err(format_err(
                    path,
                    format!("feature {i}: unsupported geometry type {other:?}"),
                ))
            }
        }
    }
    Ok(StreetNetwork::new(segments)?)
}

fn coords_to_line(path: &Path, coords: &Value, feature: usize) -> Result<Vec<(f64, f64)>, IoError> {
    coords
        .as_array()
        .ok_or_else(|| format_err(path, format!("feature {feature}: coordinates not an array")))?
        .iter()
        .map(|pos| {
            let lon = pos[0].as_f64();
            let lat = pos[1].as_f64();
            match (lon, lat) {
                (Some(lon), Some(lat)) => Ok((lon, lat)),
                _ => Err(format_err(path, format!("feature {feature}: bad position {pos}"))),
            }
        })
        .collect()
}

/// Reads landmarks from GeoJSON points (`.geojson`/`.json`) or a CSV with
/// header `id,lon,lat`.
pub fn read_landmarks(path: &Path) -> Result<Vec<Landmark>, IoError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("csv") {
        if !path.exists() {
            return Err(IoError::Missing(path.to_path_buf()));
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let mut out = Vec::new();
        for row in rdr.deserialize::<Landmark>() {
            let lm = row?;
            out.push(Landmark::new(lm.id, lm.lon, lm.lat)?);
        }
        return Ok(out);
    }
    let doc = read_json(path)?;
    let features = doc["features"]
        .as_array()
        .ok_or_else(|| format_err(path, "expected a FeatureCollection with a features array"))?;
    let mut out = Vec::new();
    for (i, feature) in features.iter().enumerate() {
        let geom = &feature["geometry"];
        if geom["type"].as_str() != Some("Point") {
            return Err(format_err(path, format!("feature {i}: expected Point geometry")));
        }
        let lon = geom["coordinates"][0].as_f64();
        let lat = geom["coordinates"][1].as_f64();
        let id = feature["properties"]["id"]
            .as_str()
            .map(str::to_string)
            .unwrap_or_else(|| format!("landmark_{i:04}"));
        match (lon, lat) {
            (Some(lon), Some(lat)) => out.push(Landmark::new(id, lon, lat)?),
            _ => return Err(format_err(path, format!("feature {i}: bad coordinates"))),
        }
    }
    Ok(out)
}

/// Writes sample points as CSV `id,lon,lat,source`.
pub fn write_points_csv(path: &Path, points: &[SamplePoint]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["id", "lon", "lat", "source"])?;
    for p in points {
        wtr.write_record([
            p.id.as_str(),
            &p.lon.to_string(),
            &p.lat.to_string(),
            &p.source.to_string(),
        ])?;
    }
    wtr.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads sample points from CSV `id,lon,lat,source`.
pub fn read_points_csv(path: &Path) -> Result<Vec<SamplePoint>, IoError> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |idx: usize| row.get(idx).unwrap_or("").trim().to_string();
        let lon: f64 = field(1)
            .parse()
            .map_err(|_| format_err(path, format!("row {}: bad lon", i + 2)))?;
        let lat: f64 = field(2)
            .parse()
            .map_err(|_| format_err(path, format!("row {}: bad lat", i + 2)))?;
        let source = field(3)
            .parse()
            .map_err(|e: String| format_err(path, format!("row {}: {e}", i + 2)))?;
        out.push(SamplePoint::new(field(0), lon, lat, source)?);
    }
    Ok(out)
}

fn feature_collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}

fn point_feature(lon: f64, lat: f64, properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": { "type": "Point", "coordinates": [lon, lat] },
        "properties": properties,
    })
}

fn write_json(path: &Path, value: &Value) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).expect("serializable value");
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Writes sample points as GeoJSON points with id/source properties.
pub fn write_points_geojson(path: &Path, points: &[SamplePoint]) -> Result<(), IoError> {
    let features = points
        .iter()
        .map(|p| {
            point_feature(
                p.lon,
                p.lat,
                json!({ "id": p.id, "source": p.source.to_string() }),
            )
        })
        .collect();
    write_json(path, &feature_collection(features))
}

/// Writes a score surface as CSV `point_id,lon,lat,value`.
pub fn write_surface_csv(path: &Path, surface: &ScoreSurface) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["point_id", "lon", "lat", "value"])?;
    for (id, v, (lon, lat)) in surface.rows() {
        wtr.write_record([id.as_str(), &lon.to_string(), &lat.to_string(), &v.to_string()])?;
    }
    wtr.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes a score surface as GeoJSON points with `{id, value}` properties.
pub fn write_surface_geojson(path: &Path, surface: &ScoreSurface) -> Result<(), IoError> {
    let features = surface
        .rows()
        .map(|(id, v, (lon, lat))| point_feature(lon, lat, json!({ "id": id, "value": v })))
        .collect();
    write_json(path, &feature_collection(features))
}

/// Writes local Moran sites as CSV `point_id,statistic,pseudo_p,label`.
pub fn write_local_csv(path: &Path, sites: &[SiteStat<MoranLabel>]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["point_id", "statistic", "pseudo_p", "label"])?;
    for s in sites {
        wtr.write_record([
            s.point_id.as_str(),
            &s.statistic.to_string(),
            &s.p_or_z.to_string(),
            s.label.as_str(),
        ])?;
    }
    wtr.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes Gi* sites as CSV `point_id,statistic,z,label`.
pub fn write_gstar_csv(path: &Path, sites: &[SiteStat<GStarLabel>]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["point_id", "statistic", "z", "label"])?;
    for s in sites {
        wtr.write_record([
            s.point_id.as_str(),
            &s.statistic.to_string(),
            &s.p_or_z.to_string(),
            s.label.as_str(),
        ])?;
    }
    wtr.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes labeled sites as GeoJSON with `{statistic, p_or_z, label}`
/// properties; Gi* features additionally carry a render color
/// (hot=red, cold=blue, ns=black).
pub fn write_local_geojson(
    path: &Path,
    sites: &[SiteStat<MoranLabel>],
    locations: &BTreeMap<String, (f64, f64)>,
) -> Result<(), IoError> {
    let features = sites
        .iter()
        .map(|s| {
            let (lon, lat) = locations[&s.point_id];
            point_feature(
                lon,
                lat,
                json!({
                    "id": s.point_id,
                    "statistic": s.statistic,
                    "p_or_z": s.p_or_z,
                    "label": s.label.as_str(),
                }),
            )
        })
        .collect();
    write_json(path, &feature_collection(features))
}

pub fn write_gstar_geojson(
    path: &Path,
    sites: &[SiteStat<GStarLabel>],
    locations: &BTreeMap<String, (f64, f64)>,
) -> Result<(), IoError> {
    let features = sites
        .iter()
        .map(|s| {
            let (lon, lat) = locations[&s.point_id];
            point_feature(
                lon,
                lat,
                json!({
                    "id": s.point_id,
                    "statistic": s.statistic,
                    "p_or_z": s.p_or_z,
                    "label": s.label.as_str(),
                    "color": s.label.color(),
                }),
            )
        })
        .collect();
    write_json(path, &feature_collection(features))
}

/// Writes luminosity records as CSV `point_id,L`.
pub fn write_luminosity_csv(path: &Path, records: &[LuminosityRecord]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["point_id", "L"])?;
    for r in records {
        wtr.write_record([r.point_id.as_str(), &r.l.to_string()])?;
    }
    wtr.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads luminosity CSV `point_id,L`.
pub fn read_luminosity_csv(path: &Path) -> Result<Vec<LuminosityRecord>, IoError> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let l: f64 = row
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| format_err(path, format!("row {}: bad L", i + 2)))?;
        out.push(LuminosityRecord {
            point_id: row.get(0).unwrap_or("").to_string(),
            l,
        });
    }
    Ok(out)
}

/// Writes model ratings as CSV
/// `point_id,prompt,scores,aggregate,attempt_count` where `scores` uses the
/// response wire format.
pub fn write_model_ratings_csv(path: &Path, ratings: &[RawModelRating]) -> Result<(), IoError> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["point_id", "prompt", "scores", "aggregate", "attempt_count"])?;
    for r in ratings {
        wtr.write_record([
            r.point_id.as_str(),
            &r.prompt.label(),
            &format_response(&r.vector),
            &r.aggregate.to_string(),
            &r.attempt_count.to_string(),
        ])?;
    }
    wtr.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads model ratings written by [`write_model_ratings_csv`].
pub fn read_model_ratings_csv(path: &Path) -> Result<Vec<RawModelRating>, IoError> {
    if !path.exists() {
        return Err(IoError::Missing(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let prompt: PromptModel = row
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e| format_err(path, format!("row {line}: {e}")))?;
        let raw = row.get(2).unwrap_or("").to_string();
        let vector = parse_response(&raw, prompt.criteria_count())
            .map_err(|e| format_err(path, format!("row {line}: {e}")))?;
        let aggregate = aggregate(&vector);
        let attempt_count: u32 = row
            .get(4)
            .unwrap_or("1")
            .trim()
            .parse()
            .map_err(|_| format_err(path, format!("row {line}: bad attempt_count")))?;
        out.push(RawModelRating {
            point_id: row.get(0).unwrap_or("").to_string(),
            prompt,
            vector,
            aggregate,
            attempt_count,
            raw_text: raw,
        });
    }
    Ok(out)
}

/// SHA-256 of a file's bytes, hex-encoded.
pub fn sha256_file(path: &Path) -> Result<String, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Per-stage provenance record: hashes of the inputs a stage consumed and
/// counts it produced, so downstream stages can refuse mismatched inputs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub inputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, u64>,
}

impl Manifest {
    pub fn new(stage: &str) -> Self {
        Manifest {
            stage: stage.to_string(),
            ..Default::default()
        }
    }

    pub fn record_input(&mut self, name: &str, path: &Path) -> Result<(), IoError> {
        self.inputs.insert(name.to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let text = serde_json::to_string_pretty(self).expect("serializable manifest");
        fs::write(path, text + "\n").map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Manifest, IoError> {
        let doc = read_json(path)?;
        serde_json::from_value(doc).map_err(|source| IoError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::PointSource;
    use tempfile::tempdir;

    #[test]
    fn network_geojson_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("net.geojson");
        let doc = json!({
            "type": "FeatureCollection",
            "features": [
                { "type": "Feature", "geometry": { "type": "LineString",
                    "coordinates": [[24.9, 60.1], [24.91, 60.11]] }, "properties": {} },
                { "type": "Feature", "geometry": { "type": "MultiLineString",
                    "coordinates": [[[24.0, 60.0], [24.01, 60.0]], [[25.0, 60.2], [25.0, 60.21]]] },
                  "properties": {} },
            ]
        });
        fs::write(&path, doc.to_string()).unwrap();
        let net = read_network_geojson(&path).unwrap();
        assert_eq!(net.segments.len(), 3);
        assert_eq!(net.segments[0][0], (24.9, 60.1));
    }

    #[test]
    fn missing_network_names_the_path() {
        let err = read_network_geojson(Path::new("/nonexistent/net.geojson")).unwrap_err();
        assert!(err.to_string().contains("net.geojson"));
    }

    #[test]
    fn landmarks_from_csv_and_geojson() {
        let dir = tempdir().unwrap();
        let csv_path = dir.path().join("lm.csv");
        fs::write(&csv_path, "id,lon,lat\nmarket,24.95,60.17\n").unwrap();
        let lms = read_landmarks(&csv_path).unwrap();
        assert_eq!(lms, vec![Landmark::new("market", 24.95, 60.17).unwrap()]);

        let gj_path = dir.path().join("lm.geojson");
        let doc = json!({
            "type": "FeatureCollection",
            "features": [{ "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [24.95, 60.17] },
                "properties": { "id": "market" } }]
        });
        fs::write(&gj_path, doc.to_string()).unwrap();
        assert_eq!(read_landmarks(&gj_path).unwrap(), lms);
    }

    #[test]
    fn points_csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("points.csv");
        let pts = vec![
            SamplePoint::new("a", 24.9, 60.1, PointSource::IntervalSample).unwrap(),
            SamplePoint::new("b", 24.91, 60.11, PointSource::LandmarkAugment).unwrap(),
        ];
        write_points_csv(&path, &pts).unwrap();
        assert_eq!(read_points_csv(&path).unwrap(), pts);
    }

    #[test]
    fn model_ratings_round_trip() {
        use crate::prompt::{CriterionVector, Persona, PromptTier};
        let dir = tempdir().unwrap();
        let path = dir.path().join("ratings.csv");
        let vector = CriterionVector(vec![4, 5, 3, 6, 5]);
        let ratings = vec![RawModelRating {
            point_id: "p1".into(),
            prompt: PromptModel::new(PromptTier::Model2, Persona::NR),
            aggregate: aggregate(&vector),
            vector,
            attempt_count: 2,
            raw_text: String::new(),
        }];
        write_model_ratings_csv(&path, &ratings).unwrap();
        let back = read_model_ratings_csv(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].point_id, "p1");
        assert_eq!(back[0].vector.0, vec![4, 5, 3, 6, 5]);
        assert_eq!(back[0].aggregate, 4.6);
        assert_eq!(back[0].attempt_count, 2);
    }

    #[test]
    fn manifest_round_trip_and_hash_stability() {
        let dir = tempdir().unwrap();
        let data = dir.path().join("data.txt");
        fs::write(&data, "hello").unwrap();
        let h1 = sha256_file(&data).unwrap();
        assert_eq!(h1, sha256_file(&data).unwrap());
        assert_eq!(h1.len(), 64);

        let mut m = Manifest::new("sample");
        m.record_input("data", &data).unwrap();
        m.counts.insert("points".into(), 42);
        let mpath = dir.path().join("manifest.json");
        m.write(&mpath).unwrap();
        let back = Manifest::read(&mpath).unwrap();
        assert_eq!(back.stage, "sample");
        assert_eq!(back.inputs["data"], h1);
        assert_eq!(back.counts["points"], 42);
    }

    #[test]
    fn geojson_label_properties_are_schema_restricted() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("gstar.geojson");
        let mut locations = BTreeMap::new();
        locations.insert("p1".to_string(), (24.9, 60.1));
        let sites = vec![SiteStat {
            point_id: "p1".to_string(),
            statistic: 2.5,
            p_or_z: 2.5,
            label: GStarLabel::Hot,
        }];
        write_gstar_geojson(&path, &sites, &locations).unwrap();
        let doc = read_json(&path).unwrap();
        let props = &doc["features"][0]["properties"];
        assert_eq!(props["label"], "hot");
        assert_eq!(props["color"], "red");
        assert!(props["statistic"].is_f64());
    }
}
