//! Stage orchestration: each subcommand of the CLI is a library function
//! here, taking the pipeline configuration and working through files in the
//! configured output directory. Every stage writes a manifest with input
//! hashes so later stages can refuse mismatched inputs, and every stage is
//! deterministic given (inputs, config, seed).

use crate::adjust::{
    center_model, center_raters, difference_surface, per_group_mean, AdjustError, ScoreSurface,
};
use crate::backend::{
    batch_rate, make_backend, BackendError, BackendKind, Clock, RateLimiter, RawModelRating,
    SystemClock,
};
use crate::config::{ConfigError, PipelineConfig};
use crate::geo::{
    augment_near_landmarks, check_unique_ids, dedup, random_subsample, sample_along_network,
    GeoError, SamplePoint,
};
use crate::imagery::{compose_panorama, load_tiles_from_dir, mean_luminosity, ImageryError, Panorama};
use crate::io::{self, IoError, Manifest};
use crate::panel::{
    assign_batches, ingest_ratings, panel_summary, read_raters, IngestMode, PanelError,
    RaterGroup, RatingRecord,
};
use crate::prompt::{Persona, PromptModel};
use crate::spatial::{
    analyze_differences, build_weights, morans_i, DiffAnalysis, SpatialError, SpatialWeights,
};
use crate::stats::{
    pearson, shapiro_wilk, summary_stats, t_test_two_sample, wilcoxon, StatResult, StatsError,
};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Imagery(#[from] ImageryError),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Adjust(#[from] AdjustError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{comparison}: {source}")]
    Stats {
        comparison: String,
        #[source]
        source: StatsError,
    },
    #[error("{comparison}: {source}")]
    Spatial {
        comparison: String,
        #[source]
        source: SpatialError,
    },
    #[error("{path}: write failed: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0} rating items failed permanently (strict mode)")]
    RateFailures(usize),
    #[error("{file} is empty")]
    EmptyInput { file: PathBuf },
    #[error("stage inputs disagree: {left} and {right} were produced from different point sets")]
    MismatchedInputs { left: String, right: String },
}

impl PipelineError {
    /// Process exit code: 1 usage/config, 2 data validation, 3 backend
    /// exhaustion.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Backend(_) | PipelineError::RateFailures(_) => 3,
            _ => 2,
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|source| PipelineError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path).map_err(|source| PipelineError::Write {
        path: path.to_path_buf(),
        source,
    })
}

// Canonical artifact locations inside the output directory.
fn points_csv(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.output_dir.join("points.csv")
}

fn model_ratings_csv(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.output_dir.join("model_ratings.csv")
}

fn panel_ratings_csv(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.output_dir.join("panel_ratings.csv")
}

fn luminosity_csv(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.output_dir.join("luminosity.csv")
}

fn surfaces_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.output_dir.join("surfaces")
}

fn analysis_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.output_dir.join("analysis")
}

fn report_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.output_dir.join("report")
}

fn manifest_path(cfg: &PipelineConfig, stage: &str) -> PathBuf {
    cfg.paths.output_dir.join(format!("manifest_{stage}.json"))
}

/// Canonical surface order: the two participant groups, then the six prompt
/// models in tier-major order.
pub fn surface_order() -> Vec<String> {
    let mut order = vec![
        RaterGroup::LocalResident.label().to_string(),
        RaterGroup::NonResident.label().to_string(),
    ];
    order.extend(PromptModel::all().iter().map(|m| m.label()));
    order
}

/// Outcome counts of the sampling stage.
#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub grid: usize,
    pub subsample: usize,
    pub augmented: usize,
    pub merged: usize,
    pub deduped: usize,
}

/// sample: grid-sample the street network, draw the random subsample, add
/// landmark-proximate points, dedup, and write the point set.
pub fn cmd_sample(cfg: &PipelineConfig) -> Result<SampleOutcome, PipelineError> {
    ensure_dir(&cfg.paths.output_dir)?;
    let network = io::read_network_geojson(&cfg.paths.network)?;
    let grid = sample_along_network(&network, cfg.sampling.interval_m)?;
    let subsample = random_subsample(&grid, cfg.sampling.random_n, cfg.seed);

    let mut manifest = Manifest::new("sample");
    manifest.record_input("network", &cfg.paths.network)?;

    let augmented = match &cfg.paths.landmarks {
        Some(path) if path.exists() => {
            manifest.record_input("landmarks", path)?;
            let landmarks = io::read_landmarks(path)?;
            augment_near_landmarks(&grid, &landmarks, cfg.sampling.landmark_radius_m)?
        }
        _ => Vec::new(),
    };

    // union: the random subsample, then augmentation points not already in it
    let chosen: HashSet<&str> = subsample.iter().map(|p| p.id.as_str()).collect();
    let mut merged = subsample.clone();
    merged.extend(
        augmented
            .iter()
            .filter(|p| !chosen.contains(p.id.as_str()))
            .cloned(),
    );
    let deduped = dedup(&merged, cfg.sampling.dedup_epsilon_m)?;
    check_unique_ids(&deduped)?;

    io::write_points_csv(&points_csv(cfg), &deduped)?;
    io::write_points_geojson(&cfg.paths.output_dir.join("points.geojson"), &deduped)?;

    let outcome = SampleOutcome {
        grid: grid.len(),
        subsample: subsample.len(),
        augmented: augmented.len(),
        merged: merged.len(),
        deduped: deduped.len(),
    };
    manifest.counts.insert("grid".into(), outcome.grid as u64);
    manifest.counts.insert("subsample".into(), outcome.subsample as u64);
    manifest.counts.insert("augmented".into(), outcome.augmented as u64);
    manifest.counts.insert("merged".into(), outcome.merged as u64);
    manifest.counts.insert("deduped".into(), outcome.deduped as u64);
    manifest.write(&manifest_path(cfg, "sample"))?;
    Ok(outcome)
}

fn load_panoramas(cfg: &PipelineConfig, points: &[SamplePoint]) -> Result<Vec<Panorama>, PipelineError> {
    points
        .iter()
        .map(|p| {
            let tiles = load_tiles_from_dir(&cfg.paths.tiles, &p.id)?;
            Ok(compose_panorama(&p.id, &tiles)?)
        })
        .collect()
}

/// fetch: compose panoramas from the tile directory and compute luminosity.
/// Panorama PNGs are written unless `write_panoramas` is false (they are
/// large and recomposable).
pub fn cmd_fetch(cfg: &PipelineConfig, write_panoramas: bool) -> Result<usize, PipelineError> {
    let points = io::read_points_csv(&points_csv(cfg))?;
    let pans = load_panoramas(cfg, &points)?;
    let lums: Vec<_> = pans.iter().map(mean_luminosity).collect();
    io::write_luminosity_csv(&luminosity_csv(cfg), &lums)?;
    if write_panoramas {
        let dir = cfg.paths.output_dir.join("panoramas");
        ensure_dir(&dir)?;
        for pan in &pans {
            let path = dir.join(format!("{}.png", pan.point_id));
            pan.image.save(&path).map_err(|e| PipelineError::Write {
                path,
                source: std::io::Error::other(e),
            })?;
        }
    }
    let mut manifest = Manifest::new("fetch");
    manifest.record_input("points", &points_csv(cfg))?;
    manifest.counts.insert("panoramas".into(), pans.len() as u64);
    manifest.write(&manifest_path(cfg, "fetch"))?;
    Ok(pans.len())
}

/// Outcome of the rating stage.
#[derive(Debug, Clone)]
pub struct RateOutcome {
    pub rated: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// rate: rate every panorama under all six prompt models. Re-running skips
/// (point, prompt) pairs already present in the output, so interrupted runs
/// resume without duplicate work. In strict mode any permanently failed item
/// is an error.
pub fn cmd_rate(cfg: &PipelineConfig, strict: bool) -> Result<RateOutcome, PipelineError> {
    let points = io::read_points_csv(&points_csv(cfg))?;
    let models = PromptModel::all();

    let ratings_path = model_ratings_csv(cfg);
    let existing: Vec<RawModelRating> = if ratings_path.exists() {
        io::read_model_ratings_csv(&ratings_path)?
    } else {
        Vec::new()
    };
    let done: HashSet<(String, String)> = existing
        .iter()
        .map(|r| (r.point_id.clone(), r.prompt.label()))
        .collect();

    // group points by their set of missing prompts so each group is one batch
    let mut groups: BTreeMap<Vec<String>, Vec<&SamplePoint>> = BTreeMap::new();
    for p in &points {
        let missing: Vec<String> = models
            .iter()
            .filter(|m| !done.contains(&(p.id.clone(), m.label())))
            .map(|m| m.label())
            .collect();
        if !missing.is_empty() {
            groups.entry(missing).or_default().push(p);
        }
    }
    let skipped = done.len();

    let clock: Arc<dyn Clock> = Arc::new(SystemClock::default());
    let backend = make_backend(&cfg.backend, Arc::clone(&clock))?;
    // the mock backend is local and free of quota; only remote calls are paced
    let rpm = match cfg.backend.kind {
        BackendKind::Remote => cfg.backend.requests_per_minute,
        BackendKind::Mock => 6_000_000.0,
    };
    let limiter = RateLimiter::new(rpm, Arc::clone(&clock));

    let mut ratings = existing;
    let mut failures: Vec<(String, String, BackendError)> = Vec::new();
    for (labels, group_points) in &groups {
        let group_models: Vec<PromptModel> = labels
            .iter()
            .map(|l| l.parse().expect("labels came from PromptModel::all"))
            .collect();
        let group_owned: Vec<SamplePoint> = group_points.iter().map(|&p| p.clone()).collect();
        let pans = load_panoramas(cfg, &group_owned)?;
        for item in batch_rate(
            backend.as_ref(),
            &pans,
            &group_models,
            cfg.backend.max_in_flight,
            &limiter,
            clock.as_ref(),
        ) {
            match item.result {
                Ok(r) => ratings.push(r),
                Err(e) => failures.push((item.point_id, item.prompt.label(), e)),
            }
        }
    }

    ratings.sort_by(|a, b| {
        (&a.point_id, a.prompt.tier, a.prompt.persona)
            .cmp(&(&b.point_id, b.prompt.tier, b.prompt.persona))
    });
    io::write_model_ratings_csv(&ratings_path, &ratings)?;

    // audit log: one row per item outcome, regenerated whole each run
    let mut audit = String::from("point_id,prompt,attempts,status\n");
    for r in &ratings {
        audit.push_str(&format!(
            "{},{},{},ok\n",
            r.point_id,
            r.prompt.label(),
            r.attempt_count
        ));
    }
    for (pid, prompt, err) in &failures {
        audit.push_str(&format!("{pid},{prompt},,failed: {err}\n"));
    }
    write_text(&cfg.paths.output_dir.join("rate_audit.csv"), &audit)?;

    let mut manifest = Manifest::new("rate");
    manifest.record_input("points", &points_csv(cfg))?;
    manifest.counts.insert("ratings".into(), ratings.len() as u64);
    manifest.counts.insert("failed".into(), failures.len() as u64);
    manifest.write(&manifest_path(cfg, "rate"))?;

    if strict && !failures.is_empty() {
        if let Some((_, _, e)) = failures
            .iter()
            .find(|(_, _, e)| matches!(e, BackendError::Auth(_)))
        {
            return Err(PipelineError::Backend(e.clone()));
        }
        return Err(PipelineError::RateFailures(failures.len()));
    }
    Ok(RateOutcome {
        rated: ratings.len(),
        skipped,
        failed: failures.len(),
    })
}

/// panel-assign: build balanced rater assignments over the sampled points.
pub fn cmd_panel_assign(cfg: &PipelineConfig) -> Result<usize, PipelineError> {
    let points = io::read_points_csv(&points_csv(cfg))?;
    let raters = read_raters(&cfg.paths.raters)?;
    let images: Vec<String> = points.iter().map(|p| p.id.clone()).collect();
    let assignment = assign_batches(
        &images,
        &raters,
        cfg.panel.coverage,
        cfg.panel.per_rater_min,
        cfg.seed,
    )?;
    let total: usize = assignment.0.values().map(Vec::len).sum();
    let path = cfg.paths.output_dir.join("assignment.csv");
    let file = fs::File::create(&path).map_err(|source| PipelineError::Write {
        path: path.clone(),
        source,
    })?;
    crate::panel::write_assignment_csv(&assignment, file)?;

    let mut manifest = Manifest::new("panel_assign");
    manifest.record_input("points", &points_csv(cfg))?;
    manifest.record_input("raters", &cfg.paths.raters)?;
    manifest.counts.insert("assignments".into(), total as u64);
    manifest.write(&manifest_path(cfg, "panel_assign"))?;
    Ok(total)
}

/// panel-ingest: validate the human ratings file against the sampled point
/// set and store the accepted records.
pub fn cmd_panel_ingest(cfg: &PipelineConfig, mode: IngestMode) -> Result<(usize, usize), PipelineError> {
    let points = io::read_points_csv(&points_csv(cfg))?;
    let known: HashSet<String> = points.iter().map(|p| p.id.clone()).collect();
    let file = fs::File::open(&cfg.paths.ratings).map_err(|source| {
        PipelineError::Io(IoError::Io {
            path: cfg.paths.ratings.clone(),
            source,
        })
    })?;
    let report = ingest_ratings(file, Some(&known), mode)?;
    if report.records.is_empty() {
        return Err(PipelineError::EmptyInput {
            file: cfg.paths.ratings.clone(),
        });
    }

    let mut out = String::from("rater_id,point_id,score\n");
    for r in &report.records {
        out.push_str(&format!("{},{},{}\n", r.rater_id, r.point_id, r.score));
    }
    write_text(&panel_ratings_csv(cfg), &out)?;

    let summary = panel_summary(&report.records);
    let summary_json =
        serde_json::to_string_pretty(&summary).expect("serializable summary") + "\n";
    write_text(&cfg.paths.output_dir.join("panel_summary.json"), &summary_json)?;

    let mut manifest = Manifest::new("panel_ingest");
    manifest.record_input("points", &points_csv(cfg))?;
    manifest.record_input("ratings", &cfg.paths.ratings)?;
    manifest.counts.insert("accepted".into(), report.records.len() as u64);
    manifest.counts.insert("skipped".into(), report.skipped.len() as u64);
    manifest.write(&manifest_path(cfg, "panel_ingest"))?;
    Ok((report.records.len(), report.skipped.len()))
}

fn read_panel_records(cfg: &PipelineConfig) -> Result<Vec<RatingRecord>, PipelineError> {
    let path = panel_ratings_csv(cfg);
    let file = fs::File::open(&path).map_err(|source| {
        PipelineError::Io(IoError::Io {
            path: path.clone(),
            source,
        })
    })?;
    let report = ingest_ratings(file, None, IngestMode::Strict)?;
    if report.records.is_empty() {
        return Err(PipelineError::EmptyInput { file: path });
    }
    Ok(report.records)
}

fn point_locations(points: &[SamplePoint]) -> BTreeMap<String, (f64, f64)> {
    points
        .iter()
        .map(|p| (p.id.clone(), (p.lon, p.lat)))
        .collect()
}

/// adjust: mean-center human and model ratings and write the eight score
/// surfaces (two participant groups + six prompt models).
pub fn cmd_adjust(cfg: &PipelineConfig) -> Result<Vec<String>, PipelineError> {
    let points = io::read_points_csv(&points_csv(cfg))?;
    let locations = point_locations(&points);
    let ratings_path = model_ratings_csv(cfg);
    let model_ratings = io::read_model_ratings_csv(&ratings_path)?;
    if model_ratings.is_empty() {
        return Err(PipelineError::EmptyInput { file: ratings_path });
    }
    let panel_records = read_panel_records(cfg)?;
    let raters = read_raters(&cfg.paths.raters)?;

    let centered_humans = center_raters(&panel_records);
    let centered_models = center_model(&model_ratings);

    let dir = surfaces_dir(cfg);
    ensure_dir(&dir)?;
    let mut written = Vec::new();

    for group in [RaterGroup::LocalResident, RaterGroup::NonResident] {
        let members: HashSet<String> = raters
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.id.clone())
            .collect();
        let (surface, _excluded) =
            per_group_mean(&centered_humans, &members, group.label(), &locations)?;
        io::write_surface_csv(&dir.join(format!("{}.csv", group.label())), &surface)?;
        written.push(group.label().to_string());
    }
    for model in PromptModel::all() {
        let label = model.label();
        let members: HashSet<String> = [label.clone()].into_iter().collect();
        let (surface, _excluded) =
            per_group_mean(&centered_models, &members, &label, &locations)?;
        io::write_surface_csv(&dir.join(format!("{label}.csv")), &surface)?;
        written.push(label);
    }

    let mut manifest = Manifest::new("adjust");
    manifest.record_input("points", &points_csv(cfg))?;
    manifest.record_input("model_ratings", &ratings_path)?;
    manifest.record_input("panel_ratings", &panel_ratings_csv(cfg))?;
    manifest.counts.insert("surfaces".into(), written.len() as u64);
    manifest.write(&manifest_path(cfg, "adjust"))?;
    Ok(written)
}

fn read_surface(cfg: &PipelineConfig, label: &str) -> Result<ScoreSurface, PipelineError> {
    let path = surfaces_dir(cfg).join(format!("{label}.csv"));
    if !path.exists() {
        return Err(PipelineError::Io(IoError::Missing(path)));
    }
    let mut rdr = csv::Reader::from_path(&path).map_err(IoError::Csv)?;
    let mut values = BTreeMap::new();
    let mut locations = BTreeMap::new();
    for row in rdr.records() {
        let row = row.map_err(IoError::Csv)?;
        let id = row.get(0).unwrap_or("").to_string();
        let lon: f64 = row.get(1).unwrap_or("").parse().unwrap_or(f64::NAN);
        let lat: f64 = row.get(2).unwrap_or("").parse().unwrap_or(f64::NAN);
        let value: f64 = row.get(3).unwrap_or("").parse().unwrap_or(f64::NAN);
        values.insert(id.clone(), value);
        locations.insert(id, (lon, lat));
    }
    Ok(ScoreSurface {
        group_label: label.to_string(),
        values,
        locations,
    })
}

fn common_ids(a: &ScoreSurface, b: &ScoreSurface) -> BTreeSet<String> {
    a.values
        .keys()
        .filter(|id| b.values.contains_key(*id))
        .cloned()
        .collect()
}

fn paired_values(a: &ScoreSurface, b: &ScoreSurface) -> (Vec<f64>, Vec<f64>) {
    let ids = common_ids(a, b);
    let x = ids.iter().map(|id| a.values[id]).collect();
    let y = ids.iter().map(|id| b.values[id]).collect();
    (x, y)
}

fn stat_err(comparison: &str) -> impl FnOnce(StatsError) -> PipelineError + '_ {
    move |source| PipelineError::Stats {
        comparison: comparison.to_string(),
        source,
    }
}

fn spatial_err(comparison: &str) -> impl FnOnce(SpatialError) -> PipelineError + '_ {
    move |source| PipelineError::Spatial {
        comparison: comparison.to_string(),
        source,
    }
}

/// The matched participant group for a prompt persona.
fn participant_for(persona: Persona) -> RaterGroup {
    match persona {
        Persona::LR => RaterGroup::LocalResident,
        Persona::NR => RaterGroup::NonResident,
    }
}

fn fmt_f(v: f64) -> String {
    // shortest round-trip formatting; deterministic across runs
    format!("{v}")
}

/// analyze: compute every table of the results bundle from the adjusted
/// surfaces — summaries, normality, gated distribution tests, Pearson
/// matrices, global Moran's I per surface and per difference surface, local
/// Moran and Gi* labels of the differences, and the luminosity correlation.
pub fn cmd_analyze(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    // refuse to mix artifacts from different sample runs
    let mut point_hashes: Vec<(String, String)> = Vec::new();
    for stage in ["rate", "panel_ingest", "adjust"] {
        let path = manifest_path(cfg, stage);
        if path.exists() {
            let m = Manifest::read(&path)?;
            if let Some(h) = m.inputs.get("points") {
                point_hashes.push((stage.to_string(), h.clone()));
            }
        }
    }
    for pair in point_hashes.windows(2) {
        if pair[0].1 != pair[1].1 {
            return Err(PipelineError::MismatchedInputs {
                left: pair[0].0.clone(),
                right: pair[1].0.clone(),
            });
        }
    }

    let order = surface_order();
    let mut surfaces: BTreeMap<String, ScoreSurface> = BTreeMap::new();
    for label in &order {
        surfaces.insert(label.clone(), read_surface(cfg, label)?);
    }

    let dir = analysis_dir(cfg);
    ensure_dir(&dir)?;

    // summaries and normality, one row per surface
    let mut summary = String::from("surface,n,mean,std,min,q25,q50,q75,max\n");
    let mut normality = String::from("surface,w,p,normal\n");
    for label in &order {
        let values: Vec<f64> = surfaces[label].values.values().copied().collect();
        let s = summary_stats(&values).map_err(stat_err(label))?;
        summary.push_str(&format!(
            "{label},{},{},{},{},{},{},{},{}\n",
            s.n,
            fmt_f(s.mean),
            s.std.map(fmt_f).unwrap_or_default(),
            fmt_f(s.min),
            fmt_f(s.q25),
            fmt_f(s.q50),
            fmt_f(s.q75),
            fmt_f(s.max)
        ));
        let sw = shapiro_wilk(&values).map_err(stat_err(label))?;
        normality.push_str(&format!(
            "{label},{},{},{}\n",
            fmt_f(sw.statistic),
            fmt_f(sw.p_value),
            sw.p_value >= cfg.stats.alpha
        ));
    }
    write_text(&dir.join("summary.csv"), &summary)?;
    write_text(&dir.join("normality.csv"), &normality)?;

    // distribution tests: every model surface against both participant
    // groups, routed by the Shapiro-Wilk normality gate
    let participants = [
        RaterGroup::LocalResident.label().to_string(),
        RaterGroup::NonResident.label().to_string(),
    ];
    let model_labels: Vec<String> = PromptModel::all().iter().map(|m| m.label()).collect();
    let mut dist = String::from("model,participant,method,statistic,p,n\n");
    for ml in &model_labels {
        for pl in &participants {
            let comparison = format!("{ml} vs {pl}");
            let (x, y) = paired_values(&surfaces[ml], &surfaces[pl]);
            if x.is_empty() {
                return Err(PipelineError::Stats {
                    comparison,
                    source: StatsError::Empty,
                });
            }
            let nx = shapiro_wilk(&x).map_err(stat_err(&comparison))?;
            let ny = shapiro_wilk(&y).map_err(stat_err(&comparison))?;
            let normal = nx.p_value >= cfg.stats.alpha && ny.p_value >= cfg.stats.alpha;
            let result: StatResult = if normal {
                t_test_two_sample(&x, &y, cfg.stats.t_variant).map_err(stat_err(&comparison))?
            } else {
                wilcoxon(&x, &y, cfg.stats.wilcoxon_mode).map_err(stat_err(&comparison))?
            };
            dist.push_str(&format!(
                "{ml},{pl},{},{},{},{}\n",
                result.method,
                fmt_f(result.statistic),
                fmt_f(result.p_value),
                x.len()
            ));
        }
    }
    write_text(&dir.join("distribution_tests.csv"), &dist)?;

    // full Pearson matrix over all surface pairs
    let mut pear = String::from("a,b,n,r,p\n");
    for (i, a) in order.iter().enumerate() {
        for b in order.iter().skip(i + 1) {
            let comparison = format!("pearson {a} vs {b}");
            let (x, y) = paired_values(&surfaces[a], &surfaces[b]);
            let r = pearson(&x, &y).map_err(stat_err(&comparison))?;
            pear.push_str(&format!(
                "{a},{b},{},{},{}\n",
                x.len(),
                fmt_f(r.statistic),
                fmt_f(r.p_value)
            ));
        }
    }
    write_text(&dir.join("pearson.csv"), &pear)?;

    // spatial statistics need one weights structure per domain; surfaces can
    // differ in coverage, so weights are rebuilt per surface
    let scheme = cfg.stats.weight_scheme()?;
    let weights_for = |s: &ScoreSurface| -> Result<SpatialWeights, PipelineError> {
        let pts: Vec<(String, f64, f64)> = s
            .rows()
            .map(|(id, _, (lon, lat))| (id.clone(), lon, lat))
            .collect();
        build_weights(&pts, scheme, true).map_err(spatial_err(&s.group_label))
    };

    let mut moran_global = String::from("surface,i,z,pseudo_p,permutations\n");
    for label in &order {
        let s = &surfaces[label];
        let w = weights_for(s)?;
        let g = morans_i(s, &w, cfg.stats.permutations, cfg.seed).map_err(spatial_err(label))?;
        moran_global.push_str(&format!(
            "{label},{},{},{},{}\n",
            fmt_f(g.i),
            fmt_f(g.z),
            fmt_f(g.pseudo_p),
            g.permutations
        ));
    }
    write_text(&dir.join("moran_global.csv"), &moran_global)?;

    // six difference surfaces: each model minus its matched participant group
    let mut moran_diff = String::from("diff,i,z,pseudo_p,permutations\n");
    for model in PromptModel::all() {
        let ml = model.label();
        let pl = participant_for(model.persona).label();
        let comparison = format!("{ml}_minus_{pl}");
        let diff = difference_surface(&surfaces[&ml], &surfaces[pl])?;
        let diff_surface = diff.as_surface();
        let w = weights_for(&diff_surface)?;
        let analysis: DiffAnalysis =
            analyze_differences(&diff, &w, cfg.stats.permutations, cfg.seed, cfg.stats.alpha)
                .map_err(spatial_err(&comparison))?;
        moran_diff.push_str(&format!(
            "{comparison},{},{},{},{}\n",
            fmt_f(analysis.global.i),
            fmt_f(analysis.global.z),
            fmt_f(analysis.global.pseudo_p),
            analysis.global.permutations
        ));
        io::write_local_csv(&dir.join(format!("local_{comparison}.csv")), &analysis.local)?;
        io::write_local_geojson(
            &dir.join(format!("local_{comparison}.geojson")),
            &analysis.local,
            &diff.locations,
        )?;
        io::write_gstar_csv(&dir.join(format!("gstar_{comparison}.csv")), &analysis.gstar)?;
        io::write_gstar_geojson(
            &dir.join(format!("gstar_{comparison}.geojson")),
            &analysis.gstar,
            &diff.locations,
        )?;
    }
    write_text(&dir.join("moran_diff.csv"), &moran_diff)?;

    // luminosity-score correlation per surface
    let lums = io::read_luminosity_csv(&luminosity_csv(cfg))?;
    let lum_map: BTreeMap<&str, f64> = lums.iter().map(|r| (r.point_id.as_str(), r.l)).collect();
    let mut lum_csv = String::from("surface,n,r,p\n");
    for label in &order {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (id, v) in &surfaces[label].values {
            if let Some(&l) = lum_map.get(id.as_str()) {
                x.push(l);
                y.push(*v);
            }
        }
        let comparison = format!("luminosity vs {label}");
        let r = pearson(&x, &y).map_err(stat_err(&comparison))?;
        lum_csv.push_str(&format!(
            "{label},{},{},{}\n",
            x.len(),
            fmt_f(r.statistic),
            fmt_f(r.p_value)
        ));
    }
    write_text(&dir.join("luminosity_pearson.csv"), &lum_csv)?;

    let mut manifest = Manifest::new("analyze");
    manifest.record_input("points", &points_csv(cfg))?;
    manifest.counts.insert("surfaces".into(), order.len() as u64);
    manifest.counts.insert("diffs".into(), PromptModel::all().len() as u64);
    manifest.write(&manifest_path(cfg, "analyze"))?;
    Ok(())
}

fn copy_file(from: &Path, to: &Path) -> Result<(), PipelineError> {
    let bytes = fs::read(from).map_err(|source| {
        PipelineError::Io(IoError::Io {
            path: from.to_path_buf(),
            source,
        })
    })?;
    fs::write(to, bytes).map_err(|source| PipelineError::Write {
        path: to.to_path_buf(),
        source,
    })
}

/// report: render the results bundle into a report directory — tables, map
/// layers, a plot-ready long-format CSV, and a headline summary. Regenerating
/// from the same bundle is byte-identical.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    let adir = analysis_dir(cfg);
    let rdir = report_dir(cfg);
    let tables = rdir.join("tables");
    let maps = rdir.join("maps");
    let plots = rdir.join("plots");
    ensure_dir(&tables)?;
    ensure_dir(&maps)?;
    ensure_dir(&plots)?;

    for name in [
        "summary.csv",
        "normality.csv",
        "distribution_tests.csv",
        "pearson.csv",
        "moran_global.csv",
        "moran_diff.csv",
        "luminosity_pearson.csv",
    ] {
        copy_file(&adir.join(name), &tables.join(name))?;
    }

    let mut hot_cold: Vec<(String, usize, usize)> = Vec::new();
    for model in PromptModel::all() {
        let label = format!(
            "{}_minus_{}",
            model.label(),
            participant_for(model.persona).label()
        );
        for kind in ["local", "gstar"] {
            let name = format!("{kind}_{label}.geojson");
            copy_file(&adir.join(&name), &maps.join(&name))?;
        }
        // count hot/cold sites for the headline summary
        let mut hot = 0usize;
        let mut cold = 0usize;
        let mut rdr =
            csv::Reader::from_path(adir.join(format!("gstar_{label}.csv"))).map_err(IoError::Csv)?;
        for row in rdr.records() {
            let row = row.map_err(IoError::Csv)?;
            match row.get(3).unwrap_or("") {
                "hot" => hot += 1,
                "cold" => cold += 1,
                _ => {}
            }
        }
        hot_cold.push((label, hot, cold));
    }
    write_text(
        &maps.join("palette.json"),
        "{\n  \"hot\": \"red\",\n  \"cold\": \"blue\",\n  \"ns\": \"black\"\n}\n",
    )?;

    // plot-ready long CSV: one row per (comparison, participant value, model
    // value) pair on the common domain
    let mut scatter = String::from("comparison,x,y\n");
    for model in PromptModel::all() {
        let ml = model.label();
        let pl = participant_for(model.persona).label();
        let ms = read_surface(cfg, &ml)?;
        let ps = read_surface(cfg, pl)?;
        let ids = common_ids(&ms, &ps);
        for id in &ids {
            scatter.push_str(&format!(
                "{ml}_vs_{pl},{},{}\n",
                fmt_f(ps.values[id]),
                fmt_f(ms.values[id])
            ));
        }
    }
    write_text(&plots.join("scatter.csv"), &scatter)?;

    // headline summary
    let participants = [
        RaterGroup::LocalResident.label(),
        RaterGroup::NonResident.label(),
    ];
    let mut max_r: Option<(String, String, f64)> = None;
    let mut rdr = csv::Reader::from_path(adir.join("pearson.csv")).map_err(IoError::Csv)?;
    for row in rdr.records() {
        let row = row.map_err(IoError::Csv)?;
        let a = row.get(0).unwrap_or("");
        let b = row.get(1).unwrap_or("");
        let r: f64 = row.get(3).unwrap_or("").parse().unwrap_or(f64::NAN);
        let crosses = participants.contains(&a) != participants.contains(&b);
        if crosses && max_r.as_ref().map_or(true, |(_, _, best)| r > *best) {
            max_r = Some((a.to_string(), b.to_string(), r));
        }
    }

    let mut text = String::from("headline results\n================\n");
    if let Some((a, b, r)) = &max_r {
        text.push_str(&format!(
            "max model-participant pearson r: {} ({a} vs {b})\n",
            fmt_f(*r)
        ));
    }
    let mut rdr = csv::Reader::from_path(adir.join("moran_diff.csv")).map_err(IoError::Csv)?;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in rdr.records() {
        let row = row.map_err(IoError::Csv)?;
        let i: f64 = row.get(1).unwrap_or("").parse().unwrap_or(f64::NAN);
        lo = lo.min(i);
        hi = hi.max(i);
    }
    text.push_str(&format!(
        "global moran's I of difference surfaces: {} to {}\n",
        fmt_f(lo),
        fmt_f(hi)
    ));
    for (label, hot, cold) in &hot_cold {
        text.push_str(&format!("{label}: {hot} hot spots, {cold} cold spots\n"));
    }
    write_text(&rdir.join("summary.txt"), &text)?;
    Ok(())
}

// re-exported surface analysis helpers used by integration tests
pub use crate::spatial::{GStarLabel, MoranLabel};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PipelineConfig;
    use serde_json::json;
    use tempfile::tempdir;

    fn write_network(path: &Path, segments: &[Vec<(f64, f64)>]) {
        let features: Vec<_> = segments
            .iter()
            .map(|seg| {
                let coords: Vec<_> = seg.iter().map(|&(lon, lat)| json!([lon, lat])).collect();
                json!({
                    "type": "Feature",
                    "geometry": { "type": "LineString", "coordinates": coords },
                    "properties": {}
                })
            })
            .collect();
        fs::write(
            path,
            json!({ "type": "FeatureCollection", "features": features }).to_string(),
        )
        .unwrap();
    }

    fn base_config(dir: &Path) -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.paths.network = dir.join("network.geojson");
        cfg.paths.output_dir = dir.join("out");
        cfg.paths.tiles = dir.join("tiles");
        cfg.paths.ratings = dir.join("human_ratings.csv");
        cfg.paths.raters = dir.join("raters.csv");
        cfg.sampling.random_n = 10;
        cfg.seed = 42;
        cfg
    }

    #[test]
    fn sample_is_deterministic_and_manifested() {
        let tmp = tempdir().unwrap();
        let cfg = base_config(tmp.path());
        // two short streets near Helsinki
        let deg = 90.0 / 111_194.9;
        write_network(
            &cfg.paths.network,
            &[
                vec![(24.93, 60.17), (24.93, 60.17 + deg)],
                vec![(24.94, 60.18), (24.94, 60.18 + deg)],
            ],
        );
        let a = cmd_sample(&cfg).unwrap();
        let points_a = fs::read(points_csv(&cfg)).unwrap();
        let b = cmd_sample(&cfg).unwrap();
        let points_b = fs::read(points_csv(&cfg)).unwrap();
        assert_eq!(points_a, points_b);
        assert_eq!(a.deduped, b.deduped);
        assert_eq!(a.subsample, 10);
        // 90 m street at 20 m interval: 6 points each (0..80 plus the endpoint)
        assert_eq!(a.grid, 12);

        let m = Manifest::read(&manifest_path(&cfg, "sample")).unwrap();
        assert_eq!(m.counts["grid"], 12);
        assert_eq!(m.counts["deduped"] as usize, a.deduped);
    }

    #[test]
    fn sample_without_landmarks_skips_augmentation() {
        let tmp = tempdir().unwrap();
        let mut cfg = base_config(tmp.path());
        cfg.paths.landmarks = Some(tmp.path().join("missing_landmarks.geojson"));
        let deg = 90.0 / 111_194.9;
        write_network(&cfg.paths.network, &[vec![(24.93, 60.17), (24.93, 60.17 + deg)]]);
        let out = cmd_sample(&cfg).unwrap();
        assert_eq!(out.augmented, 0);
        assert_eq!(out.merged, out.subsample);
    }

    #[test]
    fn missing_network_error_names_the_path() {
        let tmp = tempdir().unwrap();
        let cfg = base_config(tmp.path());
        let err = cmd_sample(&cfg).unwrap_err();
        assert!(err.to_string().contains("network.geojson"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn analyze_refuses_mismatched_point_sets() {
        let tmp = tempdir().unwrap();
        let cfg = base_config(tmp.path());
        ensure_dir(&cfg.paths.output_dir).unwrap();
        let mut m1 = Manifest::new("rate");
        m1.inputs.insert("points".into(), "aaaa".into());
        m1.write(&manifest_path(&cfg, "rate")).unwrap();
        let mut m2 = Manifest::new("panel_ingest");
        m2.inputs.insert("points".into(), "bbbb".into());
        m2.write(&manifest_path(&cfg, "panel_ingest")).unwrap();
        let err = cmd_analyze(&cfg).unwrap_err();
        assert!(matches!(err, PipelineError::MismatchedInputs { .. }));
    }

    #[test]
    fn exit_codes_by_error_class() {
        let cfg_err = PipelineError::Config(ConfigError::Invalid("x".into()));
        assert_eq!(cfg_err.exit_code(), 1);
        let backend = PipelineError::Backend(BackendError::Exhausted {
            attempts: 4,
            last_raw: String::new(),
        });
        assert_eq!(backend.exit_code(), 3);
        assert_eq!(PipelineError::RateFailures(2).exit_code(), 3);
        let data = PipelineError::EmptyInput {
            file: PathBuf::from("x.csv"),
        };
        assert_eq!(data.exit_code(), 2);
    }
}
