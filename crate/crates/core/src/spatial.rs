//! Spatial weights and spatial statistics: global Moran's I, local Moran's I
//! with cluster labels, and Getis-Ord Gi* with hot/cold-spot labels.
//!
//! Permutation inference uses per-permutation RNG substreams so parallel and
//! serial evaluation orders produce identical results.

use crate::adjust::{DiffSurface, ScoreSurface};
use crate::geo::haversine_m;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpatialError {
    #[error("need at least 2 points, got {0}")]
    TooFew(usize),
    #[error("knn k={k} infeasible for {n} points")]
    KnnInfeasible { k: usize, n: usize },
    #[error("distance band must be positive, got {0}")]
    BadBand(f64),
    #[error("zero variance: surface is constant")]
    ZeroVariance,
    #[error("surface and weights cover different point sets")]
    Misaligned,
}

/// Neighbor definition used when building weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum WeightScheme {
    /// k nearest neighbors by great-circle distance.
    Knn(usize),
    /// All points within the given distance (meters), closed ball.
    DistanceBand(f64),
}

/// Sparse spatial weights over an ordered set of point ids.
#[derive(Debug, Clone, Serialize)]
pub struct SpatialWeights {
    pub ids: Vec<String>,
    /// Per-site neighbor list as (neighbor index, weight).
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub scheme: WeightScheme,
    pub standardized: bool,
    pub include_self: bool,
}

impl SpatialWeights {
    /// Ids of sites with no neighbors (possible under a distance band).
    pub fn isolates(&self) -> Vec<&str> {
        self.ids
            .iter()
            .zip(&self.neighbors)
            .filter(|(_, nb)| nb.is_empty())
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Gi* variant: same neighbor sets plus self, binary weights, no
    /// standardization.
    pub fn with_self(&self) -> SpatialWeights {
        let neighbors = self
            .neighbors
            .iter()
            .enumerate()
            .map(|(i, nb)| {
                let mut row: Vec<(usize, f64)> = nb.iter().map(|&(j, _)| (j, 1.0)).collect();
                row.push((i, 1.0));
                row.sort_by_key(|&(j, _)| j);
                row
            })
            .collect();
        SpatialWeights {
            ids: self.ids.clone(),
            neighbors,
            scheme: self.scheme,
            standardized: false,
            include_self: true,
        }
    }
}

/// Build spatial weights from (id, lon, lat) points.
///
/// KNN ties are broken by point order, so the result is deterministic. A
/// distance band may leave isolated sites; their rows stay empty and the
/// statistics exclude them.
pub fn build_weights(
    points: &[(String, f64, f64)],
    scheme: WeightScheme,
    standardize: bool,
) -> Result<SpatialWeights, SpatialError> {
    let n = points.len();
    if n < 2 {
        return Err(SpatialError::TooFew(n));
    }
    match scheme {
        WeightScheme::Knn(k) => {
            if k == 0 || k >= n {
                return Err(SpatialError::KnnInfeasible { k, n });
            }
        }
        WeightScheme::DistanceBand(d) => {
            if !(d > 0.0) {
                return Err(SpatialError::BadBand(d));
            }
        }
    }

    let mut neighbors: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for (i, (_, lon_i, lat_i)) in points.iter().enumerate() {
        let mut row: Vec<(usize, f64)> = Vec::new();
        match scheme {
            WeightScheme::Knn(k) => {
                let mut dists: Vec<(f64, usize)> = points
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(j, (_, lon_j, lat_j))| {
                        (haversine_m((*lon_i, *lat_i), (*lon_j, *lat_j)), j)
                    })
                    .collect();
                dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
                row = dists[..k].iter().map(|&(_, j)| (j, 1.0)).collect();
                row.sort_by_key(|&(j, _)| j);
            }
            WeightScheme::DistanceBand(d) => {
                for (j, (_, lon_j, lat_j)) in points.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    if haversine_m((*lon_i, *lat_i), (*lon_j, *lat_j)) <= d {
                        row.push((j, 1.0));
                    }
                }
            }
        }
        if standardize && !row.is_empty() {
            let sum: f64 = row.iter().map(|&(_, w)| w).sum();
            for entry in &mut row {
                entry.1 /= sum;
            }
        }
        neighbors.push(row);
    }

    Ok(SpatialWeights {
        ids: points.iter().map(|(id, _, _)| id.clone()).collect(),
        neighbors,
        scheme,
        standardized: standardize,
        include_self: false,
    })
}

/// Global Moran's I with permutation inference.
#[derive(Debug, Clone, Serialize)]
pub struct GlobalStat {
    pub i: f64,
    pub z: f64,
    pub pseudo_p: f64,
    pub permutations: usize,
    pub seed: u64,
}

/// Local Moran cluster category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MoranLabel {
    HighHigh,
    LowLow,
    HighLow,
    LowHigh,
    NotSignificant,
}

impl MoranLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            MoranLabel::HighHigh => "HH",
            MoranLabel::LowLow => "LL",
            MoranLabel::HighLow => "HL",
            MoranLabel::LowHigh => "LH",
            MoranLabel::NotSignificant => "NS",
        }
    }
}

/// Gi* hot/cold category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GStarLabel {
    Hot,
    Cold,
    NotSignificant,
}

impl GStarLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            GStarLabel::Hot => "hot",
            GStarLabel::Cold => "cold",
            GStarLabel::NotSignificant => "ns",
        }
    }

    /// Map color for rendering: hot=red, cold=blue, ns=black.
    pub fn color(&self) -> &'static str {
        match self {
            GStarLabel::Hot => "red",
            GStarLabel::Cold => "blue",
            GStarLabel::NotSignificant => "black",
        }
    }
}

/// Per-site statistic with its inferential value and category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteStat<L> {
    pub point_id: String,
    pub statistic: f64,
    /// pseudo-p for local Moran, z-score for Gi*.
    pub p_or_z: f64,
    pub label: L,
}

/// Values of `surface` in the order of `w.ids`, verifying alignment.
fn aligned_values(surface: &ScoreSurface, w: &SpatialWeights) -> Result<Vec<f64>, SpatialError> {
    if surface.values.len() != w.ids.len() {
        return Err(SpatialError::Misaligned);
    }
    w.ids
        .iter()
        .map(|id| surface.values.get(id).copied().ok_or(SpatialError::Misaligned))
        .collect()
}

/// Moran's I for one assignment of values to sites, ignoring isolates.
fn moran_statistic(values: &[f64], w: &SpatialWeights, included: &[usize]) -> f64 {
    let n = included.len() as f64;
    let mean = included.iter().map(|&i| values[i]).sum::<f64>() / n;
    let den: f64 = included.iter().map(|&i| (values[i] - mean).powi(2)).sum();
    let mut num = 0.0;
    let mut s0 = 0.0;
    for &i in included {
        let zi = values[i] - mean;
        for &(j, wij) in &w.neighbors[i] {
            num += wij * zi * (values[j] - mean);
            s0 += wij;
        }
    }
    (n / s0) * num / den
}

/// Global Moran's I with pseudo-p from random relabeling of values across
/// sites and z from the permutation distribution.
pub fn morans_i(
    surface: &ScoreSurface,
    w: &SpatialWeights,
    permutations: usize,
    seed: u64,
) -> Result<GlobalStat, SpatialError> {
    let values = aligned_values(surface, w)?;
    let included: Vec<usize> = (0..values.len())
        .filter(|&i| !w.neighbors[i].is_empty())
        .collect();
    if included.len() < 2 {
        return Err(SpatialError::TooFew(included.len()));
    }
    let first = values[included[0]];
    if included.iter().all(|&i| values[i] == first) {
        return Err(SpatialError::ZeroVariance);
    }

    let observed = moran_statistic(&values, w, &included);
    if permutations == 0 {
        return Ok(GlobalStat {
            i: observed,
            z: 0.0,
            pseudo_p: 1.0,
            permutations,
            seed,
        });
    }

    let pool: Vec<f64> = included.iter().map(|&i| values[i]).collect();
    let mut perm_stats = Vec::with_capacity(permutations);
    let mut scratch = values.clone();
    for p in 0..permutations {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p as u64 + 1);
        let mut shuffled = pool.clone();
        shuffled.shuffle(&mut rng);
        for (&i, &v) in included.iter().zip(&shuffled) {
            scratch[i] = v;
        }
        perm_stats.push(moran_statistic(&scratch, w, &included));
    }
    let extreme = perm_stats.iter().filter(|s| s.abs() >= observed.abs()).count();
    let pseudo_p = (extreme as f64 + 1.0) / (permutations as f64 + 1.0);
    let pm = perm_stats.iter().sum::<f64>() / permutations as f64;
    let pv = perm_stats.iter().map(|s| (s - pm).powi(2)).sum::<f64>()
        / (permutations as f64 - 1.0);
    let z = if pv > 0.0 { (observed - pm) / pv.sqrt() } else { 0.0 };

    Ok(GlobalStat {
        i: observed,
        z,
        pseudo_p,
        permutations,
        seed,
    })
}

/// Local Moran's I (LISA) with conditional permutation inference.
///
/// Each site's value is held fixed while the remaining values are permuted
/// onto its neighbor positions. Isolated sites come back NotSignificant with
/// pseudo-p 1.
pub fn local_morans_i(
    surface: &ScoreSurface,
    w: &SpatialWeights,
    permutations: usize,
    seed: u64,
    alpha: f64,
) -> Result<Vec<SiteStat<MoranLabel>>, SpatialError> {
    let values = aligned_values(surface, w)?;
    let n = values.len();
    if n < 2 {
        return Err(SpatialError::TooFew(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if m2 == 0.0 {
        return Err(SpatialError::ZeroVariance);
    }
    let z: Vec<f64> = values.iter().map(|v| v - mean).collect();

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let row = &w.neighbors[i];
        if row.is_empty() {
            out.push(SiteStat {
                point_id: w.ids[i].clone(),
                statistic: 0.0,
                p_or_z: 1.0,
                label: MoranLabel::NotSignificant,
            });
            continue;
        }
        let lag: f64 = row.iter().map(|&(j, wij)| wij * z[j]).sum();
        let observed = z[i] * lag / m2;

        let pseudo_p = if permutations == 0 {
            1.0
        } else {
            // values available to land on i's neighbor slots: everyone but i
            let others: Vec<f64> = z
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &v)| v)
                .collect();
            let k = row.len();
            let mut extreme = 0usize;
            for p in 0..permutations {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                rng.set_stream(p as u64 + 1);
                let picks = rand::seq::index::sample(&mut rng, others.len(), k);
                let perm_lag: f64 = row
                    .iter()
                    .zip(picks.iter())
                    .map(|(&(_, wij), idx)| wij * others[idx])
                    .sum();
                let perm_stat = z[i] * perm_lag / m2;
                if perm_stat.abs() >= observed.abs() {
                    extreme += 1;
                }
            }
            (extreme as f64 + 1.0) / (permutations as f64 + 1.0)
        };

        let label = if pseudo_p <= alpha {
            match (z[i] >= 0.0, lag >= 0.0) {
                (true, true) => MoranLabel::HighHigh,
                (false, false) => MoranLabel::LowLow,
                (true, false) => MoranLabel::HighLow,
                (false, true) => MoranLabel::LowHigh,
            }
        } else {
            MoranLabel::NotSignificant
        };
        out.push(SiteStat {
            point_id: w.ids[i].clone(),
            statistic: observed,
            p_or_z: pseudo_p,
            label,
        });
    }
    Ok(out)
}

/// Two-sided critical z for the given alpha (1.959964 at alpha = 0.05).
pub fn z_critical(alpha: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    normal.inverse_cdf(1.0 - alpha / 2.0)
}

/// Getis-Ord Gi* hot-spot statistic with z-threshold significance.
///
/// `w_star` must be self-inclusive (see [`SpatialWeights::with_self`]).
pub fn getis_ord_gstar(
    surface: &ScoreSurface,
    w_star: &SpatialWeights,
    alpha: f64,
) -> Result<Vec<SiteStat<GStarLabel>>, SpatialError> {
    let values = aligned_values(surface, w_star)?;
    let n = values.len();
    if n < 2 {
        return Err(SpatialError::TooFew(n));
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    // population standard deviation, per the standard Gi* z-form
    let s = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf).sqrt();
    if s == 0.0 {
        return Err(SpatialError::ZeroVariance);
    }
    let z_crit = z_critical(alpha);

    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let row = &w_star.neighbors[i];
        let wsum: f64 = row.iter().map(|&(_, w)| w).sum();
        let w2sum: f64 = row.iter().map(|&(_, w)| w * w).sum();
        let lag: f64 = row.iter().map(|&(j, w)| w * values[j]).sum();
        let denom = s * ((nf * w2sum - wsum * wsum) / (nf - 1.0)).sqrt();
        let zscore = if denom > 0.0 { (lag - mean * wsum) / denom } else { 0.0 };
        let label = if zscore >= z_crit {
            GStarLabel::Hot
        } else if zscore <= -z_crit {
            GStarLabel::Cold
        } else {
            GStarLabel::NotSignificant
        };
        out.push(SiteStat {
            point_id: w_star.ids[i].clone(),
            statistic: zscore,
            p_or_z: zscore,
            label,
        });
    }
    Ok(out)
}

/// All three spatial statistics on one model − participant difference
/// surface. Hot means the model rates higher than participants, clustered;
/// cold the reverse.
#[derive(Debug, Clone, Serialize)]
pub struct DiffAnalysis {
    pub label: String,
    pub global: GlobalStat,
    pub local: Vec<SiteStat<MoranLabel>>,
    pub gstar: Vec<SiteStat<GStarLabel>>,
}

pub fn analyze_differences(
    diff: &DiffSurface,
    w: &SpatialWeights,
    permutations: usize,
    seed: u64,
    alpha: f64,
) -> Result<DiffAnalysis, SpatialError> {
    let surface = diff.as_surface();
    let global = morans_i(&surface, w, permutations, seed)?;
    let local = local_morans_i(&surface, w, permutations, seed, alpha)?;
    let gstar = getis_ord_gstar(&surface, &w.with_self(), alpha)?;
    Ok(DiffAnalysis {
        label: diff.label(),
        global,
        local,
        gstar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::collections::BTreeMap;

    /// nx × ny grid of points near the equator, ~spacing_m apart.
    fn grid_points(nx: usize, ny: usize, spacing_m: f64) -> Vec<(String, f64, f64)> {
        let deg = spacing_m / 111_194.9; // meters per degree on the test sphere
        let mut pts = Vec::new();
        for r in 0..ny {
            for c in 0..nx {
                pts.push((
                    format!("p{:03}", r * nx + c),
                    c as f64 * deg,
                    r as f64 * deg,
                ));
            }
        }
        pts
    }

    fn surface_from(pts: &[(String, f64, f64)], vals: &[f64]) -> ScoreSurface {
        let mut values = BTreeMap::new();
        let mut locations = BTreeMap::new();
        for ((id, lon, lat), &v) in pts.iter().zip(vals) {
            values.insert(id.clone(), v);
            locations.insert(id.clone(), (*lon, *lat));
        }
        ScoreSurface {
            group_label: "test".into(),
            values,
            locations,
        }
    }

    /// Explicit rook adjacency on an nx × ny grid, row-standardized.
    fn rook_weights(pts: &[(String, f64, f64)], nx: usize, ny: usize) -> SpatialWeights {
        let mut neighbors = Vec::new();
        for r in 0..ny {
            for c in 0..nx {
                let mut row = Vec::new();
                if r > 0 {
                    row.push(((r - 1) * nx + c, 1.0));
                }
                if r + 1 < ny {
                    row.push(((r + 1) * nx + c, 1.0));
                }
                if c > 0 {
                    row.push((r * nx + c - 1, 1.0));
                }
                if c + 1 < nx {
                    row.push((r * nx + c + 1, 1.0));
                }
                let sum: f64 = row.iter().map(|&(_, w)| w).sum();
                for e in &mut row {
                    e.1 /= sum;
                }
                row.sort_by_key(|&(j, _)| j);
                neighbors.push(row);
            }
        }
        SpatialWeights {
            ids: pts.iter().map(|(id, _, _)| id.clone()).collect(),
            neighbors,
            scheme: WeightScheme::Knn(4),
            standardized: true,
            include_self: false,
        }
    }

    /// Naive O(n^2) Moran's I over a dense weight matrix.
    fn naive_moran(values: &[f64], w: &SpatialWeights) -> f64 {
        let n = values.len();
        let mut dense = vec![vec![0.0; n]; n];
        for (i, row) in w.neighbors.iter().enumerate() {
            for &(j, wij) in row {
                dense[i][j] = wij;
            }
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        let mut s0 = 0.0;
        for i in 0..n {
            for j in 0..n {
                num += dense[i][j] * (values[i] - mean) * (values[j] - mean);
                s0 += dense[i][j];
            }
        }
        let den: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (n as f64 / s0) * num / den
    }

    #[test]
    fn knn_picks_nearest_point() {
        // 3 collinear points at 0, 10, 25 m: the middle one's single nearest
        // neighbor is the first.
        let deg = 1.0 / 111_194.9;
        let pts = vec![
            ("a".to_string(), 0.0, 0.0),
            ("b".to_string(), 10.0 * deg, 0.0),
            ("c".to_string(), 25.0 * deg, 0.0),
        ];
        let w = build_weights(&pts, WeightScheme::Knn(1), true).unwrap();
        assert_eq!(w.neighbors[1], vec![(0, 1.0)]);
    }

    #[test]
    fn standardized_rows_sum_to_one() {
        let pts = grid_points(5, 5, 20.0);
        let w = build_weights(&pts, WeightScheme::Knn(8), true).unwrap();
        for row in &w.neighbors {
            let sum: f64 = row.iter().map(|&(_, w)| w).sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            assert_eq!(row.len(), 8);
        }
    }

    #[test]
    fn distance_band_recovers_rook_adjacency() {
        let pts = grid_points(4, 4, 100.0);
        let w = build_weights(&pts, WeightScheme::DistanceBand(120.0), false).unwrap();
        // interior site (1,1) = index 5 has exactly its 4 rook neighbors
        let mut nbrs: Vec<usize> = w.neighbors[5].iter().map(|&(j, _)| j).collect();
        nbrs.sort();
        assert_eq!(nbrs, vec![1, 4, 6, 9]);
        for (i, row) in w.neighbors.iter().enumerate() {
            let (r, c) = (i / 4, i % 4);
            let degree = [r > 0, r < 3, c > 0, c < 3].iter().filter(|&&b| b).count();
            assert_eq!(row.len(), degree, "site {i}");
        }
    }

    #[test]
    fn checkerboard_moran_is_minus_one() {
        for side in [4usize, 8] {
            let pts = grid_points(side, side, 100.0);
            let w = rook_weights(&pts, side, side);
            let vals: Vec<f64> = (0..side * side)
                .map(|i| if (i / side + i % side) % 2 == 0 { 1.0 } else { -1.0 })
                .collect();
            let surface = surface_from(&pts, &vals);
            let g = morans_i(&surface, &w, 99, 42).unwrap();
            assert_abs_diff_eq!(g.i, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn matches_naive_double_sum_on_random_surfaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..40 {
            let side = rng.gen_range(3..=8usize);
            let pts = grid_points(side, side, 50.0);
            let vals: Vec<f64> = (0..side * side).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let surface = surface_from(&pts, &vals);
            let w = if trial % 2 == 0 {
                build_weights(&pts, WeightScheme::Knn(rng.gen_range(2..6)), true).unwrap()
            } else {
                rook_weights(&pts, side, side)
            };
            let g = morans_i(&surface, &w, 0, 1).unwrap();
            assert_abs_diff_eq!(g.i, naive_moran(&vals, &w), epsilon = 1e-10);
        }
    }

    #[test]
    fn local_mean_equals_global_under_row_standardization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = grid_points(6, 6, 80.0);
        let vals: Vec<f64> = (0..36).map(|_| rng.gen_range(0.0..10.0)).collect();
        let surface = surface_from(&pts, &vals);
        let w = build_weights(&pts, WeightScheme::Knn(8), true).unwrap();
        let g = morans_i(&surface, &w, 0, 1).unwrap();
        let local = local_morans_i(&surface, &w, 0, 1, 0.05).unwrap();
        let mean_local: f64 =
            local.iter().map(|s| s.statistic).sum::<f64>() / local.len() as f64;
        assert_abs_diff_eq!(mean_local, g.i, epsilon = 1e-10);
    }

    #[test]
    fn affine_invariance_of_all_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts = grid_points(5, 5, 60.0);
        let vals: Vec<f64> = (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shifted: Vec<f64> = vals.iter().map(|v| 3.0 * v + 7.0).collect();
        let s1 = surface_from(&pts, &vals);
        let s2 = surface_from(&pts, &shifted);
        let w = build_weights(&pts, WeightScheme::Knn(6), true).unwrap();

        let g1 = morans_i(&s1, &w, 199, 3).unwrap();
        let g2 = morans_i(&s2, &w, 199, 3).unwrap();
        assert_abs_diff_eq!(g1.i, g2.i, epsilon = 1e-9);
        assert_eq!(g1.pseudo_p, g2.pseudo_p);

        let l1 = local_morans_i(&s1, &w, 99, 3, 0.05).unwrap();
        let l2 = local_morans_i(&s2, &w, 99, 3, 0.05).unwrap();
        for (a, b) in l1.iter().zip(&l2) {
            assert_abs_diff_eq!(a.statistic, b.statistic, epsilon = 1e-9);
            assert_eq!(a.label, b.label);
        }

        let ws = w.with_self();
        let h1 = getis_ord_gstar(&s1, &ws, 0.05).unwrap();
        let h2 = getis_ord_gstar(&s2, &ws, 0.05).unwrap();
        for (a, b) in h1.iter().zip(&h2) {
            assert_abs_diff_eq!(a.statistic, b.statistic, epsilon = 1e-9);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn pseudo_p_floor_at_999_permutations() {
        // strongly clustered surface: left half low, right half high
        let pts = grid_points(6, 6, 70.0);
        let vals: Vec<f64> = (0..36)
            .map(|i| if i % 6 < 3 { -1.0 } else { 1.0 })
            .collect();
        let surface = surface_from(&pts, &vals);
        let w = build_weights(&pts, WeightScheme::Knn(4), true).unwrap();
        let g = morans_i(&surface, &w, 999, 7).unwrap();
        assert_eq!(g.pseudo_p, 0.001);
        assert!(g.z > 3.0);
    }

    #[test]
    fn constant_surface_is_rejected() {
        let pts = grid_points(3, 3, 50.0);
        let surface = surface_from(&pts, &[2.0; 9]);
        let w = build_weights(&pts, WeightScheme::Knn(3), true).unwrap();
        assert!(matches!(
            morans_i(&surface, &w, 9, 1),
            Err(SpatialError::ZeroVariance)
        ));
        assert!(matches!(
            local_morans_i(&surface, &w, 9, 1, 0.05),
            Err(SpatialError::ZeroVariance)
        ));
        assert!(matches!(
            getis_ord_gstar(&surface, &w.with_self(), 0.05),
            Err(SpatialError::ZeroVariance)
        ));
    }

    #[test]
    fn high_block_is_hh_and_spike_is_hl() {
        // 2x2 high block inside a low 6x6 field
        let pts = grid_points(6, 6, 70.0);
        let mut vals = vec![0.0; 36];
        for &i in &[14usize, 15, 20, 21] {
            vals[i] = 5.0;
        }
        let surface = surface_from(&pts, &vals);
        let w = rook_weights(&pts, 6, 6);
        let local = local_morans_i(&surface, &w, 999, 11, 0.05).unwrap();
        for &i in &[14usize, 15, 20, 21] {
            assert_eq!(local[i].label, MoranLabel::HighHigh, "site {i}");
        }

        // single spike: high value surrounded by distinctly low neighbors in
        // an otherwise mixed field
        let mut spike: Vec<f64> = (0..36)
            .map(|i| if i % 2 == 0 { 0.5 } else { -0.5 })
            .collect();
        spike[14] = 10.0;
        for &j in &[8usize, 13, 15, 20] {
            spike[j] = -3.0;
        }
        let s2 = surface_from(&pts, &spike);
        let local2 = local_morans_i(&s2, &w, 999, 11, 0.05).unwrap();
        assert_eq!(local2[14].label, MoranLabel::HighLow);
    }

    #[test]
    fn gstar_spike_has_maximal_z() {
        let pts = grid_points(5, 5, 90.0);
        let mut vals = vec![0.0; 25];
        vals[12] = 10.0;
        let surface = surface_from(&pts, &vals);
        let w = build_weights(&pts, WeightScheme::Knn(4), false).unwrap();
        let g = getis_ord_gstar(&surface, &w.with_self(), 0.05).unwrap();
        let max = g
            .iter()
            .map(|s| s.statistic)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(g[12].statistic, max);
        assert_eq!(g[12].label, GStarLabel::Hot);
    }

    #[test]
    fn gstar_z_scores_center_near_zero_under_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let pts = grid_points(5, 5, 90.0);
        let mut vals: Vec<f64> = (0..25).map(|_| rng.gen_range(0.0..1.0)).collect();
        let w = build_weights(&pts, WeightScheme::Knn(4), false).unwrap().with_self();
        let mut grand = 0.0;
        let mut count = 0usize;
        for _ in 0..50 {
            vals.shuffle(&mut rng);
            let surface = surface_from(&pts, &vals);
            for s in getis_ord_gstar(&surface, &w, 0.05).unwrap() {
                grand += s.statistic;
                count += 1;
            }
        }
        assert!((grand / count as f64).abs() < 0.05);
    }

    #[test]
    fn deterministic_for_identical_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pts = grid_points(5, 5, 40.0);
        let vals: Vec<f64> = (0..25).map(|_| rng.gen_range(0.0..7.0)).collect();
        let surface = surface_from(&pts, &vals);
        let w = build_weights(&pts, WeightScheme::Knn(8), true).unwrap();
        let a = morans_i(&surface, &w, 199, 99).unwrap();
        let b = morans_i(&surface, &w, 199, 99).unwrap();
        assert_eq!(a.i.to_bits(), b.i.to_bits());
        assert_eq!(a.z.to_bits(), b.z.to_bits());
        assert_eq!(a.pseudo_p.to_bits(), b.pseudo_p.to_bits());
        let la = local_morans_i(&surface, &w, 99, 99, 0.05).unwrap();
        let lb = local_morans_i(&surface, &w, 99, 99, 0.05).unwrap();
        assert_eq!(la, lb);
    }

    #[test]
    fn distance_band_isolates_are_excluded() {
        let deg = 1.0 / 111_194.9;
        let mut pts = grid_points(3, 3, 50.0);
        pts.push(("zz_far".to_string(), 10_000.0 * deg, 0.0));
        let w = build_weights(&pts, WeightScheme::DistanceBand(80.0), true).unwrap();
        assert_eq!(w.isolates(), vec!["zz_far"]);
        let mut vals: Vec<f64> = (0..9).map(|i| i as f64).collect();
        vals.push(1000.0);
        let surface = surface_from(&pts, &vals);
        // statistic ignores the isolate entirely
        let with_isolate = morans_i(&surface, &w, 0, 1).unwrap();
        let w9 = build_weights(&pts[..9], WeightScheme::DistanceBand(80.0), true).unwrap();
        let s9 = surface_from(&pts[..9], &vals[..9]);
        let without = morans_i(&s9, &w9, 0, 1).unwrap();
        assert_abs_diff_eq!(with_isolate.i, without.i, epsilon = 1e-12);
    }

    #[test]
    fn z_critical_matches_reference_value() {
        assert_abs_diff_eq!(z_critical(0.05), 1.959964, epsilon = 1e-6);
    }

    #[test]
    fn difference_analysis_runs_all_three() {
        let pts = grid_points(6, 6, 70.0);
        let mut values = BTreeMap::new();
        let mut locations = BTreeMap::new();
        for (i, (id, lon, lat)) in pts.iter().enumerate() {
            let v = if i % 6 < 3 { -0.8 } else { 0.8 };
            values.insert(id.clone(), v + (i as f64) * 1e-3);
            locations.insert(id.clone(), (*lon, *lat));
        }
        let diff = DiffSurface {
            model_label: "model1_lr".into(),
            participant_label: "local_residents".into(),
            values,
            locations,
        };
        let w = build_weights(&pts, WeightScheme::Knn(4), true).unwrap();
        let a = analyze_differences(&diff, &w, 199, 17, 0.05).unwrap();
        assert_eq!(a.label, "model1_lr_minus_local_residents");
        assert_eq!(a.local.len(), 36);
        assert_eq!(a.gstar.len(), 36);
        assert!(a.global.i > 0.3);
    }
}
