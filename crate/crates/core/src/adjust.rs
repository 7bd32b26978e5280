//! Mean-centering of ratings and construction of per-image score surfaces.
//!
//! Human ratings are centered per rater; model ratings per prompt model.
//! Centered ratings aggregate to per-image surfaces by group, and the
//! model-minus-participant difference surfaces feed the spatial analyses.
//! Positive difference means the model rates higher than participants.

use crate::backend::RawModelRating;
use crate::panel::RatingRecord;
use serde::Serialize;
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdjustError {
    #[error("no records to center")]
    Empty,
    #[error("point {0} has no location")]
    MissingLocation(String),
    #[error("difference surface domains do not overlap ({model} vs {participant})")]
    EmptyIntersection { model: String, participant: String },
}

/// One mean-centered rating: raw score minus the owning rater's (or prompt
/// model's) mean.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredRating {
    /// Rater id for humans, prompt-model label for models.
    pub rater_id: String,
    pub point_id: String,
    pub adjusted: f64,
}

/// Per-image adjusted scores for one rater group or prompt model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreSurface {
    pub group_label: String,
    pub values: BTreeMap<String, f64>,
    pub locations: BTreeMap<String, (f64, f64)>,
}

impl ScoreSurface {
    /// Values in point-id order, paired with their coordinates.
    pub fn rows(&self) -> impl Iterator<Item = (&String, f64, (f64, f64))> {
        self.values
            .iter()
            .map(|(id, &v)| (id, v, self.locations[id]))
    }
}

/// Pointwise model − participant difference on the common domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffSurface {
    pub model_label: String,
    pub participant_label: String,
    pub values: BTreeMap<String, f64>,
    pub locations: BTreeMap<String, (f64, f64)>,
}

impl DiffSurface {
    pub fn label(&self) -> String {
        format!("{}_minus_{}", self.model_label, self.participant_label)
    }

    /// View of the diff as a plain surface, for feeding the spatial
    /// statistics.
    pub fn as_surface(&self) -> ScoreSurface {
        ScoreSurface {
            group_label: self.label(),
            values: self.values.clone(),
            locations: self.locations.clone(),
        }
    }
}

/// Centers human ratings by subtracting each rater's own mean raw score.
pub fn center_raters(records: &[RatingRecord]) -> Vec<CenteredRating> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = sums.entry(&r.rater_id).or_insert((0.0, 0));
        e.0 += r.score as f64;
        e.1 += 1;
    }
    records
        .iter()
        .map(|r| {
            let (sum, n) = sums[r.rater_id.as_str()];
            CenteredRating {
                rater_id: r.rater_id.clone(),
                point_id: r.point_id.clone(),
                adjusted: r.score as f64 - sum / n as f64,
            }
        })
        .collect()
}

/// Centers model ratings by subtracting, per prompt model (tier, persona),
/// the mean aggregate score over all rated images.
pub fn center_model(ratings: &[RawModelRating]) -> Vec<CenteredRating> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in ratings {
        let e = sums.entry(r.prompt.label()).or_insert((0.0, 0));
        e.0 += r.aggregate;
        e.1 += 1;
    }
    ratings
        .iter()
        .map(|r| {
            let label = r.prompt.label();
            let (sum, n) = sums[&label];
            CenteredRating {
                rater_id: label,
                point_id: r.point_id.clone(),
                adjusted: r.aggregate - sum / n as f64,
            }
        })
        .collect()
}

/// Builds a per-image surface for one group of raters: the value at each
/// image is the mean of that group's centered ratings of it. Images without
/// any rating from the group are excluded (and reported back). A model
/// surface is the single-member case and passes through unchanged.
pub fn per_group_mean(
    centered: &[CenteredRating],
    members: &HashSet<String>,
    group_label: &str,
    locations: &BTreeMap<String, (f64, f64)>,
) -> Result<(ScoreSurface, Vec<String>), AdjustError> {
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for c in centered.iter().filter(|c| members.contains(&c.rater_id)) {
        let e = sums.entry(&c.point_id).or_insert((0.0, 0));
        e.0 += c.adjusted;
        e.1 += 1;
    }
    if sums.is_empty() {
        return Err(AdjustError::Empty);
    }
    let mut values = BTreeMap::new();
    let mut locs = BTreeMap::new();
    for (id, (sum, n)) in &sums {
        let loc = locations
            .get(*id)
            .ok_or_else(|| AdjustError::MissingLocation(id.to_string()))?;
        values.insert(id.to_string(), sum / *n as f64);
        locs.insert(id.to_string(), *loc);
    }
    // Images the caller knows about but the group never rated.
    let excluded: Vec<String> = locations
        .keys()
        .filter(|id| !values.contains_key(*id))
        .cloned()
        .collect();
    Ok((ScoreSurface { group_label: group_label.to_string(), values, locations: locs }, excluded))
}

/// Pointwise model − participant on the intersection of the two domains.
pub fn difference_surface(model: &ScoreSurface, participant: &ScoreSurface) -> Result<DiffSurface, AdjustError> {
    let mut values = BTreeMap::new();
    let mut locations = BTreeMap::new();
    for (id, &mv) in &model.values {
        if let Some(&pv) = participant.values.get(id) {
            values.insert(id.clone(), mv - pv);
            locations.insert(id.clone(), model.locations[id]);
        }
    }
    if values.is_empty() {
        return Err(AdjustError::EmptyIntersection {
            model: model.group_label.clone(),
            participant: participant.group_label.clone(),
        });
    }
    Ok(DiffSurface {
        model_label: model.group_label.clone(),
        participant_label: participant.group_label.clone(),
        values,
        locations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::RawModelRating;
    use crate::panel::RaterKind;
    use crate::prompt::{CriterionVector, Persona, PromptModel, PromptTier};
    use approx::assert_abs_diff_eq;

    fn human(rater: &str, point: &str, score: i32) -> RatingRecord {
        RatingRecord {
            rater_id: rater.into(),
            point_id: point.into(),
            score,
            rater_kind: RaterKind::Human,
            prompt: None,
        }
    }

    fn model_rating(m: PromptModel, point: &str, aggregate: f64) -> RawModelRating {
        RawModelRating {
            point_id: point.into(),
            prompt: m,
            vector: CriterionVector(vec![4]),
            aggregate,
            attempt_count: 1,
            raw_text: String::new(),
        }
    }

    fn locations(ids: &[&str]) -> BTreeMap<String, (f64, f64)> {
        ids.iter()
            .enumerate()
            .map(|(i, id)| (id.to_string(), (i as f64 * 0.001, 0.0)))
            .collect()
    }

    #[test]
    fn center_raters_symmetric_example() {
        let recs = vec![human("r1", "a", 3), human("r1", "b", 4), human("r1", "c", 5)];
        let c = center_raters(&recs);
        let adj: Vec<f64> = c.iter().map(|x| x.adjusted).collect();
        assert_eq!(adj, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn center_raters_constant_rater_is_zero() {
        let recs: Vec<_> = (0..4).map(|i| human("r1", &format!("p{i}"), 4)).collect();
        assert!(center_raters(&recs).iter().all(|c| c.adjusted == 0.0));
    }

    #[test]
    fn center_raters_means_are_zero() {
        let recs = vec![
            human("r1", "a", 2),
            human("r1", "b", 7),
            human("r1", "c", 3),
            human("r2", "a", 5),
            human("r2", "b", 5),
            human("r2", "c", 6),
            human("r2", "d", 1),
        ];
        let c = center_raters(&recs);
        for rater in ["r1", "r2"] {
            let vals: Vec<f64> = c.iter().filter(|x| x.rater_id == rater).map(|x| x.adjusted).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            assert_abs_diff_eq!(mean, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn center_model_example() {
        let m = PromptModel::new(PromptTier::Model1, Persona::LR);
        let ratings = vec![
            model_rating(m, "a", 2.0),
            model_rating(m, "b", 4.0),
            model_rating(m, "c", 6.0),
        ];
        let c = center_model(&ratings);
        let adj: Vec<f64> = c.iter().map(|x| x.adjusted).collect();
        assert_eq!(adj, vec![-2.0, 0.0, 2.0]);
        assert!(c.iter().all(|x| x.rater_id == "model1_lr"));
    }

    #[test]
    fn center_model_groups_independently() {
        let m1 = PromptModel::new(PromptTier::Model1, Persona::LR);
        let m2 = PromptModel::new(PromptTier::Model2, Persona::LR);
        let ratings = vec![
            model_rating(m1, "a", 1.0),
            model_rating(m1, "b", 3.0),
            model_rating(m2, "a", 6.0),
            model_rating(m2, "b", 7.0),
        ];
        let c = center_model(&ratings);
        for label in ["model1_lr", "model2_lr"] {
            let vals: Vec<f64> = c.iter().filter(|x| x.rater_id == label).map(|x| x.adjusted).collect();
            assert_abs_diff_eq!(vals.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
        }
        // independent centering even though raw means differ (2.0 vs 6.5)
        assert_eq!(c[0].adjusted, -1.0);
        assert_eq!(c[2].adjusted, -0.5);
    }

    #[test]
    fn centering_is_translation_equivariant() {
        let base = vec![human("r1", "a", 2), human("r1", "b", 4), human("r1", "c", 3)];
        let shifted = vec![human("r1", "a", 4), human("r1", "b", 6), human("r1", "c", 5)];
        let ca = center_raters(&base);
        let cb = center_raters(&shifted);
        for (a, b) in ca.iter().zip(&cb) {
            assert_abs_diff_eq!(a.adjusted, b.adjusted, epsilon = 1e-12);
        }
    }

    #[test]
    fn per_group_mean_averages_members() {
        let centered = vec![
            CenteredRating { rater_id: "r1".into(), point_id: "a".into(), adjusted: -1.0 },
            CenteredRating { rater_id: "r2".into(), point_id: "a".into(), adjusted: 1.0 },
            CenteredRating { rater_id: "r1".into(), point_id: "b".into(), adjusted: 0.5 },
            CenteredRating { rater_id: "r9".into(), point_id: "a".into(), adjusted: 99.0 }, // not a member
        ];
        let members: HashSet<String> = ["r1".to_string(), "r2".to_string()].into();
        let locs = locations(&["a", "b", "c"]);
        let (surface, excluded) = per_group_mean(&centered, &members, "local_residents", &locs).unwrap();
        assert_abs_diff_eq!(surface.values["a"], 0.0);
        assert_abs_diff_eq!(surface.values["b"], 0.5);
        assert_eq!(excluded, vec!["c".to_string()]);
    }

    #[test]
    fn per_group_mean_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let ids: Vec<String> = (0..20).map(|i| format!("p{i:02}")).collect();
        let raters = ["r1", "r2", "r3"];
        let mut centered = Vec::new();
        for r in raters {
            for id in &ids {
                if rng.gen_bool(0.8) {
                    centered.push(CenteredRating {
                        rater_id: r.to_string(),
                        point_id: id.clone(),
                        adjusted: rng.gen_range(-3.0..3.0),
                    });
                }
            }
        }
        let members: HashSet<String> = raters.iter().map(|s| s.to_string()).collect();
        let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let locs = locations(&id_refs);
        let (surface, _) = per_group_mean(&centered, &members, "g", &locs).unwrap();
        for (id, &v) in &surface.values {
            let vals: Vec<f64> = centered
                .iter()
                .filter(|c| &c.point_id == id)
                .map(|c| c.adjusted)
                .collect();
            let brute = vals.iter().sum::<f64>() / vals.len() as f64;
            assert_abs_diff_eq!(v, brute, epsilon = 1e-12);
        }
    }

    #[test]
    fn difference_surface_semantics() {
        let locs = locations(&["a", "b"]);
        let model = ScoreSurface {
            group_label: "model2_lr".into(),
            values: [("a".to_string(), 0.5), ("b".to_string(), 0.5)].into(),
            locations: locs.clone(),
        };
        let part = ScoreSurface {
            group_label: "local_residents".into(),
            values: [("a".to_string(), 0.0), ("b".to_string(), 0.0)].into(),
            locations: locs,
        };
        let d = difference_surface(&model, &part).unwrap();
        assert!(d.values.values().all(|&v| v == 0.5));
        // identical surfaces give zero
        let z = difference_surface(&part, &part).unwrap();
        assert!(z.values.values().all(|&v| v == 0.0));
    }

    #[test]
    fn difference_surface_intersects_domains() {
        let model = ScoreSurface {
            group_label: "m".into(),
            values: [("a".to_string(), 1.0), ("b".to_string(), 2.0)].into(),
            locations: locations(&["a", "b"]),
        };
        let part = ScoreSurface {
            group_label: "p".into(),
            values: [("b".to_string(), 0.5), ("c".to_string(), 0.5)].into(),
            locations: locations(&["b", "c"]),
        };
        let d = difference_surface(&model, &part).unwrap();
        assert_eq!(d.values.len(), 1);
        assert_eq!(d.values["b"], 1.5);

        let far = ScoreSurface {
            group_label: "q".into(),
            values: [("z".to_string(), 1.0)].into(),
            locations: locations(&["z"]),
        };
        assert!(matches!(
            difference_surface(&model, &far),
            Err(AdjustError::EmptyIntersection { .. })
        ));
    }

    #[test]
    fn balanced_design_group_mean_is_zero() {
        // Fully crossed 3 raters x 4 images: grand mean of the group surface
        // is exactly the mean of fully centered ratings, i.e. 0.
        let scores = [[2, 4, 6, 4], [1, 7, 3, 5], [4, 4, 5, 3]];
        let mut recs = Vec::new();
        for (r, row) in scores.iter().enumerate() {
            for (i, &s) in row.iter().enumerate() {
                recs.push(human(&format!("r{r}"), &format!("p{i}"), s));
            }
        }
        let centered = center_raters(&recs);
        let members: HashSet<String> = (0..3).map(|r| format!("r{r}")).collect();
        let locs = locations(&["p0", "p1", "p2", "p3"]);
        let (surface, _) = per_group_mean(&centered, &members, "g", &locs).unwrap();
        let grand = surface.values.values().sum::<f64>() / surface.values.len() as f64;
        assert_abs_diff_eq!(grand, 0.0, epsilon = 1e-12);
    }
}
