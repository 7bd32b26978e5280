//! Criteria-tiered prompt rendering, strict integer-response parsing, and
//! criterion-vector aggregation.
//!
//! The prompt texts are versioned template assets embedded verbatim; persona
//! substitution is the only difference between the LR and NR variants of a
//! tier. Parsing is lenient about whitespace and strict about everything
//! else: any surrounding prose fails the parse so a malformed response can be
//! re-queried rather than silently misread.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tier of the criteria set: overall appeal only, plus physical features,
/// plus urban design qualities and subjective reaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptTier {
    Model1,
    Model2,
    Model3,
}

impl PromptTier {
    pub const ALL: [PromptTier; 3] = [PromptTier::Model1, PromptTier::Model2, PromptTier::Model3];

    pub fn criteria_count(self) -> usize {
        match self {
            PromptTier::Model1 => 1,
            PromptTier::Model2 => 5,
            PromptTier::Model3 => 14,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            PromptTier::Model1 => "model1",
            PromptTier::Model2 => "model2",
            PromptTier::Model3 => "model3",
        }
    }
}

impl std::str::FromStr for PromptTier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "model1" => Ok(PromptTier::Model1),
            "model2" => Ok(PromptTier::Model2),
            "model3" => Ok(PromptTier::Model3),
            other => Err(format!("unknown prompt tier {other:?}")),
        }
    }
}

/// Rating persona: local resident (LR) or non-resident (NR).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Persona {
    LR,
    NR,
}

impl Persona {
    pub const ALL: [Persona; 2] = [Persona::LR, Persona::NR];

    pub fn key(self) -> &'static str {
        match self {
            Persona::LR => "lr",
            Persona::NR => "nr",
        }
    }
}

impl std::str::FromStr for Persona {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lr" => Ok(Persona::LR),
            "nr" => Ok(Persona::NR),
            other => Err(format!("unknown persona {other:?}")),
        }
    }
}

/// One of the six prompt variants (3 tiers × 2 personas).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PromptModel {
    pub tier: PromptTier,
    pub persona: Persona,
}

impl PromptModel {
    pub fn new(tier: PromptTier, persona: Persona) -> Self {
        Self { tier, persona }
    }

    /// All six prompt variants in (tier, persona) order.
    pub fn all() -> Vec<PromptModel> {
        let mut v = Vec::with_capacity(6);
        for tier in PromptTier::ALL {
            for persona in Persona::ALL {
                v.push(PromptModel { tier, persona });
            }
        }
        v
    }

    pub fn criteria_count(&self) -> usize {
        self.tier.criteria_count()
    }

    /// Stable label like "model3_nr", used as a surface/group key.
    pub fn label(&self) -> String {
        format!("{}_{}", self.tier.key(), self.persona.key())
    }
}

impl std::str::FromStr for PromptModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (tier, persona) = s
            .split_once('_')
            .ok_or_else(|| format!("prompt model label must be <tier>_<persona>, got {s:?}"))?;
        Ok(PromptModel { tier: tier.parse()?, persona: persona.parse()? })
    }
}

/// One integer score per criterion, each in [1, 7].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionVector(pub Vec<i32>);

impl CriterionVector {
    pub fn scores(&self) -> &[i32] {
        &self.0
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("response is not a bare integer or bracketed integer list: {raw:?}")]
    Parse { raw: String },
    #[error("expected {expected} scores, got {got}: {raw:?}")]
    CountMismatch { expected: usize, got: usize, raw: String },
    #[error("score {value} outside [1, 7]: {raw:?}")]
    Range { value: i64, raw: String },
}

/// The verbatim prompt text for a tier/persona pair.
pub fn render_prompt(m: &PromptModel) -> &'static str {
    match (m.tier, m.persona) {
        (PromptTier::Model1, Persona::LR) => include_str!("../assets/prompts/model1_lr.txt"),
        (PromptTier::Model1, Persona::NR) => include_str!("../assets/prompts/model1_nr.txt"),
        (PromptTier::Model2, Persona::LR) => include_str!("../assets/prompts/model2_lr.txt"),
        (PromptTier::Model2, Persona::NR) => include_str!("../assets/prompts/model2_nr.txt"),
        (PromptTier::Model3, Persona::LR) => include_str!("../assets/prompts/model3_lr.txt"),
        (PromptTier::Model3, Persona::NR) => include_str!("../assets/prompts/model3_nr.txt"),
    }
}

/// Parses a model response: a bare integer (when one score is expected) or a
/// bracketed comma-separated list like `[4, 5, 3, 6, 5]`. Surrounding
/// whitespace is ignored; any other extra text is rejected. Each error
/// carries the offending raw text for audit.
pub fn parse_response(text: &str, expected: usize) -> Result<CriterionVector, PromptError> {
    let raw = text.to_string();
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(PromptError::Parse { raw });
    }

    let tokens: Vec<&str> = if trimmed.starts_with('[') {
        let inner = trimmed
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| PromptError::Parse { raw: raw.clone() })?;
        inner.split(',').map(str::trim).collect()
    } else {
        if expected != 1 {
            // Multi-criterion tiers must answer in bracketed form.
            return Err(PromptError::Parse { raw });
        }
        vec![trimmed]
    };

    let mut values = Vec::with_capacity(tokens.len());
    for tok in &tokens {
        let v: i64 = tok
            .parse()
            .map_err(|_| PromptError::Parse { raw: raw.clone() })?;
        values.push(v);
    }
    if values.len() != expected {
        return Err(PromptError::CountMismatch { expected, got: values.len(), raw });
    }
    let mut scores = Vec::with_capacity(values.len());
    for v in values {
        if !(1..=7).contains(&v) {
            return Err(PromptError::Range { value: v, raw });
        }
        scores.push(v as i32);
    }
    Ok(CriterionVector(scores))
}

/// Serializes a criterion vector in the documented response format.
pub fn format_response(v: &CriterionVector) -> String {
    if v.0.len() == 1 {
        v.0[0].to_string()
    } else {
        let parts: Vec<String> = v.0.iter().map(|s| s.to_string()).collect();
        format!("[{}]", parts.join(", "))
    }
}

/// Unweighted arithmetic mean of the criterion scores.
pub fn aggregate(v: &CriterionVector) -> f64 {
    aggregate_weighted(v, None)
}

/// Weighted mean of the criterion scores. `weights = None` is uniform;
/// weighting the criteria is left configurable for future experiments.
pub fn aggregate_weighted(v: &CriterionVector, weights: Option<&[f64]>) -> f64 {
    match weights {
        None => v.0.iter().map(|&s| s as f64).sum::<f64>() / v.0.len() as f64,
        Some(w) => {
            assert_eq!(w.len(), v.0.len(), "weight vector length mismatch");
            let total: f64 = w.iter().sum();
            v.0.iter().zip(w).map(|(&s, &wi)| s as f64 * wi).sum::<f64>() / total
        }
    }
}
