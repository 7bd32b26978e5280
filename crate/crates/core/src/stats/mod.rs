//! Classical statistics: summary statistics, Pearson correlation, two-sample
//! t-tests, Wilcoxon tests (signed-rank and rank-sum), and Shapiro-Wilk
//! normality testing.

mod shapiro;
mod wilcoxon;

pub use shapiro::shapiro_wilk;
pub use wilcoxon::{wilcoxon, WilcoxonMode};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("sample size {got} above supported maximum {max}")]
    TooMany { got: usize, max: usize },
    #[error("constant input: {0}")]
    Constant(&'static str),
    #[error("inputs must have equal length for a paired test ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate pairing: all differences are zero")]
    DegeneratePairing,
    #[error("zero variance in both samples with unequal means")]
    ZeroVarianceUnequalMeans,
}

/// A test outcome: the statistic, its two-sided p-value, the method name,
/// and the sample size(s).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
    pub n: Vec<usize>,
}

/// Summary of one sample: mean, sample standard deviation (n−1 denominator),
/// and quantiles by linear interpolation between closest ranks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    /// None when n < 2.
    pub std: Option<f64>,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|&v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Quantile by linear interpolation between closest ranks on sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn summary_stats(x: &[f64]) -> Result<SummaryStats, StatsError> {
    if x.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in sample"));
    let std = if x.len() >= 2 { Some(sample_var(x).sqrt()) } else { None };
    Ok(SummaryStats {
        n: x.len(),
        mean: mean(x),
        std,
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        q50: quantile_sorted(&sorted, 0.50),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

fn two_sided_t_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid df");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Pearson product-moment correlation with a two-sided p-value from the
/// t transform t = r·sqrt((n−2)/(1−r²)).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<StatResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFew { need: 3, got: n });
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::Constant("x is constant"));
    }
    if syy == 0.0 {
        return Err(StatsError::Constant("y is constant"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if (1.0 - r * r) <= 0.0 {
        0.0
    } else {
        two_sided_t_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(StatResult { statistic: r, p_value: p, method: "pearson".into(), n: vec![n] })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    Pooled,
    Welch,
}

impl std::str::FromStr for TTestVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pooled" => Ok(TTestVariant::Pooled),
            "welch" => Ok(TTestVariant::Welch),
            other => Err(format!("unknown t-test variant {other:?}")),
        }
    }
}

/// Two-sample t-test, two-sided. Pooled Student's t by default elsewhere;
/// Welch uses the Welch–Satterthwaite degrees of freedom.
pub fn t_test_two_sample(x: &[f64], y: &[f64], variant: TTestVariant) -> Result<StatResult, StatsError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(StatsError::TooFew { need: 2, got: x.len().min(y.len()) });
    }
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (m1, m2) = (mean(x), mean(y));
    let (v1, v2) = (sample_var(x), sample_var(y));
    if v1 == 0.0 && v2 == 0.0 {
        if m1 == m2 {
            return Ok(StatResult {
                statistic: 0.0,
                p_value: 1.0,
                method: method_name(variant),
                n: vec![x.len(), y.len()],
            });
        }
        return Err(StatsError::ZeroVarianceUnequalMeans);
    }
    let (t, df) = match variant {
        TTestVariant::Pooled => {
            let sp2 = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
            let t = (m1 - m2) / (sp2 * (1.0 / n1 + 1.0 / n2)).sqrt();
            (t, n1 + n2 - 2.0)
        }
        TTestVariant::Welch => {
            let se2 = v1 / n1 + v2 / n2;
            let t = (m1 - m2) / se2.sqrt();
            let df = se2 * se2
                / ((v1 / n1).powi(2) / (n1 - 1.0) + (v2 / n2).powi(2) / (n2 - 1.0));
            (t, df)
        }
    };
    Ok(StatResult {
        statistic: t,
        p_value: two_sided_t_p(t, df),
        method: method_name(variant),
        n: vec![x.len(), y.len()],
    })
}

fn method_name(variant: TTestVariant) -> String {
    match variant {
        TTestVariant::Pooled => "t_test_pooled".into(),
        TTestVariant::Welch => "t_test_welch".into(),
    }
}

/// Mid-ranks of a slice (ties share the average of the ranks they cover).
pub(crate) fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0; // ranks are 1-based
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Σ(t³ − t) over tied groups, for variance corrections.
pub(crate) fn tie_term(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

pub(crate) fn std_normal_sf(z: f64) -> f64 {
    use statrs::distribution::Normal;
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    1.0 - n.cdf(z)
}
