//! Wilcoxon tests: paired signed-rank and rank-sum (Mann-Whitney U).
//!
//! Exact enumeration of the null distribution is used for small samples
//! without ties; larger or tied samples use the normal approximation with
//! tie and continuity corrections.

use super::{midranks, std_normal_sf, tie_term, StatResult, StatsError};

/// Sample size at or below which the exact null distribution is enumerated
/// (provided the data are tie-free).
const EXACT_LIMIT: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMode {
    /// Paired signed-rank test; inputs must have equal lengths.
    SignedRank,
    /// Mann-Whitney rank-sum test; any lengths.
    RankSum,
}

impl std::str::FromStr for WilcoxonMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signed_rank" => Ok(WilcoxonMode::SignedRank),
            "rank_sum" => Ok(WilcoxonMode::RankSum),
            other => Err(format!("unknown wilcoxon mode {other:?}")),
        }
    }
}

pub fn wilcoxon(x: &[f64], y: &[f64], mode: WilcoxonMode) -> Result<StatResult, StatsError> {
    match mode {
        WilcoxonMode::SignedRank => signed_rank(x, y),
        WilcoxonMode::RankSum => rank_sum(x, y),
    }
}

/// Paired signed-rank: zero differences are dropped, tied absolute
/// differences take mid-ranks, and the statistic is W+ (the sum of ranks of
/// positive differences).
fn signed_rank(x: &[f64], y: &[f64]) -> Result<StatResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(StatsError::DegeneratePairing);
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();

    let ties = tie_term(&abs);
    let p = if n <= EXACT_LIMIT && ties == 0.0 {
        exact_signed_rank_p(n, w_plus)
    } else {
        let mn = n as f64 * (n as f64 + 1.0) / 4.0;
        let var = n as f64 * (n as f64 + 1.0) * (2.0 * n as f64 + 1.0) / 24.0 - ties / 48.0;
        let mut d = w_plus - mn;
        if d != 0.0 {
            // continuity correction toward the mean
            d -= 0.5 * d.signum();
        }
        let z = d / var.sqrt();
        (2.0 * std_normal_sf(z.abs())).clamp(0.0, 1.0)
    };
    Ok(StatResult {
        statistic: w_plus,
        p_value: p,
        method: "wilcoxon_signed_rank".into(),
        n: vec![n],
    })
}

/// Two-sided exact p over all 2^n equally likely sign assignments, computed
/// from the rank-sum count distribution.
fn exact_signed_rank_p(n: usize, w_plus: f64) -> f64 {
    let max_w = n * (n + 1) / 2;
    // counts[w] = number of subsets of {1..n} with rank sum w
    let mut counts = vec![0f64; max_w + 1];
    counts[0] = 1.0;
    for rank in 1..=n {
        for w in (rank..=max_w).rev() {
            counts[w] += counts[w - rank];
        }
    }
    let total = 2f64.powi(n as i32);
    let w = w_plus.round() as usize; // tie-free ranks are integers
    let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
    let upper: f64 = counts[w..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).clamp(0.0, 1.0)
}

/// Mann-Whitney rank-sum: U statistic for the first sample from pooled
/// mid-ranks.
fn rank_sum(x: &[f64], y: &[f64]) -> Result<StatResult, StatsError> {
    let (n1, n2) = (x.len(), y.len());
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::TooFew { need: 1, got: 0 });
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u1 = r1 - n1 as f64 * (n1 as f64 + 1.0) / 2.0;

    let ties = tie_term(&pooled);
    let p = if n1 + n2 <= EXACT_LIMIT && ties == 0.0 {
        exact_rank_sum_p(n1, n2, u1)
    } else {
        let n = (n1 + n2) as f64;
        let mu = n1 as f64 * n2 as f64 / 2.0;
        let var = n1 as f64 * n2 as f64 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
        // continuity correction on the larger of U1/U2; clamping handles the
        // |U - mu| < 0.5 case, where the corrected z goes negative
        let z = ((u1 - mu).abs() - 0.5) / var.sqrt();
        (2.0 * std_normal_sf(z)).clamp(0.0, 1.0)
    };
    Ok(StatResult {
        statistic: u1,
        p_value: p,
        method: "wilcoxon_rank_sum".into(),
        n: vec![n1, n2],
    })
}

/// Two-sided exact p over all C(n1+n2, n1) equally likely rank splits.
fn exact_rank_sum_p(n1: usize, n2: usize, u1: f64) -> f64 {
    let max_u = n1 * n2;
    // Classic recurrence: f(n1, n2, u) = f(n1-1, n2, u-n2) + f(n1, n2-1, u)
    // computed bottom-up over a (n1+1) x (n2+1) table of distributions.
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n2 + 1]; n1 + 1];
    for (a, row) in table.iter_mut().enumerate() {
        for (b, dist) in row.iter_mut().enumerate() {
            let cap = a * b;
            let mut d = vec![0f64; cap + 1];
            if a == 0 || b == 0 {
                d[0] = 1.0;
            }
            *dist = d;
        }
    }
    for a in 1..=n1 {
        for b in 1..=n2 {
            let cap = a * b;
            let mut d = vec![0f64; cap + 1];
            for (u, slot) in d.iter_mut().enumerate() {
                let from_a = if u >= b { table[a - 1][b].get(u - b).copied().unwrap_or(0.0) } else { 0.0 };
                let from_b = table[a][b - 1].get(u).copied().unwrap_or(0.0);
                *slot = from_a + from_b;
            }
            table[a][b] = d;
        }
    }
    let dist = &table[n1][n2];
    let total: f64 = dist.iter().sum();
    let u = u1.round() as usize;
    let lower: f64 = dist[..=u.min(max_u)].iter().sum::<f64>() / total;
    let upper: f64 = dist[u.min(max_u)..].iter().sum::<f64>() / total;
    (2.0 * lower.min(upper)).clamp(0.0, 1.0)
}
