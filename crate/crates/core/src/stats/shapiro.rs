//! Shapiro-Wilk normality test following Royston's 1995 algorithm (AS R94).

use statrs::distribution::{ContinuousCDF, Normal};

use super::{mean, StatResult, StatsError};

/// Shapiro-Wilk test for departure from normality.
///
/// Supports sample sizes from 3 to 5000. Returns the W statistic and an
/// approximate two-sided p-value; small p indicates non-normal data.
pub fn shapiro_wilk(sample: &[f64]) -> Result<StatResult, StatsError> {
    let n = sample.len();
    if n < 3 {
        return Err(StatsError::TooFew { need: 3, got: n });
    }
    if n > 5000 {
        return Err(StatsError::TooMany { got: n, max: 5000 });
    }

    let mut x: Vec<f64> = sample.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample value"));
    if x[n - 1] - x[0] == 0.0 {
        return Err(StatsError::Constant("sample is constant"));
    }

    let normal = Normal::new(0.0, 1.0).unwrap();
    let nf = n as f64;

    // Expected values of standard normal order statistics (Blom approximation).
    let m: Vec<f64> = (1..=n)
        .map(|i| normal.inverse_cdf((i as f64 - 0.375) / (nf + 0.25)))
        .collect();
    let m_sq: f64 = m.iter().map(|v| v * v).sum();

    let mut a: Vec<f64> = m.iter().map(|v| v / m_sq.sqrt()).collect();
    if n > 3 {
        let u = 1.0 / nf.sqrt();
        let c_n = a[n - 1];
        let a_n = c_n
            + 0.221157 * u
            - 0.147981 * u.powi(2)
            - 2.071190 * u.powi(3)
            + 4.434685 * u.powi(4)
            - 2.706056 * u.powi(5);
        if n > 5 {
            let c_n1 = a[n - 2];
            let a_n1 = c_n1
                + 0.042981 * u
                - 0.293762 * u.powi(2)
                - 1.752461 * u.powi(3)
                + 5.682633 * u.powi(4)
                - 3.582633 * u.powi(5);
            let phi = (m_sq - 2.0 * m[n - 1].powi(2) - 2.0 * m[n - 2].powi(2))
                / (1.0 - 2.0 * a_n.powi(2) - 2.0 * a_n1.powi(2));
            let scale = phi.sqrt();
            for (ai, mi) in a.iter_mut().zip(&m).take(n - 2).skip(2) {
                *ai = mi / scale;
            }
            a[n - 1] = a_n;
            a[n - 2] = a_n1;
            a[0] = -a_n;
            a[1] = -a_n1;
        } else {
            let phi = (m_sq - 2.0 * m[n - 1].powi(2)) / (1.0 - 2.0 * a_n.powi(2));
            let scale = phi.sqrt();
            for (ai, mi) in a.iter_mut().zip(&m).take(n - 1).skip(1) {
                *ai = mi / scale;
            }
            a[n - 1] = a_n;
            a[0] = -a_n;
        }
    }

    let xbar = mean(&x);
    let num: f64 = a.iter().zip(&x).map(|(ai, xi)| ai * xi).sum();
    let den: f64 = x.iter().map(|xi| (xi - xbar).powi(2)).sum();
    let w = (num * num / den).clamp(0.0, 1.0);

    let p = if n == 3 {
        let pi = std::f64::consts::PI;
        ((6.0 / pi) * (w.sqrt().asin() - (0.75f64).sqrt().asin())).clamp(0.0, 1.0)
    } else if n <= 11 {
        let g = -2.273 + 0.459 * nf;
        let mu = 0.5440 - 0.39978 * nf + 0.025054 * nf * nf - 0.0006714 * nf.powi(3);
        let sigma = (1.3822 - 0.77857 * nf + 0.062767 * nf * nf - 0.0020322 * nf.powi(3)).exp();
        let arg = g - (1.0 - w).ln();
        if arg <= 0.0 {
            // W so close to 1 that the transform degenerates; no evidence
            // against normality at this sample size.
            1.0
        } else {
            let z = (-(arg.ln()) - mu) / sigma;
            1.0 - normal.cdf(z)
        }
    } else {
        let ln_n = nf.ln();
        let mu = -1.5861 - 0.31082 * ln_n - 0.083751 * ln_n * ln_n + 0.0038915 * ln_n.powi(3);
        let sigma = (-0.4803 - 0.082676 * ln_n + 0.0030302 * ln_n * ln_n).exp();
        let z = ((1.0 - w).ln() - mu) / sigma;
        1.0 - normal.cdf(z)
    };

    Ok(StatResult {
        statistic: w,
        p_value: p.clamp(0.0, 1.0),
        method: "shapiro_wilk".to_string(),
        n: vec![n],
    })
}
