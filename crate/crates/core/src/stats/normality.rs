//! Shapiro-Wilk W test after Royston's AS R94 (1995).
//!
//! Coefficients follow the published algorithm: the `a` weights come from
//! normal scores `m_i = Phi^-1((i - 3/8) / (n + 1/4))` with polynomial
//! corrections for the two outermost weights, and the p-value uses Royston's
//! normalizing transformation of `ln(1 - W)`. For n = 3 the exact
//! distribution is used. Normal quantiles and tails come from `statrs`.

use statrs::distribution::{ContinuousCDF, Normal};

use super::{StatsError, TestResult};

pub const MIN_N: usize = 3;
pub const MAX_N: usize = 5000;

/// Polynomial corrections for the two largest weights, in 1/sqrt(n).
const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
/// Mean and log-sd of the transformed statistic for 4 <= n <= 11, in n.
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
/// The same for n >= 12, in ln(n).
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
/// Upper bound `gamma(n)` for the small-sample transform.
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Weights for the upper half of the sorted sample, largest first.
fn weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let nd = n as f64;
    let norm = std_normal();
    // m_i for i = n, n-1, ... (positive scores)
    let m: Vec<f64> = (0..half).map(|i| -norm.inverse_cdf((i as f64 + 1.0 - 0.375) / (nd + 0.25))).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / nd.sqrt();
    let a1 = poly(&C1, rsn) + m[0] / ssumm2;

    let mut a = vec![0.0; half];
    a[0] = a1;
    let (first, fac) = if n > 5 {
        let a2 = m[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * m[0].powi(2) - 2.0 * m[1].powi(2)) / (1.0 - 2.0 * a1.powi(2) - 2.0 * a2.powi(2))).sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0].powi(2)) / (1.0 - 2.0 * a1.powi(2))).sqrt();
        (1, fac)
    };
    for i in first..half {
        a[i] = m[i] / fac;
    }
    a
}

/// W statistic and p-value. Fails for n outside [3, 5000], non-finite values
/// or zero range.
pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult, StatsError> {
    let n = x.len();
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(StatsError::Inapplicable(format!("needs {MIN_N}..={MAX_N} values, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidInput("non-finite value".into()));
    }
    let mut xs = x.to_vec();
    xs.sort_by(f64::total_cmp);
    let range = xs[n - 1] - xs[0];
    if !(range > 1e-19 * xs[n - 1].abs().max(1.0)) {
        return Err(StatsError::Inapplicable("Shapiro-Wilk on zero-variance sample".into()));
    }

    let a = weights(n);
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|v| (v - mean).powi(2)).sum();
    let b: f64 = a.iter().enumerate().map(|(i, ai)| ai * (xs[n - 1 - i] - xs[i])).sum();
    let w = (b * b / ss).min(1.0);

    let p = if n == 3 {
        let w = w.max(0.75);
        (1.0 - 6.0 / std::f64::consts::PI * w.sqrt().acos()).clamp(0.0, 1.0)
    } else {
        let nd = n as f64;
        let y = (1.0 - w).ln();
        let (z, m, s) = if n <= 11 {
            let gamma = poly(&G, nd);
            if y >= gamma {
                return Ok(TestResult::new("shapiro-wilk", w, 1e-19, super::NORMALITY_ALPHA));
            }
            (-(gamma - y).ln(), poly(&C3, nd), poly(&C4, nd).exp())
        } else {
            let ln = nd.ln();
            (y, poly(&C5, ln), poly(&C6, ln).exp())
        };
        std_normal().sf((z - m) / s)
    };
    Ok(TestResult::new("shapiro-wilk", w, p, super::NORMALITY_ALPHA))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_unit_norm() {
        for n in [4, 5, 6, 10, 11, 12, 20, 57, 200] {
            let a = weights(n);
            let norm2 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
            assert!((norm2 - 1.0).abs() < 1e-9, "n={n}: {norm2}");
            assert!(a.windows(2).all(|w| w[0] > w[1]), "n={n}");
        }
    }

    #[test]
    fn constant_data_is_inapplicable() {
        assert!(matches!(shapiro_wilk(&[2.0; 8]), Err(StatsError::Inapplicable(_))));
        assert!(matches!(shapiro_wilk(&[1.0, 2.0]), Err(StatsError::Inapplicable(_))));
    }

    #[test]
    fn three_points_use_exact_distribution() {
        // equally spaced points give W = 1
        let r = shapiro_wilk(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.statistic - 1.0).abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-9);
    }
}
