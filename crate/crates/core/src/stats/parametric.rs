use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::{SampleGroup, StatsError, TestResult};

/// Relative size below which a sum of squares counts as zero.
const SS_EPS: f64 = 1e-12;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sums of squares of a subjects x conditions matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmSums {
    pub total: f64,
    pub subjects: f64,
    pub conditions: f64,
    pub error: f64,
}

pub fn rm_sums(rows: &[Vec<f64>]) -> RmSums {
    let n = rows.len();
    let k = rows[0].len();
    let grand = rows.iter().flatten().sum::<f64>() / (n * k) as f64;
    let row_means: Vec<f64> = rows.iter().map(|r| mean(r)).collect();
    let col_means: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut total = 0.0;
    let mut error = 0.0;
    for (r, rm) in rows.iter().zip(&row_means) {
        for (x, cm) in r.iter().zip(&col_means) {
            total += (x - grand).powi(2);
            error += (x - rm - cm + grand).powi(2);
        }
    }
    RmSums {
        total,
        subjects: k as f64 * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>(),
        conditions: n as f64 * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>(),
        error,
    }
}

/// One-way repeated-measures ANOVA with subjects as the blocking factor.
pub fn anova_rm(group: &SampleGroup, alpha: f64) -> Result<TestResult, StatsError> {
    let (n, k) = (group.n_users(), group.n_methods());
    if n < 2 || k < 2 {
        return Err(StatsError::Inapplicable(format!("ANOVA needs >= 2 users and >= 2 methods, got {n} x {k}")));
    }
    let ss = rm_sums(&group.values);
    let (df1, df2) = ((k - 1) as f64, ((k - 1) * (n - 1)) as f64);
    let scale = ss.total.max(f64::MIN_POSITIVE);
    if ss.conditions <= SS_EPS * scale {
        return Ok(TestResult::new("rm-anova", 0.0, 1.0, alpha).with_df(&[df1, df2]));
    }
    if ss.error <= SS_EPS * scale {
        return Err(StatsError::Inapplicable("ANOVA with zero residual variance".into()));
    }
    let f = (ss.conditions / df1) / (ss.error / df2);
    let dist = FisherSnedecor::new(df1, df2).map_err(|e| StatsError::InvalidInput(e.to_string()))?;
    Ok(TestResult::new("rm-anova", f, dist.sf(f), alpha).with_df(&[df1, df2]))
}

/// Two-sided paired t-test on `x - y`.
pub fn paired_t(x: &[f64], y: &[f64], alpha: f64) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::InvalidInput(format!("paired t needs equal lengths, got {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(StatsError::Inapplicable(format!("paired t needs >= 2 pairs, got {}", x.len())));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let var = d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    let scale = d.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if var * (n - 1.0) <= SS_EPS * scale {
        return Err(StatsError::Inapplicable("paired t with zero difference variance".into()));
    }
    let t = m / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| StatsError::InvalidInput(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TestResult::new("paired-t", t, p, alpha).with_df(&[n - 1.0]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_add_up() {
        let rows = vec![vec![1.0, 2.0, 4.0], vec![2.0, 2.5, 3.0], vec![0.5, 3.0, 3.5], vec![1.5, 1.0, 5.0]];
        let ss = rm_sums(&rows);
        assert!((ss.total - ss.subjects - ss.conditions - ss.error).abs() < 1e-12);
    }

    #[test]
    fn t_is_antisymmetric() {
        let x = [1.0, 2.0, 3.5, 4.0, 2.2];
        let y = [0.5, 2.5, 2.0, 3.0, 1.0];
        let a = paired_t(&x, &y, 0.05).unwrap();
        let b = paired_t(&y, &x, 0.05).unwrap();
        assert_eq!(a.statistic, -b.statistic);
        assert_eq!(a.p_value, b.p_value);
    }

    #[test]
    fn equal_samples_are_inapplicable() {
        let x = [1.0, 2.0, 3.0];
        assert!(matches!(paired_t(&x, &x, 0.05), Err(StatsError::Inapplicable(_))));
    }
}
