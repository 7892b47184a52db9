//! Rank tests. Ranks are handled doubled (`2 * midrank`) so that ties stay
//! integral and the exact null distributions can be built by counting.

use std::collections::HashMap;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::{SampleGroup, StatsError, TestResult};

/// Largest sample for which Wilcoxon p-values are exact.
pub const WILCOXON_EXACT_MAX_N: usize = 25;
/// Friedman p-values are exact while the number of equally likely rank
/// configurations, (k!)^n, stays below this.
pub const FRIEDMAN_EXACT_MAX_CONFIGS: f64 = 1e6;

/// Doubled midranks of `v` (ranks start at 1, so values are 2, 4, ... when untied).
pub fn doubled_midranks(v: &[f64]) -> Vec<i64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0i64; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share (i + j + 2) / 2
        let r2 = (i + j + 2) as i64;
        for &k in &idx[i..=j] {
            out[k] = r2;
        }
        i = j + 1;
    }
    out
}

/// Sum over tie groups of `t^3 - t`.
fn tie_term(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        acc += t * t * t - t;
        i = j + 1;
    }
    acc
}

/// Distinct orderings of a multiset, lexicographic.
fn distinct_permutations(v: &[i64]) -> Vec<Vec<i64>> {
    let mut cur = v.to_vec();
    cur.sort_unstable();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (0..cur.len().saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            return out;
        };
        let j = (i + 1..cur.len()).rev().find(|&j| cur[j] > cur[i]).expect("successor exists");
        cur.swap(i, j);
        cur[i + 1..].reverse();
        out.push(cur.clone());
    }
}

/// Exact conditional upper tail `P(sum_j R_j^2 >= observed)` under
/// within-row exchangeability, by convolution over rows. Paths are counted
/// in integers so the result does not depend on iteration order.
fn friedman_exact_tail(rows: &[Vec<i64>], observed: i64) -> f64 {
    let k = rows[0].len();
    let mut dist: HashMap<Vec<i64>, u64> = HashMap::from([(vec![0; k], 1)]);
    let mut total: u64 = 1;
    for row in rows {
        let perms = distinct_permutations(row);
        total *= perms.len() as u64;
        let mut next: HashMap<Vec<i64>, u64> = HashMap::with_capacity(dist.len() * perms.len());
        for (sums, count) in &dist {
            for p in &perms {
                let s: Vec<i64> = sums.iter().zip(p).map(|(a, b)| a + b).collect();
                *next.entry(s).or_insert(0) += count;
            }
        }
        dist = next;
    }
    let tail: u64 = dist.iter().filter(|(s, _)| s.iter().map(|r| r * r).sum::<i64>() >= observed).map(|(_, c)| c).sum();
    (tail as f64 / total as f64).clamp(0.0, 1.0)
}

/// Friedman test with tie correction. Small designs get the exact
/// permutation p-value; larger ones the chi-square approximation on k - 1 df.
pub fn friedman(group: &SampleGroup, alpha: f64) -> Result<TestResult, StatsError> {
    let (n, k) = (group.n_users(), group.n_methods());
    if n < 2 || k < 2 {
        return Err(StatsError::Inapplicable(format!("Friedman needs >= 2 users and >= 2 methods, got {n} x {k}")));
    }
    let ranks: Vec<Vec<i64>> = group.values.iter().map(|r| doubled_midranks(r)).collect();
    let (nf, kf) = (n as f64, k as f64);
    let ties: f64 = group.values.iter().map(|r| tie_term(r)).sum();
    let denom = 1.0 - ties / (nf * kf * (kf * kf - 1.0));
    if denom <= 1e-12 {
        return Ok(TestResult::new("friedman", 0.0, 1.0, alpha).with_df(&[kf - 1.0]));
    }
    let col2: Vec<i64> = (0..k).map(|j| ranks.iter().map(|r| r[j]).sum()).collect();
    let sum_sq2: i64 = col2.iter().map(|r| r * r).sum();
    // doubled rank sums: R_j = col2_j / 2
    let q = (12.0 / (nf * kf * (kf + 1.0)) * (sum_sq2 as f64 / 4.0) - 3.0 * nf * (kf + 1.0)) / denom;
    let q = q.max(0.0);

    let configs = (1..=k).map(|i| i as f64).product::<f64>().powi(n as i32);
    if configs <= FRIEDMAN_EXACT_MAX_CONFIGS {
        let p = friedman_exact_tail(&ranks, sum_sq2);
        return Ok(TestResult::new("friedman-exact", q, p, alpha).with_df(&[kf - 1.0]));
    }
    let dist = ChiSquared::new(kf - 1.0).map_err(|e| StatsError::InvalidInput(e.to_string()))?;
    Ok(TestResult::new("friedman", q, dist.sf(q), alpha).with_df(&[kf - 1.0]))
}

/// Counts of each doubled rank-sum value over all 2^n sign patterns.
fn signed_rank_counts(ranks2: &[i64]) -> Vec<f64> {
    let max: i64 = ranks2.iter().sum();
    let mut counts = vec![0.0; max as usize + 1];
    counts[0] = 1.0;
    let mut hi = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=hi).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        hi += r;
    }
    counts
}

/// Two-sided Wilcoxon signed-rank test on `x - y`. Zero differences are
/// dropped; ties get midranks. Exact for n <= 25, normal approximation with
/// tie and continuity correction above. The statistic is min(W+, W-).
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64], alpha: f64) -> Result<TestResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::InvalidInput(format!("Wilcoxon needs equal lengths, got {} and {}", x.len(), y.len())));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(StatsError::Inapplicable("Wilcoxon with all differences zero".into()));
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidInput("non-finite difference".into()));
    }
    let n = d.len();
    if n < 5 {
        return Err(StatsError::Inapplicable(format!("Wilcoxon needs >= 5 non-zero differences, got {n}")));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let r2 = doubled_midranks(&abs);
    let total2: i64 = r2.iter().sum();
    let w_plus2: i64 = d.iter().zip(&r2).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let stat = w_plus2.min(total2 - w_plus2) as f64 / 2.0;

    if n <= WILCOXON_EXACT_MAX_N {
        let counts = signed_rank_counts(&r2);
        let le: f64 = counts[..=w_plus2 as usize].iter().sum();
        let ge: f64 = counts[w_plus2 as usize..].iter().sum();
        let p = (2.0 * le.min(ge) / 2f64.powi(n as i32)).min(1.0);
        return Ok(TestResult::new("wilcoxon-exact", stat, p, alpha));
    }
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&abs) / 48.0;
    let w = w_plus2 as f64 / 2.0;
    let dev = ((w - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let p = (2.0 * Normal::new(0.0, 1.0).expect("unit normal").sf(z)).min(1.0);
    Ok(TestResult::new("wilcoxon", stat, p, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midranks_with_ties() {
        assert_eq!(doubled_midranks(&[3.0, 1.0, 3.0, 2.0]), vec![7, 2, 7, 4]);
    }

    #[test]
    fn permutations_of_multiset() {
        assert_eq!(distinct_permutations(&[1, 2, 3]).len(), 6);
        assert_eq!(distinct_permutations(&[2, 2, 5]).len(), 3);
        assert_eq!(distinct_permutations(&[4, 4, 4]).len(), 1);
    }

    #[test]
    fn five_same_sign() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [0.0; 5];
        let r = wilcoxon_signed_rank(&x, &y, 0.05).unwrap();
        assert_eq!(r.p_value, 0.0625);
    }

    #[test]
    fn symmetric_differences_sit_at_center() {
        let x = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0];
        let r = wilcoxon_signed_rank(&x, &[0.0; 6], 0.05).unwrap();
        assert_eq!(r.p_value, 1.0);
    }
}
