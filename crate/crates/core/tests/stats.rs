use cdgain::experiment::Method;
use cdgain::stats::{
    anova_rm, friedman, paired_t, preference_analysis, rm_sums, run_pipeline, shapiro_wilk, wilcoxon_signed_rank, Branch,
    Grouping, Measure, PreferenceRanks, SampleGroup, StatsError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Deserialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn group(values: Vec<Vec<f64>>) -> SampleGroup {
    let k = values[0].len();
    let methods = Method::REPORT_ORDER[..k].to_vec();
    let users = (0..values.len() as u32).collect();
    SampleGroup::new(Grouping::Overall, Measure::MovementTime, methods, users, values).unwrap()
}

// ---------- Shapiro-Wilk against committed reference outputs ----------

#[derive(Deserialize)]
struct SwCase {
    name: String,
    x: Vec<f64>,
    w: f64,
    p: f64,
}

#[derive(Deserialize)]
struct SwFixture {
    cases: Vec<SwCase>,
}

#[test]
fn shapiro_wilk_matches_reference() {
    let fx: SwFixture = serde_json::from_str(include_str!("fixtures/shapiro_wilk.json")).unwrap();
    for c in &fx.cases {
        let r = shapiro_wilk(&c.x).unwrap();
        assert!((r.statistic - c.w).abs() < 1e-3, "{}: W {} vs {}", c.name, r.statistic, c.w);
        assert!((r.p_value - c.p).abs() < 1e-3, "{}: p {} vs {}", c.name, r.p_value, c.p);
    }
    let bimodal = fx.cases.iter().find(|c| c.name == "bimodal_n20").unwrap();
    assert!(shapiro_wilk(&bimodal.x).unwrap().p_value < 0.05);
}

// ---------- Wilcoxon against sign-pattern enumeration ----------

/// Midranks of |d| with ties averaged, computed by pairwise comparison.
fn oracle_abs_ranks(d: &[f64]) -> Vec<f64> {
    d.iter()
        .map(|a| {
            let less = d.iter().filter(|b| b.abs() < a.abs()).count() as f64;
            let equal = d.iter().filter(|b| b.abs() == a.abs()).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_wilcoxon_p(d: &[f64]) -> f64 {
    let d: Vec<f64> = d.iter().copied().filter(|v| *v != 0.0).collect();
    let ranks = oracle_abs_ranks(&d);
    let observed: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let (mut le, mut ge) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed {
            le += 1;
        }
        if w >= observed {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / 2f64.powi(n as i32)).min(1.0)
}

fn wilcoxon_fixtures() -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut out = vec![
        vec![1.0, 2.0, 3.0, 4.0, 5.0],
        vec![0.5, -1.5, 2.0, 2.0, -2.0, 3.25, 0.0, 4.0],
        vec![1.0, 1.0, 1.0, -1.0, 2.0, 2.0, -3.0],
        vec![0.1, -0.2, 0.3, -0.4, 0.5, -0.6, 0.7, -0.8, 0.9, -1.0, 1.1, 1.2],
    ];
    for n in 5..=12 {
        // rounded values so that ties occur
        out.push((0..n).map(|_| ((rng.sample::<f64, _>(StandardNormal) + 0.4) * 4.0).round() / 4.0).collect());
    }
    out
}

#[test]
fn wilcoxon_exact_equals_enumeration() {
    for d in wilcoxon_fixtures() {
        let zeros = vec![0.0; d.len()];
        match wilcoxon_signed_rank(&d, &zeros, 0.05) {
            Ok(r) => assert_eq!(r.p_value, oracle_wilcoxon_p(&d), "{d:?}"),
            Err(StatsError::Inapplicable(_)) => assert!(d.iter().filter(|v| **v != 0.0).count() < 5),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn wilcoxon_five_positive_differences() {
    let x = [3.0, 4.5, 2.0, 8.0, 5.5];
    let y = [1.0, 1.5, 1.0, 2.0, 0.5];
    assert_eq!(wilcoxon_signed_rank(&x, &y, 0.05).unwrap().p_value, 0.0625);
}

/// Exact null distribution for untied ranks 1..=n by counting subsets.
fn exact_untied_p(n: usize, w_plus: f64) -> f64 {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    for r in 1..=n {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(n as i32);
    let le: f64 = counts.iter().enumerate().filter(|(s, _)| *s as f64 <= w_plus).map(|(_, c)| c).sum();
    let ge: f64 = counts.iter().enumerate().filter(|(s, _)| *s as f64 >= w_plus).map(|(_, c)| c).sum();
    (2.0 * le.min(ge) / total).min(1.0)
}

#[test]
fn wilcoxon_normal_approximation_tracks_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for shift in [0.0, 0.3, 0.6] {
        let d: Vec<f64> = (0..30).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect();
        let ranks = oracle_abs_ranks(&d);
        let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
        let approx = wilcoxon_signed_rank(&d, &vec![0.0; 30], 0.05).unwrap();
        assert_eq!(approx.test_name, "wilcoxon");
        let exact = exact_untied_p(30, w_plus);
        assert!((approx.p_value - exact).abs() < 0.005, "shift {shift}: {} vs {exact}", approx.p_value);
    }
}

// ---------- Friedman against full enumeration ----------

const PERMS3: [[f64; 3]; 6] = [[1., 2., 3.], [1., 3., 2.], [2., 1., 3.], [2., 3., 1.], [3., 1., 2.], [3., 2., 1.]];

fn friedman_q(rows: &[[f64; 3]]) -> f64 {
    let n = rows.len() as f64;
    let r: Vec<f64> = (0..3).map(|j| rows.iter().map(|row| row[j]).sum()).collect();
    12.0 / (n * 3.0 * 4.0) * r.iter().map(|v| v * v).sum::<f64>() - 3.0 * n * 4.0
}

#[test]
fn friedman_small_design_matches_enumeration() {
    let fixtures: [[[f64; 3]; 3]; 4] = [
        [[1.2, 3.4, 2.2], [0.9, 2.8, 1.5], [1.1, 3.9, 2.0]],
        [[1.0, 2.0, 3.0], [3.0, 2.0, 1.0], [2.0, 1.0, 3.0]],
        [[5.0, 4.0, 3.0], [4.0, 5.0, 3.0], [5.0, 3.0, 4.0]],
        [[0.3, 0.1, 0.2], [0.35, 0.12, 0.25], [0.2, 0.3, 0.1]],
    ];
    for data in fixtures {
        let observed_ranks: Vec<[f64; 3]> = data
            .iter()
            .map(|r| {
                let mut out = [0.0; 3];
                for j in 0..3 {
                    out[j] = 1.0 + r.iter().filter(|v| **v < r[j]).count() as f64;
                }
                out
            })
            .collect();
        let q_obs = friedman_q(&observed_ranks);
        let mut hits = 0;
        for a in PERMS3 {
            for b in PERMS3 {
                for c in PERMS3 {
                    if friedman_q(&[a, b, c]) >= q_obs - 1e-9 {
                        hits += 1;
                    }
                }
            }
        }
        let exact = hits as f64 / 216.0;
        let r = friedman(&group(data.iter().map(|r| r.to_vec()).collect()), 0.05).unwrap();
        assert!((r.statistic - q_obs).abs() < 1e-12);
        assert!((r.p_value - exact).abs() < 0.01, "{} vs {exact}", r.p_value);
    }
}

#[test]
fn friedman_identical_columns() {
    let g = group(vec![vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0], vec![0.5, 0.5, 0.5]]);
    let r = friedman(&g, 0.05).unwrap();
    assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
}

// ---------- ANOVA and paired t ----------

#[test]
fn anova_matches_hand_sums_of_squares() {
    // hand decomposition: SS_total = 524/15, SS_subjects = 124/15,
    // SS_methods = 338/15, SS_error = 62/15, F = (338/30) / (62/120) = 676/31
    let rows = vec![vec![1., 2., 3.], vec![2., 4., 6.], vec![3., 3., 6.], vec![2., 3., 5.], vec![1., 4., 4.]];
    let ss = rm_sums(&rows);
    assert!((ss.total - 524.0 / 15.0).abs() < 1e-12);
    assert!((ss.subjects - 124.0 / 15.0).abs() < 1e-12);
    assert!((ss.conditions - 338.0 / 15.0).abs() < 1e-12);
    assert!((ss.error - 62.0 / 15.0).abs() < 1e-12);
    let r = anova_rm(&group(rows), 0.05).unwrap();
    assert!((r.statistic - 676.0 / 31.0).abs() < 1e-9);
    assert_eq!(r.df, vec![2.0, 8.0]);
    assert!((r.p_value - 0.000577200625).abs() < 1e-8);
}

#[test]
fn anova_identical_columns_is_null() {
    let g = group(vec![vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0], vec![0.5, 0.5, 0.5]]);
    let r = anova_rm(&g, 0.05).unwrap();
    assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
}

#[test]
fn anova_two_methods_is_t_squared() {
    let x = [1.1, 2.3, 1.9, 3.2, 2.7, 2.2];
    let y = [0.8, 2.4, 1.1, 2.5, 2.0, 2.1];
    let t = paired_t(&x, &y, 0.05).unwrap();
    let f = anova_rm(&group(x.iter().zip(&y).map(|(a, b)| vec![*a, *b]).collect()), 0.05).unwrap();
    assert!((f.statistic - t.statistic * t.statistic).abs() < 1e-9);
    assert!((f.p_value - t.p_value).abs() < 1e-9);
}

#[test]
fn paired_t_matches_formula() {
    let x = [5.1, 4.8, 6.0, 5.5, 4.9, 5.8, 6.1];
    let y = [4.6, 4.9, 5.1, 5.0, 4.2, 5.5, 5.2];
    let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = mean / (sd / n.sqrt());
    let p = 2.0 * StudentsT::new(0.0, 1.0, n - 1.0).unwrap().sf(t.abs());
    let r = paired_t(&x, &y, 0.05).unwrap();
    assert!((r.statistic - t).abs() < 1e-12);
    assert!((r.p_value - p).abs() < 1e-12);
}

// ---------- pipeline gating ----------

fn normal_data(effects: [f64; 3], seed: u64) -> SampleGroup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).unwrap();
    group(
        (0..20)
            .map(|_| {
                let user = 0.5 * rng.sample::<f64, _>(StandardNormal);
                effects.iter().map(|e| 2.0 + user + e + noise.sample(&mut rng)).collect()
            })
            .collect(),
    )
}

#[test]
fn normal_data_takes_anova_branch() {
    let a = run_pipeline(&normal_data([0.0, 0.5, 1.0], 3), 0.05).unwrap();
    assert_eq!(a.branch, Branch::Parametric);
    assert_eq!(a.omnibus.result.as_ref().unwrap().test_name, "rm-anova");
    assert_eq!(a.post_hoc.len(), 3);
    assert!(a.post_hoc.iter().all(|p| p.outcome.result.as_ref().unwrap().test_name == "paired-t"));
    assert!((a.post_hoc_alpha - 0.05 / 3.0).abs() < 1e-15);
}

#[test]
fn heavy_tails_take_friedman_branch() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows = (0..20)
        .map(|i| {
            // one wild user per column family makes every column non-normal
            let spike = if i < 2 { 60.0 } else { 0.0 };
            (0..3).map(|j| 1.0 + j as f64 * 0.4 + spike + rng.random::<f64>() * 0.1).collect()
        })
        .collect();
    let a = run_pipeline(&group(rows), 0.05).unwrap();
    assert_eq!(a.branch, Branch::NonParametric);
    assert!(a.omnibus.result.as_ref().unwrap().test_name.starts_with("friedman"));
    assert!(a.omnibus.passed());
    assert!(a.post_hoc.iter().all(|p| p.outcome.result.as_ref().unwrap().test_name.starts_with("wilcoxon")));
}

#[test]
fn no_effect_means_no_post_hoc() {
    let a = run_pipeline(&normal_data([0.0, 0.0, 0.0], 8), 0.05).unwrap();
    assert!(!a.omnibus.passed());
    assert!(a.post_hoc.is_empty());
}

// ---------- preferences ----------

#[test]
fn unanimous_preferences() {
    let methods = vec![Method::PT, Method::ZM, Method::ST];
    let p = PreferenceRanks { criterion: "speed".into(), methods, ranks: vec![vec![1, 2, 3]; 20] };
    let s = preference_analysis(&p, 0.05).unwrap();
    let means: Vec<f64> = s.descriptives.iter().map(|d| d.mean).collect();
    assert_eq!(means, vec![1.0, 2.0, 3.0]);
    assert!(s.omnibus.passed());
}

#[test]
fn random_preferences_rarely_pass() {
    let mut quiet = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ranks = (0..20)
            .map(|_| {
                let mut r = vec![1u8, 2, 3];
                rand::seq::SliceRandom::shuffle(r.as_mut_slice(), &mut rng);
                r
            })
            .collect();
        let p = PreferenceRanks { criterion: "comfort".into(), methods: Method::ALL.to_vec(), ranks };
        if preference_analysis(&p, 0.05).unwrap().omnibus.result.unwrap().p_value > 0.05 {
            quiet += 1;
        }
    }
    assert!(quiet >= 90, "{quiet}");
}
