//! Per-user aggregation and the method-comparison pipeline: normality gate,
//! omnibus test, then Bonferroni-corrected pairwise tests.

mod nonparametric;
mod normality;
mod parametric;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use nonparametric::{doubled_midranks, friedman, wilcoxon_signed_rank, FRIEDMAN_EXACT_MAX_CONFIGS, WILCOXON_EXACT_MAX_N};
pub use normality::shapiro_wilk;
pub use parametric::{anova_rm, paired_t, rm_sums, RmSums};

use crate::experiment::{accuracy, Method, TrialRecord, MAIN_BLOCKS};

pub const DEFAULT_ALPHA: f64 = 0.05;
/// Significance level of the per-method normality checks.
pub const NORMALITY_ALPHA: f64 = 0.05;

/// Post-hoc comparisons, in report order.
pub const PAIRS: [(Method, Method); 3] = [(Method::ZM, Method::ST), (Method::ZM, Method::PT), (Method::PT, Method::ST)];

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("test not applicable: {0}")]
    Inapplicable(String),
    #[error("no records for user {user}, method {method} in {grouping}")]
    MissingData { grouping: Grouping, user: u32, method: Method },
    #[error("invalid preference ranks: {0}")]
    InvalidRanks(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub df: Vec<f64>,
    pub alpha_used: f64,
    /// `p_value < alpha_used`.
    pub passed: bool,
}

impl TestResult {
    pub fn new(name: &str, statistic: f64, p_value: f64, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        Self { test_name: name.into(), statistic, p_value, df: Vec::new(), alpha_used: alpha, passed: p_value < alpha }
    }

    pub fn with_df(mut self, df: &[f64]) -> Self {
        self.df = df.to_vec();
        self
    }
}

pub fn bonferroni(alpha: f64, m: u32) -> f64 {
    alpha / f64::from(m.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "k", rename_all = "snake_case")]
pub enum Grouping {
    Overall,
    Block(u8),
    IdCat(u8),
}

impl Grouping {
    /// Overall, blocks 1-4, then ID categories 2-5.
    pub fn standard() -> Vec<Grouping> {
        let mut g = vec![Grouping::Overall];
        g.extend((1..=MAIN_BLOCKS as u8).map(Grouping::Block));
        g.extend((2..=5).map(Grouping::IdCat));
        g
    }

    pub fn includes(&self, r: &TrialRecord) -> bool {
        match *self {
            Grouping::Overall => true,
            Grouping::Block(b) => r.block == b,
            Grouping::IdCat(c) => r.id_category == c,
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grouping::Overall => f.write_str("overall"),
            Grouping::Block(b) => write!(f, "block {b}"),
            Grouping::IdCat(c) => write!(f, "ID category {c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    MovementTime,
    Accuracy,
}

impl Measure {
    pub const ALL: [Measure; 2] = [Measure::MovementTime, Measure::Accuracy];
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::MovementTime => "movement time (s)",
            Measure::Accuracy => "accuracy",
        })
    }
}

/// Per-user cell values: rows are users, columns are `methods`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGroup {
    pub grouping: Grouping,
    pub measure: Measure,
    pub methods: Vec<Method>,
    pub users: Vec<u32>,
    pub values: Vec<Vec<f64>>,
}

impl SampleGroup {
    /// Builds a group from raw rows, checking the shape.
    pub fn new(grouping: Grouping, measure: Measure, methods: Vec<Method>, users: Vec<u32>, values: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        if values.len() != users.len() || values.iter().any(|r| r.len() != methods.len()) {
            return Err(StatsError::InvalidInput("sample matrix shape does not match users x methods".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(StatsError::InvalidInput("non-finite cell".into()));
        }
        Ok(Self { grouping, measure, methods, users, values })
    }

    pub fn n_users(&self) -> usize {
        self.values.len()
    }

    pub fn n_methods(&self) -> usize {
        self.methods.len()
    }

    pub fn column(&self, method: Method) -> Option<Vec<f64>> {
        let j = self.methods.iter().position(|m| *m == method)?;
        Some(self.values.iter().map(|r| r[j]).collect())
    }
}

/// Averages records per (user, method) within `grouping`: mean MT, or
/// accuracy over the pooled hits and misses. Columns are the methods that
/// occur anywhere in `records`, in report order (ZM, ST, PT); users ascending.
pub fn aggregate_per_user(records: &[TrialRecord], grouping: Grouping, measure: Measure) -> Result<SampleGroup, StatsError> {
    let users: BTreeSet<u32> = records.iter().map(|r| r.subject).collect();
    if users.is_empty() {
        return Err(StatsError::InvalidInput("no records".into()));
    }
    #[derive(Default)]
    struct Cell {
        n: u64,
        mt: f64,
        hits: u64,
        misses: u64,
    }
    let mut cells: BTreeMap<(u32, Method), Cell> = BTreeMap::new();
    for r in records.iter().filter(|r| grouping.includes(r)) {
        let c = cells.entry((r.subject, r.method)).or_default();
        c.n += 1;
        c.mt += r.movement_time;
        c.hits += u64::from(r.hit);
        c.misses += u64::from(r.misses);
    }
    let present: BTreeSet<Method> = records.iter().map(|r| r.method).collect();
    let methods: Vec<Method> = Method::REPORT_ORDER.into_iter().filter(|m| present.contains(m)).collect();
    let mut values = Vec::with_capacity(users.len());
    for &user in &users {
        let mut row = Vec::with_capacity(methods.len());
        for &method in &methods {
            let c = cells.get(&(user, method)).filter(|c| c.n > 0).ok_or(StatsError::MissingData { grouping, user, method })?;
            row.push(match measure {
                Measure::MovementTime => c.mt / c.n as f64,
                Measure::Accuracy => accuracy(c.hits, c.misses).map_err(|e| StatsError::InvalidInput(e.to_string()))?,
            });
        }
        values.push(row);
    }
    SampleGroup::new(grouping, measure, methods, users.into_iter().collect(), values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub method: Method,
    pub mean: f64,
    /// Sample standard deviation (n - 1).
    pub sd: f64,
}

/// A test that may not have been computable, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<TestResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Outcome {
    fn from(r: Result<TestResult, StatsError>) -> Result<Self, StatsError> {
        match r {
            Ok(t) => Ok(Self { result: Some(t), note: None }),
            Err(StatsError::Inapplicable(m)) => Ok(Self { result: None, note: Some(m) }),
            Err(e) => Err(e),
        }
    }

    pub fn passed(&self) -> bool {
        self.result.as_ref().is_some_and(|r| r.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityEntry {
    pub method: Method,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseEntry {
    pub a: Method,
    pub b: Method,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Parametric,
    NonParametric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAnalysis {
    pub grouping: Grouping,
    pub measure: Measure,
    pub n_users: usize,
    pub descriptives: Vec<Descriptive>,
    pub normality: Vec<NormalityEntry>,
    pub branch: Branch,
    pub omnibus: Outcome,
    /// Empty unless the omnibus test passed.
    pub post_hoc: Vec<PairwiseEntry>,
    pub post_hoc_alpha: f64,
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 { (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (m, sd)
}

fn descriptives(group: &SampleGroup) -> Vec<Descriptive> {
    group
        .methods
        .iter()
        .map(|&m| {
            let (mean, sd) = mean_sd(&group.column(m).unwrap_or_default());
            Descriptive { method: m, mean, sd }
        })
        .collect()
}

fn pairwise(group: &SampleGroup, branch: Branch, alpha_b: f64) -> Result<Vec<PairwiseEntry>, StatsError> {
    PAIRS
        .iter()
        .filter_map(|&(a, b)| Some((a, b, group.column(a)?, group.column(b)?)))
        .map(|(a, b, x, y)| {
            let r = match branch {
                Branch::Parametric => paired_t(&x, &y, alpha_b),
                Branch::NonParametric => wilcoxon_signed_rank(&x, &y, alpha_b),
            };
            Ok(PairwiseEntry { a, b, outcome: Outcome::from(r)? })
        })
        .collect()
}

/// Normality gate, omnibus test and gated post-hoc comparisons for one group.
/// The parametric branch is taken only when every method's sample passes
/// Shapiro-Wilk (a zero-variance sample counts as non-normal).
pub fn run_pipeline(group: &SampleGroup, alpha: f64) -> Result<GroupAnalysis, StatsError> {
    let normality = group
        .methods
        .iter()
        .map(|&m| {
            let col = group.column(m).unwrap_or_default();
            Ok(NormalityEntry { method: m, outcome: Outcome::from(shapiro_wilk(&col))? })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    let all_normal = normality.iter().all(|e| e.outcome.result.as_ref().is_some_and(|r| !r.passed));
    let branch = if all_normal { Branch::Parametric } else { Branch::NonParametric };
    let omnibus = Outcome::from(match branch {
        Branch::Parametric => anova_rm(group, alpha),
        Branch::NonParametric => friedman(group, alpha),
    })?;
    let post_hoc_alpha = bonferroni(alpha, PAIRS.len() as u32);
    let post_hoc = if omnibus.passed() { pairwise(group, branch, post_hoc_alpha)? } else { Vec::new() };
    Ok(GroupAnalysis {
        grouping: group.grouping,
        measure: group.measure,
        n_users: group.n_users(),
        descriptives: descriptives(group),
        normality,
        branch,
        omnibus,
        post_hoc,
        post_hoc_alpha,
    })
}

/// Preference ranks per user, 1 = best; each row must be a permutation of 1..=k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRanks {
    pub criterion: String,
    pub methods: Vec<Method>,
    pub ranks: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSection {
    pub criterion: String,
    pub n_users: usize,
    pub descriptives: Vec<Descriptive>,
    pub omnibus: Outcome,
    pub post_hoc: Vec<PairwiseEntry>,
    pub post_hoc_alpha: f64,
}

pub fn preference_analysis(input: &PreferenceRanks, alpha: f64) -> Result<PreferenceSection, StatsError> {
    let k = input.methods.len();
    if k < 2 || input.methods.iter().collect::<BTreeSet<_>>().len() != k {
        return Err(StatsError::InvalidRanks("methods must be distinct, at least two".into()));
    }
    for (i, row) in input.ranks.iter().enumerate() {
        let mut sorted = row.clone();
        sorted.sort_unstable();
        if sorted != (1..=k as u8).collect::<Vec<_>>() {
            return Err(StatsError::InvalidRanks(format!("row {i} {row:?} is not a permutation of 1..={k}")));
        }
    }
    let values = input.ranks.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
    let users = (0..input.ranks.len() as u32).collect();
    let group = SampleGroup::new(Grouping::Overall, Measure::MovementTime, input.methods.clone(), users, values)?;
    let omnibus = Outcome::from(friedman(&group, alpha))?;
    let post_hoc_alpha = bonferroni(alpha, PAIRS.len() as u32);
    let post_hoc = if omnibus.passed() { pairwise(&group, Branch::NonParametric, post_hoc_alpha)? } else { Vec::new() };
    Ok(PreferenceSection {
        criterion: input.criterion.clone(),
        n_users: group.n_users(),
        descriptives: descriptives(&group),
        omnibus,
        post_hoc,
        post_hoc_alpha,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub alpha: f64,
    pub n_users: usize,
    pub n_records: usize,
    pub groups: Vec<GroupAnalysis>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preferences: Vec<PreferenceSection>,
}

/// Runs the pipeline for both measures over every standard grouping that
/// has at least one trial.
pub fn analyze_records(records: &[TrialRecord], alpha: f64) -> Result<AnalysisReport, StatsError> {
    let mut groups = Vec::new();
    for measure in Measure::ALL {
        for grouping in Grouping::standard() {
            if !records.iter().any(|r| grouping.includes(r)) {
                continue;
            }
            let group = aggregate_per_user(records, grouping, measure)?;
            groups.push(run_pipeline(&group, alpha)?);
        }
    }
    let n_users = records.iter().map(|r| r.subject).collect::<BTreeSet<_>>().len();
    Ok(AnalysisReport { alpha, n_users, n_records: records.len(), groups, preferences: Vec::new() })
}
