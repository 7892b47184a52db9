//! Plain-text and JSON rendering of an [`AnalysisReport`].
//!
//! Per measure the text report has four tables, each with one row per
//! grouping (overall, blocks, ID categories): descriptives, normality,
//! omnibus test and post-hoc comparisons. Method columns are ZM, ST, PT.

use std::fmt::Write as _;

use crate::experiment::Method;
use crate::stats::{AnalysisReport, Branch, GroupAnalysis, Measure, Outcome, PreferenceSection, TestResult, PAIRS};

fn fmt_p(p: f64) -> String {
    if p < 1e-3 {
        format!("{p:.2e}")
    } else {
        format!("{p:.3}")
    }
}

fn fmt_test(o: &Outcome) -> String {
    match (&o.result, &o.note) {
        (Some(r), _) => {
            let mark = if r.passed { "*" } else { "" };
            format!("{} = {:.3}, p = {}{mark}", stat_symbol(r), r.statistic, fmt_p(r.p_value))
        }
        (None, Some(n)) => format!("n/a ({n})"),
        (None, None) => "n/a".into(),
    }
}

fn stat_symbol(r: &TestResult) -> &'static str {
    match r.test_name.as_str() {
        "shapiro-wilk" => "W",
        "rm-anova" => "F",
        "paired-t" => "t",
        "friedman" | "friedman-exact" => "Q",
        _ => "V",
    }
}

/// Left-aligned text table with a header rule.
fn table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).chain([header[c].chars().count()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| {
        cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join(" | ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
    out.push('\n');
}

fn method_header(first: &str) -> Vec<String> {
    std::iter::once(first.to_string()).chain(Method::REPORT_ORDER.iter().map(|m| m.to_string())).collect()
}

fn descriptive_cell(g: &GroupAnalysis, m: Method, measure: Measure) -> String {
    match g.descriptives.iter().find(|d| d.method == m) {
        Some(d) if measure == Measure::Accuracy => format!("{:.1}% ({:.1})", d.mean * 100.0, d.sd * 100.0),
        Some(d) => format!("{:.2} ({:.2})", d.mean, d.sd),
        None => "-".into(),
    }
}

fn measure_section(out: &mut String, measure: Measure, groups: &[&GroupAnalysis]) {
    let title = format!("== {} ==", capitalize(&measure.to_string()));
    let _ = writeln!(out, "{title}\n");

    let _ = writeln!(out, "Mean (sd) per method");
    let rows: Vec<Vec<String>> = groups
        .iter()
        .map(|g| {
            std::iter::once(capitalize(&g.grouping.to_string()))
                .chain(Method::REPORT_ORDER.iter().map(|&m| descriptive_cell(g, m, measure)))
                .collect()
        })
        .collect();
    table(out, &method_header(""), &rows);

    let _ = writeln!(out, "Shapiro-Wilk normality");
    let rows: Vec<Vec<String>> = groups
        .iter()
        .map(|g| {
            std::iter::once(capitalize(&g.grouping.to_string()))
                .chain(Method::REPORT_ORDER.iter().map(|&m| {
                    g.normality.iter().find(|e| e.method == m).map_or("-".into(), |e| fmt_test(&e.outcome))
                }))
                .collect()
        })
        .collect();
    table(out, &method_header(""), &rows);

    let _ = writeln!(out, "Omnibus test");
    let rows: Vec<Vec<String>> = groups
        .iter()
        .map(|g| {
            let test = match g.branch {
                Branch::Parametric => "RM-ANOVA",
                Branch::NonParametric => "Friedman",
            };
            let df = g.omnibus.result.as_ref().map_or(String::new(), |r| {
                r.df.iter().map(|d| format!("{d}")).collect::<Vec<_>>().join(", ")
            });
            vec![capitalize(&g.grouping.to_string()), test.into(), df, fmt_test(&g.omnibus)]
        })
        .collect();
    table(out, &["".into(), "test".into(), "df".into(), "result".into()], &rows);

    let alpha = groups.first().map_or(0.0, |g| g.post_hoc_alpha);
    let _ = writeln!(out, "Post-hoc comparisons (alpha = {alpha:.4})");
    let header: Vec<String> =
        std::iter::once(String::new()).chain(PAIRS.iter().map(|(a, b)| format!("{a} vs {b}"))).collect();
    let rows: Vec<Vec<String>> = groups
        .iter()
        .map(|g| {
            std::iter::once(capitalize(&g.grouping.to_string()))
                .chain(PAIRS.iter().map(|&(a, b)| {
                    g.post_hoc
                        .iter()
                        .find(|e| e.a == a && e.b == b)
                        .map_or_else(|| "not run".into(), |e| fmt_test(&e.outcome))
                }))
                .collect()
        })
        .collect();
    table(out, &header, &rows);
}

fn preference_section(out: &mut String, p: &PreferenceSection) {
    let _ = writeln!(out, "Preference: {} (n = {})", p.criterion, p.n_users);
    let mut rows = vec![std::iter::once("mean rank (sd)".to_string())
        .chain(Method::REPORT_ORDER.iter().map(|&m| {
            p.descriptives.iter().find(|d| d.method == m).map_or("-".into(), |d| format!("{:.2} ({:.2})", d.mean, d.sd))
        }))
        .collect::<Vec<_>>()];
    rows.push(vec!["Friedman".into(), fmt_test(&p.omnibus), String::new(), String::new()]);
    for e in &p.post_hoc {
        rows.push(vec![format!("{} vs {}", e.a, e.b), fmt_test(&e.outcome), String::new(), String::new()]);
    }
    table(out, &method_header(""), &rows);
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}

/// Human-readable tables. `*` marks results significant at their alpha.
pub fn render_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Analysis of {} trials from {} users (alpha = {})\n",
        report.n_records, report.n_users, report.alpha
    );
    for measure in Measure::ALL {
        let groups: Vec<&GroupAnalysis> = report.groups.iter().filter(|g| g.measure == measure).collect();
        if !groups.is_empty() {
            measure_section(&mut out, measure, &groups);
        }
    }
    for p in &report.preferences {
        preference_section(&mut out, p);
    }
    out
}

pub fn render_json(report: &AnalysisReport) -> String {
    serde_json::to_string_pretty(report).expect("reports always serialize")
}
