//! Writes an [`ExperimentReport`] as JSON, CSV tables and SVG charts.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::experiment::ExperimentReport;
use crate::textmine::csv_field;

pub const REPORT_JSON: &str = "report.json";
pub const PER_QUERY_CSV: &str = "per_query.csv";
pub const ATTACK_CSV: &str = "attack.csv";
pub const EXPOSURE_CSV: &str = "exposure.csv";
pub const RETRIEVED_SVG: &str = "retrieved_vs_relevant.svg";
pub const ACCURACY_SVG: &str = "classifier_accuracy.svg";
pub const AD_CATEGORIES_SVG: &str = "ad_categories.svg";

/// Writes every artifact into `dir` (created if missing) and returns the
/// written paths in a fixed order.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let files: [(&str, String); 7] = [
        (REPORT_JSON, report.to_json() + "\n"),
        (PER_QUERY_CSV, per_query_csv(report)),
        (ATTACK_CSV, attack_csv(report)),
        (EXPOSURE_CSV, exposure_csv(report)),
        (RETRIEVED_SVG, retrieved_chart(report)),
        (ACCURACY_SVG, accuracy_chart(report)),
        (AD_CATEGORIES_SVG, ad_category_chart(report)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub fn per_query_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("query_id,pattern,pattern_len,query,retrieved,relevant,precision,recall\n");
    for r in &report.queries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(&r.query_id),
            r.pattern,
            r.pattern_len,
            csv_field(&r.query),
            r.retrieved,
            r.relevant,
            opt(r.precision),
            opt(r.recall)
        );
    }
    out
}

pub fn attack_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("classifier,folds,overall_accuracy,tp,tn,fp,fn\n");
    for a in &report.attack.reports {
        let c = &a.confusion;
        let _ = writeln!(
            out,
            "{},{},{:.6},{},{},{},{}",
            a.classifier, a.folds, a.overall_accuracy, c.tp, c.tn, c.fp, c.fn_
        );
    }
    out
}

pub fn exposure_csv(report: &ExperimentReport) -> String {
    let e = &report.exposure;
    let mut out = String::from("category,ads,profile_weight\n");
    for (cat, n) in &e.conceptual_breakdown {
        let _ = writeln!(out, "{},{},{}", csv_field(cat), n, report.profile.weight(cat));
    }
    let _ = writeln!(out, "# total_ads={} specific_ads={} exposure={:.6}", e.total_ads, e.specific_ads, e.exposure);
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Bar {
    label: String,
    values: Vec<f64>,
}

/// Grouped vertical bar chart. Every bar carries a `<text>` label with its
/// value so numbers can be read back from the file.
fn bar_chart(title: &str, series: &[&str], bars: &[Bar], decimals: usize) -> String {
    const COLORS: [&str; 4] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52"];
    let group_w = 14.0 * series.len().max(1) as f64 + 10.0;
    let width = 80.0 + group_w * bars.len().max(1) as f64;
    let height = 320.0;
    let plot_h = 220.0;
    let base = 260.0;
    let max = bars
        .iter()
        .flat_map(|b| b.values.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="9">"#
    );
    let _ = writeln!(svg, r#"<text x="10" y="16" font-size="13">{}</text>"#, escape(title));
    for (i, name) in series.iter().enumerate() {
        let x = 10.0 + 120.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.1}" y="24" width="8" height="8" fill="{}"/><text x="{:.1}" y="32">{}</text>"#,
            COLORS[i % COLORS.len()],
            x + 11.0,
            escape(name)
        );
    }
    let _ = writeln!(svg, r#"<line x1="40" y1="{base}" x2="{:.1}" y2="{base}" stroke="black"/>"#, width - 10.0);
    for (g, bar) in bars.iter().enumerate() {
        let gx = 45.0 + group_w * g as f64;
        for (s, v) in bar.values.iter().enumerate() {
            let h = plot_h * v / max;
            let x = gx + 14.0 * s as f64;
            let _ = writeln!(
                svg,
                r#"<rect class="bar" x="{x:.1}" y="{:.1}" width="12" height="{h:.1}" fill="{}"/>"#,
                base - h,
                COLORS[s % COLORS.len()]
            );
            let _ = writeln!(
                svg,
                r#"<text class="value" data-series="{}" data-group="{}" x="{:.1}" y="{:.1}" transform="rotate(-90 {:.1} {:.1})">{:.*}</text>"#,
                escape(series[s]),
                escape(&bar.label),
                x + 9.0,
                base - h - 3.0,
                x + 9.0,
                base - h - 3.0,
                decimals,
                v
            );
        }
        let _ = writeln!(
            svg,
            r#"<text class="label" x="{gx:.1}" y="{:.1}">{}</text>"#,
            base + 14.0,
            escape(&bar.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn retrieved_chart(report: &ExperimentReport) -> String {
    let bars: Vec<Bar> = report
        .queries
        .iter()
        .map(|r| Bar {
            label: r.query_id.clone(),
            values: vec![r.retrieved as f64, r.relevant as f64],
        })
        .collect();
    bar_chart("Retrieved vs relevant results per query", &["retrieved", "relevant"], &bars, 0)
}

pub fn accuracy_chart(report: &ExperimentReport) -> String {
    let bars: Vec<Bar> = report
        .attack
        .reports
        .iter()
        .map(|a| Bar {
            label: a.classifier.clone(),
            values: vec![a.overall_accuracy],
        })
        .collect();
    bar_chart("Attack classifier accuracy", &["accuracy"], &bars, 4)
}

pub fn ad_category_chart(report: &ExperimentReport) -> String {
    let bars: Vec<Bar> = report
        .exposure
        .conceptual_breakdown
        .iter()
        .map(|(cat, n)| Bar {
            label: cat.clone(),
            values: vec![*n as f64],
        })
        .collect();
    bar_chart("Ads served by category", &["ads"], &bars, 0)
}

/// Reads back the `(group, series, value)` triples written by the charts.
pub fn parse_chart_values(svg: &str) -> Vec<(String, String, f64)> {
    let re = regex::Regex::new(r#"data-series="([^"]*)" data-group="([^"]*)"[^>]*>([^<]+)</text>"#)
        .expect("static regex");
    re.captures_iter(svg)
        .filter_map(|c| Some((c[2].to_string(), c[1].to_string(), c[3].parse().ok()?)))
        .collect()
}
