//! Report rendering. Pure functions of their inputs.

use serde::{Deserialize, Serialize};

use super::resources::{ProcessUsage, ResourceSummary};
use super::round::RoundMetrics;

pub const SUMMARY_HEADING: &str = "Summary of performance metrics";

pub const PERF_COLUMNS: [&str; 8] = [
    "Name",
    "Succ",
    "Fail",
    "Send Rate (TPS)",
    "Max Latency (s)",
    "Min Latency (s)",
    "Avg Latency (s)",
    "Throughput (TPS)",
];

pub const RESOURCE_COLUMNS: [&str; 9] = [
    "Name",
    "CPU% (max)",
    "CPU% (avg)",
    "Memory(max) [MB]",
    "Memory(avg) [MB]",
    "Traffic In [MB]",
    "Traffic Out [MB]",
    "Disc Write [B]",
    "Disc Read [B]",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rounds: Vec<RoundMetrics>,
    pub resources: Vec<ResourceSummary>,
}

/// Cells of one performance row: rates to one decimal, latencies to two.
pub fn metrics_row(m: &RoundMetrics) -> [String; 8] {
    [
        m.name.clone(),
        m.succ.to_string(),
        m.fail.to_string(),
        format!("{:.1}", m.send_rate_tps),
        format!("{:.2}", m.max_latency_s),
        format!("{:.2}", m.min_latency_s),
        format!("{:.2}", m.avg_latency_s),
        format!("{:.1}", m.throughput_tps),
    ]
}

/// Cells of one resource row: CPU to two decimals, memory and traffic to
/// three significant figures, disk bytes to two decimals.
pub fn resource_row(p: &ProcessUsage) -> [String; 9] {
    [
        p.name.clone(),
        format!("{:.2}", p.cpu_pct_max),
        format!("{:.2}", p.cpu_pct_avg),
        sig3(p.memory_mb_max),
        sig3(p.memory_mb_avg),
        sig3(p.traffic_in_mb),
        sig3(p.traffic_out_mb),
        format!("{:.2}", p.disc_write_b as f64),
        format!("{:.2}", p.disc_read_b as f64),
    ]
}

/// Three significant figures, keeping trailing zeros (`0.00320`, `9.50`).
/// Values of 100 and above print as integers.
pub fn sig3(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return "0.00".into();
    }
    let decimals = |v: f64| (2 - v.abs().log10().floor() as i32).max(0) as usize;
    let d = decimals(x);
    let text = format!("{x:.d$}");
    // Rounding can carry into a new digit (9.996 -> 10.00); redo at the new magnitude.
    let rounded: f64 = text.parse().unwrap_or(x);
    let d2 = decimals(rounded);
    if d2 < d {
        format!("{rounded:.d2$}")
    } else {
        text
    }
}

fn table(out: &mut String, columns: &[&str], rows: impl Iterator<Item = Vec<String>>) {
    out.push_str(&format!("| {} |\n", columns.join(" | ")));
    out.push_str(&format!("|{}\n", " --- |".repeat(columns.len())));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
}

pub fn render_report(rounds: &[RoundMetrics], resources: &[ResourceSummary], format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let report = BenchReport { rounds: rounds.to_vec(), resources: resources.to_vec() };
            let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
            bytes.push(b'\n');
            bytes
        }
        ReportFormat::Markdown => render_markdown(rounds, resources).into_bytes(),
    }
}

fn render_markdown(rounds: &[RoundMetrics], resources: &[ResourceSummary]) -> String {
    let mut out = format!("### {SUMMARY_HEADING}\n\n");
    table(&mut out, &PERF_COLUMNS, rounds.iter().map(|m| metrics_row(m).to_vec()));
    let partial: Vec<&str> = rounds.iter().filter(|m| m.partial).map(|m| m.name.as_str()).collect();
    if !partial.is_empty() {
        out.push_str(&format!("\nIncomplete rounds (system became unavailable): {}\n", partial.join(", ")));
    }
    for r in resources {
        out.push_str(&format!("\n### Resource utilization for {}\n\n", r.round));
        table(&mut out, &RESOURCE_COLUMNS, r.processes.iter().map(|p| resource_row(p).to_vec()));
        if r.partial {
            out.push_str("\nA monitored node stopped during this round; figures cover the time it was up.\n");
        }
    }
    out
}

/// Splits a rendered Markdown table row back into trimmed cells.
pub fn markdown_cells(line: &str) -> Vec<String> {
    line.trim().trim_matches('|').split('|').map(|c| c.trim().to_string()).collect()
}
