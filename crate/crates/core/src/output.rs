//! CSV and SVG artifacts.
//!
//! Trace CSV: `replication,t,route,signal_lo,signal_hi,count,travel_time,social_cost`,
//! one row per route and period, routes 1-based, social cost repeated on
//! every route row. Floats are written in shortest round-trip form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{AggregateMode, AggregateStats, SimulationTrace, TraceStep};
use crate::model::SignalVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub replication: usize,
    pub t: usize,
    pub route: usize,
    pub signal_lo: f64,
    pub signal_hi: f64,
    pub count: u64,
    pub travel_time: f64,
    pub social_cost: f64,
}

pub fn trace_rows(trace: &SimulationTrace) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for step in &trace.steps {
        for m in 0..step.counts.len() {
            rows.push(TraceRow {
                replication: trace.replication,
                t: step.t,
                route: m + 1,
                signal_lo: step.signal.lo(m),
                signal_hi: step.signal.hi(m),
                count: step.counts[m],
                travel_time: step.travel_times[m],
                social_cost: step.social_cost,
            });
        }
    }
    rows
}

pub fn write_trace_csv(path: &Path, traces: &[SimulationTrace]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if traces.is_empty() {
        w.write_record([
            "replication",
            "t",
            "route",
            "signal_lo",
            "signal_hi",
            "count",
            "travel_time",
            "social_cost",
        ])?;
    }
    for tr in traces {
        for row in trace_rows(tr) {
            w.serialize(row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Regroups rows into per-replication steps.
pub fn steps_from_rows(rows: &[TraceRow]) -> Result<BTreeMap<usize, Vec<TraceStep>>> {
    let mut grouped: BTreeMap<(usize, usize), Vec<&TraceRow>> = BTreeMap::new();
    for row in rows {
        grouped.entry((row.replication, row.t)).or_default().push(row);
    }
    let mut out: BTreeMap<usize, Vec<TraceStep>> = BTreeMap::new();
    for ((rep, t), mut routes) in grouped {
        routes.sort_by_key(|r| r.route);
        if routes.iter().enumerate().any(|(i, r)| r.route != i + 1) {
            return Err(Error::Invalid(format!("replication {rep}, t = {t}: routes are not 1..M")));
        }
        let signal = SignalVector::new(routes.iter().map(|r| (r.signal_lo, r.signal_hi)).collect())?;
        out.entry(rep).or_default().push(TraceStep {
            t,
            signal,
            counts: routes.iter().map(|r| r.count).collect(),
            travel_times: routes.iter().map(|r| r.travel_time).collect(),
            social_cost: routes[0].social_cost,
        });
    }
    Ok(out)
}

pub fn write_aggregate_csv(path: &Path, stats: &AggregateStats) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    match stats.mode {
        AggregateMode::PerPeriod => {
            w.write_record(["scheme", "r", "t", "mean_cost", "std_cost", "paths"])?;
            for row in &stats.rows {
                w.write_record([
                    row.scheme.clone(),
                    row.r.to_string(),
                    row.t.unwrap_or(0).to_string(),
                    row.mean.to_string(),
                    row.std.to_string(),
                    row.paths.to_string(),
                ])?;
            }
        }
        AggregateMode::PerWindow => {
            w.write_record(["scheme", "r", "mean_avg_cost", "std_avg_cost", "paths"])?;
            for row in &stats.rows {
                w.write_record([
                    row.scheme.clone(),
                    row.r.to_string(),
                    row.mean.to_string(),
                    row.std.to_string(),
                    row.paths.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Line plot of the aggregate means with one-standard-deviation error bars.
/// One series per (scheme, r) against `t`, or per scheme against `r`.
pub fn render_svg(stats: &AggregateStats, title: &str) -> String {
    let mut series: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for row in &stats.rows {
        let (key, x) = match stats.mode {
            AggregateMode::PerPeriod => (format!("{} r={}", row.scheme, row.r), row.t.unwrap_or(0) as f64),
            AggregateMode::PerWindow => (row.scheme.clone(), row.r as f64),
        };
        series.entry(key).or_default().push((x, row.mean, row.std));
    }
    let (w, h, left, right, top, bottom) = (720.0, 440.0, 60.0, 200.0, 40.0, 50.0);
    let pts = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, m, s) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(m - s);
        y1 = y1.max(m + s);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - pad, y1 + pad);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let (ax0, ax1, ay0, ay1) = (px(x0), px(x1), py(y0), py(y1));
    let _ = writeln!(svg, r#"<path d="M{ax0:.1},{ay1:.1} L{ax0:.1},{ay0:.1} L{ax1:.1},{ay0:.1}" fill="none" stroke="black"/>"#);
    for k in 0..=5 {
        let y = y0 + (y1 - y0) * k as f64 / 5.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#,
            ax0 - 6.0,
            py(y) + 4.0
        );
    }
    let xlabel = match stats.mode {
        AggregateMode::PerPeriod => "t",
        AggregateMode::PerWindow => "r",
    };
    let xs: std::collections::BTreeSet<i64> = series.values().flatten().map(|p| p.0 as i64).collect();
    for x in xs {
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"#, px(x as f64), ay0 + 16.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xlabel}</text>"#, (ax0 + ax1) / 2.0, h - 12.0);
    for (i, (name, pts)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(j, &(x, m, _))| format!("{}{:.1},{:.1}", if j == 0 { "M" } else { "L" }, px(x), py(m)))
            .collect();
        let _ = writeln!(svg, r#"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#, path.join(" "));
        for &(x, m, s) in pts {
            let (cx, lo, hi) = (px(x), py(m - s), py(m + s));
            let _ = writeln!(
                svg,
                r#"<path d="M{cx:.1},{lo:.1} L{cx:.1},{hi:.1} M{:.1},{lo:.1} L{:.1},{lo:.1} M{:.1},{hi:.1} L{:.1},{hi:.1}" stroke="{colour}"/>"#,
                cx - 3.0,
                cx + 3.0,
                cx - 3.0,
                cx + 3.0
            );
            let _ = writeln!(svg, r#"<circle cx="{cx:.1}" cy="{:.1}" r="2.5" fill="{colour}"/>"#, py(m));
        }
        let ly = top + 16.0 * i as f64 + 10.0;
        let lx = w - right + 15.0;
        let _ = writeln!(svg, r#"<path d="M{lx:.1},{ly:.1} L{:.1},{ly:.1}" stroke="{colour}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `aggregate.csv`, `aggregate.svg` and one `trace_<scheme>_r<r>.csv`
/// per scheme and window length. Existing files are overwritten.
pub fn write_outputs(
    stats: &AggregateStats,
    traces: &[SimulationTrace],
    out_dir: &Path,
    title: &str,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let agg = out_dir.join("aggregate.csv");
    write_aggregate_csv(&agg, stats)?;
    written.push(agg);
    let svg_path = out_dir.join("aggregate.svg");
    fs::write(&svg_path, render_svg(stats, title)).map_err(|e| Error::io(&svg_path, e))?;
    written.push(svg_path);
    let mut groups: BTreeMap<(String, usize), Vec<SimulationTrace>> = BTreeMap::new();
    for tr in traces {
        groups.entry((tr.scheme.clone(), tr.r)).or_default().push(tr.clone());
    }
    for ((scheme, r), trs) in groups {
        let p = out_dir.join(format!("trace_{scheme}_r{r}.csv"));
        write_trace_csv(&p, &trs)?;
        written.push(p);
    }
    Ok(written)
}
