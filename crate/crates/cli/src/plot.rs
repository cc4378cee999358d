//! Speed-versus-position SVG plots built from trace CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

/// One vehicle's samples in one trial, ordered by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub trial: u32,
    pub vehicle: u32,
    pub dist: Vec<f64>,
    pub speed: Vec<f64>,
}

pub fn read_traces(path: &Path) -> Result<Vec<Series>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("column `{name}` missing"))
    };
    let (ti, vi, di, si) = (col("trial")?, col("vehicle")?, col("signed_dist_m")?, col("speed_mps")?);
    let mut map: BTreeMap<(u32, u32), Series> = BTreeMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).with_context(|| format!("row {} is short", n + 2));
        let trial: u32 = field(ti)?.parse().with_context(|| format!("row {}: trial", n + 2))?;
        let vehicle: u32 = field(vi)?.parse().with_context(|| format!("row {}: vehicle", n + 2))?;
        let d: f64 = field(di)?.parse().with_context(|| format!("row {}: distance", n + 2))?;
        let s: f64 = field(si)?.parse().with_context(|| format!("row {}: speed", n + 2))?;
        let e = map.entry((trial, vehicle)).or_insert_with(|| Series {
            trial,
            vehicle,
            dist: Vec::new(),
            speed: Vec::new(),
        });
        e.dist.push(d);
        e.speed.push(s);
    }
    Ok(map.into_values().collect())
}

/// Speed at distance `x`, linear between the samples that bracket it.
/// Distances never decrease along a trace; a standstill repeats a distance
/// and the first sample reaching `x` wins.
pub fn speed_at(s: &Series, x: f64) -> Option<f64> {
    let (first, last) = (*s.dist.first()?, *s.dist.last()?);
    if x < first || x > last {
        return None;
    }
    let i = s.dist.partition_point(|&d| d < x);
    if i == 0 || s.dist[i] == x {
        return Some(s.speed[i]);
    }
    let (d0, d1) = (s.dist[i - 1], s.dist[i]);
    let w = (x - d0) / (d1 - d0);
    Some(s.speed[i - 1] + w * (s.speed[i] - s.speed[i - 1]))
}

const GRID: usize = 200;

/// Mean speed profile over the distance range every trial covers.
pub fn mean_profile(series: &[&Series]) -> Vec<(f64, f64)> {
    let lo = series
        .iter()
        .filter_map(|s| s.dist.first())
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = series
        .iter()
        .filter_map(|s| s.dist.last())
        .copied()
        .fold(f64::INFINITY, f64::min);
    if series.is_empty() || !(lo < hi) {
        return Vec::new();
    }
    (0..=GRID)
        .filter_map(|k| {
            let x = lo + (hi - lo) * k as f64 / GRID as f64;
            let vals: Vec<f64> = series.iter().filter_map(|s| speed_at(s, x)).collect();
            (vals.len() == series.len()).then(|| (x, vals.iter().sum::<f64>() / vals.len() as f64))
        })
        .collect()
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 800.0;
const H: f64 = 480.0;
const ML: f64 = 64.0;
const MR: f64 = 120.0;
const MT: f64 = 40.0;
const MB: f64 = 52.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(title: &str, traces: &[Series]) -> String {
    let mut vehicles: BTreeMap<u32, Vec<&Series>> = BTreeMap::new();
    for s in traces {
        vehicles.entry(s.vehicle).or_default().push(s);
    }
    let xs = traces.iter().flat_map(|s| s.dist.iter().copied());
    let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !(x0 < x1) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let vmax = traces.iter().flat_map(|s| s.speed.iter().copied()).fold(1.0, f64::max);
    let y1 = (vmax * 1.1).ceil();
    let px = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let py = |v: f64| H - MB - v / y1 * (H - MT - MB);
    let points = |pts: &mut dyn Iterator<Item = (f64, f64)>| {
        let mut out = String::new();
        for (i, (x, v)) in pts.enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.2},{:.2}", px(x), py(v));
        }
        out
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        W / 2.0,
        escape(title)
    );

    let step = nice_step(x1 - x0);
    let mut t = (x0 / step).ceil() * step;
    while t <= x1 + 1e-9 {
        let x = px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{MT}" x2="{x:.2}" y2="{}" stroke="#e6e6e6"/>"##,
            H - MB
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
            H - MB + 16.0,
            t.round()
        );
        t += step;
    }
    let vstep = nice_step(y1);
    let mut v = 0.0;
    while v <= y1 + 1e-9 {
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{ML}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#e6e6e6"/>"##,
            W - MR
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{v}</text>"#,
            ML - 6.0,
            y + 4.0
        );
        v += vstep;
    }
    if x0 < 0.0 && x1 > 0.0 {
        let x = px(0.0);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{MT}" x2="{x:.2}" y2="{}" stroke="#888" stroke-dasharray="4 3"/>"##,
            H - MB
        );
    }
    let _ = writeln!(
        svg,
        r##"<rect x="{ML}" y="{MT}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - ML - MR,
        H - MT - MB
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">distance past the intersection center (m)</text>"#,
        (ML + W - MR) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">speed (m/s)</text>"#,
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    );

    for (k, (id, runs)) in vehicles.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for s in runs {
            let pts = points(&mut s.dist.iter().copied().zip(s.speed.iter().copied()));
            let _ = writeln!(
                svg,
                r#"<polyline class="trial" data-vehicle="{id}" data-trial="{}" points="{pts}" fill="none" stroke="{color}" stroke-opacity="0.25" stroke-width="1"/>"#,
                s.trial
            );
        }
        let mean = mean_profile(runs);
        let pts = points(&mut mean.into_iter());
        let _ = writeln!(
            svg,
            r#"<polyline class="mean" data-vehicle="{id}" points="{pts}" fill="none" stroke="{color}" stroke-width="2.5"/>"#
        );
        let ly = MT + 16.0 + 20.0 * k as f64;
        let lx = W - MR + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2.5"/><text x="{}" y="{}">vehicle {id}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
