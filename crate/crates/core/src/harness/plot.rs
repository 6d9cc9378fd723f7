use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::SummaryRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ErrorVsEps,
    ErrorVsR,
    ErrorVsN,
}

impl PlotKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::ErrorVsEps => "error_vs_eps",
            Self::ErrorVsR => "error_vs_R",
            Self::ErrorVsN => "error_vs_n",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "error_vs_eps" | "eps" => Ok(Self::ErrorVsEps),
            "error_vs_R" | "error_vs_r" | "R" | "r" => Ok(Self::ErrorVsR),
            "error_vs_n" | "n" => Ok(Self::ErrorVsN),
            _ => Err(Error::Config(format!("unknown plot kind {s:?}"))),
        }
    }

    /// Number of distinct axis values in `rows`.
    pub fn distinct_x(&self, rows: &[SummaryRow]) -> usize {
        let mut xs: Vec<u64> = rows.iter().map(|r| self.x(r).to_bits()).collect();
        xs.sort_unstable();
        xs.dedup();
        xs.len()
    }

    fn x(&self, r: &SummaryRow) -> f64 {
        match self {
            Self::ErrorVsEps => r.eps,
            Self::ErrorVsR => r.magnitude,
            Self::ErrorVsN => r.n as f64,
        }
    }

    fn x_label(&self) -> &'static str {
        match self {
            Self::ErrorVsEps => "eps",
            Self::ErrorVsR => "R",
            Self::ErrorVsN => "n",
        }
    }

    /// Everything held fixed within one figure.
    fn panel(&self, r: &SummaryRow) -> String {
        let attack_kind = r.attack.split('(').next().unwrap_or(&r.attack);
        match self {
            Self::ErrorVsEps => format!("{} {} {} n={} d={}", r.task, r.family, r.attack, r.n, r.d),
            Self::ErrorVsR => format!("{} {} {} eps={} n={} d={}", r.task, r.family, attack_kind, r.eps, r.n, r.d),
            Self::ErrorVsN => format!("{} {} {} eps={} d={}", r.task, r.family, r.attack, r.eps, r.d),
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Writes one SVG per panel of `rows` into `dir` and returns their paths.
/// Each estimator is a series of medians with a p10-p90 bar; slope-1 and
/// slope-1/2 guides are anchored at the first series.
pub fn emit_plots(rows: &[SummaryRow], kind: PlotKind, dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::Config("nothing to plot".into()));
    }
    if kind == PlotKind::ErrorVsR && rows.iter().all(|r| r.magnitude == 0.0) {
        return Err(Error::Config("no attack magnitudes to plot against".into()));
    }
    fs::create_dir_all(dir)?;
    let mut panels: Vec<(String, Vec<&SummaryRow>)> = Vec::new();
    for r in rows {
        let p = kind.panel(r);
        match panels.iter_mut().find(|(q, _)| *q == p) {
            Some((_, v)) => v.push(r),
            None => panels.push((p, vec![r])),
        }
    }
    let mut out = Vec::new();
    for (i, (title, rs)) in panels.iter().enumerate() {
        let path = dir.join(format!("{}_{i}.svg", kind.name()));
        fs::write(&path, render(kind, title, rs))?;
        out.push(path);
    }
    Ok(out)
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64> + Clone, allow_log: bool) -> Self {
        let log = allow_log && values.clone().all(|v| v > 0.0);
        let t = |v: f64| if log { v.log10() } else { v };
        let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(t(v)), b.max(t(v))));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if log { 0.5 } else { 0.5 * lo.abs().max(1.0) };
            lo -= pad;
            hi += pad;
        } else {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Self { log, lo, hi }
    }

    fn frac(&self, v: f64) -> f64 {
        let t = if self.log { v.log10() } else { v };
        (t - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            (self.lo.ceil() as i32..=self.hi.floor() as i32).map(|e| 10f64.powi(e)).collect()
        } else {
            (0..=4).map(|k| self.lo + (self.hi - self.lo) * k as f64 / 4.0).collect()
        }
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn render(kind: PlotKind, title: &str, rows: &[&SummaryRow]) -> String {
    let mut series: Vec<(&str, Vec<&SummaryRow>)> = Vec::new();
    for r in rows {
        match series.iter_mut().find(|(e, _)| *e == r.estimator) {
            Some((_, v)) => v.push(r),
            None => series.push((&r.estimator, vec![r])),
        }
    }
    for (_, v) in &mut series {
        v.sort_by(|a, b| kind.x(a).total_cmp(&kind.x(b)));
    }
    let xa = Axis::new(rows.iter().map(|r| kind.x(r)), true);
    let ya = Axis::new(rows.iter().flat_map(|r| [r.median, r.p10, r.p90]), true);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + pw * xa.frac(x);
    let py = |y: f64| TOP + ph * (1.0 - ya.frac(y));

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(s, r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath></defs>"#);
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for t in xa.ticks() {
        let x = px(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph, TOP + ph + 5.0, TOP + ph + 18.0, fmt_tick(t));
    }
    for t in ya.ticks() {
        let y = py(t);
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 5.0, LEFT - 8.0, y + 4.0, fmt_tick(t));
    }
    let scale = |log: bool| if log { " (log)" } else { "" };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}{}</text>"#, LEFT + pw / 2.0, H - 12.0, kind.x_label(), scale(xa.log));
    let _ = writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">error{}</text>"#, TOP + ph / 2.0, TOP + ph / 2.0, scale(ya.log));

    // Guides y = y0 (x / x0)^s through the first positive point of the first series.
    let anchor = series[0].1.iter().find(|r| kind.x(r) > 0.0 && r.median > 0.0);
    let xs: Vec<f64> = rows.iter().map(|r| kind.x(r)).filter(|&x| x > 0.0).collect();
    if let Some(a) = anchor {
        let (x0, y0) = (kind.x(a), a.median);
        let (xmin, xmax) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
        if xmax > xmin {
            for (slope, dash, label) in [(1.0, "6 4", "slope 1"), (0.5, "2 3", "slope 1/2")] {
                let pts: Vec<String> = (0..=32)
                    .map(|k| {
                        let x = if xa.log { xmin * (xmax / xmin).powf(k as f64 / 32.0) } else { xmin + (xmax - xmin) * k as f64 / 32.0 };
                        let y = y0 * (x / x0).powf(slope);
                        format!("{:.2},{:.2}", px(x), py(y))
                    })
                    .collect();
                let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#999" stroke-dasharray="{dash}" clip-path="url(#plot)"><title>{label}</title></polyline>"##, pts.join(" "));
            }
        }
    }

    for (k, (name, pts)) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let line: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", px(kind.x(r)), py(r.median))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5" clip-path="url(#plot)"/>"#, line.join(" "));
        for r in pts {
            let x = px(kind.x(r));
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{c}"/><circle cx="{x:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, py(r.p10), py(r.p90), py(r.median));
        }
        let ly = TOP + 10.0 + 16.0 * k as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#, lx + 18.0, lx + 24.0, ly + 4.0, esc(name));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let t = format!("{v:.3}");
        t.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}
