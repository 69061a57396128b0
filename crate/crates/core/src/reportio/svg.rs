use std::fmt::Write;

use super::ReportioError;
use crate::eval::{CaptureCurve, ExclusionCurve};
use crate::hypno::{Hypnodensity, Stage, N_STAGES};
use crate::uncertainty::GraySelection;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 32.0;
const MARGIN_BOTTOM: f64 = 52.0;

const SERIES_COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Stage fill colors in canonical order.
const STAGE_COLORS: [&str; N_STAGES] = ["#f2c14e", "#9bc1bc", "#5d8aa8", "#1d3557", "#e76f51"];

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line chart with one polyline per series. `x` values are fractions and are
/// labelled as percentages.
pub fn emit_curve_svg(title: &str, x_label: &str, y_label: &str, series: &[CurveSeries]) -> Result<String, ReportioError> {
    let fewest = series.iter().map(|s| s.points.len()).min().unwrap_or(0);
    if fewest < 2 {
        return Err(ReportioError::TooFewPoints(fewest));
    }
    let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
    let (lo, hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let y_min = (lo * 20.0).floor() / 20.0;
    let mut y_max = (hi * 20.0).ceil() / 20.0;
    if y_max <= y_min {
        y_max = y_min + 0.05;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + x.clamp(0.0, 1.0) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, MARGIN_LEFT + plot_w / 2.0, escape(title));
    let _ = writeln!(s, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(s, r#"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}"/>"#, MARGIN_LEFT, MARGIN_TOP + plot_h, MARGIN_LEFT + plot_w);
    let _ = writeln!(s, r#"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}"/>"#, MARGIN_LEFT, MARGIN_TOP, MARGIN_TOP + plot_h);
    s.push_str("</g>\n");
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(x), MARGIN_TOP + plot_h + 16.0, i * 10);
    }
    let steps = ((y_max - y_min) / 0.05).round() as usize;
    let stride = steps.div_ceil(10).max(1);
    for i in (0..=steps).step_by(stride) {
        let y = y_min + i as f64 * 0.05;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, MARGIN_LEFT - 6.0, py(y) + 4.0);
    }
    let _ = writeln!(s, r#"<text class="x-label" x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, MARGIN_LEFT + plot_w / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(s, r#"<text class="y-label" x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#, MARGIN_TOP + plot_h / 2.0, MARGIN_TOP + plot_h / 2.0, escape(y_label));

    for (k, series) in series.iter().enumerate() {
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        let coords: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        let ly = MARGIN_TOP + 12.0 + 18.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 14.0;
        let _ = writeln!(s, r#"<g class="legend-entry"><line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text></g>"#, lx + 20.0, lx + 26.0, ly + 4.0, escape(&series.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Accuracy against the share of most-uncertain epochs excluded.
pub fn exclusion_curves_svg(curves: &[ExclusionCurve]) -> Result<String, ReportioError> {
    let series: Vec<CurveSeries> = curves
        .iter()
        .map(|c| CurveSeries {
            label: c.metric.label().to_string(),
            points: c.points.iter().map(|p| (p.pct_excluded, p.report.accuracy)).collect(),
        })
        .collect();
    emit_curve_svg("Accuracy after excluding uncertain epochs", "Epochs excluded (%)", "Accuracy", &series)
}

/// Share of disagreements inside the gray set against its size.
pub fn capture_curves_svg(curves: &[CaptureCurve]) -> Result<String, ReportioError> {
    let series: Vec<CurveSeries> = curves
        .iter()
        .map(|c| CurveSeries {
            label: c.metric.label().to_string(),
            points: c.points.iter().map(|p| (p.pct, p.captured_fraction)).collect(),
        })
        .collect();
    emit_curve_svg("Disagreements captured by gray areas", "Epochs in gray areas (%)", "Captured fraction", &series)
}

/// Stacked per-epoch probability bars with shaded runs of gray epochs.
pub fn emit_hypnodensity_svg(h: &Hypnodensity, gray: &GraySelection) -> Result<String, ReportioError> {
    h.grid().ensure_matches(gray.grid())?;
    let n = h.len();
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let bar_w = plot_w / n as f64;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, MARGIN_LEFT + plot_w / 2.0, escape(h.grid().recording_id()));
    s.push_str("<g class=\"bars\" shape-rendering=\"crispEdges\">\n");
    for (e, row) in h.rows().iter().enumerate() {
        let x = MARGIN_LEFT + e as f64 * bar_w;
        let mut top = MARGIN_TOP + plot_h;
        for (k, &p) in row.iter().enumerate() {
            let height = p * plot_h;
            top -= height;
            let _ = writeln!(s, r#"<rect class="stage-{}" x="{x:.3}" y="{top:.3}" width="{bar_w:.3}" height="{height:.3}" fill="{}"/>"#, Stage::SCOREABLE[k].token(), STAGE_COLORS[k]);
        }
    }
    s.push_str("</g>\n<g class=\"gray\" fill=\"#808080\" fill-opacity=\"0.45\">\n");
    let mask = gray.mask();
    let mut e = 0;
    while e < n {
        if !mask[e] {
            e += 1;
            continue;
        }
        let start = e;
        while e < n && mask[e] {
            e += 1;
        }
        let _ = writeln!(s, r#"<rect x="{:.3}" y="{MARGIN_TOP:.3}" width="{:.3}" height="{plot_h:.3}"/>"#, MARGIN_LEFT + start as f64 * bar_w, (e - start) as f64 * bar_w);
    }
    s.push_str("</g>\n");
    let hours = n as f64 * h.grid().epoch_duration_s() / 3600.0;
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Time (h), {n} epochs, {hours:.2} h</text>"#, MARGIN_LEFT + plot_w / 2.0, HEIGHT - 12.0);
    for (k, stage) in Stage::SCOREABLE.iter().enumerate() {
        let ly = MARGIN_TOP + 12.0 + 18.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 14.0;
        let _ = writeln!(s, r#"<g class="legend-entry"><rect x="{lx:.1}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text></g>"#, ly - 6.0, STAGE_COLORS[k], lx + 18.0, ly + 4.0, stage);
    }
    s.push_str("</svg>\n");
    Ok(s)
}
