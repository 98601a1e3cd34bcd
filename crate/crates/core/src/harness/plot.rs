//! Minimal SVG rendering of result rows plus a whitespace-separated data
//! sidecar for external plotting tools.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::ExperimentKind;
use super::output::{format_number, ResultRow};
use crate::error::{DaisError, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Writes `<stem>.svg` and `<stem>.dat` into `dir` and returns both paths.
pub fn emit_plot(rows: &[ResultRow], kind: ExperimentKind, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    if rows.is_empty() {
        return Err(DaisError::NoData);
    }
    let svg_path = dir.join(format!("{stem}.svg"));
    let dat_path = dir.join(format!("{stem}.dat"));
    let (svg, dat) = match kind {
        ExperimentKind::Design => {
            let (xs, ys, grid) = heatmap_cells(rows);
            (heatmap_svg(&xs, &ys, &grid, "angle shift (rad)", "delay shift (µs)", "Eve RMSE bound (m)"), heatmap_sidecar(&xs, &ys, &grid))
        }
        _ => {
            let (series, x_label, y_label) = line_series(rows, kind);
            if series.iter().all(|s| s.points.is_empty()) {
                return Err(DaisError::NoData);
            }
            (line_svg(&series, x_label, y_label, true), line_sidecar(&series, x_label))
        }
    };
    std::fs::write(&svg_path, svg)?;
    std::fs::write(&dat_path, dat)?;
    Ok((svg_path, dat_path))
}

fn line_series(rows: &[ResultRow], kind: ExperimentKind) -> (Vec<Series>, &'static str, &'static str) {
    let mut series: Vec<Series> = Vec::new();
    let mut push = |name: String, x: f64, y: Option<f64>| {
        let Some(y) = y else { return };
        match series.iter_mut().find(|s| s.name == name) {
            Some(s) => s.points.push((x, y)),
            None => series.push(Series { name, points: vec![(x, y)] }),
        }
    };
    match kind {
        ExperimentKind::Subarray => {
            for r in rows {
                push(format!("delay shift {} µs", format_number(r.delta_tau)), r.delta_theta, r.deviation);
            }
            (series, "angle shift (rad)", "perceived position error (m)")
        }
        ExperimentKind::Leakage => {
            for r in rows {
                push("σ_min / σ_max".into(), r.snr_db.unwrap_or(0.0), r.min_singular_ratio);
            }
            (series, "SNR (dB)", "singular value ratio")
        }
        _ => {
            for r in rows {
                let x = r.snr_db.unwrap_or(0.0);
                let label = if r.experiment.ends_with("baseline") { "Eve, delay-only baseline" } else { "Eve (MCRB)" };
                push("Bob (CRB)".into(), x, r.rmse_bob);
                push(label.into(), x, r.rmse_eve);
            }
            (series, "SNR (dB)", "RMSE bound (m)")
        }
    }
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line chart. With `log_y` the axis is log10 and non-positive values are
/// dropped; infinite values are pinned to the top edge and drawn hollow.
pub fn line_svg(series: &[Series], x_label: &str, y_label: &str, log_y: bool) -> String {
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let usable = |v: f64| !log_y || v > 0.0;
    let xs = finite_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let ys = finite_range(series.iter().flat_map(|s| s.points.iter().filter(|p| usable(p.1)).map(|p| ty(p.1))));
    let (x0, x1) = padded(xs.map_or(0.0, |r| r.0), xs.map_or(1.0, |r| r.1));
    let (y0, y1) = ys.map(|(lo, hi)| if log_y { (lo.floor(), hi.ceil()) } else { (lo, hi) }).unwrap_or((0.0, 1.0));
    let (y0, y1) = padded(y0, y1);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#);
    for i in 0..=5 {
        let x = x0 + (x1 - x0) * i as f64 / 5.0;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, px(x), HEIGHT - MARGIN_BOTTOM + 16.0, tick(x));
    }
    if log_y {
        let mut e = y0 as i64;
        while e as f64 <= y1 {
            let _ = writeln!(svg, r##"<line x1="{MARGIN_LEFT}" x2="{:.1}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"##, MARGIN_LEFT + plot_w, MARGIN_LEFT - 6.0, py(e as f64) + 4.0, y = py(e as f64));
            e += 1;
        }
    } else {
        for i in 0..=5 {
            let y = y0 + (y1 - y0) * i as f64 / 5.0;
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN_LEFT - 6.0, py(y) + 4.0, tick(y));
        }
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, MARGIN_LEFT + plot_w / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(svg, r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#, MARGIN_TOP + plot_h / 2.0, escape(y_label));

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut path = String::new();
        for &(x, y) in s.points.iter().filter(|p| p.0.is_finite() && usable(p.1)) {
            let yy = if y.is_finite() { ty(y) } else { y1 };
            let _ = write!(path, "{}{:.2},{:.2} ", if path.is_empty() { "M" } else { "L" }, px(x), py(yy));
            let fill = if y.is_finite() { color } else { "none" };
            let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{fill}" stroke="{color}"/>"#, px(x), py(yy));
        }
        let _ = writeln!(svg, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.trim_end());
        let ly = MARGIN_TOP + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_RIGHT + 10.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" x2="{:.1}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#, lx + 20.0, lx + 26.0, ly + 4.0, escape(&s.name));
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn heatmap_cells(rows: &[ResultRow]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for r in rows {
        if !xs.contains(&r.delta_theta) {
            xs.push(r.delta_theta);
        }
        if !ys.contains(&r.delta_tau) {
            ys.push(r.delta_tau);
        }
    }
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let mut grid = vec![vec![f64::NAN; xs.len()]; ys.len()];
    for r in rows {
        let i = ys.iter().position(|y| *y == r.delta_tau).expect("collected");
        let j = xs.iter().position(|x| *x == r.delta_theta).expect("collected");
        grid[i][j] = r.rmse_eve.unwrap_or(f64::NAN);
    }
    (xs, ys, grid)
}

/// Heat map on a log10 colour scale. Infinite cells take the top colour
/// and are hatched; missing cells are left grey.
pub fn heatmap_svg(xs: &[f64], ys: &[f64], grid: &[Vec<f64>], x_label: &str, y_label: &str, value_label: &str) -> String {
    let range = finite_range(grid.iter().flatten().copied().filter(|v| *v > 0.0).map(f64::log10));
    let (lo, hi) = range.map(|(a, b)| padded(a, b)).unwrap_or((0.0, 1.0));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let cw = plot_w / xs.len().max(1) as f64;
    let ch = plot_h / ys.len().max(1) as f64;
    let color = |t: f64| {
        let t = t.clamp(0.0, 1.0);
        let r = (255.0 * t) as u8;
        let b = (255.0 * (1.0 - t)) as u8;
        let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()) * 0.8) as u8;
        format!("#{r:02x}{g:02x}{b:02x}")
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    svg.push_str(r#"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse"><path d="M0,6 L6,0" stroke="black" stroke-width="1"/></pattern></defs>"#);
    svg.push('\n');
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    for (i, row) in grid.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let x = MARGIN_LEFT + j as f64 * cw;
            let y = MARGIN_TOP + (ys.len() - 1 - i) as f64 * ch;
            let fill = if v.is_nan() {
                "#cccccc".to_string()
            } else if v.is_infinite() {
                color(1.0)
            } else {
                color((v.max(f64::MIN_POSITIVE).log10() - lo) / (hi - lo))
            };
            let _ = writeln!(svg, r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#, cw + 0.05, ch + 0.05);
            if v.is_infinite() {
                let _ = writeln!(svg, r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="url(#hatch)"/>"#);
            }
        }
    }
    let _ = writeln!(svg, r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#);
    if let (Some(&x0), Some(&x1), Some(&y0), Some(&y1)) = (xs.first(), xs.last(), ys.first(), ys.last()) {
        let _ = writeln!(svg, r#"<text x="{MARGIN_LEFT}" y="{:.1}">{}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, HEIGHT - MARGIN_BOTTOM + 16.0, tick(x0), MARGIN_LEFT + plot_w, HEIGHT - MARGIN_BOTTOM + 16.0, tick(x1));
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, MARGIN_LEFT - 6.0, HEIGHT - MARGIN_BOTTOM, tick(y0), MARGIN_LEFT - 6.0, MARGIN_TOP + 10.0, tick(y1));
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, MARGIN_LEFT + plot_w / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(svg, r#"<text transform="translate(16 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#, MARGIN_TOP + plot_h / 2.0, escape(y_label));
    let bar_x = WIDTH - MARGIN_RIGHT + 20.0;
    for k in 0..50 {
        let t = k as f64 / 49.0;
        let _ = writeln!(svg, r#"<rect x="{bar_x}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#, MARGIN_TOP + (1.0 - t) * (plot_h - plot_h / 50.0), plot_h / 50.0 + 0.5, color(t));
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}">1e{}</text><text x="{:.1}" y="{:.1}">1e{}</text>"#, bar_x + 22.0, MARGIN_TOP + 10.0, tick(hi), bar_x + 22.0, MARGIN_TOP + plot_h, tick(lo));
    let _ = writeln!(svg, r#"<text transform="translate({:.1} {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#, bar_x + 80.0, MARGIN_TOP + plot_h / 2.0, escape(value_label));
    svg.push_str("</svg>\n");
    svg
}

fn line_sidecar(series: &[Series], x_label: &str) -> String {
    let mut out = format!("# series x y   (x: {x_label})\n");
    for s in series {
        for (x, y) in &s.points {
            let _ = writeln!(out, "\"{}\" {} {}", s.name, format_number(*x), format_number(*y));
        }
    }
    out
}

fn heatmap_sidecar(xs: &[f64], ys: &[f64], grid: &[Vec<f64>]) -> String {
    let mut out = String::from("# delta_tau_us delta_theta_rad rmse_eve_m\n");
    for (i, y) in ys.iter().enumerate() {
        for (j, x) in xs.iter().enumerate() {
            let _ = writeln!(out, "{} {} {}", format_number(*y), format_number(*x), format_number(grid[i][j]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds_rows() -> Vec<ResultRow> {
        (0..4)
            .map(|i| {
                let mut r = ResultRow::new("bounds", 0.03, 0.7);
                r.snr_db = Some(10.0 * i as f64);
                r.rmse_bob = Some(0.3 / 10f64.powi(i));
                r.rmse_eve = Some(if i == 3 { f64::INFINITY } else { 19.0 });
                r
            })
            .collect()
    }

    #[test]
    fn line_plot_has_both_series() {
        let dir = tempfile::tempdir().unwrap();
        let (svg, dat) = emit_plot(&bounds_rows(), ExperimentKind::Bounds, dir.path(), "bounds").unwrap();
        let text = std::fs::read_to_string(svg).unwrap();
        assert!(text.contains("Bob (CRB)") && text.contains("Eve (MCRB)"));
        assert!(text.contains("1e-3"));
        assert!(text.contains(r##"fill="none" stroke="#d62728""##), "infinite point drawn hollow");
        let side = std::fs::read_to_string(dat).unwrap();
        assert!(side.contains("\"Eve (MCRB)\" 30.0 inf"));
    }

    #[test]
    fn heatmap_marks_infinite_cells() {
        let mut rows = Vec::new();
        for (i, tau) in [0.0, 0.1].iter().enumerate() {
            for (j, theta) in [0.0, 0.5].iter().enumerate() {
                let mut r = ResultRow::new("design", *tau, *theta);
                r.rmse_eve = Some(if i == 1 && j == 1 { f64::INFINITY } else { 1.0 + (i + j) as f64 });
                rows.push(r);
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let (svg, _) = emit_plot(&rows, ExperimentKind::Design, dir.path(), "design").unwrap();
        let text = std::fs::read_to_string(svg).unwrap();
        assert_eq!(text.matches("url(#hatch)").count(), 1);
        assert!(text.contains("delay shift (µs)") && text.contains("angle shift (rad)"));
    }

    #[test]
    fn empty_rows_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(emit_plot(&[], ExperimentKind::Bounds, dir.path(), "x"), Err(DaisError::NoData));
    }
}
