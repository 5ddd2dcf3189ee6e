//! SVG rendering of benchmark reports: one bar series per report, one bar
//! group per prior method, LAS-RMSE on the vertical axis and the per-clip
//! time printed above each bar.

use std::fmt::Write;

use anyhow::{bail, Result};
use freev_core::prior::{format_duration, BenchReport};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"];

/// Renders `reports` (label, report) as grouped bars.
pub fn render(reports: &[(String, BenchReport)]) -> Result<String> {
    if reports.is_empty() {
        bail!("nothing to plot: no reports given");
    }
    for (label, r) in reports {
        if r.methods.is_empty() {
            bail!("report '{label}' has an empty method series");
        }
        if r.methods.iter().any(|m| !m.las_rmse.is_finite() || m.las_rmse < 0.0) {
            bail!("report '{label}' has an invalid LAS-RMSE value");
        }
    }

    let mut methods: Vec<(String, String)> = Vec::new();
    for (_, r) in reports {
        for m in &r.methods {
            if !methods.iter().any(|(k, _)| k == &m.method) {
                methods.push((m.method.clone(), m.label.clone()));
            }
        }
    }
    let y_max = reports
        .iter()
        .flat_map(|(_, r)| r.methods.iter().map(|m| m.las_rmse))
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.15;

    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let group_w = plot_w / methods.len() as f64;
    let bar_w = 0.8 * group_w / reports.len() as f64;
    let y = |v: f64| HEIGHT - MARGIN - v / y_max * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    )?;
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#)?;
    writeln!(
        svg,
        r#"<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>"#,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    )?;
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        writeln!(
            svg,
            r#"<text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            MARGIN - 6.0,
            y(v) + 4.0
        )?;
    }
    writeln!(
        svg,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">LAS-RMSE</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )?;
    for (g, (_, label)) in methods.iter().enumerate() {
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN + (g as f64 + 0.5) * group_w,
            HEIGHT - MARGIN + 16.0,
            escape(label)
        )?;
    }
    for (s, (label, r)) in reports.iter().enumerate() {
        let colour = PALETTE[s % PALETTE.len()];
        writeln!(svg, r#"<g class="series" data-label="{}" fill="{colour}">"#, escape(label))?;
        for m in &r.methods {
            let g = methods.iter().position(|(k, _)| k == &m.method).expect("collected above");
            let x = MARGIN + g as f64 * group_w + 0.1 * group_w + s as f64 * bar_w;
            let top = y(m.las_rmse);
            writeln!(
                svg,
                r#"<rect class="bar" x="{x:.1}" y="{top:.1}" width="{bar_w:.1}" height="{:.1}"><title>{}: {:.4}</title></rect>"#,
                HEIGHT - MARGIN - top,
                escape(&m.label),
                m.las_rmse
            )?;
            writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="black">{}</text>"#,
                x + bar_w / 2.0,
                top - 4.0,
                format_duration(m.time_per_clip_s)
            )?;
        }
        writeln!(svg, "</g>")?;
        writeln!(
            svg,
            r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{colour}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            MARGIN - 40.0 + 14.0 * s as f64,
            WIDTH - MARGIN - 135.0,
            MARGIN - 31.0 + 14.0 * s as f64,
            escape(label)
        )?;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
