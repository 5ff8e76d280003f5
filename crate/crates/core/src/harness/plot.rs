//! Minimal SVG line charts for regret and adoption curves.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::metrics::{curve_transform, normalize_group};
use super::output::write_text;
use super::sweep::SweepResult;
use crate::error::Result;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 220.0;
const MARGIN_Y: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Renders named series against round index on a fixed [0, 1] y axis.
pub fn line_chart(title: &str, y_label: &str, series: &[(String, Vec<f64>)]) -> String {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - 2.0 * MARGIN_Y;
    let n = series.iter().map(|(_, s)| s.len()).max().unwrap_or(0).max(2);
    let x = |i: usize| MARGIN_LEFT + plot_w * i as f64 / (n - 1) as f64;
    let y = |v: f64| MARGIN_Y + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#ddd"/><text x="{2:.2}" y="{3:.2}" text-anchor="end">{v:.2}</text>"##,
            y(v),
            MARGIN_LEFT + plot_w,
            MARGIN_LEFT - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_Y}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">round ({n})</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0:.2}" text-anchor="middle" transform="rotate(-90 16 {0:.2})">{1}</text>"#,
        MARGIN_Y + plot_h / 2.0,
        escape(y_label)
    );
    for (k, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>"#
        );
        let ly = MARGIN_Y + 10.0 + 18.0 * k as f64;
        let lx = MARGIN_LEFT + plot_w + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `regret.svg` (seed-mean regret, `log(x + 1)` and group-normalized) and
/// `adoption.svg` (seed-mean accumulated adoption rate, group-normalized).
pub fn write_sweep_plots(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let names: Vec<String> = result.summary.iter().map(|s| s.arm.clone()).collect();
    let regret: Vec<Vec<f64>> = names
        .iter()
        .map(|a| result.mean_curve(a, |r| r.cum_expected_regret.max(0.0)))
        .collect();
    let adoption: Vec<Vec<f64>> = names
        .iter()
        .map(|a| result.mean_curve(a, |r| r.cum_adoption_rate))
        .collect();
    let label = |group: Vec<Vec<f64>>| names.iter().cloned().zip(group).collect::<Vec<_>>();
    let regret_svg = line_chart(
        "Accumulated expected regret",
        "log(1 + regret), normalized",
        &label(curve_transform(&regret)?),
    );
    let adoption_svg = line_chart(
        "Accumulated adoption rate",
        "adoption rate, normalized",
        &label(normalize_group(&adoption)),
    );
    Ok(vec![
        write_text(&dir.join("regret.svg"), &regret_svg)?,
        write_text(&dir.join("adoption.svg"), &adoption_svg)?,
    ])
}
