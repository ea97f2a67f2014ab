//! Self-contained SVG line charts for training curves.
//!
//! No plotting dependency: the output is a fixed-layout document with one
//! polyline per series, deterministic for identical inputs.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::csvio::MetricsRow;

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 200.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 62.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
];

fn fmt(v: f64) -> String {
    // Fixed short formatting keeps coordinates byte-stable.
    format!("{:.3}", v)
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{}", v.round() as i64)
    } else {
        let s = format!("{:.3}", v);
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Render a line chart with labelled axes and a legend.
pub fn render_line_chart(
    series: &[Series],
    title: &str,
    x_label: &str,
    y_label: &str,
) -> Result<String> {
    if series.is_empty() {
        bail!("no series to plot");
    }
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    if !x_min.is_finite() {
        bail!("series contain no points");
    }
    if (x_max - x_min).abs() < 1e-12 {
        x_max = x_min + 1.0;
    }
    if (y_max - y_min).abs() < 1e-12 {
        y_max = y_min + 1.0;
    }
    // A little headroom on y.
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| MARGIN_T + plot_h - (y - y_min) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        title
    ));

    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(MARGIN_T + plot_h),
        fmt(MARGIN_L + plot_w),
        fmt(MARGIN_T + plot_h)
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(MARGIN_L),
        fmt(MARGIN_T + plot_h)
    ));

    // Ticks and grid.
    const TICKS: usize = 5;
    for i in 0..=TICKS {
        let fx = i as f64 / TICKS as f64;
        let xv = x_min + fx * (x_max - x_min);
        let yv = y_min + fx * (y_max - y_min);
        let x = sx(xv);
        let y = sy(yv);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            fmt(x),
            fmt(MARGIN_T),
            fmt(x),
            fmt(MARGIN_T + plot_h)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            fmt(x),
            fmt(MARGIN_T + plot_h + 18.0),
            fmt_tick(xv)
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            fmt(MARGIN_L - 6.0),
            fmt(y + 4.0),
            fmt_tick(yv)
        ));
    }

    // Axis labels.
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 14.0,
        x_label
    ));
    svg.push_str(&format!(
        "<text x=\"20\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 20 {})\">{}</text>\n",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        y_label
    ));

    // Series.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> =
            s.points.iter().map(|&(x, y)| format!("{},{}", fmt(sx(x)), fmt(sy(y)))).collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            color,
            coords.join(" ")
        ));
        let ly = MARGIN_T + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            fmt(MARGIN_L + plot_w + 12.0),
            fmt(ly),
            fmt(MARGIN_L + plot_w + 34.0),
            fmt(ly),
            color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            fmt(MARGIN_L + plot_w + 40.0),
            fmt(ly + 4.0),
            s.name
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Build one series per (run_id, dim): trials averaged per evaluation point,
/// then smoothed at render time.
fn curve_series(
    rows: &[MetricsRow],
    select: impl Fn(&MetricsRow) -> f64,
    weight: f64,
) -> Vec<Series> {
    let mut groups: BTreeMap<(String, usize), BTreeMap<u64, Vec<f64>>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.run_id.clone(), row.dim))
            .or_default()
            .entry(row.episode)
            .or_default()
            .push(select(row));
    }
    groups
        .into_iter()
        .map(|((run_id, dim), by_episode)| {
            let episodes: Vec<f64> = by_episode.keys().map(|&e| e as f64).collect();
            let means: Vec<f64> = by_episode
                .values()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
                .collect();
            let smoothed = routenav::eval::smooth_curve(&means, weight);
            Series {
                name: format!("{run_id} d={dim}"),
                points: episodes.into_iter().zip(smoothed).collect(),
            }
        })
        .collect()
}

/// Render the paper-style pair of panels (average reward and agent steps vs
/// episodes) from one or more metrics CSV files. Returns the written paths.
pub fn render_training_curves(
    csv_paths: &[std::path::PathBuf],
    weight: f64,
    out_dir: &Path,
) -> Result<Vec<std::path::PathBuf>> {
    let mut rows = Vec::new();
    for p in csv_paths {
        rows.extend(crate::csvio::read_metrics(p)?);
    }
    if rows.is_empty() {
        bail!("no metrics rows in {:?}", csv_paths);
    }
    let reward = curve_series(&rows, |r| r.mean_reward, weight);
    let steps = curve_series(&rows, |r| r.mean_steps, weight);

    let reward_path = out_dir.join("reward_curves.svg");
    let steps_path = out_dir.join("steps_curves.svg");
    std::fs::write(
        &reward_path,
        render_line_chart(&reward, "Average reward", "episodes", "average reward")?,
    )
    .with_context(|| format!("writing {}", reward_path.display()))?;
    std::fs::write(
        &steps_path,
        render_line_chart(&steps, "Agent steps", "episodes", "agent steps")?,
    )
    .with_context(|| format!("writing {}", steps_path.display()))?;
    Ok(vec![reward_path, steps_path])
}
