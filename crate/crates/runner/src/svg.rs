//! Standalone SVG plots of trajectory series.
//!
//! One polyline per requested series on shared, linear, auto-scaled axes,
//! with tick labels and a legend. Output is a pure function of the input
//! samples, so identical trajectories render byte-identically.

use std::fmt::Write as _;
use std::path::Path;

use rlvrsim_core::TrajectorySample;

use crate::csvio::write_atomic;
use crate::error::{Result, RunnerError};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const TICKS: usize = 5;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// Values of one named series across the samples.
fn series_values(samples: &[TrajectorySample], k: usize, name: &str) -> Result<Vec<f64>> {
    if name == "acc" {
        return Ok(samples.iter().map(|s| s.acc).collect());
    }
    if name == "dacc" {
        return Ok(samples.iter().map(|s| s.dacc).collect());
    }
    if let Some(rest) = name.strip_prefix("pi_") {
        if let Ok(i) = rest.parse::<usize>() {
            if i >= 1 && i <= k {
                return Ok(samples.iter().map(|s| s.probs[i - 1]).collect());
            }
        }
    }
    Err(RunnerError::Validation(format!(
        "unknown series {name:?}; available: t, acc, dacc, pi_1..pi_{k}"
    )))
}

/// Extent of `values`, padded so a constant series still spans a band.
fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Renders the samples' series into an SVG document and writes it
/// atomically to `path`.
pub fn emit_svg(
    samples: &[TrajectorySample],
    k: usize,
    series: &[String],
    path: &Path,
) -> Result<()> {
    if series.is_empty() {
        return Err(RunnerError::Validation(
            "at least one series is required".into(),
        ));
    }
    let values: Vec<Vec<f64>> = series
        .iter()
        .map(|name| series_values(samples, k, name))
        .collect::<Result<_>>()?;

    let (t_lo, t_hi) = extent(samples.iter().map(|s| s.t));
    let (y_lo, y_hi) = extent(values.iter().flatten().copied());
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x = |t: f64| MARGIN_LEFT + (t - t_lo) / (t_hi - t_lo) * plot_w;
    let y = |v: f64| MARGIN_TOP + (y_hi - v) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    );

    // Axes with tick marks and labels.
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    let _ = write!(
        svg,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    );
    for i in 0..=TICKS {
        let frac = i as f64 / TICKS as f64;
        let tv = t_lo + frac * (t_hi - t_lo);
        let xv = x(tv);
        let _ = write!(
            svg,
            "<line x1=\"{xv}\" y1=\"{y0}\" x2=\"{xv}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{xv}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{tv}</text>\n",
            y0 + 5.0,
            y0 + 20.0
        );
        let vv = y_lo + frac * (y_hi - y_lo);
        let yv = y(vv);
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{yv}\" x2=\"{x0}\" y2=\"{yv}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{vv}</text>\n",
            x0 - 5.0,
            x0 - 8.0,
            yv + 4.0
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">t</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 10.0
    );

    // One polyline per series plus its legend entry.
    for (idx, (name, vals)) in series.iter().zip(&values).enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let points: Vec<String> = samples
            .iter()
            .zip(vals)
            .map(|(s, &v)| format!("{},{}", x(s.t), y(v)))
            .collect();
        let _ = write!(
            svg,
            "<polyline data-name=\"{name}\" fill=\"none\" stroke=\"{color}\" \
             stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        );
        let ly = MARGIN_TOP + 18.0 * idx as f64 + 10.0;
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"3\"/>\n\
             <text x=\"{}\" y=\"{}\" font-size=\"12\">{name}</text>\n",
            x1 + 10.0,
            x1 + 34.0,
            x1 + 40.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    write_atomic(path, &svg)
}
