//! `(x, y)` series derived from result rows, ready for any plotting tool.

use std::collections::BTreeMap;
use std::io::Write;

use crate::config::ExperimentId;
use crate::error::{CliError, Result};
use crate::table::{format_float, Row};

/// Values at or below this count as exactly zero suboptimality.
pub const ZERO_TOL: f64 = 1e-9;
pub const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub series: String,
    pub sampler: String,
    /// `curve`, `histogram`, `distribution` or `scatter`.
    pub kind: &'static str,
    pub metric: String,
    pub x: f64,
    pub y: f64,
}

enum Shape {
    /// Mean over trials against set size.
    Curve,
    /// Counts on `[0, 1]`, with exact zeros in their own bin at `x = 0`.
    Histogram,
    /// Counts of each distinct value.
    Distribution,
}

fn shape(experiment: ExperimentId, metric: &str) -> Option<Shape> {
    use ExperimentId::*;
    match (experiment, metric) {
        (Fig1Bounds | Fig5GreedyVsBound, "min_mse" | "max_mse" | "greedy_mse")
        | (Fig1Bounds | Fig5GreedyVsBound, "lower_bound" | "upper_bound")
        | (Fig1Bounds, "optimal_size" | "size_bound")
        | (Fig6Alpha, "relative_suboptimality" | "guarantee" | "guarantee_exact_alpha")
        | (KpcaDemo, "projection_error") => Some(Shape::Curve),
        (Fig78Subopt | Fig9Logdet, "relative_suboptimality" | "logdet_relative_suboptimality") => {
            Some(Shape::Histogram)
        }
        (Fig10Setsize, m) if m.starts_with("set_size@") => Some(Shape::Distribution),
        (Fig5GreedyVsBound, m) if m.starts_with("greedy_size@") => Some(Shape::Distribution),
        _ => None,
    }
}

type Group<'a> = (&'a str, &'a str, &'a str);

pub fn plot_points(experiment: ExperimentId, rows: &[Row]) -> Vec<PlotPoint> {
    let mut curves: BTreeMap<(Group, usize), (f64, usize)> = BTreeMap::new();
    let mut hists: BTreeMap<Group, Vec<f64>> = BTreeMap::new();
    let mut dists: BTreeMap<Group, BTreeMap<u64, usize>> = BTreeMap::new();
    for r in rows {
        let key = (r.series.as_str(), r.sampler.as_str(), r.metric.as_str());
        match shape(experiment, &r.metric) {
            Some(Shape::Curve) => {
                if let Some(m) = r.set_size {
                    let e = curves.entry((key, m)).or_insert((0.0, 0));
                    e.0 += r.value;
                    e.1 += 1;
                }
            }
            Some(Shape::Histogram) => hists.entry(key).or_default().push(r.value),
            Some(Shape::Distribution) => {
                *dists
                    .entry(key)
                    .or_default()
                    .entry(r.value.to_bits())
                    .or_insert(0) += 1;
            }
            None => {}
        }
    }

    let point = |(series, sampler, metric): Group, kind, x, y| PlotPoint {
        series: series.to_string(),
        sampler: sampler.to_string(),
        kind,
        metric: metric.to_string(),
        x,
        y,
    };
    let mut out = Vec::new();
    for ((key, m), (sum, count)) in curves {
        out.push(point(key, "curve", m as f64, sum / count as f64));
    }
    for (key, values) in hists {
        let mut counts = [0usize; HISTOGRAM_BINS];
        let mut zeros = 0;
        for v in values {
            if v <= ZERO_TOL {
                zeros += 1;
            } else {
                let b = ((v * HISTOGRAM_BINS as f64).ceil() as usize).clamp(1, HISTOGRAM_BINS) - 1;
                counts[b] += 1;
            }
        }
        out.push(point(key, "histogram", 0.0, zeros as f64));
        let width = 1.0 / HISTOGRAM_BINS as f64;
        for (b, c) in counts.into_iter().enumerate() {
            out.push(point(key, "histogram", (b as f64 + 0.5) * width, c as f64));
        }
    }
    for (key, counts) in dists {
        let mut entries: Vec<(f64, usize)> = counts
            .into_iter()
            .map(|(b, c)| (f64::from_bits(b), c))
            .collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (x, c) in entries {
            out.push(point(key, "distribution", x, c as f64));
        }
    }
    out
}

/// Scatter pairs `(alpha_exact, bound)` per trial.
pub fn alpha_scatter(rows: &[Row]) -> Vec<PlotPoint> {
    let mut exact: BTreeMap<(&str, usize), f64> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == "alpha_exact") {
        exact.insert((r.series.as_str(), r.trial), r.value);
    }
    rows.iter()
        .filter(|r| r.metric == "alpha_lb_homoscedastic" || r.metric == "alpha_lb_general")
        .filter_map(|r| {
            exact
                .get(&(r.series.as_str(), r.trial))
                .map(|&x| PlotPoint {
                    series: r.series.clone(),
                    sampler: r.sampler.clone(),
                    kind: "scatter",
                    metric: r.metric.clone(),
                    x,
                    y: r.value,
                })
        })
        .collect()
}

pub fn write_plot_csv(
    experiment: ExperimentId,
    points: &[PlotPoint],
    out: impl Write,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment",
        "series",
        "sampler",
        "kind",
        "metric",
        "x",
        "y",
    ])?;
    for p in points {
        w.write_record([
            experiment.as_str(),
            &p.series,
            &p.sampler,
            p.kind,
            &p.metric,
            &format_float(p.x),
            &format_float(p.y),
        ])?;
    }
    w.flush().map_err(|e| CliError::io("<plot output>", e))?;
    Ok(())
}
