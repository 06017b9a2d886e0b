//! Per-sampler statistics of a result table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::plot::ZERO_TOL;
use crate::table::ResultTable;

pub const QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub series: String,
    pub sampler: String,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Values at [`QUANTILES`], linearly interpolated.
    pub quantiles: Vec<f64>,
    /// Share of values within `1e-9` of zero.
    pub fraction_zero: f64,
    /// For set-size metrics, share of values equal to the bandwidth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction_equal_bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub experiment: String,
    pub metrics: Vec<MetricSummary>,
}

impl Summary {
    pub fn find(&self, series: &str, sampler: &str, metric: &str) -> Option<&MetricSummary> {
        self.metrics
            .iter()
            .find(|m| m.series == series && m.sampler == sampler && m.metric == metric)
    }
}

/// Quantile of sorted data by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn is_set_size_metric(metric: &str) -> bool {
    metric.starts_with("set_size@") || metric.starts_with("greedy_size@")
}

/// Groups rows by (series, sampler, metric) in first-seen order.
pub fn summarize(table: &ResultTable, bandwidth: Option<usize>) -> Result<Summary> {
    if table.rows.is_empty() {
        return Err(gsp_core::Error::Parameter("cannot summarize an empty table".into()).into());
    }
    let mut order = Vec::new();
    let mut groups: BTreeMap<(&str, &str, &str), Vec<f64>> = BTreeMap::new();
    for r in &table.rows {
        let key = (r.series.as_str(), r.sampler.as_str(), r.metric.as_str());
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.value);
    }
    let metrics = order
        .into_iter()
        .map(|key| {
            let mut v = groups.remove(&key).expect("grouped above");
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let mean = v.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let share = |pred: &dyn Fn(f64) -> bool| {
                v.iter().filter(|&&x| pred(x)).count() as f64 / n as f64
            };
            let fraction_equal_bandwidth = match bandwidth {
                Some(k) if is_set_size_metric(key.2) => Some(share(&|x| x == k as f64)),
                _ => None,
            };
            MetricSummary {
                series: key.0.to_string(),
                sampler: key.1.to_string(),
                metric: key.2.to_string(),
                count: n,
                mean,
                median: quantile(&v, 0.5),
                std,
                min: v[0],
                max: v[n - 1],
                quantiles: QUANTILES.iter().map(|&q| quantile(&v, q)).collect(),
                fraction_zero: share(&|x| x.abs() <= ZERO_TOL),
                fraction_equal_bandwidth,
            }
        })
        .collect();
    Ok(Summary {
        config_hash: table.config_hash.clone(),
        experiment: table.rows[0].experiment.clone(),
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Row;

    fn table(values: &[f64], metric: &str) -> ResultTable {
        ResultTable {
            config_hash: "h".into(),
            rows: values
                .iter()
                .enumerate()
                .map(|(t, &value)| Row {
                    experiment: "fig10-setsize".into(),
                    series: "erdos-renyi".into(),
                    trial: t,
                    sampler: "greedy".into(),
                    set_size: None,
                    metric: metric.into(),
                    value,
                })
                .collect(),
        }
    }

    #[test]
    fn single_row_mean_equals_median() {
        let s = summarize(&table(&[0.3], "m"), None).unwrap();
        let m = &s.metrics[0];
        assert_eq!(m.mean, 0.3);
        assert_eq!(m.median, 0.3);
        assert_eq!(m.std, 0.0);
    }

    #[test]
    fn constant_column_has_zero_std() {
        let s = summarize(&table(&[2.5; 9], "m"), None).unwrap();
        assert_eq!(s.metrics[0].std, 0.0);
        assert_eq!(s.metrics[0].quantiles, vec![2.5; 5]);
    }

    #[test]
    fn empty_table_is_a_parameter_error() {
        let e = summarize(&table(&[], "m"), None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn set_size_share_at_bandwidth() {
        let s = summarize(&table(&[7.0, 7.0, 8.0, 10.0], "set_size@r=0.9"), Some(7)).unwrap();
        assert_eq!(s.metrics[0].fraction_equal_bandwidth, Some(0.5));
        assert_eq!(s.metrics[0].median, 7.5);
        let s = summarize(
            &table(&[0.0, 1e-12, 0.2, 0.4], "relative_suboptimality"),
            Some(7),
        )
        .unwrap();
        assert_eq!(s.metrics[0].fraction_zero, 0.5);
        assert_eq!(s.metrics[0].fraction_equal_bandwidth, None);
    }

    #[test]
    fn known_statistics() {
        let s = summarize(&table(&[1.0, 2.0, 3.0, 4.0], "m"), None).unwrap();
        let m = &s.metrics[0];
        assert_eq!(m.mean, 2.5);
        assert!((m.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((m.quantiles[1] - 1.75).abs() < 1e-15);
    }
}
