//! Long-format result rows and their CSV encoding.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CSV_HEADER: [&str; 8] = [
    "config_hash",
    "experiment",
    "series",
    "trial",
    "sampler",
    "set_size",
    "metric_name",
    "value",
];

/// Observed MSE metrics that must lie between the bound rows of the same trial and size.
pub const OBSERVED_MSE_METRICS: [&str; 3] = ["min_mse", "max_mse", "greedy_mse"];
pub const LOWER_BOUND_METRIC: &str = "lower_bound";
pub const UPPER_BOUND_METRIC: &str = "upper_bound";

/// Relative slack for the bound recheck; the bounds are attained with equality
/// for a one-dimensional band.
pub const BOUND_CHECK_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub experiment: String,
    pub series: String,
    pub trial: usize,
    pub sampler: String,
    pub set_size: Option<usize>,
    pub metric: String,
    pub value: f64,
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub config_hash: String,
    pub rows: Vec<Row>,
}

/// Contents of `metadata.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config_hash: String,
    pub version: String,
    pub experiment: String,
    pub rows: usize,
    pub bandwidth: usize,
    pub config: serde_json::Value,
}

impl ResultTable {
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let trial = r.trial.to_string();
            let size = r.set_size.map(|s| s.to_string()).unwrap_or_default();
            let value = format_float(r.value);
            w.write_record([
                self.config_hash.as_str(),
                &r.experiment,
                &r.series,
                &trial,
                &r.sampler,
                &size,
                &r.metric,
                &value,
            ])?;
        }
        w.flush().map_err(|e| CliError::io("<csv output>", e))?;
        Ok(())
    }

    /// Parses a table; every row must carry the same config hash.
    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        if header.iter().ne(CSV_HEADER) {
            return Err(CliError::Check(format!(
                "unexpected CSV header {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut hash: Option<String> = None;
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| CliError::Check(format!("row {}: bad {what}", line + 1));
            match &hash {
                Some(h) if h != &rec[0] => {
                    return Err(CliError::Check(format!(
                        "row {} has config hash {}, expected {h}",
                        line + 1,
                        &rec[0]
                    )))
                }
                Some(_) => {}
                None => hash = Some(rec[0].to_string()),
            }
            rows.push(Row {
                experiment: rec[1].to_string(),
                series: rec[2].to_string(),
                trial: rec[3].parse().map_err(|_| bad("trial"))?,
                sampler: rec[4].to_string(),
                set_size: match &rec[5] {
                    "" => None,
                    s => Some(s.parse().map_err(|_| bad("set_size"))?),
                },
                metric: rec[6].to_string(),
                value: rec[7].parse().map_err(|_| bad("value"))?,
            });
        }
        Ok(Self {
            config_hash: hash.unwrap_or_default(),
            rows,
        })
    }

    /// Every observed MSE row must satisfy `lower ≤ MSE ≤ upper` against the
    /// bound rows of its trial and set size.
    pub fn check_bounds(&self) -> Result<usize> {
        type Key<'a> = (&'a str, usize, Option<usize>);
        let mut lower: BTreeMap<Key, f64> = BTreeMap::new();
        let mut upper: BTreeMap<Key, f64> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.series.as_str(), r.trial, r.set_size);
            match r.metric.as_str() {
                LOWER_BOUND_METRIC => {
                    lower.insert(key, r.value);
                }
                UPPER_BOUND_METRIC => {
                    upper.insert(key, r.value);
                }
                _ => {}
            }
        }
        let mut checked = 0;
        for r in &self.rows {
            if !OBSERVED_MSE_METRICS.contains(&r.metric.as_str()) {
                continue;
            }
            let key = (r.series.as_str(), r.trial, r.set_size);
            let slack = 1.0 + BOUND_CHECK_SLACK;
            if let Some(&lo) = lower.get(&key) {
                if lo > r.value * slack {
                    return Err(CliError::Check(format!(
                        "{} trial {} size {:?}: {} = {} is below the lower bound {lo}",
                        r.series, r.trial, r.set_size, r.metric, r.value
                    )));
                }
                checked += 1;
            }
            if let Some(&hi) = upper.get(&key) {
                if r.value > hi * slack {
                    return Err(CliError::Check(format!(
                        "{} trial {} size {:?}: {} = {} exceeds the upper bound {hi}",
                        r.series, r.trial, r.set_size, r.metric, r.value
                    )));
                }
                checked += 1;
            }
        }
        Ok(checked)
    }

    /// Rows of one metric, in table order.
    pub fn metric<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.metric == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(metric: &str, size: Option<usize>, value: f64) -> Row {
        Row {
            experiment: "fig1-bounds".into(),
            series: "erdos-renyi".into(),
            trial: 0,
            sampler: "exhaustive".into(),
            set_size: size,
            metric: metric.into(),
            value,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = ResultTable {
            config_hash: "abc".into(),
            rows: vec![
                row("min_mse", Some(3), 0.1 + 0.2),
                row("alpha_exact", None, std::f64::consts::PI),
                row("tiny", Some(0), 5e-324),
            ],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "config_hash,experiment,series,trial,sampler,set_size,metric_name,value\n"
        ));
        assert!(text.contains("3.0000000000000004e-1"), "{text}");
        let back = ResultTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn mixed_hashes_are_rejected() {
        let text = "config_hash,experiment,series,trial,sampler,set_size,metric_name,value\n\
                    a,e,s,0,g,,m,1.0\n\
                    b,e,s,1,g,,m,1.0\n";
        assert!(ResultTable::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn bound_check_catches_violations() {
        let mut t = ResultTable {
            config_hash: "h".into(),
            rows: vec![
                row(LOWER_BOUND_METRIC, Some(2), 1.0),
                row(UPPER_BOUND_METRIC, Some(2), 3.0),
                row("min_mse", Some(2), 2.0),
                row("greedy_mse", Some(2), 2.5),
            ],
        };
        assert_eq!(t.check_bounds().unwrap(), 4);
        t.rows.push(row("max_mse", Some(2), 3.5));
        assert!(t.check_bounds().is_err());
        t.rows.pop();
        t.rows.push(row("min_mse", Some(2), 0.5));
        assert!(t.check_bounds().is_err());
    }
}
