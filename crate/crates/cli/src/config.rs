//! Experiment configuration: JSON files layered over per-experiment presets.

use std::fmt;
use std::path::PathBuf;

use gsp_core::samplers::{binomial, DEFAULT_EXHAUSTIVE_CAP};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{config, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "fig1-bounds")]
    Fig1Bounds,
    #[serde(rename = "fig5-greedy-vs-bound")]
    Fig5GreedyVsBound,
    #[serde(rename = "fig6-alpha")]
    Fig6Alpha,
    #[serde(rename = "fig7-8-subopt")]
    Fig78Subopt,
    #[serde(rename = "fig9-logdet")]
    Fig9Logdet,
    #[serde(rename = "fig10-setsize")]
    Fig10Setsize,
    #[serde(rename = "kpca-demo")]
    KpcaDemo,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::Fig1Bounds,
        ExperimentId::Fig5GreedyVsBound,
        ExperimentId::Fig6Alpha,
        ExperimentId::Fig78Subopt,
        ExperimentId::Fig9Logdet,
        ExperimentId::Fig10Setsize,
        ExperimentId::KpcaDemo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Fig1Bounds => "fig1-bounds",
            ExperimentId::Fig5GreedyVsBound => "fig5-greedy-vs-bound",
            ExperimentId::Fig6Alpha => "fig6-alpha",
            ExperimentId::Fig78Subopt => "fig7-8-subopt",
            ExperimentId::Fig9Logdet => "fig9-logdet",
            ExperimentId::Fig10Setsize => "fig10-setsize",
            ExperimentId::KpcaDemo => "kpca-demo",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match Self::ALL.into_iter().find(|e| e.as_str() == s) {
            Some(e) => Ok(e),
            None => config(format!(
                "unknown experiment {s:?}; expected one of {}",
                Self::ALL.map(|e| e.as_str()).join(", ")
            )),
        }
    }

    /// Samplers the experiment knows how to evaluate.
    pub fn supported_samplers(self) -> &'static [SamplerKind] {
        use SamplerKind::*;
        match self {
            ExperimentId::Fig1Bounds
            | ExperimentId::Fig5GreedyVsBound
            | ExperimentId::Fig6Alpha => &[Greedy],
            ExperimentId::Fig78Subopt => &[Greedy, GreedyLogdet, Uniform, Leverage, RankLeverage],
            ExperimentId::Fig9Logdet => &[Greedy, GreedyLogdet],
            ExperimentId::Fig10Setsize | ExperimentId::KpcaDemo => {
                &[Greedy, Uniform, Leverage, RankLeverage]
            }
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphModel {
    ErdosRenyi,
    PreferentialAttachment,
    RandomWeighted,
}

impl GraphModel {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphModel::ErdosRenyi => gsp_core::graphs::ERDOS_RENYI,
            GraphModel::PreferentialAttachment => gsp_core::graphs::PREFERENTIAL_ATTACHMENT,
            GraphModel::RandomWeighted => gsp_core::graphs::RANDOM_WEIGHTED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Greedy,
    GreedyLogdet,
    Uniform,
    Leverage,
    RankLeverage,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Greedy => "greedy",
            SamplerKind::GreedyLogdet => "greedy-logdet",
            SamplerKind::Uniform => "uniform",
            SamplerKind::Leverage => "leverage",
            SamplerKind::RankLeverage => "rank-leverage",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// One series per model.
    pub models: Vec<GraphModel>,
    pub n: usize,
    /// Edge probability for Erdős–Rényi graphs.
    pub edge_probability: f64,
}

/// Noise variances `Λ_w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseConfig {
    /// `σ_w² I` for each listed level; each level is its own series.
    Levels(Vec<f64>),
    /// Per-node variances drawn uniformly from `[lo, hi]` in every trial.
    PerNodeUniform([f64; 2]),
    /// One `σ_w²` per trial, log-uniform on `[lo, hi]`.
    PerTrialLogUniform([f64; 2]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformConfig {
    Identity,
    /// `rows × n` matrix of independent standard normal entries, redrawn per trial.
    Gaussian {
        rows: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    /// `Λ = signal_variance · I`.
    pub signal_variance: f64,
    pub noise: NoiseConfig,
    pub transform: TransformConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpcaConfig {
    pub train: usize,
    pub test: usize,
    /// Radial noise of the two-circle data.
    pub radial_noise: f64,
    /// Polynomial kernel degree.
    pub degree: u32,
    pub components: usize,
    pub sigma_w2: f64,
    /// Landmark counts to evaluate.
    pub budgets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub graph: GraphConfig,
    /// `|K|`.
    pub bandwidth: usize,
    pub prior: PriorConfig,
    /// Sampling budget `ℓ`; defaults to `|K|` (to `n` for the greedy-vs-bound run).
    pub budget: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    pub samplers: Vec<SamplerKind>,
    /// MSE reduction fractions, relative to the empty set, used as targets.
    pub reductions: Vec<f64>,
    pub exhaustive_cap: u64,
    pub alpha_max_nodes: usize,
    pub kpca: KpcaConfig,
    pub output: Option<PathBuf>,
}

fn homoscedastic(levels: &[f64]) -> PriorConfig {
    PriorConfig {
        signal_variance: 1.0,
        noise: NoiseConfig::Levels(levels.to_vec()),
        transform: TransformConfig::Identity,
    }
}

const ALL_MODELS: [GraphModel; 3] = [
    GraphModel::ErdosRenyi,
    GraphModel::PreferentialAttachment,
    GraphModel::RandomWeighted,
];

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn preset(id: ExperimentId) -> Self {
        use SamplerKind::*;
        let mut c = ExperimentConfig {
            experiment: id,
            graph: GraphConfig {
                models: ALL_MODELS.to_vec(),
                n: 20,
                edge_probability: 0.2,
            },
            bandwidth: 5,
            prior: homoscedastic(&[1e-2]),
            budget: None,
            trials: 200,
            seed: 1,
            samplers: vec![Greedy],
            reductions: vec![0.9],
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP as u64,
            alpha_max_nodes: gsp_core::alpha::DEFAULT_ALPHA_MAX_NODES,
            kpca: KpcaConfig {
                train: 200,
                test: 100,
                radial_noise: 0.1,
                degree: 2,
                components: 4,
                sigma_w2: 1e-6,
                budgets: vec![4, 8, 16, 32],
            },
            output: None,
        };
        match id {
            ExperimentId::Fig1Bounds => {}
            ExperimentId::Fig5GreedyVsBound => {
                c.graph.n = 500;
                c.bandwidth = 20;
                c.trials = 1;
                c.reductions = vec![0.5, 0.75, 0.9, 0.95, 0.99];
            }
            ExperimentId::Fig6Alpha => {
                c.graph.models = vec![GraphModel::ErdosRenyi];
                c.graph.n = 8;
                c.bandwidth = 3;
                c.trials = 100;
                c.prior.noise = NoiseConfig::PerTrialLogUniform([1e-2, 1e2]);
            }
            ExperimentId::Fig78Subopt => {
                c.prior = homoscedastic(&[1e2, 1e-2]);
                c.samplers = vec![Greedy, Uniform, Leverage, RankLeverage];
            }
            ExperimentId::Fig9Logdet => {
                c.samplers = vec![Greedy, GreedyLogdet];
            }
            ExperimentId::Fig10Setsize => {
                c.graph.n = 100;
                c.bandwidth = 7;
                c.samplers = vec![Greedy, Uniform, Leverage, RankLeverage];
            }
            ExperimentId::KpcaDemo => {
                c.trials = 10;
                c.samplers = vec![Greedy, Uniform, RankLeverage];
            }
        }
        c
    }

    /// Reads a JSON config, filling missing fields from the experiment's preset.
    pub fn from_json(text: &str) -> Result<Self> {
        let user: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("config is not valid JSON: {e}")))?;
        let id = match user.get("experiment").and_then(Value::as_str) {
            Some(s) => ExperimentId::parse(s)?,
            None => return config("config must name an \"experiment\""),
        };
        let mut merged = serde_json::to_value(Self::preset(id))?;
        merge(&mut merged, user);
        let cfg: Self = serde_json::from_value(merged)
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn budget(&self) -> usize {
        match (self.budget, self.experiment) {
            (Some(b), _) => b,
            (None, ExperimentId::Fig5GreedyVsBound) => self.graph.n,
            (None, _) => self.bandwidth,
        }
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let canonical = Self {
            output: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.n;
        if self.trials == 0 {
            return config("trials must be at least 1");
        }
        if self.graph.models.is_empty() {
            return config("graph.models must list at least one model");
        }
        if n < 2 {
            return config(format!("graph.n must be at least 2, got {n}"));
        }
        if !(0.0..=1.0).contains(&self.graph.edge_probability) {
            return config("graph.edge_probability must lie in [0, 1]");
        }
        if self.experiment != ExperimentId::KpcaDemo && !(1..=n).contains(&self.bandwidth) {
            return config(format!(
                "bandwidth must be in 1..={n}, got {}",
                self.bandwidth
            ));
        }
        if !(self.prior.signal_variance > 0.0 && self.prior.signal_variance.is_finite()) {
            return config("prior.signal_variance must be positive");
        }
        match &self.prior.noise {
            NoiseConfig::Levels(levels) => {
                if levels.is_empty() {
                    return config("prior.noise.levels must not be empty");
                }
                if levels.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return config("noise levels must be positive and finite");
                }
            }
            NoiseConfig::PerNodeUniform([lo, hi]) | NoiseConfig::PerTrialLogUniform([lo, hi]) => {
                if !(*lo > 0.0 && lo <= hi && hi.is_finite()) {
                    return config(format!(
                        "noise range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
                    ));
                }
            }
        }
        if let TransformConfig::Gaussian { rows } = self.prior.transform {
            if rows < self.bandwidth {
                return config(format!(
                    "a Gaussian transform needs at least |K| = {} rows, got {rows}",
                    self.bandwidth
                ));
            }
        }
        if self.samplers.is_empty() {
            return config("samplers must not be empty");
        }
        let supported = self.experiment.supported_samplers();
        if let Some(s) = self.samplers.iter().find(|s| !supported.contains(s)) {
            return config(format!(
                "{} does not support sampler {}",
                self.experiment,
                s.as_str()
            ));
        }
        if self.reductions.is_empty() || self.reductions.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
            return config("reductions must be a nonempty list of fractions in (0, 1)");
        }
        let budget = self.budget();
        if self.experiment != ExperimentId::KpcaDemo && !(1..=n).contains(&budget) {
            return config(format!("budget must be in 1..={n}, got {budget}"));
        }
        if self.experiment == ExperimentId::KpcaDemo {
            self.validate_kpca()?;
        }
        self.check_feasible()
    }

    fn validate_kpca(&self) -> Result<()> {
        let k = &self.kpca;
        if k.train < 2 || k.test == 0 {
            return config("kpca needs at least 2 training and 1 test point");
        }
        if k.degree == 0 {
            return config("kpca.degree must be at least 1");
        }
        if !(1..=k.train).contains(&k.components) {
            return config(format!("kpca.components must be in 1..={}", k.train));
        }
        if !(k.sigma_w2 > 0.0 && k.sigma_w2.is_finite()) {
            return config("kpca.sigma_w2 must be positive");
        }
        if !(k.radial_noise >= 0.0 && k.radial_noise.is_finite()) {
            return config("kpca.radial_noise must be nonnegative");
        }
        if k.budgets.is_empty() || k.budgets.iter().any(|b| !(1..=k.train).contains(b)) {
            return config(format!("kpca.budgets must lie in 1..={}", k.train));
        }
        Ok(())
    }

    /// Rejects runs whose exhaustive oracle would exceed the cap before any work starts.
    fn check_feasible(&self) -> Result<()> {
        let n = self.graph.n;
        let cap = self.exhaustive_cap as u128;
        let required: u128 = match self.experiment {
            ExperimentId::Fig1Bounds => (0..=n).map(|m| binomial(n, m)).sum(),
            ExperimentId::Fig78Subopt | ExperimentId::Fig9Logdet => binomial(n, self.budget()),
            ExperimentId::Fig6Alpha => {
                if n > self.alpha_max_nodes {
                    return Err(gsp_core::Error::Infeasible {
                        required: triple_count(n),
                        cap: triple_count(self.alpha_max_nodes),
                    }
                    .into());
                }
                (1..=self.budget()).map(|m| binomial(n, m)).sum()
            }
            _ => 0,
        };
        if required > cap {
            return Err(gsp_core::Error::Infeasible { required, cap }.into());
        }
        Ok(())
    }
}

/// Size of the `3ⁿ·n` enumeration behind the exact α search.
fn triple_count(n: usize) -> u128 {
    3u128
        .checked_pow(n as u32)
        .and_then(|p| p.checked_mul(n as u128))
        .unwrap_or(u128::MAX)
}

/// Recursively overlays `over` onto `base`; arrays and scalars are replaced.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for id in ExperimentId::ALL {
            ExperimentConfig::preset(id).validate().unwrap();
        }
    }

    #[test]
    fn partial_config_takes_preset_defaults() {
        let c =
            ExperimentConfig::from_json(r#"{"experiment": "fig6-alpha", "trials": 7}"#).unwrap();
        assert_eq!(c.trials, 7);
        assert_eq!(c.graph.n, 8);
        assert_eq!(c.bandwidth, 3);
    }

    #[test]
    fn nested_objects_merge_field_by_field() {
        let c = ExperimentConfig::from_json(
            r#"{"experiment": "fig1-bounds", "graph": {"n": 12}, "bandwidth": 4}"#,
        )
        .unwrap();
        assert_eq!(c.graph.n, 12);
        assert_eq!(c.graph.models.len(), 3);
        assert_eq!(c.graph.edge_probability, 0.2);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"trials": 3}"#,
            r#"{"experiment": "fig99"}"#,
            r#"{"experiment": "fig6-alpha", "trials": 0}"#,
            r#"{"experiment": "fig6-alpha", "bogus": 1}"#,
            r#"{"experiment": "fig6-alpha", "samplers": ["uniform"]}"#,
            r#"{"experiment": "fig10-setsize", "prior": {"noise": {"levels": [-1.0]}}}"#,
            r#"{"experiment": "fig10-setsize", "bandwidth": 101}"#,
            "not json",
        ] {
            let e = ExperimentConfig::from_json(text).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{text}: {e}");
        }
    }

    #[test]
    fn infeasible_exhaustive_runs_fail_before_starting() {
        let e = ExperimentConfig::from_json(
            r#"{"experiment": "fig7-8-subopt", "graph": {"n": 60}, "bandwidth": 10}"#,
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert!(e.to_string().contains("2000000"), "{e}");

        let e = ExperimentConfig::from_json(r#"{"experiment": "fig6-alpha", "graph": {"n": 13}}"#)
            .unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn hash_ignores_output_but_tracks_seed() {
        let a = ExperimentConfig::preset(ExperimentId::Fig6Alpha);
        let b = ExperimentConfig {
            output: Some("elsewhere".into()),
            ..a.clone()
        };
        let c = ExperimentConfig {
            seed: 2,
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn preset_round_trips_through_json() {
        for id in ExperimentId::ALL {
            let c = ExperimentConfig::preset(id);
            let text = serde_json::to_string(&c).unwrap();
            assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
        }
    }
}
