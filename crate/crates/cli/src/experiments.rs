//! One trial of each experiment, producing long-format rows.

use gsp_core::alpha::{alpha_estimate, greedy_guarantee, relative_suboptimality};
use gsp_core::bounds::BoundsReport;
use gsp_core::graphs::{
    gen_erdos_renyi, gen_preferential_attachment, gen_random_weighted, spectral_basis, Graph,
};
use gsp_core::interp::mse;
use gsp_core::kpca::{
    build_projector_with_set, gram_matrix, kpca_basis, kpca_project, sub_project, two_circles,
    PolyKernel,
};
use gsp_core::rng::{rng_from_seed, sub_seed};
use gsp_core::samplers::{
    exhaustive_logdet, exhaustive_optimal, for_each_subset_mse, greedy_generic, greedy_mse,
    prefix_mse, rank_leverage, sample_leverage, sample_uniform, LogDetObjective, Objective,
};
use gsp_core::signals::{make_prior, Prior, Transform};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{
    ExperimentConfig, ExperimentId, GraphModel, NoiseConfig, SamplerKind, TransformConfig,
};
use crate::error::{CliError, Result};
use crate::table::{Row, BOUND_CHECK_SLACK, LOWER_BOUND_METRIC, UPPER_BOUND_METRIC};

/// Regularizer for the full-set kPCA reference projector.
pub const FULL_SET_SIGMA_W2: f64 = 1e-12;

// Sub-seed streams within a trial.
const GRAPH_STREAM: u64 = 0;
const PRIOR_STREAM: u64 = 1;
const DATA_STREAM: u64 = 2;
const SAMPLER_STREAM: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesNoise {
    Level(f64),
    PerNode(f64, f64),
    PerTrial(f64, f64),
}

/// Trials of one series share the graph model and noise setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub model: GraphModel,
    pub noise: SeriesNoise,
}

pub fn series(cfg: &ExperimentConfig) -> Vec<Series> {
    if cfg.experiment == ExperimentId::KpcaDemo {
        return vec![Series {
            name: "two-circles".into(),
            model: GraphModel::ErdosRenyi,
            noise: SeriesNoise::Level(cfg.kpca.sigma_w2),
        }];
    }
    let mut out = Vec::new();
    for &model in &cfg.graph.models {
        match &cfg.prior.noise {
            NoiseConfig::Levels(levels) => {
                for &v in levels {
                    let name = if levels.len() > 1 {
                        format!("{}/sigma_w2={v:e}", model.as_str())
                    } else {
                        model.as_str().to_string()
                    };
                    out.push(Series {
                        name,
                        model,
                        noise: SeriesNoise::Level(v),
                    });
                }
            }
            NoiseConfig::PerNodeUniform([lo, hi]) => out.push(Series {
                name: model.as_str().to_string(),
                model,
                noise: SeriesNoise::PerNode(*lo, *hi),
            }),
            NoiseConfig::PerTrialLogUniform([lo, hi]) => out.push(Series {
                name: model.as_str().to_string(),
                model,
                noise: SeriesNoise::PerTrial(*lo, *hi),
            }),
        }
    }
    out
}

/// `hash(hash(seed, series), trial)`.
pub fn trial_seed(seed: u64, series_index: usize, trial: usize) -> u64 {
    sub_seed(sub_seed(seed, series_index as u64), trial as u64)
}

pub struct Trial<'a> {
    pub cfg: &'a ExperimentConfig,
    pub series: &'a Series,
    pub trial: usize,
    pub seed: u64,
}

impl Trial<'_> {
    fn row(&self, sampler: &str, set_size: Option<usize>, metric: &str, value: f64) -> Row {
        Row {
            experiment: self.cfg.experiment.as_str().to_string(),
            series: self.series.name.clone(),
            trial: self.trial,
            sampler: sampler.to_string(),
            set_size,
            metric: metric.to_string(),
            value,
        }
    }

    fn sampler_seed(&self, kind: SamplerKind) -> u64 {
        sub_seed(self.seed, SAMPLER_STREAM + kind as u64)
    }

    pub fn graph(&self) -> Result<Graph> {
        let g = &self.cfg.graph;
        let seed = sub_seed(self.seed, GRAPH_STREAM);
        Ok(match self.series.model {
            GraphModel::ErdosRenyi => gen_erdos_renyi(g.n, g.edge_probability, seed)?,
            GraphModel::PreferentialAttachment => gen_preferential_attachment(g.n, seed)?,
            GraphModel::RandomWeighted => gen_random_weighted(g.n, seed)?,
        })
    }

    pub fn prior(&self) -> Result<Prior> {
        let cfg = self.cfg;
        let n = cfg.graph.n;
        let basis = spectral_basis(&self.graph()?)?.select_band(cfg.bandwidth)?;
        let mut rng = rng_from_seed(sub_seed(self.seed, PRIOR_STREAM));
        let lambda_w = match self.series.noise {
            SeriesNoise::Level(v) => vec![v; n],
            SeriesNoise::PerNode(lo, hi) => (0..n).map(|_| rng.random_range(lo..=hi)).collect(),
            SeriesNoise::PerTrial(lo, hi) => {
                let v = rng.random_range(lo.ln()..=hi.ln()).exp();
                vec![v; n]
            }
        };
        let transform = match cfg.prior.transform {
            TransformConfig::Identity => Transform::Identity,
            TransformConfig::Gaussian { rows } => {
                Transform::Matrix(DMatrix::from_fn(rows, n, |_, _| {
                    StandardNormal.sample(&mut rng)
                }))
            }
        };
        let lambda = vec![cfg.prior.signal_variance; cfg.bandwidth];
        Ok(make_prior(&basis, lambda, lambda_w, transform)?)
    }

    /// A sampling set of `budget` nodes, in selection order.
    fn select(&self, kind: SamplerKind, prior: &Prior, budget: usize) -> Result<Vec<usize>> {
        let n = prior.n();
        let seed = self.sampler_seed(kind);
        let set = match kind {
            SamplerKind::Greedy => greedy_mse(prior, budget)?.set,
            SamplerKind::GreedyLogdet => greedy_generic(&LogDetObjective(prior), n, budget)?.set,
            SamplerKind::Uniform => sample_uniform(n, budget, seed)?,
            SamplerKind::Leverage => sample_leverage(prior, budget, seed)?,
            SamplerKind::RankLeverage => rank_leverage(prior, budget)?,
        };
        Ok(set.indices().to_vec())
    }

    pub fn run(&self) -> Result<Vec<Row>> {
        match self.cfg.experiment {
            ExperimentId::Fig1Bounds => self.bounds_profile(),
            ExperimentId::Fig5GreedyVsBound => self.greedy_vs_bound(),
            ExperimentId::Fig6Alpha => self.alpha(),
            ExperimentId::Fig78Subopt => self.suboptimality(),
            ExperimentId::Fig9Logdet => self.logdet(),
            ExperimentId::Fig10Setsize => self.set_size(),
            ExperimentId::KpcaDemo => self.kpca(),
        }
    }

    /// Exhaustive MSE profile against the universal and set-size bounds.
    fn bounds_profile(&self) -> Result<Vec<Row>> {
        let prior = self.prior()?;
        let n = prior.n();
        let report = BoundsReport::new(&prior)?;
        let lower: Vec<f64> = (0..=n)
            .map(|m| report.lower(m))
            .collect::<gsp_core::Result<_>>()?;
        let slack = 1.0 + BOUND_CHECK_SLACK;

        let mut min = vec![f64::INFINITY; n + 1];
        let mut max = vec![f64::NEG_INFINITY; n + 1];
        let mut values = Vec::with_capacity(1 << n.min(24));
        let mut sandwich_violations = 0u64;
        for_each_subset_mse(&prior, n, self.cfg.exhaustive_cap as u128, |s, f| {
            let m = s.len();
            min[m] = min[m].min(f);
            max[m] = max[m].max(f);
            if lower[m] > f * slack || f > report.upper * slack {
                sandwich_violations += 1;
            }
            values.push(f);
        })?;

        // Smallest set size whose optimum reaches `eta`.
        let optimal_size = |eta: f64| min.iter().position(|&f| f <= eta);
        let mut size_violations = 0u64;
        for &eta in &values {
            let smallest = optimal_size(eta).expect("every achieved value is reachable");
            match report.set_size(eta)?.tight_size {
                Some(t) if smallest >= t => {}
                _ => size_violations += 1,
            }
        }

        let greedy = if self.cfg.samplers.contains(&SamplerKind::Greedy) {
            let mut t = vec![report.upper];
            t.extend(greedy_mse(&prior, n)?.trajectory);
            Some(t)
        } else {
            None
        };

        let mut rows = Vec::new();
        for m in 0..=n {
            rows.push(self.row("exhaustive", Some(m), "min_mse", min[m]));
            rows.push(self.row("exhaustive", Some(m), "max_mse", max[m]));
            rows.push(self.row("bound", Some(m), LOWER_BOUND_METRIC, lower[m]));
            rows.push(self.row("bound", Some(m), UPPER_BOUND_METRIC, report.upper));
            if let Some(t) = &greedy {
                rows.push(self.row("greedy", Some(m), "greedy_mse", t[m]));
            }
        }
        for m in 1..=n {
            let eta = min[m];
            let smallest = optimal_size(eta).expect("min[m] reaches itself");
            rows.push(self.row("exhaustive", Some(m), "optimal_size", smallest as f64));
            let bound = report.set_size(eta)?;
            let tight = bound.tight_size.map_or(f64::INFINITY, |t| t as f64);
            rows.push(self.row("bound", Some(m), "size_bound", tight));
        }
        let est = alpha_estimate(&prior, 0)?;
        let alpha_lb = est.alpha_lb_homo.unwrap_or(est.alpha_lb_general);
        rows.push(self.row("bound", None, "alpha_lb", alpha_lb));
        rows.push(self.row(
            "bound",
            None,
            "uniform_recovery_bound",
            report.uniform_recovery(),
        ));
        rows.push(self.row("bound", None, "sets_checked", values.len() as f64));
        rows.push(self.row(
            "bound",
            None,
            "sandwich_violations",
            sandwich_violations as f64,
        ));
        rows.push(self.row("bound", None, "set_size_violations", size_violations as f64));
        Ok(rows)
    }

    /// Greedy set sizes needed for MSE targets, against the set-size bound.
    fn greedy_vs_bound(&self) -> Result<Vec<Row>> {
        let prior = self.prior()?;
        let n = prior.n();
        let budget = self.cfg.budget();
        let report = BoundsReport::new(&prior)?;
        let mut trajectory = vec![report.upper];
        trajectory.extend(greedy_mse(&prior, budget)?.trajectory);
        let all: Vec<usize> = (0..n).collect();
        let f_full = mse(&prior, &all)?;

        let mut rows = Vec::new();
        for (m, &f) in trajectory.iter().enumerate() {
            rows.push(self.row("greedy", Some(m), "greedy_mse", f));
            rows.push(self.row("bound", Some(m), LOWER_BOUND_METRIC, report.lower(m)?));
            rows.push(self.row("bound", Some(m), UPPER_BOUND_METRIC, report.upper));
        }
        let mut violations = 0u64;
        let mut terminal = None;
        for &r in &self.cfg.reductions {
            let eta = f_full + (1.0 - r) * (report.upper - f_full);
            let tag = format!("@r={r}");
            rows.push(self.row("bound", None, &format!("target_mse{tag}"), eta));
            let bound = report.set_size(eta)?;
            let tight = bound.tight_size.map_or(f64::INFINITY, |t| t as f64);
            rows.push(self.row("bound", None, &format!("size_bound{tag}"), tight));
            match trajectory.iter().position(|&f| f <= eta) {
                Some(g) => {
                    rows.push(self.row("greedy", Some(g), &format!("greedy_size{tag}"), g as f64));
                    if (g as f64) < tight {
                        violations += 1;
                    }
                    let ratio = g as f64 / tight;
                    rows.push(self.row("greedy", Some(g), &format!("size_ratio{tag}"), ratio));
                    terminal = Some(ratio);
                }
                None => {
                    rows.push(self.row("greedy", None, &format!("unreached{tag}"), 1.0));
                    terminal = None;
                }
            }
        }
        rows.push(self.row("bound", None, "size_bound_violations", violations as f64));
        if let Some(ratio) = terminal {
            rows.push(self.row("greedy", None, "terminal_size_ratio", ratio));
        }
        Ok(rows)
    }

    /// Exact α against its lower bounds, and the greedy guarantee for each budget.
    fn alpha(&self) -> Result<Vec<Row>> {
        let prior = self.prior()?;
        let est = alpha_estimate(&prior, self.cfg.alpha_max_nodes)?;
        let exact = est.alpha_exact.ok_or_else(|| {
            CliError::Check("exact α search was refused for a feasible instance".into())
        })?;
        let mut rows = vec![
            self.row("exhaustive", None, "alpha_exact", exact),
            self.row("bound", None, "alpha_lb_general", est.alpha_lb_general),
            self.row("bound", None, "kappa2_w", est.kappa2_w),
        ];
        if let Some(h) = est.alpha_lb_homo {
            rows.push(self.row("bound", None, "alpha_lb_homoscedastic", h));
        }
        if let Some(g) = est.gamma {
            rows.push(self.row("bound", None, "gamma", g));
        }

        let budget = self.cfg.budget();
        let alpha_lb = est.alpha_lb_homo.unwrap_or(est.alpha_lb_general);
        let f_empty = mse(&prior, &[])?;
        let greedy = greedy_mse(&prior, budget)?;
        for ell in 1..=budget {
            let opt = exhaustive_optimal(&prior, ell, self.cfg.exhaustive_cap as u128)?;
            let fg = greedy.trajectory[ell - 1];
            let sub = relative_suboptimality(fg, opt.value, f_empty)?;
            let k = ell.max(1);
            let g = greedy_guarantee(alpha_lb.min(k as f64), k, ell)?;
            let ge = greedy_guarantee(exact.min(k as f64), k, ell)?;
            rows.push(self.row("greedy", Some(ell), "relative_suboptimality", sub));
            rows.push(self.row("bound", Some(ell), "guarantee", g.exact));
            rows.push(self.row("bound", Some(ell), "guarantee_exact_alpha", ge.exact));
        }
        Ok(rows)
    }

    /// Relative suboptimality of each sampler against the exhaustive optimum.
    fn suboptimality(&self) -> Result<Vec<Row>> {
        let prior = self.prior()?;
        let budget = self.cfg.budget();
        let f_empty = mse(&prior, &[])?;
        let opt = exhaustive_optimal(&prior, budget, self.cfg.exhaustive_cap as u128)?;
        let mut rows = vec![self.row("exhaustive", Some(budget), "optimal_mse", opt.value)];
        for &kind in &self.cfg.samplers {
            let s = self.select(kind, &prior, budget)?;
            let f = mse(&prior, &s)?;
            let sub = relative_suboptimality(f, opt.value, f_empty)?;
            rows.push(self.row(kind.as_str(), Some(budget), "mse", f));
            rows.push(self.row(kind.as_str(), Some(budget), "relative_suboptimality", sub));
        }
        // The guarantee compares ℓ greedy steps with the best set of the same size.
        let est = alpha_estimate(&prior, 0)?;
        let alpha_lb = est.alpha_lb_homo.unwrap_or(est.alpha_lb_general);
        let g = greedy_guarantee(alpha_lb.min(budget as f64), budget, budget)?;
        rows.push(self.row("bound", Some(budget), "alpha_lb", alpha_lb));
        rows.push(self.row("bound", Some(budget), "guarantee", g.exact));
        rows.push(self.row("bound", Some(budget), "guarantee_exp", g.exp_bound));
        Ok(rows)
    }

    /// Greedy on the MSE and on log det, scored under both objectives.
    fn logdet(&self) -> Result<Vec<Row>> {
        let prior = self.prior()?;
        let budget = self.cfg.budget();
        let cap = self.cfg.exhaustive_cap as u128;
        let f_empty = mse(&prior, &[])?;
        let opt = exhaustive_optimal(&prior, budget, cap)?;
        let ld = LogDetObjective(&prior);
        let ld_empty = ld.eval(&[])?;
        let ld_opt = exhaustive_logdet(&prior, budget, cap)?;
        let mut rows = vec![
            self.row("exhaustive", Some(budget), "optimal_mse", opt.value),
            self.row("exhaustive", Some(budget), "optimal_logdet", ld_opt.value),
        ];
        for &kind in &self.cfg.samplers {
            let s = self.select(kind, &prior, budget)?;
            let f = mse(&prior, &s)?;
            let l = ld.eval(&s)?;
            let name = kind.as_str();
            rows.push(self.row(
                name,
                Some(budget),
                "relative_suboptimality",
                relative_suboptimality(f, opt.value, f_empty)?,
            ));
            rows.push(self.row(
                name,
                Some(budget),
                "logdet_relative_suboptimality",
                relative_suboptimality(l, ld_opt.value, ld_empty)?,
            ));
        }
        Ok(rows)
    }

    /// Samples each sampler needs to cut the MSE by the target fractions.
    fn set_size(&self) -> Result<Vec<Row>> {
        let prior = self.prior()?;
        let n = prior.n();
        let f_empty = mse(&prior, &[])?;
        let mut rows = Vec::new();
        for &kind in &self.cfg.samplers {
            let order = self.select(kind, &prior, n)?;
            let prefix = prefix_mse(&prior, &order)?;
            for &r in &self.cfg.reductions {
                let target = (1.0 - r) * f_empty;
                match prefix.iter().position(|&f| f <= target) {
                    Some(p) => {
                        let size = p + 1;
                        rows.push(self.row(
                            kind.as_str(),
                            Some(size),
                            &format!("set_size@r={r}"),
                            size as f64,
                        ));
                    }
                    None => {
                        rows.push(self.row(kind.as_str(), None, &format!("unreached@r={r}"), 1.0))
                    }
                }
            }
        }
        Ok(rows)
    }

    /// Subsampled kPCA projections against the full projection on held-out points.
    fn kpca(&self) -> Result<Vec<Row>> {
        let k = &self.cfg.kpca;
        let (train, _) = two_circles(k.train, k.radial_noise, sub_seed(self.seed, DATA_STREAM))?;
        let (test, _) = two_circles(k.test, k.radial_noise, sub_seed(self.seed, DATA_STREAM + 1))?;
        let model = kpca_basis(
            &gram_matrix(&train, PolyKernel::new(k.degree)?)?,
            k.components,
        )?;
        let kernel = model.kernel();
        let full = test
            .iter()
            .map(|y| kpca_project(&model, y))
            .collect::<gsp_core::Result<Vec<_>>>()?;
        let error = |s: &[usize], sigma: f64| -> Result<f64> {
            let proj = build_projector_with_set(&model, s, sigma)?;
            let mut total = 0.0;
            for (y, f) in test.iter().zip(&full) {
                let sub = sub_project(&proj, &train, &kernel, y)?;
                total += (sub - f).norm() / f.norm().max(f64::MIN_POSITIVE);
            }
            Ok(total / test.len() as f64)
        };

        let all: Vec<usize> = (0..train.len()).collect();
        let mut rows = vec![self.row(
            "full",
            Some(all.len()),
            "projection_error",
            error(&all, FULL_SET_SIGMA_W2)?,
        )];
        let prior = model.prior(k.sigma_w2)?;
        for &b in &k.budgets {
            for &kind in &self.cfg.samplers {
                let s = self.select(kind, &prior, b)?;
                rows.push(self.row(
                    kind.as_str(),
                    Some(b),
                    "projection_error",
                    error(&s, k.sigma_w2)?,
                ));
                rows.push(self.row(
                    kind.as_str(),
                    Some(b),
                    "reduction_ratio",
                    b as f64 / train.len() as f64,
                ));
            }
        }
        Ok(rows)
    }
}
