//! Sampling-set selection: rank-1 greedy MSE minimization, generic greedy,
//! exhaustive oracles and randomized/deterministic leverage baselines.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::interp::{as_node_set, information_matrix, ErrorState, SamplingSet};
use crate::linalg::{bilinear, cholesky, diag, dot, mat_vec, symmetrize, trace_product};
use crate::rng::rng_from_seed;
use crate::signals::Prior;

/// Relative gap under which two candidate scores count as tied.
pub const TIE_TOL: f64 = 1e-12;
/// Relative drift between the running and the directly inverted MSE that
/// triggers a fresh inversion in the greedy stepper.
pub const REINVERT_TOL: f64 = 1e-6;
/// Default cap on the number of sets an exhaustive search may visit.
pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 2_000_000;

/// A set function to be minimized.
pub trait Objective: Sync {
    fn name(&self) -> &str;
    /// Value at `s`; `s` holds distinct in-range nodes.
    fn eval(&self, s: &[usize]) -> Result<f64>;
}

/// `f(S) = MSE(S)`.
#[derive(Debug, Clone, Copy)]
pub struct MseObjective<'a>(pub &'a Prior);

impl Objective for MseObjective<'_> {
    fn name(&self) -> &str {
        "mse"
    }

    fn eval(&self, s: &[usize]) -> Result<f64> {
        Ok(ErrorState::for_set(self.0, s)?.mse())
    }
}

/// `f(S) = log det K̄(S) = −log det Z(S)`.
#[derive(Debug, Clone, Copy)]
pub struct LogDetObjective<'a>(pub &'a Prior);

impl Objective for LogDetObjective<'_> {
    fn name(&self) -> &str {
        "logdet"
    }

    fn eval(&self, s: &[usize]) -> Result<f64> {
        let s = as_node_set(self.0.n(), s)?;
        let chol = cholesky(information_matrix(self.0, &s), "Z(S)")?;
        Ok(-2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| d.ln())
                .sum::<f64>())
    }
}

pub fn mse_objective(prior: &Prior) -> MseObjective<'_> {
    MseObjective(prior)
}

pub fn logdet_objective(prior: &Prior) -> LogDetObjective<'_> {
    LogDetObjective(prior)
}

/// Wraps a closure as an objective.
pub struct FnObjective<F> {
    pub name: String,
    pub f: F,
}

impl<F: Fn(&[usize]) -> f64 + Sync> Objective for FnObjective<F> {
    fn name(&self) -> &str {
        &self.name
    }

    fn eval(&self, s: &[usize]) -> Result<f64> {
        Ok((self.f)(s))
    }
}

/// Selected nodes with the objective after each step and the per-step gain.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub set: SamplingSet,
    pub trajectory: Vec<f64>,
    pub gains: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GreedyRecord {
    indices: Vec<usize>,
    trajectory: Vec<f64>,
    gains: Vec<f64>,
}

impl GreedyResult {
    pub fn indices(&self) -> &[usize] {
        self.set.indices()
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = GreedyRecord {
            indices: self.indices().to_vec(),
            trajectory: self.trajectory.clone(),
            gains: self.gains.clone(),
        };
        Ok(serde_json::to_string(&rec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: GreedyRecord = serde_json::from_str(text)?;
        let n = rec.indices.iter().max().map_or(0, |m| m + 1);
        let set = SamplingSet::new(rec.indices, n)?.with_trajectory(rec.trajectory.clone());
        Ok(Self {
            set,
            trajectory: rec.trajectory,
            gains: rec.gains,
        })
    }
}

fn check_budget(n: usize, budget: usize) -> Result<()> {
    if budget == 0 || budget > n {
        return param(format!("budget must be in 1..={n}, got {budget}"));
    }
    Ok(())
}

/// Greedy MSE minimization one node at a time, keeping `K̄` by rank-1 downdates.
///
/// Node `s` is scored by `v_sᵀ K̄ W K̄ v_s / (λ_{w,s} + v_sᵀ K̄ v_s)`, which is
/// exactly the MSE decrease from adding it.
#[derive(Debug, Clone)]
pub struct GreedyStepper<'a> {
    prior: &'a Prior,
    z: DMatrix<f64>,
    kbar: DMatrix<f64>,
    mse: f64,
    selected: Vec<bool>,
    set: Vec<usize>,
    trajectory: Vec<f64>,
    gains: Vec<f64>,
    reinversions: usize,
}

impl<'a> GreedyStepper<'a> {
    pub fn new(prior: &'a Prior) -> Self {
        let inv: Vec<f64> = prior.lambda().iter().map(|l| 1.0 / l).collect();
        let kbar = diag(prior.lambda());
        let mse = trace_product(prior.w(), &kbar);
        Self {
            prior,
            z: diag(&inv),
            kbar,
            mse,
            selected: vec![false; prior.n()],
            set: Vec::new(),
            trajectory: Vec::new(),
            gains: Vec::new(),
            reinversions: 0,
        }
    }

    /// Adds the best remaining node; `None` once every node is selected.
    pub fn step(&mut self) -> Result<Option<usize>> {
        let p = self.prior;
        let k = p.bandwidth();
        let m = {
            let mut m = &self.kbar * p.w() * &self.kbar;
            symmetrize(&mut m);
            m
        };
        let mut best: Option<(usize, f64)> = None;
        for s in (0..p.n()).filter(|&s| !self.selected[s]) {
            let v = p.node_row(s);
            let score = bilinear(&m, v, v) / (p.lambda_w()[s] + bilinear(&self.kbar, v, v));
            match best {
                Some((_, b)) if score <= b + TIE_TOL * b.abs() => {}
                _ => best = Some((s, score)),
            }
        }
        let Some((u, gain)) = best else {
            return Ok(None);
        };

        let v = p.node_row(u);
        let lw = p.lambda_w()[u];
        let mut a = vec![0.0; k];
        mat_vec(&self.kbar, v, &mut a);
        let den = lw + dot(v, &a);
        for i in 0..k {
            for j in 0..k {
                self.kbar[(i, j)] -= a[i] * a[j] / den;
                self.z[(i, j)] += v[i] * v[j] / lw;
            }
        }
        symmetrize(&mut self.kbar);
        self.mse = trace_product(p.w(), &self.kbar);

        let mut direct = cholesky(self.z.clone(), "Z(S)")?.inverse();
        symmetrize(&mut direct);
        let direct_mse = trace_product(p.w(), &direct);
        if (direct_mse - self.mse).abs() > REINVERT_TOL * direct_mse.abs() {
            self.kbar = direct;
            self.mse = direct_mse;
            self.reinversions += 1;
        }

        self.selected[u] = true;
        self.set.push(u);
        self.trajectory.push(self.mse);
        self.gains.push(gain);
        Ok(Some(u))
    }

    /// `K̄` of the current set, maintained by rank-1 downdates.
    pub fn kbar(&self) -> &DMatrix<f64> {
        &self.kbar
    }

    /// `trace(W K̄)` of the current set.
    pub fn mse(&self) -> f64 {
        self.mse
    }

    pub fn selected(&self) -> &[usize] {
        &self.set
    }

    /// How many times drift forced a direct inversion.
    pub fn reinversions(&self) -> usize {
        self.reinversions
    }

    pub fn finish(self) -> GreedyResult {
        let set = SamplingSet::new(self.set, self.prior.n())
            .expect("greedy selects distinct nodes")
            .with_trajectory(self.trajectory.clone());
        GreedyResult {
            set,
            trajectory: self.trajectory,
            gains: self.gains,
        }
    }
}

/// Greedy MSE sampling with `budget` nodes.
pub fn greedy_mse(prior: &Prior, budget: usize) -> Result<GreedyResult> {
    check_budget(prior.n(), budget)?;
    let mut stepper = GreedyStepper::new(prior);
    for _ in 0..budget {
        stepper.step()?;
    }
    Ok(stepper.finish())
}

/// Greedy minimization of an arbitrary objective over `0..n`.
pub fn greedy_generic(objective: &dyn Objective, n: usize, budget: usize) -> Result<GreedyResult> {
    check_budget(n, budget)?;
    let mut set = Vec::with_capacity(budget);
    let mut selected = vec![false; n];
    let mut current = objective.eval(&set)?;
    let mut trajectory = Vec::with_capacity(budget);
    let mut gains = Vec::with_capacity(budget);
    for _ in 0..budget {
        let mut best: Option<(usize, f64)> = None;
        for s in (0..n).filter(|&s| !selected[s]) {
            set.push(s);
            let value = objective.eval(&set)?;
            set.pop();
            match best {
                Some((_, b)) if value >= b - TIE_TOL * b.abs() => {}
                _ => best = Some((s, value)),
            }
        }
        let (u, value) = best.expect("budget never exceeds n");
        selected[u] = true;
        set.push(u);
        gains.push(current - value);
        trajectory.push(value);
        current = value;
    }
    let set = SamplingSet::new(set, n)?.with_trajectory(trajectory.clone());
    Ok(GreedyResult {
        set,
        trajectory,
        gains,
    })
}

/// MSE after each prefix of `order`, using rank-1 updates.
pub fn prefix_mse(prior: &Prior, order: &[usize]) -> Result<Vec<f64>> {
    let mut state = ErrorState::empty(prior);
    let mut out = Vec::with_capacity(order.len());
    for &u in order {
        state.add(prior, u)?;
        out.push(state.mse());
    }
    Ok(out)
}

/// `C(n, k)` without overflow for the sizes handled here.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Depth-first walk over subsets in lexicographic order, carrying `K̄` and
/// `log det K̄` down the path by rank-1 updates.
struct SubsetWalker<'a, F> {
    prior: &'a Prior,
    min_size: usize,
    max_size: usize,
    kbars: Vec<DMatrix<f64>>,
    logdets: Vec<f64>,
    path: Vec<usize>,
    scratch: Vec<f64>,
    visit: F,
}

impl<F: FnMut(&[usize], &DMatrix<f64>, f64)> SubsetWalker<'_, F> {
    fn descend(&mut self, start: usize) {
        let depth = self.path.len();
        if depth >= self.min_size {
            (self.visit)(&self.path, &self.kbars[depth], self.logdets[depth]);
        }
        if depth == self.max_size {
            return;
        }
        let n = self.prior.n();
        let needed = self.min_size.saturating_sub(depth + 1);
        for u in start..n {
            if n - u - 1 < needed {
                break;
            }
            let v = self.prior.node_row(u);
            let lw = self.prior.lambda_w()[u];
            mat_vec(&self.kbars[depth], v, &mut self.scratch);
            let q = dot(v, &self.scratch);
            let den = lw + q;
            let (head, tail) = self.kbars.split_at_mut(depth + 1);
            let (src, dst) = (&head[depth], &mut tail[0]);
            let k = v.len();
            for i in 0..k {
                for j in 0..k {
                    dst[(i, j)] = src[(i, j)] - self.scratch[i] * self.scratch[j] / den;
                }
            }
            self.logdets[depth + 1] = self.logdets[depth] - (q / lw).ln_1p();
            self.path.push(u);
            self.descend(u + 1);
            self.path.pop();
        }
    }
}

fn walk_subsets(
    prior: &Prior,
    min_size: usize,
    max_size: usize,
    visit: impl FnMut(&[usize], &DMatrix<f64>, f64),
) {
    let k = prior.bandwidth();
    let mut walker = SubsetWalker {
        prior,
        min_size,
        max_size,
        kbars: vec![DMatrix::zeros(k, k); max_size + 1],
        logdets: vec![0.0; max_size + 1],
        path: Vec::with_capacity(max_size),
        scratch: vec![0.0; k],
        visit,
    };
    walker.kbars[0] = diag(prior.lambda());
    walker.logdets[0] = prior.lambda().iter().map(|l| l.ln()).sum();
    walker.descend(0);
}

fn check_cap(required: u128, cap: u128) -> Result<()> {
    if required > cap {
        return Err(Error::Infeasible { required, cap });
    }
    Ok(())
}

/// Global minimizer of an objective over all size-`k` sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult {
    pub set: SamplingSet,
    pub value: f64,
    pub evaluated: u128,
}

fn better(value: f64, best: f64) -> bool {
    best.is_infinite() || value < best - TIE_TOL * best.abs()
}

/// Exhaustive MSE minimization over all `C(n, k)` sets. Ties go to the
/// lexicographically first set; the winner's value is recomputed directly.
pub fn exhaustive_optimal(prior: &Prior, k: usize, cap: u128) -> Result<ExhaustiveResult> {
    exhaustive_inner(
        prior,
        k,
        cap,
        |w, kbar, _| trace_product(w, kbar),
        |s| ErrorState::for_set(prior, s).map(|e| e.mse()),
    )
}

/// Exhaustive minimization of `log det K̄(S)` over size-`k` sets.
pub fn exhaustive_logdet(prior: &Prior, k: usize, cap: u128) -> Result<ExhaustiveResult> {
    exhaustive_inner(
        prior,
        k,
        cap,
        |_, _, logdet| logdet,
        |s| LogDetObjective(prior).eval(s),
    )
}

fn exhaustive_inner(
    prior: &Prior,
    k: usize,
    cap: u128,
    score: impl Fn(&DMatrix<f64>, &DMatrix<f64>, f64) -> f64,
    direct: impl Fn(&[usize]) -> Result<f64>,
) -> Result<ExhaustiveResult> {
    let n = prior.n();
    if k > n {
        return param(format!("set size {k} exceeds {n} nodes"));
    }
    let required = binomial(n, k);
    check_cap(required, cap)?;
    let w = prior.w();
    let mut best = (f64::INFINITY, Vec::new());
    walk_subsets(prior, k, k, |path, kbar, logdet| {
        let value = score(w, kbar, logdet);
        if better(value, best.0) {
            best = (value, path.to_vec());
        }
    });
    let value = direct(&best.1)?;
    Ok(ExhaustiveResult {
        set: SamplingSet::new(best.1, n)?,
        value,
        evaluated: required,
    })
}

/// Exhaustive minimization of any objective over size-`k` sets of `0..n`.
pub fn exhaustive_generic(
    objective: &dyn Objective,
    n: usize,
    k: usize,
    cap: u128,
) -> Result<ExhaustiveResult> {
    if k > n {
        return param(format!("set size {k} exceeds {n} nodes"));
    }
    let required = binomial(n, k);
    check_cap(required, cap)?;
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best = (f64::INFINITY, Vec::new());
    loop {
        let value = objective.eval(&combo)?;
        if better(value, best.0) {
            best = (value, combo.clone());
        }
        // Next combination in lexicographic order.
        let Some(i) = (0..k).rev().find(|&i| combo[i] < n - k + i) else {
            break;
        };
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
    Ok(ExhaustiveResult {
        set: SamplingSet::new(best.1, n)?,
        value: best.0,
        evaluated: required,
    })
}

/// Calls `visit(set, mse)` for every subset with at most `max_size` nodes.
pub fn for_each_subset_mse(
    prior: &Prior,
    max_size: usize,
    cap: u128,
    mut visit: impl FnMut(&[usize], f64),
) -> Result<()> {
    let n = prior.n();
    let max_size = max_size.min(n);
    let required: u128 = (0..=max_size).map(|m| binomial(n, m)).sum();
    check_cap(required, cap)?;
    let w = prior.w();
    walk_subsets(prior, 0, max_size, |path, kbar, _| {
        visit(path, trace_product(w, kbar))
    });
    Ok(())
}

/// Minimum MSE and a minimizing set for every size `0..=n`.
pub fn exhaustive_profile(prior: &Prior, cap: u128) -> Result<Vec<(f64, Vec<usize>)>> {
    let n = prior.n();
    let mut best = vec![(f64::INFINITY, Vec::new()); n + 1];
    for_each_subset_mse(prior, n, cap, |s, f| {
        if better(f, best[s.len()].0) {
            best[s.len()] = (f, s.to_vec());
        }
    })?;
    Ok(best)
}

fn check_size(n: usize, k: usize) -> Result<()> {
    if k > n {
        return param(format!("cannot draw {k} nodes from {n}"));
    }
    Ok(())
}

/// `k` distinct nodes, uniformly at random, in draw order.
pub fn sample_uniform(n: usize, k: usize, seed: u64) -> Result<SamplingSet> {
    check_size(n, k)?;
    let mut rng = rng_from_seed(seed);
    let mut all: Vec<usize> = (0..n).collect();
    let (picked, _) = all.partial_shuffle(&mut rng, k);
    SamplingSet::new(picked.to_vec(), n)
}

fn leverage(prior: &Prior) -> Vec<f64> {
    (0..prior.n())
        .map(|i| prior.node_row(i).iter().map(|x| x * x).sum())
        .collect()
}

/// Sequential draws without replacement, each proportional to `‖v_i‖²` among
/// the remaining nodes; falls back to uniform once the remaining mass is zero.
pub fn sample_leverage(prior: &Prior, k: usize, seed: u64) -> Result<SamplingSet> {
    let n = prior.n();
    check_size(n, k)?;
    let mut rng = rng_from_seed(seed);
    let mut weights = leverage(prior);
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut picked = Vec::with_capacity(k);
    for _ in 0..k {
        let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
        let pos = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pos = remaining.len() - 1;
            for (p, &i) in remaining.iter().enumerate() {
                if weights[i] > 0.0 && r < weights[i] {
                    pos = p;
                    break;
                }
                r -= weights[i];
            }
            // Round-off can exhaust r; take the last node with positive weight.
            if weights[remaining[pos]] == 0.0 {
                pos = remaining
                    .iter()
                    .rposition(|&i| weights[i] > 0.0)
                    .expect("positive total");
            }
            pos
        } else {
            rng.random_range(0..remaining.len())
        };
        let node = remaining.remove(pos);
        weights[node] = 0.0;
        picked.push(node);
    }
    SamplingSet::new(picked, n)
}

/// Deterministic top-`k` nodes by `‖v_i‖²`, ties to the lower index.
pub fn rank_leverage(prior: &Prior, k: usize) -> Result<SamplingSet> {
    let n = prior.n();
    check_size(n, k)?;
    let lev = leverage(prior);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lev[b].total_cmp(&lev[a]).then(a.cmp(&b)));
    order.truncate(k);
    SamplingSet::new(order, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{gen_erdos_renyi, gen_random_weighted, spectral_basis};
    use crate::interp::mse;
    use crate::rng::sub_seed;
    use crate::signals::{make_prior, Transform};
    use rand_distr::{Distribution, StandardNormal};

    fn random_prior(n: usize, k: usize, seed: u64) -> Prior {
        let b = spectral_basis(&gen_random_weighted(n, seed).unwrap())
            .unwrap()
            .select_band(k)
            .unwrap();
        let mut rng = rng_from_seed(sub_seed(seed, 1));
        let h = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let lambda = (0..k).map(|_| rng.random_range(0.5..2.0)).collect();
        let lw = (0..n).map(|_| rng.random_range(1e-2..1.0)).collect();
        make_prior(&b, lambda, lw, Transform::Matrix(h)).unwrap()
    }

    fn er_prior(n: usize, k: usize, noise: f64, seed: u64) -> Prior {
        let b = spectral_basis(&gen_erdos_renyi(n, 0.2, seed).unwrap())
            .unwrap()
            .select_band(k)
            .unwrap();
        Prior::homoscedastic(&b, 1.0, noise).unwrap()
    }

    #[test]
    fn budget_checks() {
        let p = random_prior(6, 2, 1);
        assert!(greedy_mse(&p, 0).is_err());
        assert!(greedy_mse(&p, 7).is_err());
        assert!(greedy_generic(&MseObjective(&p), 6, 7).is_err());
        assert!(sample_uniform(3, 4, 0).is_err());
        assert!(sample_leverage(&p, 7, 0).is_err());
        assert!(rank_leverage(&p, 7).is_err());
    }

    #[test]
    fn stepper_matches_direct_inversion() {
        for seed in 0..10 {
            let p = random_prior(30, 4, seed);
            let mut st = GreedyStepper::new(&p);
            for _ in 0..12 {
                st.step().unwrap();
                let direct = mse(&p, st.selected()).unwrap();
                assert!((st.mse() - direct).abs() <= 1e-8 * direct);
            }
        }
    }

    #[test]
    fn greedy_trajectory_and_gains() {
        let p = random_prior(15, 3, 4);
        let g = greedy_mse(&p, 15).unwrap();
        let empty = mse(&p, &[]).unwrap();
        let mut prev = empty;
        for (f, gain) in g.trajectory.iter().zip(&g.gains) {
            assert!(prev - f >= -1e-12);
            assert!((prev - f - gain).abs() <= 1e-9 * empty);
            prev = *f;
        }
        assert_eq!(g.set.sorted(), (0..15).collect::<Vec<_>>());
        let full = mse(&p, &(0..15).collect::<Vec<_>>()).unwrap();
        assert!((g.trajectory[14] - full).abs() <= 1e-8 * full);
    }

    #[test]
    fn generic_greedy_agrees_with_rank_one_greedy() {
        for seed in 0..25 {
            let p = random_prior(12, 3, seed);
            let a = greedy_mse(&p, 6).unwrap();
            let b = greedy_generic(&MseObjective(&p), 12, 6).unwrap();
            assert_eq!(a.indices(), b.indices(), "seed {seed}");
            for (x, y) in a.trajectory.iter().zip(&b.trajectory) {
                assert!((x - y).abs() <= 1e-8 * y);
            }
        }
    }

    #[test]
    fn greedy_is_exact_for_modular_functions() {
        let c = [0.3, 2.0, -1.0, 5.0, 0.7, 2.5];
        let obj = FnObjective {
            name: "modular".into(),
            f: |s: &[usize]| -s.iter().map(|&i| c[i]).sum::<f64>(),
        };
        let g = greedy_generic(&obj, 6, 3).unwrap();
        assert_eq!(g.indices(), &[3, 5, 1]);
    }

    #[test]
    fn greedy_breaks_ties_by_index() {
        let obj = FnObjective {
            name: "flat".into(),
            f: |s: &[usize]| -(s.len() as f64),
        };
        assert_eq!(greedy_generic(&obj, 5, 3).unwrap().indices(), &[0, 1, 2]);
        // Identity band on coordinate vectors: every node looks the same.
        let v = DMatrix::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 });
        let p = Prior::from_band_vectors(
            v,
            (0..4).collect(),
            vec![1.0; 4],
            vec![0.5; 4],
            Transform::Identity,
        )
        .unwrap();
        assert_eq!(greedy_mse(&p, 2).unwrap().indices(), &[0, 1]);
    }

    #[test]
    fn logdet_objective_basics() {
        let p = random_prior(8, 3, 2);
        let f = LogDetObjective(&p);
        let empty: f64 = p.lambda().iter().map(|l| l.ln()).sum();
        assert!((f.eval(&[]).unwrap() - empty).abs() < 1e-12);
        let mut rng = rng_from_seed(5);
        for _ in 0..300 {
            let mut order: Vec<usize> = (0..8).collect();
            order.shuffle(&mut rng);
            let b_len = rng.random_range(0..7);
            let a_len = rng.random_range(0..=b_len);
            let u = order[7];
            let a = &order[..a_len];
            let b = &order[..b_len];
            let with = |s: &[usize]| {
                let mut s = s.to_vec();
                s.push(u);
                f.eval(&s).unwrap()
            };
            let fa = f.eval(a).unwrap();
            let fb = f.eval(b).unwrap();
            assert!(fa >= fb - 1e-12);
            assert!(with(a) - fa <= with(b) - fb + 1e-9);
        }
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        let p = random_prior(4, 2, 3);
        let r = exhaustive_optimal(&p, 1, DEFAULT_EXHAUSTIVE_CAP).unwrap();
        let singles: Vec<f64> = (0..4).map(|i| mse(&p, &[i]).unwrap()).collect();
        let best = singles.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((r.value - best).abs() <= 1e-12 * best);
        assert_eq!(r.evaluated, 4);

        let full = exhaustive_optimal(&p, 4, DEFAULT_EXHAUSTIVE_CAP).unwrap();
        assert_eq!(full.set.indices(), &[0, 1, 2, 3]);

        let p = random_prior(9, 3, 8);
        for k in 0..=9 {
            let fast = exhaustive_optimal(&p, k, DEFAULT_EXHAUSTIVE_CAP).unwrap();
            let slow = exhaustive_generic(&MseObjective(&p), 9, k, DEFAULT_EXHAUSTIVE_CAP).unwrap();
            assert!((fast.value - slow.value).abs() <= 1e-10 * slow.value);
            let ld_fast = exhaustive_logdet(&p, k, DEFAULT_EXHAUSTIVE_CAP).unwrap();
            let ld_slow =
                exhaustive_generic(&LogDetObjective(&p), 9, k, DEFAULT_EXHAUSTIVE_CAP).unwrap();
            assert!((ld_fast.value - ld_slow.value).abs() <= 1e-10 * ld_slow.value.abs().max(1.0));
        }
    }

    #[test]
    fn exhaustive_dominates_greedy() {
        for seed in 0..5 {
            let p = er_prior(20, 5, 1e-2, seed);
            let r = exhaustive_optimal(&p, 5, DEFAULT_EXHAUSTIVE_CAP).unwrap();
            assert_eq!(r.evaluated, 15504);
            let g = greedy_mse(&p, 5).unwrap();
            assert!(r.value <= mse(&p, g.indices()).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn exhaustive_cap_is_enforced() {
        let p = er_prior(20, 5, 1e-2, 1);
        match exhaustive_optimal(&p, 5, 1000) {
            Err(Error::Infeasible { required, cap }) => assert_eq!((required, cap), (15504, 1000)),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn subset_walk_counts_and_values() {
        let p = random_prior(7, 2, 1);
        let mut count = 0;
        for_each_subset_mse(&p, 7, DEFAULT_EXHAUSTIVE_CAP, |s, f| {
            count += 1;
            let direct = mse(&p, s).unwrap();
            assert!((f - direct).abs() <= 1e-10 * direct);
        })
        .unwrap();
        assert_eq!(count, 128);
        let prof = exhaustive_profile(&p, DEFAULT_EXHAUSTIVE_CAP).unwrap();
        assert_eq!(prof.len(), 8);
        assert!(prof.windows(2).all(|w| w[1].0 <= w[0].0 + 1e-12));
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(20, 5), 15504);
        assert_eq!(binomial(12, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(100, 50), 100891344545564193334812497256);
    }

    #[test]
    fn baselines_exhaust_the_ground_set() {
        let p = random_prior(9, 3, 2);
        let all: Vec<usize> = (0..9).collect();
        assert_eq!(sample_uniform(9, 9, 1).unwrap().sorted(), all);
        assert_eq!(sample_leverage(&p, 9, 1).unwrap().sorted(), all);
        assert_eq!(rank_leverage(&p, 9).unwrap().sorted(), all);
        assert_eq!(rank_leverage(&p, 4).unwrap(), rank_leverage(&p, 4).unwrap());
        assert_eq!(
            sample_uniform(9, 4, 3).unwrap(),
            sample_uniform(9, 4, 3).unwrap()
        );
    }

    #[test]
    fn leverage_prefers_dominant_row() {
        // ‖v_0‖² = 1 − ε, the others share ε.
        let n = 10;
        let eps: f64 = 1e-3;
        let mut col = vec![(eps / (n - 1) as f64).sqrt(); n];
        col[0] = (1.0 - eps).sqrt();
        let v = DMatrix::from_column_slice(n, 1, &col);
        let p = Prior::from_band_vectors(v, vec![0], vec![1.0], vec![1.0; n], Transform::Identity)
            .unwrap();
        let hits = (0..10_000)
            .filter(|&t| sample_leverage(&p, 1, sub_seed(3, t)).unwrap().contains(0))
            .count();
        // Expected rate 0.999.
        assert!(hits >= 9_900, "{hits}");
    }

    #[test]
    fn leverage_falls_back_to_uniform_on_zero_mass() {
        let v = DMatrix::from_column_slice(4, 1, &[1.0, 0.0, 0.0, 0.0]);
        let p = Prior::from_band_vectors(v, vec![0], vec![1.0], vec![1.0; 4], Transform::Identity)
            .unwrap();
        let s = sample_leverage(&p, 3, 7).unwrap();
        assert_eq!(s.indices()[0], 0);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn rank_leverage_ties_go_to_lower_index() {
        let v = DMatrix::from_column_slice(4, 1, &[0.5, 0.5, 0.5, 0.5]);
        let p = Prior::from_band_vectors(v, vec![0], vec![1.0], vec![1.0; 4], Transform::Identity)
            .unwrap();
        assert_eq!(rank_leverage(&p, 2).unwrap().indices(), &[0, 1]);
    }

    #[test]
    fn greedy_json_round_trip() {
        let p = random_prior(8, 2, 1);
        let g = greedy_mse(&p, 3).unwrap();
        let text = g.to_json().unwrap();
        assert!(text.starts_with("{\"indices\":"));
        let back = GreedyResult::from_json(&text).unwrap();
        assert_eq!(back.indices(), g.indices());
        assert_eq!(back.gains, g.gains);
    }
}
