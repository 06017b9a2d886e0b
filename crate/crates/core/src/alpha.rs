//! α-supermodularity of sampling objectives and the greedy guarantee it buys.
//!
//! A decreasing set function `f` is α-supermodular when
//! `f(A∪{u}) − f(A) ≤ α [f(B∪{u}) − f(B)]` for all `A ⊆ B`, `u ∉ B`. With
//! decrements `d(X, u) = f(X) − f(X∪{u}) ≥ 0` the largest such α is
//! `min d(A, u) / d(B, u)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bounds::W_SINGULAR_TOL;
use crate::error::{domain, param, Error, Result};
use crate::interp::information_matrix;
use crate::linalg::{bilinear, diag, dot, extreme_eigenvalues, mat_vec, symmetrize};
use crate::signals::Prior;

/// Largest ground set the exact enumeration accepts by default.
pub const DEFAULT_ALPHA_MAX_NODES: usize = 12;
/// Decrements at or below this fraction of `|f({})|` on both sides are skipped.
pub const DEGENERATE_TOL: f64 = 1e-14;

/// The minimizing triple of the exact computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub u: usize,
}

/// Result of an exact enumeration over all `(A ⊆ B, u ∉ B)` triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSearch {
    pub alpha: f64,
    pub witness: Option<Witness>,
    pub triples: u64,
    pub skipped: u64,
}

/// Exact α (when feasible) together with both analytic lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha_exact: Option<f64>,
    pub alpha_lb_general: f64,
    pub alpha_lb_homo: Option<f64>,
    pub witness: Option<Witness>,
    pub mu_min: f64,
    pub mu_max: f64,
    pub kappa2_w: f64,
    pub gamma: Option<f64>,
}

fn triple_count(n: usize) -> u128 {
    3u128.pow(n as u32) * n as u128
}

fn check_nodes(n: usize, max_nodes: usize) -> Result<()> {
    if n > max_nodes {
        return Err(Error::Infeasible {
            required: triple_count(n),
            cap: triple_count(max_nodes),
        });
    }
    Ok(())
}

fn mask_nodes(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Minimizes `dec[A][u] / dec[B][u]` over all triples. `dec` is indexed by
/// `mask * n + u` and only read for `u ∉ mask`; `scale` sets the degeneracy
/// threshold.
fn enumerate_alpha(n: usize, dec: &[f64], scale: f64) -> AlphaSearch {
    let tiny = DEGENERATE_TOL * scale.abs();
    let mut best = AlphaSearch {
        alpha: f64::INFINITY,
        witness: None,
        triples: 0,
        skipped: 0,
    };
    let mut best_triple = None;
    let full = (1usize << n) - 1;
    for b in 0..=full {
        for u in (0..n).filter(|&u| b >> u & 1 == 0) {
            let db = dec[b * n + u];
            // Walk every submask A of B, including B itself and the empty set.
            let mut a = b;
            loop {
                let da = dec[a * n + u];
                best.triples += 1;
                if da.abs() <= tiny && db.abs() <= tiny {
                    best.skipped += 1;
                } else {
                    let ratio = da / db;
                    if ratio < best.alpha {
                        best.alpha = ratio;
                        best_triple = Some((a, b, u));
                    }
                }
                if a == 0 {
                    break;
                }
                a = (a - 1) & b;
            }
        }
    }
    best.witness = best_triple.map(|(a, b, u)| Witness {
        a: mask_nodes(a, n),
        b: mask_nodes(b, n),
        u,
    });
    best
}

/// `K̄(X)` for every subset mask, each from its parent by one rank-1 downdate.
fn kbar_table(prior: &Prior) -> Vec<DMatrix<f64>> {
    let n = prior.n();
    let k = prior.bandwidth();
    let mut table = Vec::with_capacity(1 << n);
    table.push(diag(prior.lambda()));
    let mut a = vec![0.0; k];
    for mask in 1usize..(1 << n) {
        let top = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
        let parent: &DMatrix<f64> = &table[mask & !(1 << top)];
        let v = prior.node_row(top);
        mat_vec(parent, v, &mut a);
        let den = prior.lambda_w()[top] + dot(v, &a);
        let mut next = DMatrix::from_fn(k, k, |i, j| parent[(i, j)] - a[i] * a[j] / den);
        symmetrize(&mut next);
        table.push(next);
    }
    table
}

/// MSE decrements in closed form:
/// `d(X, u) = v_uᵀ K̄ W K̄ v_u / (λ_{w,u} + v_uᵀ K̄ v_u)` with `K̄ = Z(X)⁻¹`.
fn mse_decrements(prior: &Prior) -> Vec<f64> {
    let n = prior.n();
    let k = prior.bandwidth();
    let table = kbar_table(prior);
    let mut dec = vec![0.0; (1 << n) * n];
    let mut a = vec![0.0; k];
    let mut wa = vec![0.0; k];
    for (mask, kbar) in table.iter().enumerate() {
        for u in (0..n).filter(|&u| mask >> u & 1 == 0) {
            let v = prior.node_row(u);
            mat_vec(kbar, v, &mut a);
            mat_vec(prior.w(), &a, &mut wa);
            let num: f64 = dot(&a, &wa);
            let q: f64 = dot(v, &a);
            dec[mask * n + u] = num / (prior.lambda_w()[u] + q);
        }
    }
    dec
}

/// `log det K̄` decrements: `d(X, u) = log(1 + v_uᵀ K̄ v_u / λ_{w,u})`.
fn logdet_decrements(prior: &Prior) -> Vec<f64> {
    let n = prior.n();
    let table = kbar_table(prior);
    let mut dec = vec![0.0; (1 << n) * n];
    for (mask, kbar) in table.iter().enumerate() {
        for u in (0..n).filter(|&u| mask >> u & 1 == 0) {
            let v = prior.node_row(u);
            dec[mask * n + u] = (bilinear(kbar, v, v) / prior.lambda_w()[u]).ln_1p();
        }
    }
    dec
}

fn empty_mse(prior: &Prior) -> f64 {
    let w = prior.w();
    prior
        .lambda()
        .iter()
        .enumerate()
        .map(|(a, l)| w[(a, a)] * l)
        .sum()
}

/// Exact α of the MSE by full enumeration.
pub fn alpha_exact_mse(prior: &Prior, max_nodes: usize) -> Result<AlphaSearch> {
    check_nodes(prior.n(), max_nodes)?;
    Ok(enumerate_alpha(
        prior.n(),
        &mse_decrements(prior),
        empty_mse(prior),
    ))
}

/// Exact α of `log det K̄(S)`; at least 1 since the function is supermodular.
pub fn alpha_exact_logdet(prior: &Prior, max_nodes: usize) -> Result<AlphaSearch> {
    check_nodes(prior.n(), max_nodes)?;
    let scale: f64 = prior.lambda().iter().map(|l| l.ln()).sum();
    Ok(enumerate_alpha(
        prior.n(),
        &logdet_decrements(prior),
        scale.abs().max(1.0),
    ))
}

/// Values of `f` at every subset mask of `0..n`.
pub fn set_function_table(
    n: usize,
    max_nodes: usize,
    mut f: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<Vec<f64>> {
    check_nodes(n, max_nodes)?;
    (0usize..(1 << n))
        .map(|mask| f(&mask_nodes(mask, n)))
        .collect()
}

fn table_decrements(n: usize, values: &[f64]) -> Vec<f64> {
    let mut dec = vec![0.0; values.len() * n];
    for mask in 0..values.len() {
        for u in (0..n).filter(|&u| mask >> u & 1 == 0) {
            dec[mask * n + u] = values[mask] - values[mask | 1 << u];
        }
    }
    dec
}

/// Exact α of an arbitrary set function given by its value table.
pub fn alpha_from_table(n: usize, values: &[f64]) -> Result<AlphaSearch> {
    if values.len() != 1 << n {
        return param(format!(
            "value table has {} entries, expected 2^{n}",
            values.len()
        ));
    }
    Ok(enumerate_alpha(n, &table_decrements(n, values), values[0]))
}

/// Counts triples violating `f(A∪u) − f(A) ≤ α [f(B∪u) − f(B)] + slack`.
pub fn supermodularity_violations(n: usize, values: &[f64], alpha: f64, slack: f64) -> Result<u64> {
    if values.len() != 1 << n {
        return param(format!(
            "value table has {} entries, expected 2^{n}",
            values.len()
        ));
    }
    let mut bad = 0;
    for b in 0usize..(1 << n) {
        for u in (0..n).filter(|&u| b >> u & 1 == 0) {
            let rhs = alpha * (values[b | 1 << u] - values[b]) + slack;
            let mut a = b;
            loop {
                if values[a | 1 << u] - values[a] > rhs {
                    bad += 1;
                }
                if a == 0 {
                    break;
                }
                a = (a - 1) & b;
            }
        }
    }
    Ok(bad)
}

/// `μ_min = λ_min(Λ⁻¹)`, `μ_max = λ_max(Λ⁻¹ + V_Kᵀ Λ_w⁻¹ V_K)`, `κ₂(W)`.
fn bound_ingredients(prior: &Prior) -> Result<(f64, f64, f64)> {
    let (lo, hi) = extreme_eigenvalues(prior.w());
    if !(lo > W_SINGULAR_TOL * hi) {
        return domain(format!(
            "the α bounds require W to be positive definite (eigenvalues {lo:e} .. {hi:e})"
        ));
    }
    let mu_min = prior
        .lambda()
        .iter()
        .map(|l| 1.0 / l)
        .fold(f64::INFINITY, f64::min);
    let all: Vec<usize> = (0..prior.n()).collect();
    let mu_max = extreme_eigenvalues(&information_matrix(prior, &all)).1;
    Ok((mu_min, mu_max, hi / lo))
}

/// Lower bound on α valid for any prior with `W ≻ 0`:
/// `(λ_min(Λ_w) + μ_max⁻¹)/(λ_min(Λ_w) + μ_min⁻¹) · μ_min²/(κ₂(W) μ_max²)`.
pub fn alpha_lower_bound_general(prior: &Prior) -> Result<f64> {
    let (mu_min, mu_max, kappa) = bound_ingredients(prior)?;
    Ok(general_bound(prior, mu_min, mu_max, kappa))
}

fn general_bound(prior: &Prior, mu_min: f64, mu_max: f64, kappa: f64) -> f64 {
    let lw_min = prior
        .lambda_w()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    (lw_min + 1.0 / mu_max) / (lw_min + 1.0 / mu_min) * mu_min * mu_min / (kappa * mu_max * mu_max)
}

/// `(1 + 2γ) / (κ₂ (1 + γ)⁴)` for flat signal and noise spectra.
///
/// Condition numbers within `1e-12` below one are treated as one.
pub fn alpha_lower_bound_homoscedastic(gamma: f64, kappa2_w: f64) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return param(format!("SNR must be finite and nonnegative, got {gamma}"));
    }
    if !(kappa2_w >= 1.0 - 1e-12 && kappa2_w.is_finite()) {
        return param(format!(
            "condition number must be at least 1, got {kappa2_w}"
        ));
    }
    let kappa = kappa2_w.max(1.0);
    Ok((1.0 + 2.0 * gamma) / (kappa * (1.0 + gamma).powi(4)))
}

/// Both bounds and, for `n ≤ max_nodes`, the exact value with its witness.
pub fn alpha_estimate(prior: &Prior, max_nodes: usize) -> Result<AlphaEstimate> {
    let (mu_min, mu_max, kappa2_w) = bound_ingredients(prior)?;
    let alpha_lb_general = general_bound(prior, mu_min, mu_max, kappa2_w);
    let alpha_lb_homo = match prior.gamma() {
        Some(g) => Some(alpha_lower_bound_homoscedastic(g, kappa2_w)?),
        None => None,
    };
    let (alpha_exact, witness) = match alpha_exact_mse(prior, max_nodes) {
        Ok(search) => (Some(search.alpha), search.witness),
        Err(Error::Infeasible { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(AlphaEstimate {
        alpha_exact,
        alpha_lb_general,
        alpha_lb_homo,
        witness,
        mu_min,
        mu_max,
        kappa2_w,
        gamma: prior.gamma(),
    })
}

/// `(f_G − f*) / (f({}) − f*)`, clamped to `[0, 1]`.
pub fn relative_suboptimality(f_greedy: f64, f_star: f64, f_empty: f64) -> Result<f64> {
    if f_greedy < f_star - 1e-9 * f_star.abs() {
        return Err(Error::Consistency(format!(
            "greedy value {f_greedy} is below the optimum {f_star}"
        )));
    }
    let span = f_empty - f_star;
    if !(span > 0.0) {
        return Ok(0.0);
    }
    Ok(((f_greedy - f_star) / span).clamp(0.0, 1.0))
}

/// Both forms of the greedy guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guarantee {
    /// `(1 − α/k)^ℓ`.
    pub exact: f64,
    /// `e^{−αℓ/k}`.
    pub exp_bound: f64,
}

/// Bound on the relative suboptimality after `ell` greedy steps when the
/// optimum uses `k` nodes.
pub fn greedy_guarantee(alpha: f64, k: usize, ell: usize) -> Result<Guarantee> {
    if k == 0 {
        return param("optimal set size must be positive");
    }
    let kf = k as f64;
    if !(0.0..=kf).contains(&alpha) {
        return param(format!("α must lie in [0, {k}], got {alpha}"));
    }
    let r = alpha / kf;
    Ok(Guarantee {
        exact: (1.0 - r).powi(ell as i32),
        exp_bound: (-r * ell as f64).exp(),
    })
}
