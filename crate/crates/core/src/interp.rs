//! Optimal linear interpolation from a sampling set, its error covariance and MSE.
//!
//! Everything is computed in the `|K|`-dimensional inner space through
//! `Z(S) = Λ⁻¹ + Σ_{i∈S} λ_{w,i}⁻¹ v_i v_iᵀ` and `K̄(S) = Z(S)⁻¹`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::linalg::{cholesky, diag, dot, extreme_eigenvalues, mat_vec, symmetrize, trace_product};
use crate::signals::Prior;

/// Condition number of `Z` above which interpolators carry a warning.
pub const CONDITION_WARNING: f64 = 1e12;

/// Ordered, duplicate-free list of sampled nodes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingSet {
    indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trajectory: Option<Vec<f64>>,
}

impl SamplingSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// All nodes `0..n` in order.
    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
            trajectory: None,
        }
    }

    /// Validates that `indices` are distinct and below `n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for &i in &indices {
            if i >= n {
                return param(format!("node {i} out of range for {n} nodes"));
            }
            if std::mem::replace(&mut seen[i], true) {
                return param(format!("node {i} listed twice"));
            }
        }
        Ok(Self {
            indices,
            trajectory: None,
        })
    }

    pub fn with_trajectory(mut self, trajectory: Vec<f64>) -> Self {
        self.trajectory = Some(trajectory);
        self
    }

    /// Appends `i` unless already present; returns whether it was added.
    pub fn insert(&mut self, i: usize) -> bool {
        if self.contains(i) {
            return false;
        }
        self.indices.push(i);
        true
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn trajectory(&self) -> Option<&[f64]> {
        self.trajectory.as_deref()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Indices in ascending order.
    pub fn sorted(&self) -> Vec<usize> {
        let mut s = self.indices.clone();
        s.sort_unstable();
        s
    }
}

/// Range-checks `s` and drops repeated entries, keeping first occurrences.
pub(crate) fn as_node_set(n: usize, s: &[usize]) -> Result<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(s.len());
    for &i in s {
        if i >= n {
            return param(format!("node {i} out of range for {n} nodes"));
        }
        if !std::mem::replace(&mut seen[i], true) {
            out.push(i);
        }
    }
    Ok(out)
}

/// `Z(S) = Λ⁻¹ + Σ_{i∈S} λ_{w,i}⁻¹ v_i v_iᵀ` for an already validated set.
pub(crate) fn information_matrix(prior: &Prior, s: &[usize]) -> DMatrix<f64> {
    let k = prior.bandwidth();
    let inv: Vec<f64> = prior.lambda().iter().map(|l| 1.0 / l).collect();
    let mut z = diag(&inv);
    for &i in s {
        let v = prior.node_row(i);
        let weight = 1.0 / prior.lambda_w()[i];
        for a in 0..k {
            let wa = weight * v[a];
            for b in 0..k {
                z[(a, b)] += wa * v[b];
            }
        }
    }
    symmetrize(&mut z);
    z
}

/// Inner information matrix, its inverse and the MSE, updatable one node at a time.
#[derive(Debug, Clone)]
pub struct ErrorState {
    z: DMatrix<f64>,
    kbar: DMatrix<f64>,
    mse: f64,
    members: Vec<bool>,
}

impl ErrorState {
    /// State for `S = {}`: `Z = Λ⁻¹`, `K̄ = Λ`.
    pub fn empty(prior: &Prior) -> Self {
        let inv: Vec<f64> = prior.lambda().iter().map(|l| 1.0 / l).collect();
        let kbar = diag(prior.lambda());
        let mse = trace_product(prior.w(), &kbar);
        Self {
            z: diag(&inv),
            kbar,
            mse,
            members: vec![false; prior.n()],
        }
    }

    /// Direct construction by factorizing `Z(S)`.
    pub fn for_set(prior: &Prior, s: &[usize]) -> Result<Self> {
        let s = as_node_set(prior.n(), s)?;
        let z = information_matrix(prior, &s);
        let mut kbar = cholesky(z.clone(), "Z(S)")?.inverse();
        symmetrize(&mut kbar);
        let mse = trace_product(prior.w(), &kbar);
        let mut members = vec![false; prior.n()];
        s.iter().for_each(|&i| members[i] = true);
        Ok(Self {
            z,
            kbar,
            mse,
            members,
        })
    }

    /// Adds node `u` with a rank-1 update of `Z` and a Sherman–Morrison
    /// downdate of `K̄`. Returns false (and changes nothing) if `u` is already in.
    pub fn add(&mut self, prior: &Prior, u: usize) -> Result<bool> {
        if u >= prior.n() {
            return param(format!("node {u} out of range for {} nodes", prior.n()));
        }
        if self.members[u] {
            return Ok(false);
        }
        let k = prior.bandwidth();
        let v = prior.node_row(u);
        let lw = prior.lambda_w()[u];
        let mut a = vec![0.0; k];
        mat_vec(&self.kbar, v, &mut a);
        let den = lw + dot(v, &a);
        for i in 0..k {
            for j in 0..k {
                self.z[(i, j)] += v[i] * v[j] / lw;
                self.kbar[(i, j)] -= a[i] * a[j] / den;
            }
        }
        symmetrize(&mut self.kbar);
        self.mse = trace_product(prior.w(), &self.kbar);
        self.members[u] = true;
        Ok(true)
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// `K̄(S) = Z(S)⁻¹`.
    pub fn kbar(&self) -> &DMatrix<f64> {
        &self.kbar
    }

    /// `trace(W K̄)`.
    pub fn mse(&self) -> f64 {
        self.mse
    }

    pub fn contains(&self, u: usize) -> bool {
        self.members[u]
    }
}

/// `K*(S) = H V_K K̄(S) V_Kᵀ Hᵀ`, symmetrized.
pub fn error_covariance(prior: &Prior, s: &[usize]) -> Result<DMatrix<f64>> {
    let state = ErrorState::for_set(prior, s)?;
    let hv = prior.transformed_band();
    let mut k = &hv * state.kbar() * hv.transpose();
    symmetrize(&mut k);
    Ok(k)
}

/// `MSE(S) = trace(W K̄(S))`.
pub fn mse(prior: &Prior, s: &[usize]) -> Result<f64> {
    Ok(ErrorState::for_set(prior, s)?.mse())
}

/// The optimal linear interpolator `L*` for a fixed sampling set.
#[derive(Debug, Clone)]
pub struct Interpolator {
    pub matrix: DMatrix<f64>,
    pub indices: Vec<usize>,
    /// Spectral condition number of `Z(S)`.
    pub condition: f64,
    pub warning: Option<String>,
}

impl Interpolator {
    /// `ẑ = L* y_S`.
    pub fn apply(&self, y_s: &DVector<f64>) -> Result<DVector<f64>> {
        interpolate(&self.matrix, y_s)
    }

    /// `ẑ` from a full observation vector, reading only the sampled entries.
    pub fn apply_full(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.apply(&restrict(y, &self.indices)?)
    }
}

/// `L* = H V_K K̄(S) V_Sᵀ Λ_{w,S}⁻¹`.
///
/// This is algebraically the solution of `L C(Σ+Λ_w)Cᵀ = HΣCᵀ`, obtained by
/// factorizing the `|K|×|K|` matrix `Z(S)` instead of the `|S|×|S|` system.
/// The small system stays well posed when the noise variance is tiny.
pub fn optimal_interpolator(prior: &Prior, s: &[usize]) -> Result<Interpolator> {
    let s = as_node_set(prior.n(), s)?;
    if s.is_empty() {
        return param("cannot interpolate from an empty sampling set");
    }
    let k = prior.bandwidth();
    let z = information_matrix(prior, &s);
    let (lo, hi) = extreme_eigenvalues(&z);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let chol = cholesky(z, "Z(S)")?;
    let rhs = DMatrix::from_fn(k, s.len(), |a, j| {
        prior.node_row(s[j])[a] / prior.lambda_w()[s[j]]
    });
    let inner = chol.solve(&rhs);
    let matrix = prior.transformed_band() * inner;
    let warning = (condition > CONDITION_WARNING).then(|| {
        format!("information matrix condition number {condition:.3e} exceeds {CONDITION_WARNING:e}")
    });
    Ok(Interpolator {
        matrix,
        indices: s,
        condition,
        warning,
    })
}

/// `ẑ = L y_S`.
pub fn interpolate(l: &DMatrix<f64>, y_s: &DVector<f64>) -> Result<DVector<f64>> {
    if l.ncols() != y_s.len() {
        return param(format!(
            "interpolator expects {} samples, got {}",
            l.ncols(),
            y_s.len()
        ));
    }
    Ok(l * y_s)
}

/// `y_S = C y`.
pub fn restrict(y: &DVector<f64>, s: &[usize]) -> Result<DVector<f64>> {
    if let Some(&bad) = s.iter().find(|&&i| i >= y.len()) {
        return param(format!(
            "node {bad} out of range for a length-{} signal",
            y.len()
        ));
    }
    Ok(DVector::from_iterator(s.len(), s.iter().map(|&i| y[i])))
}
