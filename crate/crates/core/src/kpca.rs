//! Kernel PCA treated as a graph sampling problem on the Gram matrix.
//!
//! The Gram matrix `Φ` plays the role of the adjacency matrix, so projecting
//! a point onto the leading components is a partial GFT of the kernel vector
//! `ỹ = [κ(u_i, y)]`. A greedy sampling set `S` and the interpolator `L*`
//! give the reduced projector `P = V_Kᵀ L*`, which needs only `|S|` kernel
//! evaluations per new point.

use std::f64::consts::TAU;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, param, Result};
use crate::graphs::{EigenOrder, SpectralBasis};
use crate::interp::optimal_interpolator;
use crate::rng::rng_from_seed;
use crate::samplers::greedy_mse;
use crate::signals::{Prior, Transform};

/// Retained eigenvalues are clamped below at this fraction of the largest.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// A kernel function on feature vectors of equal length.
pub trait KernelFn: Sync {
    fn eval(&self, r: &[f64], s: &[f64]) -> f64;
}

/// `κ(r, s) = (rᵀs + c)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyKernel {
    pub d: u32,
    pub c: f64,
}

impl PolyKernel {
    /// Degree `d` with unit offset.
    pub fn new(d: u32) -> Result<Self> {
        if d == 0 {
            return param("kernel degree must be at least 1");
        }
        Ok(Self { d, c: 1.0 })
    }
}

impl KernelFn for PolyKernel {
    fn eval(&self, r: &[f64], s: &[f64]) -> f64 {
        let dot: f64 = r.iter().zip(s).map(|(a, b)| a * b).sum();
        (dot + self.c).powi(self.d as i32)
    }
}

/// `(rᵀs + 1)^d`.
pub fn poly_kernel(r: &[f64], s: &[f64], d: u32) -> Result<f64> {
    if r.len() != s.len() {
        return param(format!(
            "feature vectors have lengths {} and {}",
            r.len(),
            s.len()
        ));
    }
    Ok(PolyKernel::new(d)?.eval(r, s))
}

/// Counts evaluations of the wrapped kernel.
#[derive(Debug)]
pub struct CountingKernel<K> {
    inner: K,
    count: AtomicUsize,
}

impl<K: KernelFn> CountingKernel<K> {
    pub fn new(inner: K) -> Self {
        Self {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::Relaxed);
    }
}

impl<K: KernelFn> KernelFn for CountingKernel<K> {
    fn eval(&self, r: &[f64], s: &[f64]) -> f64 {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(r, s)
    }
}

/// Training data, its Gram matrix and, once chosen, the retained components.
#[derive(Debug, Clone)]
pub struct GramModel {
    data: Vec<Vec<f64>>,
    phi: DMatrix<f64>,
    kernel: PolyKernel,
    basis: Option<SpectralBasis>,
}

fn check_data(data: &[Vec<f64>]) -> Result<usize> {
    let dim = match data.first() {
        Some(u) => u.len(),
        None => return param("training set is empty"),
    };
    if data.iter().any(|u| u.len() != dim) {
        return param("training points have differing dimensions");
    }
    if data.iter().flatten().any(|x| !x.is_finite()) {
        return param("training data has non-finite entries");
    }
    Ok(dim)
}

/// `Φ = [κ(u_i, u_j)]`.
pub fn gram_matrix(data: &[Vec<f64>], kernel: PolyKernel) -> Result<GramModel> {
    check_data(data)?;
    let n = data.len();
    let mut phi = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval(&data[i], &data[j]);
            phi[(i, j)] = v;
            phi[(j, i)] = v;
        }
    }
    Ok(GramModel {
        data: data.to_vec(),
        phi,
        kernel,
        basis: None,
    })
}

/// Keeps the `k` components with the largest (signed) eigenvalues.
pub fn kpca_basis(model: &GramModel, k: usize) -> Result<GramModel> {
    let basis = SpectralBasis::from_symmetric(&model.phi, EigenOrder::Signed)?.select_band(k)?;
    Ok(GramModel {
        basis: Some(basis),
        ..model.clone()
    })
}

impl GramModel {
    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn kernel(&self) -> PolyKernel {
        self.kernel
    }

    pub fn basis(&self) -> Option<&SpectralBasis> {
        self.basis.as_ref()
    }

    /// Number of retained components (zero before `kpca_basis`).
    pub fn k(&self) -> usize {
        self.basis.as_ref().map_or(0, |b| b.band().len())
    }

    fn require_basis(&self) -> Result<&SpectralBasis> {
        match &self.basis {
            Some(b) => Ok(b),
            None => param("no components selected; call kpca_basis first"),
        }
    }

    /// Retained eigenvalues `D_K`.
    pub fn retained_eigenvalues(&self) -> Result<Vec<f64>> {
        let b = self.require_basis()?;
        Ok(b.band().iter().map(|&i| b.eigenvalues()[i]).collect())
    }

    /// Kernel vector `ỹ = [κ(u_i, y)]`.
    pub fn kernel_vector(&self, kernel: &dyn KernelFn, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.data[0].len() {
            return param(format!(
                "point has dimension {}, training data has {}",
                y.len(),
                self.data[0].len()
            ));
        }
        Ok(DVector::from_iterator(
            self.n(),
            self.data.iter().map(|u| kernel.eval(u, y)),
        ))
    }

    /// Prior on the Gram graph: `Λ = D_K` (floored), `Λ_w = σ_w² I`, `H = I`.
    pub fn prior(&self, sigma_w2: f64) -> Result<Prior> {
        if !(sigma_w2 > 0.0 && sigma_w2.is_finite()) {
            return param(format!("regularizer must be positive, got {sigma_w2}"));
        }
        let b = self.require_basis()?;
        let d = self.retained_eigenvalues()?;
        let top = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(top > 0.0) {
            return domain("Gram matrix has no positive retained eigenvalue");
        }
        let lambda = d.iter().map(|&x| x.max(EIGEN_FLOOR * top)).collect();
        Prior::from_band_vectors(
            b.band_vectors().clone(),
            b.band().to_vec(),
            lambda,
            vec![sigma_w2; self.n()],
            Transform::Identity,
        )
    }
}

/// `ȳ = V_Kᵀ ỹ`, using `n` kernel evaluations.
pub fn kpca_project(model: &GramModel, y: &[f64]) -> Result<DVector<f64>> {
    kpca_project_with(model, &model.kernel, y)
}

/// As [`kpca_project`] with a caller-supplied kernel (for instrumentation).
pub fn kpca_project_with(
    model: &GramModel,
    kernel: &dyn KernelFn,
    y: &[f64],
) -> Result<DVector<f64>> {
    let b = model.require_basis()?;
    Ok(b.band_vectors().tr_mul(&model.kernel_vector(kernel, y)?))
}

/// `P = V_Kᵀ L*(S)` together with the sampled training indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProjector {
    pub indices: Vec<usize>,
    pub p: DMatrix<f64>,
    pub k: usize,
    pub sigma_w2: f64,
    pub kernel: PolyKernel,
}

#[derive(Serialize, Deserialize)]
struct KernelRecord {
    #[serde(rename = "type")]
    kind: String,
    d: u32,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct ProjectorRecord {
    indices: Vec<usize>,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    k: usize,
    sigma_w2: f64,
    kernel: KernelRecord,
}

impl ReducedProjector {
    /// `|S| / n`.
    pub fn reduction_ratio(&self, n: usize) -> f64 {
        self.indices.len() as f64 / n as f64
    }

    pub fn to_json(&self) -> Result<String> {
        let rec = ProjectorRecord {
            indices: self.indices.clone(),
            p: self
                .p
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            k: self.k,
            sigma_w2: self.sigma_w2,
            kernel: KernelRecord {
                kind: "poly".into(),
                d: self.kernel.d,
                c: self.kernel.c,
            },
        };
        Ok(serde_json::to_string_pretty(&rec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: ProjectorRecord = serde_json::from_str(text)?;
        if rec.kernel.kind != "poly" {
            return param(format!("unsupported kernel type {:?}", rec.kernel.kind));
        }
        let cols = rec.indices.len();
        if rec.p.len() != rec.k || rec.p.iter().any(|r| r.len() != cols) {
            return param(format!("P must be {} × {cols}", rec.k));
        }
        let p = DMatrix::from_fn(rec.k, cols, |i, j| rec.p[i][j]);
        let kernel = PolyKernel {
            d: rec.kernel.d,
            c: rec.kernel.c,
        };
        Ok(Self {
            indices: rec.indices,
            p,
            k: rec.k,
            sigma_w2: rec.sigma_w2,
            kernel,
        })
    }
}

/// Greedy `budget`-point sampling set and its reduced projector.
pub fn build_reduced_projector(
    model: &GramModel,
    budget: usize,
    sigma_w2: f64,
) -> Result<ReducedProjector> {
    let prior = model.prior(sigma_w2)?;
    let set = greedy_mse(&prior, budget)?;
    projector_from_prior(model, &prior, set.indices(), sigma_w2)
}

/// Reduced projector for a given sampling set.
pub fn build_projector_with_set(
    model: &GramModel,
    s: &[usize],
    sigma_w2: f64,
) -> Result<ReducedProjector> {
    let prior = model.prior(sigma_w2)?;
    projector_from_prior(model, &prior, s, sigma_w2)
}

fn projector_from_prior(
    model: &GramModel,
    prior: &Prior,
    s: &[usize],
    sigma_w2: f64,
) -> Result<ReducedProjector> {
    let l = optimal_interpolator(prior, s)?;
    let p = prior.band_vectors().tr_mul(&l.matrix);
    Ok(ReducedProjector {
        indices: l.indices,
        p,
        k: model.k(),
        sigma_w2,
        kernel: model.kernel,
    })
}

/// `ȳ ≈ P ỹ_S`, evaluating the kernel only at the sampled training points.
pub fn sub_project(
    proj: &ReducedProjector,
    data: &[Vec<f64>],
    kernel: &dyn KernelFn,
    y: &[f64],
) -> Result<DVector<f64>> {
    let mut ys = DVector::zeros(proj.indices.len());
    for (slot, &i) in proj.indices.iter().enumerate() {
        let u = match data.get(i) {
            Some(u) => u,
            None => {
                return param(format!(
                    "projector references training point {i}, data has {}",
                    data.len()
                ))
            }
        };
        if u.len() != y.len() {
            return param(format!(
                "point has dimension {}, training data has {}",
                y.len(),
                u.len()
            ));
        }
        ys[slot] = kernel.eval(u, y);
    }
    Ok(&proj.p * ys)
}

/// Two noisy concentric circles of radii 1 and 3; returns points and circle labels.
pub fn two_circles(n: usize, noise: f64, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return param(format!(
            "radial noise must be finite and nonnegative, got {noise}"
        ));
    }
    let radial = match Normal::new(0.0, noise) {
        Ok(d) => d,
        Err(e) => return param(format!("invalid noise level {noise}: {e}")),
    };
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = usize::from(i >= n / 2);
        let r = [1.0, 3.0][label] + radial.sample(&mut rng);
        let theta = rng.random_range(0.0..TAU);
        points.push(vec![r * theta.cos(), r * theta.sin()]);
        labels.push(label);
    }
    Ok((points, labels))
}
