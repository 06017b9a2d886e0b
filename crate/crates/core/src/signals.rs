//! Bayesian priors for bandlimited graph signals and seeded draws from them.
//!
//! The signal prior is `x = V_K x̄_K` with `x̄_K ~ N(0, Λ)`; observations are
//! `y = x + w` with `w ~ N(0, Λ_w)`. Both covariances are diagonal and
//! strictly positive. The quantity of interest is `z = H x`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, param, Result};
use crate::graphs::SpectralBasis;
use crate::linalg::{extreme_eigenvalues, row, symmetrize};
use crate::rng::rng_from_seed;

/// Relative spread below which variances count as identical.
pub const HOMOSCEDASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Identity,
    /// An `m × n` matrix applied to the graph signal.
    Matrix(DMatrix<f64>),
}

/// Signal and noise statistics over a fixed band, with `W = V_Kᵀ Hᵀ H V_K` cached.
#[derive(Debug, Clone)]
pub struct Prior {
    band: Vec<usize>,
    band_vectors: DMatrix<f64>,
    rows: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    lambda_w: Vec<f64>,
    transform: Transform,
    w: DMatrix<f64>,
    gamma: Option<f64>,
}

/// Builds a prior on the band selected in `basis`.
pub fn make_prior(
    basis: &SpectralBasis,
    lambda: Vec<f64>,
    lambda_w: Vec<f64>,
    transform: Transform,
) -> Result<Prior> {
    if basis.band().is_empty() {
        return param("basis has no selected band; call select_band first");
    }
    Prior::from_band_vectors(
        basis.band_vectors().clone(),
        basis.band().to_vec(),
        lambda,
        lambda_w,
        transform,
    )
}

impl Prior {
    /// Builds a prior directly from `V_K`. The columns of `v_k` are expected
    /// to be orthonormal; nothing else in the crate needs the graph itself.
    pub fn from_band_vectors(
        v_k: DMatrix<f64>,
        band: Vec<usize>,
        lambda: Vec<f64>,
        lambda_w: Vec<f64>,
        transform: Transform,
    ) -> Result<Self> {
        let (n, k) = v_k.shape();
        if k == 0 || n == 0 {
            return param("band vectors must be a nonempty n × |K| matrix");
        }
        if band.len() != k {
            return param(format!("band lists {} indices for {k} columns", band.len()));
        }
        if lambda.len() != k {
            return param(format!(
                "signal spectrum has {} entries, band has {k}",
                lambda.len()
            ));
        }
        if lambda_w.len() != n {
            return param(format!(
                "noise spectrum has {} entries, graph has {n} nodes",
                lambda_w.len()
            ));
        }
        if let Some(bad) = lambda
            .iter()
            .chain(&lambda_w)
            .find(|v| !(v.is_finite() && **v > 0.0))
        {
            return param(format!(
                "variances must be finite and strictly positive, got {bad}"
            ));
        }
        let hv = match &transform {
            Transform::Identity => v_k.clone(),
            Transform::Matrix(h) => {
                if h.ncols() != n {
                    return param(format!(
                        "transform has {} columns, graph has {n} nodes",
                        h.ncols()
                    ));
                }
                if h.iter().any(|x| !x.is_finite()) {
                    return param("transform has non-finite entries");
                }
                h * &v_k
            }
        };
        let mut w = hv.tr_mul(&hv);
        symmetrize(&mut w);
        let (lo, hi) = extreme_eigenvalues(&w);
        if lo < -1e-12 * hi.abs().max(1.0) {
            return domain(format!(
                "W is not positive semidefinite (min eigenvalue {lo:e})"
            ));
        }

        let flat = |v: &[f64]| v.iter().all(|x| (x - v[0]).abs() <= HOMOSCEDASTIC_TOL);
        let gamma = (flat(&lambda) && flat(&lambda_w)).then(|| lambda[0] / lambda_w[0]);
        let rows = (0..n).map(|i| row(&v_k, i)).collect();
        Ok(Self {
            band,
            band_vectors: v_k,
            rows,
            lambda,
            lambda_w,
            transform,
            w,
            gamma,
        })
    }

    /// `Λ = σ_x² I`, `Λ_w = σ_w² I`, `H = I`.
    pub fn homoscedastic(
        basis: &SpectralBasis,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        let k = basis.band().len();
        make_prior(
            basis,
            vec![signal_variance; k],
            vec![noise_variance; basis.n()],
            Transform::Identity,
        )
    }

    pub fn n(&self) -> usize {
        self.band_vectors.nrows()
    }

    /// `|K|`.
    pub fn bandwidth(&self) -> usize {
        self.band_vectors.ncols()
    }

    /// Rows of the estimated quantity `z = H x`.
    pub fn output_dim(&self) -> usize {
        match &self.transform {
            Transform::Identity => self.n(),
            Transform::Matrix(h) => h.nrows(),
        }
    }

    pub fn band(&self) -> &[usize] {
        &self.band
    }

    pub fn band_vectors(&self) -> &DMatrix<f64> {
        &self.band_vectors
    }

    /// `v_i`, row `i` of `V_K`.
    pub fn node_row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn lambda_w(&self) -> &[f64] {
        &self.lambda_w
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    /// `W = V_Kᵀ Hᵀ H V_K` (symmetrized).
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// SNR `σ_x²/σ_w²` when both spectra are flat.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn is_homoscedastic(&self) -> bool {
        self.gamma.is_some()
    }

    /// `Σ = V_K Λ V_Kᵀ`.
    pub fn signal_covariance(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.n(), self.bandwidth(), |i, j| {
            self.band_vectors[(i, j)] * self.lambda[j]
        });
        let mut s = scaled * self.band_vectors.transpose();
        symmetrize(&mut s);
        s
    }

    /// `H V_K`.
    pub fn transformed_band(&self) -> DMatrix<f64> {
        match &self.transform {
            Transform::Identity => self.band_vectors.clone(),
            Transform::Matrix(h) => h * &self.band_vectors,
        }
    }

    /// `z = H x`.
    pub fn apply_transform(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n() {
            return param(format!(
                "signal has length {}, prior has {} nodes",
                x.len(),
                self.n()
            ));
        }
        Ok(match &self.transform {
            Transform::Identity => x.clone(),
            Transform::Matrix(h) => h * x,
        })
    }

    pub fn to_spec(&self) -> PriorSpec {
        let h = match &self.transform {
            Transform::Identity => TransformSpec::Named("identity".into()),
            Transform::Matrix(h) => {
                TransformSpec::Rows(h.row_iter().map(|r| r.iter().copied().collect()).collect())
            }
        };
        PriorSpec {
            lambda: self.lambda.clone(),
            lambda_w: self.lambda_w.clone(),
            h,
            k: self.band.clone(),
        }
    }

    /// Rebuilds a prior on `basis` (any band) from its serialized form.
    pub fn from_spec(basis: &SpectralBasis, spec: &PriorSpec) -> Result<Self> {
        let banded = basis.with_band(spec.k.clone())?;
        let transform = match &spec.h {
            TransformSpec::Named(name) if name == "identity" => Transform::Identity,
            TransformSpec::Named(name) => return param(format!("unknown transform {name:?}")),
            TransformSpec::Rows(rows) => {
                let m = rows.len();
                let n = rows.first().map_or(0, Vec::len);
                if m == 0 || rows.iter().any(|r| r.len() != n) {
                    return param("transform rows must be nonempty and of equal length");
                }
                Transform::Matrix(DMatrix::from_fn(m, n, |i, j| rows[i][j]))
            }
        };
        make_prior(
            &banded,
            spec.lambda.clone(),
            spec.lambda_w.clone(),
            transform,
        )
    }
}

/// Wire format `{lambda, lambda_w, H, K}`; `H` is `"identity"` or an array of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub lambda: Vec<f64>,
    pub lambda_w: Vec<f64>,
    #[serde(rename = "H")]
    pub h: TransformSpec,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransformSpec {
    Named(String),
    Rows(Vec<Vec<f64>>),
}

/// One realization of the generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDraw {
    pub x: DVector<f64>,
    pub xbar: DVector<f64>,
    pub y: DVector<f64>,
    pub w: DVector<f64>,
    pub seed: u64,
}

/// Gaussian draw: `x̄_K ~ N(0, Λ)`, `w ~ N(0, Λ_w)`, `x = V_K x̄_K`, `y = x + w`.
pub fn draw_signal(prior: &Prior, seed: u64) -> SignalDraw {
    let mut rng = rng_from_seed(seed);
    let mut gauss = |var: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        var.sqrt() * z
    };
    let xbar = DVector::from_iterator(prior.bandwidth(), prior.lambda.iter().map(|&l| gauss(l)));
    let w = DVector::from_iterator(prior.n(), prior.lambda_w.iter().map(|&l| gauss(l)));
    let x = &prior.band_vectors * &xbar;
    let y = &x + &w;
    SignalDraw {
        x,
        xbar,
        y,
        w,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{gen_erdos_renyi, gen_random_weighted, spectral_basis};
    use crate::rng::sub_seed;
    use rand::Rng;

    fn basis(n: usize, k: usize, seed: u64) -> SpectralBasis {
        spectral_basis(&gen_random_weighted(n, seed).unwrap())
            .unwrap()
            .select_band(k)
            .unwrap()
    }

    #[test]
    fn identity_transform_gives_identity_w() {
        let b = spectral_basis(&gen_erdos_renyi(20, 0.2, 1).unwrap())
            .unwrap()
            .select_band(5)
            .unwrap();
        let p = make_prior(&b, vec![1.0; 5], vec![1e-2; 20], Transform::Identity).unwrap();
        assert!((p.w() - DMatrix::identity(5, 5)).amax() <= 1e-12);
        assert!((p.gamma().unwrap() - 100.0).abs() < 1e-9);
        let (lo, hi) = extreme_eigenvalues(p.w());
        assert!((hi / lo - 1.0).abs() < 1e-10);
    }

    #[test]
    fn random_transform_setting() {
        let b = basis(20, 5, 2);
        let mut rng = rng_from_seed(3);
        let h = DMatrix::from_fn(30, 20, |_, _| StandardNormal.sample(&mut rng));
        let lw: Vec<f64> = (0..20).map(|_| rng.random_range(1e-3..1e-1)).collect();
        let p = make_prior(&b, vec![1.0; 5], lw, Transform::Matrix(h.clone())).unwrap();
        assert!(!p.is_homoscedastic());
        assert_eq!(p.output_dim(), 30);
        let hv = &h * b.band_vectors();
        assert!((p.w() - hv.tr_mul(&hv)).amax() <= 1e-10);
    }

    #[test]
    fn rejects_bad_parameters() {
        let b = basis(6, 2, 1);
        assert!(make_prior(&b, vec![1.0, 0.0], vec![1.0; 6], Transform::Identity).is_err());
        assert!(make_prior(&b, vec![1.0; 2], vec![0.0; 6], Transform::Identity).is_err());
        assert!(make_prior(&b, vec![1.0; 2], vec![-1.0; 6], Transform::Identity).is_err());
        assert!(make_prior(&b, vec![1.0; 3], vec![1.0; 6], Transform::Identity).is_err());
        assert!(make_prior(
            &b,
            vec![1.0; 2],
            vec![1.0; 6],
            Transform::Matrix(DMatrix::zeros(3, 5))
        )
        .is_err());
        let unbanded = spectral_basis(&gen_random_weighted(6, 1).unwrap()).unwrap();
        assert!(make_prior(&unbanded, vec![1.0], vec![1.0; 6], Transform::Identity).is_err());
    }

    #[test]
    fn homoscedastic_detection() {
        let b = basis(6, 2, 1);
        let p = make_prior(&b, vec![2.0, 2.0], vec![0.5; 6], Transform::Identity).unwrap();
        assert_eq!(p.gamma(), Some(4.0));
        let p = make_prior(&b, vec![2.0, 2.0 + 1e-9], vec![0.5; 6], Transform::Identity).unwrap();
        assert_eq!(p.gamma(), None);
        let mut lw = vec![0.5; 6];
        lw[3] = 0.6;
        assert!(!make_prior(&b, vec![2.0, 2.0], lw, Transform::Identity)
            .unwrap()
            .is_homoscedastic());
    }

    #[test]
    fn draws_are_bandlimited_and_reproducible() {
        let full = spectral_basis(&gen_random_weighted(15, 4).unwrap()).unwrap();
        let b = full.select_band(4).unwrap();
        let p = Prior::homoscedastic(&b, 1.0, 0.1).unwrap();
        for seed in 0..50 {
            let d = draw_signal(&p, seed);
            assert_eq!(d.y, &d.x + &d.w);
            assert!((&d.x - b.band_vectors() * &d.xbar).amax() <= 1e-12);
            let spec = full.gft(&d.x).unwrap();
            for i in 4..15 {
                assert!(spec[i].abs() <= 1e-10 * d.x.norm());
            }
            assert_eq!(d, draw_signal(&p, seed));
        }
    }

    #[test]
    fn vanishing_signal_variance() {
        let b = basis(10, 3, 1);
        let p = Prior::homoscedastic(&b, 1e-30, 1.0).unwrap();
        assert!(draw_signal(&p, 1).x.norm() < 1e-12);
    }

    #[test]
    fn empirical_moments() {
        let b = basis(10, 3, 5);
        let p = make_prior(&b, vec![2.0, 1.0, 0.5], vec![0.1; 10], Transform::Identity).unwrap();
        let draws = 10_000;
        let mut cov = DMatrix::zeros(10, 10);
        let mut mean_y = DVector::zeros(10);
        for t in 0..draws {
            let d = draw_signal(&p, sub_seed(99, t));
            cov += &d.x * d.x.transpose();
            mean_y += &d.y;
        }
        cov /= draws as f64;
        mean_y /= draws as f64;
        let sigma = p.signal_covariance();
        assert!((&cov - &sigma).norm() / sigma.norm() <= 0.10);
        let total_var = sigma.trace() + p.lambda_w().iter().sum::<f64>();
        assert!(mean_y.norm() <= 3.0 * (total_var / draws as f64).sqrt());
    }

    #[test]
    fn spec_round_trip() {
        let full = spectral_basis(&gen_random_weighted(5, 4).unwrap()).unwrap();
        let b = full.with_band(vec![0, 2]).unwrap();
        let h = DMatrix::from_fn(3, 5, |i, j| (i + 2 * j) as f64);
        let p = make_prior(&b, vec![1.0, 2.0], vec![0.1; 5], Transform::Matrix(h)).unwrap();
        let text = serde_json::to_string(&p.to_spec()).unwrap();
        assert!(text.contains("\"H\":[["));
        let back = Prior::from_spec(&full, &serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.band(), p.band());
        assert_eq!(back.w(), p.w());

        let ident: PriorSpec = serde_json::from_str(
            r#"{"lambda":[1.0],"lambda_w":[1,1,1,1,1],"H":"identity","K":[1]}"#,
        )
        .unwrap();
        let p = Prior::from_spec(&full, &ident).unwrap();
        assert_eq!(p.transform(), &Transform::Identity);
    }
}
