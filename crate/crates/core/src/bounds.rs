//! Sampling-set independent MSE bounds and the sample-count bounds they imply.
//!
//! For any `S` with `|S| = m`:
//! `|K|² / (trace[(WΛ)⁻¹] + L_m) ≤ MSE(S) ≤ trace(WΛ)`, where `L_m` is the sum
//! of the `m` largest weighted structural SNRs `ℓ_i = λ_{w,i}⁻¹ v_iᵀ W⁻¹ v_i`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{domain, param, Result};
use crate::linalg::{cholesky, extreme_eigenvalues, symmetrize};
use crate::signals::Prior;

/// `W` counts as singular when `λ_min(W) ≤ W_SINGULAR_TOL · λ_max(W)`.
pub const W_SINGULAR_TOL: f64 = 1e-12;

/// Everything needed to evaluate the bounds for any sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub bandwidth: usize,
    /// `ℓ_i` in node order.
    pub ell: Vec<f64>,
    /// `L_0, L_1, ..., L_n`.
    pub ell_prefix: Vec<f64>,
    pub ell_max: f64,
    /// `trace(WΛ)`, attained by the empty set.
    pub upper: f64,
    pub trace_wlambda_inv: f64,
    pub lambda_min_wlambda: f64,
}

/// Result of inverting the lower bound for a target MSE `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetSizeBound {
    /// Threshold that `L_|S|` must reach.
    pub l_bound: f64,
    /// `⌈l_bound / ℓ_max⌉`, clamped at zero.
    pub size_bound: usize,
    /// Smallest `m` with `L_m ≥ l_bound`; `None` if even `L_n` falls short.
    pub tight_size: Option<usize>,
}

impl BoundsReport {
    pub fn new(prior: &Prior) -> Result<Self> {
        let w = prior.w();
        let k = prior.bandwidth();
        let (lo, hi) = extreme_eigenvalues(w);
        if !(lo > W_SINGULAR_TOL * hi) {
            return domain(format!(
                "the bounds require W = V_Kᵀ Hᵀ H V_K to be positive definite (eigenvalues {lo:e} .. {hi:e})"
            ));
        }
        let chol = cholesky(w.clone(), "W")?;
        let vt = prior.band_vectors().transpose();
        let solved = chol.solve(&vt);
        let ell: Vec<f64> = (0..prior.n())
            .map(|i| {
                let q: f64 = (0..k).map(|a| vt[(a, i)] * solved[(a, i)]).sum();
                q.max(0.0) / prior.lambda_w()[i]
            })
            .collect();

        let mut sorted = ell.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut ell_prefix = Vec::with_capacity(sorted.len() + 1);
        ell_prefix.push(0.0);
        let mut acc = 0.0;
        for x in &sorted {
            acc += x;
            ell_prefix.push(acc);
        }

        let lambda = prior.lambda();
        let upper = (0..k).map(|a| w[(a, a)] * lambda[a]).sum();
        // trace[(WΛ)⁻¹] = Σ_a (W⁻¹)_aa / λ_a
        let w_inv = chol.inverse();
        let trace_wlambda_inv = (0..k).map(|a| w_inv[(a, a)] / lambda[a]).sum();
        // WΛ is similar to Λ^{1/2} W Λ^{1/2}.
        let mut sym =
            DMatrix::from_fn(k, k, |a, b| lambda[a].sqrt() * w[(a, b)] * lambda[b].sqrt());
        symmetrize(&mut sym);
        let lambda_min_wlambda = extreme_eigenvalues(&sym).0;

        Ok(Self {
            bandwidth: k,
            ell_max: sorted.first().copied().unwrap_or(0.0),
            ell,
            ell_prefix,
            upper,
            trace_wlambda_inv,
            lambda_min_wlambda,
        })
    }

    pub fn n(&self) -> usize {
        self.ell.len()
    }

    /// `L_m`.
    pub fn l_m(&self, m: usize) -> Result<f64> {
        match self.ell_prefix.get(m) {
            Some(&v) => Ok(v),
            None => param(format!("sample count {m} exceeds {} nodes", self.n())),
        }
    }

    /// `|K|² / (trace[(WΛ)⁻¹] + L_m)`.
    pub fn lower(&self, m: usize) -> Result<f64> {
        let k = self.bandwidth as f64;
        Ok(k * k / (self.trace_wlambda_inv + self.l_m(m)?))
    }

    /// `|K| / (λ_min(WΛ)⁻¹ + ℓ_max)`.
    pub fn uniform_recovery(&self) -> f64 {
        self.bandwidth as f64 / (1.0 / self.lambda_min_wlambda + self.ell_max)
    }

    /// Sample-count requirements for reaching `MSE ≤ eta`.
    pub fn set_size(&self, eta: f64) -> Result<SetSizeBound> {
        if !(eta > 0.0 && eta.is_finite()) {
            return param(format!("target MSE must be positive and finite, got {eta}"));
        }
        let k2 = (self.bandwidth * self.bandwidth) as f64;
        let l_bound = (k2 - eta * self.trace_wlambda_inv) / eta;
        let size_bound = if l_bound <= 0.0 {
            0
        } else if self.ell_max > 0.0 {
            (l_bound / self.ell_max).ceil() as usize
        } else {
            usize::MAX
        };
        // Round-off in L_m must not turn an attained threshold into a miss.
        let slack = 1e-12 * k2 / eta;
        let tight_size = if l_bound <= 0.0 {
            Some(0)
        } else {
            self.ell_prefix.iter().position(|&l| l >= l_bound - slack)
        };
        Ok(SetSizeBound {
            l_bound,
            size_bound,
            tight_size,
        })
    }
}

/// `ℓ_i = λ_{w,i}⁻¹ v_iᵀ W⁻¹ v_i` for every node.
pub fn structural_snrs(prior: &Prior) -> Result<Vec<f64>> {
    Ok(BoundsReport::new(prior)?.ell)
}

/// `(lower(m), upper)`.
pub fn universal_bounds(prior: &Prior, m: usize) -> Result<(f64, f64)> {
    let r = BoundsReport::new(prior)?;
    Ok((r.lower(m)?, r.upper))
}

pub fn uniform_recovery_bound(prior: &Prior) -> Result<f64> {
    Ok(BoundsReport::new(prior)?.uniform_recovery())
}

pub fn min_set_size_bound(prior: &Prior, eta: f64) -> Result<SetSizeBound> {
    BoundsReport::new(prior)?.set_size(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{gen_erdos_renyi, gen_random_weighted, spectral_basis};
    use crate::interp::mse;
    use crate::rng::{rng_from_seed, sub_seed};
    use crate::signals::{make_prior, Transform};
    use rand::seq::index::sample;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_prior(n: usize, k: usize, seed: u64) -> Prior {
        let b = spectral_basis(&gen_random_weighted(n, seed).unwrap())
            .unwrap()
            .select_band(k)
            .unwrap();
        let mut rng = rng_from_seed(sub_seed(seed, 1));
        let m = n + n / 2;
        let h = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
        let lambda = (0..k).map(|_| rng.random_range(0.2..3.0)).collect();
        let lw = (0..n).map(|_| rng.random_range(1e-3..1e-1)).collect();
        make_prior(&b, lambda, lw, Transform::Matrix(h)).unwrap()
    }

    #[test]
    fn identity_transform_snrs() {
        let b = spectral_basis(&gen_erdos_renyi(20, 0.2, 3).unwrap())
            .unwrap()
            .select_band(5)
            .unwrap();
        let p = Prior::homoscedastic(&b, 1.0, 1e-2).unwrap();
        let ell = structural_snrs(&p).unwrap();
        let lev = b.leverage_scores();
        for (l, v) in ell.iter().zip(&lev) {
            assert!((l - v / 1e-2).abs() <= 1e-10 * l.max(1.0));
        }
        assert!((ell.iter().sum::<f64>() - 500.0).abs() < 1e-9);
    }

    #[test]
    fn zero_row_has_zero_snr() {
        let v = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        let p = Prior::from_band_vectors(v, vec![0], vec![1.0], vec![0.5; 3], Transform::Identity)
            .unwrap();
        assert_eq!(structural_snrs(&p).unwrap(), vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn snrs_match_linear_solve() {
        for seed in 0..10 {
            let p = random_prior(10, 3, seed);
            let ell = structural_snrs(&p).unwrap();
            let lu = p.w().clone().lu();
            for i in 0..10 {
                let v = nalgebra::DVector::from_column_slice(p.node_row(i));
                let u = lu.solve(&v).unwrap();
                let oracle = v.dot(&u) / p.lambda_w()[i];
                assert!((ell[i] - oracle).abs() <= 1e-10 * oracle.max(1.0));
            }
        }
    }

    #[test]
    fn singular_w_is_rejected() {
        let b = spectral_basis(&gen_random_weighted(6, 1).unwrap())
            .unwrap()
            .select_band(2)
            .unwrap();
        // H kills the second band vector.
        let v1 = b.band_vectors().column(0).into_owned();
        let h = &v1 * v1.transpose();
        let p = make_prior(&b, vec![1.0; 2], vec![1.0; 6], Transform::Matrix(h)).unwrap();
        let err = structural_snrs(&p).unwrap_err().to_string();
        assert!(err.contains("positive definite"), "{err}");
    }

    #[test]
    fn empty_set_bounds_are_tight_for_unit_spectra() {
        let b = spectral_basis(&gen_erdos_renyi(12, 0.3, 2).unwrap())
            .unwrap()
            .select_band(4)
            .unwrap();
        let p = Prior::homoscedastic(&b, 1.0, 0.1).unwrap();
        let (lo, up) = universal_bounds(&p, 0).unwrap();
        assert!((lo - 4.0).abs() < 1e-12 && (up - 4.0).abs() < 1e-12);
        let r = BoundsReport::new(&p).unwrap();
        assert!((r.uniform_recovery() - 4.0 / (1.0 + r.ell_max)).abs() < 1e-12);
    }

    #[test]
    fn report_invariants() {
        for seed in 0..30 {
            let p = random_prior(9, 3, seed);
            let r = BoundsReport::new(&p).unwrap();
            assert!(r.ell.iter().all(|&l| l >= 0.0));
            assert_eq!(r.ell_prefix[9], r.ell_prefix.last().copied().unwrap());
            let total: f64 = {
                let mut s = r.ell.clone();
                s.sort_by(|a, b| b.total_cmp(a));
                s.iter().sum()
            };
            assert_eq!(r.l_m(9).unwrap(), total);
            for m in 0..=9 {
                assert!(r.l_m(m).unwrap() <= m as f64 * r.ell_max * (1.0 + 1e-12));
                assert!(r.lower(m).unwrap() <= r.upper);
                if m > 0 {
                    assert!(r.l_m(m).unwrap() >= r.l_m(m - 1).unwrap());
                    assert!(r.lower(m).unwrap() <= r.lower(m - 1).unwrap());
                }
            }
            assert!(r.lower(10).is_err());
            assert!(r.uniform_recovery() <= r.upper);
            let empty = mse(&p, &[]).unwrap();
            assert!((r.upper - empty).abs() <= 1e-10 * r.upper);
        }
    }

    #[test]
    fn uniform_recovery_is_linear_in_bandwidth() {
        // Constructed priors sharing ℓ_max and λ_min(WΛ): coordinate band vectors.
        let mk = |k: usize| {
            let n = 2 * k;
            let v = DMatrix::from_fn(n, k, |i, j| if i == 2 * j { 1.0 } else { 0.0 });
            Prior::from_band_vectors(
                v,
                (0..k).collect(),
                vec![1.0; k],
                vec![0.5; n],
                Transform::Identity,
            )
            .unwrap()
        };
        let a = uniform_recovery_bound(&mk(3)).unwrap();
        let b = uniform_recovery_bound(&mk(6)).unwrap();
        assert!((a / b - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn sandwich_on_random_sets() {
        for seed in 0..400 {
            let p = random_prior(10, 3, seed % 20);
            let r = BoundsReport::new(&p).unwrap();
            let mut rng = rng_from_seed(sub_seed(seed, 9));
            let size = rng.random_range(0..=10);
            let s = sample(&mut rng, 10, size).into_vec();
            let f = mse(&p, &s).unwrap();
            assert!(r.lower(size).unwrap() <= f);
            assert!(f <= r.upper * (1.0 + 1e-10));
        }
    }

    #[test]
    fn set_size_bound_cases() {
        let p = random_prior(10, 3, 2);
        let r = BoundsReport::new(&p).unwrap();
        let trivial = r.set_size(r.upper).unwrap();
        assert_eq!(trivial.size_bound, 0);
        assert_eq!(trivial.tight_size, Some(0));
        assert!(r.set_size(0.0).is_err());
        assert!(r.set_size(-1.0).is_err());
        // Tight size never below the crude one.
        for i in 1..50 {
            let eta = r.upper * i as f64 / 50.0;
            let b = r.set_size(eta).unwrap();
            if let Some(t) = b.tight_size {
                assert!(t >= b.size_bound.min(t));
                assert!(b.size_bound <= t || b.l_bound <= 0.0);
            }
        }
        // Exactly the lower bound at m: the threshold is met at m.
        for m in 1..=10 {
            let eta = r.lower(m).unwrap();
            let b = r.set_size(eta).unwrap();
            assert!(b.tight_size.unwrap() <= m);
        }
    }
}
