//! Random graph models and the graph Fourier basis of a real symmetric
//! shift operator.
//!
//! Generators draw only the strict upper triangle and mirror it, so every
//! adjacency matrix they return is exactly symmetric with a zero diagonal.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, param, Result};
use crate::linalg::{max_abs, max_asymmetry};
use crate::rng::rng_from_seed;

pub const ERDOS_RENYI: &str = "erdos-renyi";
pub const PREFERENTIAL_ATTACHMENT: &str = "preferential-attachment";
pub const RANDOM_WEIGHTED: &str = "random-weighted";

/// Asymmetry tolerated by [`spectral_basis`], relative to `max(1, max|A_ij|)`.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Node-ordered weighted graph held as a dense symmetric adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
    model_tag: String,
    seed: u64,
}

impl Graph {
    /// Wraps an existing adjacency matrix. The matrix must be square, finite
    /// and exactly symmetric.
    pub fn from_adjacency(
        adjacency: DMatrix<f64>,
        model_tag: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        if !adjacency.is_square() || adjacency.nrows() == 0 {
            return param(format!(
                "adjacency must be square and nonempty, got {:?}",
                adjacency.shape()
            ));
        }
        if adjacency.iter().any(|w| !w.is_finite()) {
            return param("adjacency has non-finite weights");
        }
        if max_asymmetry(&adjacency) != 0.0 {
            return domain("adjacency is not symmetric");
        }
        Ok(Self {
            adjacency,
            model_tag: model_tag.into(),
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Nonzero edges `(i, j, w)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.adjacency[(i, j)];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Number of nonzero neighbors of each node.
    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n())
            .map(|i| {
                (0..self.n())
                    .filter(|&j| j != i && self.adjacency[(i, j)] != 0.0)
                    .count()
            })
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && self.adjacency[(i, j)] != 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn to_json(&self) -> Result<String> {
        let record = GraphRecord {
            n: self.n(),
            model_tag: self.model_tag.clone(),
            seed: self.seed,
            edges: self.edges(),
        };
        Ok(serde_json::to_string_pretty(&record)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let record: GraphRecord = serde_json::from_str(text)?;
        if record.n == 0 {
            return param("graph must have at least one node");
        }
        let mut adjacency = DMatrix::zeros(record.n, record.n);
        for &(i, j, w) in &record.edges {
            if i >= j || j >= record.n {
                return param(format!("edge ({i}, {j}) must satisfy i < j < n"));
            }
            if !w.is_finite() {
                return param(format!("edge ({i}, {j}) has non-finite weight"));
            }
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
        }
        Self::from_adjacency(adjacency, record.model_tag, record.seed)
    }
}

/// Wire format: `{n, model_tag, seed, edges: [[i, j, weight], ...]}` with `i < j`.
#[derive(Debug, Serialize, Deserialize)]
struct GraphRecord {
    n: usize,
    model_tag: String,
    seed: u64,
    edges: Vec<(usize, usize, f64)>,
}

/// G(n, p): each unordered pair carries a unit edge independently with probability `p`.
pub fn gen_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n == 0 {
        return param("erdos-renyi needs n >= 1");
    }
    if !(0.0..=1.0).contains(&p) {
        return param(format!("edge probability must lie in [0, 1], got {p}"));
    }
    let mut rng = rng_from_seed(seed);
    let mut adjacency = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                adjacency[(i, j)] = 1.0;
                adjacency[(j, i)] = 1.0;
            }
        }
    }
    Ok(Graph {
        adjacency,
        model_tag: ERDOS_RENYI.into(),
        seed,
    })
}

/// Grows a tree: nodes 0 and 1 are joined, then each new node attaches one
/// unit edge to an existing node drawn with probability proportional to its
/// current degree.
pub fn gen_preferential_attachment(n: usize, seed: u64) -> Result<Graph> {
    if n < 2 {
        return param(format!("preferential attachment needs n >= 2, got {n}"));
    }
    let mut rng = rng_from_seed(seed);
    let mut adjacency = DMatrix::zeros(n, n);
    adjacency[(0, 1)] = 1.0;
    adjacency[(1, 0)] = 1.0;
    // each node appears once per incident edge, so a uniform draw from this
    // list is a degree-proportional draw over nodes
    let mut endpoints: Vec<usize> = Vec::with_capacity(2 * n);
    endpoints.extend([0, 1]);
    for new in 2..n {
        let target = *endpoints
            .choose(&mut rng)
            .expect("endpoint list is never empty");
        adjacency[(new, target)] = 1.0;
        adjacency[(target, new)] = 1.0;
        endpoints.extend([new, target]);
    }
    Ok(Graph {
        adjacency,
        model_tag: PREFERENTIAL_ATTACHMENT.into(),
        seed,
    })
}

/// Complete graph with independent Uniform[0, 1] weights.
pub fn gen_random_weighted(n: usize, seed: u64) -> Result<Graph> {
    if n == 0 {
        return param("random weighted graph needs n >= 1");
    }
    let mut rng = rng_from_seed(seed);
    let mut adjacency = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w: f64 = rng.random();
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
        }
    }
    Ok(Graph {
        adjacency,
        model_tag: RANDOM_WEIGHTED.into(),
        seed,
    })
}

/// Orthonormal eigenbasis `V`, eigenvalues `D` and an (optional) selected
/// frequency band `K` with its columns `V_K` materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    vectors: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    band: Vec<usize>,
    band_vectors: DMatrix<f64>,
}

/// How eigenpairs are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenOrder {
    /// Descending |λ|, ties by descending signed λ, then ascending original index.
    Magnitude,
    /// Descending signed λ, ties by ascending original index.
    Signed,
}

/// Eigendecomposition of the graph adjacency, ordered by [`EigenOrder::Magnitude`].
pub fn spectral_basis(g: &Graph) -> Result<SpectralBasis> {
    SpectralBasis::from_symmetric(g.adjacency(), EigenOrder::Magnitude)
}

impl SpectralBasis {
    /// Decomposes any real symmetric matrix (asymmetry up to [`SYMMETRY_TOL`]
    /// relative is accepted and averaged away).
    pub fn from_symmetric(matrix: &DMatrix<f64>, order: EigenOrder) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return param(format!(
                "matrix must be square and nonempty, got {:?}",
                matrix.shape()
            ));
        }
        let scale = max_abs(matrix).max(1.0);
        let asym = max_asymmetry(matrix);
        if !(asym <= SYMMETRY_TOL * scale) {
            return domain(format!("matrix is not symmetric (max |A - Aᵀ| = {asym:e})"));
        }
        let n = matrix.nrows();
        let mut sym = matrix.clone();
        crate::linalg::symmetrize(&mut sym);
        let eig = SymmetricEigen::new(sym);

        let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let perm = eigen_order(&raw, order);
        let mut vectors = DMatrix::zeros(n, n);
        let mut eigenvalues = Vec::with_capacity(n);
        for (dst, &src) in perm.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).into_owned();
            canonical_sign(&mut col);
            vectors.set_column(dst, &col);
            eigenvalues.push(raw[src]);
        }
        Ok(Self {
            vectors,
            eigenvalues,
            band: Vec::new(),
            band_vectors: DMatrix::zeros(n, 0),
        })
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    /// Full eigenvector matrix `V` (columns ordered like [`Self::eigenvalues`]).
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Selected frequency indices `K` (positions into the sorted spectrum).
    pub fn band(&self) -> &[usize] {
        &self.band
    }

    /// `V_K`, the `n × |K|` band submatrix.
    pub fn band_vectors(&self) -> &DMatrix<f64> {
        &self.band_vectors
    }

    /// Keeps the `k` leading eigenvectors of the sorted spectrum.
    pub fn select_band(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n() {
            return param(format!("band size must lie in [1, {}], got {k}", self.n()));
        }
        self.with_band((0..k).collect())
    }

    /// Uses an explicit frequency index set.
    pub fn with_band(&self, band: Vec<usize>) -> Result<Self> {
        let n = self.n();
        let mut seen = vec![false; n];
        for &k in &band {
            if k >= n || std::mem::replace(&mut seen[k], true) {
                return param(format!("band index {k} is out of range or repeated"));
            }
        }
        let band_vectors = self.vectors.select_columns(&band);
        Ok(Self {
            band,
            band_vectors,
            ..self.clone()
        })
    }

    /// Graph Fourier transform `Vᵀ x`.
    pub fn gft(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n() {
            return param(format!(
                "signal has length {}, basis has {} nodes",
                x.len(),
                self.n()
            ));
        }
        Ok(self.vectors.tr_mul(x))
    }

    /// Inverse transform of band coefficients: `V_K x̄_K`.
    pub fn igft(&self, coefficients: &DVector<f64>) -> Result<DVector<f64>> {
        if coefficients.len() != self.band.len() {
            return param(format!(
                "got {} band coefficients for a band of size {}",
                coefficients.len(),
                self.band.len()
            ));
        }
        Ok(&self.band_vectors * coefficients)
    }

    /// Leverage scores `‖v_i‖²`, the squared row norms of `V_K`.
    pub fn leverage_scores(&self) -> Vec<f64> {
        self.band_vectors
            .row_iter()
            .map(|r| r.norm_squared())
            .collect()
    }
}

fn eigen_order(values: &[f64], order: EigenOrder) -> Vec<usize> {
    let n = values.len();
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let tie = 1e-12 * scale;
    let mut idx: Vec<usize> = (0..n).collect();
    let key = |i: usize| match order {
        EigenOrder::Magnitude => values[i].abs(),
        EigenOrder::Signed => values[i],
    };
    idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));

    // Values within round-off of the head of a run are ties; reorder each run
    // by the secondary keys. Grouping against the run head keeps this a
    // deterministic partition even though "within tol" is not transitive.
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let head = key(idx[start]);
        let mut end = start + 1;
        while end < n && head - key(idx[end]) <= tie {
            end += 1;
        }
        let mut run = idx[start..end].to_vec();
        match order {
            // a run is {≈+m, ≈-m}; positives first unless m itself is round-off
            EigenOrder::Magnitude if head > tie => {
                run.sort_by_key(|&i| (values[i] < 0.0, i));
            }
            EigenOrder::Magnitude => run.sort(),
            EigenOrder::Signed => run.sort(),
        }
        out.extend(run);
        start = end;
    }
    out
}

/// Flips an eigenvector so its first largest-magnitude entry is positive.
fn canonical_sign(v: &mut DVector<f64>) {
    let peak = v.amax();
    if peak == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= peak * (1.0 - 1e-9))
        .unwrap_or(0);
    if v[pivot] < 0.0 {
        v.neg_mut();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::Rng;

    fn orthonormality_error(v: &DMatrix<f64>) -> f64 {
        let gram = v.tr_mul(v);
        (gram - DMatrix::identity(v.ncols(), v.ncols())).amax()
    }

    fn recomposition_error(b: &SpectralBasis, a: &DMatrix<f64>) -> f64 {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(b.eigenvalues()));
        let rec = b.vectors() * d * b.vectors().transpose();
        (rec - a).norm() / a.norm()
    }

    #[test]
    fn erdos_renyi_edge_cases() {
        let g = gen_erdos_renyi(5, 0.0, 1).unwrap();
        assert_eq!(g.adjacency(), &DMatrix::zeros(5, 5));

        let g = gen_erdos_renyi(4, 1.0, 1).unwrap();
        for i in 0..4 {
            assert_eq!(g.adjacency().row(i).sum(), 3.0);
        }

        let g = gen_erdos_renyi(20, 0.2, 9).unwrap();
        assert_eq!(g.n(), 20);
        assert_eq!(g.model_tag(), ERDOS_RENYI);
        assert_eq!(g, gen_erdos_renyi(20, 0.2, 9).unwrap());

        assert!(gen_erdos_renyi(5, 1.5, 1).is_err());
        assert!(gen_erdos_renyi(5, -0.1, 1).is_err());
        assert!(gen_erdos_renyi(5, f64::NAN, 1).is_err());
    }

    #[test]
    fn preferential_attachment_is_a_tree() {
        let g = gen_preferential_attachment(2, 3).unwrap();
        assert_eq!(g.edges(), vec![(0, 1, 1.0)]);

        let g = gen_preferential_attachment(100, 3).unwrap();
        assert_eq!(g.edges().len(), 99);
        assert!(g.is_connected());

        assert!(gen_preferential_attachment(1, 3).is_err());
    }

    #[test]
    fn preferential_attachment_degrees_are_heavy_tailed() {
        // Empirically 100/100 seeds give max/median >= 5 at n = 1000
        // (median degree is 1, the smallest max degree seen was 29).
        let hits = (0..100)
            .filter(|&seed| {
                let mut deg = gen_preferential_attachment(1000, seed).unwrap().degrees();
                deg.sort_unstable();
                let median = 0.5 * (deg[499] + deg[500]) as f64;
                *deg.last().unwrap() as f64 >= 5.0 * median
            })
            .count();
        assert!(hits >= 90, "heavy tail in {hits}/100 seeds");
    }

    #[test]
    fn random_weighted_structure() {
        let g = gen_random_weighted(1, 0).unwrap();
        assert_eq!(g.adjacency(), &DMatrix::zeros(1, 1));

        let g = gen_random_weighted(2, 5).unwrap();
        let w = g.adjacency()[(0, 1)];
        assert!((0.0..=1.0).contains(&w));
        assert_eq!(g.adjacency(), &dmatrix![0.0, w; w, 0.0]);
    }

    #[test]
    fn random_weighted_mean_weight() {
        // Mean of 190 Uniform[0,1] weights has sd 0.021, so [0.4, 0.6] is a
        // ±4.8 sd window; the observed rate over 1000 seeds is 1000/1000.
        let inside = (0..1000u64)
            .filter(|&seed| {
                let g = gen_random_weighted(20, seed).unwrap();
                let e = g.edges();
                let mean = e.iter().map(|x| x.2).sum::<f64>() / e.len() as f64;
                (0.4..=0.6).contains(&mean)
            })
            .count();
        assert!(inside >= 950, "{inside}/1000");
    }

    #[test]
    fn identity_basis() {
        let b =
            SpectralBasis::from_symmetric(&DMatrix::identity(3, 3), EigenOrder::Magnitude).unwrap();
        assert_eq!(b.eigenvalues(), &[1.0, 1.0, 1.0]);
        assert!(orthonormality_error(b.vectors()) <= 1e-10);
    }

    #[test]
    fn two_node_edge() {
        let g = Graph::from_adjacency(dmatrix![0.0, 1.0; 1.0, 0.0], "edge", 0).unwrap();
        let b = spectral_basis(&g).unwrap();
        assert!((b.eigenvalues()[0] - 1.0).abs() < 1e-14);
        assert!((b.eigenvalues()[1] + 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = b.vectors();
        assert!((v[(0, 0)] - s).abs() < 1e-14 && (v[(1, 0)] - s).abs() < 1e-14);
        assert!((v[(0, 1)] - s).abs() < 1e-14 && (v[(1, 1)] + s).abs() < 1e-14);

        let band = b.select_band(1).unwrap();
        assert_eq!(band.band(), &[0]);
        assert!((band.eigenvalues()[band.band()[0]] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn magnitude_ties_prefer_positive() {
        // diag(-2, 2, 1, -1): order must be 2, -2, 1, -1
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 2.0, 1.0, -1.0]));
        let b = SpectralBasis::from_symmetric(&a, EigenOrder::Magnitude).unwrap();
        assert_eq!(b.eigenvalues(), &[2.0, -2.0, 1.0, -1.0]);
        let s = SpectralBasis::from_symmetric(&a, EigenOrder::Signed).unwrap();
        assert_eq!(s.eigenvalues(), &[2.0, 1.0, -1.0, -2.0]);
    }

    #[test]
    fn recomposes_random_weighted() {
        let g = gen_random_weighted(10, 77).unwrap();
        let b = spectral_basis(&g).unwrap();
        assert!(recomposition_error(&b, g.adjacency()) <= 1e-8);
        assert!(orthonormality_error(b.vectors()) <= 1e-10);
        let mags: Vec<f64> = b.eigenvalues().iter().map(|x| x.abs()).collect();
        assert!(mags.windows(2).all(|w| w[0] >= w[1] - 1e-12));
    }

    #[test]
    fn rejects_asymmetric() {
        let a = dmatrix![0.0, 1.0; 1.0 + 1e-9, 0.0];
        assert!(matches!(
            SpectralBasis::from_symmetric(&a, EigenOrder::Magnitude),
            Err(crate::Error::Domain(_))
        ));
        assert!(Graph::from_adjacency(a, "x", 0).is_err());
    }

    #[test]
    fn band_selection() {
        let g = gen_erdos_renyi(20, 0.2, 4).unwrap();
        let b = spectral_basis(&g).unwrap();
        let k5 = b.select_band(5).unwrap();
        assert_eq!(k5.band(), &[0, 1, 2, 3, 4]);
        assert_eq!(k5.band_vectors().shape(), (20, 5));
        let full = b.select_band(20).unwrap();
        assert_eq!(full.band_vectors(), b.vectors());
        assert!(b.select_band(0).is_err());
        assert!(b.select_band(21).is_err());
        assert!(b.with_band(vec![1, 1]).is_err());
    }

    #[test]
    fn gft_properties() {
        let g = gen_random_weighted(12, 3).unwrap();
        let b = spectral_basis(&g).unwrap().select_band(4).unwrap();
        let mut rng = crate::rng::rng_from_seed(11);

        // columns of V map to unit vectors
        for j in 0..12 {
            let x = b.vectors().column(j).into_owned();
            let xbar = b.gft(&x).unwrap();
            for i in 0..12 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((xbar[i] - e).abs() <= 1e-10);
            }
        }

        // Parseval over 1000 random vectors
        for _ in 0..1000 {
            let x = DVector::from_fn(12, |_, _| rng.random_range(-1.0..1.0));
            let err = (b.gft(&x).unwrap().norm() - x.norm()).abs();
            assert!(err <= 1e-10 * x.norm());
        }

        // band round trip
        for _ in 0..100 {
            let c = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
            let x = b.igft(&c).unwrap();
            let back = b.gft(&x).unwrap();
            for (pos, &k) in b.band().iter().enumerate() {
                assert!((back[k] - c[pos]).abs() <= 1e-10);
            }
            let again = b
                .igft(&DVector::from_iterator(
                    4,
                    b.band().iter().map(|&k| back[k]),
                ))
                .unwrap();
            assert!((again - &x).amax() <= 1e-10);
        }

        assert!(b.gft(&DVector::zeros(3)).is_err());
        assert!(b.igft(&DVector::zeros(5)).is_err());
    }

    #[test]
    fn leverage_mass_equals_band_size() {
        for seed in 0..20 {
            let g = gen_erdos_renyi(30, 0.2, seed).unwrap();
            let b = spectral_basis(&g).unwrap().select_band(7).unwrap();
            let total: f64 = b.leverage_scores().iter().sum();
            assert!((total - 7.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn json_round_trip() {
        let g = gen_random_weighted(6, 8).unwrap();
        let back = Graph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(g, back);
        assert!(
            Graph::from_json(r#"{"n":3,"model_tag":"x","seed":0,"edges":[[2,1,1.0]]}"#).is_err()
        );
    }

    proptest! {
        #[test]
        fn generated_graphs_are_symmetric(n in 1usize..25, p in 0.0f64..=1.0, seed in any::<u64>()) {
            let graphs = [
                gen_erdos_renyi(n, p, seed).unwrap(),
                gen_random_weighted(n, seed).unwrap(),
                gen_preferential_attachment(n.max(2), seed).unwrap(),
            ];
            for g in graphs {
                let a = g.adjacency();
                prop_assert_eq!(a, &a.transpose());
                prop_assert!(a.diagonal().iter().all(|&d| d == 0.0));
                prop_assert!(a.iter().all(|w| w.is_finite() && (0.0..=1.0).contains(w)));
            }
        }

        #[test]
        fn basis_invariants(n in 2usize..16, seed in any::<u64>()) {
            let g = gen_random_weighted(n, seed).unwrap();
            let b = spectral_basis(&g).unwrap();
            prop_assert!(orthonormality_error(b.vectors()) <= 1e-10);
            prop_assert!(recomposition_error(&b, g.adjacency()) <= 1e-8);
        }
    }
}
