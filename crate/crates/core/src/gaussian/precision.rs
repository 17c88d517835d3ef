//! Dense Gibbs precision matrices for quadratic energies.
//!
//! A [`PrecisionMatrix`] `P` acts on the free grid variables of a single
//! coordinate and satisfies `E(x) = ½ xᵀ P x` (summed over coordinates).
//! Pinned paths use variables `x_1..x_N`; periodic paths use `x_0..x_{N−1}`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{build_kernel, Boundary, ModelSpec, Path};

/// Largest grid supported by the dense solvers.
pub const DENSE_CAP: usize = 8192;

#[derive(Debug, Clone)]
pub struct PrecisionMatrix {
    matrix: DMatrix<f64>,
    grid_len: usize,
    dim: usize,
    boundary: Boundary,
}

impl PrecisionMatrix {
    /// Wraps an explicit per-coordinate matrix over the free variables.
    pub fn from_matrix(
        matrix: DMatrix<f64>,
        grid_len: usize,
        dim: usize,
        boundary: Boundary,
    ) -> Result<PrecisionMatrix> {
        if matrix.nrows() != grid_len || matrix.ncols() != grid_len {
            return Err(Error::DimensionMismatch(format!(
                "precision must be {grid_len}x{grid_len}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        Ok(PrecisionMatrix {
            matrix,
            grid_len,
            dim,
            boundary,
        })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn grid_len(&self) -> usize {
        self.grid_len
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.matrix
    }

    /// Variable index of grid point `i`, or `None` for the pinned origin.
    #[inline]
    pub fn variable(&self, i: usize) -> Option<usize> {
        match self.boundary {
            Boundary::Pinned => i.checked_sub(1),
            Boundary::Periodic => Some(i % self.grid_len),
        }
    }

    /// Maps a weight vector over grid points `0..=N` to the free variables.
    pub fn project(&self, weights: &[f64]) -> Result<DVector<f64>> {
        if weights.len() != self.grid_len + 1 {
            return Err(Error::DimensionMismatch(format!(
                "functional has {} weights, grid has {} points",
                weights.len(),
                self.grid_len + 1
            )));
        }
        let mut v = DVector::zeros(self.size());
        for (i, &w) in weights.iter().enumerate() {
            if let Some(k) = self.variable(i) {
                v[k] += w;
            }
        }
        Ok(v)
    }

    /// `½ Σ_c x_cᵀ P x_c` for a path; equals the energy for assembled matrices.
    pub fn quadratic_form(&self, path: &Path) -> Result<f64> {
        if path.len() != self.grid_len + 1 || path.dim() != self.dim {
            return Err(Error::DimensionMismatch("path does not match precision".into()));
        }
        let mut total = 0.0;
        for c in 0..self.dim {
            let comp = path.component(c);
            let v = self.project_values(&comp);
            total += v.dot(&(&self.matrix * &v));
        }
        Ok(0.5 * total)
    }

    /// Free-variable values of one coordinate series over grid points.
    fn project_values(&self, series: &[f64]) -> DVector<f64> {
        match self.boundary {
            Boundary::Pinned => DVector::from_column_slice(&series[1..]),
            Boundary::Periodic => DVector::from_column_slice(&series[..self.grid_len]),
        }
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.matrix.clone()).ok_or(Error::NotPositiveDefinite)
    }

    /// Per-coordinate covariance `P⁻¹`.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        Ok(self.cholesky()?.inverse())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_dense(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        return Err(Error::TooLarge {
            size: n,
            cap: DENSE_CAP,
        });
    }
    Ok(())
}

/// Brownian (kinetic) part `Ñ·L` of the precision.
pub(crate) fn brownian_precision(spec: &ModelSpec) -> Result<PrecisionMatrix> {
    let n = spec.grid_len();
    check_dense(n)?;
    let nt = spec.n_per_unit() as f64;
    let mut p = PrecisionMatrix::from_matrix(
        DMatrix::zeros(n, n),
        n,
        spec.dim(),
        spec.boundary(),
    )?;
    for j in 1..=n {
        add_pair(&mut p, j - 1, j, nt);
    }
    Ok(p)
}

/// Adds `w (x_a − x_b)²` to the quadratic form `xᵀPx`.
fn add_pair(p: &mut PrecisionMatrix, a: usize, b: usize, w: f64) {
    let (ia, ib) = (p.variable(a), p.variable(b));
    let m = &mut p.matrix;
    if let Some(i) = ia {
        m[(i, i)] += w;
    }
    if let Some(j) = ib {
        m[(j, j)] += w;
    }
    if let (Some(i), Some(j)) = (ia, ib) {
        m[(i, j)] -= w;
        m[(j, i)] -= w;
    }
}

/// Gibbs precision of a quadratic spec; periodic specs get `+2ε` on the
/// diagonal so that the matrix is invertible.
pub fn assemble_precision_eps(spec: &ModelSpec, epsilon: f64) -> Result<PrecisionMatrix> {
    spec.require_quadratic()?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", "must be finite and nonnegative"));
    }
    let mut p = brownian_precision(spec)?;
    let n = spec.grid_len();
    if spec.alpha() != 0.0 {
        let kernel = build_kernel(spec);
        let nt = spec.n_per_unit() as f64;
        let c = 2.0 * spec.alpha() / (nt * nt);
        let last = match spec.boundary() {
            Boundary::Pinned => n,
            Boundary::Periodic => n - 1,
        };
        for i in 0..last {
            for j in i + 1..=last {
                add_pair(&mut p, i, j, c * kernel.pair_weight(j - i));
            }
        }
    }
    if spec.boundary() == Boundary::Periodic {
        for i in 0..n {
            p.matrix[(i, i)] += 2.0 * epsilon;
        }
    }
    Ok(p)
}

/// Gibbs precision with the default periodic regulariser `ε = 1e−8`.
pub fn assemble_precision(spec: &ModelSpec) -> Result<PrecisionMatrix> {
    assemble_precision_eps(spec, 1e-8)
}

/// A labelled linear functional `x ↦ Σ_i w_i x_i` over grid points `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    pub label: String,
    pub weights: Vec<f64>,
}

impl Functional {
    pub fn new(label: impl Into<String>, weights: Vec<f64>) -> Self {
        Functional {
            label: label.into(),
            weights,
        }
    }

    /// `x_i`.
    pub fn point(grid_len: usize, i: usize) -> Self {
        let mut w = vec![0.0; grid_len + 1];
        w[i] = 1.0;
        Functional::new(format!("x[{i}]"), w)
    }

    /// `x_n − x_m`.
    pub fn increment(grid_len: usize, m: usize, n: usize) -> Self {
        let mut w = vec![0.0; grid_len + 1];
        w[n] += 1.0;
        w[m] -= 1.0;
        Functional::new(format!("x[{n}]-x[{m}]"), w)
    }
}

/// Covariances `vᵢᵀ P⁻¹ vⱼ` of labelled functionals, per coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSummary {
    pub labels: Vec<String>,
    pub matrix: DMatrix<f64>,
}

impl CovarianceSummary {
    pub fn variance(&self, label: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.matrix[(i, i)])
    }

    pub fn covariance(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.matrix[(i, j)])
    }
}

pub fn covariance_of_functionals(
    prec: &PrecisionMatrix,
    functionals: &[Functional],
) -> Result<CovarianceSummary> {
    let chol = prec.cholesky()?;
    let k = functionals.len();
    let mut v = DMatrix::zeros(prec.size(), k);
    for (c, f) in functionals.iter().enumerate() {
        v.set_column(c, &prec.project(&f.weights)?);
    }
    let y = chol.solve(&v);
    let mut m = v.transpose() * y;
    // Symmetrise away rounding asymmetry.
    for i in 0..k {
        for j in 0..i {
            let s = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = s;
            m[(j, i)] = s;
        }
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("functional covariance".into()));
    }
    Ok(CovarianceSummary {
        labels: functionals.iter().map(|f| f.label.clone()).collect(),
        matrix: m,
    })
}

/// Exact i.i.d. samples `x = L⁻ᵀ z` with `P = L Lᵀ`, one independent draw per
/// coordinate. Deterministic given `seed`.
pub fn sample_gaussian(prec: &PrecisionMatrix, seed: u64, count: usize) -> Result<Vec<Path>> {
    let chol = prec.cholesky()?;
    let l = chol.l();
    let lt = l.transpose();
    let n = prec.grid_len();
    let d = prec.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut coords = vec![0.0; (n + 1) * d];
        for c in 0..d {
            let z = DVector::from_fn(prec.size(), |_, _| StandardNormal.sample(&mut rng));
            let x = lt
                .solve_upper_triangular(&z)
                .ok_or(Error::NotPositiveDefinite)?;
            for i in 0..=n {
                if let Some(k) = prec.variable(i) {
                    coords[i * d + c] = x[k];
                }
            }
        }
        out.push(Path::from_raw(d, coords));
    }
    Ok(out)
}

/// `true` iff `λ_min(covB − covA) ≥ −tol`.
pub fn loewner_leq(cov_a: &DMatrix<f64>, cov_b: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(loewner_margin(cov_a, cov_b)? >= -tol)
}

/// Smallest eigenvalue of `covB − covA`.
pub fn loewner_margin(cov_a: &DMatrix<f64>, cov_b: &DMatrix<f64>) -> Result<f64> {
    if cov_a.shape() != cov_b.shape() || cov_a.nrows() != cov_a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "covariances {:?} and {:?}",
            cov_a.shape(),
            cov_b.shape()
        )));
    }
    if cov_a.nrows() == 0 {
        return Ok(0.0);
    }
    let diff = cov_b - cov_a;
    let sym = 0.5 * (&diff + diff.transpose());
    Ok(SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::energy;
    use rand::Rng;

    fn quad_spec(t: u32, nt: usize, alpha: f64, xi: f64, b: Boundary) -> ModelSpec {
        ModelSpec::builder()
            .t(t)
            .n_per_unit(nt)
            .alpha(alpha)
            .xi(xi)
            .boundary(b)
            .build()
            .unwrap()
    }

    #[test]
    fn brownian_endpoint_variance() {
        let s = quad_spec(5, 1, 0.0, 2.0, Boundary::Pinned);
        let p = assemble_precision(&s).unwrap();
        let n = s.grid_len();
        let cov = covariance_of_functionals(&p, &[Functional::point(n, n)]).unwrap();
        assert!((cov.matrix[(0, 0)] - n as f64).abs() < 1e-9);
    }

    #[test]
    fn quadratic_form_reproduces_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for b in [Boundary::Pinned, Boundary::Periodic] {
            for &(alpha, xi) in &[(0.0, 1.0), (1.3, 0.0), (2.0, 2.5)] {
                let s = ModelSpec::builder()
                    .t(3)
                    .n_per_unit(2)
                    .dim(2)
                    .alpha(alpha)
                    .xi(xi)
                    .boundary(b)
                    .build()
                    .unwrap();
                let p = assemble_precision_eps(&s, 0.0).unwrap();
                let k = build_kernel(&s);
                let path = Path::from_fn(&s, |_, x| {
                    for v in x {
                        *v = rng.random_range(-2.0..2.0)
                    }
                });
                let e = energy(&path, &s, &k).unwrap();
                let q = p.quadratic_form(&path).unwrap();
                assert!((e - q).abs() <= 1e-10 * e.abs().max(1.0), "{e} vs {q}");
            }
        }
    }

    #[test]
    fn non_quadratic_rejected() {
        let s = ModelSpec::builder().gamma(1.0).build().unwrap();
        assert!(matches!(assemble_precision(&s), Err(Error::NotQuadratic(_))));
    }

    #[test]
    fn identity_precision_unit_vector() {
        let p = PrecisionMatrix::from_matrix(DMatrix::identity(4, 4), 4, 1, Boundary::Pinned).unwrap();
        let c = covariance_of_functionals(&p, &[Functional::point(4, 2)]).unwrap();
        assert!((c.matrix[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn functional_covariance_is_psd() {
        let s = quad_spec(3, 2, 1.0, 1.5, Boundary::Pinned);
        let p = assemble_precision(&s).unwrap();
        let n = s.grid_len();
        let fs: Vec<_> = (1..=n).step_by(3).map(|i| Functional::point(n, i)).collect();
        let c = covariance_of_functionals(&p, &fs).unwrap();
        let min = SymmetricEigen::new(c.matrix.clone()).eigenvalues.min();
        assert!(min > -1e-12);
    }

    #[test]
    fn samples_match_exact_covariance() {
        let s = quad_spec(3, 1, 1.0, 2.0, Boundary::Pinned);
        let p = assemble_precision(&s).unwrap();
        let n = s.grid_len();
        let want = covariance_of_functionals(&p, &[Functional::point(n, n)])
            .unwrap()
            .matrix[(0, 0)];
        let samples = sample_gaussian(&p, 11, 100_000).unwrap();
        let xs: Vec<f64> = samples.iter().map(|s| s.point(n)[0]).collect();
        let m = xs.len() as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / m;
        let se = want * (2.0 / m).sqrt();
        assert!((var - want).abs() < 3.0 * se, "{var} vs {want} (se {se})");
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = quad_spec(2, 2, 0.5, 1.0, Boundary::Periodic);
        let p = assemble_precision(&s).unwrap();
        let a = sample_gaussian(&p, 5, 3).unwrap();
        let b = sample_gaussian(&p, 5, 3).unwrap();
        assert_eq!(a, b);
        assert!(a[0].point(0) == a[0].point(s.grid_len()));
    }

    #[test]
    fn loewner_examples() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert!(loewner_leq(&b, &b, 1e-12).unwrap());
        assert!(!loewner_leq(&(2.0 * &b), &b, 1e-12).unwrap());
        assert!(loewner_leq(&b, &(2.0 * &b), 1e-12).unwrap());
        assert!(loewner_leq(&b, &DMatrix::zeros(3, 3), 0.0).is_err());
    }

    #[test]
    fn dense_cap_enforced() {
        let s = quad_spec(12, 4, 1.0, 2.0, Boundary::Pinned);
        assert!(matches!(assemble_precision(&s), Err(Error::TooLarge { .. })));
    }
}
