//! Circulant representation of the periodic quadratic energy and its DFT
//! diagonalisation.
//!
//! The operator `A` is normalised so that `E(x) = Σ_c x_cᵀ A x_c` (the Gibbs
//! precision is `2A`). On the cycle the pair weight is symmetrised,
//! `ρ_c(l) = ½[ρ(l/Ñ) + ρ((N−l)/Ñ)]`, which makes `A` a genuine symmetric
//! circulant with vanishing row sums when `ε = 0`.

use std::f64::consts::TAU;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{build_kernel, Boundary, ModelSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct CirculantOperator {
    first_row: Vec<f64>,
    epsilon: f64,
    dim: usize,
    eigenvalues: Vec<f64>,
}

impl CirculantOperator {
    /// Builds an operator from an explicit symmetric first row.
    pub fn from_first_row(first_row: Vec<f64>, epsilon: f64, dim: usize) -> Result<Self> {
        let n = first_row.len();
        if n < 2 {
            return Err(Error::invalid("first_row", "needs at least two entries"));
        }
        for j in 1..n {
            let (a, b) = (first_row[j], first_row[n - j]);
            if (a - b).abs() > 1e-12 * (a.abs() + b.abs()).max(1e-300) {
                return Err(Error::invalid("first_row", format!("a_{j} != a_{}", n - j)));
            }
        }
        let eigenvalues = fft_eigenvalues(&first_row);
        Ok(CirculantOperator {
            first_row,
            epsilon,
            dim,
            eigenvalues,
        })
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.first_row.len()
    }
    pub fn is_empty(&self) -> bool {
        self.first_row.is_empty()
    }

    /// Fourier eigenvalues `√N·â(k) = Σ_j a_j cos(2πjk/N)`, `k = 0..N−1`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// The same eigenvalue by direct cosine summation (`O(N)` per mode).
    pub fn eigenvalue_direct(&self, k: usize) -> f64 {
        let n = self.len();
        self.first_row
            .iter()
            .enumerate()
            .map(|(j, a)| a * (TAU * ((j * k) % n) as f64 / n as f64).cos())
            .sum()
    }

    fn check_modes(&self) -> Result<()> {
        for (k, &v) in self.eigenvalues.iter().enumerate().skip(1) {
            if !(v > 0.0) {
                return Err(Error::InvalidOperator { mode: k, value: v });
            }
        }
        Ok(())
    }
}

fn fft_eigenvalues(row: &[f64]) -> Vec<f64> {
    let n = row.len();
    let mut buf: Vec<Complex<f64>> = row.iter().map(|&a| Complex::new(a, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// First row of `A(ε)` for a periodic quadratic spec:
/// `a_0 = Ñ + (α/Ñ²)Σ_{l=1}^{N−1} ρ(l/Ñ) + ε`, `a_l = −(α/Ñ²) ρ_c(l)` and an
/// extra `−Ñ/2` at `l = 1, N−1`.
pub fn circulant_coefficients(spec: &ModelSpec, epsilon: f64) -> Result<CirculantOperator> {
    spec.require_quadratic()?;
    if spec.boundary() != Boundary::Periodic {
        return Err(Error::WrongBoundary("periodic"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon", "must be finite and nonnegative"));
    }
    let n = spec.grid_len();
    let nt = spec.n_per_unit() as f64;
    let c = spec.alpha() / (nt * nt);
    let kernel = build_kernel(spec);
    let mut row = vec![0.0; n];
    let mut diag = 0.0;
    for (l, slot) in row.iter_mut().enumerate().skip(1) {
        let w = c * kernel.pair_weight(l);
        *slot = -w;
        diag += w;
    }
    row[0] = nt + diag + epsilon;
    row[1] -= 0.5 * nt;
    row[n - 1] -= 0.5 * nt;
    CirculantOperator::from_first_row(row, epsilon, spec.dim())
}

/// Per-coordinate variance of `x_n − x_m` under `exp(−xᵀAx)`:
/// `(2/N) Σ_{k=1}^{N−1} (1 − cos(2π(n−m)k/N)) / μ_k` with `μ_k = 2·eig_A(k)`.
pub fn dft_increment_variance(op: &CirculantOperator, m: usize, n: usize) -> Result<f64> {
    let len = op.len();
    for idx in [m, n] {
        if idx >= len {
            return Err(Error::IndexOutOfRange {
                what: "grid index",
                index: idx,
                lo: 0,
                hi: len - 1,
            });
        }
    }
    op.check_modes()?;
    let lag = (n + len - m) % len;
    if lag == 0 {
        return Ok(0.0);
    }
    let s: f64 = op
        .eigenvalues
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &lam)| (1.0 - (TAU * ((lag * k) % len) as f64 / len as f64).cos()) / lam)
        .sum();
    Ok(s / len as f64)
}

/// Same quantity with eigenvalues recomputed by direct cosine sums; the
/// independent oracle for the FFT path.
pub fn dft_increment_variance_direct(op: &CirculantOperator, m: usize, n: usize) -> Result<f64> {
    let len = op.len();
    if m >= len || n >= len {
        return Err(Error::IndexOutOfRange {
            what: "grid index",
            index: m.max(n),
            lo: 0,
            hi: len - 1,
        });
    }
    let lag = (n + len - m) % len;
    let mut s = 0.0;
    for k in 1..len {
        let lam = op.eigenvalue_direct(k);
        if !(lam > 0.0) {
            return Err(Error::InvalidOperator { mode: k, value: lam });
        }
        s += (1.0 - (TAU * ((lag * k) % len) as f64 / len as f64).cos()) / lam;
    }
    Ok(s / len as f64)
}

/// Variance of `x_l − x_0` for every lag `l = 0..N−1` in one inverse FFT.
pub fn dft_increment_variances(op: &CirculantOperator) -> Result<Vec<f64>> {
    op.check_modes()?;
    let len = op.len();
    let mut buf: Vec<Complex<f64>> = op
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &lam)| Complex::new(if k == 0 { 0.0 } else { 1.0 / lam }, 0.0))
        .collect();
    let total: f64 = buf.iter().map(|c| c.re).sum();
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    Ok(buf
        .iter()
        .enumerate()
        .map(|(l, c)| if l == 0 { 0.0 } else { (total - c.re) / len as f64 })
        .collect())
}
