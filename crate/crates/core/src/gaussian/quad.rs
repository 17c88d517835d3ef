//! Adaptive Gauss–Kronrod quadrature and half-period summation of
//! oscillatory tails with Wynn-ε acceleration.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

/// Tolerances shared by every quadrature in this crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Half-periods summed before giving up on an oscillatory tail.
    pub max_tail_terms: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-13,
            max_subdivisions: 4000,
            max_tail_terms: 400,
        }
    }
}

/// A quadrature value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

impl Quad {
    pub fn add(self, other: Quad) -> Quad {
        Quad {
            value: self.value + other.value,
            error: self.error + other.error,
            converged: self.converged && other.converged,
        }
    }

    pub fn sub(self, other: Quad) -> Quad {
        Quad {
            value: self.value - other.value,
            error: self.error + other.error,
            converged: self.converged && other.converged,
        }
    }

    pub fn scale(self, c: f64) -> Quad {
        Quad {
            value: c * self.value,
            error: c.abs() * self.error,
            converged: self.converged,
        }
    }

    pub fn exact(value: f64) -> Quad {
        Quad {
            value,
            error: 0.0,
            converged: true,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod rule on `[a, b]` with the embedded 7-point Gauss
/// rule as error estimate.
pub fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    (value, err)
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive bisection on `[a, b]`, always splitting the piece with
/// the largest error estimate.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, cfg: &QuadratureConfig) -> Quad {
    if a == b {
        return Quad::exact(0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    let mut splits = 0;
    while err > cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
        if splits >= cfg.max_subdivisions {
            return Quad {
                value: total,
                error: err,
                converged: false,
            };
        }
        let p = heap.pop().expect("heap is never empty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&mut f, p.a, m);
        let (v2, e2) = gk15(&mut f, m, p.b);
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Piece { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, error: e2 });
        splits += 1;
        if !total.is_finite() {
            break;
        }
    }
    // Recompute the sums to shed accumulated cancellation.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Quad {
        value,
        error,
        converged: value.is_finite(),
    }
}

/// Wynn's ε-algorithm over a sequence of partial sums; returns the last
/// even-column estimate and the spread between the two most recent ones.
pub fn wynn_epsilon(partial: &[f64]) -> (f64, f64) {
    let n = partial.len();
    if n < 3 {
        let last = partial.last().copied().unwrap_or(0.0);
        let prev = if n > 1 { partial[n - 2] } else { last };
        return (last, (last - prev).abs());
    }
    // Table columns eps_{-1} = 0, eps_0 = partial sums.
    let mut prev_col = vec![0.0; n + 1];
    let mut col: Vec<f64> = partial.to_vec();
    let mut best = *partial.last().unwrap();
    let mut best_prev = partial[n - 2];
    let mut k = 0;
    while col.len() >= 2 {
        let mut next = Vec::with_capacity(col.len() - 1);
        for i in 0..col.len() - 1 {
            let diff = col[i + 1] - col[i];
            let inv = if diff == 0.0 { f64::INFINITY } else { 1.0 / diff };
            next.push(prev_col[i + 1] + inv);
        }
        prev_col = col;
        col = next;
        k += 1;
        if k % 2 == 0 && !col.is_empty() {
            let cand = *col.last().unwrap();
            if !cand.is_finite() {
                break;
            }
            best_prev = if col.len() >= 2 { col[col.len() - 2] } else { best };
            best = cand;
        }
    }
    (best, (best - best_prev).abs())
}

/// `∫_a^∞ g(u) cos(2πu) du` for slowly decaying smooth `g`, summed over
/// half-periods starting at the integer or half-integer `a`.
pub fn cosine_tail(mut g: impl FnMut(f64) -> f64, a: f64, cfg: &QuadratureConfig) -> Quad {
    let mut partial = Vec::new();
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut est = (0.0, f64::INFINITY);
    let mut integrand = |u: f64| g(u) * (std::f64::consts::TAU * u).cos();
    for j in 0..cfg.max_tail_terms {
        let lo = a + 0.5 * j as f64;
        let piece = integrate(&mut integrand, lo, lo + 0.5, cfg);
        sum += piece.value;
        err += piece.error;
        partial.push(sum);
        if partial.len() >= 12 && partial.len() % 2 == 0 {
            let window = &partial[partial.len().saturating_sub(40)..];
            est = wynn_epsilon(window);
            let scale = est.0.abs().max(cfg.abs_tol);
            if est.1 <= 0.1 * cfg.rel_tol * scale || est.1 <= 0.1 * cfg.abs_tol {
                return Quad {
                    value: est.0,
                    error: est.1 + err,
                    converged: true,
                };
            }
        }
    }
    Quad {
        value: est.0,
        error: est.1 + err,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, &QuadratureConfig::default());
        assert!((q.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let q = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &QuadratureConfig::default());
        assert!(q.converged);
        assert!((q.value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn wynn_accelerates_alternating_harmonic() {
        let mut s = 0.0;
        let partial: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        let (v, _) = wynn_epsilon(&partial);
        assert!((v - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn cosine_tail_of_lorentzian() {
        // ∫_0^∞ cos(2πu)/(1+u²) du = (π/2) e^{-2π}
        let cfg = QuadratureConfig::default();
        let head = integrate(|u| (2.0 * PI * u).cos() / (1.0 + u * u), 0.0, 1.0, &cfg);
        let tail = cosine_tail(|u| 1.0 / (1.0 + u * u), 1.0, &cfg);
        assert!(tail.converged);
        let want = 0.5 * PI * (-2.0 * PI).exp();
        assert!((head.value + tail.value - want).abs() < 1e-9);
    }
}
