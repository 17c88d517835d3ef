//! Continuum mean-square displacement of the quadratic model,
//! `2∫₀^∞ (1 − cos 2πsk) / (4π²k² + α Δ(k)) dk` with
//! `Δ(k) = ρ̂(0) − ρ̂(k) = 2∫₀^∞ ρ(t)(1 − cos 2πkt) dt` and `ρ(t) = 1/(1+t^ξ)`.
//!
//! At `α = 0` the integral equals `s/2`; the physical per-coordinate
//! variance of the discretised model at coupling `α` is twice the integral
//! evaluated at `2α`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::gaussian::quad::{cosine_tail, integrate, Quad, QuadratureConfig};

/// `∫₀^∞ ρ(t) dt = π / (ξ sin(π/ξ))` for `ξ > 1`.
pub fn kernel_integral(xi: f64) -> f64 {
    PI / (xi * (PI / xi).sin())
}

/// `F(k) = ∫₀^∞ ρ(t) cos(2πkt) dt`, `k > 0`.
///
/// The contour is rotated to `t = r e^{iθ}` with `θ = π/(2ξ)`, which stays
/// below the first pole of `ρ` at angle `π/ξ` and turns the oscillation into
/// exponential decay: `ρ(r e^{iθ}) = 1/(1 + i r^ξ)`.
fn kernel_cosine_transform(xi: f64, k: f64, cfg: &QuadratureConfig) -> Quad {
    let theta = 0.5 * PI / xi;
    let (sin, cos) = theta.sin_cos();
    let rot = Complex::new(cos, sin);
    let decay_len = 1.0 / (2.0 * PI * k * sin);
    let r_max = (40.0 * decay_len).max(1.0);
    let integrand = |r: f64| -> f64 {
        let rho = Complex::new(1.0, r.powf(xi)).inv();
        let phase = Complex::new(-2.0 * PI * k * r * sin, 2.0 * PI * k * r * cos).exp();
        (rot * rho * phase).re
    };
    let mut q = integrate(integrand, 0.0, r_max.min(1.0), cfg);
    if r_max > 1.0 {
        q = q.add(integrate(integrand, 1.0, r_max, cfg));
    }
    // Neglected tail beyond r_max is below e^{-40} of the integrand scale.
    q.error += decay_len * (-40.0f64).exp();
    q
}

/// `Δ(k) = 2∫₀^∞ ρ(t)(1 − cos 2πkt) dt` for `ξ > 1`, `k ≥ 0`.
pub fn kernel_transform_gap(xi: f64, k: f64, cfg: &QuadratureConfig) -> Result<Quad> {
    if !(xi > 1.0) {
        return Err(Error::NonIntegrable(format!(
            "the kernel transform needs xi > 1, got {xi}"
        )));
    }
    if k == 0.0 {
        return Ok(Quad::exact(0.0));
    }
    let f = kernel_cosine_transform(xi, k.abs(), cfg);
    Ok(Quad::exact(kernel_integral(xi)).sub(f).scale(2.0))
}

/// The continuum integral at separation `s`, with its error estimate.
pub fn continuum_msd_quad(alpha: f64, xi: f64, s: f64, cfg: &QuadratureConfig) -> Result<Quad> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha", "must be finite and nonnegative"));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::invalid("s", "separation must be positive"));
    }
    if alpha > 0.0 && !(xi > 1.0) {
        return Err(Error::NonIntegrable(format!(
            "the kernel is not integrable for xi = {xi} <= 1"
        )));
    }
    let inner = QuadratureConfig {
        rel_tol: cfg.rel_tol * 1e-2,
        ..*cfg
    };
    let mut failed: Option<Error> = None;
    let mut denom = |u: f64| -> f64 {
        let k = u / s;
        let gap = if alpha == 0.0 {
            0.0
        } else {
            match kernel_transform_gap(xi, k, &inner) {
                Ok(q) => {
                    if !q.converged && failed.is_none() {
                        failed = Some(Error::QuadratureNotConverged {
                            value: q.value,
                            error: q.error,
                        });
                    }
                    q.value
                }
                Err(e) => {
                    failed.get_or_insert(e);
                    f64::NAN
                }
            }
        };
        4.0 * PI * PI * k * k + alpha * gap
    };
    // u = s k: msd = (2/s)∫₀^∞ (1 − cos 2πu) / D(u) du.
    let u_max = 2.0;
    let head = integrate(
        |u| {
            if u == 0.0 {
                0.0
            } else {
                (1.0 - (2.0 * PI * u).cos()) / denom(u)
            }
        },
        0.0,
        u_max,
        cfg,
    );
    // ∫_U^∞ du / D(u) via v = 1/u.
    let flat = integrate(
        |v| {
            if v == 0.0 {
                s * s / (4.0 * PI * PI)
            } else {
                1.0 / (denom(1.0 / v) * v * v)
            }
        },
        0.0,
        1.0 / u_max,
        cfg,
    );
    let osc = cosine_tail(|u| 1.0 / denom(u), u_max, cfg);
    if let Some(e) = failed {
        return Err(e);
    }
    let q = head.add(flat).sub(osc).scale(2.0 / s);
    if !q.converged || !q.value.is_finite() {
        return Err(Error::QuadratureNotConverged {
            value: q.value,
            error: q.error,
        });
    }
    Ok(q)
}

/// Value of [`continuum_msd_quad`].
pub fn continuum_msd(alpha: f64, xi: f64, s: f64, cfg: &QuadratureConfig) -> Result<f64> {
    continuum_msd_quad(alpha, xi, s, cfg).map(|q| q.value)
}
