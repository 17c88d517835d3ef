//! Dyadic statistics of paths, the telescoping decomposition of the
//! endpoint, quadratic-form domination, variance bounds, and the recursions
//! behind the scaling exponents.
//!
//! Time is measured in units of the horizon grid: `σ_i = ∫_i^{i+1} x_s ds`
//! for `i = 0..T−1`, evaluated exactly for the piecewise-linear interpolant
//! of the grid path (the trapezoid rule). For a block of length `L = 2^l`
//! starting at `u`,
//! `s̄_u^L = (Σ_{second half} σ − Σ_{first half} σ) / L`, and `s̄_u^1 = σ_u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    add_trapezoid, covariance_of_functionals, hier_precision, BlockSelection, Functional,
};
use crate::model::{ModelSpec, Path};

/// Dyadic summaries of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicStatistics {
    t: u32,
    dim: usize,
    /// `σ_i`, row-major `T × d`.
    sigma: Vec<f64>,
    /// `s̄` per level `1..=t`, each row-major `(T / 2^l) × d`.
    sbar: Vec<Vec<f64>>,
    /// `R_{u,j}` per level `0..=t`, one entry per aligned block.
    fluct: Vec<Vec<f64>>,
    endpoint: Vec<f64>,
}

impl DyadicStatistics {
    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn horizon(&self) -> usize {
        1 << self.t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `σ_i`.
    pub fn sigma(&self, i: usize) -> &[f64] {
        &self.sigma[i * self.dim..(i + 1) * self.dim]
    }

    /// `s̄_u^{2^l}` for an aligned block (`u` a multiple of `2^l`). Level 0
    /// returns `σ_u`.
    pub fn sbar(&self, level: u32, start: usize) -> Result<&[f64]> {
        let len = 1usize << level;
        if level > self.t || start % len != 0 || start + len > self.horizon() {
            return Err(Error::OutOfRange(format!(
                "no aligned block of level {level} at {start} in [0, {}]",
                self.horizon()
            )));
        }
        if level == 0 {
            return Ok(self.sigma(start));
        }
        let row = &self.sbar[level as usize - 1];
        let b = start / len;
        Ok(&row[b * self.dim..(b + 1) * self.dim])
    }

    /// `R_{u,j}` for the aligned block `[u, u + 2^j]`.
    pub fn block_fluct(&self, level: u32, start: usize) -> Result<f64> {
        let len = 1usize << level;
        if level > self.t || start % len != 0 || start + len > self.horizon() {
            return Err(Error::OutOfRange(format!(
                "no aligned block of level {level} at {start}"
            )));
        }
        Ok(self.fluct[level as usize][start / len])
    }

    /// `R_j = max_u R_{u,j}`.
    pub fn r(&self, level: u32) -> f64 {
        self.fluct[level as usize].iter().copied().fold(0.0, f64::max)
    }

    /// `x_T`.
    pub fn endpoint(&self) -> &[f64] {
        &self.endpoint
    }

    /// `C_n`: every aligned level-`n` averaged increment has norm `≤ bound`.
    pub fn c_event(&self, level: u32, bound: f64) -> bool {
        let len = 1usize << level;
        (0..self.horizon() / len).all(|b| {
            let v = self.sbar(level, b * len).expect("aligned block");
            norm(v) <= bound
        })
    }

    /// `B_i`: the oscillation on `[0, 2^i]` is at most `√(20·2^i·ln 2^i)`.
    pub fn b_event(&self, level: u32) -> bool {
        let len = (1u64 << level) as f64;
        let radius = (20.0 * len * len.ln()).sqrt();
        self.fluct[level as usize][0] <= radius
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_path(path: &Path, spec: &ModelSpec) -> Result<()> {
    if path.len() != spec.grid_len() + 1 || path.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "path has {} points in dimension {}, model expects {} in dimension {}",
            path.len(),
            path.dim(),
            spec.grid_len() + 1,
            spec.dim()
        )));
    }
    Ok(())
}

pub fn dyadic_stats(path: &Path, spec: &ModelSpec) -> Result<DyadicStatistics> {
    check_path(path, spec)?;
    let t = spec.t();
    let horizon = spec.horizon();
    let nt = spec.n_per_unit();
    let d = spec.dim();
    let h = 1.0 / nt as f64;

    let mut sigma = vec![0.0; horizon * d];
    for i in 0..horizon {
        let out = &mut sigma[i * d..(i + 1) * d];
        for k in i * nt..(i + 1) * nt {
            for ((o, a), b) in out.iter_mut().zip(path.point(k)).zip(path.point(k + 1)) {
                *o += 0.5 * h * (a + b);
            }
        }
    }

    let mut sbar = Vec::with_capacity(t as usize);
    for level in 1..=t {
        let len = 1usize << level;
        let half = len / 2;
        let blocks = horizon / len;
        let mut row = vec![0.0; blocks * d];
        for b in 0..blocks {
            let u = b * len;
            let out = &mut row[b * d..(b + 1) * d];
            for c in 0..d {
                let first: f64 = (u..u + half).map(|i| sigma[i * d + c]).sum();
                let second: f64 = (u + half..u + len).map(|i| sigma[i * d + c]).sum();
                out[c] = (second - first) / len as f64;
            }
        }
        sbar.push(row);
    }

    let fluct = block_fluctuations(path, t, nt);
    Ok(DyadicStatistics {
        t,
        dim: d,
        sigma,
        sbar,
        fluct,
        endpoint: path.point(spec.grid_len()).to_vec(),
    })
}

/// `R_{u,j}` for all levels `0..=t` and aligned blocks.
fn block_fluctuations(path: &Path, t: u32, nt: usize) -> Vec<Vec<f64>> {
    let horizon = 1usize << t;
    let d = path.dim();
    let mut out = Vec::with_capacity(t as usize + 1);
    if d == 1 {
        // Merge min/max over dyadic halves; neighbouring blocks share a point.
        let mut mins = Vec::with_capacity(horizon);
        let mut maxs = Vec::with_capacity(horizon);
        for u in 0..horizon {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for k in u * nt..=(u + 1) * nt {
                let v = path.point(k)[0];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            mins.push(lo);
            maxs.push(hi);
        }
        out.push(mins.iter().zip(&maxs).map(|(a, b)| b - a).collect());
        while mins.len() > 1 {
            mins = mins.chunks(2).map(|c| c[0].min(c[1])).collect();
            maxs = maxs.chunks(2).map(|c| c[0].max(c[1])).collect();
            out.push(mins.iter().zip(&maxs).map(|(a, b)| b - a).collect());
        }
    } else {
        for level in 0..=t {
            let len = 1usize << level;
            let row = (0..horizon / len)
                .map(|b| {
                    let (lo, hi) = (b * len * nt, (b + 1) * len * nt);
                    let mut best = 0.0f64;
                    for i in lo..=hi {
                        for j in i + 1..=hi {
                            best = best.max(path.sq_increment(i, j));
                        }
                    }
                    best.sqrt()
                })
                .collect();
            out.push(row);
        }
    }
    out
}

/// Residual of `x_T = (x_T − σ_{T−1}) + Σ_{j=1}^{t} s̄_0^{2^j} + Σ_{l=1}^{t} s̄_{T−2^l}^{2^l} + σ_0`.
///
/// Both chains reach the full block `[0, T]`, so `s̄_0^T` enters twice.
pub fn telescoping_residual(stats: &DyadicStatistics) -> f64 {
    let d = stats.dim;
    let t = stats.t;
    let horizon = stats.horizon();
    let mut sum = vec![0.0; d];
    let mut add = |v: &[f64]| {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    };
    add(stats.endpoint());
    let last: Vec<f64> = stats.sigma(horizon - 1).iter().map(|x| -x).collect();
    add(&last);
    for j in 1..=t {
        add(stats.sbar(j, 0).expect("aligned"));
    }
    for l in 1..=t {
        add(stats.sbar(l, horizon - (1 << l)).expect("aligned"));
    }
    add(stats.sigma(0));
    sum.iter()
        .zip(stats.endpoint())
        .map(|(s, x)| (s - x) * (s - x))
        .sum::<f64>()
        .sqrt()
}

/// Closed grid interval `[lo, hi]` in grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridInterval {
    pub lo: usize,
    pub hi: usize,
}

impl GridInterval {
    pub fn new(lo: usize, hi: usize) -> Self {
        GridInterval { lo, hi }
    }

    /// The interval `[a, b]` in time units.
    pub fn from_time(spec: &ModelSpec, a: usize, b: usize) -> Self {
        GridInterval {
            lo: a * spec.n_per_unit(),
            hi: b * spec.n_per_unit(),
        }
    }
}

/// Exact integrals of the piecewise-linear interpolant over an interval.
struct Moments {
    len: f64,
    first: Vec<f64>,
    second: f64,
}

fn moments(path: &Path, iv: GridInterval, h: f64) -> Moments {
    let d = path.dim();
    let mut first = vec![0.0; d];
    let mut second = 0.0;
    for k in iv.lo..iv.hi {
        let (a, b) = (path.point(k), path.point(k + 1));
        for c in 0..d {
            first[c] += 0.5 * h * (a[c] + b[c]);
            second += h * (a[c] * a[c] + a[c] * b[c] + b[c] * b[c]) / 3.0;
        }
    }
    Moments {
        len: (iv.hi - iv.lo) as f64 * h,
        first,
        second,
    }
}

/// `∫_I |x − x̄_I|²` computed cell by cell on the centred path.
fn centred_second_moment(path: &Path, iv: GridInterval, h: f64) -> f64 {
    let m = moments(path, iv, h);
    let mean: Vec<f64> = m.first.iter().map(|f| f / m.len).collect();
    let mut acc = 0.0;
    for k in iv.lo..iv.hi {
        let (a, b) = (path.point(k), path.point(k + 1));
        for c in 0..path.dim() {
            let (p, q) = (a[c] - mean[c], b[c] - mean[c]);
            acc += h * (p * p + p * q + q * q) / 3.0;
        }
    }
    acc
}

fn check_intervals(path: &Path, i1: GridInterval, i2: GridInterval) -> Result<()> {
    let n = path.len() - 1;
    for iv in [i1, i2] {
        if iv.lo >= iv.hi || iv.hi > n {
            return Err(Error::OutOfRange(format!(
                "interval [{}, {}] is empty or leaves the grid 0..={n}",
                iv.lo, iv.hi
            )));
        }
    }
    if i1.hi - i1.lo != i2.hi - i2.lo {
        return Err(Error::invalid("intervals", "domination requires equal lengths"));
    }
    if i1.lo < i2.hi && i2.lo < i1.hi {
        return Err(Error::invalid("intervals", "intervals must not overlap"));
    }
    Ok(())
}

/// `Q = ∫_{I1}∫_{I2} |x_t − x_s|² dt ds`.
pub fn quadform_q(path: &Path, spec: &ModelSpec, i1: GridInterval, i2: GridInterval) -> Result<f64> {
    check_path(path, spec)?;
    check_intervals(path, i1, i2)?;
    let h = 1.0 / spec.n_per_unit() as f64;
    let (m1, m2) = (moments(path, i1, h), moments(path, i2, h));
    let cross: f64 = m1.first.iter().zip(&m2.first).map(|(a, b)| a * b).sum();
    Ok(m2.len * m1.second + m1.len * m2.second - 2.0 * cross)
}

/// `Q̃ = |∫_{I1} x − ∫_{I2} x|²`.
pub fn quadform_qtilde(
    path: &Path,
    spec: &ModelSpec,
    i1: GridInterval,
    i2: GridInterval,
) -> Result<f64> {
    check_path(path, spec)?;
    check_intervals(path, i1, i2)?;
    let h = 1.0 / spec.n_per_unit() as f64;
    let (m1, m2) = (moments(path, i1, h), moments(path, i2, h));
    Ok(m1.first.iter().zip(&m2.first).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// `Q − Q̃`.
pub fn quadform_gap(path: &Path, spec: &ModelSpec, i1: GridInterval, i2: GridInterval) -> Result<f64> {
    Ok(quadform_q(path, spec, i1, i2)? - quadform_qtilde(path, spec, i1, i2)?)
}

/// `L·(∫_{I1}|x − x̄_{I1}|² + ∫_{I2}|x − x̄_{I2}|²)`, the closed form of the gap.
pub fn quadform_correction(
    path: &Path,
    spec: &ModelSpec,
    i1: GridInterval,
    i2: GridInterval,
) -> Result<f64> {
    check_path(path, spec)?;
    check_intervals(path, i1, i2)?;
    let h = 1.0 / spec.n_per_unit() as f64;
    let len = (i1.hi - i1.lo) as f64 * h;
    Ok(len * (centred_second_moment(path, i1, h) + centred_second_moment(path, i2, h)))
}

/// `2α⁻¹ Σ A_i² + 4α⁻¹ A* t²` with `A* = max A_i²` and `t = a_seq.len()`.
pub fn variance_bound_lemma(alpha: f64, a_seq: &[f64]) -> Result<f64> {
    let (sum, star) = lemma_sums(alpha, a_seq)?;
    let t = a_seq.len() as f64;
    Ok((2.0 * sum + 4.0 * star * t * t) / alpha)
}

/// The intermediate form `2α⁻¹ Σ A_i² + 2α⁻¹ (t + t²) A*`.
pub fn variance_bound_lemma_proof_form(alpha: f64, a_seq: &[f64]) -> Result<f64> {
    let (sum, star) = lemma_sums(alpha, a_seq)?;
    let t = a_seq.len() as f64;
    Ok((2.0 * sum + 2.0 * (t + t * t) * star) / alpha)
}

fn lemma_sums(alpha: f64, a_seq: &[f64]) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", "the bound needs alpha > 0"));
    }
    if a_seq.is_empty() || a_seq.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::invalid("a_seq", "needs at least one finite positive entry"));
    }
    let sum = a_seq.iter().map(|a| a * a).sum();
    let star = a_seq.iter().map(|a| a * a).fold(0.0, f64::max);
    Ok((sum, star))
}

/// `A_j = 2^{(ξ−2)j/2}`, `j = 1..=t`.
pub fn gaussian_a_seq(t: u32, xi: f64) -> Vec<f64> {
    (1..=t).map(|j| (0.5 * (xi - 2.0) * j as f64).exp2()).collect()
}

/// Exact hierarchical-measure variance against the lemma bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    /// `E[|σ_{T−1} − σ_0|²]` per coordinate under the endpoint-chain measure.
    pub exact: f64,
    pub bound: f64,
    pub bound_proof_form: f64,
    pub holds: bool,
}

/// Grid weights of `σ_{T−1} − σ_0`.
pub fn sigma_span_functional(spec: &ModelSpec) -> Functional {
    let mut w = vec![0.0; spec.grid_len() + 1];
    let horizon = spec.horizon();
    add_trapezoid(&mut w, spec.n_per_unit(), horizon - 1, horizon, 1.0);
    add_trapezoid(&mut w, spec.n_per_unit(), 0, 1, -1.0);
    Functional::new("sigma[T-1]-sigma[0]", w)
}

pub fn check_lemma_bound(spec: &ModelSpec, a_seq: &[f64]) -> Result<LemmaReport> {
    spec.require_quadratic()?;
    let t = spec.t() as usize;
    if a_seq.len() < t {
        return Err(Error::DimensionMismatch(format!(
            "a_seq has {} levels, horizon needs {t}",
            a_seq.len()
        )));
    }
    let a = &a_seq[..t];
    let prec = hier_precision(spec, a, BlockSelection::EndpointChain)?;
    let exact = covariance_of_functionals(&prec, &[sigma_span_functional(spec)])?.matrix[(0, 0)];
    let bound = variance_bound_lemma(spec.alpha(), a)?;
    let bound_proof_form = variance_bound_lemma_proof_form(spec.alpha(), a)?;
    Ok(LemmaReport {
        exact,
        bound,
        bound_proof_form,
        holds: exact <= bound,
    })
}

/// The four evaluable endpoint-variance bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremBound {
    /// `16(C·min{α^{−1/2}, 1} + α⁻¹ max{ζ⁻¹ ln²T·T^{ξ−2}, 1})`, `ξ ∈ [0, 3)`.
    T1_1,
    /// `C ln⁴T·T^{ξ−1−γ/2}`, `ξ ∈ (1+γ/2, 2+γ/2)`.
    T1_2,
    /// `C T^{2(ξ−2)/γ} ln²T`, `ξ > 2`.
    T1_3,
    /// `C ln^{5/2}T`, `ξ ∈ (0, 2)` and `α ≥ C √(ln T)`.
    T1_4,
}

impl std::str::FromStr for TheoremBound {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "T1_1" | "t1_1" => Ok(TheoremBound::T1_1),
            "T1_2" | "t1_2" => Ok(TheoremBound::T1_2),
            "T1_3" | "t1_3" => Ok(TheoremBound::T1_3),
            "T1_4" | "t1_4" => Ok(TheoremBound::T1_4),
            other => Err(Error::invalid("bound", format!("unknown bound `{other}`"))),
        }
    }
}

/// Inputs of [`theorem_bound`]; `c` and `zeta` are caller-chosen constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub alpha: f64,
    pub horizon: f64,
    pub gamma: f64,
    pub xi: f64,
    pub zeta: f64,
    pub c: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        BoundParams {
            alpha: 1.0,
            horizon: 256.0,
            gamma: 1.0,
            xi: 2.0,
            zeta: 1.0,
            c: 1.0,
        }
    }
}

/// Evaluates a bound with natural logarithms.
pub fn theorem_bound(which: TheoremBound, p: &BoundParams) -> Result<f64> {
    let BoundParams {
        alpha,
        horizon,
        gamma,
        xi,
        zeta,
        c,
    } = *p;
    if !(alpha > 0.0) || !(horizon > 1.0) || !(c > 0.0) || !(zeta > 0.0) {
        return Err(Error::OutOfRange(
            "bounds need alpha > 0, T > 1, C > 0 and zeta > 0".into(),
        ));
    }
    let ln_t = horizon.ln();
    let need_gamma = || {
        if gamma > 0.0 && gamma < 2.0 {
            Ok(())
        } else {
            Err(Error::OutOfRange(format!(
                "{which:?} requires gamma in (0, 2), got {gamma}"
            )))
        }
    };
    match which {
        TheoremBound::T1_1 => {
            if !(0.0..3.0).contains(&xi) {
                return Err(Error::OutOfRange(format!("T1_1 requires xi in [0, 3), got {xi}")));
            }
            let first = c * alpha.powf(-0.5).min(1.0);
            let second = (ln_t * ln_t * horizon.powf(xi - 2.0) / zeta).max(1.0) / alpha;
            Ok(16.0 * (first + second))
        }
        TheoremBound::T1_2 => {
            need_gamma()?;
            let (lo, hi) = (1.0 + 0.5 * gamma, 2.0 + 0.5 * gamma);
            if !(xi > lo && xi < hi) {
                return Err(Error::OutOfRange(format!(
                    "T1_2 requires xi in ({lo}, {hi}), got {xi}"
                )));
            }
            Ok(c * ln_t.powi(4) * horizon.powf(xi - 1.0 - 0.5 * gamma))
        }
        TheoremBound::T1_3 => {
            need_gamma()?;
            if !(xi > 2.0) {
                return Err(Error::OutOfRange(format!("T1_3 requires xi > 2, got {xi}")));
            }
            Ok(c * horizon.powf(2.0 * (xi - 2.0) / gamma) * ln_t * ln_t)
        }
        TheoremBound::T1_4 => {
            need_gamma()?;
            if !(xi > 0.0 && xi < 2.0) {
                return Err(Error::OutOfRange(format!("T1_4 requires xi in (0, 2), got {xi}")));
            }
            let need = c * ln_t.sqrt();
            if alpha < need {
                return Err(Error::OutOfRange(format!(
                    "T1_4 requires alpha >= C sqrt(ln T) = {need}, got {alpha}"
                )));
            }
            Ok(c * ln_t.powf(2.5))
        }
    }
}

/// Sequences `A_n, r_n` and `S_j, V_j` with their derived constants.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecursionState {
    pub a_seq: Vec<f64>,
    pub r_seq: Vec<f64>,
    pub s_seq: Vec<f64>,
    pub v_seq: Vec<f64>,
    /// `log_T S_j`.
    pub exponent_trace: Vec<f64>,
    /// Fixed point of the exponent map actually iterated.
    pub exponent_fixed_point: Option<f64>,
    /// The closed-form limit `(2/γ)(ξ−2+log_T C(T)) + D(T)`.
    pub printed_limit: Option<f64>,
    pub c_of_t: Option<f64>,
    pub d_of_t: Option<f64>,
    pub a_star: Option<f64>,
    pub beta_const: Option<f64>,
    /// Set when `r_n` left the finite floating-point range.
    pub overflow: bool,
}

/// `(20^{γ/2} + (γ/2)·256/(1 − 2^{−(2−ξ)/2}))^{2/γ}`, the uniform cap on `r_n`
/// for `ξ < 2`.
pub fn r_cap(gamma: f64, xi: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 2.0) || !(xi < 2.0) {
        return Err(Error::OutOfRange(format!(
            "the r_n cap needs gamma in (0, 2) and xi < 2, got ({gamma}, {xi})"
        )));
    }
    let eps = 0.5 * gamma;
    let c = 0.5 * (2.0 - xi);
    Ok((20f64.powf(eps) + eps * 256.0 / (1.0 - (-c).exp2())).powf(1.0 / eps))
}

/// `r_0 = √20`, `A_n = r_n^{1−γ/2} 2^{n(ξ−2)/2}`, `r_{n+1} = 256 Σ_{k≤n} A_k`.
pub fn a_r_recursion(gamma: f64, xi: f64, n_max: usize) -> Result<RecursionState> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::OutOfRange(format!("recursion needs gamma in (0, 2), got {gamma}")));
    }
    if !xi.is_finite() {
        return Err(Error::invalid("xi", "must be finite"));
    }
    let mut r_seq = vec![20f64.sqrt()];
    let mut a_seq = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    let mut overflow = false;
    for n in 0..=n_max {
        let r = r_seq[n];
        let a = r.powf(1.0 - 0.5 * gamma) * (0.5 * n as f64 * (xi - 2.0)).exp2();
        a_seq.push(a);
        acc += a;
        let next = 256.0 * acc;
        if !next.is_finite() {
            overflow = true;
            break;
        }
        r_seq.push(next);
    }
    let a_star = a_seq.iter().map(|a| a * a).fold(0.0, f64::max);
    Ok(RecursionState {
        a_seq,
        r_seq,
        a_star: Some(a_star),
        overflow,
        ..Default::default()
    })
}

/// `C(T) = √(40 ln T)`.
pub fn c_of_t(horizon: f64) -> f64 {
    (40.0 * horizon.ln()).sqrt()
}

/// `D(T) = log_T(ln T + ln²T)`.
pub fn d_of_t(horizon: f64) -> f64 {
    let l = horizon.ln();
    (l + l * l).ln() / l
}

/// `S_0 = T`, `V_j = S_j^{1/2} C(T)`, `S_{j+1} = V_j^{2−γ} T^{ξ−2+D(T)}`,
/// tracked in `log_T` coordinates.
pub fn s_v_recursion(gamma: f64, xi: f64, horizon: f64, j_max: usize) -> Result<RecursionState> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::OutOfRange(format!("recursion needs gamma in (0, 2), got {gamma}")));
    }
    let (lo, hi) = (2.0, 2.0 + 0.5 * gamma);
    if !(xi > lo && xi < hi) {
        return Err(Error::OutOfRange(format!(
            "the S/V recursion needs xi in ({lo}, {hi}), got {xi}"
        )));
    }
    if !(horizon > 1.0) {
        return Err(Error::OutOfRange(format!("T must exceed 1, got {horizon}")));
    }
    let ln_t = horizon.ln();
    let c = c_of_t(horizon);
    let d = d_of_t(horizon);
    let log_c = c.ln() / ln_t;
    let mut trace = vec![1.0];
    let mut v_trace = Vec::with_capacity(j_max);
    for _ in 0..j_max {
        let beta = *trace.last().unwrap();
        let v = 0.5 * beta + log_c;
        v_trace.push(v);
        trace.push(xi - 2.0 + d + (2.0 - gamma) * v);
    }
    let fixed = (2.0 / gamma) * ((2.0 - gamma) * log_c + xi - 2.0 + d);
    let printed = (2.0 / gamma) * (xi - 2.0 + log_c) + d;
    Ok(RecursionState {
        s_seq: trace.iter().map(|b| (b * ln_t).exp()).collect(),
        v_seq: v_trace.iter().map(|b| (b * ln_t).exp()).collect(),
        exponent_trace: trace,
        exponent_fixed_point: Some(fixed),
        printed_limit: Some(printed),
        c_of_t: Some(c),
        d_of_t: Some(d),
        beta_const: Some((256.0 * 20f64.sqrt() * ln_t / std::f64::consts::LN_2).powf(2.0 - gamma)),
        ..Default::default()
    })
}

/// Iterates of `h(x) = C + d x` from `x = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub value: f64,
    pub fixed_point: f64,
    /// `|x* − hⁿ(1)| = dⁿ |1 − x*|`.
    pub error: f64,
    /// `C/(1−d) · dⁿ`.
    pub stated_bound: f64,
    /// The stated bound is valid whenever `x* ≥ 1/2`.
    pub bound_applies: bool,
    pub bound_holds: bool,
}

pub fn fixed_point_iterate(c: f64, d: f64, n: u32) -> Result<FixedPointReport> {
    if !(d < 1.0) || !(d >= 0.0) {
        return Err(Error::OutOfRange(format!("contraction needs d in [0, 1), got {d}")));
    }
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::invalid("C", "must be finite and nonnegative"));
    }
    let mut x = 1.0;
    for _ in 0..n {
        x = c + d * x;
    }
    let fixed = c / (1.0 - d);
    let dn = d.powi(n as i32);
    let error = (fixed - x).abs();
    let stated = fixed * dn;
    Ok(FixedPointReport {
        value: x,
        fixed_point: fixed,
        error,
        stated_bound: stated,
        bound_applies: fixed >= 0.5,
        bound_holds: error <= stated * (1.0 + 1e-12) + 4.0 * f64::EPSILON * (n as f64 + 1.0) * fixed.max(1.0),
    })
}

/// `β ↦ ξ − 2 + β − βγ/2`.
pub fn exponent_map(beta: f64, gamma: f64, xi: f64) -> f64 {
    xi - 2.0 + beta - 0.5 * beta * gamma
}

/// `2(ξ−2)/γ`.
pub fn exponent_fixed_point(gamma: f64, xi: f64) -> Result<f64> {
    if gamma == 0.0 {
        return Err(Error::OutOfRange("the exponent map has no fixed point at gamma = 0".into()));
    }
    Ok(2.0 * (xi - 2.0) / gamma)
}

/// Grid weights of `s̄` and `σ` for dyadic blocks, for callers that need them
/// as functionals.
pub fn sigma_functional(spec: &ModelSpec, i: usize) -> Result<Functional> {
    if i >= spec.horizon() {
        return Err(Error::IndexOutOfRange {
            what: "sigma",
            index: i,
            lo: 0,
            hi: spec.horizon() - 1,
        });
    }
    let mut w = vec![0.0; spec.grid_len() + 1];
    add_trapezoid(&mut w, spec.n_per_unit(), i, i + 1, 1.0);
    Ok(Functional::new(format!("sigma[{i}]"), w))
}
