//! Model parameterisation, discretised paths, the temporal kernel and the
//! Gibbs energy of a discretised self-interacting path.
//!
//! A model lives on the horizon `T = 2^t` sampled with `Ñ` grid points per
//! unit time, so a path has `N + 1 = Ñ·T + 1` points `x_0, …, x_N` in `ℝ^d`.
//! The Gibbs weight of a path is `exp(-E(x))` with
//!
//! ```text
//! E(x) = (Ñ/2) Σ_{j=1..N} |x_j − x_{j−1}|²  +  (α/Ñ²) Σ_{i<j} w(j−i) · f(x_i − x_j)
//! ```
//!
//! Pair sums run over unordered pairs (no factor 2). Continuum comparisons
//! against the ordered double integral absorb that factor into `α`.
//!
//! * Pinned boundary: `x_0 = 0`, free right end, pairs `0 ≤ i < j ≤ N`,
//!   `w(l) = g(l/Ñ)` with `g(τ) = 1/(1 + τ^ξ)`.
//! * Periodic boundary: `x_N ≡ x_0`, pairs `0 ≤ i < j ≤ N−1` on the cycle with
//!   the symmetrised weight `w(l) = ½[g(l/Ñ) + g((N−l)/Ñ)]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary condition of the discretised path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// `x_0 = 0`, free right end.
    Pinned,
    /// Closed loop, `x_N = x_0`; only increments are meaningful.
    Periodic,
}

impl Boundary {
    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Pinned => "pinned",
            Boundary::Periodic => "periodic",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pinned" => Ok(Boundary::Pinned),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(Error::invalid(
                "boundary",
                format!("unknown boundary `{other}` (expected pinned | periodic)"),
            )),
        }
    }
}

/// Radial profile `r ↦ f(r)` of a user-supplied spatial potential.
#[derive(Clone)]
pub struct RadialProfile(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl RadialProfile {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        RadialProfile(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        (self.0)(r)
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RadialProfile(..)")
    }
}

/// Spatial pair potential.
#[derive(Debug, Clone)]
pub enum Potential {
    /// `f(z) = |z|^γ`; the quasi-convexity gap is exactly 1.
    PowerLaw,
    /// Radially symmetric `f(z) = profile(|z|)` with declared `(γ, ζ)` such that
    /// `profile(r) − ζ r^γ` is nondecreasing (quasi-convex in `z`).
    Radial { name: String, profile: RadialProfile },
}

/// Full parameterisation of one discretised path measure.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    t: u32,
    n_per_unit: usize,
    dim: usize,
    alpha: f64,
    gamma: f64,
    xi: f64,
    zeta: f64,
    potential: Potential,
    boundary: Boundary,
}

/// Largest supported horizon exponent; `Ñ·2^t` must stay addressable.
pub const MAX_T_EXPONENT: u32 = 24;

#[derive(Debug, Clone)]
pub struct ModelSpecBuilder {
    t: u32,
    n_per_unit: usize,
    dim: usize,
    alpha: f64,
    gamma: f64,
    xi: f64,
    zeta: f64,
    potential: Potential,
    boundary: Boundary,
}

impl Default for ModelSpecBuilder {
    fn default() -> Self {
        ModelSpecBuilder {
            t: 8,
            n_per_unit: 4,
            dim: 1,
            alpha: 1.0,
            gamma: 2.0,
            xi: 2.0,
            zeta: 1.0,
            potential: Potential::PowerLaw,
            boundary: Boundary::Pinned,
        }
    }
}

impl ModelSpecBuilder {
    pub fn t(mut self, t: u32) -> Self {
        self.t = t;
        self
    }
    pub fn n_per_unit(mut self, n: usize) -> Self {
        self.n_per_unit = n;
        self
    }
    pub fn dim(mut self, d: usize) -> Self {
        self.dim = d;
        self
    }
    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
    pub fn gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }
    pub fn xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }
    pub fn zeta(mut self, zeta: f64) -> Self {
        self.zeta = zeta;
        self
    }
    pub fn boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }
    pub fn power_law(mut self) -> Self {
        self.potential = Potential::PowerLaw;
        self
    }
    /// Use a radial profile with declared exponent `gamma` and gap `zeta`.
    pub fn radial(
        mut self,
        name: impl Into<String>,
        gamma: f64,
        zeta: f64,
        profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.potential = Potential::Radial {
            name: name.into(),
            profile: RadialProfile::new(profile),
        };
        self.gamma = gamma;
        self.zeta = zeta;
        self
    }

    pub fn build(self) -> Result<ModelSpec> {
        if self.t < 1 || self.t > MAX_T_EXPONENT {
            return Err(Error::invalid(
                "t",
                format!("horizon exponent must be in 1..={MAX_T_EXPONENT}, got {}", self.t),
            ));
        }
        if self.n_per_unit == 0 {
            return Err(Error::invalid("n_per_unit", "must be a positive integer"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be a positive integer"));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid(
                "alpha",
                format!("coupling must be finite and nonnegative, got {}", self.alpha),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 2.0) {
            return Err(Error::invalid(
                "gamma",
                format!("spatial exponent must lie in (0, 2], got {}", self.gamma),
            ));
        }
        if !(self.xi.is_finite() && self.xi >= 0.0) {
            return Err(Error::invalid(
                "xi",
                format!("temporal exponent must be finite and nonnegative, got {}", self.xi),
            ));
        }
        if !(self.zeta.is_finite() && self.zeta > 0.0) {
            return Err(Error::invalid(
                "zeta",
                format!("quasi-convexity gap must be positive, got {}", self.zeta),
            ));
        }
        match &self.potential {
            Potential::PowerLaw => {
                if self.zeta != 1.0 {
                    return Err(Error::invalid(
                        "zeta",
                        "the power-law potential has gap exactly 1",
                    ));
                }
            }
            Potential::Radial { profile, .. } => {
                check_radial_profile(profile, self.gamma, self.zeta)?;
            }
        }
        Ok(ModelSpec {
            t: self.t,
            n_per_unit: self.n_per_unit,
            dim: self.dim,
            alpha: self.alpha,
            gamma: self.gamma,
            xi: self.xi,
            zeta: self.zeta,
            potential: self.potential,
            boundary: self.boundary,
        })
    }
}

/// Sampled check of `f(0) = 0`, `f ≥ 0` and monotonicity of `f(r) − ζ r^γ`.
fn check_radial_profile(profile: &RadialProfile, gamma: f64, zeta: f64) -> Result<()> {
    let f0 = profile.eval(0.0);
    if !(f0.abs() <= 1e-12) {
        return Err(Error::invalid("potential", format!("f(0) must be 0, got {f0}")));
    }
    let mut prev = 0.0_f64;
    for k in 1..=4000 {
        let r = k as f64 * 0.0125;
        let v = profile.eval(r);
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(
                "potential",
                format!("f must be finite and nonnegative, f({r}) = {v}"),
            ));
        }
        let excess = v - zeta * r.powf(gamma);
        if excess < prev - 1e-9 * (1.0 + prev.abs()) {
            return Err(Error::invalid(
                "potential",
                format!(
                    "f(r) - zeta r^gamma decreases near r = {r}; f is not quasi-convex with gap {zeta}"
                ),
            ));
        }
        prev = excess;
    }
    Ok(())
}

impl ModelSpec {
    pub fn builder() -> ModelSpecBuilder {
        ModelSpecBuilder::default()
    }

    /// Builder pre-filled with this spec's values.
    pub fn to_builder(&self) -> ModelSpecBuilder {
        ModelSpecBuilder {
            t: self.t,
            n_per_unit: self.n_per_unit,
            dim: self.dim,
            alpha: self.alpha,
            gamma: self.gamma,
            xi: self.xi,
            zeta: self.zeta,
            potential: self.potential.clone(),
            boundary: self.boundary,
        }
    }

    pub fn t(&self) -> u32 {
        self.t
    }
    pub fn n_per_unit(&self) -> usize {
        self.n_per_unit
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn potential(&self) -> &Potential {
        &self.potential
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// `T = 2^t` in time units.
    pub fn horizon(&self) -> usize {
        1usize << self.t
    }

    /// Number of grid steps `N = Ñ·T`.
    pub fn grid_len(&self) -> usize {
        self.n_per_unit * self.horizon()
    }

    pub fn is_quadratic(&self) -> bool {
        self.gamma == 2.0 && matches!(self.potential, Potential::PowerLaw)
    }

    pub fn require_quadratic(&self) -> Result<()> {
        if self.is_quadratic() {
            Ok(())
        } else {
            Err(Error::NotQuadratic(self.gamma))
        }
    }

    /// Same model with a different coupling.
    pub fn with_alpha(&self, alpha: f64) -> Result<ModelSpec> {
        self.to_builder().alpha(alpha).build()
    }

    /// `f` evaluated on the squared distance `|z|²`.
    #[inline]
    pub fn potential_sq(&self, r2: f64) -> f64 {
        match &self.potential {
            Potential::PowerLaw => {
                if self.gamma == 2.0 {
                    r2
                } else if r2 == 0.0 {
                    0.0
                } else {
                    r2.powf(0.5 * self.gamma)
                }
            }
            Potential::Radial { profile, .. } => profile.eval(r2.sqrt()),
        }
    }

    /// `f(a − b)` for two points of this model's dimension.
    #[inline]
    pub fn pair_potential(&self, a: &[f64], b: &[f64]) -> f64 {
        self.potential_sq(sq_dist(a, b))
    }

    /// Index range of the free grid variables: `1..=N` pinned, `0..N` periodic.
    pub fn free_sites(&self) -> std::ops::Range<usize> {
        match self.boundary {
            Boundary::Pinned => 1..self.grid_len() + 1,
            Boundary::Periodic => 0..self.grid_len(),
        }
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A discretised trajectory: `N + 1` points in `ℝ^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    dim: usize,
    coords: Vec<f64>,
}

impl Path {
    /// The zero path of the right shape for `spec`.
    pub fn zeros(spec: &ModelSpec) -> Path {
        Path {
            dim: spec.dim(),
            coords: vec![0.0; (spec.grid_len() + 1) * spec.dim()],
        }
    }

    /// Builds a path from row-major coordinates, checking length and boundary.
    pub fn from_coords(spec: &ModelSpec, coords: Vec<f64>) -> Result<Path> {
        let n = spec.grid_len();
        let d = spec.dim();
        if coords.len() != (n + 1) * d {
            return Err(Error::DimensionMismatch(format!(
                "path needs {} coordinates ({} points in dimension {}), got {}",
                (n + 1) * d,
                n + 1,
                d,
                coords.len()
            )));
        }
        let path = Path { dim: d, coords };
        match spec.boundary() {
            Boundary::Pinned => {
                if path.point(0).iter().any(|&v| v != 0.0) {
                    return Err(Error::invalid("path", "pinned path must start at the origin"));
                }
            }
            Boundary::Periodic => {
                if path.point(0) != path.point(n) {
                    return Err(Error::invalid(
                        "path",
                        "periodic path must close: points[N] == points[0]",
                    ));
                }
            }
        }
        Ok(path)
    }

    /// Builds a path from a closure on grid indices; the boundary is imposed
    /// afterwards (pinned: point 0 set to zero, periodic: point N copied from 0).
    pub fn from_fn(spec: &ModelSpec, mut f: impl FnMut(usize, &mut [f64])) -> Path {
        let mut path = Path::zeros(spec);
        let n = spec.grid_len();
        for i in 0..=n {
            f(i, path.point_mut(i));
        }
        path.enforce_boundary(spec.boundary());
        path
    }

    /// Unchecked constructor for internal producers of well-formed paths.
    pub(crate) fn from_raw(dim: usize, coords: Vec<f64>) -> Path {
        debug_assert!(dim > 0 && coords.len() % dim == 0);
        Path { dim, coords }
    }

    pub(crate) fn enforce_boundary(&mut self, boundary: Boundary) {
        let n = self.len() - 1;
        match boundary {
            Boundary::Pinned => self.point_mut(0).fill(0.0),
            Boundary::Periodic => {
                let d = self.dim;
                let (head, tail) = self.coords.split_at_mut(n * d);
                tail.copy_from_slice(&head[..d]);
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points, `N + 1`.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub(crate) fn point_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// One coordinate of the path as a series over the grid.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.coords.iter().skip(c).step_by(self.dim).copied().collect()
    }

    /// `|x_a − x_b|²`.
    pub fn sq_increment(&self, a: usize, b: usize) -> f64 {
        sq_dist(self.point(a), self.point(b))
    }

    /// Moves one site, keeping the periodic alias `x_N = x_0` in sync.
    pub(crate) fn set_site(&mut self, spec: &ModelSpec, site: usize, value: &[f64]) {
        self.point_mut(site).copy_from_slice(value);
        if spec.boundary() == Boundary::Periodic && site == 0 {
            let n = spec.grid_len();
            self.point_mut(n).copy_from_slice(value);
        }
    }

    /// Adds `shift` to every point of the tail block starting at `start`.
    pub(crate) fn shift_tail(&mut self, spec: &ModelSpec, start: usize, shift: &[f64]) {
        let end = match spec.boundary() {
            Boundary::Pinned => spec.grid_len() + 1,
            Boundary::Periodic => spec.grid_len(),
        };
        for i in start..end {
            for (v, s) in self.point_mut(i).iter_mut().zip(shift) {
                *v += s;
            }
        }
    }
}

/// Tabulated time-decay kernel `g(l/Ñ) = 1/(1 + (l/Ñ)^ξ)`, `l = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    values: Vec<f64>,
    /// `pair_weight(l)` for `l = 0..=N`.
    pair: Vec<f64>,
    boundary: Boundary,
}

impl KernelTable {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pair weight for grid offset `l` (`1 ≤ l ≤ N`); cyclically symmetrised
    /// on the periodic boundary.
    #[inline]
    pub fn pair_weight(&self, l: usize) -> f64 {
        self.pair[l]
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
}

/// The time-decay function `g(τ) = 1/(1 + τ^ξ)` with `g(0) = 1`.
#[inline]
pub fn decay(tau: f64, xi: f64) -> f64 {
    if tau == 0.0 {
        1.0
    } else {
        1.0 / (1.0 + tau.powf(xi))
    }
}

pub fn build_kernel(spec: &ModelSpec) -> KernelTable {
    let n = spec.grid_len();
    let inv = 1.0 / spec.n_per_unit() as f64;
    let values: Vec<f64> = (0..=n).map(|l| decay(l as f64 * inv, spec.xi())).collect();
    let pair = match spec.boundary() {
        Boundary::Pinned => values.clone(),
        Boundary::Periodic => (0..=n).map(|l| 0.5 * (values[l] + values[n - l])).collect(),
    };
    KernelTable {
        values,
        pair,
        boundary: spec.boundary(),
    }
}

fn check_path(path: &Path, spec: &ModelSpec, kernel: &KernelTable) -> Result<()> {
    if path.dim() != spec.dim() || path.len() != spec.grid_len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "path has {} points in dimension {}, model expects {} in dimension {}",
            path.len(),
            path.dim(),
            spec.grid_len() + 1,
            spec.dim()
        )));
    }
    if kernel.values.len() != spec.grid_len() + 1 || kernel.boundary != spec.boundary() {
        return Err(Error::DimensionMismatch(
            "kernel table was built for a different model".into(),
        ));
    }
    Ok(())
}

/// Kinetic part `(Ñ/2) Σ |x_j − x_{j−1}|²`.
pub fn kinetic_energy(path: &Path, spec: &ModelSpec) -> f64 {
    let n = spec.grid_len();
    let s: f64 = (1..=n).map(|j| path.sq_increment(j, j - 1)).sum();
    0.5 * spec.n_per_unit() as f64 * s
}

/// Interaction part `(α/Ñ²) Σ_{i<j} w(j−i) f(x_i − x_j)`.
pub fn interaction_energy(path: &Path, spec: &ModelSpec, kernel: &KernelTable) -> f64 {
    let last = match spec.boundary() {
        Boundary::Pinned => spec.grid_len(),
        Boundary::Periodic => spec.grid_len() - 1,
    };
    let mut total = 0.0;
    for i in 0..last {
        let xi = path.point(i);
        let mut row = 0.0;
        for j in i + 1..=last {
            row += kernel.pair_weight(j - i) * spec.pair_potential(xi, path.point(j));
        }
        total += row;
    }
    let nt = spec.n_per_unit() as f64;
    spec.alpha() * total / (nt * nt)
}

/// Discretised energy `E(x)`; the Gibbs weight is `exp(−E)`.
pub fn energy(path: &Path, spec: &ModelSpec, kernel: &KernelTable) -> Result<f64> {
    check_path(path, spec, kernel)?;
    let kin = kinetic_energy(path, spec);
    let int = if spec.alpha() == 0.0 {
        0.0
    } else {
        interaction_energy(path, spec, kernel)
    };
    let e = kin + int;
    if !e.is_finite() {
        return Err(Error::NonFinite(format!(
            "energy (kinetic {kin}, interaction {int})"
        )));
    }
    Ok(e)
}

/// `E(path with points[site] := proposal) − E(path)` in `O(N·d)`.
///
/// Pinned sites are `1..=N`; periodic sites are `0..=N` with `N` aliasing `0`.
pub fn energy_delta(
    path: &Path,
    site: usize,
    proposal: &[f64],
    spec: &ModelSpec,
    kernel: &KernelTable,
) -> Result<f64> {
    check_path(path, spec, kernel)?;
    let n = spec.grid_len();
    let site = match spec.boundary() {
        Boundary::Pinned if site == 0 || site > n => {
            return Err(Error::IndexOutOfRange {
                what: "site",
                index: site,
                lo: 1,
                hi: n,
            })
        }
        Boundary::Periodic if site > n => {
            return Err(Error::IndexOutOfRange {
                what: "site",
                index: site,
                lo: 0,
                hi: n,
            })
        }
        Boundary::Periodic if site == n => 0,
        _ => site,
    };
    if proposal.len() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "proposal has dimension {}, model has {}",
            proposal.len(),
            spec.dim()
        )));
    }
    let old = path.point(site);
    let nt = spec.n_per_unit() as f64;

    let neighbours: [Option<usize>; 2] = match spec.boundary() {
        Boundary::Pinned => [Some(site - 1), (site < n).then_some(site + 1)],
        Boundary::Periodic => [Some((site + n - 1) % n), Some((site + 1) % n)],
    };
    let mut kin = 0.0;
    for nb in neighbours.into_iter().flatten() {
        let p = path.point(nb);
        kin += sq_dist(proposal, p) - sq_dist(old, p);
    }
    kin *= 0.5 * nt;

    let mut int = 0.0;
    if spec.alpha() != 0.0 {
        let last = match spec.boundary() {
            Boundary::Pinned => n,
            Boundary::Periodic => n - 1,
        };
        if spec.dim() == 1 {
            let (p0, o0) = (proposal[0], old[0]);
            for (i, &x) in path.coords()[..=last].iter().enumerate() {
                if i == site {
                    continue;
                }
                let (a, b) = (p0 - x, o0 - x);
                int += kernel.pair[i.abs_diff(site)]
                    * (spec.potential_sq(a * a) - spec.potential_sq(b * b));
            }
        } else {
            for i in 0..=last {
                if i == site {
                    continue;
                }
                let p = path.point(i);
                let w = kernel.pair_weight(i.abs_diff(site));
                int += w * (spec.pair_potential(proposal, p) - spec.pair_potential(old, p));
            }
        }
        int *= spec.alpha() / (nt * nt);
    }
    let delta = kin + int;
    if !delta.is_finite() {
        return Err(Error::NonFinite(format!("energy delta at site {site}")));
    }
    Ok(delta)
}

/// Energy change from adding `shift` to the whole tail block starting at
/// `start` (pinned: `start..=N`, periodic: `start..N`, `1 ≤ start`).
pub fn shift_delta(
    path: &Path,
    start: usize,
    shift: &[f64],
    spec: &ModelSpec,
    kernel: &KernelTable,
) -> Result<f64> {
    check_path(path, spec, kernel)?;
    let n = spec.grid_len();
    let end = match spec.boundary() {
        Boundary::Pinned => n + 1,
        Boundary::Periodic => n,
    };
    if start == 0 || start >= end {
        return Err(Error::IndexOutOfRange {
            what: "shift start",
            index: start,
            lo: 1,
            hi: end - 1,
        });
    }
    let d = spec.dim();
    let nt = spec.n_per_unit() as f64;
    let mut moved = vec![0.0; d];
    let shifted = |i: usize, buf: &mut [f64]| {
        for ((b, x), s) in buf.iter_mut().zip(path.point(i)).zip(shift) {
            *b = x + s;
        }
    };

    // Links crossing the block boundary.
    let mut kin = 0.0;
    shifted(start, &mut moved);
    kin += sq_dist(&moved, path.point(start - 1)) - path.sq_increment(start, start - 1);
    if spec.boundary() == Boundary::Periodic {
        shifted(n - 1, &mut moved);
        kin += sq_dist(&moved, path.point(0)) - path.sq_increment(n - 1, 0);
    }
    kin *= 0.5 * nt;

    let mut int = 0.0;
    if spec.alpha() != 0.0 {
        if d == 1 {
            let xs = path.coords();
            for j in start..end {
                let (xj, mj) = (xs[j], xs[j] + shift[0]);
                let mut row = 0.0;
                for (i, &x) in xs[..start].iter().enumerate() {
                    let (a, b) = (mj - x, xj - x);
                    row += kernel.pair[j - i] * (spec.potential_sq(a * a) - spec.potential_sq(b * b));
                }
                int += row;
            }
        }
        for j in (if d == 1 { end } else { start })..end {
            shifted(j, &mut moved);
            let old = path.point(j);
            let mut row = 0.0;
            for i in 0..start {
                let p = path.point(i);
                row += kernel.pair_weight(j - i)
                    * (spec.pair_potential(&moved, p) - spec.pair_potential(old, p));
            }
            int += row;
        }
        int *= spec.alpha() / (nt * nt);
    }
    let delta = kin + int;
    if !delta.is_finite() {
        return Err(Error::NonFinite(format!("tail shift delta at {start}")));
    }
    Ok(delta)
}

/// Scaling regime of the `(γ, ξ)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeLabel {
    VarianceCollapse,
    BoundedVariance,
    LogOrSubdiffusive,
    Subdiffusive,
    Diffusive,
}

impl RegimeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegimeLabel::VarianceCollapse => "VarianceCollapse",
            RegimeLabel::BoundedVariance => "BoundedVariance",
            RegimeLabel::LogOrSubdiffusive => "LogOrSubdiffusive",
            RegimeLabel::Subdiffusive => "Subdiffusive",
            RegimeLabel::Diffusive => "Diffusive",
        }
    }
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies `(γ, ξ)` by the edges `γ/2, 1+γ/2, 2, 2+γ/2`. Intervals are
/// left-closed: a point on an edge gets the label of the band to its right.
pub fn regime_classify(gamma: f64, xi: f64) -> Result<RegimeLabel> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::OutOfRange(format!(
            "regime diagram needs gamma in (0, 2), got {gamma}"
        )));
    }
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "regime diagram needs finite xi >= 0, got {xi}"
        )));
    }
    let h = 0.5 * gamma;
    Ok(if xi < h {
        RegimeLabel::VarianceCollapse
    } else if xi < 1.0 + h {
        RegimeLabel::BoundedVariance
    } else if xi < 2.0 {
        RegimeLabel::LogOrSubdiffusive
    } else if xi < 2.0 + h {
        RegimeLabel::Subdiffusive
    } else {
        RegimeLabel::Diffusive
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(t: u32, nt: usize, alpha: f64, gamma: f64, xi: f64, b: Boundary) -> ModelSpec {
        ModelSpec::builder()
            .t(t)
            .n_per_unit(nt)
            .alpha(alpha)
            .gamma(gamma)
            .xi(xi)
            .boundary(b)
            .build()
            .unwrap()
    }

    #[test]
    fn kernel_examples() {
        let s = spec(1, 1, 1.0, 2.0, 2.0, Boundary::Pinned);
        let k = build_kernel(&s);
        assert_eq!(k.values()[0], 1.0);
        assert_eq!(k.values()[1], 0.5);
        let s = spec(1, 2, 1.0, 2.0, 1.0, Boundary::Pinned);
        assert!((build_kernel(&s).values()[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_at_xi_zero_is_half_off_diagonal() {
        let s = spec(3, 2, 1.0, 2.0, 0.0, Boundary::Pinned);
        let k = build_kernel(&s);
        assert_eq!(k.values()[0], 1.0);
        assert!(k.values()[1..].iter().all(|&v| v == 0.5));
    }

    #[test]
    fn kernel_strictly_decreasing_for_positive_xi() {
        for xi in [0.3, 1.0, 2.5] {
            let k = build_kernel(&spec(4, 3, 1.0, 2.0, xi, Boundary::Pinned));
            for w in k.values().windows(2) {
                assert!(w[1] < w[0] && w[1] > 0.0);
            }
        }
    }

    #[test]
    fn two_point_energy() {
        // T = 2 is the smallest horizon; build N = 2 and check the first link alone.
        let s = spec(1, 1, 0.0, 2.0, 1.0, Boundary::Pinned);
        let k = build_kernel(&s);
        let p = Path::from_coords(&s, vec![0.0, 1.0, 1.0]).unwrap();
        assert!((energy(&p, &s, &k).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn worked_three_point_energy() {
        // kinetic (1 + 1)/2 = 1; pairs (0,1),(0,2),(1,2) with g = 1/2: (1 + 4 + 1)/2 = 3.
        let s = spec(1, 1, 1.0, 2.0, 0.0, Boundary::Pinned);
        let k = build_kernel(&s);
        let p = Path::from_coords(&s, vec![0.0, 1.0, 2.0]).unwrap();
        assert!((energy(&p, &s, &k).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn zero_path_has_zero_energy() {
        for b in [Boundary::Pinned, Boundary::Periodic] {
            let s = spec(3, 2, 2.0, 1.3, 0.7, b);
            let k = build_kernel(&s);
            assert_eq!(energy(&Path::zeros(&s), &s, &k).unwrap(), 0.0);
        }
    }

    #[test]
    fn pinned_path_must_start_at_origin() {
        let s = spec(1, 1, 1.0, 2.0, 1.0, Boundary::Pinned);
        assert!(Path::from_coords(&s, vec![1.0, 0.0, 0.0]).is_err());
        assert!(Path::from_coords(&s, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn delta_rejects_pinned_origin_and_overflowing_sites() {
        let s = spec(2, 1, 1.0, 2.0, 1.0, Boundary::Pinned);
        let k = build_kernel(&s);
        let p = Path::zeros(&s);
        assert!(matches!(
            energy_delta(&p, 0, &[1.0], &s, &k),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(energy_delta(&p, 5, &[1.0], &s, &k).is_err());
    }

    #[test]
    fn delta_of_noop_is_zero() {
        let s = spec(3, 2, 1.5, 1.0, 1.2, Boundary::Pinned);
        let k = build_kernel(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = Path::from_fn(&s, |_, x| x[0] = rng.random_range(-2.0..2.0));
        let cur = p.point(5).to_vec();
        assert_eq!(energy_delta(&p, 5, &cur, &s, &k).unwrap(), 0.0);
    }

    #[test]
    fn delta_without_coupling_is_kinetic_only() {
        let s = spec(2, 1, 0.0, 2.0, 1.0, Boundary::Pinned);
        let k = build_kernel(&s);
        let p = Path::from_coords(&s, vec![0.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        // site 2 moves 3 -> 0: links (1,2) and (2,3) change
        let want = 0.5 * ((1.0f64).powi(2) + (2.0f64).powi(2) - (2.0f64).powi(2) - (1.0f64).powi(2));
        assert!((energy_delta(&p, 2, &[0.0], &s, &k).unwrap() - want).abs() < 1e-14);
    }

    fn random_case(rng: &mut ChaCha8Rng) -> (ModelSpec, Path) {
        let b = if rng.random_bool(0.5) {
            Boundary::Pinned
        } else {
            Boundary::Periodic
        };
        let s = ModelSpec::builder()
            .t(rng.random_range(1..5))
            .n_per_unit(rng.random_range(1..4))
            .dim(rng.random_range(1..4))
            .alpha(rng.random_range(0.0..5.0))
            .gamma(rng.random_range(0.2..2.0))
            .xi(rng.random_range(0.0..3.0))
            .boundary(b)
            .build()
            .unwrap();
        let p = Path::from_fn(&s, |_, x| {
            for v in x {
                *v = rng.random_range(-3.0..3.0)
            }
        });
        (s, p)
    }

    #[test]
    fn delta_matches_full_energy_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let (s, p) = random_case(&mut rng);
            let k = build_kernel(&s);
            let sites = s.free_sites();
            let site = rng.random_range(sites.start..sites.end);
            let prop: Vec<f64> = (0..s.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut q = p.clone();
            q.set_site(&s, site, &prop);
            let e0 = energy(&p, &s, &k).unwrap();
            let e1 = energy(&q, &s, &k).unwrap();
            let d = energy_delta(&p, site, &prop, &s, &k).unwrap();
            assert!(
                (d - (e1 - e0)).abs() <= 1e-10 * (1.0 + e0.abs().max(e1.abs())),
                "delta {d} vs {}",
                e1 - e0
            );
        }
    }

    #[test]
    fn shift_delta_matches_full_energy_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..300 {
            let (s, p) = random_case(&mut rng);
            let k = build_kernel(&s);
            let end = match s.boundary() {
                Boundary::Pinned => s.grid_len() + 1,
                Boundary::Periodic => s.grid_len(),
            };
            let start = rng.random_range(1..end);
            let shift: Vec<f64> = (0..s.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut q = p.clone();
            q.shift_tail(&s, start, &shift);
            let e0 = energy(&p, &s, &k).unwrap();
            let e1 = energy(&q, &s, &k).unwrap();
            let d = shift_delta(&p, start, &shift, &s, &k).unwrap();
            assert!((d - (e1 - e0)).abs() <= 1e-10 * (1.0 + e0.abs().max(e1.abs())));
        }
    }

    #[test]
    fn periodic_energy_is_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = spec(3, 2, 1.7, 1.4, 1.1, Boundary::Periodic);
        let k = build_kernel(&s);
        let p = Path::from_fn(&s, |_, x| x[0] = rng.random_range(-3.0..3.0));
        let q = Path::from_fn(&s, |i, x| x[0] = p.point(i)[0] + 2.5);
        let (e0, e1) = (energy(&p, &s, &k).unwrap(), energy(&q, &s, &k).unwrap());
        assert!((e0 - e1).abs() < 1e-10 * e0);
    }

    #[test]
    fn radial_profile_is_validated() {
        let ok = ModelSpec::builder()
            .radial("soft", 1.0, 0.5, |r| r + r * r)
            .build();
        assert!(ok.is_ok());
        let bad = ModelSpec::builder()
            .radial("bump", 1.0, 1.0, |r| r * (-r).exp())
            .build();
        assert!(bad.is_err());
        let offset = ModelSpec::builder().radial("off", 1.0, 1.0, |r| 1.0 + r).build();
        assert!(offset.is_err());
    }

    #[test]
    fn regime_examples() {
        assert_eq!(regime_classify(1.0, 0.3).unwrap(), RegimeLabel::VarianceCollapse);
        assert_eq!(regime_classify(1.0, 1.0).unwrap(), RegimeLabel::BoundedVariance);
        assert_eq!(regime_classify(1.5, 3.2).unwrap(), RegimeLabel::Diffusive);
        assert!(regime_classify(2.0, 1.0).is_err());
        assert!(regime_classify(0.0, 1.0).is_err());
    }

    #[test]
    fn regime_edges_are_left_closed() {
        let g = 1.0;
        assert_eq!(regime_classify(g, 0.5).unwrap(), RegimeLabel::BoundedVariance);
        assert_eq!(regime_classify(g, 1.5).unwrap(), RegimeLabel::LogOrSubdiffusive);
        assert_eq!(regime_classify(g, 2.0).unwrap(), RegimeLabel::Subdiffusive);
        assert_eq!(regime_classify(g, 2.5).unwrap(), RegimeLabel::Diffusive);
    }

    mod props {
        use super::*;
        use rand::Rng;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn energy_is_nonnegative(
                seed in any::<u64>(),
                gamma in 0.1f64..=2.0,
                xi in 0.0f64..4.0,
                alpha in 0.0f64..10.0,
                periodic in any::<bool>(),
            ) {
                let b = if periodic { Boundary::Periodic } else { Boundary::Pinned };
                let s = spec(3, 2, alpha, gamma, xi, b);
                let k = build_kernel(&s);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = Path::from_fn(&s, |_, x| x[0] = rng.random_range(-10.0..10.0));
                prop_assert!(energy(&p, &s, &k).unwrap() >= 0.0);
            }

            #[test]
            fn regime_labels_change_only_across_edges(gamma in 0.01f64..1.99, xi in 0.0f64..4.0) {
                let label = regime_classify(gamma, xi).unwrap();
                let edges = [0.5 * gamma, 1.0 + 0.5 * gamma, 2.0, 2.0 + 0.5 * gamma];
                let eps = 1e-9;
                if edges.iter().all(|e| (xi - e).abs() > 2.0 * eps) {
                    prop_assert_eq!(regime_classify(gamma, xi + eps).unwrap(), label);
                    if xi > eps {
                        prop_assert_eq!(regime_classify(gamma, xi - eps).unwrap(), label);
                    }
                }
            }
        }
    }
}
