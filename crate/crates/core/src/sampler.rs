//! Metropolis sampling of the discretised path measure `exp(−E)`.
//!
//! Each sweep proposes a Gaussian move at every free site in order. Every
//! `block_move_period` sweeps a tail-shift pass follows: for each cut point
//! `k` (a multiple of `shift_stride`) all sites from `k` to the end are moved
//! by one common Gaussian vector. Both proposals are symmetric, so the
//! Metropolis rule `min(1, exp(−ΔE))` is exact. Proposal scales adapt during
//! burn-in towards 0.44 acceptance and are frozen afterwards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{select_blocks, BlockSelection, DyadicBlock};
use crate::hierarchy::dyadic_stats;
use crate::model::{self, Boundary, KernelTable, ModelSpec, Path};

const TARGET_ACCEPTANCE: f64 = 0.44;
const TUNE_WINDOW: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub proposal_scale: f64,
    /// A tail-shift pass every this many sweeps; 0 disables it.
    pub block_move_period: usize,
    /// Cut points of the tail-shift pass are multiples of this (0 means `Ñ`).
    pub shift_stride: usize,
    pub chains: usize,
    pub seed: u64,
    /// Coupling multipliers `λ`; replica `r` targets `α·λ_r`. Must contain 1.
    pub tempering_ladder: Option<Vec<f64>>,
    /// Adapt proposal scales during burn-in.
    pub tune: bool,
    pub batches: usize,
    /// Recompute the energy from scratch every this many sweeps.
    pub resync_period: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            sweeps: 20_000,
            burn_in: 2_000,
            proposal_scale: 0.5,
            block_move_period: 1,
            shift_stride: 0,
            chains: 4,
            seed: 0,
            tempering_ladder: None,
            tune: true,
            batches: 32,
            resync_period: 1_000,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sweeps <= self.burn_in {
            return Err(Error::invalid("sweeps", "must exceed burn_in"));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return Err(Error::invalid("proposal_scale", "must be positive and finite"));
        }
        if self.chains == 0 {
            return Err(Error::invalid("chains", "at least one chain is required"));
        }
        if self.batches < 2 {
            return Err(Error::invalid("batches", "at least two batches are required"));
        }
        if self.resync_period == 0 {
            return Err(Error::invalid("resync_period", "must be positive"));
        }
        if let Some(ladder) = &self.tempering_ladder {
            if ladder.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                return Err(Error::invalid("tempering_ladder", "entries must be finite and >= 0"));
            }
            if !ladder.contains(&1.0) {
                return Err(Error::invalid("tempering_ladder", "must contain the target coupling 1"));
            }
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.sweeps - self.burn_in
    }
}

/// A density `exp(−E)` on paths, accessed through energies and local deltas.
pub trait Target: Send + Sync + Sized {
    fn spec(&self) -> &ModelSpec;
    fn energy(&self, path: &Path) -> Result<f64>;
    fn site_delta(&self, path: &Path, site: usize, proposal: &[f64]) -> Result<f64>;
    fn shift_delta(&self, path: &Path, start: usize, shift: &[f64]) -> Result<f64>;
    /// The same target with coupling `α·factor`.
    fn rescaled(&self, factor: f64) -> Result<Self>;
}

/// The Gibbs measure of a [`ModelSpec`].
#[derive(Debug, Clone)]
pub struct GibbsTarget {
    spec: ModelSpec,
    kernel: KernelTable,
}

impl GibbsTarget {
    pub fn new(spec: &ModelSpec) -> Self {
        GibbsTarget {
            kernel: model::build_kernel(spec),
            spec: spec.clone(),
        }
    }
}

impl Target for GibbsTarget {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }
    fn energy(&self, path: &Path) -> Result<f64> {
        model::energy(path, &self.spec, &self.kernel)
    }
    fn site_delta(&self, path: &Path, site: usize, proposal: &[f64]) -> Result<f64> {
        model::energy_delta(path, site, proposal, &self.spec, &self.kernel)
    }
    fn shift_delta(&self, path: &Path, start: usize, shift: &[f64]) -> Result<f64> {
        model::shift_delta(path, start, shift, &self.spec, &self.kernel)
    }
    fn rescaled(&self, factor: f64) -> Result<Self> {
        Ok(GibbsTarget::new(&self.spec.with_alpha(self.spec.alpha() * factor)?))
    }
}

/// Negates the interaction part of the energy. Used as a negative control:
/// a sampler driven by it must fail oracle comparisons.
#[derive(Debug, Clone)]
pub struct SignFlipped<T>(pub T);

impl<T: Target> SignFlipped<T> {
    fn kinetic_site(&self, path: &Path, site: usize, proposal: &[f64]) -> Result<f64> {
        let free = self.0.spec().with_alpha(0.0)?;
        model::energy_delta(path, site, proposal, &free, &model::build_kernel(&free))
    }
}

impl<T: Target> Target for SignFlipped<T> {
    fn spec(&self) -> &ModelSpec {
        self.0.spec()
    }
    fn energy(&self, path: &Path) -> Result<f64> {
        let kin = model::kinetic_energy(path, self.spec());
        Ok(2.0 * kin - self.0.energy(path)?)
    }
    fn site_delta(&self, path: &Path, site: usize, proposal: &[f64]) -> Result<f64> {
        let kin = self.kinetic_site(path, site, proposal)?;
        Ok(2.0 * kin - self.0.site_delta(path, site, proposal)?)
    }
    fn shift_delta(&self, path: &Path, start: usize, shift: &[f64]) -> Result<f64> {
        let free = self.spec().with_alpha(0.0)?;
        let kin = model::shift_delta(path, start, shift, &free, &model::build_kernel(&free))?;
        Ok(2.0 * kin - self.0.shift_delta(path, start, shift)?)
    }
    fn rescaled(&self, factor: f64) -> Result<Self> {
        Ok(SignFlipped(self.0.rescaled(factor)?))
    }
}

/// Per-sweep scalar observables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    /// Pinned: `|x_T|²`. Periodic: `|x_T − x_{T/2}|²`.
    Msd,
    /// `|x_n − x_m|²` in grid indices.
    SqIncrement { m: usize, n: usize },
    /// `|s̄|²` of a dyadic block.
    SbarSq { level: u32, start: usize },
    /// `R_j`, the largest oscillation over aligned blocks of length `2^j`.
    BlockFluct { level: u32 },
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::Msd => "msd".into(),
            Observable::SqIncrement { m, n } => format!("sqinc[{m},{n}]"),
            Observable::SbarSq { level, start } => format!("sbar2[l={level},u={start}]"),
            Observable::BlockFluct { level } => format!("R[{level}]"),
        }
    }

    fn needs_stats(&self) -> bool {
        matches!(self, Observable::SbarSq { .. } | Observable::BlockFluct { .. })
    }

    fn check(&self, spec: &ModelSpec) -> Result<()> {
        let n = spec.grid_len();
        match *self {
            Observable::Msd => Ok(()),
            Observable::SqIncrement { m, n: k } => {
                if m > n || k > n {
                    Err(Error::IndexOutOfRange {
                        what: "increment index",
                        index: m.max(k),
                        lo: 0,
                        hi: n,
                    })
                } else {
                    Ok(())
                }
            }
            Observable::SbarSq { level, start } => {
                let len = 1usize << level.min(63);
                if level == 0 || level > spec.t() || start % len != 0 || start + len > spec.horizon() {
                    Err(Error::OutOfRange(format!("no aligned block of level {level} at {start}")))
                } else {
                    Ok(())
                }
            }
            Observable::BlockFluct { level } => {
                if level > spec.t() {
                    Err(Error::OutOfRange(format!("fluctuation level {level} exceeds t")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// `Msd`, `|s̄|²` along the endpoint chain, and `R_j` for `j = 0..=t` when
/// `d = 1` (the oscillation costs `O(N²)` per level otherwise).
pub fn default_observables(spec: &ModelSpec) -> Vec<Observable> {
    let mut v = vec![Observable::Msd];
    if spec.boundary() == Boundary::Pinned {
        let blocks = select_blocks(spec.t(), BlockSelection::EndpointChain).expect("valid t");
        v.extend(blocks.into_iter().map(|DyadicBlock { level, start }| Observable::SbarSq { level, start }));
    }
    if spec.dim() == 1 {
        v.extend((0..=spec.t()).map(|level| Observable::BlockFluct { level }));
    }
    v
}

fn measure(obs: &[Observable], path: &Path, spec: &ModelSpec, out: &mut [Vec<f64>]) -> Result<()> {
    let stats = if obs.iter().any(Observable::needs_stats) {
        Some(dyadic_stats(path, spec)?)
    } else {
        None
    };
    let n = spec.grid_len();
    for (o, series) in obs.iter().zip(out.iter_mut()) {
        let v = match *o {
            Observable::Msd => match spec.boundary() {
                Boundary::Pinned => path.sq_increment(0, n),
                Boundary::Periodic => path.sq_increment(n / 2, n),
            },
            Observable::SqIncrement { m, n } => path.sq_increment(m, n),
            Observable::SbarSq { level, start } => {
                let s = stats.as_ref().expect("stats").sbar(level, start)?;
                s.iter().map(|x| x * x).sum()
            }
            Observable::BlockFluct { level } => stats.as_ref().expect("stats").r(level),
        };
        series.push(v);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SweepStats {
    pub proposed: usize,
    pub accepted: usize,
    /// Sum of accepted energy changes.
    pub energy_change: f64,
}

impl SweepStats {
    fn add(&mut self, other: SweepStats) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
        self.energy_change += other.energy_change;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

fn gaussian_step(rng: &mut ChaCha8Rng, scale: f64, out: &mut [f64]) {
    for v in out {
        *v = scale * rng.sample::<f64, _>(StandardNormal);
    }
}

fn accept(rng: &mut ChaCha8Rng, delta: f64) -> bool {
    delta <= 0.0 || rng.random::<f64>() < (-delta).exp()
}

/// One ordered pass of single-site proposals `x_i → x_i + scale·Z`.
pub fn metropolis_sweep<T: Target>(
    path: &mut Path,
    target: &T,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SweepStats> {
    let spec = target.spec();
    let d = spec.dim();
    let mut step = vec![0.0; d];
    let mut proposal = vec![0.0; d];
    let mut stats = SweepStats::default();
    for site in spec.free_sites() {
        gaussian_step(rng, scale, &mut step);
        for ((p, x), s) in proposal.iter_mut().zip(path.point(site)).zip(&step) {
            *p = x + s;
        }
        let delta = target.site_delta(path, site, &proposal)?;
        stats.proposed += 1;
        if accept(rng, delta) {
            path.set_site(spec, site, &proposal);
            stats.accepted += 1;
            stats.energy_change += delta;
        }
    }
    Ok(stats)
}

/// Tail shifts at every multiple of `stride` (`x_j → x_j + scale·Z` for all
/// `j ≥ k`).
pub fn tail_shift_pass<T: Target>(
    path: &mut Path,
    target: &T,
    scale: f64,
    stride: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SweepStats> {
    let spec = target.spec();
    let end = match spec.boundary() {
        Boundary::Pinned => spec.grid_len() + 1,
        Boundary::Periodic => spec.grid_len(),
    };
    let stride = stride.max(1);
    let mut shift = vec![0.0; spec.dim()];
    let mut stats = SweepStats::default();
    for start in (stride..end).step_by(stride) {
        gaussian_step(rng, scale, &mut shift);
        let delta = target.shift_delta(path, start, &shift)?;
        stats.proposed += 1;
        if accept(rng, delta) {
            path.shift_tail(spec, start, &shift);
            stats.accepted += 1;
            stats.energy_change += delta;
        }
    }
    Ok(stats)
}

/// Acceptance rates by move type, pooled over chains (post burn-in).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MoveRates {
    pub site: f64,
    pub shift: Option<f64>,
    pub swap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcDiagnostics {
    pub acceptance: MoveRates,
    /// Proposal scales after burn-in, per chain (target rung).
    pub site_scale: Vec<f64>,
    pub shift_scale: Vec<f64>,
    pub labels: Vec<String>,
    /// IAT per observable: the largest over chains.
    pub iat: Vec<f64>,
    /// `Σ_chains n / (2τ)` per observable.
    pub effective_per_observable: Vec<f64>,
    /// Smallest entry of `effective_per_observable`.
    pub effective_samples: f64,
    pub retained_samples: usize,
    pub batch_count: usize,
    /// Largest relative gap between tracked and recomputed energy at a resync.
    pub energy_drift: f64,
    pub degenerate: Vec<bool>,
}

/// Recorded series: `series[chain][observable][sweep]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub observables: Vec<Observable>,
    pub series: Vec<Vec<Vec<f64>>>,
    pub diagnostics: McmcDiagnostics,
}

struct Rung<T> {
    target: T,
    path: Path,
    energy: f64,
    site_scale: f64,
    shift_scale: f64,
    window_site: SweepStats,
    window_shift: SweepStats,
}

struct SingleChain {
    series: Vec<Vec<f64>>,
    site: SweepStats,
    shift: SweepStats,
    swap: SweepStats,
    site_scale: f64,
    shift_scale: f64,
    drift: f64,
}

fn tune(scale: &mut f64, window: &mut SweepStats) {
    if window.proposed == 0 {
        return;
    }
    let rate = window.rate();
    *scale *= (1.5 * (rate - TARGET_ACCEPTANCE)).exp();
    *window = SweepStats::default();
}

fn run_single<T: Target>(
    target: &T,
    config: &McmcConfig,
    observables: &[Observable],
    chain: usize,
) -> Result<SingleChain> {
    let spec = target.spec().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(chain as u64);
    let ladder = config.tempering_ladder.clone().unwrap_or_else(|| vec![1.0]);
    let mut rungs = Vec::with_capacity(ladder.len());
    for &lam in &ladder {
        let t = if lam == 1.0 { target.rescaled(1.0)? } else { target.rescaled(lam)? };
        let path = Path::zeros(&spec);
        let energy = t.energy(&path)?;
        rungs.push(Rung {
            target: t,
            path,
            energy,
            site_scale: config.proposal_scale,
            shift_scale: config.proposal_scale,
            window_site: SweepStats::default(),
            window_shift: SweepStats::default(),
        });
    }
    let home = ladder.iter().position(|&l| l == 1.0).expect("validated ladder");
    let stride = if config.shift_stride == 0 { spec.n_per_unit() } else { config.shift_stride };

    let mut out = SingleChain {
        series: vec![Vec::with_capacity(config.retained()); observables.len()],
        site: SweepStats::default(),
        shift: SweepStats::default(),
        swap: SweepStats::default(),
        site_scale: 0.0,
        shift_scale: 0.0,
        drift: 0.0,
    };

    for sweep in 0..config.sweeps {
        let burning = sweep < config.burn_in;
        let shift_now = config.block_move_period > 0 && (sweep + 1) % config.block_move_period == 0;
        for (r, rung) in rungs.iter_mut().enumerate() {
            let s = metropolis_sweep(&mut rung.path, &rung.target, rung.site_scale, &mut rng)?;
            rung.energy += s.energy_change;
            rung.window_site.add(s);
            if !burning && r == home {
                out.site.add(s);
            }
            if shift_now {
                let s = tail_shift_pass(&mut rung.path, &rung.target, rung.shift_scale, stride, &mut rng)?;
                rung.energy += s.energy_change;
                rung.window_shift.add(s);
                if !burning && r == home {
                    out.shift.add(s);
                }
            }
            if burning && config.tune && (sweep + 1) % TUNE_WINDOW == 0 {
                tune(&mut rung.site_scale, &mut rung.window_site);
                tune(&mut rung.shift_scale, &mut rung.window_shift);
            }
        }

        if rungs.len() > 1 {
            let s = swap_pass(&mut rungs, sweep % 2, &mut rng)?;
            if !burning {
                out.swap.add(s);
            }
        }

        if (sweep + 1) % config.resync_period == 0 {
            for rung in rungs.iter_mut() {
                let fresh = rung.target.energy(&rung.path)?;
                let rel = (rung.energy - fresh).abs() / fresh.abs().max(1.0);
                out.drift = out.drift.max(rel);
                rung.energy = fresh;
            }
        }

        if !burning {
            measure(observables, &rungs[home].path, &spec, &mut out.series)?;
        }
    }
    out.site_scale = rungs[home].site_scale;
    out.shift_scale = rungs[home].shift_scale;
    Ok(out)
}

/// Replica exchange between neighbouring rungs `(i, i+1)` with `i ≡ parity`.
fn swap_pass<T: Target>(rungs: &mut [Rung<T>], parity: usize, rng: &mut ChaCha8Rng) -> Result<SweepStats> {
    let mut stats = SweepStats::default();
    let mut i = parity;
    while i + 1 < rungs.len() {
        let (lo, hi) = rungs.split_at_mut(i + 1);
        let (a, b) = (&mut lo[i], &mut hi[0]);
        let ea_b = a.target.energy(&b.path)?;
        let eb_a = b.target.energy(&a.path)?;
        let delta = ea_b + eb_a - a.energy - b.energy;
        stats.proposed += 1;
        if accept(rng, delta) {
            std::mem::swap(&mut a.path, &mut b.path);
            a.energy = ea_b;
            b.energy = eb_a;
            stats.accepted += 1;
        }
        i += 2;
    }
    Ok(stats)
}

/// Runs `config.chains` independent chains in parallel and records the
/// default observables.
pub fn run_chain(spec: &ModelSpec, config: &McmcConfig) -> Result<ChainRun> {
    run_chains(&GibbsTarget::new(spec), config, &default_observables(spec))
}

/// Runs independent chains against any target, recording `observables`.
pub fn run_chains<T: Target>(target: &T, config: &McmcConfig, observables: &[Observable]) -> Result<ChainRun> {
    config.validate()?;
    for o in observables {
        o.check(target.spec())?;
    }
    let runs: Vec<SingleChain> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_single(target, config, observables, c))
        .collect::<Result<_>>()?;

    let retained = config.retained();
    let mut iat = vec![0.5f64; observables.len()];
    let mut eff = vec![0.0; observables.len()];
    let mut degenerate = vec![false; observables.len()];
    for run in &runs {
        for (k, s) in run.series.iter().enumerate() {
            let est = iat_estimate(s)?;
            iat[k] = iat[k].max(est.tau);
            eff[k] += s.len() as f64 / (2.0 * est.tau);
            degenerate[k] |= est.degenerate;
        }
    }
    let mut site = SweepStats::default();
    let mut shift = SweepStats::default();
    let mut swap = SweepStats::default();
    for r in &runs {
        site.add(r.site);
        shift.add(r.shift);
        swap.add(r.swap);
    }
    let batch_len = batch_length(retained, config.batches, iat.iter().copied().fold(0.5, f64::max));
    let diagnostics = McmcDiagnostics {
        acceptance: MoveRates {
            site: site.rate(),
            shift: (shift.proposed > 0).then(|| shift.rate()),
            swap: (swap.proposed > 0).then(|| swap.rate()),
        },
        site_scale: runs.iter().map(|r| r.site_scale).collect(),
        shift_scale: runs.iter().map(|r| r.shift_scale).collect(),
        labels: observables.iter().map(Observable::label).collect(),
        effective_samples: eff.iter().copied().fold(f64::INFINITY, f64::min).min((retained * config.chains) as f64),
        effective_per_observable: eff,
        iat,
        retained_samples: retained * config.chains,
        batch_count: (retained / batch_len) * config.chains,
        energy_drift: runs.iter().map(|r| r.drift).fold(0.0, f64::max),
        degenerate,
    };
    Ok(ChainRun {
        observables: observables.to_vec(),
        series: runs.into_iter().map(|r| r.series).collect(),
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub mean: f64,
    /// The larger of the batch-means and the IAT-based standard errors.
    pub std_error: f64,
    pub batch_std_error: f64,
    pub iat_std_error: f64,
    pub n_effective: f64,
    pub iat: f64,
    pub batches: usize,
}

/// Windowed integrated autocorrelation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IatEstimate {
    pub tau: f64,
    pub window: usize,
    /// Set for series with zero variance, where `tau` is defined as 0.5.
    pub degenerate: bool,
}

pub const MIN_IAT_LEN: usize = 100;

/// `τ = ½ + Σ_{k=1}^{W} ρ(k)` with the smallest window `W ≥ 5τ(W)`.
pub fn iat_estimate(series: &[f64]) -> Result<IatEstimate> {
    let n = series.len();
    if n < MIN_IAT_LEN {
        return Err(Error::SeriesTooShort { len: n, min: MIN_IAT_LEN });
    }
    let acf = autocovariance(series);
    if !(acf[0] > 0.0) || acf[0] <= 1e-28 * series.iter().map(|x| x * x).sum::<f64>() / n as f64 {
        return Ok(IatEstimate { tau: 0.5, window: 0, degenerate: true });
    }
    let mut tau = 0.5;
    let mut window = n - 1;
    for (w, c) in acf.iter().enumerate().skip(1).take(n - 1) {
        tau += c / acf[0];
        if w as f64 >= 5.0 * tau {
            window = w;
            break;
        }
    }
    Ok(IatEstimate {
        tau: tau.max(0.5),
        window,
        degenerate: false,
    })
}

pub fn integrated_autocorrelation(series: &[f64]) -> Result<f64> {
    Ok(iat_estimate(series)?.tau)
}

/// Biased autocovariance `c(k) = (1/n) Σ (x_i − x̄)(x_{i+k} − x̄)` by FFT.
fn autocovariance(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf.iter().take(n).map(|c| c.re / (len as f64 * n as f64)).collect()
}

/// `max(n / batches, ⌈5τ⌉)`.
pub fn batch_length(n: usize, batches: usize, tau: f64) -> usize {
    (n / batches.max(1)).max((5.0 * tau).ceil() as usize).max(1)
}

/// Batch-means estimate pooled over chains: each chain is cut into batches
/// of `batch_len` (a trailing remainder is dropped) and all batch means are
/// treated as one sample.
pub fn batch_means(chains: &[&[f64]], batch_len: usize) -> Result<(f64, f64, usize)> {
    if batch_len == 0 {
        return Err(Error::invalid("batch_len", "must be positive"));
    }
    let means: Vec<f64> = chains
        .iter()
        .flat_map(|s| s.chunks_exact(batch_len).map(|b| b.iter().sum::<f64>() / batch_len as f64))
        .collect();
    let b = means.len();
    if b < 2 {
        return Err(Error::InsufficientBatches { got: b, min: 2 });
    }
    let mean = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (b - 1) as f64;
    Ok((mean, (var / b as f64).sqrt(), b))
}

pub const MIN_BATCHES: usize = 16;

/// Estimate of one observable from per-chain series.
pub fn estimate_series(chains: &[&[f64]], batches: usize) -> Result<EstimateWithError> {
    if chains.is_empty() {
        return Err(Error::SeriesTooShort { len: 0, min: MIN_IAT_LEN });
    }
    let n = chains.iter().map(|s| s.len()).min().unwrap_or(0);
    let mut tau = 0.5f64;
    let mut n_eff = 0.0;
    let mut pooled_var = 0.0;
    let mut total = 0usize;
    for s in chains {
        let est = iat_estimate(s)?;
        tau = tau.max(est.tau);
        n_eff += s.len() as f64 / (2.0 * est.tau);
        let m = s.iter().sum::<f64>() / s.len() as f64;
        pooled_var += s.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
        total += s.len();
    }
    let batch_len = batch_length(n, batches, tau);
    let (mean, batch_se, count) = batch_means(chains, batch_len)?;
    if count < MIN_BATCHES {
        return Err(Error::InsufficientBatches { got: count, min: MIN_BATCHES });
    }
    let var = pooled_var / (total.max(2) - 1) as f64;
    let iat_se = (var / n_eff).sqrt();
    Ok(EstimateWithError {
        mean,
        std_error: batch_se.max(iat_se),
        batch_std_error: batch_se,
        iat_std_error: iat_se,
        n_effective: n_eff.min(total as f64),
        iat: tau,
        batches: count,
    })
}

/// Estimates for every recorded observable.
pub fn estimates(run: &ChainRun, batches: usize) -> Result<Vec<EstimateWithError>> {
    (0..run.observables.len())
        .map(|k| {
            let chains: Vec<&[f64]> = run.series.iter().map(|c| c[k].as_slice()).collect();
            estimate_series(&chains, batches)
        })
        .collect()
}

/// Batch-means estimate of the mean square displacement.
pub fn estimate_msd(spec: &ModelSpec, config: &McmcConfig) -> Result<EstimateWithError> {
    let run = run_chains(&GibbsTarget::new(spec), config, &[Observable::Msd])?;
    Ok(estimates(&run, config.batches)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(sweeps: usize, chains: usize) -> McmcConfig {
        McmcConfig {
            sweeps,
            burn_in: sweeps / 10,
            chains,
            seed: 7,
            ..Default::default()
        }
    }

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = phi * x + rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn iat_white_noise_and_ar1() {
        let w = ar1(0.0, 100_000, 1);
        let t = integrated_autocorrelation(&w).unwrap();
        assert!((0.4..=0.7).contains(&t), "{t}");
        let a = ar1(0.9, 200_000, 2);
        let t = integrated_autocorrelation(&a).unwrap();
        assert!((t / 9.5 - 1.0).abs() < 0.2, "{t}");
    }

    #[test]
    fn iat_constant_and_short() {
        let e = iat_estimate(&[3.0; 500]).unwrap();
        assert!(e.degenerate && e.tau == 0.5);
        assert!(matches!(
            integrated_autocorrelation(&[1.0; 50]),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn autocovariance_matches_direct_sum() {
        let x = ar1(0.5, 300, 3);
        let c = autocovariance(&x);
        let m = x.iter().sum::<f64>() / 300.0;
        for k in [0, 1, 7, 100] {
            let want: f64 = (0..300 - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>() / 300.0;
            assert!((c[k] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_chain_shrinks_se() {
        let x = ar1(0.0, 3200, 4);
        let (m1, se1, b1) = batch_means(&[&x], 100).unwrap();
        let (m2, se2, b2) = batch_means(&[&x, &x], 100).unwrap();
        assert_eq!(b2, 2 * b1);
        assert!((m1 - m2).abs() < 1e-14);
        let b = b1 as f64;
        assert!((se2 / se1 - ((b - 1.0) / (2.0 * b - 1.0)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn too_few_batches_rejected() {
        let x = ar1(0.99, 400, 5);
        assert!(matches!(
            estimate_series(&[&x], 32),
            Err(Error::InsufficientBatches { .. })
        ));
    }

    #[test]
    fn vanishing_scale_accepts_everything() {
        let spec = ModelSpec::builder().t(3).n_per_unit(2).alpha(1.0).gamma(1.0).build().unwrap();
        let target = GibbsTarget::new(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut path = Path::zeros(&spec);
        for _ in 0..20 {
            metropolis_sweep(&mut path, &target, 0.5, &mut rng).unwrap();
        }
        let s = metropolis_sweep(&mut path, &target, 1e-9, &mut rng).unwrap();
        assert_eq!(s.accepted, s.proposed);
    }

    #[test]
    fn pinned_site_never_moves() {
        let spec = ModelSpec::builder().t(2).n_per_unit(2).build().unwrap();
        let target = GibbsTarget::new(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut path = Path::zeros(&spec);
        for _ in 0..50 {
            metropolis_sweep(&mut path, &target, 1.0, &mut rng).unwrap();
            tail_shift_pass(&mut path, &target, 1.0, 1, &mut rng).unwrap();
            assert_eq!(path.point(0), &[0.0]);
        }
    }

    #[test]
    fn periodic_alias_stays_in_sync() {
        let spec = ModelSpec::builder().t(2).n_per_unit(2).boundary(Boundary::Periodic).build().unwrap();
        let target = GibbsTarget::new(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut path = Path::zeros(&spec);
        for _ in 0..50 {
            metropolis_sweep(&mut path, &target, 1.0, &mut rng).unwrap();
            tail_shift_pass(&mut path, &target, 1.0, 2, &mut rng).unwrap();
            assert_eq!(path.point(0), path.point(spec.grid_len()));
        }
    }

    #[test]
    fn same_seed_same_series_and_distinct_streams() {
        let spec = ModelSpec::builder().t(3).n_per_unit(2).gamma(1.0).build().unwrap();
        let cfg = quick(400, 4);
        let a = run_chain(&spec, &cfg).unwrap();
        let b = run_chain(&spec, &cfg).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.series.len(), 4);
        assert_ne!(a.series[0][0], a.series[1][0]);
        assert_eq!(a.series[0][0].len(), cfg.retained());
    }

    #[test]
    fn energy_tracking_stays_close() {
        let spec = ModelSpec::builder().t(3).n_per_unit(2).gamma(1.2).xi(1.5).build().unwrap();
        let cfg = McmcConfig { resync_period: 100, ..quick(2000, 1) };
        let run = run_chain(&spec, &cfg).unwrap();
        assert!(run.diagnostics.energy_drift < 1e-10, "{}", run.diagnostics.energy_drift);
    }

    #[test]
    fn config_validation() {
        assert!(McmcConfig { sweeps: 10, burn_in: 10, ..Default::default() }.validate().is_err());
        assert!(McmcConfig { proposal_scale: 0.0, ..Default::default() }.validate().is_err());
        let bad = McmcConfig { tempering_ladder: Some(vec![0.5, 0.8]), ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sign_flip_negates_interaction() {
        let spec = ModelSpec::builder().t(2).n_per_unit(2).alpha(2.0).build().unwrap();
        let g = GibbsTarget::new(&spec);
        let f = SignFlipped(g.clone());
        let path = Path::from_fn(&spec, |i, x| x[0] = (i as f64).sin());
        let kin = model::kinetic_energy(&path, &spec);
        let e = g.energy(&path).unwrap();
        assert!((f.energy(&path).unwrap() - (kin - (e - kin))).abs() < 1e-12);
        let d = g.site_delta(&path, 3, &[0.7]).unwrap();
        let fd = f.site_delta(&path, 3, &[0.7]).unwrap();
        let mut moved = path.clone();
        moved.set_site(&spec, 3, &[0.7]);
        assert!((fd - (f.energy(&moved).unwrap() - f.energy(&path).unwrap())).abs() < 1e-12);
        assert!((d - (g.energy(&moved).unwrap() - e)).abs() < 1e-12);
    }
}
