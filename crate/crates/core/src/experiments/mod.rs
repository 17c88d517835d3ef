//! Studies built from the solvers and the sampler, and their persistence:
//! scaling fits, MCMC-versus-exact cross-validation, covariance domination,
//! the regime grid, CSV/JSON writers and run manifests.

pub mod verify;

pub use verify::{verify_suite, CheckResult, VerifyReport};

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gaussian::{
    assemble_precision, circulant_coefficients, covariance_of_functionals,
    dft_increment_variance, domination_a_seq, hier_precision, loewner_margin, BlockSelection,
    Functional,
};
use crate::model::{regime_classify, Boundary, ModelSpec, Potential, RegimeLabel};
use crate::sampler::{
    estimates, run_chains, EstimateWithError, GibbsTarget, McmcConfig, Observable, Target,
};

/// Shift of the nonzero periodic modes in exact solves; the zero mode is
/// dropped from the spectral sum, so none is needed.
pub const PERIODIC_EPSILON: f64 = 0.0;

/// `format!("{:.16e}")`: 17 significant digits, round-trips every `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// A JSON number written with 17 significant digits (`null` if not finite).
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(fmt_f64(x).parse().expect("formatted float parses"))
    } else {
        Value::Null
    }
}

/// Exact `E|x_n − x_m|²` (all coordinates) for a quadratic spec.
pub fn exact_sq_increment(spec: &ModelSpec, m: usize, n: usize) -> Result<f64> {
    spec.require_quadratic()?;
    let len = spec.grid_len();
    let per_coord = match spec.boundary() {
        Boundary::Periodic => {
            let op = circulant_coefficients(spec, PERIODIC_EPSILON)?;
            dft_increment_variance(&op, m % len, n % len)?
        }
        Boundary::Pinned => {
            if m > len || n > len {
                return Err(Error::IndexOutOfRange {
                    what: "grid index",
                    index: m.max(n),
                    lo: 0,
                    hi: len,
                });
            }
            let prec = assemble_precision(spec)?;
            let f = Functional::increment(len, m, n);
            covariance_of_functionals(&prec, &[f])?.matrix[(0, 0)]
        }
    };
    Ok(spec.dim() as f64 * per_coord)
}

/// Grid indices of the mean square displacement: `(0, N)` pinned and
/// `(N/2, N)` periodic.
pub fn msd_indices(spec: &ModelSpec) -> (usize, usize) {
    let n = spec.grid_len();
    match spec.boundary() {
        Boundary::Pinned => (0, n),
        Boundary::Periodic => (n / 2, n),
    }
}

/// Exact `s_T` for a quadratic spec.
pub fn exact_msd(spec: &ModelSpec) -> Result<f64> {
    let (m, n) = msd_indices(spec);
    exact_sq_increment(spec, m, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Mcmc,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "mcmc" => Ok(Method::Mcmc),
            other => Err(Error::invalid("method", format!("expected exact or mcmc, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub t: u32,
    pub horizon: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub log_t: f64,
    pub log_s: f64,
    /// Standard error of `log_s` (`SE / estimate`).
    pub log_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
}

/// Least squares `y = a x + b`. Inverse-variance weights when every SE is
/// positive, in which case `slope_se` is the model-based error; otherwise
/// ordinary least squares with a residual-based `slope_se`.
pub fn fit_line(x: &[f64], y: &[f64], se: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if y.len() != n || se.len() != n {
        return Err(Error::DimensionMismatch("fit inputs differ in length".into()));
    }
    if n < 3 {
        return Err(Error::TooFewPoints { got: n, min: 3 });
    }
    let weighted = se.iter().all(|s| *s > 0.0 && s.is_finite());
    let w: Vec<f64> = if weighted { se.iter().map(|s| 1.0 / (s * s)).collect() } else { vec![1.0; n] };
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - xm) * (x - xm)).sum();
    let sxy: f64 = (0..n).map(|i| w[i] * (x[i] - xm) * (y[i] - ym)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("x", "needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = (0..n).map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let tss: f64 = (0..n).map(|i| w[i] * (y[i] - ym).powi(2)).sum();
    let slope_se = if weighted {
        (1.0 / sxx).sqrt()
    } else {
        (rss / (n - 2) as f64 / sxx).sqrt()
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub method: Method,
    pub points: Vec<ScalingPoint>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub warnings: Vec<String>,
}

pub const MIN_FIT_POINTS: usize = 4;

/// `s_T` for each `t` in `t_values` and a log-log fit of `s_T` against `T`.
pub fn scaling_study(
    base: &ModelSpec,
    t_values: &[u32],
    method: Method,
    config: &McmcConfig,
) -> Result<ScalingFit> {
    if t_values.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { got: t_values.len(), min: MIN_FIT_POINTS });
    }
    if method == Method::Exact {
        base.require_quadratic()?;
    }
    let cells: Vec<(u32, Result<(f64, f64)>)> = t_values
        .par_iter()
        .map(|&t| {
            let r = base.to_builder().t(t).build().and_then(|spec| match method {
                Method::Exact => exact_msd(&spec).map(|v| (v, 0.0)),
                Method::Mcmc => {
                    let run = run_chains(&GibbsTarget::new(&spec), config, &[Observable::Msd])?;
                    let e = estimates(&run, config.batches)?[0];
                    Ok((e.mean, e.std_error))
                }
            });
            (t, r)
        })
        .collect();

    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for (t, r) in cells {
        match r {
            Ok((est, se)) => {
                let horizon = (1u64 << t) as f64;
                if !(est > 0.0) {
                    warnings.push(format!("t={t}: nonpositive estimate {est} dropped"));
                    continue;
                }
                points.push(ScalingPoint {
                    t,
                    horizon,
                    estimate: est,
                    std_error: se,
                    log_t: horizon.ln(),
                    log_s: est.ln(),
                    log_se: se / est,
                });
            }
            Err(e @ Error::InsufficientBatches { .. }) if method == Method::Mcmc => {
                warnings.push(format!("t={t}: excluded, {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints { got: points.len(), min: MIN_FIT_POINTS });
    }
    let x: Vec<f64> = points.iter().map(|p| p.log_t).collect();
    let y: Vec<f64> = points.iter().map(|p| p.log_s).collect();
    let se: Vec<f64> = points.iter().map(|p| p.log_se).collect();
    let fit = fit_line(&x, &y, &se)?;
    Ok(ScalingFit {
        method,
        points,
        slope: fit.slope,
        intercept: fit.intercept,
        slope_se: fit.slope_se,
        r_squared: fit.r_squared,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalRow {
    pub label: String,
    pub exact: f64,
    pub estimate: EstimateWithError,
    /// `(estimate − exact) / SE`.
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub rows: Vec<CrossvalRow>,
    pub min_effective_samples: f64,
    pub pass: bool,
}

/// The mean square displacement and the increments over
/// `(0, N/4)`, `(N/4, N/2)`, `(N/8, 7N/8)`.
pub fn crossval_observables(spec: &ModelSpec) -> Vec<Observable> {
    let n = spec.grid_len();
    vec![
        Observable::Msd,
        Observable::SqIncrement { m: 0, n: n / 4 },
        Observable::SqIncrement { m: n / 4, n: n / 2 },
        Observable::SqIncrement { m: n / 8, n: 7 * n / 8 },
    ]
}

fn exact_observable(spec: &ModelSpec, o: &Observable) -> Result<f64> {
    match *o {
        Observable::Msd => exact_msd(spec),
        Observable::SqIncrement { m, n } => exact_sq_increment(spec, m, n),
        _ => Err(Error::invalid("observable", "no exact value for this observable")),
    }
}

/// Passes iff every tracked observable lies within 3 SE of its exact value.
pub fn crossval_mcmc_exact(spec: &ModelSpec, config: &McmcConfig) -> Result<CrossvalReport> {
    crossval_with_target(spec, &GibbsTarget::new(spec), config)
}

/// As [`crossval_mcmc_exact`], but sampling from `target` while the exact
/// values come from `spec`.
pub fn crossval_with_target<T: Target>(
    spec: &ModelSpec,
    target: &T,
    config: &McmcConfig,
) -> Result<CrossvalReport> {
    spec.require_quadratic()?;
    let obs = crossval_observables(spec);
    let run = run_chains(target, config, &obs)?;
    let est = estimates(&run, config.batches)?;
    let mut rows = Vec::with_capacity(obs.len());
    for (o, e) in obs.iter().zip(est) {
        let exact = exact_observable(spec, o)?;
        let z = if e.std_error > 0.0 {
            (e.mean - exact) / e.std_error
        } else if e.mean == exact {
            0.0
        } else {
            f64::INFINITY
        };
        rows.push(CrossvalRow {
            label: o.label(),
            exact,
            estimate: e,
            z,
            pass: z.abs() <= 3.0,
        });
    }
    Ok(CrossvalReport {
        min_effective_samples: rows.iter().map(|r| r.estimate.n_effective).fold(f64::INFINITY, f64::min),
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationRow {
    pub alpha: f64,
    /// Smallest eigenvalue of `Cov(hier) − Cov(model)`.
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub t: u32,
    pub xi: f64,
    pub n_per_unit: usize,
    /// Multiplier applied to the hierarchical coefficients.
    pub inflation: f64,
    pub tol: f64,
    pub rows: Vec<DominationRow>,
    pub pass: bool,
}

pub const MAX_DOMINATION_T: u32 = 6;

/// Checks `Cov(model) ⪯ Cov(hier)` where the hierarchical measure penalises
/// both endpoint chains with energy `inflation·α·2^{−ξ(l+1)}|s|²`.
pub fn domination_study(
    t: u32,
    xi: f64,
    alpha_grid: &[f64],
    n_per_unit: usize,
    inflation: f64,
    tol: f64,
) -> Result<DominationReport> {
    if t > MAX_DOMINATION_T {
        return Err(Error::TooLarge { size: 1 << t, cap: 1 << MAX_DOMINATION_T });
    }
    if !(inflation > 0.0) {
        return Err(Error::invalid("inflation", "must be positive"));
    }
    let a_seq: Vec<f64> = domination_a_seq(t, xi).iter().map(|a| a / inflation.sqrt()).collect();
    let mut rows = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let spec = ModelSpec::builder().t(t).n_per_unit(n_per_unit).alpha(alpha).xi(xi).build()?;
        let model_cov = assemble_precision(&spec)?.covariance()?;
        let hier_cov = hier_precision(&spec, &a_seq, BlockSelection::EndpointChain)?.covariance()?;
        let margin = loewner_margin(&model_cov, &hier_cov)?;
        rows.push(DominationRow { alpha, margin, pass: margin >= -tol });
    }
    Ok(DominationReport {
        t,
        xi,
        n_per_unit,
        inflation,
        tol,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeCell {
    pub gamma: f64,
    pub xi: f64,
    pub label: RegimeLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeGrid {
    pub resolution: usize,
    pub cells: Vec<RegimeCell>,
    pub metadata: Value,
}

impl RegimeGrid {
    /// Cell `(i, j)`: `γ_i = 2(i + ½)/res`, `ξ_j = 4j/res`.
    pub fn gamma_at(resolution: usize, i: usize) -> f64 {
        2.0 * (i as f64 + 0.5) / resolution as f64
    }
    pub fn xi_at(resolution: usize, j: usize) -> f64 {
        4.0 * j as f64 / resolution as f64
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma,xi,label\n");
        for c in &self.cells {
            let _ = writeln!(s, "{},{},{}", fmt_f64(c.gamma), fmt_f64(c.xi), c.label);
        }
        s
    }
}

pub const MIN_REGIME_RESOLUTION: usize = 16;

/// Labels of a `resolution × resolution` grid over `(0, 2) × [0, 4)`,
/// row-major in `γ`.
pub fn regime_figure(resolution: usize) -> Result<RegimeGrid> {
    if resolution < MIN_REGIME_RESOLUTION {
        return Err(Error::invalid("resolution", format!("must be at least {MIN_REGIME_RESOLUTION}")));
    }
    let mut cells = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let gamma = RegimeGrid::gamma_at(resolution, i);
        for j in 0..resolution {
            let xi = RegimeGrid::xi_at(resolution, j);
            cells.push(RegimeCell { gamma, xi, label: regime_classify(gamma, xi)? });
        }
    }
    let metadata = json!({
        "gamma_range": [0.0, 2.0],
        "xi_range": [0.0, 4.0],
        "boundaries": ["xi = gamma/2", "xi = 1 + gamma/2", "xi = 2", "xi = 2 + gamma/2"],
        "annotations": [{
            "line": "xi = 3",
            "style": "dotted",
            "note": "upper end of the xi range of the Gaussian endpoint-variance bound"
        }],
        "intervals": "left-closed",
    });
    Ok(RegimeGrid { resolution, cells, metadata })
}

/// Provenance record written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the canonical JSON of `config`.
    pub config_digest: String,
    pub seed: u64,
    pub code_version: String,
    pub started: String,
    pub finished: String,
    pub config: Value,
    pub spec: Value,
}

impl RunManifest {
    pub fn new(config: Value, seed: u64, spec: Value) -> Self {
        let now = chrono::Utc::now().to_rfc3339();
        RunManifest {
            config_digest: digest(&config),
            seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started: now.clone(),
            finished: now,
            config,
            spec,
        }
    }

    pub fn finish(&mut self) {
        self.finished = chrono::Utc::now().to_rfc3339();
    }
}

/// Hex SHA-256 of `serde_json::to_string(value)` (object keys are sorted).
pub fn digest(value: &Value) -> String {
    let bytes = serde_json::to_vec(value).expect("serialisable value");
    Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// JSON echo of a spec. Radial potentials are recorded by name only.
pub fn spec_echo(spec: &ModelSpec) -> Value {
    let potential = match spec.potential() {
        Potential::PowerLaw => json!({ "kind": "power-law" }),
        Potential::Radial { name, .. } => json!({ "kind": "radial", "name": name }),
    };
    json!({
        "t": spec.t(),
        "horizon": spec.horizon(),
        "n_per_unit": spec.n_per_unit(),
        "dim": spec.dim(),
        "alpha": json_f64(spec.alpha()),
        "gamma": json_f64(spec.gamma()),
        "xi": json_f64(spec.xi()),
        "zeta": json_f64(spec.zeta()),
        "boundary": spec.boundary().as_str(),
        "potential": potential,
    })
}

/// CSV with a header row; numeric cells are preformatted by the caller.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

impl ScalingFit {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["t", "T", "estimate", "std_error"]);
        for p in &self.points {
            t.push(vec![p.t.to_string(), fmt_f64(p.horizon), fmt_f64(p.estimate), fmt_f64(p.std_error)]);
        }
        t
    }
}

/// Writes `stem.csv` (if given), `stem.json` and `stem.manifest.json`
/// under `dir`, returning the paths written.
pub fn write_artifacts(
    dir: &FsPath,
    stem: &str,
    csv: Option<&str>,
    summary: &Value,
    manifest: &RunManifest,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if let Some(csv) = csv {
        let p = dir.join(format!("{stem}.csv"));
        fs::write(&p, csv)?;
        written.push(p);
    }
    let p = dir.join(format!("{stem}.json"));
    fs::write(&p, serde_json::to_string_pretty(summary)? + "\n")?;
    written.push(p);
    let p = dir.join(format!("{stem}.manifest.json"));
    fs::write(&p, serde_json::to_string_pretty(manifest)? + "\n")?;
    written.push(p);
    Ok(written)
}
