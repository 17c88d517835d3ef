//! Quick property suite behind `subdiff verify`: each check runs at desk
//! scale in well under a minute and reports a boolean with a short detail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{crossval_mcmc_exact, crossval_with_target, domination_study, regime_figure};
use crate::error::Result;
use crate::gaussian::{
    assemble_precision, assemble_precision_eps, circulant_coefficients, covariance_of_functionals,
    dft_increment_variance, Functional,
};
use crate::hierarchy::{
    a_r_recursion, check_lemma_bound, dyadic_stats, fixed_point_iterate, gaussian_a_seq,
    quadform_correction, quadform_gap, quadform_q, quadform_qtilde, r_cap, s_v_recursion,
    telescoping_residual, GridInterval,
};
use crate::model::{Boundary, ModelSpec, Path, RegimeLabel};
use crate::sampler::{GibbsTarget, McmcConfig, SignFlipped};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

fn check(name: &str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), pass, detail }
}

fn random_path(spec: &ModelSpec, rng: &mut ChaCha8Rng, scale: f64) -> Path {
    Path::from_fn(spec, |_, x| {
        for v in x {
            *v = rng.random_range(-scale..scale);
        }
    })
}

pub fn circulant_vs_dense(t: u32, n_per_unit: usize) -> Result<(bool, f64)> {
    let mut worst = 0.0f64;
    for xi in [1.5, 2.0, 2.5] {
        for alpha in [0.0, 1.0, 10.0] {
            let spec = ModelSpec::builder()
                .t(t)
                .n_per_unit(n_per_unit)
                .alpha(alpha)
                .xi(xi)
                .boundary(Boundary::Periodic)
                .build()?;
            let n = spec.grid_len();
            let op = circulant_coefficients(&spec, 1e-8)?;
            let prec = assemble_precision_eps(&spec, 1e-8)?;
            let pairs = [(0, 1), (0, n / 4), (n / 8, 7 * n / 8), (3, n / 2)];
            let fs: Vec<Functional> = pairs.iter().map(|&(m, k)| Functional::increment(n, m, k)).collect();
            let dense = covariance_of_functionals(&prec, &fs)?;
            for (i, &(m, k)) in pairs.iter().enumerate() {
                let v = dft_increment_variance(&op, m, k)?;
                worst = worst.max((v - dense.matrix[(i, i)]).abs() / v.abs());
            }
        }
    }
    Ok((worst <= 1e-6, worst))
}

pub fn free_case(t: u32, n_per_unit: usize) -> Result<(bool, f64)> {
    let periodic = ModelSpec::builder()
        .t(t)
        .n_per_unit(n_per_unit)
        .alpha(0.0)
        .boundary(Boundary::Periodic)
        .build()?;
    let n = periodic.grid_len();
    let op = circulant_coefficients(&periodic, 0.0)?;
    let mut worst = 0.0f64;
    for (m, k) in [(0, 1), (0, n / 4), (5, n / 2 + 3), (n / 8, 7 * n / 8)] {
        let l = (k - m) as f64;
        let want = l * (n as f64 - l) / n as f64 / n_per_unit as f64;
        worst = worst.max((dft_increment_variance(&op, m, k)? - want).abs());
    }
    let pinned = ModelSpec::builder().t(t).n_per_unit(n_per_unit).alpha(0.0).build()?;
    let prec = assemble_precision(&pinned)?;
    let v = covariance_of_functionals(&prec, &[Functional::point(pinned.grid_len(), pinned.grid_len())])?
        .matrix[(0, 0)];
    worst = worst.max((v - pinned.horizon() as f64).abs());
    Ok((worst <= 1e-8, worst))
}

/// Largest `residual / (1 + |x_T|)` over random paths for `t = 1..=t_max`.
pub fn telescoping_check(paths: usize, t_max: u32, seed: u64) -> Result<(bool, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for t in 1..=t_max {
        let spec = ModelSpec::builder().t(t).n_per_unit(2).build()?;
        for _ in 0..paths {
            let p = random_path(&spec, &mut rng, 10.0);
            let st = dyadic_stats(&p, &spec)?;
            let scale = 1.0 + st.endpoint().iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max(telescoping_residual(&st) / scale);
        }
    }
    Ok((worst < 1e-10, worst))
}

/// Minimum gap and worst relative deviation of the correction identity over
/// random paths and all pairs of adjacent aligned dyadic halves.
pub fn quadform_check(paths: usize, t: u32, seed: u64) -> Result<(bool, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = ModelSpec::builder().t(t).n_per_unit(2).dim(2).build()?;
    let mut min_gap = f64::INFINITY;
    let mut worst_rel = 0.0f64;
    for _ in 0..paths {
        let p = random_path(&spec, &mut rng, 3.0);
        for level in 1..=t {
            let len = 1usize << level;
            for b in 0..spec.horizon() / len {
                let u = b * len;
                let i1 = GridInterval::from_time(&spec, u, u + len / 2);
                let i2 = GridInterval::from_time(&spec, u + len / 2, u + len);
                let gap = quadform_gap(&p, &spec, i1, i2)?;
                let corr = quadform_correction(&p, &spec, i1, i2)?;
                min_gap = min_gap.min(gap);
                worst_rel = worst_rel.max((gap - corr).abs() / corr.abs().max(1e-300));
            }
        }
    }
    Ok((min_gap >= -1e-10 && worst_rel <= 1e-8, min_gap, worst_rel))
}

/// `x_t = t`, `I1 = [0,1]`, `I2 = [1,2]`: `Q = 7/6`, `Q̃ = 1`.
pub fn quadform_example() -> Result<(f64, f64, f64)> {
    let spec = ModelSpec::builder().t(1).n_per_unit(4).build()?;
    let p = Path::from_fn(&spec, |i, x| x[0] = i as f64 / 4.0);
    let (i1, i2) = (GridInterval::from_time(&spec, 0, 1), GridInterval::from_time(&spec, 1, 2));
    Ok((
        quadform_q(&p, &spec, i1, i2)?,
        quadform_qtilde(&p, &spec, i1, i2)?,
        quadform_gap(&p, &spec, i1, i2)?,
    ))
}

/// The five-interval partition written out independently of the classifier.
pub fn regime_reference(gamma: f64, xi: f64) -> RegimeLabel {
    let h = gamma / 2.0;
    let cuts = [
        (h, RegimeLabel::VarianceCollapse),
        (1.0 + h, RegimeLabel::BoundedVariance),
        (2.0, RegimeLabel::LogOrSubdiffusive),
        (2.0 + h, RegimeLabel::Subdiffusive),
    ];
    cuts.iter()
        .find(|(upper, _)| xi < *upper)
        .map(|(_, l)| *l)
        .unwrap_or(RegimeLabel::Diffusive)
}

pub fn verify_suite(seed: u64) -> Result<VerifyReport> {
    let mut checks = Vec::new();

    let (ok, worst) = circulant_vs_dense(5, 2)?;
    checks.push(check("circulant_dense", ok, format!("max relative gap {worst:.3e}")));

    let (ok, worst) = free_case(5, 2)?;
    checks.push(check("free_case", ok, format!("max abs error {worst:.3e}")));

    let (ok, worst) = telescoping_check(50, 8, seed)?;
    checks.push(check("telescoping", ok, format!("max scaled residual {worst:.3e}")));

    let (ok, gap, rel) = quadform_check(20, 4, seed ^ 1)?;
    let (q, qt, g) = quadform_example()?;
    let ex = (q - 7.0 / 6.0).abs() < 1e-12 && (qt - 1.0).abs() < 1e-12 && (g - 1.0 / 6.0).abs() < 1e-12;
    checks.push(check(
        "quadform",
        ok && ex,
        format!("min gap {gap:.3e}, identity error {rel:.3e}, example Q={q:.6} Q~={qt:.6}"),
    ));

    let mut dom_ok = true;
    let mut dom_min = f64::INFINITY;
    for xi in [1.5, 2.0, 2.5] {
        let r = domination_study(3, xi, &[0.5, 1.0, 2.0], 2, 1.0, 1e-8)?;
        dom_ok &= r.pass;
        dom_min = dom_min.min(r.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min));
    }
    let control = domination_study(3, 2.0, &[1.0], 2, 64.0, 1e-8)?;
    checks.push(check(
        "domination",
        dom_ok && !control.pass,
        format!("min margin {dom_min:.3e}; x64 control margin {:.3e}", control.rows[0].margin),
    ));

    let mut lemma_ok = true;
    for xi in [1.5, 2.0, 2.5] {
        let spec = ModelSpec::builder().t(5).n_per_unit(1).xi(xi).build()?;
        lemma_ok &= check_lemma_bound(&spec, &gaussian_a_seq(5, xi))?.holds;
    }
    checks.push(check("lemma_bound", lemma_ok, "exact <= bound for xi in {1.5, 2, 2.5}".into()));

    let spec = ModelSpec::builder()
        .t(3)
        .n_per_unit(2)
        .alpha(1.0)
        .boundary(Boundary::Periodic)
        .build()?;
    let cfg = McmcConfig { sweeps: 8_000, burn_in: 800, chains: 2, seed, ..Default::default() };
    let cv = crossval_mcmc_exact(&spec, &cfg)?;
    let flipped = crossval_with_target(&spec, &SignFlipped(GibbsTarget::new(&spec)), &cfg);
    let rejected = !matches!(flipped, Ok(ref r) if r.pass);
    let worst_z = cv.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    checks.push(check(
        "crossval",
        cv.pass && rejected,
        format!("max |z| {worst_z:.2}, sign-flipped control rejected: {rejected}"),
    ));

    let mut rec_ok = true;
    for (gamma, xi) in [(0.5, 1.0), (1.0, 1.5), (1.5, 0.5)] {
        let cap = r_cap(gamma, xi)?;
        let st = a_r_recursion(gamma, xi, 10_000)?;
        rec_ok &= !st.overflow && st.r_seq.iter().all(|&r| r <= cap);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
    for _ in 0..100 {
        let c = rng.random_range(0.5..10.0);
        let d = rng.random_range(0.0..1.0);
        rec_ok &= fixed_point_iterate(c, d, rng.random_range(1..60))?.bound_holds;
    }
    let sv = s_v_recursion(1.0, 2.25, 1024.0, 40)?;
    let fp = sv.exponent_fixed_point.unwrap_or(f64::NAN);
    let e = &sv.exponent_trace;
    rec_ok &= (1..10).all(|j| ((e[j] - fp) / (e[j - 1] - fp) - 0.5).abs() < 1e-10);
    checks.push(check("recursion", rec_ok, "r cap, fixed-point bound, S/V contraction".into()));

    let grid = regime_figure(64)?;
    let ok = grid.cells.iter().all(|c| c.label == regime_reference(c.gamma, c.xi));
    checks.push(check("regimes", ok, format!("{} cells", grid.cells.len())));

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { checks, pass })
}
