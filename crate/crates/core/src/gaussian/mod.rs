//! Exact machinery for the quadratic potential: dense precision matrices,
//! the periodic circulant solver, continuum quadrature, the hierarchical
//! comparison measures and covariance ordering.

pub mod circulant;
pub mod continuum;
pub mod precision;
pub mod quad;

pub use circulant::{
    circulant_coefficients, dft_increment_variance, dft_increment_variance_direct,
    dft_increment_variances, CirculantOperator,
};
pub use continuum::{continuum_msd, continuum_msd_quad, kernel_integral, kernel_transform_gap};
pub use precision::{
    assemble_precision, assemble_precision_eps, covariance_of_functionals, loewner_leq,
    loewner_margin, sample_gaussian, CovarianceSummary, Functional, PrecisionMatrix, DENSE_CAP,
};
pub use quad::{Quad, QuadratureConfig};

use crate::error::{Error, Result};
use crate::model::{Boundary, ModelSpec};

/// A dyadic block `[start, start + 2^level]` in time units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DyadicBlock {
    pub level: u32,
    pub start: usize,
}

impl DyadicBlock {
    pub fn len(&self) -> usize {
        1 << self.level
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label(&self) -> String {
        format!("sbar[l={},u={}]", self.level, self.start)
    }
}

/// Adds the trapezoid weights of `∫_a^b x_s ds` (integer times) to `w`.
pub(crate) fn add_trapezoid(w: &mut [f64], n_per_unit: usize, a: usize, b: usize, scale: f64) {
    if a == b {
        return;
    }
    let h = scale / n_per_unit as f64;
    let (lo, hi) = (a * n_per_unit, b * n_per_unit);
    for i in lo..=hi {
        w[i] += if i == lo || i == hi { 0.5 * h } else { h };
    }
}

/// Grid weights of the averaged increment `s̄` of `block`:
/// `(∫ second half − ∫ first half) / 2^level`.
pub fn sbar_functional(spec: &ModelSpec, block: DyadicBlock) -> Result<Functional> {
    let len = block.len();
    if block.level == 0 || block.start + len > spec.horizon() {
        return Err(Error::OutOfRange(format!(
            "block level {} at {} does not fit in [0, {}]",
            block.level,
            block.start,
            spec.horizon()
        )));
    }
    let mut w = vec![0.0; spec.grid_len() + 1];
    let mid = block.start + len / 2;
    let scale = 1.0 / len as f64;
    add_trapezoid(&mut w, spec.n_per_unit(), mid, block.start + len, scale);
    add_trapezoid(&mut w, spec.n_per_unit(), block.start, mid, -scale);
    Ok(Functional::new(block.label(), w))
}

/// Which dyadic blocks receive a Gaussian penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSelection {
    /// `[0, 2^l]` for `l = 1..t` and `[T − 2^l, T]` for `l = 1..t−1`.
    EndpointChain,
    /// Every aligned block of level `1..=level`.
    AllBlocks { level: u32 },
}

pub fn select_blocks(t: u32, selection: BlockSelection) -> Result<Vec<DyadicBlock>> {
    let horizon = 1usize << t;
    match selection {
        BlockSelection::EndpointChain => {
            let mut v: Vec<_> = (1..=t).map(|level| DyadicBlock { level, start: 0 }).collect();
            v.extend((1..t).map(|level| DyadicBlock {
                level,
                start: horizon - (1 << level),
            }));
            Ok(v)
        }
        BlockSelection::AllBlocks { level } => {
            if level == 0 || level > t {
                return Err(Error::OutOfRange(format!(
                    "block level {level} outside 1..={t}"
                )));
            }
            let mut v = Vec::new();
            for l in 1..=level {
                let len = 1usize << l;
                v.extend((0..horizon / len).map(|u| DyadicBlock {
                    level: l,
                    start: u * len,
                }));
            }
            Ok(v)
        }
    }
}

/// Brownian precision plus `α A_l^{−2} v̄ v̄ᵀ` for every selected block, with
/// `a_seq[l − 1] = A_l`. Infinite `A_l` means no penalty at that level.
pub fn hier_precision(
    spec: &ModelSpec,
    a_seq: &[f64],
    blocks: BlockSelection,
) -> Result<PrecisionMatrix> {
    if spec.boundary() != Boundary::Pinned {
        return Err(Error::WrongBoundary("pinned"));
    }
    let selected = select_blocks(spec.t(), blocks)?;
    let max_level = selected.iter().map(|b| b.level).max().unwrap_or(0) as usize;
    if a_seq.len() < max_level {
        return Err(Error::DimensionMismatch(format!(
            "a_seq has {} levels, blocks need {max_level}",
            a_seq.len()
        )));
    }
    if let Some(bad) = a_seq.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::invalid("a_seq", format!("entries must be positive, got {bad}")));
    }
    let mut p = precision::brownian_precision(spec)?;
    for b in selected {
        let a = a_seq[b.level as usize - 1];
        let coef = spec.alpha() / (a * a);
        if coef == 0.0 {
            continue;
        }
        let v = p.project(&sbar_functional(spec, b)?.weights)?;
        let m = p.matrix_mut();
        m.ger(coef, &v, &v, 1.0);
    }
    Ok(p)
}

/// `A_l` values whose penalties reproduce `α·2^{−ξ(l+1)}|s|²` in the energy.
pub fn domination_a_seq(t: u32, xi: f64) -> Vec<f64> {
    (1..=t)
        .map(|l| {
            let l = l as f64;
            (xi * (l + 1.0) - 2.0 * l - 1.0).exp2().sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Path, build_kernel, energy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pinned(t: u32, nt: usize, alpha: f64, xi: f64) -> ModelSpec {
        ModelSpec::builder().t(t).n_per_unit(nt).alpha(alpha).xi(xi).build().unwrap()
    }

    #[test]
    fn endpoint_chain_blocks() {
        let b = select_blocks(3, BlockSelection::EndpointChain).unwrap();
        let starts: Vec<_> = b.iter().map(|b| (b.level, b.start)).collect();
        assert_eq!(starts, vec![(1, 0), (2, 0), (3, 0), (1, 6), (2, 4)]);
        let all = select_blocks(3, BlockSelection::AllBlocks { level: 2 }).unwrap();
        assert_eq!(all.len(), 4 + 2);
    }

    #[test]
    fn sbar_of_linear_path() {
        // x_s = s on [0, 4]: s̄ = (∫_2^4 s − ∫_0^2 s)/4 = (6 − 2)/4 = 1.
        let s = pinned(2, 3, 1.0, 2.0);
        let f = sbar_functional(&s, DyadicBlock { level: 2, start: 0 }).unwrap();
        let v: f64 = f.weights.iter().enumerate().map(|(i, w)| w * i as f64 / 3.0).sum();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn infinite_a_is_brownian() {
        let s = pinned(3, 2, 1.0, 2.0);
        let p = hier_precision(&s, &[f64::INFINITY; 3], BlockSelection::EndpointChain).unwrap();
        let b = precision::brownian_precision(&s).unwrap();
        assert_eq!(p.matrix(), b.matrix());
    }

    #[test]
    fn quadratic_form_adds_penalties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = pinned(3, 2, 1.7, 2.0);
        let a = [0.8, 1.3, 2.1];
        let p = hier_precision(&s, &a, BlockSelection::EndpointChain).unwrap();
        let free = s.with_alpha(0.0).unwrap();
        let k = build_kernel(&free);
        for _ in 0..100 {
            let path = Path::from_fn(&s, |_, x| x[0] = rng.random_range(-3.0..3.0));
            let mut want = energy(&path, &free, &k).unwrap();
            for b in select_blocks(3, BlockSelection::EndpointChain).unwrap() {
                let f = sbar_functional(&s, b).unwrap();
                let sb: f64 = f.weights.iter().enumerate().map(|(i, w)| w * path.point(i)[0]).sum();
                let al = a[b.level as usize - 1];
                want += 0.5 * s.alpha() * sb * sb / (al * al);
            }
            let got = p.quadratic_form(&path).unwrap();
            assert!((got - want).abs() < 1e-10 * want.max(1.0));
        }
    }

    #[test]
    fn penalised_sbar_variance_below_target() {
        let s = pinned(4, 2, 1.0, 2.0);
        let a: Vec<f64> = (1..=4).map(|l| (0.5 * (2.5 - 2.0) * l as f64).exp2()).collect();
        let p = hier_precision(&s, &a, BlockSelection::EndpointChain).unwrap();
        for b in select_blocks(4, BlockSelection::EndpointChain).unwrap() {
            let f = sbar_functional(&s, b).unwrap();
            let v = covariance_of_functionals(&p, &[f]).unwrap().matrix[(0, 0)];
            let al = a[b.level as usize - 1];
            assert!(v <= al * al / s.alpha() + 1e-12);
        }
    }

    #[test]
    fn strong_penalty_kills_variance() {
        let block = DyadicBlock { level: 2, start: 0 };
        let mut prev = f64::INFINITY;
        for alpha in [1.0, 1e2, 1e4, 1e6] {
            let s = pinned(2, 2, alpha, 2.0);
            let p = hier_precision(&s, &[f64::INFINITY, 1.0], BlockSelection::AllBlocks { level: 2 })
                .unwrap();
            let v = covariance_of_functionals(&p, &[sbar_functional(&s, block).unwrap()])
                .unwrap()
                .matrix[(0, 0)];
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn periodic_rejected() {
        let s = ModelSpec::builder().boundary(Boundary::Periodic).build().unwrap();
        assert!(hier_precision(&s, &[1.0; 8], BlockSelection::EndpointChain).is_err());
    }
}
