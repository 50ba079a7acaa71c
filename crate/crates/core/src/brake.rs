//! Brake indices `μ_{k,τ}`, `ν_{k,τ}` (k = 1, 2) from Lagrangian crossings of
//! `t ↦ γ(t)U_k` with `U_k` on `[0, τ/2]`, where `U₁ = {0}×ℝⁿ` and `U₂ = ℝⁿ×{0}`.
//!
//! Convention: `μ_k = (m⁺ at t = 0) + Σ interior signatures − (m⁻ at τ/2) − n`, i.e. the
//! start intersection `U_k` itself is not counted. With a definite start form this is
//! the same as charging `−m⁻` at the start. The crossing form is `⟨w, B(t)w⟩`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::crossing::kernel_of;
use crate::index::{count_with_fallback, CrossingRecord, IndexOptions, StartRule, Target};
use crate::symplectic::{fundamental_solution_on, CoefficientPath, Mat, PathSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrakeIndices {
    pub mu1: i64,
    pub mu2: i64,
    pub nu1: usize,
    pub nu2: usize,
    /// `γ(τ/2)`, row-major.
    pub half_monodromy: Vec<f64>,
    pub crossings1: Vec<CrossingRecord>,
    pub crossings2: Vec<CrossingRecord>,
    pub perturbation: Option<f64>,
}

fn check_square_even(g: &Mat) -> Result<usize> {
    if g.nrows() != g.ncols() || g.nrows() % 2 != 0 || g.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "expected 2n×2n, got {}×{}",
            g.nrows(),
            g.ncols()
        )));
    }
    Ok(g.nrows() / 2)
}

/// `(dim Ker B, dim Ker C)` for `γ(τ/2) = [[A, B], [C, D]]`, singular values below
/// `tol·‖γ(τ/2)‖₂` counting as zero.
pub fn brake_nullities_tol(gamma_half: &Mat, tol: f64) -> Result<(usize, usize)> {
    check_square_even(gamma_half)?;
    let k1 = kernel_of(&Target::Lagrangian1, gamma_half, tol)
        .basis
        .ncols();
    let k2 = kernel_of(&Target::Lagrangian2, gamma_half, tol)
        .basis
        .ncols();
    Ok((k1, k2))
}

pub fn brake_nullities(gamma_half: &Mat) -> Result<(usize, usize)> {
    brake_nullities_tol(gamma_half, 1e-8)
}

/// `μ_{k,τ}` of a path on `[0, τ/2]` with `γ(0) = I`.
pub fn brake_maslov(
    gamma: &dyn PathSource,
    k: u8,
    opts: &IndexOptions,
) -> Result<(i64, Vec<CrossingRecord>, Option<f64>)> {
    let target = match k {
        1 => Target::Lagrangian1,
        2 => Target::Lagrangian2,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "brake index k must be 1 or 2, got {k}"
            )))
        }
    };
    let (a, _) = gamma.span();
    let g0 = gamma.eval(a);
    let n = check_square_even(&g0)?;
    let gap = (&g0 - Mat::identity(2 * n, 2 * n)).amax();
    if gap > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "path must start at the identity (gap {gap:.3e})"
        )));
    }
    let (count, records, pert) =
        count_with_fallback(gamma, &target, StartRule::PlusPositive, opts)?;
    Ok((count - n as i64, records, pert))
}

/// Both brake index pairs of the fundamental solution of a reversible coefficient,
/// integrated over `[0, τ/2]`.
pub fn brake_indices(
    b: &CoefficientPath,
    steps: usize,
    opts: &IndexOptions,
) -> Result<BrakeIndices> {
    b.check_reversible(64)?;
    let dim = b.dim();
    let path = fundamental_solution_on(b, 0.0, 0.5 * b.tau(), &Mat::identity(dim, dim), steps)?;
    let (mu1, crossings1, p1) = brake_maslov(&path, 1, opts)?;
    let (mu2, crossings2, p2) = brake_maslov(&path, 2, opts)?;
    let half = path.monodromy();
    let (nu1, nu2) = brake_nullities_tol(half, opts.scan.tol_kernel)?;
    Ok(BrakeIndices {
        mu1,
        mu2,
        nu1,
        nu2,
        half_monodromy: half.transpose().as_slice().to_vec(),
        crossings1,
        crossings2,
        perturbation: p1.or(p2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{block_diag, rotation};
    use std::f64::consts::PI;

    #[test]
    fn nullity_examples() {
        assert_eq!(brake_nullities(&Mat::identity(4, 4)).unwrap(), (2, 2));
        assert_eq!(brake_nullities(&rotation(1, PI)).unwrap(), (1, 1));
        let d = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        assert_eq!(brake_nullities(&d).unwrap(), (1, 1));
        assert_eq!(brake_nullities(&rotation(1, 0.3)).unwrap(), (0, 0));
        assert!(brake_nullities(&Mat::identity(3, 3)).is_err());
    }

    /// `γ(t) = exp(λρtJ)` crosses `U_k` whenever `sin(λρt) = 0`; each crossing of the
    /// interior of `[0, τ/2]` adds one per block.
    fn expected_mu(rho: &[f64], lambda: f64, tau: f64) -> i64 {
        rho.iter()
            .map(|&r| {
                let x = lambda * r * tau / (2.0 * PI);
                let interior = if (x - x.round()).abs() < 1e-12 {
                    x.round() - 1.0
                } else {
                    x.floor()
                };
                interior.max(0.0) as i64
            })
            .sum()
    }

    #[test]
    fn constant_family_sweep() {
        let o = IndexOptions::default();
        let tau = 2.0 * PI;
        let rho = [1.0, 2.5];
        for lambda in [0.3, 0.8, 1.0, 1.3, 2.0, 2.6, 3.0] {
            let b = CoefficientPath::constant(block_diag(&rho.map(|r| lambda * r)), tau).unwrap();
            let r = brake_indices(&b, 1024, &o).unwrap();
            let nu = rho
                .iter()
                .filter(|&&x| {
                    let y = lambda * x * tau / (2.0 * PI);
                    (y - y.round()).abs() < 1e-9
                })
                .count();
            assert_eq!(
                (r.mu1, r.nu1),
                (expected_mu(&rho, lambda, tau), nu),
                "λ = {lambda}"
            );
            assert_eq!((r.mu2, r.nu2), (r.mu1, r.nu1));
        }
    }

    #[test]
    fn rejects_bad_k_and_start() {
        let o = IndexOptions::default();
        let b = CoefficientPath::scalar(1, 1.0, 2.0 * PI);
        let p = fundamental_solution_on(&b, 0.0, 1.0, &Mat::identity(2, 2), 64).unwrap();
        assert!(brake_maslov(&p, 3, &o).is_err());
        let q = fundamental_solution_on(&b, 0.0, 1.0, &rotation(1, 0.2), 64).unwrap();
        assert!(brake_maslov(&q, 1, &o).is_err());
    }

    #[test]
    fn negative_coefficient_counts_end() {
        // B = −I: crossings at t = π are negative; the end at τ/2 = π charges −1.
        let o = IndexOptions::default();
        let b = CoefficientPath::scalar(1, -1.0, 2.0 * PI);
        let r = brake_indices(&b, 1024, &o).unwrap();
        assert_eq!((r.mu1, r.nu1), (-2, 1));
    }
}
