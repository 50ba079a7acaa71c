//! Index profile of `λ ↦ γ_λ(t) = exp(tλJA)`, `t ∈ [0, 1]`, for definite `A`.
//!
//! For `A > 0` with `d₀ = dim Ker(I − M)` and `ν(s) = dim Ker(exp(sJA) − M)`:
//! `i(λ) = base + d₀ + Σ_{0<s<λ} ν(s)` for `λ > 0`,
//! `i(λ) = base − Σ_{λ<s<0} ν(s) − ν(λ)` for `λ < 0`, and `i(0) = base`.
//! Negative definite `A` is handled through `i_A(λ) = i_{−A}(−λ)`.

use serde::{Deserialize, Serialize};

use super::crossing::{self, ExpPath, StartRule, Target};
use super::{base_index, maslov_index_with, IndexOptions};
use crate::error::{Error, Result};
use crate::symplectic::{
    fundamental_solution, sym_eigen_sorted, CoefficientPath, Mat, SymplecticMatrix,
};

/// Constant-index piece on the open interval `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StairPiece {
    pub lo: f64,
    pub hi: f64,
    pub i: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaircaseProfile {
    /// `+1` for positive definite `A`, `−1` for negative definite.
    pub sign: i32,
    pub base: i64,
    pub d0: usize,
    pub range: (f64, f64),
    /// Points of `Γ(A)` in the range with their nullities, sorted.
    pub crossings: Vec<(f64, usize)>,
    pub pieces: Vec<StairPiece>,
}

impl StaircaseProfile {
    fn nu_at_scaled(&self, lam: f64, tol: f64) -> usize {
        self.crossings
            .iter()
            .find(|(c, _)| (c - lam).abs() <= tol)
            .map(|&(_, v)| v)
            .unwrap_or(0)
    }

    /// `(i, ν)` at `λ` from the case formulas.
    pub fn index_at(&self, lambda: f64) -> (i64, usize) {
        let scale = self.range.0.abs().max(self.range.1.abs()).max(1.0);
        let tol = 1e-9 * scale;
        let s = self.sign as f64;
        let lp = s * lambda;
        // Crossings in the positive-definite picture.
        let pos: Vec<(f64, usize)> = self.crossings.iter().map(|&(c, v)| (s * c, v)).collect();
        if lp.abs() <= tol {
            return (self.base, self.d0);
        }
        let nu_here = self.nu_at_scaled(lambda, tol);
        if lp > 0.0 {
            let below: usize = pos
                .iter()
                .filter(|&&(c, _)| c > tol && c < lp - tol)
                .map(|&(_, v)| v)
                .sum();
            (self.base + self.d0 as i64 + below as i64, nu_here)
        } else {
            let between: usize = pos
                .iter()
                .filter(|&&(c, _)| c < -tol && c > lp + tol)
                .map(|&(_, v)| v)
                .sum();
            (self.base - between as i64 - nu_here as i64, nu_here)
        }
    }

    /// Direct index evaluation at `λ`, for cross-checking the formulas.
    pub fn probe(
        a: &Mat,
        m: &SymplecticMatrix,
        lambda: f64,
        steps: usize,
        opts: &IndexOptions,
    ) -> Result<(i64, usize)> {
        let b = CoefficientPath::constant(a * lambda, 1.0)?;
        let path = fundamental_solution(&b, steps)?;
        let r = maslov_index_with(&path, m, opts)?;
        Ok((r.i, r.nu))
    }
}

/// Staircase profile of `i_{1,M}(γ_λ)` over `λ_range` for definite `A`.
pub fn staircase_profile(
    a: &Mat,
    m: &SymplecticMatrix,
    lambda_range: (f64, f64),
    opts: &IndexOptions,
) -> Result<StaircaseProfile> {
    let (lo, hi) = lambda_range;
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
    }
    let (vals, _) = sym_eigen_sorted(a);
    let (min, max) = (vals[0], *vals.last().unwrap());
    let sign = if min > 0.0 {
        1
    } else if max < 0.0 {
        -1
    } else {
        return Err(Error::Indefinite { min, max });
    };
    let ap = a * sign as f64;
    let base = base_index(m, opts)?;
    let dim = a.nrows();
    let d0 = super::nullity_rel(&Mat::identity(dim, dim), m, opts.scan.tol_kernel)?.nu;

    // Positive-definite picture: λ' = sign·λ.
    let (plo, phi) = if sign > 0 { (lo, hi) } else { (-hi, -lo) };
    let target = Target::Graph(m.matrix().clone());
    let mut crossings_p: Vec<(f64, usize)> = Vec::new();
    let norm = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (s0, s1) in [(0.0f64, phi), (plo, 0.0f64)] {
        if s1 - s0 <= 0.0 || (s0 == 0.0 && s1 <= 0.0) {
            continue;
        }
        let samples = (((s1 - s0) * norm * 64.0).ceil() as usize).clamp(256, 1 << 16);
        let path = ExpPath::new(ap.clone(), s0, s1, samples);
        let sc = crossing::scan(&path, &target, StartRule::PlusPositive, &opts.scan)?;
        for r in sc.records {
            if r.t.abs() > 1e-12 {
                crossings_p.push((r.t, r.kernel_dim));
            }
        }
    }
    crossings_p.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    crossings_p.dedup_by(|x, y| (x.0 - y.0).abs() <= 1e-9 * (1.0 + x.0.abs()));

    let mut crossings: Vec<(f64, usize)> = crossings_p
        .iter()
        .map(|&(c, v)| (sign as f64 * c, v))
        .filter(|&(c, _)| c >= lo - 1e-12 && c <= hi + 1e-12)
        .collect();
    crossings.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let mut profile = StaircaseProfile {
        sign,
        base,
        d0,
        range: (lo, hi),
        crossings,
        pieces: Vec::new(),
    };
    let mut cuts: Vec<f64> = vec![lo];
    if lo < 0.0 && hi > 0.0 {
        cuts.push(0.0);
    }
    cuts.extend(
        profile
            .crossings
            .iter()
            .map(|&(c, _)| c)
            .filter(|&c| c > lo && c < hi),
    );
    cuts.push(hi);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let (i, _) = profile.index_at(mid);
        profile.pieces.push(StairPiece {
            lo: w[0],
            hi: w[1],
            i,
        });
    }
    Ok(profile)
}
