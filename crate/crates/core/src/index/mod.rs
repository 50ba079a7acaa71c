//! Rotation lifts, Conley–Zehnder indices and Maslov-type indices `(i_{τ,M}, ν_{τ,M})`.
//!
//! `i_τ` is `−n` plus a signed crossing count against `Ker(γ(t) − I)`: the start
//! contributes the positive inertia of its crossing form, interior crossings their
//! signature, the end minus its negative inertia. For general `M` the path is
//! prolonged by the polar geodesic `ξ` to `M⁻¹` and the rotation of `ξ` is removed.

pub mod crossing;
mod staircase;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::{
    connect_to, symplectic_inverse, unitary_part_raw, Mat, PathSource, SymplecticMatrix,
    SymplecticPath,
};
pub use crossing::{
    Catenation, ConstantIdentity, CrossingKind, CrossingRecord, ExpPath, Perturbed, RightMul,
    ScanOptions, StartRule, Target,
};
pub use staircase::{staircase_profile, StairPiece, StaircaseProfile};

/// Tunables for index computation.
#[derive(Debug, Clone)]
pub struct IndexOptions {
    pub scan: ScanOptions,
    /// Samples of the connecting path `ξ`.
    pub xi_samples: usize,
    /// Rotation amounts tried when a crossing is degenerate.
    pub perturbations: Vec<f64>,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            scan: ScanOptions::default(),
            xi_samples: 512,
            perturbations: vec![1e-4, 1e-3, 1e-2],
        }
    }
}

impl IndexOptions {
    pub fn with_tol_kernel(mut self, tol: f64) -> Self {
        self.scan.tol_kernel = tol;
        self
    }
}

/// Kernel of `γ(τ) − M`.
#[derive(Debug, Clone)]
pub struct NullityReport {
    pub nu: usize,
    /// Orthonormal basis of the numerical kernel, one vector per column.
    pub basis: Mat,
    /// Smallest singular-value ratio outside the kernel.
    pub margin: f64,
}

/// Singular values of `γ(τ) − M` below `tol·(‖γ(τ)‖ + ‖M‖)` span the kernel.
pub fn nullity_rel(gamma_end: &Mat, m: &SymplecticMatrix, tol: f64) -> Result<NullityReport> {
    if gamma_end.shape() != m.matrix().shape() {
        return Err(Error::Dimension(
            "path and boundary matrix differ in size".into(),
        ));
    }
    let k = crossing::kernel_of(&Target::Graph(m.matrix().clone()), gamma_end, tol);
    Ok(NullityReport {
        nu: k.basis.ncols(),
        basis: k.basis,
        margin: k.margin,
    })
}

/// Continuous phase `Δ(t)` with `det 𝔲(γ(t)) = exp(iΔ(t))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotationLift {
    pub times: Vec<f64>,
    pub delta: Vec<f64>,
    pub total: f64,
    pub max_step: f64,
}

fn det_phase(g: &Mat) -> f64 {
    let u = unitary_part_raw(g);
    u.determinant().arg()
}

fn wrap(x: f64) -> f64 {
    let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Unwrapped phase of `det 𝔲` along the path, bisecting any grid step whose phase
/// increment reaches `π/4`.
pub fn rotation_lift(path: &dyn PathSource) -> Result<RotationLift> {
    const MAX_DEPTH: usize = 24;
    let grid = path.grid();
    let vals = path.grid_values();
    let mut times = vec![grid[0]];
    let mut delta = vec![det_phase(&vals[0])];
    let mut max_step = 0.0f64;

    fn refine(
        path: &dyn PathSource,
        t0: f64,
        p0: f64,
        t1: f64,
        p1: f64,
        depth: usize,
        out: &mut Vec<(f64, f64)>,
        max_step: &mut f64,
    ) -> Result<()> {
        let d = wrap(p1 - p0);
        if d.abs() < PI / 4.0 {
            *max_step = max_step.max(d.abs());
            out.push((t1, d));
            return Ok(());
        }
        if depth == 0 {
            return Err(Error::RefinementBudget { max_step: d.abs() });
        }
        let tm = 0.5 * (t0 + t1);
        let pm = det_phase(&path.eval(tm));
        refine(path, t0, p0, tm, pm, depth - 1, out, max_step)?;
        refine(path, tm, pm, t1, p1, depth - 1, out, max_step)
    }

    let mut phase_prev = delta[0];
    for k in 0..grid.len() - 1 {
        let p1 = det_phase(&vals[k + 1]);
        let mut steps = Vec::new();
        refine(
            path,
            grid[k],
            phase_prev,
            grid[k + 1],
            p1,
            MAX_DEPTH,
            &mut steps,
            &mut max_step,
        )?;
        for (t, d) in steps {
            let last = *delta.last().unwrap();
            times.push(t);
            delta.push(last + d);
        }
        phase_prev = p1;
    }
    let total = delta.last().unwrap() - delta[0];
    Ok(RotationLift {
        times,
        delta,
        total,
        max_step,
    })
}

/// Maslov-type index pair with the crossing data behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub i: i64,
    pub nu: usize,
    pub crossings: Vec<CrossingRecord>,
    /// `μ_CZ = i_τ + ν/2`, filled when `M = I`.
    pub cz: Option<f64>,
    /// Smallest singular-value ratio of `γ(τ) − M` outside its kernel.
    pub margin: f64,
    /// Total rotation `Δ_ξ` of the connecting path (0 when `M = I`).
    pub delta_xi: f64,
    /// Fractional part removed by the outer bracket in the definition.
    pub bracket_fraction: f64,
    /// Rotation used to resolve a degenerate crossing, if any.
    pub perturbation: Option<f64>,
}

/// Signed crossing count against `target`, retrying with small rotations
/// `γ(t)exp(−ε(t−a)J/T)` when a crossing form is degenerate.
pub(crate) fn count_with_fallback(
    path: &dyn PathSource,
    target: &Target,
    rule: StartRule,
    opts: &IndexOptions,
) -> Result<(i64, Vec<CrossingRecord>, Option<f64>)> {
    match crossing::scan(path, target, rule, &opts.scan) {
        Ok(s) => Ok((s.count, s.records, None)),
        Err(Error::UnresolvedCrossing { t, reason }) => {
            let (a, b) = path.span();
            for &eps in &opts.perturbations {
                let p = Perturbed {
                    base: path,
                    alpha: eps / (b - a),
                };
                if let Ok(s) = crossing::scan(&p, target, rule, &opts.scan) {
                    log::debug!("crossing near t = {t} resolved by rotation {eps:e} ({reason})");
                    return Ok((s.count, s.records, Some(eps)));
                }
            }
            Err(Error::UnresolvedCrossing { t, reason })
        }
        Err(e) => Err(e),
    }
}

/// `i_τ = −n + crossing count` for a path starting at `I`.
fn i_tau(
    path: &dyn PathSource,
    opts: &IndexOptions,
) -> Result<(i64, Vec<CrossingRecord>, Option<f64>)> {
    let dim = path.dim();
    let target = Target::Graph(Mat::identity(dim, dim));
    let (c, rec, p) = count_with_fallback(path, &target, StartRule::PlusPositive, opts)?;
    Ok((c - (dim / 2) as i64, rec, p))
}

/// Applies the outer bracket, snapping values within 1e-9 of an integer.
fn bracket(value: f64) -> (i64, f64) {
    let r = value.round();
    if (value - r).abs() <= 1e-9 {
        return (r as i64, 0.0);
    }
    let f = value.floor();
    (f as i64, value - f)
}

pub fn maslov_index(gamma: &SymplecticPath, m: &SymplecticMatrix) -> Result<IndexReport> {
    maslov_index_with(gamma, m, &IndexOptions::default())
}

/// `(i_{τ,M}, ν_{τ,M})` of a path with `γ(start) = I`.
pub fn maslov_index_with(
    gamma: &dyn PathSource,
    m: &SymplecticMatrix,
    opts: &IndexOptions,
) -> Result<IndexReport> {
    let dim = gamma.dim();
    if m.matrix().nrows() != dim {
        return Err(Error::Dimension(
            "path and boundary matrix differ in size".into(),
        ));
    }
    let (a, b) = gamma.span();
    let start = gamma.eval(a);
    let gap = (&start - Mat::identity(dim, dim)).amax();
    if gap > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "path does not start at I (gap {gap:.3e})"
        )));
    }
    let end = gamma.eval(b);
    let null = nullity_rel(&end, m, opts.scan.tol_kernel)?;

    if m.is_identity() {
        let (i, crossings, perturbation) = i_tau(gamma, opts)?;
        return Ok(IndexReport {
            i,
            nu: null.nu,
            crossings,
            cz: Some(i as f64 + 0.5 * null.nu as f64),
            margin: null.margin,
            delta_xi: 0.0,
            bracket_fraction: 0.0,
            perturbation,
        });
    }

    let minv = m.inverse();
    let xi = connect_to(&minv, opts.xi_samples)?;
    let tail = RightMul {
        base: gamma,
        right: symplectic_inverse(m.matrix()),
    };
    let product = Catenation::new(vec![&xi as &dyn PathSource, &tail]);
    let (itau, crossings, perturbation) = i_tau(&product, opts)?;
    let lift = rotation_lift(&xi)?;
    let value = itau as f64 - lift.total / PI;
    let (i, fraction) = bracket(value);
    if fraction > 1e-6 {
        log::warn!("outer bracket truncates {value:.9} to {i} (fractional part {fraction:.3e})");
    }
    // Report crossings on the original time axis; ξ occupies [0, 1] of the product.
    let shift = 1.0 - a;
    let crossings = crossings
        .into_iter()
        .filter(|c| c.t >= 1.0 - 1e-12)
        .map(|mut c| {
            c.t -= shift;
            c
        })
        .collect();
    Ok(IndexReport {
        i,
        nu: null.nu,
        crossings,
        cz: None,
        margin: null.margin,
        delta_xi: lift.total,
        bracket_fraction: fraction,
        perturbation,
    })
}

/// `i_{τ,M}` of the constant path `I`, the reference value of every staircase.
pub fn base_index(m: &SymplecticMatrix, opts: &IndexOptions) -> Result<i64> {
    let c = ConstantIdentity {
        dim: 2 * m.n(),
        samples: 64,
    };
    Ok(maslov_index_with(&c, m, opts)?.i)
}

/// `μ_CZ(γ) = i_τ(γ) + ½ dim Ker(γ(τ) − I)`.
pub fn conley_zehnder(gamma: &SymplecticPath) -> Result<f64> {
    let r = maslov_index(gamma, &SymplecticMatrix::identity(gamma.n()))?;
    Ok(r.i as f64 + 0.5 * r.nu as f64)
}

/// `i(γ, [a, b]) = i₁(γ ∗ β) − i₁(β)` for a path on `[a, b]` and a basepath from `I`
/// to `γ(a)`.
pub fn interval_index(
    gamma: &SymplecticPath,
    basepath: &SymplecticPath,
    opts: &IndexOptions,
) -> Result<i64> {
    let gap = (basepath.monodromy() - gamma.start()).amax();
    if gap > 1e-8 * (1.0 + gamma.start().amax()) {
        return Err(Error::MismatchedJunction { gap });
    }
    let phi = Catenation::new(vec![basepath as &dyn PathSource, gamma]);
    let (i_phi, _, _) = i_tau(&phi, opts)?;
    let (i_beta, _, _) = i_tau(basepath, opts)?;
    Ok(i_phi - i_beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{
        block_diag, fundamental_solution, fundamental_solution_on, rotation, CoefficientPath,
    };

    fn rot_path(n: usize, rho: f64, tau: f64, steps: usize) -> SymplecticPath {
        fundamental_solution(&CoefficientPath::scalar(n, rho, tau), steps).unwrap()
    }

    #[test]
    fn nullity_examples() {
        let id = SymplecticMatrix::identity(1);
        let m = SymplecticMatrix::rotation(1, 0.4);
        assert_eq!(nullity_rel(m.matrix(), &m, 1e-8).unwrap().nu, 2);
        assert_eq!(
            nullity_rel(&rotation(1, 2.0 * PI), &id, 1e-8).unwrap().nu,
            2
        );
        assert_eq!(nullity_rel(&rotation(1, PI), &id, 1e-8).unwrap().nu, 0);
    }

    #[test]
    fn lift_examples() {
        let l = rotation_lift(&rot_path(1, 1.0, 2.0 * PI, 512)).unwrap();
        assert!((l.total - 2.0 * PI).abs() < 1e-9);
        let l = rotation_lift(&rot_path(2, 0.0, 1.0, 64)).unwrap();
        assert_eq!(l.total, 0.0);
        let b = CoefficientPath::constant(block_diag(&[1.0, 2.5]), 3.0).unwrap();
        let l = rotation_lift(&fundamental_solution(&b, 512).unwrap()).unwrap();
        assert!((l.total - 3.5 * 3.0).abs() < 1e-9);
        assert!(l.max_step < PI / 4.0);
    }

    #[test]
    fn index_examples() {
        let id = SymplecticMatrix::identity(1);
        let r = maslov_index(&rot_path(1, 1.0, 2.0 * PI, 1024), &id).unwrap();
        assert_eq!((r.i, r.nu), (1, 2));
        let r = maslov_index(&rot_path(1, 1.0, PI, 1024), &id).unwrap();
        assert_eq!((r.i, r.nu), (1, 0));
        let id2 = SymplecticMatrix::identity(2);
        let r = maslov_index(&rot_path(2, 0.0, 1.0, 64), &id2).unwrap();
        assert_eq!((r.i, r.nu), (-2, 4));
    }

    #[test]
    fn negative_rotation_counts_endpoint() {
        let id = SymplecticMatrix::identity(1);
        let r = maslov_index(&rot_path(1, -1.0, 2.0 * PI, 1024), &id).unwrap();
        assert_eq!((r.i, r.nu), (-3, 2));
    }

    #[test]
    fn cz_examples() {
        assert_eq!(
            conley_zehnder(&rot_path(1, 1.0, 2.0 * PI, 1024)).unwrap(),
            2.0
        );
        assert_eq!(conley_zehnder(&rot_path(1, 1.0, PI, 1024)).unwrap(), 1.0);
        assert_eq!(conley_zehnder(&rot_path(1, 0.0, 1.0, 64)).unwrap(), 0.0);
    }

    #[test]
    fn base_values() {
        let o = IndexOptions::default();
        assert_eq!(base_index(&SymplecticMatrix::identity(1), &o).unwrap(), -1);
        assert_eq!(base_index(&SymplecticMatrix::identity(2), &o).unwrap(), -2);
        assert_eq!(
            base_index(&SymplecticMatrix::rotation(1, PI), &o).unwrap(),
            0
        );
        assert_eq!(
            base_index(&SymplecticMatrix::rotation(1, 0.5 * PI), &o).unwrap(),
            -1
        );
        assert_eq!(
            base_index(&SymplecticMatrix::rotation(1, 1.5 * PI), &o).unwrap(),
            0
        );
    }

    #[test]
    fn quarter_rotation_bracket_is_logged_fraction() {
        let o = IndexOptions::default();
        let m = SymplecticMatrix::rotation(1, 0.5 * PI);
        let c = ConstantIdentity {
            dim: 2,
            samples: 64,
        };
        let r = maslov_index_with(&c, &m, &o).unwrap();
        assert!((r.bracket_fraction - 0.5).abs() < 1e-9);
    }

    #[test]
    fn interval_index_examples() {
        let o = IndexOptions::default();
        let full = rot_path(1, 1.0, 2.0 * PI, 1024);
        let constant = rot_path(1, 0.0, 1.0, 64);
        // With the literal difference i₁(φ) − i₁(β) and a constant basepath,
        // i₁(β) = −n, so the value is i_τ(γ) + n.
        assert_eq!(interval_index(&full, &constant, &o).unwrap(), 1 + 1);

        let b = CoefficientPath::scalar(1, 1.0, 2.0 * PI);
        let quarter =
            fundamental_solution_on(&b, 0.0, 0.5 * PI, &Mat::identity(2, 2), 256).unwrap();
        let rest =
            fundamental_solution_on(&b, 0.5 * PI, 2.0 * PI, quarter.monodromy(), 1024).unwrap();
        assert_eq!(interval_index(&rest, &quarter, &o).unwrap(), 0);

        let still = fundamental_solution_on(
            &CoefficientPath::scalar(1, 0.0, 1.0),
            0.0,
            1.0,
            quarter.monodromy(),
            64,
        )
        .unwrap();
        assert_eq!(interval_index(&still, &quarter, &o).unwrap(), 0);

        let wrong = rot_path(1, 0.3, 1.0, 64);
        assert!(matches!(
            interval_index(&rest, &wrong, &o),
            Err(Error::MismatchedJunction { .. })
        ));
    }
}
