//! Random instance generators and property checks shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use maslovkit::index::{interval_index, maslov_index_with, IndexOptions};
use maslovkit::symplectic::{
    fundamental_solution, fundamental_solution_on, CoefficientPath, Mat, SymplecticMatrix,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_sym(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Mat {
    let a = Mat::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0) * scale);
    (&a + a.transpose()) * 0.5
}

/// `B(t) = D + cos(ωt)S₁ + sin(ωt)S₂` with `ω = 2π/τ`.
pub fn random_path(
    rng: &mut ChaCha8Rng,
    n: usize,
    tau: f64,
    lo: f64,
    hi: f64,
    pert: f64,
) -> CoefficientPath {
    let d = 2 * n;
    let b0 = Mat::from_diagonal(&nalgebra::DVector::from_fn(d, |_, _| {
        rng.random_range(lo..hi)
    }));
    let s1 = random_sym(rng, d, pert);
    let s2 = random_sym(rng, d, pert);
    let w = 2.0 * PI / tau;
    CoefficientPath::from_fn(n, tau, move |t| {
        &b0 + &s1 * (w * t).cos() + &s2 * (w * t).sin()
    })
}

/// Reversible `B(t) = S₀ + cos(ωt)S₁ + sin(ωt)A₁`: block-diagonal `Sᵢ`, off-diagonal-block `A₁`.
pub fn random_reversible(rng: &mut ChaCha8Rng, n: usize, tau: f64) -> CoefficientPath {
    let d = 2 * n;
    let split = |m: Mat, diag: bool| {
        Mat::from_fn(d, d, |i, j| {
            if ((i < n) == (j < n)) == diag {
                m[(i, j)]
            } else {
                0.0
            }
        })
    };
    let s0 =
        split(random_sym(rng, d, 1.5), true) + Mat::identity(d, d) * rng.random_range(-1.0..3.0);
    let s1 = split(random_sym(rng, d, 0.6), true);
    let a1 = split(random_sym(rng, d, 0.6), false);
    let w = 2.0 * PI / tau;
    CoefficientPath::from_fn(n, tau, move |t| {
        &s0 + &s1 * (w * t).cos() + &a1 * (w * t).sin()
    })
    .with_tags(true, true)
}

pub fn min_eigenvalue(b: &CoefficientPath, samples: usize) -> f64 {
    (0..=samples)
        .map(|q| {
            b.eval(b.tau() * q as f64 / samples as f64)
                .symmetric_eigenvalues()
                .min()
        })
        .fold(f64::INFINITY, f64::min)
}

/// `φ = diag(A, A^{−T})·[[I, S], [0, I]]` with random invertible `A` and symmetric `S`.
pub fn random_symplectic(rng: &mut ChaCha8Rng, n: usize) -> SymplecticMatrix {
    let d = 2 * n;
    let a = Mat::identity(n, n) + Mat::from_fn(n, n, |_, _| rng.random_range(-0.4..0.4));
    let ait = a.clone().try_inverse().unwrap().transpose();
    let s = random_sym(rng, n, 0.8);
    let mut u = Mat::zeros(d, d);
    u.view_mut((0, 0), (n, n)).copy_from(&a);
    u.view_mut((n, n), (n, n)).copy_from(&ait);
    let mut l = Mat::identity(d, d);
    l.view_mut((0, n), (n, n)).copy_from(&s);
    SymplecticMatrix::new(u * l, 1e-9).unwrap()
}

fn tau_choice(rng: &mut ChaCha8Rng) -> f64 {
    [1.0, PI, 2.0 * PI, 5.0][rng.random_range(0..4)]
}

pub enum Outcome {
    Held,
    Violated(String),
    /// Instance too close to a degeneracy to test.
    Skipped,
}

/// `i(φγφ⁻¹, [a, τ]) = i(γ, [a, τ])` and `i_τ(φγφ⁻¹) = i_τ(γ)`.
pub fn naturality(rng: &mut ChaCha8Rng, steps: usize) -> Outcome {
    let opts = IndexOptions::default();
    let n = rng.random_range(1..=2);
    let tau = tau_choice(rng);
    let b = random_path(rng, n, tau, -2.0, 4.0, 0.6);
    let phi = random_symplectic(rng, n);
    let c = b.conjugated(&phi);
    let id = SymplecticMatrix::identity(n);
    let (Ok(g), Ok(h)) = (
        fundamental_solution(&b, steps),
        fundamental_solution(&c, steps),
    ) else {
        return Outcome::Skipped;
    };
    let (Ok(rg), Ok(rh)) = (
        maslov_index_with(&g, &id, &opts),
        maslov_index_with(&h, &id, &opts),
    ) else {
        return Outcome::Skipped;
    };
    if rg.margin < 1e-5 {
        return Outcome::Skipped;
    }
    if (rg.i, rg.nu) != (rh.i, rh.nu) {
        return Outcome::Violated(format!("i_τ: {} vs {} (n={n}, τ={tau})", rg.i, rh.i));
    }
    let a = tau / 3.0;
    let d = 2 * n;
    let run = |coef: &CoefficientPath| -> Option<i64> {
        let base = fundamental_solution_on(coef, 0.0, a, &Mat::identity(d, d), steps / 3).ok()?;
        let rest = fundamental_solution_on(coef, a, tau, base.monodromy(), steps).ok()?;
        interval_index(&rest, &base, &opts).ok()
    };
    match (run(&b), run(&c)) {
        (Some(x), Some(y)) if x == y => Outcome::Held,
        (Some(x), Some(y)) => {
            Outcome::Violated(format!("i(·,[τ/3,τ]): {x} vs {y} (n={n}, τ={tau})"))
        }
        _ => Outcome::Skipped,
    }
}

/// `B + sεB₁`, `s ∈ [0, 1]`: when `ν` is the same at every sampled `s`, `i` agrees at both ends.
pub fn homotopy(rng: &mut ChaCha8Rng, steps: usize) -> Outcome {
    let opts = IndexOptions::default();
    let n = rng.random_range(1..=2);
    let tau = tau_choice(rng);
    let m = match rng.random_range(0..3) {
        0 => SymplecticMatrix::identity(n),
        1 => SymplecticMatrix::rotation(n, rng.random_range(-3.0..3.0)),
        _ => SymplecticMatrix::diag_kappa(n, rng.random_range(0..n)).unwrap(),
    };
    let b = random_path(rng, n, tau, -2.0, 4.0, 0.6);
    let b1 = random_path(rng, n, tau, -1.0, 1.0, 1.0);
    let eps = rng.random_range(1e-3..2e-2);
    let mut seen = Vec::new();
    for s in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let (bb, bb1) = (b.clone(), b1.clone());
        let c = CoefficientPath::from_fn(n, tau, move |t| bb.eval(t) + bb1.eval(t) * (s * eps));
        let Ok(g) = fundamental_solution(&c, steps) else {
            return Outcome::Skipped;
        };
        let Ok(r) = maslov_index_with(&g, &m, &opts) else {
            return Outcome::Skipped;
        };
        // ν must stay constant between samples too; keep the end well away from Graph(M).
        if r.margin < 0.05 {
            return Outcome::Skipped;
        }
        seen.push((r.i, r.nu));
    }
    if seen.iter().any(|x| x.1 != seen[0].1) {
        return Outcome::Skipped;
    }
    if seen.iter().all(|x| x.0 == seen[0].0) {
        Outcome::Held
    } else {
        Outcome::Violated(format!(
            "indices along the homotopy: {seen:?} (n={n}, τ={tau}, ε={eps:.3e})"
        ))
    }
}
