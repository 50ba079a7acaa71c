//! Parametrized Hamiltonians `H(λ, t, z)` with a known trivial branch, and the
//! built-in families used by the scanner, the dual functional and the shooting solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::{
    block_diag, j_matrix, reversor, CoefficientPath, Mat, SymplecticMatrix, Vector,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyFlags {
    /// `H(λ, t + τ, Mz) = H(λ, t, z)`.
    pub m_periodic: bool,
    /// `H(λ, −t, Nz) = H(λ, t, z)`.
    pub reversible: bool,
    pub autonomous: bool,
    /// `H(λ, t, −z) = H(λ, t, z)`.
    pub even: bool,
}

pub trait HamiltonianFamily: Send + Sync {
    fn n(&self) -> usize;
    fn tau(&self) -> f64;
    fn boundary(&self) -> &SymplecticMatrix;
    fn lambda_range(&self) -> (f64, f64);
    fn flags(&self) -> FamilyFlags;
    fn value(&self, lambda: f64, t: f64, z: &Vector) -> f64;
    fn gradient(&self, lambda: f64, t: f64, z: &Vector) -> Vector;
    fn hessian(&self, lambda: f64, t: f64, z: &Vector) -> Mat;

    /// Trivial branch `u_λ(t)`; the origin unless overridden.
    fn branch(&self, _lambda: f64, _t: f64) -> Vector {
        Vector::zeros(2 * self.n())
    }

    /// The branch is an equilibrium, independent of `t`.
    fn branch_is_stationary(&self) -> bool {
        true
    }

    fn dim(&self) -> usize {
        2 * self.n()
    }

    /// Exact `B_λ`, when the family can provide one; otherwise it is tabulated.
    fn linearization_path(&self, _lambda: f64) -> Option<CoefficientPath> {
        None
    }
}

/// `B_λ(t) = H''_{λ,t}(u_λ(t))`, the linearization along the trivial branch.
pub fn linearization(f: &dyn HamiltonianFamily, lambda: f64) -> CoefficientPath {
    if let Some(b) = f.linearization_path(lambda) {
        return b;
    }
    let flags = f.flags();
    if flags.autonomous && f.branch_is_stationary() {
        let h = f.hessian(lambda, 0.0, &f.branch(lambda, 0.0));
        if let Ok(c) = CoefficientPath::constant(h, f.tau()) {
            return c;
        }
    }
    let n = f.n();
    let tau = f.tau();
    // A family cannot be captured by reference inside the coefficient, so sample a
    // fine table and interpolate linearly between neighbours.
    let samples = 4096usize;
    let table: Vec<Mat> = (0..=samples)
        .map(|k| {
            let t = tau * k as f64 / samples as f64;
            let h = f.hessian(lambda, t, &f.branch(lambda, t));
            (&h + h.transpose()) * 0.5
        })
        .collect();
    CoefficientPath::from_fn(n, tau, move |t| {
        let x = (t / tau * samples as f64).clamp(0.0, samples as f64);
        let k = (x.floor() as usize).min(samples - 1);
        let s = x - k as f64;
        &table[k] * (1.0 - s) + &table[k + 1] * s
    })
    .with_tags(flags.m_periodic, flags.reversible)
}

/// Classical RK4 for `ż = J∇H_λ(t, z)` from `t0` over `span` in `steps` equal steps.
pub fn hamiltonian_rk4(
    f: &dyn HamiltonianFamily,
    lambda: f64,
    t0: f64,
    z: &Vector,
    span: f64,
    steps: usize,
) -> Vector {
    let j = j_matrix(f.n());
    let rhs = |t: f64, z: &Vector| &j * f.gradient(lambda, t, z);
    let h = span / steps as f64;
    let mut z = z.clone();
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1 = rhs(t, &z);
        let k2 = rhs(t + 0.5 * h, &(&z + &k1 * (0.5 * h)));
        let k3 = rhs(t + 0.5 * h, &(&z + &k2 * (0.5 * h)));
        let k4 = rhs(t + h, &(&z + &k3 * h));
        z += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    }
    z
}

/// `H = ½⟨(A₀ + λA₁)z, z⟩ + (c/4)|z|⁴`, autonomous with the origin as trivial branch.
#[derive(Debug, Clone)]
pub struct QuadraticQuartic {
    pub a0: Mat,
    pub a1: Mat,
    pub quartic: f64,
    tau: f64,
    boundary: SymplecticMatrix,
    range: (f64, f64),
    flags: FamilyFlags,
}

impl QuadraticQuartic {
    pub fn new(
        a0: Mat,
        a1: Mat,
        quartic: f64,
        tau: f64,
        boundary: SymplecticMatrix,
        range: (f64, f64),
    ) -> Result<Self> {
        let d = a0.nrows();
        if a0.shape() != (d, d)
            || a1.shape() != (d, d)
            || d % 2 != 0
            || d != boundary.matrix().nrows()
        {
            return Err(Error::Dimension(
                "coefficient matrices and boundary must be 2n×2n".into(),
            ));
        }
        for a in [&a0, &a1] {
            let asym = (a - a.transpose()).amax();
            if asym > 1e-12 * a.amax().max(1.0) {
                return Err(Error::NonSymmetric { t: 0.0, asym });
            }
        }
        if !(tau > 0.0) || !(range.1 >= range.0) || !quartic.is_finite() {
            return Err(Error::InvalidArgument(
                "need τ > 0, a nonempty λ range and finite coefficients".into(),
            ));
        }
        let nn = reversor(d / 2);
        let m = boundary.matrix();
        // Quadratic parts invariant under z ↦ Mz; the quartic term needs |Mz| = |z|.
        let inv = |a: &Mat| (m.transpose() * a * m - a).amax() <= 1e-12 * a.amax().max(1.0);
        let orth = (m.transpose() * m - Mat::identity(d, d)).amax() <= 1e-12;
        let flags = FamilyFlags {
            m_periodic: inv(&a0) && inv(&a1) && (quartic == 0.0 || orth),
            reversible: [&a0, &a1]
                .iter()
                .all(|a| (&nn * *a * &nn - *a).amax() <= 1e-14 * a.amax().max(1.0)),
            autonomous: true,
            even: true,
        };
        Ok(Self {
            a0,
            a1,
            quartic,
            tau,
            boundary,
            range,
            flags,
        })
    }

    /// `H = ½⟨(A₀ + λA₁)z, z⟩`.
    pub fn linear(
        a0: Mat,
        a1: Mat,
        tau: f64,
        boundary: SymplecticMatrix,
        range: (f64, f64),
    ) -> Result<Self> {
        Self::new(a0, a1, 0.0, tau, boundary, range)
    }

    /// `H = λ Σ ρᵢ(xᵢ² + yᵢ²)/2`.
    pub fn rotation_blocks(
        rho: &[f64],
        tau: f64,
        boundary: SymplecticMatrix,
        range: (f64, f64),
    ) -> Result<Self> {
        let d = 2 * rho.len();
        Self::new(Mat::zeros(d, d), block_diag(rho), 0.0, tau, boundary, range)
    }

    /// `H = λ|z|²/2 + c|z|⁴/4`.
    pub fn scalar_quartic(
        n: usize,
        c: f64,
        tau: f64,
        boundary: SymplecticMatrix,
        range: (f64, f64),
    ) -> Result<Self> {
        Self::new(
            Mat::zeros(2 * n, 2 * n),
            Mat::identity(2 * n, 2 * n),
            c,
            tau,
            boundary,
            range,
        )
    }

    fn quad(&self, lambda: f64) -> Mat {
        &self.a0 + &self.a1 * lambda
    }
}

impl HamiltonianFamily for QuadraticQuartic {
    fn n(&self) -> usize {
        self.a0.nrows() / 2
    }

    fn tau(&self) -> f64 {
        self.tau
    }

    fn boundary(&self) -> &SymplecticMatrix {
        &self.boundary
    }

    fn lambda_range(&self) -> (f64, f64) {
        self.range
    }

    fn flags(&self) -> FamilyFlags {
        self.flags
    }

    fn value(&self, lambda: f64, _t: f64, z: &Vector) -> f64 {
        let r2 = z.norm_squared();
        0.5 * z.dot(&(self.quad(lambda) * z)) + 0.25 * self.quartic * r2 * r2
    }

    fn gradient(&self, lambda: f64, _t: f64, z: &Vector) -> Vector {
        self.quad(lambda) * z + z * (self.quartic * z.norm_squared())
    }

    fn hessian(&self, lambda: f64, _t: f64, z: &Vector) -> Mat {
        let d = z.len();
        self.quad(lambda)
            + (Mat::identity(d, d) * z.norm_squared() + z * z.transpose() * 2.0) * self.quartic
    }
}

/// One monomial `c·λ^p·Π zᵢ^{eᵢ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coeff: f64,
    #[serde(default)]
    pub lambda_power: u32,
    pub exponents: Vec<u32>,
}

impl Monomial {
    fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    fn eval_partial(&self, lambda: f64, z: &Vector, d: &[usize]) -> f64 {
        let mut e = self.exponents.clone();
        let mut c = self.coeff * lambda.powi(self.lambda_power as i32);
        for &i in d {
            if e[i] == 0 {
                return 0.0;
            }
            c *= e[i] as f64;
            e[i] -= 1;
        }
        e.iter()
            .enumerate()
            .fold(c, |acc, (i, &k)| acc * z[i].powi(k as i32))
    }
}

/// Autonomous polynomial Hamiltonian of degree at most 6 with the origin as branch.
#[derive(Debug, Clone)]
pub struct PolynomialFamily {
    pub terms: Vec<Monomial>,
    n: usize,
    tau: f64,
    boundary: SymplecticMatrix,
    range: (f64, f64),
    flags: FamilyFlags,
}

pub const MAX_POLYNOMIAL_DEGREE: u32 = 6;

impl PolynomialFamily {
    pub fn new(
        terms: Vec<Monomial>,
        tau: f64,
        boundary: SymplecticMatrix,
        range: (f64, f64),
    ) -> Result<Self> {
        let n = boundary.n();
        for (k, t) in terms.iter().enumerate() {
            if t.exponents.len() != 2 * n {
                return Err(Error::Dimension(format!(
                    "term {k} has {} exponents, need {}",
                    t.exponents.len(),
                    2 * n
                )));
            }
            if t.degree() > MAX_POLYNOMIAL_DEGREE {
                return Err(Error::InvalidArgument(format!(
                    "term {k} has degree {} > 6",
                    t.degree()
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "term {k} has a non-finite coefficient"
                )));
            }
        }
        if terms.iter().any(|t| t.degree() < 2 && t.coeff != 0.0) {
            return Err(Error::InvalidArgument(
                "terms of degree below 2 move the equilibrium away from the origin".into(),
            ));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!("need τ > 0, got {tau}")));
        }
        let mut out = Self {
            terms,
            n,
            tau,
            boundary,
            range,
            flags: FamilyFlags::default(),
        };
        out.flags = FamilyFlags {
            autonomous: true,
            even: out.terms.iter().all(|t| t.degree() % 2 == 0),
            ..FamilyFlags::default()
        };
        out.flags.m_periodic = sampled_flag(&out, |f, l, t, z| {
            let mz = f.boundary().matrix() * z;
            (f.value(l, t + f.tau(), &mz), f.value(l, t, z))
        });
        out.flags.reversible = sampled_flag(&out, |f, l, t, z| {
            let nz = reversor(f.n()) * z;
            (f.value(l, -t, &nz), f.value(l, t, z))
        });
        Ok(out)
    }
}

impl HamiltonianFamily for PolynomialFamily {
    fn n(&self) -> usize {
        self.n
    }

    fn tau(&self) -> f64 {
        self.tau
    }

    fn boundary(&self) -> &SymplecticMatrix {
        &self.boundary
    }

    fn lambda_range(&self) -> (f64, f64) {
        self.range
    }

    fn flags(&self) -> FamilyFlags {
        self.flags
    }

    fn value(&self, lambda: f64, _t: f64, z: &Vector) -> f64 {
        self.terms
            .iter()
            .map(|m| m.eval_partial(lambda, z, &[]))
            .sum()
    }

    fn gradient(&self, lambda: f64, _t: f64, z: &Vector) -> Vector {
        Vector::from_fn(2 * self.n, |i, _| {
            self.terms
                .iter()
                .map(|m| m.eval_partial(lambda, z, &[i]))
                .sum()
        })
    }

    fn hessian(&self, lambda: f64, _t: f64, z: &Vector) -> Mat {
        let d = 2 * self.n;
        Mat::from_fn(d, d, |i, j| {
            self.terms
                .iter()
                .map(|m| m.eval_partial(lambda, z, &[i, j]))
                .sum()
        })
    }
}

/// Deterministic sample points `(λ, t, z)` in the family's box, `|z| ≤ radius`.
fn sample_points(f: &dyn HamiltonianFamily, count: usize, radius: f64) -> Vec<(f64, f64, Vector)> {
    let (lo, hi) = f.lambda_range();
    let d = f.dim();
    // Weyl sequence on irrational rotations: reproducible without a random source.
    let frac = |k: usize, a: f64| (k as f64 * a).fract();
    (1..=count)
        .map(|k| {
            let l = lo + (hi - lo) * frac(k, 0.754_877_666_246_692_7);
            let t = f.tau() * frac(k, 0.569_840_290_998_053_3);
            let z = Vector::from_fn(d, |i, _| {
                radius * (2.0 * frac(k * (i + 3), 0.618_033_988_749_894_8 + 0.1 * i as f64) - 1.0)
            });
            (l, t, z)
        })
        .collect()
}

fn sampled_flag(
    f: &dyn HamiltonianFamily,
    pair: impl Fn(&dyn HamiltonianFamily, f64, f64, &Vector) -> (f64, f64),
) -> bool {
    sample_points(f, 32, 1.0).iter().all(|(l, t, z)| {
        let (a, b) = pair(f, *l, *t, z);
        (a - b).abs() <= 1e-10 * (1.0 + b.abs())
    })
}

/// Spot checks of a family: gradient against finite differences of `H`, Hessian
/// symmetry and finite differences of the gradient, the branch equation, and the
/// declared flags.
pub fn verify_family(f: &dyn HamiltonianFamily, samples: usize) -> Result<()> {
    let d = f.dim();
    if f.boundary().matrix().nrows() != d {
        return Err(Error::Dimension(
            "boundary matrix does not match the phase space".into(),
        ));
    }
    let pts = sample_points(f, samples, 1.0);
    for (l, t, z) in &pts {
        let g = f.gradient(*l, *t, z);
        let h = f.hessian(*l, *t, z);
        let asym = (&h - h.transpose()).amax();
        if asym > 1e-10 * h.amax().max(1.0) {
            return Err(Error::NonSymmetric { t: *t, asym });
        }
        for i in 0..d {
            let eps = 1e-5 * (1.0 + z[i].abs());
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += eps;
            zm[i] -= eps;
            let fd = (f.value(*l, *t, &zp) - f.value(*l, *t, &zm)) / (2.0 * eps);
            if (fd - g[i]).abs() > 1e-5 * (1.0 + g[i].abs()) {
                return Err(Error::FlagViolation(format!(
                    "gradient component {i} at λ = {l}, t = {t}: {} vs finite difference {fd}",
                    g[i]
                )));
            }
            let hd = (f.gradient(*l, *t, &zp) - f.gradient(*l, *t, &zm)) / (2.0 * eps);
            let err = (&hd - h.column(i)).amax();
            if err > 1e-5 * (1.0 + h.amax()) {
                return Err(Error::FlagViolation(format!(
                    "Hessian column {i} at λ = {l}, t = {t} disagrees with the gradient ({err:.3e})"
                )));
            }
        }
    }
    let j = j_matrix(f.n());
    let (lo, hi) = f.lambda_range();
    for k in 0..=4 {
        let l = lo + (hi - lo) * k as f64 / 4.0;
        for q in 0..16 {
            let t = f.tau() * (q as f64 + 0.5) / 16.0;
            let e = 1e-5 * f.tau();
            let du = (f.branch(l, t + e) - f.branch(l, t - e)) / (2.0 * e);
            let u = f.branch(l, t);
            let r = (du - &j * f.gradient(l, t, &u)).amax();
            if r > 1e-8 * (1.0 + u.amax()) && r > 1e-6 {
                return Err(Error::FlagViolation(format!(
                    "branch residual {r:.3e} at λ = {l}, t = {t}"
                )));
            }
        }
    }
    let flags = f.flags();
    let nn = reversor(f.n());
    let m = f.boundary().matrix();
    for (l, t, z) in &pts {
        let h = f.value(*l, *t, z);
        let tol = 1e-10 * (1.0 + h.abs());
        if flags.m_periodic && (f.value(*l, t + f.tau(), &(m * z)) - h).abs() > tol {
            return Err(Error::FlagViolation(format!(
                "H(λ, t+τ, Mz) ≠ H(λ, t, z) at λ = {l}, t = {t}"
            )));
        }
        if flags.reversible && (f.value(*l, -t, &(&nn * z)) - h).abs() > tol {
            return Err(Error::FlagViolation(format!(
                "H(λ, −t, Nz) ≠ H(λ, t, z) at λ = {l}, t = {t}"
            )));
        }
        if flags.even && (f.value(*l, *t, &(-z)) - h).abs() > tol {
            return Err(Error::FlagViolation(format!(
                "H(λ, t, −z) ≠ H(λ, t, z) at λ = {l}, t = {t}"
            )));
        }
        if flags.autonomous && (f.value(*l, t + 0.37 * f.tau(), z) - h).abs() > tol {
            return Err(Error::FlagViolation(format!("H depends on t at λ = {l}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quartic_derivatives_and_flags() {
        let f = QuadraticQuartic::scalar_quartic(
            1,
            1.0,
            2.0 * PI,
            SymplecticMatrix::identity(1),
            (0.5, 1.5),
        )
        .unwrap();
        verify_family(&f, 40).unwrap();
        assert_eq!(
            f.flags(),
            FamilyFlags {
                m_periodic: true,
                reversible: true,
                autonomous: true,
                even: true
            }
        );
        let b = linearization(&f, 0.8);
        assert_eq!(b.constant_value().unwrap(), &(Mat::identity(2, 2) * 0.8));
    }

    #[test]
    fn polynomial_matches_quartic() {
        // λ(x² + y²)/2 + (x² + y²)²/4
        let terms = vec![
            Monomial {
                coeff: 0.5,
                lambda_power: 1,
                exponents: vec![2, 0],
            },
            Monomial {
                coeff: 0.5,
                lambda_power: 1,
                exponents: vec![0, 2],
            },
            Monomial {
                coeff: 0.25,
                lambda_power: 0,
                exponents: vec![4, 0],
            },
            Monomial {
                coeff: 0.5,
                lambda_power: 0,
                exponents: vec![2, 2],
            },
            Monomial {
                coeff: 0.25,
                lambda_power: 0,
                exponents: vec![0, 4],
            },
        ];
        let p = PolynomialFamily::new(terms, 2.0 * PI, SymplecticMatrix::identity(1), (0.5, 1.5))
            .unwrap();
        let q = QuadraticQuartic::scalar_quartic(
            1,
            1.0,
            2.0 * PI,
            SymplecticMatrix::identity(1),
            (0.5, 1.5),
        )
        .unwrap();
        verify_family(&p, 20).unwrap();
        let z = Vector::from_vec(vec![0.3, -0.7]);
        assert!((p.value(1.1, 0.0, &z) - q.value(1.1, 0.0, &z)).abs() < 1e-14);
        assert!((p.gradient(1.1, 0.0, &z) - q.gradient(1.1, 0.0, &z)).amax() < 1e-14);
        assert!((p.hessian(1.1, 0.0, &z) - q.hessian(1.1, 0.0, &z)).amax() < 1e-14);
        assert!(p.flags().even && p.flags().reversible && p.flags().m_periodic);
    }

    #[test]
    fn odd_cubic_is_not_even() {
        let terms = vec![
            Monomial {
                coeff: 1.0,
                lambda_power: 1,
                exponents: vec![2, 0],
            },
            Monomial {
                coeff: 1.0,
                lambda_power: 0,
                exponents: vec![0, 2],
            },
            Monomial {
                coeff: 0.3,
                lambda_power: 0,
                exponents: vec![3, 0],
            },
        ];
        let p =
            PolynomialFamily::new(terms, 1.0, SymplecticMatrix::identity(1), (0.0, 1.0)).unwrap();
        assert!(!p.flags().even);
        // x³ is odd under N = diag(−1, 1).
        assert!(!p.flags().reversible);
        verify_family(&p, 20).unwrap();
    }

    #[test]
    fn rejects_bad_polynomials() {
        let m = SymplecticMatrix::identity(1);
        let high = vec![Monomial {
            coeff: 1.0,
            lambda_power: 0,
            exponents: vec![4, 3],
        }];
        assert!(PolynomialFamily::new(high, 1.0, m.clone(), (0.0, 1.0)).is_err());
        let linear = vec![Monomial {
            coeff: 1.0,
            lambda_power: 0,
            exponents: vec![1, 0],
        }];
        assert!(PolynomialFamily::new(linear, 1.0, m.clone(), (0.0, 1.0)).is_err());
        let short = vec![Monomial {
            coeff: 1.0,
            lambda_power: 0,
            exponents: vec![2],
        }];
        assert!(PolynomialFamily::new(short, 1.0, m, (0.0, 1.0)).is_err());
    }

    #[test]
    fn rotated_boundary_flags() {
        let m = SymplecticMatrix::rotation(1, 0.5 * PI);
        let f = QuadraticQuartic::rotation_blocks(&[1.0], 2.0 * PI, m, (0.0, 2.0)).unwrap();
        assert!(f.flags().m_periodic);
        let a0 = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]));
        let g = QuadraticQuartic::linear(
            a0,
            Mat::identity(2, 2),
            1.0,
            SymplecticMatrix::rotation(1, 0.5 * PI),
            (0.0, 1.0),
        )
        .unwrap();
        assert!(!g.flags().m_periodic);
        verify_family(&g, 10).unwrap();
    }

    #[test]
    fn false_flag_is_caught() {
        struct Lying(QuadraticQuartic);
        impl HamiltonianFamily for Lying {
            fn n(&self) -> usize {
                1
            }
            fn tau(&self) -> f64 {
                1.0
            }
            fn boundary(&self) -> &SymplecticMatrix {
                self.0.boundary()
            }
            fn lambda_range(&self) -> (f64, f64) {
                (0.0, 1.0)
            }
            fn flags(&self) -> FamilyFlags {
                FamilyFlags {
                    even: true,
                    ..self.0.flags()
                }
            }
            fn value(&self, l: f64, t: f64, z: &Vector) -> f64 {
                self.0.value(l, t, z) + z[0].powi(3)
            }
            fn gradient(&self, l: f64, t: f64, z: &Vector) -> Vector {
                let mut g = self.0.gradient(l, t, z);
                g[0] += 3.0 * z[0] * z[0];
                g
            }
            fn hessian(&self, l: f64, t: f64, z: &Vector) -> Mat {
                let mut h = self.0.hessian(l, t, z);
                h[(0, 0)] += 6.0 * z[0];
                h
            }
        }
        let base = QuadraticQuartic::scalar_quartic(
            1,
            0.0,
            1.0,
            SymplecticMatrix::identity(1),
            (0.0, 1.0),
        )
        .unwrap();
        assert!(matches!(
            verify_family(&Lying(base), 10),
            Err(Error::FlagViolation(_))
        ));
    }
}
