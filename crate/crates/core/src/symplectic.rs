//! Small-matrix symplectic linear algebra and integration of linear
//! Hamiltonian systems `Z' = J B(t) Z`.
//!
//! Conventions: `J = [[0, -I], [I, 0]]`, so `exp(θJ) = cos θ·I + sin θ·J`, and a
//! complex matrix `A + iB` acts on `(x, y)` through the real form `[[A, -B], [B, A]]`.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMat = DMatrix<Complex<f64>>;

/// Default tolerance for accepting a matrix as symplectic.
pub const SYMPLECTIC_TOL: f64 = 1e-10;

/// The standard complex structure on `R^{2n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StdStructure {
    n: usize,
    j: Mat,
}

impl StdStructure {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j(&self) -> &Mat {
        &self.j
    }
}

pub fn standard_structure(n: usize) -> StdStructure {
    assert!(n >= 1, "half-dimension must be positive");
    StdStructure { n, j: j_matrix(n) }
}

/// `J = [[0, -I_n], [I_n, 0]]`.
pub fn j_matrix(n: usize) -> Mat {
    let mut j = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = -1.0;
        j[(n + i, i)] = 1.0;
    }
    j
}

/// The reversor `N = diag(-I_n, I_n)`.
pub fn reversor(n: usize) -> Mat {
    let mut d = Mat::identity(2 * n, 2 * n);
    for i in 0..n {
        d[(i, i)] = -1.0;
    }
    d
}

/// `exp(θJ)` in closed form.
pub fn rotation(n: usize, theta: f64) -> Mat {
    Mat::identity(2 * n, 2 * n) * theta.cos() + j_matrix(n) * theta.sin()
}

/// `diag(ρ_1..ρ_n, ρ_1..ρ_n)`.
pub fn block_diag(rho: &[f64]) -> Mat {
    let n = rho.len();
    let mut d = Mat::zeros(2 * n, 2 * n);
    for (i, &r) in rho.iter().enumerate() {
        d[(i, i)] = r;
        d[(n + i, n + i)] = r;
    }
    d
}

fn half_dim(rows: usize, cols: usize) -> Result<usize> {
    if rows != cols || rows == 0 || rows % 2 != 0 {
        return Err(Error::Dimension(format!(
            "expected a square matrix of even size, got {rows}x{cols}"
        )));
    }
    Ok(rows / 2)
}

/// `‖SᵀJS − J‖_F`.
pub fn symplectic_defect(s: &Mat) -> Result<f64> {
    let n = half_dim(s.nrows(), s.ncols())?;
    let j = j_matrix(n);
    Ok((s.transpose() * &j * s - j).norm())
}

/// Inverse of a symplectic matrix, `S⁻¹ = −J Sᵀ J`.
pub fn symplectic_inverse(s: &Mat) -> Mat {
    let j = j_matrix(s.nrows() / 2);
    -(&j * s.transpose() * &j)
}

/// Largest singular value.
pub fn spectral_norm(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

pub(crate) fn symmetrize(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// A matrix checked to lie in `Sp(2n, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    entries: Mat,
    tol: f64,
}

impl SymplecticMatrix {
    pub fn new(entries: Mat, tol: f64) -> Result<Self> {
        let defect = symplectic_defect(&entries)?;
        if !(defect <= tol) {
            return Err(Error::NotSymplectic { defect, tol });
        }
        Ok(Self { entries, tol })
    }

    pub fn from_matrix(entries: Mat) -> Result<Self> {
        Self::new(entries, SYMPLECTIC_TOL)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: Mat::identity(2 * n, 2 * n),
            tol: SYMPLECTIC_TOL,
        }
    }

    pub fn rotation(n: usize, theta: f64) -> Self {
        Self {
            entries: rotation(n, theta),
            tol: SYMPLECTIC_TOL,
        }
    }

    /// `diag(−I_{n−κ}, I_κ, −I_{n−κ}, I_κ)`.
    pub fn diag_kappa(n: usize, kappa: usize) -> Result<Self> {
        if kappa > n {
            return Err(Error::InvalidArgument(format!(
                "kappa {kappa} exceeds n {n}"
            )));
        }
        let mut d = Mat::zeros(2 * n, 2 * n);
        for i in 0..n {
            let v = if i < n - kappa { -1.0 } else { 1.0 };
            d[(i, i)] = v;
            d[(n + i, n + i)] = v;
        }
        Ok(Self {
            entries: d,
            tol: SYMPLECTIC_TOL,
        })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows() / 2
    }

    pub fn matrix(&self) -> &Mat {
        &self.entries
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn inverse(&self) -> Self {
        Self {
            entries: symplectic_inverse(&self.entries),
            tol: self.tol,
        }
    }

    pub fn is_identity(&self) -> bool {
        (&self.entries - Mat::identity(self.entries.nrows(), self.entries.ncols())).amax() == 0.0
    }
}

type MatFn = Arc<dyn Fn(f64) -> Mat + Send + Sync>;

/// A symmetric matrix-valued coefficient `t ↦ B(t)` on `[0, τ]`.
#[derive(Clone)]
pub struct CoefficientPath {
    n: usize,
    tau: f64,
    eval: MatFn,
    constant: Option<Mat>,
    periodic: bool,
    reversible: bool,
}

impl std::fmt::Debug for CoefficientPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientPath")
            .field("n", &self.n)
            .field("tau", &self.tau)
            .field("constant", &self.constant.is_some())
            .field("periodic", &self.periodic)
            .field("reversible", &self.reversible)
            .finish()
    }
}

impl CoefficientPath {
    pub fn constant(b: Mat, tau: f64) -> Result<Self> {
        let n = half_dim(b.nrows(), b.ncols())?;
        let asym = (&b - b.transpose()).amax();
        if asym > 1e-12 * b.amax().max(1.0) {
            return Err(Error::NonSymmetric { t: 0.0, asym });
        }
        let b = symmetrize(&b);
        let c = b.clone();
        let reversible = {
            let nn = reversor(n);
            (&nn * &b * &nn - &b).amax() <= 1e-14 * b.amax().max(1.0)
        };
        Ok(Self {
            n,
            tau,
            eval: Arc::new(move |_| c.clone()),
            constant: Some(b),
            periodic: true,
            reversible,
        })
    }

    /// `B ≡ k·I_{2n}`.
    pub fn scalar(n: usize, k: f64, tau: f64) -> Self {
        Self::constant(Mat::identity(2 * n, 2 * n) * k, tau).expect("scalar coefficient")
    }

    pub fn from_fn<F>(n: usize, tau: f64, f: F) -> Self
    where
        F: Fn(f64) -> Mat + Send + Sync + 'static,
    {
        Self {
            n,
            tau,
            eval: Arc::new(f),
            constant: None,
            periodic: false,
            reversible: false,
        }
    }

    pub fn with_tags(mut self, periodic: bool, reversible: bool) -> Self {
        self.periodic = periodic;
        self.reversible = reversible;
        self
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn is_reversible(&self) -> bool {
        self.reversible
    }

    pub fn constant_value(&self) -> Option<&Mat> {
        self.constant.as_ref()
    }

    pub fn eval(&self, t: f64) -> Mat {
        (self.eval)(t)
    }

    /// `B(t) − k·I`.
    pub fn shifted(&self, k: f64) -> Self {
        let dim = self.dim();
        match &self.constant {
            Some(b) => {
                let mut out = Self::constant(b - Mat::identity(dim, dim) * k, self.tau)
                    .expect("shift of a symmetric matrix");
                out.periodic = self.periodic;
                out
            }
            None => {
                let f = self.eval.clone();
                Self {
                    eval: Arc::new(move |t| f(t) - Mat::identity(dim, dim) * k),
                    constant: None,
                    ..self.clone()
                }
            }
        }
    }

    /// `c·B(t)`.
    pub fn scaled(&self, c: f64) -> Self {
        match &self.constant {
            Some(b) => {
                let mut out = Self::constant(b * c, self.tau).expect("scaled symmetric");
                out.periodic = self.periodic;
                out
            }
            None => {
                let f = self.eval.clone();
                Self {
                    eval: Arc::new(move |t| f(t) * c),
                    constant: None,
                    ..self.clone()
                }
            }
        }
    }

    /// `(1 − s)·B₁ + s·B₂`.
    pub fn interpolate(b1: &Self, b2: &Self, s: f64) -> Self {
        if let (Some(x), Some(y)) = (&b1.constant, &b2.constant) {
            let mut out =
                Self::constant(x * (1.0 - s) + y * s, b1.tau).expect("combination of symmetric");
            out.periodic = b1.periodic && b2.periodic;
            out.reversible = b1.reversible && b2.reversible;
            return out;
        }
        let f1 = b1.eval.clone();
        let f2 = b2.eval.clone();
        Self {
            n: b1.n,
            tau: b1.tau,
            eval: Arc::new(move |t| f1(t) * (1.0 - s) + f2(t) * s),
            constant: None,
            periodic: b1.periodic && b2.periodic,
            reversible: b1.reversible && b2.reversible,
        }
    }

    /// Conjugated coefficient `φ^{-T} B φ^{-1}`, the generator of `φ γ φ⁻¹`.
    pub fn conjugated(&self, phi: &SymplecticMatrix) -> Self {
        let pinv = symplectic_inverse(phi.matrix());
        let pinv_t = pinv.transpose();
        let f = self.eval.clone();
        let out = Self::from_fn(self.n, self.tau, move |t| {
            symmetrize(&(&pinv_t * f(t) * &pinv))
        });
        out.with_tags(self.periodic, false)
    }

    pub fn check_symmetric(&self, samples: usize) -> Result<()> {
        for k in 0..=samples {
            let t = self.tau * k as f64 / samples.max(1) as f64;
            let b = self.eval(t);
            let asym = (&b - b.transpose()).amax();
            if asym > 1e-12 * b.amax().max(1.0) {
                return Err(Error::NonSymmetric { t, asym });
            }
        }
        Ok(())
    }

    /// Checks `Nᵀ B(−t) N = B(t)` on a uniform sample of `[0, τ]`.
    pub fn check_reversible(&self, samples: usize) -> Result<()> {
        let nn = reversor(self.n);
        for k in 0..=samples {
            let t = self.tau * k as f64 / samples.max(1) as f64;
            let b = self.eval(t);
            let defect = (&nn * self.eval(-t) * &nn - &b).amax();
            if defect > 1e-10 * b.amax().max(1.0) {
                return Err(Error::NotReversible { t, defect });
            }
        }
        Ok(())
    }
}

/// A continuous path in `Sp(2n)` that crossing detection can query at any time.
pub trait PathSource: Send + Sync {
    fn dim(&self) -> usize;
    fn span(&self) -> (f64, f64);
    /// Scan grid; contains both ends of the span and all breakpoints.
    fn grid(&self) -> Vec<f64>;
    fn grid_values(&self) -> Vec<Mat> {
        self.grid().iter().map(|&t| self.eval(t)).collect()
    }
    fn eval(&self, t: f64) -> Mat;
    /// `B(t)` with `γ' = J B γ`; at a breakpoint `from_left` picks the one-sided value.
    fn generator(&self, t: f64, from_left: bool) -> Mat;
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Sampled solution of `Z' = J B(t) Z` on `[a, b]`.
#[derive(Clone)]
pub struct SymplecticPath {
    times: Vec<f64>,
    matrices: Vec<Mat>,
    coefficient: CoefficientPath,
    defect: f64,
    error_estimate: f64,
    exact: Option<MatFn>,
}

impl std::fmt::Debug for SymplecticPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymplecticPath")
            .field("span", &(self.times[0], *self.times.last().unwrap()))
            .field("samples", &self.times.len())
            .field("defect", &self.defect)
            .field("error_estimate", &self.error_estimate)
            .finish()
    }
}

impl SymplecticPath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn matrices(&self) -> &[Mat] {
        &self.matrices
    }

    pub fn coefficient(&self) -> &CoefficientPath {
        &self.coefficient
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    pub fn n(&self) -> usize {
        self.coefficient.n
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn start(&self) -> &Mat {
        &self.matrices[0]
    }

    /// `γ(τ)`.
    pub fn monodromy(&self) -> &Mat {
        self.matrices.last().unwrap()
    }

    /// `γ(t)` off the grid, by one integration step from the nearest grid point below.
    pub fn at(&self, t: f64) -> Mat {
        if let Some(f) = &self.exact {
            return f(t);
        }
        let (a, b) = (self.start_time(), self.end_time());
        let t = t.clamp(a, b);
        let k = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(k) => return self.matrices[k].clone(),
            Err(k) => k - 1,
        };
        let tk = self.times[k];
        let phi = gl2_propagator(&self.coefficient, tk, t - tk);
        phi * &self.matrices[k]
    }
}

impl PathSource for SymplecticPath {
    fn dim(&self) -> usize {
        2 * self.n()
    }

    fn span(&self) -> (f64, f64) {
        (self.start_time(), self.end_time())
    }

    fn grid(&self) -> Vec<f64> {
        self.times.clone()
    }

    fn grid_values(&self) -> Vec<Mat> {
        self.matrices.clone()
    }

    fn eval(&self, t: f64) -> Mat {
        self.at(t)
    }

    fn generator(&self, t: f64, _from_left: bool) -> Mat {
        self.coefficient.eval(t)
    }
}

const SQRT3_6: f64 = 0.288_675_134_594_812_9;

/// One step of the two-stage Gauss–Legendre method for `Z' = J B(t) Z`, returned as the
/// step propagator. Gauss collocation is symplectic, so the propagator lies in `Sp(2n)`
/// up to rounding.
fn gl2_propagator(b: &CoefficientPath, t: f64, h: f64) -> Mat {
    let dim = b.dim();
    let j = j_matrix(b.n);
    let (c1, c2) = (0.5 - SQRT3_6, 0.5 + SQRT3_6);
    let a1 = &j * b.eval(t + c1 * h);
    let a2 = &j * b.eval(t + c2 * h);
    let (a11, a12, a21, a22) = (0.25, 0.25 - SQRT3_6, 0.25 + SQRT3_6, 0.25);
    let mut sys = Mat::identity(2 * dim, 2 * dim);
    let mut rhs = Mat::zeros(2 * dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            sys[(r, c)] -= h * a11 * a1[(r, c)];
            sys[(r, dim + c)] -= h * a12 * a1[(r, c)];
            sys[(dim + r, c)] -= h * a21 * a2[(r, c)];
            sys[(dim + r, dim + c)] -= h * a22 * a2[(r, c)];
            rhs[(r, c)] = a1[(r, c)];
            rhs[(dim + r, c)] = a2[(r, c)];
        }
    }
    let k = sys
        .lu()
        .solve(&rhs)
        .expect("Gauss stage system is invertible for small steps");
    let mut phi = Mat::identity(dim, dim);
    for r in 0..dim {
        for c in 0..dim {
            phi[(r, c)] += 0.5 * h * (k[(r, c)] + k[(dim + r, c)]);
        }
    }
    phi
}

fn integrate_grid(
    b: &CoefficientPath,
    a: f64,
    end: f64,
    start: &Mat,
    steps: usize,
    check_symmetry: bool,
) -> Result<(Vec<f64>, Vec<Mat>)> {
    let h = (end - a) / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut mats = Vec::with_capacity(steps + 1);
    times.push(a);
    mats.push(start.clone());
    let cached = b.constant.as_ref().map(|_| gl2_propagator(b, a, h));
    for k in 0..steps {
        let t = a + k as f64 * h;
        if check_symmetry && cached.is_none() {
            let bt = b.eval(t);
            let asym = (&bt - bt.transpose()).amax();
            if asym > 1e-12 * bt.amax().max(1.0) {
                return Err(Error::NonSymmetric { t, asym });
            }
        }
        let phi = match &cached {
            Some(p) => p.clone(),
            None => gl2_propagator(b, t, h),
        };
        let next = phi * &mats[k];
        times.push(if k + 1 == steps {
            end
        } else {
            a + (k + 1) as f64 * h
        });
        mats.push(next);
    }
    Ok((times, mats))
}

/// Fundamental solution `γ` of `Z' = J B(t) Z`, `γ(0) = I`, on `[0, τ]`.
pub fn fundamental_solution(b: &CoefficientPath, steps: usize) -> Result<SymplecticPath> {
    let dim = b.dim();
    fundamental_solution_on(b, 0.0, b.tau, &Mat::identity(dim, dim), steps)
}

/// Solution of `Z' = J B(t) Z` on `[a, end]` with `Z(a) = start`.
pub fn fundamental_solution_on(
    b: &CoefficientPath,
    a: f64,
    end: f64,
    start: &Mat,
    steps: usize,
) -> Result<SymplecticPath> {
    if steps < 16 {
        return Err(Error::InvalidArgument(format!(
            "steps must be at least 16, got {steps}"
        )));
    }
    if start.nrows() != b.dim() || start.ncols() != b.dim() {
        return Err(Error::Dimension(
            "start matrix does not match coefficient".into(),
        ));
    }
    if !(end > a) {
        return Err(Error::InvalidArgument(format!(
            "empty interval [{a}, {end}]"
        )));
    }
    let (times, matrices) = integrate_grid(b, a, end, start, steps, true)?;
    let (_, fine) = integrate_grid(b, a, end, start, 2 * steps, false)?;
    // Richardson estimate for an order-4 method.
    let error_estimate = (matrices.last().unwrap() - fine.last().unwrap()).norm() / 15.0;
    let j = j_matrix(b.n);
    let sj = start.transpose() * &j * start;
    let defect = matrices
        .iter()
        .map(|m| (m.transpose() * &j * m - &sj).norm())
        .fold(0.0, f64::max);
    Ok(SymplecticPath {
        times,
        matrices,
        coefficient: b.clone(),
        defect,
        error_estimate,
        exact: None,
    })
}

/// Symmetric eigen-decomposition with eigenvalues in ascending order.
pub(crate) fn sym_eigen_sorted(a: &Mat) -> (Vec<f64>, Mat) {
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut idx: Vec<usize> = (0..a.nrows()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Mat::zeros(a.nrows(), a.ncols());
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

fn sym_function(a: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let (vals, vecs) = sym_eigen_sorted(a);
    let d = Mat::from_diagonal(&DVector::from_iterator(vals.len(), vals.into_iter().map(f)));
    symmetrize(&(&vecs * d * vecs.transpose()))
}

/// Polar decomposition `S = P U` with `P = sqrt(S Sᵀ)` and `U` orthogonal.
pub fn polar_decomposition(s: &Mat) -> (Mat, Mat) {
    let sst = s * s.transpose();
    let p = sym_function(&sst, f64::sqrt);
    let pinv = sym_function(&sst, |x| 1.0 / x.sqrt());
    let u = pinv * s;
    (p, u)
}

/// `U₁ + iU₂` for an orthogonal-symplectic `U = [[U₁, −U₂], [U₂, U₁]]`.
pub fn complex_block(u: &Mat) -> CMat {
    let n = u.nrows() / 2;
    CMat::from_fn(n, n, |r, c| Complex::new(u[(r, c)], u[(n + r, c)]))
}

/// Real form `[[A, −B], [B, A]]` of `A + iB`.
pub fn real_form(c: &CMat) -> Mat {
    let n = c.nrows();
    let mut out = Mat::zeros(2 * n, 2 * n);
    for r in 0..n {
        for k in 0..n {
            let z = c[(r, k)];
            out[(r, k)] = z.re;
            out[(n + r, n + k)] = z.re;
            out[(r, n + k)] = -z.im;
            out[(n + r, k)] = z.im;
        }
    }
    out
}

/// Unitary part `𝔲(S) = U₁ + iU₂` of the polar factor of a symplectic matrix.
pub fn unitary_part(s: &SymplecticMatrix) -> Result<CMat> {
    let defect = symplectic_defect(s.matrix())?;
    if defect > s.tol() {
        return Err(Error::NotSymplectic {
            defect,
            tol: s.tol(),
        });
    }
    Ok(unitary_part_raw(s.matrix()))
}

/// Unitary part without the membership check; used on integrated samples.
pub(crate) fn unitary_part_raw(s: &Mat) -> CMat {
    let (_, u) = polar_decomposition(s);
    complex_block(&u)
}

/// Eigen-decomposition `U = V diag(e^{iθ}) V*` of a unitary matrix, angles in `(−π, π]`.
pub fn unitary_angles(u: &CMat) -> Result<(CMat, Vec<f64>)> {
    let n = u.nrows();
    let i = Complex::new(0.0, 1.0);
    let ustar = u.adjoint();
    let cpart = (u + &ustar).map(|z| z * 0.5);
    let spart = (u - &ustar).map(|z| z / (2.0 * i));
    // C and S commute; a generic real combination separates their joint eigenspaces.
    for alpha in [
        0.618_033_988_749_894_9,
        0.271_828_182_845_904_5,
        -0.577_215_664_901_532_9,
    ] {
        let a = &cpart + spart.map(|z| z * alpha);
        let a = (&a + a.adjoint()).map(|z| z * 0.5);
        let eig = SymmetricEigen::new(a);
        let v = eig.eigenvectors;
        let mut angles = Vec::with_capacity(n);
        for k in 0..n {
            let col = v.column(k);
            let c = (col.adjoint() * &cpart * col)[(0, 0)].re;
            let s = (col.adjoint() * &spart * col)[(0, 0)].re;
            let mut th = s.atan2(c);
            if th <= -std::f64::consts::PI + 1e-12 {
                th = std::f64::consts::PI;
            }
            angles.push(th);
        }
        let d = CMat::from_diagonal(&DVector::from_iterator(
            n,
            angles.iter().map(|&t| Complex::new(t.cos(), t.sin())),
        ));
        let rec = &v * d * v.adjoint();
        if (rec - u).norm() <= 1e-9 * (n as f64).sqrt() {
            return Ok((v, angles));
        }
    }
    Err(Error::InvalidArgument(
        "unitary eigen-decomposition failed to reconstruct".into(),
    ))
}

/// Path `s ↦ exp(s log P)·U(s)` from `I` to `M` on `s ∈ [0, 1]`, with `U(s)` the unitary
/// geodesic to the unitary factor of `M`.
pub fn connect_to(m: &SymplecticMatrix, samples: usize) -> Result<SymplecticPath> {
    let n = m.n();
    let dim = 2 * n;
    let target = m.matrix().clone();
    let (p, u) = polar_decomposition(&target);
    let (pvals, pvecs) = sym_eigen_sorted(&p);
    assert!(
        pvals.iter().all(|&x| x > 0.0),
        "polar factor of a symplectic matrix is positive"
    );
    let logs: Vec<f64> = pvals.iter().map(|x| x.ln()).collect();
    let log_p = {
        let d = Mat::from_diagonal(&DVector::from_vec(logs.clone()));
        symmetrize(&(&pvecs * d * pvecs.transpose()))
    };
    let (v, angles) = unitary_angles(&complex_block(&u))?;
    let herm =
        &v * CMat::from_diagonal(&DVector::from_iterator(
            n,
            angles.iter().map(|&t| Complex::new(t, 0.0)),
        )) * v.adjoint();
    let x = real_form(&herm.map(|z| z * Complex::new(0.0, 1.0)));

    let pvecs_a = pvecs.clone();
    let logs_a = logs.clone();
    let exp_l = move |s: f64| -> Mat {
        let d = Mat::from_diagonal(&DVector::from_iterator(
            logs_a.len(),
            logs_a.iter().map(|l| (s * l).exp()),
        ));
        &pvecs_a * d * pvecs_a.transpose()
    };
    let v_a = v.clone();
    let angles_a = angles.clone();
    let unit = move |s: f64| -> Mat {
        let d = CMat::from_diagonal(&DVector::from_iterator(
            angles_a.len(),
            angles_a
                .iter()
                .map(|&t| Complex::new((s * t).cos(), (s * t).sin())),
        ));
        real_form(&(&v_a * d * v_a.adjoint()))
    };
    let exp_l = Arc::new(exp_l);
    let unit = Arc::new(unit);
    let (el, un) = (exp_l.clone(), unit.clone());
    let exact: MatFn = Arc::new(move |s: f64| el(s) * un(s));

    let j = j_matrix(n);
    let el2 = exp_l.clone();
    let generator = move |s: f64| -> Mat {
        let e = el2(s);
        let einv = {
            // exp(−sL) = exp(sL)⁻¹ for symmetric L.
            let mut c = e.clone();
            if !c.try_inverse_mut() {
                c = Mat::identity(dim, dim);
            }
            c
        };
        let gen = &log_p + &e * &x * einv;
        symmetrize(&(-(&j * gen)))
    };
    let coefficient = CoefficientPath::from_fn(n, 1.0, generator);
    let samples = samples.max(16);
    let times: Vec<f64> = (0..=samples).map(|k| k as f64 / samples as f64).collect();
    let matrices: Vec<Mat> = times.iter().map(|&s| exact(s)).collect();
    let defect = matrices
        .iter()
        .map(|g| symplectic_defect(g).unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    Ok(SymplecticPath {
        times,
        matrices,
        coefficient,
        defect,
        error_estimate: (exact(1.0) - target).norm(),
        exact: Some(exact),
    })
}

/// `∫ₐᵇ exp(−K s J) ds` in closed form.
pub fn integral_exp_neg(n: usize, k: f64, a: f64, b: f64) -> Mat {
    if k.abs() < 1e-300 {
        return Mat::identity(2 * n, 2 * n) * (b - a);
    }
    // d/ds exp(−KsJ) = −K J exp(−KsJ), and J⁻¹ = −J.
    j_matrix(n) * (rotation(n, -k * b) - rotation(n, -k * a)) / k
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn structure_blocks() {
        let s = standard_structure(1);
        assert_eq!(s.j(), &Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let j3 = j_matrix(3);
        assert_eq!(&j3 * &j3, -Mat::identity(6, 6));
        let j2 = j_matrix(2);
        assert_eq!(j2.transpose(), -&j2);
        assert_eq!(j2.transpose() * &j2, Mat::identity(4, 4));
    }

    #[test]
    fn defect_examples() {
        assert_eq!(symplectic_defect(&Mat::identity(4, 4)).unwrap(), 0.0);
        assert!(symplectic_defect(&rotation(1, 0.7)).unwrap() < 1e-14);
        let d = Mat::from_diagonal(&DVector::from_vec(vec![2.0, 0.5]));
        assert!(symplectic_defect(&d).unwrap() < 1e-14);
        assert!(symplectic_defect(&Mat::identity(3, 3)).is_err());
        assert!(symplectic_defect(&Mat::zeros(2, 4)).is_err());
    }

    #[test]
    fn symplectic_matrix_rejects_non_members() {
        let d = Mat::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        assert!(SymplecticMatrix::from_matrix(d).is_err());
        let m = SymplecticMatrix::diag_kappa(2, 1).unwrap();
        assert!(symplectic_defect(m.matrix()).unwrap() == 0.0);
        let inv = SymplecticMatrix::rotation(2, 0.3).inverse();
        assert!((inv.matrix() - rotation(2, -0.3)).amax() < 1e-15);
    }

    #[test]
    fn unitary_part_examples() {
        let z = unitary_part(&SymplecticMatrix::rotation(1, 0.9)).unwrap();
        assert!((z[(0, 0)] - Complex::new(0.9f64.cos(), 0.9f64.sin())).norm() < 1e-12);
        let d =
            SymplecticMatrix::from_matrix(Mat::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])))
                .unwrap();
        let z = unitary_part(&d).unwrap();
        assert!((z[(0, 0)] - Complex::new(1.0, 0.0)).norm() < 1e-12);
        let z = unitary_part(&SymplecticMatrix::identity(3)).unwrap();
        assert!((z - CMat::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn constant_coefficient_matches_rotation() {
        let k = -0.8;
        let path = fundamental_solution(&CoefficientPath::scalar(1, k, 2.0), 256).unwrap();
        for (t, g) in path.times().iter().zip(path.matrices()) {
            assert!((g - rotation(1, k * t)).amax() < 1e-10);
        }
        let off = path.at(1.2345);
        assert!((off - rotation(1, k * 1.2345)).amax() < 1e-10);
    }

    #[test]
    fn block_rotation_path() {
        let rho = [1.0, 2.5];
        let b = CoefficientPath::constant(block_diag(&rho), PI).unwrap();
        let path = fundamental_solution(&b, 1024).unwrap();
        let g = path.monodromy();
        for (i, r) in rho.iter().enumerate() {
            assert!((g[(i, i)] - (r * PI).cos()).abs() < 1e-10);
            assert!((g[(2 + i, i)] - (r * PI).sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_coefficient_is_identity() {
        let path = fundamental_solution(&CoefficientPath::scalar(2, 0.0, 1.0), 32).unwrap();
        assert_eq!(path.monodromy(), &Mat::identity(4, 4));
        assert!(fundamental_solution(&CoefficientPath::scalar(2, 0.0, 1.0), 8).is_err());
    }

    #[test]
    fn non_symmetric_sample_rejected() {
        let b =
            CoefficientPath::from_fn(1, 1.0, |t| Mat::from_row_slice(2, 2, &[1.0, t, 0.0, 1.0]));
        assert!(matches!(
            fundamental_solution(&b, 32),
            Err(Error::NonSymmetric { .. })
        ));
    }

    #[test]
    fn connect_to_examples() {
        let p = connect_to(&SymplecticMatrix::identity(2), 32).unwrap();
        for g in p.matrices() {
            assert!((g - Mat::identity(4, 4)).amax() < 1e-14);
        }
        let p = connect_to(&SymplecticMatrix::rotation(1, 1.1), 32).unwrap();
        for (s, g) in p.times().iter().zip(p.matrices()) {
            assert!((g - rotation(1, 1.1 * s)).amax() < 1e-12);
        }
        let d =
            SymplecticMatrix::from_matrix(Mat::from_diagonal(&DVector::from_vec(vec![2.0, 0.5])))
                .unwrap();
        let p = connect_to(&d, 32).unwrap();
        for (s, g) in p.times().iter().zip(p.matrices()) {
            assert!((g[(0, 0)] - 2f64.powf(*s)).abs() < 1e-12);
            assert!((g[(1, 1)] - 2f64.powf(-s)).abs() < 1e-12);
        }
    }

    #[test]
    fn connect_generator_reproduces_path() {
        let m = SymplecticMatrix::from_matrix(
            rotation(2, 0.4)
                * Mat::from_diagonal(&DVector::from_vec(vec![1.5, 0.8, 1.0 / 1.5, 1.25])),
        )
        .unwrap();
        let p = connect_to(&m, 64).unwrap();
        let integrated = fundamental_solution(p.coefficient(), 512).unwrap();
        assert!((integrated.monodromy() - m.matrix()).amax() < 1e-9);
    }

    #[test]
    fn exp_neg_integral_closed_form() {
        let (n, k, a, b) = (1, 0.7, 0.2, 1.9);
        let exact = integral_exp_neg(n, k, a, b);
        let mut quad = Mat::zeros(2, 2);
        let m = 2000;
        let h = (b - a) / m as f64;
        for i in 0..m {
            let s = a + (i as f64 + 0.5) * h;
            quad += rotation(n, -k * s) * h;
        }
        assert!((exact - quad).amax() < 1e-6);
    }
}
