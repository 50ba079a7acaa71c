//! Dual action of a convexified Hamiltonian family.
//!
//! Outside a ball of radius `R` around the branch the Hamiltonian is blended into its
//! quadratic model there, `H̃ = χH + (1 − χ)Q`, and shifted, `H_K = H̃ − K|z|²/2`, so that
//! `c₁ ≤ H_K'' ≤ c₂`. In the dual variable `w = ∇H_K(u) = −(Ju̇ + Ku)` the functional is
//!
//! `ψ(w) = ½(Λ⁻¹w, w) + ∫ H_K*(λ, t; w(t)) dt`, `∇ψ(w) = Λ⁻¹w + ∇H_K*(w)`,
//!
//! discretized on the discontinuous Legendre basis of [`crate::dual_morse`]. A critical
//! point gives the orbit `u = −Λ⁻¹w = ∇H_K*(w)` and `ψ(w) = −Φ(u)` with
//! `Φ(u) = ∫ ½(Ju̇, u) + H(u)`.

use serde::{Deserialize, Serialize};

use crate::dual_morse::{DualOperatorSpec, LambdaInverseOp};
use crate::error::{Error, Result};
use crate::family::{hamiltonian_rk4, HamiltonianFamily};
use crate::symplectic::{sym_eigen_sorted, Mat, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftOptions {
    /// Candidates are `K = 0, −step, −2·step, …`.
    pub step: f64,
    pub max_candidates: usize,
    /// Required `|det(e^{KτJ} − M)|`.
    pub min_margin: f64,
    /// Cutoff radius; `2·max‖u_λ‖ + 1` when absent.
    pub radius: Option<f64>,
    /// Blend into the quadratic model outside the radius. When off, the radius only
    /// bounds the sampled region.
    pub cutoff: bool,
    pub lambda_samples: usize,
    pub time_samples: usize,
    pub z_samples: usize,
}

impl Default for ShiftOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_candidates: 400,
            min_margin: 1e-3,
            radius: None,
            cutoff: true,
            lambda_samples: 5,
            time_samples: 8,
            z_samples: 160,
        }
    }
}

/// Serializable part of a [`ConvexShift`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftSummary {
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
    /// Sampled bound `|∂_λ∇H_K(λ, t, z)| ≤ c₃(1 + |z|)`.
    pub c3: f64,
    pub radius: f64,
    pub cutoff: bool,
    pub margin: f64,
    pub lambda_box: (f64, f64),
}

/// Cut-off and shifted Hamiltonian `H_K` with its sampled convexity bounds.
#[derive(Clone)]
pub struct ConvexShift<'a> {
    family: &'a dyn HamiltonianFamily,
    pub summary: ShiftSummary,
}

impl std::fmt::Debug for ConvexShift<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConvexShift")
            .field("summary", &self.summary)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub struct ConjugateEval {
    pub value: f64,
    pub argmax: Vector,
    /// `(H_K*)'' = (H_K'')⁻¹` at the argmax.
    pub hessian: Mat,
    pub residual: f64,
    pub iterations: usize,
}

/// Quintic smoothstep and its first two derivatives on `[0, 1]`.
fn smoothstep(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let s2 = s * s;
    (
        s2 * s * (10.0 - 15.0 * s + 6.0 * s2),
        30.0 * s2 * (1.0 - s) * (1.0 - s),
        60.0 * s * (1.0 - s) * (1.0 - 2.0 * s),
    )
}

/// `(H̃, ∇H̃, H̃'')` for the cut-off Hamiltonian with radius `r_cut`.
fn blended(
    f: &dyn HamiltonianFamily,
    r_cut: f64,
    lambda: f64,
    t: f64,
    z: &Vector,
) -> (f64, Vector, Mat) {
    let u0 = f.branch(lambda, t);
    let d = z - &u0;
    let r = d.norm();
    if r <= r_cut {
        return (
            f.value(lambda, t, z),
            f.gradient(lambda, t, z),
            f.hessian(lambda, t, z),
        );
    }
    let (h0, g0, a0) = (
        f.value(lambda, t, &u0),
        f.gradient(lambda, t, &u0),
        f.hessian(lambda, t, &u0),
    );
    let ad = &a0 * &d;
    let q = h0 + g0.dot(&d) + 0.5 * d.dot(&ad);
    let qg = &g0 + &ad;
    if r >= 2.0 * r_cut {
        return (q, qg, a0);
    }
    let (h, g, a) = (
        f.value(lambda, t, z),
        f.gradient(lambda, t, z),
        f.hessian(lambda, t, z),
    );
    let (s, s1, s2) = smoothstep((r - r_cut) / r_cut);
    let chi = 1.0 - s;
    let e = &d / r;
    let dim = z.len();
    let grad_chi = &e * (-s1 / r_cut);
    let eet = &e * e.transpose();
    let hess_chi =
        &eet * (-s2 / (r_cut * r_cut)) + (Mat::identity(dim, dim) - &eet) * (-s1 / (r_cut * r));
    let delta = h - q;
    let dg = &g - &qg;
    let da = &a - &a0;
    let value = q + chi * delta;
    let grad = &qg + &dg * chi + &grad_chi * delta;
    let hess = &a0
        + &da * chi
        + &grad_chi * dg.transpose()
        + &dg * grad_chi.transpose()
        + hess_chi * delta;
    (value, grad, hess)
}

fn box_points(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 || hi <= lo {
        return vec![0.5 * (lo + hi)];
    }
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// Deterministic points of the ball `|d| ≤ radius` in `ℝ^dim`, denser near the boundary
/// shells `R` and `2R` where the blend acts.
fn ball_points(dim: usize, radius: f64, count: usize) -> Vec<Vector> {
    let golden = 0.618_033_988_749_894_8;
    (0..count)
        .map(|k| {
            let dir = Vector::from_fn(dim, |i, _| {
                let x =
                    ((k + 1) as f64 * (golden + 0.137 * i as f64 + 0.05 * (i * i) as f64)).fract();
                (2.0 * std::f64::consts::PI * x).cos() + 0.1 * (i as f64 + 1.0) * x
            });
            let dir = &dir / dir.norm().max(1e-300);
            let frac = ((k + 1) as f64 * 0.754_877_666_246_692_7).fract();
            dir * (radius * frac)
        })
        .collect()
}

impl<'a> ConvexShift<'a> {
    fn hessian_bounds(
        family: &'a dyn HamiltonianFamily,
        lambda_box: (f64, f64),
        opts: &ShiftOptions,
    ) -> Result<(f64, f64, f64, f64)> {
        let flags = family.flags();
        let tau = family.tau();
        let lambdas = box_points(lambda_box.0, lambda_box.1, opts.lambda_samples);
        let times: Vec<f64> = if flags.autonomous && family.branch_is_stationary() {
            vec![0.0]
        } else {
            (0..opts.time_samples.max(1))
                .map(|i| tau * i as f64 / opts.time_samples.max(1) as f64)
                .collect()
        };
        let radius = match opts.radius {
            Some(r) if r > 0.0 => r,
            Some(r) => {
                return Err(Error::InvalidArgument(format!(
                    "cutoff radius must be positive, got {r}"
                )))
            }
            None => {
                let mut m: f64 = 0.0;
                for &l in &lambdas {
                    for &t in &times {
                        m = m.max(family.branch(l, t).norm());
                    }
                }
                2.0 * m + 1.0
            }
        };
        let dim = family.dim();
        let mut pts = ball_points(dim, 2.0 * radius, opts.z_samples);
        // Shell points at both blend radii and just outside.
        for scale in [1.0, 1.25, 1.5, 1.75, 2.0, 2.1] {
            for p in ball_points(dim, 1.0, opts.z_samples / 8 + 1) {
                let nrm = p.norm();
                if nrm > 0.0 {
                    pts.push(p * (scale * radius / nrm));
                }
            }
        }
        pts.push(Vector::zeros(dim));
        let r_cut = if opts.cutoff { radius } else { f64::INFINITY };
        let (mut lo, mut hi, mut c3) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        let dl = 1e-5 * (1.0 + lambda_box.1.abs().max(lambda_box.0.abs()));
        for &l in &lambdas {
            for &t in &times {
                let u0 = family.branch(l, t);
                for d in &pts {
                    let z = &u0 + d;
                    let (_, _, h) = blended(family, r_cut, l, t, &z);
                    let (ev, _) = sym_eigen_sorted(&h);
                    lo = lo.min(ev[0]);
                    hi = hi.max(ev[ev.len() - 1]);
                    let gp = blended(family, r_cut, l + dl, t, &z).1;
                    let gm = blended(family, r_cut, l - dl, t, &z).1;
                    c3 = c3.max(((gp - gm) / (2.0 * dl)).norm() / (1.0 + z.norm()));
                }
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(
                "Hessian of the family is not finite on the sample set".into(),
            ));
        }
        Ok((lo, hi, c3, radius))
    }

    /// Shift with a prescribed `K`; fails if `H_K` is not uniformly convex on the samples
    /// or `det(e^{KτJ} − M)` is within `min_margin` of zero.
    pub fn with_k(
        family: &'a dyn HamiltonianFamily,
        lambda_box: (f64, f64),
        k: f64,
        opts: &ShiftOptions,
    ) -> Result<Self> {
        let (lo, hi, c3, radius) = Self::hessian_bounds(family, lambda_box, opts)?;
        Self::assemble(family, lambda_box, k, (lo, hi, c3, radius), opts)
    }

    fn assemble(
        family: &'a dyn HamiltonianFamily,
        lambda_box: (f64, f64),
        k: f64,
        (lo, hi, c3, radius): (f64, f64, f64, f64),
        opts: &ShiftOptions,
    ) -> Result<Self> {
        let c1 = lo - k;
        if c1 <= 0.0 {
            return Err(Error::InadmissibleShift(format!(
                "K = {k}: H_K'' reaches {c1:.3e}"
            )));
        }
        let margin = match DualOperatorSpec::new(family.boundary().clone(), family.tau(), k) {
            Ok(s) => s.margin(),
            Err(Error::DegenerateSpec { margin }) => margin,
            Err(e) => return Err(e),
        };
        if margin <= opts.min_margin {
            return Err(Error::InadmissibleShift(format!(
                "K = {k}: det(e^(KτJ) − M) = {margin:.3e}"
            )));
        }
        Ok(Self {
            family,
            summary: ShiftSummary {
                k,
                c1,
                c2: hi - k,
                c3,
                radius,
                cutoff: opts.cutoff,
                margin,
                lambda_box,
            },
        })
    }

    pub fn family(&self) -> &'a dyn HamiltonianFamily {
        self.family
    }

    pub fn k(&self) -> f64 {
        self.summary.k
    }

    /// `(H_K, ∇H_K, H_K'')`.
    pub fn modified(&self, lambda: f64, t: f64, z: &Vector) -> (f64, Vector, Mat) {
        let k = self.summary.k;
        let r_cut = if self.summary.cutoff {
            self.summary.radius
        } else {
            f64::INFINITY
        };
        let (v, g, h) = blended(self.family, r_cut, lambda, t, z);
        let dim = z.len();
        (
            v - 0.5 * k * z.norm_squared(),
            g - z * k,
            h - Mat::identity(dim, dim) * k,
        )
    }

    /// Legendre–Fenchel conjugate `H_K*(ξ) = sup ⟨ξ, z⟩ − H_K(z)` by damped Newton from `ξ/c₁`.
    pub fn conjugate(&self, lambda: f64, t: f64, xi: &Vector) -> Result<ConjugateEval> {
        self.conjugate_from(lambda, t, xi, &(xi / self.summary.c1))
    }

    pub fn conjugate_from(
        &self,
        lambda: f64,
        t: f64,
        xi: &Vector,
        start: &Vector,
    ) -> Result<ConjugateEval> {
        let tol = 1e-13 * (1.0 + xi.norm());
        let mut z = start.clone();
        let (mut v, mut g, mut h) = self.modified(lambda, t, &z);
        let mut r = &g - xi;
        for it in 0..100 {
            let res = r.norm();
            if res <= tol {
                let hessian =
                    h.clone()
                        .cholesky()
                        .map(|c| c.inverse())
                        .ok_or(Error::Indefinite {
                            min: sym_eigen_sorted(&h).0[0],
                            max: f64::NAN,
                        })?;
                return Ok(ConjugateEval {
                    value: xi.dot(&z) - v,
                    argmax: z,
                    hessian,
                    residual: res,
                    iterations: it,
                });
            }
            let chol = h.clone().cholesky().ok_or_else(|| {
                let ev = sym_eigen_sorted(&h).0;
                Error::Indefinite {
                    min: ev[0],
                    max: ev[ev.len() - 1],
                }
            })?;
            let step = chol.solve(&r);
            let f0 = v - xi.dot(&z);
            let mut alpha = 1.0;
            loop {
                let zt = &z - &step * alpha;
                let (vt, gt, ht) = self.modified(lambda, t, &zt);
                let rt = &gt - xi;
                if rt.norm() < res
                    || vt - xi.dot(&zt) < f0 - 1e-4 * alpha * r.dot(&step)
                    || alpha < 1e-12
                {
                    z = zt;
                    v = vt;
                    g = gt;
                    h = ht;
                    r = rt;
                    break;
                }
                alpha *= 0.5;
            }
            let _ = &g;
        }
        Err(Error::IterationCap {
            iterations: 100,
            residual: r.norm(),
        })
    }
}

/// First admissible `K` from `0, −step, −2·step, …`.
pub fn choose_shift<'a>(
    family: &'a dyn HamiltonianFamily,
    lambda_box: (f64, f64),
    opts: &ShiftOptions,
) -> Result<ConvexShift<'a>> {
    if !(opts.step > 0.0) {
        return Err(Error::InvalidArgument("shift step must be positive".into()));
    }
    let bounds = ConvexShift::hessian_bounds(family, lambda_box, opts)?;
    let mut last = None;
    for j in 0..opts.max_candidates {
        let k = -(j as f64) * opts.step;
        match ConvexShift::assemble(family, lambda_box, k, bounds, opts) {
            Ok(s) => return Ok(s),
            Err(Error::InadmissibleShift(m)) => last = Some(m),
            Err(e) => return Err(e),
        }
    }
    Err(Error::InadmissibleShift(format!(
        "no admissible K among {} candidates (last: {})",
        opts.max_candidates,
        last.unwrap_or_default()
    )))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualOptions {
    pub cells: usize,
    pub degree: usize,
    /// Stop when `‖∇ψ‖₂ ≤ tol`.
    pub tol: f64,
    pub max_iterations: usize,
    /// RK4 substeps per cell for the flow defect.
    pub flow_substeps: usize,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            cells: 512,
            degree: 2,
            tol: 1e-9,
            max_iterations: 200,
            flow_substeps: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: f64,
    /// Basis coefficients of `w`.
    pub coeffs: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Cell endpoints `t_c`.
    pub times: Vec<f64>,
    /// `u(t_c) = −(Λ⁻¹w)(t_c)`.
    pub orbit: Vec<Vec<f64>>,
    /// `|u(τ) − Mu(0)|`.
    pub boundary_defect: f64,
    /// Largest mismatch between `u(t_{c+1})` and the RK4 flow of `u(t_c)` over one cell.
    pub flow_defect: f64,
    /// Largest `|∇H_K*(w(t_c)) − u(t_c)|` at cell endpoints.
    pub pointwise_gap: f64,
    /// `Φ(u) = ∫ ½(Ju̇, u) + H(u)` by the trapezoid rule on the endpoints.
    pub action: f64,
}

/// Discretized `ψ` at one `λ`.
pub struct DualProblem<'s, 'a> {
    shift: &'s ConvexShift<'a>,
    lambda: f64,
    op: LambdaInverseOp,
    shapes: Vec<Vec<f64>>,
    nodes: Vec<Vec<(f64, f64)>>,
    warm: Vec<Vector>,
    opts: DualOptions,
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<Mat>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl<'s, 'a> DualProblem<'s, 'a> {
    pub fn new(shift: &'s ConvexShift<'a>, lambda: f64, opts: &DualOptions) -> Result<Self> {
        if opts.cells == 0 {
            return Err(Error::InvalidArgument("need at least one cell".into()));
        }
        let f = shift.family();
        let spec = DualOperatorSpec::new(f.boundary().clone(), f.tau(), shift.k())?;
        let op = LambdaInverseOp::new(&spec, opts.cells, opts.degree);
        let shapes = op.basis.shapes_at_nodes();
        let nodes: Vec<_> = (0..opts.cells).map(|c| op.basis.cell_nodes(c)).collect();
        let warm = vec![Vector::zeros(f.dim()); opts.cells * shapes.len()];
        Ok(Self {
            shift,
            lambda,
            op,
            shapes,
            nodes,
            warm,
            opts: opts.clone(),
        })
    }

    pub fn size(&self) -> usize {
        self.op.basis.size()
    }

    pub fn operator(&self) -> &LambdaInverseOp {
        &self.op
    }

    /// Coefficients of the `L²` projection of `w` onto the basis.
    pub fn project(&self, w: impl Fn(f64) -> Vector) -> Vec<f64> {
        let dim = self.op.basis.dim;
        let p = self.op.basis.degree + 1;
        let mut out = vec![0.0; self.size()];
        for (c, nodes) in self.nodes.iter().enumerate() {
            for (g, &(t, wt)) in nodes.iter().enumerate() {
                let v = w(t);
                for k in 0..p {
                    for a in 0..dim {
                        out[(c * p + k) * dim + a] += wt * self.shapes[g][k] * v[a];
                    }
                }
            }
        }
        out
    }

    fn node_value(&self, coeffs: &[f64], c: usize, g: usize) -> Vector {
        let dim = self.op.basis.dim;
        let p = self.op.basis.degree + 1;
        Vector::from_fn(dim, |a, _| {
            (0..p)
                .map(|k| self.shapes[g][k] * coeffs[(c * p + k) * dim + a])
                .sum()
        })
    }

    fn evaluate(&mut self, coeffs: &[f64]) -> Result<Eval> {
        let dim = self.op.basis.dim;
        let p = self.op.basis.degree + 1;
        let q = self.shapes.len();
        let lc = self.op.apply(coeffs);
        let mut value = 0.5 * dot(&lc, coeffs);
        let mut grad = lc;
        let mut hess = Vec::with_capacity(self.opts.cells * q);
        for c in 0..self.opts.cells {
            for g in 0..q {
                let (t, wt) = self.nodes[c][g];
                let w = self.node_value(coeffs, c, g);
                let slot = c * q + g;
                let ce = self
                    .shift
                    .conjugate_from(self.lambda, t, &w, &self.warm[slot])?;
                value += wt * ce.value;
                for k in 0..p {
                    for a in 0..dim {
                        grad[(c * p + k) * dim + a] += wt * self.shapes[g][k] * ce.argmax[a];
                    }
                }
                self.warm[slot] = ce.argmax;
                hess.push(ce.hessian);
            }
        }
        Ok(Eval { value, grad, hess })
    }

    /// `(ψ(w), ∇ψ(w))` in basis coordinates; the basis is orthonormal, so the coefficient
    /// gradient is the `L²` gradient.
    pub fn psi_eval_grad(&mut self, coeffs: &[f64]) -> Result<(f64, Vec<f64>)> {
        if coeffs.len() != self.size() {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                self.size(),
                coeffs.len()
            )));
        }
        let e = self.evaluate(coeffs)?;
        Ok((e.value, e.grad))
    }

    /// Second Gâteaux form applied to `v`: `Λ⁻¹v + ∫ φ (H_K*)''(w) φᵀ v`.
    fn second_form(&self, hess: &[Mat], v: &[f64]) -> Vec<f64> {
        let dim = self.op.basis.dim;
        let p = self.op.basis.degree + 1;
        let q = self.shapes.len();
        let mut out = self.op.apply(v);
        for c in 0..self.opts.cells {
            for g in 0..q {
                let wt = self.nodes[c][g].1;
                let vv = self.node_value(v, c, g);
                let hv = &hess[c * q + g] * vv;
                for k in 0..p {
                    for a in 0..dim {
                        out[(c * p + k) * dim + a] += wt * self.shapes[g][k] * hv[a];
                    }
                }
            }
        }
        out
    }

    /// Minimum-residual solve of `T x = b` for the symmetric second form at `hess`.
    fn minres(&self, hess: &[Mat], b: &[f64], rtol: f64, max_iter: usize) -> Vec<f64> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let beta1 = norm(b);
        if beta1 == 0.0 {
            return x;
        }
        let (mut r1, mut r2, mut y) = (b.to_vec(), b.to_vec(), b.to_vec());
        let (mut oldb, mut beta, mut dbar, mut epsln, mut phibar) = (0.0, beta1, 0.0, 0.0, beta1);
        let (mut cs, mut sn) = (-1.0f64, 0.0f64);
        let (mut w, mut w2) = (vec![0.0; n], vec![0.0; n]);
        for itn in 1..=max_iter {
            let v: Vec<f64> = y.iter().map(|a| a / beta).collect();
            y = self.second_form(hess, &v);
            if itn >= 2 {
                let f = beta / oldb;
                y.iter_mut().zip(&r1).for_each(|(a, b)| *a -= f * b);
            }
            let alfa = dot(&v, &y);
            let f = alfa / beta;
            y.iter_mut().zip(&r2).for_each(|(a, b)| *a -= f * b);
            r1 = std::mem::replace(&mut r2, y.clone());
            oldb = beta;
            beta = norm(&y);
            let oldeps = epsln;
            let delta = cs * dbar + sn * alfa;
            let gbar = sn * dbar - cs * alfa;
            epsln = sn * beta;
            dbar = -cs * beta;
            let gamma = gbar.hypot(beta).max(f64::EPSILON);
            cs = gbar / gamma;
            sn = beta / gamma;
            let phi = cs * phibar;
            phibar *= sn;
            let w1 = std::mem::replace(&mut w2, w.clone());
            for i in 0..n {
                w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
                x[i] += phi * w[i];
            }
            if phibar <= rtol * beta1 || beta == 0.0 {
                break;
            }
        }
        x
    }

    /// Descent on the merit `½‖∇ψ‖²` with Armijo backtracking. Steps solve `T d = ∇ψ` by
    /// MINRES (`T` the second form) and fall back to `d = T∇ψ`, the merit gradient, when
    /// that is not a descent direction. Then the orbit is recovered.
    pub fn descend_and_recover(&mut self, init: &[f64]) -> Result<DualState> {
        if init.len() != self.size() {
            return Err(Error::Dimension(format!(
                "expected {} coefficients, got {}",
                self.size(),
                init.len()
            )));
        }
        let mut c = init.to_vec();
        let mut e = self.evaluate(&c)?;
        let mut iterations = 0;
        while norm(&e.grad) > self.opts.tol {
            if iterations >= self.opts.max_iterations {
                return Err(Error::IterationCap {
                    iterations,
                    residual: norm(&e.grad),
                });
            }
            iterations += 1;
            let gn = norm(&e.grad);
            let merit = 0.5 * gn * gn;
            let tg = self.second_form(&e.hess, &e.grad);
            let newton = self.minres(
                &e.hess,
                &e.grad,
                (0.1 * gn).min(1e-3),
                4 * self.size().min(500),
            );
            let slope_newton = dot(&tg, &newton);
            let (d, slope) = if slope_newton > 0.0 {
                (newton, slope_newton)
            } else {
                (tg.clone(), dot(&tg, &tg))
            };
            let mut alpha = 1.0;
            let accepted = loop {
                let ct: Vec<f64> = c.iter().zip(&d).map(|(x, y)| x - alpha * y).collect();
                let et = self.evaluate(&ct)?;
                let mt = 0.5 * dot(&et.grad, &et.grad);
                if mt <= merit - 1e-4 * alpha * slope {
                    break Some((ct, et));
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    break None;
                }
            };
            match accepted {
                Some((ct, et)) => {
                    c = ct;
                    e = et;
                }
                None => {
                    return Err(Error::IterationCap {
                        iterations,
                        residual: gn,
                    })
                }
            }
        }
        let gn = norm(&e.grad);
        self.recover(c, e.value, gn, iterations)
    }

    fn recover(
        &mut self,
        coeffs: Vec<f64>,
        value: f64,
        grad_norm: f64,
        iterations: usize,
    ) -> Result<DualState> {
        let f = self.shift.family();
        let cells = self.opts.cells;
        let h = self.op.basis.h();
        let u: Vec<Vector> = self
            .op
            .node_values(&coeffs)
            .into_iter()
            .map(|x| -x)
            .collect();
        let m = f.boundary().matrix();
        let boundary_defect = (&u[cells] - m * &u[0]).norm();
        let mut flow_defect: f64 = 0.0;
        let mut pointwise_gap: f64 = 0.0;
        let mut action = 0.0;
        let radius = self.shift.summary.radius;
        let mut farthest: f64 = 0.0;
        for (c, uc) in u.iter().enumerate() {
            let t = c as f64 * h;
            farthest = farthest.max((uc - f.branch(self.lambda, t)).norm());
            let g = f.gradient(self.lambda, t, uc);
            let density = -0.5 * g.dot(uc) + f.value(self.lambda, t, uc);
            action += if c == 0 || c == cells {
                0.5 * h * density
            } else {
                h * density
            };
            if c < cells {
                let next = hamiltonian_rk4(f, self.lambda, t, uc, h, self.opts.flow_substeps);
                flow_defect = flow_defect.max((next - &u[c + 1]).norm());
                let w = self.op.basis.value_at(&coeffs, t + 1e-14 * h);
                let ce = self.shift.conjugate_from(self.lambda, t, &w, uc)?;
                pointwise_gap = pointwise_gap.max((ce.argmax - uc).norm());
            }
        }
        if farthest > radius {
            return Err(Error::FlagViolation(format!(
                "critical point leaves the cutoff ball (distance {farthest:.3e} > R = {radius:.3e})"
            )));
        }
        Ok(DualState {
            lambda: self.lambda,
            coeffs,
            value,
            grad_norm,
            iterations,
            times: (0..=cells).map(|c| c as f64 * h).collect(),
            orbit: u.iter().map(|v| v.as_slice().to_vec()).collect(),
            boundary_defect,
            flow_defect,
            pointwise_gap,
            action,
        })
    }
}

/// `ψ` and its gradient at `state` for the given shift.
pub fn psi_eval_grad(
    shift: &ConvexShift<'_>,
    lambda: f64,
    coeffs: &[f64],
    opts: &DualOptions,
) -> Result<(f64, Vec<f64>)> {
    DualProblem::new(shift, lambda, opts)?.psi_eval_grad(coeffs)
}

/// Critical point of `ψ` reached from `init` and the orbit it encodes.
pub fn descend_and_recover(
    shift: &ConvexShift<'_>,
    lambda: f64,
    init: &[f64],
    opts: &DualOptions,
) -> Result<DualState> {
    DualProblem::new(shift, lambda, opts)?.descend_and_recover(init)
}
