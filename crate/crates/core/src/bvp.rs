//! Shooting solver for `u̇ = J∇H_λ(t, u)` with `u(τ) = Mu(0) + r`, its brake variant on
//! `[0, τ/2]`, branch switching at candidate parameters and the `M`-extension of
//! solutions to the line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::HamiltonianFamily;
use crate::symplectic::{j_matrix, reversor, symplectic_inverse, Mat, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowOptions {
    /// RK4 steps over one period; shorter spans use a proportional share.
    pub steps: usize,
    /// Norm above which the trajectory is declared blown up.
    pub cap: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            steps: 4096,
            cap: 1e8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub endpoint: Vector,
    /// `Dφ_s(z₀)`.
    pub monodromy: Mat,
    /// Richardson estimate from the run at half the step count.
    pub error_estimate: f64,
    pub times: Vec<f64>,
    pub samples: Vec<Vector>,
}

/// RK4 on `(z, Φ)` with `Φ̇ = JH''(z)Φ`; samples are recorded every `record` steps.
fn integrate(
    f: &dyn HamiltonianFamily,
    lambda: f64,
    t0: f64,
    z0: &Vector,
    span: f64,
    steps: usize,
    record: usize,
    cap: f64,
) -> Result<(Vector, Mat, Vec<f64>, Vec<Vector>)> {
    let d = z0.len();
    let j = j_matrix(d / 2);
    let rhs = |t: f64, z: &Vector, p: &Mat| {
        (
            &j * f.gradient(lambda, t, z),
            &j * f.hessian(lambda, t, z) * p,
        )
    };
    let h = span / steps as f64;
    let mut z = z0.clone();
    let mut p = Mat::identity(d, d);
    let mut times = vec![t0];
    let mut samples = vec![z.clone()];
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let (k1, l1) = rhs(t, &z, &p);
        let (k2, l2) = rhs(
            t + 0.5 * h,
            &(&z + &k1 * (0.5 * h)),
            &(&p + &l1 * (0.5 * h)),
        );
        let (k3, l3) = rhs(
            t + 0.5 * h,
            &(&z + &k2 * (0.5 * h)),
            &(&p + &l2 * (0.5 * h)),
        );
        let (k4, l4) = rhs(t + h, &(&z + &k3 * h), &(&p + &l3 * h));
        z += (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
        p += (l1 + (l2 + l3) * 2.0 + l4) * (h / 6.0);
        let nz = z.norm();
        if !nz.is_finite() || nz > cap {
            return Err(Error::BlowUp { t: t + h, norm: nz });
        }
        if record > 0 && (s + 1) % record == 0 {
            times.push(t0 + (s + 1) as f64 * h);
            samples.push(z.clone());
        }
    }
    Ok((z, p, times, samples))
}

fn steps_for(f: &dyn HamiltonianFamily, span: f64, opts: &FlowOptions) -> usize {
    ((opts.steps as f64 * span.abs() / f.tau()).ceil() as usize).max(16)
}

/// Flow of the family over `[t0, t0 + span]` with its linearization.
pub fn flow_from(
    f: &dyn HamiltonianFamily,
    lambda: f64,
    t0: f64,
    z0: &Vector,
    span: f64,
    samples: usize,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    if z0.len() != f.dim() {
        return Err(Error::Dimension(format!(
            "initial value has length {}, need {}",
            z0.len(),
            f.dim()
        )));
    }
    let mut steps = steps_for(f, span, opts);
    let record = if samples == 0 {
        0
    } else {
        // Round the step count up to a multiple of the sample count.
        steps = steps.div_ceil(samples) * samples;
        steps / samples
    };
    let (zc, pc, _, _) = integrate(f, lambda, t0, z0, span, steps / 2, 0, opts.cap)?;
    let (z, p, times, samples) = integrate(f, lambda, t0, z0, span, steps, record, opts.cap)?;
    let error_estimate = ((&z - zc).amax()).max((&p - pc).amax()) / 15.0;
    Ok(FlowResult {
        endpoint: z,
        monodromy: p,
        error_estimate,
        times,
        samples,
    })
}

/// `φ_s(z₀)` from `t = 0`.
pub fn flow(
    f: &dyn HamiltonianFamily,
    lambda: f64,
    z0: &Vector,
    span: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    flow_from(f, lambda, 0.0, z0, span, 0, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Below,
    At,
    Above,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchPoint {
    pub lambda: f64,
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
    /// `|u(τ) − Mu(0) − r|`.
    pub boundary_residual: f64,
    /// Endpoint difference against an independent run at twice the step count.
    pub flow_residual: f64,
    /// `max_t |u(t) − u_λ(t)|`.
    pub distance: f64,
    /// For autonomous families, `min_θ |θ∗u(0) − u_λ(θ)|`; the plain distance otherwise.
    pub phase_distance: f64,
    /// `max_t |H(u(t)) − H(u(0))|` for autonomous families.
    pub energy_drift: Option<f64>,
    pub side: Option<Side>,
    /// Rank deficiency of the shooting Jacobian at the solution.
    pub kernel_dim: usize,
    pub pseudo_inverse_steps: usize,
    pub iterations: usize,
}

impl BranchPoint {
    pub fn initial(&self) -> Vector {
        Vector::from_vec(self.samples[0].clone())
    }

    pub fn amplitude(&self) -> f64 {
        self.initial().norm()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub flow: FlowOptions,
    /// Converged when `‖F‖ ≤ tol`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Singular values below `rcond·σ_max` are dropped (Moore–Penrose step).
    pub rcond: f64,
    /// Samples stored per solution.
    pub samples: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            flow: FlowOptions::default(),
            tol: 1e-10,
            max_iterations: 60,
            rcond: 1e-9,
            samples: 256,
        }
    }
}

/// Moore–Penrose solve, with the number of dropped singular directions.
fn pinv_solve(a: &Mat, b: &Vector, rcond: f64) -> (Vector, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = rcond * smax.max(f64::MIN_POSITIVE);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut x = Vector::zeros(a.ncols());
    let mut dropped = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= cut {
            dropped += 1;
            continue;
        }
        let c = u.column(i).dot(b) / s;
        x += vt.row(i).transpose() * c;
    }
    (x, dropped)
}

fn kernel_dim(a: &Mat, rel: f64) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max().max(1.0);
    sv.iter().filter(|&&s| s <= rel * smax).count()
}

/// Damped Gauss–Newton on a square or rectangular residual with Moore–Penrose steps.
fn gauss_newton(
    residual: impl Fn(&Vector) -> Result<(Vector, Mat)>,
    x0: &Vector,
    opts: &NewtonOptions,
) -> Result<(Vector, f64, Mat, usize, usize)> {
    let mut x = x0.clone();
    let (mut r, mut jac) = residual(&x)?;
    let mut pinv_steps = 0;
    for it in 0..opts.max_iterations {
        let rn = r.norm();
        if rn <= opts.tol {
            return Ok((x, rn, jac, it, pinv_steps));
        }
        let (step, dropped) = pinv_solve(&jac, &r, opts.rcond);
        if dropped > 0 {
            pinv_steps += 1;
        }
        let mut alpha = 1.0;
        loop {
            let xt = &x - &step * alpha;
            match residual(&xt) {
                Ok((rt, jt)) if rt.norm() < rn || alpha < 1e-3 => {
                    x = xt;
                    r = rt;
                    jac = jt;
                    break;
                }
                Ok(_) | Err(Error::BlowUp { .. }) if alpha >= 1e-3 => alpha *= 0.5,
                Ok(_) => unreachable!(),
                Err(e) => return Err(e),
            }
        }
        if !x.norm().is_finite() {
            break;
        }
    }
    let rn = r.norm();
    if rn <= opts.tol {
        return Ok((x, rn, jac, opts.max_iterations, pinv_steps));
    }
    Err(Error::IterationCap {
        iterations: opts.max_iterations,
        residual: rn,
    })
}

fn finish_point(
    f: &dyn HamiltonianFamily,
    lambda: f64,
    z: &Vector,
    span: f64,
    boundary_residual: f64,
    kernel: usize,
    pinv: usize,
    iterations: usize,
    opts: &NewtonOptions,
) -> Result<BranchPoint> {
    let run = flow_from(f, lambda, 0.0, z, span, opts.samples.max(1), &opts.flow)?;
    let fine = FlowOptions {
        steps: 2 * opts.flow.steps,
        ..opts.flow.clone()
    };
    let check = flow(f, lambda, z, span, &fine)?;
    let flow_residual = (&check.endpoint - &run.endpoint).amax();
    let distance = run
        .times
        .iter()
        .zip(&run.samples)
        .map(|(&t, u)| (u - f.branch(lambda, t)).norm())
        .fold(0.0, f64::max);
    let flags = f.flags();
    let phase_distance = if flags.autonomous {
        run.samples
            .iter()
            .map(|u| (u - f.branch(lambda, 0.0)).norm())
            .fold(f64::INFINITY, f64::min)
    } else {
        distance
    };
    let energy_drift = flags.autonomous.then(|| {
        let h0 = f.value(lambda, 0.0, z);
        run.samples
            .iter()
            .map(|u| (f.value(lambda, 0.0, u) - h0).abs())
            .fold(0.0, f64::max)
    });
    Ok(BranchPoint {
        lambda,
        times: run.times,
        samples: run.samples.iter().map(|v| v.as_slice().to_vec()).collect(),
        boundary_residual,
        flow_residual,
        distance,
        phase_distance,
        energy_drift,
        side: None,
        kernel_dim: kernel,
        pseudo_inverse_steps: pinv,
        iterations,
    })
}

/// Newton shooting on `F(z) = φ_τ(z) − Mz − r` with Jacobian `Dφ_τ(z) − M`.
pub fn newton_bvp(
    f: &dyn HamiltonianFamily,
    lambda: f64,
    z_init: &Vector,
    offset: Option<&Vector>,
    opts: &NewtonOptions,
) -> Result<BranchPoint> {
    let d = f.dim();
    if z_init.len() != d {
        return Err(Error::Dimension(format!(
            "initial value has length {}, need {d}",
            z_init.len()
        )));
    }
    let m = f.boundary().matrix().clone();
    let r = offset.cloned().unwrap_or_else(|| Vector::zeros(d));
    let tau = f.tau();
    let residual = |z: &Vector| -> Result<(Vector, Mat)> {
        let fl = flow(f, lambda, z, tau, &opts.flow)?;
        Ok((&fl.endpoint - &m * z - &r, &fl.monodromy - &m))
    };
    let (z, res, jac, its, pinv) = gauss_newton(residual, z_init, opts)?;
    finish_point(
        f,
        lambda,
        &z,
        tau,
        res,
        kernel_dim(&jac, 1e-6),
        pinv,
        its,
        opts,
    )
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwitchOptions {
    pub newton: NewtonOptions,
    /// Discard solutions farther than this from the trivial branch.
    pub search_radius: Option<f64>,
    /// Two solutions are distinct when their distance exceeds this.
    pub distinct: f64,
    /// Phase alignment resolution, as a fraction of `τ`.
    pub phase_resolution: f64,
}

impl Default for SwitchOptions {
    fn default() -> Self {
        Self {
            newton: NewtonOptions::default(),
            search_radius: None,
            distinct: 1e-8,
            phase_resolution: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSearch {
    pub mu: f64,
    pub points: Vec<BranchPoint>,
    pub attempts: usize,
    /// Predictors that converged back onto the trivial branch.
    pub trivial: usize,
    pub failed: usize,
    pub message: Option<String>,
}

/// The geometric ladders `{1e−3, …, 1e−1}·scale` and `{1e−1, 1e−2, 1e−3}·width`.
pub fn default_ladders(scale: f64, width: f64) -> (Vec<f64>, Vec<f64>) {
    let amplitudes = [1e-3, 3e-3, 1e-2, 3e-2, 1e-1]
        .iter()
        .map(|a| a * scale)
        .collect();
    let deltas = [1e-1, 1e-2, 1e-3].iter().map(|d| d * width).collect();
    (deltas, amplitudes)
}

/// `min_θ |u(0) − v(θ)|` over one period of `v`, with the minimizing sample refined by
/// golden-section search on the flow.
fn orbit_gap(
    f: &dyn HamiltonianFamily,
    a: &BranchPoint,
    b: &BranchPoint,
    opts: &SwitchOptions,
) -> Result<f64> {
    let u0 = a.initial();
    let (mut best, mut k) = (f64::INFINITY, 0);
    for (i, s) in b.samples.iter().enumerate() {
        let g = (&u0 - Vector::from_vec(s.clone())).norm();
        if g < best {
            best = g;
            k = i;
        }
    }
    let h = if b.times.len() > 1 {
        b.times[1] - b.times[0]
    } else {
        return Ok(best);
    };
    let v0 = b.initial();
    let gap = |theta: f64| -> Result<f64> {
        let steps = FlowOptions {
            steps: opts.newton.flow.steps,
            ..opts.newton.flow.clone()
        };
        Ok((flow(f, b.lambda, &v0, theta, &steps)?.endpoint - &u0).norm())
    };
    let t0 = b.times[k];
    let (mut lo, mut hi) = ((t0 - h).max(0.0), t0 + h);
    let g = 0.618_033_988_749_894_8;
    let tol = opts.phase_resolution * f.tau();
    if hi - lo <= tol || t0 == 0.0 && best == 0.0 {
        return Ok(best);
    }
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (gap(x1)?, gap(x2)?);
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = gap(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = gap(x2)?;
        }
    }
    Ok(best.min(f1).min(f2))
}

fn distinct_from(
    f: &dyn HamiltonianFamily,
    p: &BranchPoint,
    found: &[BranchPoint],
    opts: &SwitchOptions,
) -> Result<bool> {
    for q in found.iter().filter(|q| q.lambda == p.lambda) {
        let c0 = p
            .samples
            .iter()
            .zip(&q.samples)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        if c0 <= opts.distinct {
            return Ok(false);
        }
        if f.flags().autonomous
            && orbit_gap(f, p, q, opts)? <= opts.distinct.max(1e3 * opts.newton.tol)
        {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Predictors `u_λ(0) ± a·k̂` for every kernel vector, amplitude and `λ = μ ± δ`, each
/// corrected by [`newton_bvp`]; trivial and duplicate solutions are dropped.
/// A `δ` of zero searches at `μ` itself.
pub fn branch_switch(
    f: &dyn HamiltonianFamily,
    mu: f64,
    kernel: &[Vector],
    deltas: &[f64],
    amplitudes: &[f64],
    opts: &SwitchOptions,
) -> Result<BranchSearch> {
    let d = f.dim();
    if kernel.is_empty() {
        return Err(Error::InvalidArgument(
            "branch switching needs at least one kernel vector".into(),
        ));
    }
    if kernel.iter().any(|k| k.len() != d) {
        return Err(Error::Dimension(format!(
            "kernel vectors must have length {d}"
        )));
    }
    let mut lambdas = Vec::new();
    for &dl in deltas {
        if dl == 0.0 {
            lambdas.push((mu, Side::At));
        } else {
            lambdas.push((mu - dl.abs(), Side::Below));
            lambdas.push((mu + dl.abs(), Side::Above));
        }
    }
    let mut out = BranchSearch {
        mu,
        points: Vec::new(),
        attempts: 0,
        trivial: 0,
        failed: 0,
        message: None,
    };
    for &(lambda, side) in &lambdas {
        let base = f.branch(lambda, 0.0);
        for kv in kernel {
            let kh = kv / kv.norm();
            for &a in amplitudes {
                for sign in [1.0, -1.0] {
                    out.attempts += 1;
                    let z = &base + &kh * (sign * a);
                    let mut p = match newton_bvp(f, lambda, &z, None, &opts.newton) {
                        Ok(p) => p,
                        Err(Error::IterationCap { .. }) | Err(Error::BlowUp { .. }) => {
                            out.failed += 1;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    if p.phase_distance.min(p.distance)
                        <= opts.distinct.max(10.0 * p.boundary_residual)
                    {
                        out.trivial += 1;
                        continue;
                    }
                    if opts.search_radius.is_some_and(|r| p.distance > r) {
                        continue;
                    }
                    p.side = Some(side);
                    if distinct_from(f, &p, &out.points, opts)? {
                        out.points.push(p);
                    }
                }
            }
        }
    }
    if out.points.is_empty() {
        out.message = Some("no branch found at this resolution".into());
    }
    Ok(out)
}

/// Brake solutions: `u(0) = (0, y)`, shooting on the first `n` components of
/// `φ_{τ/2}(0, y)`, from predictors `±a·e_i`. Each solution is checked on the full
/// period against the reflection `u(τ − t) = Nu(t)`.
pub fn brake_shoot(
    f: &dyn HamiltonianFamily,
    lambda: f64,
    amplitudes: &[f64],
    opts: &SwitchOptions,
) -> Result<Vec<BranchPoint>> {
    if !f.flags().reversible {
        return Err(Error::FlagViolation(
            "brake shooting needs a reversible family".into(),
        ));
    }
    let n = f.n();
    let half = 0.5 * f.tau();
    let nn = reversor(n);
    let lift = |y: &Vector| {
        let mut z = Vector::zeros(2 * n);
        z.rows_mut(n, n).copy_from(y);
        z
    };
    let residual = |y: &Vector| -> Result<(Vector, Mat)> {
        let fl = flow(f, lambda, &lift(y), half, &opts.newton.flow)?;
        Ok((
            fl.endpoint.rows(0, n).into_owned(),
            fl.monodromy.view((0, n), (n, n)).into_owned(),
        ))
    };
    let mut found: Vec<BranchPoint> = Vec::new();
    for i in 0..n {
        for &a in amplitudes {
            for sign in [1.0, -1.0] {
                let mut y0 = Vector::zeros(n);
                y0[i] = sign * a;
                let (y, res, jac, its, pinv) = match gauss_newton(residual, &y0, &opts.newton) {
                    Ok(v) => v,
                    Err(Error::IterationCap { .. }) | Err(Error::BlowUp { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let z = lift(&y);
                let mut p = finish_point(
                    f,
                    lambda,
                    &z,
                    f.tau(),
                    res,
                    kernel_dim(&jac, 1e-6),
                    pinv,
                    its,
                    &opts.newton,
                )?;
                // Reflection check on the stored samples: u(τ − t_k) = N u(t_k).
                let k = p.samples.len() - 1;
                let refl = (0..=k)
                    .map(|i| {
                        let a = Vector::from_vec(p.samples[k - i].clone());
                        let b = &nn * Vector::from_vec(p.samples[i].clone());
                        (a - b).amax()
                    })
                    .fold(0.0, f64::max);
                p.boundary_residual = p.boundary_residual.max(refl);
                if p.distance <= opts.distinct.max(10.0 * res)
                    || opts.search_radius.is_some_and(|r| p.distance > r)
                {
                    continue;
                }
                if distinct_from(f, &p, &found, opts)? {
                    found.push(p);
                }
            }
        }
    }
    Ok(found)
}

/// `u_M(t) = M^k u(t − kτ)` on `[−copies·τ, copies·τ]` from samples on `[0, τ]`.
pub fn extend_to_line(
    times: &[f64],
    samples: &[Vector],
    m: &Mat,
    copies: usize,
    tol: f64,
) -> Result<(Vec<f64>, Vec<Vector>)> {
    if times.len() != samples.len() || times.len() < 2 {
        return Err(Error::InvalidArgument(
            "need matching time and sample lists with at least two entries".into(),
        ));
    }
    let tau = times[times.len() - 1] - times[0];
    let gap = (&samples[samples.len() - 1] - m * &samples[0]).amax();
    if gap > tol {
        return Err(Error::MismatchedJunction { gap });
    }
    let minv = symplectic_inverse(m);
    let mut power = Mat::identity(m.nrows(), m.ncols());
    for _ in 0..copies {
        power = &minv * power;
    }
    let mut ts = Vec::new();
    let mut us = Vec::new();
    let last = samples.len() - 1;
    for k in -(copies as i64)..(copies as i64) {
        for i in 0..last {
            ts.push(times[i] + k as f64 * tau);
            us.push(&power * &samples[i]);
        }
        power = m * power;
    }
    ts.push(times[last] + (copies as i64 - 1) as f64 * tau);
    us.push(&minv * &power * &samples[last]);
    Ok((ts, us))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{Monomial, PolynomialFamily, QuadraticQuartic};
    use crate::symplectic::{rotation, symplectic_defect, SymplecticMatrix};
    use std::f64::consts::PI;

    fn quartic() -> QuadraticQuartic {
        QuadraticQuartic::scalar_quartic(
            1,
            1.0,
            2.0 * PI,
            SymplecticMatrix::identity(1),
            (0.5, 1.5),
        )
        .unwrap()
    }

    #[test]
    fn rotation_flow() {
        let f = QuadraticQuartic::scalar_quartic(
            1,
            0.0,
            2.0 * PI,
            SymplecticMatrix::identity(1),
            (1.0, 1.0),
        )
        .unwrap();
        let r = flow(
            &f,
            1.0,
            &Vector::from_vec(vec![1.0, 0.0]),
            2.0 * PI,
            &FlowOptions::default(),
        )
        .unwrap();
        assert!((r.endpoint - Vector::from_vec(vec![1.0, 0.0])).amax() < 1e-10);
        assert!((r.monodromy - Mat::identity(2, 2)).amax() < 1e-10);
        assert!(r.error_estimate < 1e-10);
    }

    #[test]
    fn quartic_circle_flow() {
        let z0 = Vector::from_vec(vec![0.5, 0.0]);
        let r = flow(&quartic(), 0.75, &z0, 2.0 * PI, &FlowOptions::default()).unwrap();
        assert!((r.endpoint - rotation(1, 2.0 * PI * (0.75 + 0.25)) * &z0).amax() < 1e-10);
        assert!(symplectic_defect(&r.monodromy).unwrap() < 1e-7);
    }

    #[test]
    fn blow_up_is_reported() {
        // H = x³y: ẋ = −x³ reaches infinity in finite backward time from x = −3.
        let h = PolynomialFamily::new(
            vec![Monomial {
                coeff: 1.0,
                lambda_power: 0,
                exponents: vec![3, 1],
            }],
            1.0,
            SymplecticMatrix::identity(1),
            (0.0, 1.0),
        )
        .unwrap();
        assert!(matches!(
            flow(
                &h,
                0.0,
                &Vector::from_vec(vec![-3.0, 1.0]),
                -1.0,
                &FlowOptions::default()
            ),
            Err(Error::BlowUp { .. })
        ));
        assert!(flow(
            &h,
            0.0,
            &Vector::from_vec(vec![-3.0, 1.0]),
            0.01,
            &FlowOptions::default()
        )
        .is_ok());
    }

    #[test]
    fn newton_trivial_and_circle() {
        let f = quartic();
        let o = NewtonOptions::default();
        let p = newton_bvp(&f, 0.5, &Vector::zeros(2), None, &o).unwrap();
        assert!(p.distance < 1e-12);
        let p = newton_bvp(&f, 0.99, &Vector::from_vec(vec![0.1, 0.0]), None, &o).unwrap();
        assert!((p.amplitude() - 0.1).abs() < 1e-9, "{}", p.amplitude());
        assert!(p.boundary_residual <= 1e-9 && p.flow_residual <= 1e-8);
        assert!(p.energy_drift.unwrap() <= 1e-7);
        let lin = QuadraticQuartic::scalar_quartic(
            1,
            0.0,
            2.0 * PI,
            SymplecticMatrix::identity(1),
            (0.0, 2.0),
        )
        .unwrap();
        let p = newton_bvp(&lin, 0.7, &Vector::from_vec(vec![0.05, -0.02]), None, &o).unwrap();
        assert!(p.distance < 1e-10);
    }

    #[test]
    fn affine_offset() {
        // u(τ) − Mu(0) = r with H = |z|²/2 and M = I, τ = π: γ(π) = −I, so −2z = r.
        let f =
            QuadraticQuartic::scalar_quartic(1, 0.0, PI, SymplecticMatrix::identity(1), (1.0, 1.0))
                .unwrap();
        let r = Vector::from_vec(vec![0.4, -0.2]);
        let p = newton_bvp(
            &f,
            1.0,
            &Vector::zeros(2),
            Some(&r),
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!((p.initial() + &r * 0.5).amax() < 1e-10);
    }

    #[test]
    fn one_sided_quartic_branch() {
        let f = quartic();
        let kernel = [
            Vector::from_vec(vec![1.0, 0.0]),
            Vector::from_vec(vec![0.0, 1.0]),
        ];
        let o = SwitchOptions {
            search_radius: Some(0.5),
            ..SwitchOptions::default()
        };
        let s = branch_switch(&f, 1.0, &kernel, &[0.05], &[0.1, 0.2], &o).unwrap();
        let below: Vec<_> = s
            .points
            .iter()
            .filter(|p| p.side == Some(Side::Below))
            .collect();
        assert_eq!(below.len(), 1, "autonomous circles are one ℝ-orbit");
        assert!((below[0].amplitude() - 0.05f64.sqrt()).abs() < 1e-6);
        assert!(s.points.iter().all(|p| p.side != Some(Side::Above)));
        let o = SwitchOptions {
            search_radius: Some(0.05),
            ..SwitchOptions::default()
        };
        let s = branch_switch(&f, 1.0, &kernel, &[0.05], &[0.01, 0.03], &o).unwrap();
        assert!(s.points.iter().all(|p| p.side == Some(Side::Below)));
    }

    #[test]
    fn linear_degenerate_switch() {
        let f = QuadraticQuartic::scalar_quartic(
            1,
            0.0,
            2.0 * PI,
            SymplecticMatrix::identity(1),
            (0.5, 1.5),
        )
        .unwrap();
        let kernel = [Vector::from_vec(vec![1.0, 0.0])];
        let s = branch_switch(
            &f,
            1.0,
            &kernel,
            &[0.0, 0.01],
            &[0.01, 0.1],
            &SwitchOptions::default(),
        )
        .unwrap();
        assert!(!s.points.is_empty());
        assert!(s
            .points
            .iter()
            .all(|p| p.side == Some(Side::At) && p.kernel_dim == 2));
    }

    #[test]
    fn even_family_pairs() {
        let f = quartic();
        let p = newton_bvp(
            &f,
            0.95,
            &Vector::from_vec(vec![0.2, 0.05]),
            None,
            &NewtonOptions::default(),
        )
        .unwrap();
        let q = newton_bvp(&f, 0.95, &(-p.initial()), None, &NewtonOptions::default()).unwrap();
        assert!((q.initial() + p.initial()).amax() < 1e-9);
    }

    #[test]
    fn brake_shooting() {
        let f = quartic();
        let o = SwitchOptions::default();
        let found = brake_shoot(&f, 0.95, &[0.2, 0.3], &o).unwrap();
        assert!(!found.is_empty());
        for p in &found {
            assert!((p.amplitude() - 0.05f64.sqrt()).abs() < 1e-7);
            assert!(p.boundary_residual <= 1e-8);
            assert!(p.initial()[0].abs() < 1e-12);
        }
        let lin = QuadraticQuartic::scalar_quartic(
            1,
            0.0,
            2.0 * PI,
            SymplecticMatrix::identity(1),
            (1.0, 1.0),
        )
        .unwrap();
        // Every y gives a brake circle; ±y lie on the same one.
        let found = brake_shoot(&lin, 1.0, &[0.1, 0.3], &o).unwrap();
        assert_eq!(found.len(), 2);
        assert!(found.iter().all(|p| p.kernel_dim == 1));
        let a0 = Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        let skew = QuadraticQuartic::linear(
            a0,
            Mat::identity(2, 2),
            1.0,
            SymplecticMatrix::identity(1),
            (0.0, 1.0),
        )
        .unwrap();
        assert!(matches!(
            brake_shoot(&skew, 0.5, &[0.1], &o),
            Err(Error::FlagViolation(_))
        ));
    }

    #[test]
    fn extension() {
        let times: Vec<f64> = (0..=8).map(|k| k as f64 * 0.25).collect();
        let c = Vector::from_vec(vec![0.3, 0.0]);
        let m = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 1.0]));
        let (ts, us) = extend_to_line(&times, &vec![c.clone(); 9], &m, 2, 1e-9).unwrap();
        assert_eq!(ts.len(), us.len());
        assert!(us.iter().all(|u| (u - &c).amax() == 0.0));
        assert!((ts[0] + 4.0).abs() < 1e-15 && (ts[ts.len() - 1] - 4.0).abs() < 1e-15);
        // Arc of e^{tJ} on [0, 1] with M = e^{J}.
        let theta = 1.0;
        let times: Vec<f64> = (0..=64).map(|k| k as f64 / 64.0).collect();
        let z0 = Vector::from_vec(vec![0.4, 0.1]);
        let arc: Vec<Vector> = times.iter().map(|&t| rotation(1, t) * &z0).collect();
        let m = rotation(1, theta);
        let (ts, us) = extend_to_line(&times, &arc, &m, 3, 1e-9).unwrap();
        for (t, u) in ts.iter().zip(&us) {
            assert!((u - rotation(1, *t) * &z0).amax() < 1e-12);
        }
        let bad: Vec<Vector> = arc.iter().map(|u| u * 1.1).collect();
        let mut bad = bad;
        bad[64] = Vector::zeros(2);
        assert!(matches!(
            extend_to_line(&times, &bad, &m, 1, 1e-9),
            Err(Error::MismatchedJunction { .. })
        ));
    }
}
