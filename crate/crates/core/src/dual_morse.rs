//! Galerkin oracle for the dual quadratic form
//! `q(u) = (Λ⁻¹u, u) + ((B − K)⁻¹u, u)` on `L²([0, τ]; ℝ²ⁿ)`, where `Λ⁻¹u = w` solves
//! `Jẇ + Kw = u`, `w(τ) = Mw(0)`, and for its brake counterpart on the symmetric
//! subspace `z(−t) = Nz(t)`.
//!
//! Counts of negative and near-zero eigenvalues come from the inertia of
//! `G ± gap·I` (Bunch–Kaufman `LBLᵀ`), so no dense eigensolve is needed.

use std::num::NonZeroUsize;

use faer::linalg::solvers::Lblt;
use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::crossing::{golden_min, kernel_of, ratio_profile};
use crate::index::{maslov_index_with, IndexOptions, Target};
use crate::symplectic::{
    fundamental_solution, integral_exp_neg, j_matrix, rotation, sym_eigen_sorted, symmetrize,
    CoefficientPath, Mat, SymplecticMatrix, Vector,
};

/// Boundary data `(M, τ, K)` of the shifted operator `Jẇ + Kw` with `w(τ) = Mw(0)`.
#[derive(Debug, Clone)]
pub struct DualOperatorSpec {
    boundary: SymplecticMatrix,
    tau: f64,
    k: f64,
    margin: f64,
    /// `𝔍⁻¹ = (I − γ_K(τ)⁻¹M)⁻¹`.
    jfrak_inv: Mat,
}

impl DualOperatorSpec {
    pub fn new(boundary: SymplecticMatrix, tau: f64, k: f64) -> Result<Self> {
        if !(tau > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need τ > 0 and finite K, got τ = {tau}, K = {k}"
            )));
        }
        let n = boundary.n();
        let gk = rotation(n, k * tau);
        let margin = (&gk - boundary.matrix()).determinant().abs();
        if margin <= 1e-8 {
            return Err(Error::DegenerateSpec { margin });
        }
        let jfrak = Mat::identity(2 * n, 2 * n) - rotation(n, -k * tau) * boundary.matrix();
        let jfrak_inv = jfrak
            .try_inverse()
            .ok_or_else(|| Error::Singular("I − γ_K(τ)⁻¹M".into()))?;
        Ok(Self {
            boundary,
            tau,
            k,
            margin,
            jfrak_inv,
        })
    }

    pub fn n(&self) -> usize {
        self.boundary.n()
    }

    pub fn dim(&self) -> usize {
        2 * self.n()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn shift(&self) -> f64 {
        self.k
    }

    pub fn boundary(&self) -> &SymplecticMatrix {
        &self.boundary
    }

    /// `|det(γ_K(τ) − M)|`.
    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn jfrak_inv(&self) -> &Mat {
        &self.jfrak_inv
    }
}

/// `Λ⁻¹u` for `u` piecewise constant on a uniform grid (one value per cell), returned at
/// the `cells + 1` grid nodes. Cell integrals against `exp(−KsJ)` are exact.
pub fn lambda_inverse(u: &[Vector], spec: &DualOperatorSpec) -> Result<Vec<Vector>> {
    let m = u.len();
    if m == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let (n, dim) = (spec.n(), spec.dim());
    if u.iter().any(|v| v.len() != dim) {
        return Err(Error::Dimension(format!("samples must have length {dim}")));
    }
    let h = spec.tau / m as f64;
    let j = j_matrix(n);
    // I_t = ∫₀ᵗ exp(−KsJ) J u(s) ds at the nodes.
    let mut partial = Vec::with_capacity(m + 1);
    partial.push(Vector::zeros(dim));
    for (c, uc) in u.iter().enumerate() {
        let a = c as f64 * h;
        let step = integral_exp_neg(n, spec.k, a, a + h) * (&j * uc);
        let next = partial[c].clone() + step;
        partial.push(next);
    }
    let w0 = &spec.jfrak_inv * &partial[m];
    Ok((0..=m)
        .map(|c| rotation(n, spec.k * c as f64 * h) * (&w0 - &partial[c]))
        .collect())
}

/// Orthonormal Legendre shape `k` at reference point `x ∈ [−1, 1]` on a cell of width `h`.
fn shape(k: usize, x: f64, h: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    let pk = match k {
        0 => 1.0,
        1 => x,
        _ => {
            for j in 1..k {
                let jf = j as f64;
                let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    };
    pk * ((2 * k + 1) as f64 / h).sqrt()
}

fn gauss_rule(q: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(NonZeroUsize::new(q).expect("positive rule size"))
        .as_node_weight_pairs()
        .to_vec()
}

/// Discontinuous Legendre basis of degree `p` on `m` uniform cells, each shape times
/// one coordinate direction. Index order: `(cell·(p+1) + k)·2n + a`.
#[derive(Debug, Clone)]
pub struct LegendreBasis {
    pub cells: usize,
    pub degree: usize,
    pub tau: f64,
    pub dim: usize,
    rule: Vec<(f64, f64)>,
}

impl LegendreBasis {
    pub fn new(cells: usize, degree: usize, tau: f64, dim: usize) -> Self {
        Self {
            cells,
            degree,
            tau,
            dim,
            rule: gauss_rule(degree + 6),
        }
    }

    pub fn h(&self) -> f64 {
        self.tau / self.cells as f64
    }

    pub fn size(&self) -> usize {
        self.cells * (self.degree + 1) * self.dim
    }

    /// Quadrature nodes `(t, weight)` of cell `c`.
    pub fn cell_nodes(&self, c: usize) -> Vec<(f64, f64)> {
        let h = self.h();
        let t0 = c as f64 * h;
        self.rule
            .iter()
            .map(|&(x, w)| (t0 + 0.5 * (x + 1.0) * h, 0.5 * w * h))
            .collect()
    }

    /// Shape values `P_k` at the reference quadrature nodes, `[node][k]`.
    pub fn shapes_at_nodes(&self) -> Vec<Vec<f64>> {
        let h = self.h();
        self.rule
            .iter()
            .map(|&(x, _)| (0..=self.degree).map(|k| shape(k, x, h)).collect())
            .collect()
    }

    /// Function value at time `t` from basis coefficients.
    pub fn value_at(&self, coeffs: &[f64], t: f64) -> Vector {
        let h = self.h();
        let c = ((t / h).floor() as isize).clamp(0, self.cells as isize - 1) as usize;
        let x = 2.0 * (t - c as f64 * h) / h - 1.0;
        let p = self.degree + 1;
        let mut out = Vector::zeros(self.dim);
        for k in 0..p {
            let s = shape(k, x, h);
            for a in 0..self.dim {
                out[a] += s * coeffs[(c * p + k) * self.dim + a];
            }
        }
        out
    }
}

/// Action of `Λ⁻¹` on a Legendre basis, in `O(N)` per product.
///
/// `E_{c,k} = ∫_cell P_k(s) exp(−KsJ) ds = α I + β J` and the within-cell part is
/// `J(γ I + δ J)` with `γ + iδ = ∬_{s<t} P_k'(t) P_k(s) e^{iK(t−s)}`, the same on every cell.
#[derive(Debug, Clone)]
pub struct LambdaInverseOp {
    pub basis: LegendreBasis,
    spec: DualOperatorSpec,
    /// `(α, β)` per `(cell, k)`.
    e: Vec<(f64, f64)>,
    /// `(γ, δ)` per `(k', k)`.
    d: Vec<(f64, f64)>,
}

impl LambdaInverseOp {
    pub fn new(spec: &DualOperatorSpec, cells: usize, degree: usize) -> Self {
        let basis = LegendreBasis::new(cells, degree, spec.tau, spec.dim());
        let p = degree + 1;
        let h = basis.h();
        let k = spec.k;
        let shapes = basis.shapes_at_nodes();
        let mut e = Vec::with_capacity(cells * p);
        for c in 0..cells {
            let nodes = basis.cell_nodes(c);
            for kk in 0..p {
                let (mut al, mut be) = (0.0, 0.0);
                for (g, &(t, w)) in nodes.iter().enumerate() {
                    al += w * shapes[g][kk] * (k * t).cos();
                    be -= w * shapes[g][kk] * (k * t).sin();
                }
                e.push((al, be));
            }
        }
        let mut d = vec![(0.0, 0.0); p * p];
        for &(x, wx) in &basis.rule {
            let t = 0.5 * (x + 1.0) * h;
            let wt = 0.5 * wx * h;
            for &(y, wy) in &basis.rule {
                let s = 0.5 * (y + 1.0) * t;
                let ws = 0.5 * wy * t;
                let ys = 2.0 * s / h - 1.0;
                let (cs, sn) = ((k * (t - s)).cos(), (k * (t - s)).sin());
                for k1 in 0..p {
                    let a = wt * shape(k1, x, h);
                    for k2 in 0..p {
                        let b = ws * shape(k2, ys, h);
                        d[k1 * p + k2].0 += a * b * cs;
                        d[k1 * p + k2].1 += a * b * sn;
                    }
                }
            }
        }
        Self {
            basis,
            spec: spec.clone(),
            e,
            d,
        }
    }

    pub fn spec(&self) -> &DualOperatorSpec {
        &self.spec
    }

    fn n(&self) -> usize {
        self.spec.n()
    }

    /// `E_{c,k} v = (αI + βJ) v`.
    fn apply_e(&self, r: usize, v: &[f64], out: &mut [f64]) {
        let (al, be) = self.e[r];
        let n = self.n();
        for i in 0..n {
            out[i] = al * v[i] - be * v[n + i];
            out[n + i] = al * v[n + i] + be * v[i];
        }
    }

    /// `E_{c,k}ᵀ v = (αI − βJ) v`.
    fn apply_et(&self, r: usize, v: &[f64], out: &mut [f64]) {
        let (al, be) = self.e[r];
        let n = self.n();
        for i in 0..n {
            out[i] = al * v[i] + be * v[n + i];
            out[n + i] = al * v[n + i] - be * v[i];
        }
    }

    /// `y_j = (Λ⁻¹u, φ_j)` for `u = Σ cᵢ φᵢ`.
    pub fn apply(&self, coeffs: &[f64]) -> Vec<f64> {
        let dim = self.spec.dim();
        let n = self.n();
        let p = self.basis.degree + 1;
        let cells = self.basis.cells;
        let mut buf = vec![0.0; dim];
        let mut total = Vector::zeros(dim);
        let mut per_row: Vec<Vec<f64>> = Vec::with_capacity(cells * p);
        for r in 0..cells * p {
            self.apply_e(r, &coeffs[r * dim..(r + 1) * dim], &mut buf);
            for a in 0..dim {
                total[a] += buf[a];
            }
            per_row.push(buf.clone());
        }
        let j = j_matrix(n);
        let xt = (&self.spec.jfrak_inv * &j) * &total;
        let mut out = vec![0.0; coeffs.len()];
        let mut before = Vector::zeros(dim);
        let mut tmp = vec![0.0; dim];
        for c in 0..cells {
            // J·Σ_{cells < c} E_i cᵢ
            let jb = &j * &before;
            let v: Vec<f64> = (0..dim).map(|a| xt[a] - jb[a]).collect();
            for k1 in 0..p {
                let r = c * p + k1;
                self.apply_et(r, &v, &mut tmp);
                let o = &mut out[r * dim..(r + 1) * dim];
                o.copy_from_slice(&tmp);
                for k2 in 0..p {
                    let (g, dl) = self.d[k1 * p + k2];
                    let src = &coeffs[(c * p + k2) * dim..(c * p + k2 + 1) * dim];
                    // J(γI + δJ) = γJ − δI
                    for i in 0..n {
                        o[i] -= -g * src[n + i] - dl * src[i];
                        o[n + i] -= g * src[i] - dl * src[n + i];
                    }
                }
            }
            for k1 in 0..p {
                let r = c * p + k1;
                for a in 0..dim {
                    before[a] += per_row[r][a];
                }
            }
        }
        out
    }

    /// `(Λ⁻¹u)(t_c)` at the `cells + 1` cell endpoints for `u = Σ cᵢ φᵢ`.
    pub fn node_values(&self, coeffs: &[f64]) -> Vec<Vector> {
        let dim = self.spec.dim();
        let n = self.n();
        let p = self.basis.degree + 1;
        let cells = self.basis.cells;
        let j = j_matrix(n);
        let mut buf = vec![0.0; dim];
        let mut partial = Vec::with_capacity(cells + 1);
        partial.push(Vector::zeros(dim));
        for c in 0..cells {
            let mut acc = partial[c].clone();
            for k in 0..p {
                let r = c * p + k;
                self.apply_e(r, &coeffs[r * dim..(r + 1) * dim], &mut buf);
                for a in 0..dim {
                    acc[a] += buf[a];
                }
            }
            partial.push(acc);
        }
        let w0 = &self.spec.jfrak_inv * &j * &partial[cells];
        let h = self.basis.h();
        (0..=cells)
            .map(|c| rotation(n, self.spec.k * c as f64 * h) * (&w0 - &j * &partial[c]))
            .collect()
    }

    /// Dense matrix of `(Λ⁻¹φᵢ, φⱼ)`, row `j`, column `i`.
    pub fn dense(&self) -> Mat {
        let dim = self.spec.dim();
        let n = self.n();
        let p = self.basis.degree + 1;
        let size = self.basis.size();
        let rows = self.basis.cells * p;
        // Row j of `ev` is E_jᵀ.
        let mut ev = Mat::zeros(size, dim);
        let mut unit = vec![0.0; dim];
        let mut buf = vec![0.0; dim];
        for r in 0..rows {
            for a in 0..dim {
                unit.iter_mut().for_each(|x| *x = 0.0);
                unit[a] = 1.0;
                self.apply_e(r, &unit, &mut buf);
                for b in 0..dim {
                    ev[(r * dim + a, b)] = buf[b];
                }
            }
        }
        let j = j_matrix(n);
        let mut g = &ev * (&self.spec.jfrak_inv * &j) * ev.transpose();
        let ej = &ev * &j;
        let block = p * dim;
        for col in 0..size {
            let cc = col / block;
            for row in (cc + 1) * block..size {
                let mut s = 0.0;
                for b in 0..dim {
                    s += ej[(row, b)] * ev[(col, b)];
                }
                g[(row, col)] -= s;
            }
        }
        for c in 0..self.basis.cells {
            for k1 in 0..p {
                for k2 in 0..p {
                    let (gm, dl) = self.d[k1 * p + k2];
                    let r0 = (c * p + k1) * dim;
                    let c0 = (c * p + k2) * dim;
                    for i in 0..n {
                        g[(r0 + i, c0 + n + i)] += gm;
                        g[(r0 + i, c0 + i)] += dl;
                        g[(r0 + n + i, c0 + i)] -= gm;
                        g[(r0 + n + i, c0 + n + i)] += dl;
                    }
                }
            }
        }
        g
    }
}

/// Dense Galerkin matrix of a quadratic form with its spectral summary.
#[derive(Debug, Clone)]
pub struct GalerkinAssembly {
    /// Cells (general case) or trigonometric modes per component (brake case).
    pub basis_size: usize,
    pub basis: String,
    pub g: Mat,
    /// Largest entry of `G − Gᵀ` before symmetrization.
    pub asymmetry: f64,
    /// `min_t λ_min(B(t) − K)` over the quadrature nodes.
    pub epsilon: f64,
    /// Ascending eigenvalues, filled when requested.
    pub eigenvalues: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorseCount {
    pub m_minus: usize,
    pub m_zero: usize,
    pub gap: f64,
    pub basis_size: usize,
    /// Counts at twice the basis size agree.
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct GalerkinOptions {
    pub degree: usize,
    /// Assemble again at twice the size and compare counts.
    pub refine: bool,
    pub spectrum: bool,
}

impl Default for GalerkinOptions {
    fn default() -> Self {
        Self {
            degree: 1,
            refine: true,
            spectrum: false,
        }
    }
}

/// Number of negative eigenvalues of `g + shift·I`. `g` is restored on return.
fn negative_inertia(g: &mut Mat, shift: f64) -> usize {
    let n = g.nrows();
    for i in 0..n {
        g[(i, i)] += shift;
    }
    let a = faer::MatRef::from_column_major_slice(g.as_slice(), n, n);
    let f = Lblt::new(a, faer::Side::Lower);
    for i in 0..n {
        g[(i, i)] -= shift;
    }
    let diag = f.B_diag();
    let sub = f.B_subdiag();
    let mut neg = 0;
    let mut i = 0;
    while i < n {
        let s = if i + 1 < n { sub[i] } else { 0.0 };
        if s != 0.0 {
            let (a, c) = (diag[i], diag[i + 1]);
            let det = a * c - s * s;
            if det < 0.0 {
                neg += 1;
            } else if a + c < 0.0 {
                neg += 2;
            }
            i += 2;
        } else {
            if diag[i] < 0.0 {
                neg += 1;
            }
            i += 1;
        }
    }
    neg
}

fn inf_norm(g: &Mat) -> f64 {
    g.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(m⁻, m⁰, gap)` with `gap = max(1e−7, 10·ε_mach·‖G‖)`.
fn count(g: &mut Mat) -> (usize, usize, f64) {
    let gap = (10.0 * f64::EPSILON * inf_norm(g)).max(1e-7);
    let below = negative_inertia(g, gap);
    let upto = negative_inertia(g, -gap);
    (below, upto.saturating_sub(below), gap)
}

fn shift_margin(b: &CoefficientPath, k: f64, times: impl Iterator<Item = f64>) -> Result<f64> {
    let dim = b.dim();
    let mut eps = f64::INFINITY;
    let mut worst = (f64::INFINITY, f64::NEG_INFINITY);
    for t in times {
        let (vals, _) = sym_eigen_sorted(&(b.eval(t) - Mat::identity(dim, dim) * k));
        if vals[0] < eps {
            eps = vals[0];
            worst = (vals[0], *vals.last().unwrap());
        }
    }
    if !(eps > 0.0) {
        return Err(Error::Indefinite {
            min: worst.0,
            max: worst.1,
        });
    }
    Ok(eps)
}

fn assemble(
    b: &CoefficientPath,
    spec: &DualOperatorSpec,
    cells: usize,
    degree: usize,
) -> Result<GalerkinAssembly> {
    if b.dim() != spec.dim() {
        return Err(Error::Dimension(
            "coefficient and boundary matrix differ in size".into(),
        ));
    }
    if cells == 0 {
        return Err(Error::InvalidArgument("basis size must be positive".into()));
    }
    let op = LambdaInverseOp::new(spec, cells, degree);
    let basis = &op.basis;
    let eps = shift_margin(
        b,
        spec.k,
        (0..cells).flat_map(|c| basis.cell_nodes(c).into_iter().map(|(t, _)| t)),
    )?;
    let mut g = op.dense();
    let dim = spec.dim();
    let p = degree + 1;
    let shapes = basis.shapes_at_nodes();
    for c in 0..cells {
        for (q, &(t, w)) in basis.cell_nodes(c).iter().enumerate() {
            let cm = (b.eval(t) - Mat::identity(dim, dim) * spec.k)
                .try_inverse()
                .ok_or_else(|| Error::Singular(format!("B − K at t = {t}")))?;
            for k1 in 0..p {
                for k2 in 0..p {
                    let f = w * shapes[q][k1] * shapes[q][k2];
                    let r0 = (c * p + k1) * dim;
                    let c0 = (c * p + k2) * dim;
                    for x in 0..dim {
                        for y in 0..dim {
                            g[(r0 + x, c0 + y)] += f * cm[(x, y)];
                        }
                    }
                }
            }
        }
    }
    let asymmetry = symmetrize_in_place(&mut g);
    Ok(GalerkinAssembly {
        basis_size: cells,
        basis: format!("discontinuous Legendre, degree {degree}, {cells} cells"),
        g,
        asymmetry,
        epsilon: eps,
        eigenvalues: None,
    })
}

fn symmetrize_in_place(g: &mut Mat) -> f64 {
    let n = g.nrows();
    let mut asym: f64 = 0.0;
    for j in 0..n {
        for i in j + 1..n {
            let (a, b) = (g[(i, j)], g[(j, i)]);
            asym = asym.max((a - b).abs());
            let m = 0.5 * (a + b);
            g[(i, j)] = m;
            g[(j, i)] = m;
        }
    }
    asym
}

fn finish(
    mut asm: GalerkinAssembly,
    refined: Option<GalerkinAssembly>,
    spectrum: bool,
) -> (GalerkinAssembly, MorseCount) {
    let (m_minus, m_zero, gap) = count(&mut asm.g);
    let converged = match refined {
        Some(mut r) => {
            let (a, b, _) = count(&mut r.g);
            if (a, b) != (m_minus, m_zero) {
                log::warn!(
                    "{}: counts ({m_minus}, {m_zero}) change to ({a}, {b}) under refinement",
                    asm.basis
                );
            }
            (a, b) == (m_minus, m_zero)
        }
        None => false,
    };
    if spectrum {
        let (vals, _) = sym_eigen_sorted(&asm.g);
        asm.eigenvalues = Some(vals);
    }
    let mc = MorseCount {
        m_minus,
        m_zero,
        gap,
        basis_size: asm.basis_size,
        converged,
    };
    (asm, mc)
}

pub fn assemble_and_count(
    b: &CoefficientPath,
    spec: &DualOperatorSpec,
    m: usize,
) -> Result<(GalerkinAssembly, MorseCount)> {
    assemble_and_count_with(b, spec, m, &GalerkinOptions::default())
}

/// Galerkin counts `(m⁻, m⁰)` of `q_{M,B|K}` on `m` cells, checked against `2m` cells.
pub fn assemble_and_count_with(
    b: &CoefficientPath,
    spec: &DualOperatorSpec,
    m: usize,
    opts: &GalerkinOptions,
) -> Result<(GalerkinAssembly, MorseCount)> {
    let asm = assemble(b, spec, m, opts.degree)?;
    let refined = if opts.refine {
        Some(assemble(b, spec, 2 * m, opts.degree)?)
    } else {
        None
    };
    Ok(finish(asm, refined, opts.spectrum))
}

/// The values the index identities predict for `(m⁻, m⁰)`:
/// `i(γ_B) − i(γ_K) − ν(γ_K)` and `ν(γ_B)`.
pub fn predicted_counts(
    b: &CoefficientPath,
    spec: &DualOperatorSpec,
    steps: usize,
    opts: &IndexOptions,
) -> Result<(i64, usize)> {
    let bb = b.clone().with_tau(spec.tau);
    let gb = fundamental_solution(&bb, steps)?;
    let rb = maslov_index_with(&gb, &spec.boundary, opts)?;
    let gk = fundamental_solution(&CoefficientPath::scalar(spec.n(), spec.k, spec.tau), steps)?;
    let rk = maslov_index_with(&gk, &spec.boundary, opts)?;
    Ok((rb.i - rk.i - rk.nu as i64, rb.nu))
}

/// Options for [`relative_morse_with`].
#[derive(Debug, Clone)]
pub struct RelativeOptions {
    /// Minimum number of samples in `s`.
    pub samples: usize,
    pub steps: usize,
    pub tol_kernel: f64,
}

impl Default for RelativeOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            steps: 1024,
            tol_kernel: 1e-8,
        }
    }
}

pub fn relative_morse(
    b1: &CoefficientPath,
    b2: &CoefficientPath,
    spec: &DualOperatorSpec,
) -> Result<usize> {
    relative_morse_with(b1, b2, spec, &RelativeOptions::default())
}

/// `Σ_{s∈[0,1)} ν_{τ,M}((1−s)B₁ + sB₂)` by a nullity scan over `s`.
pub fn relative_morse_with(
    b1: &CoefficientPath,
    b2: &CoefficientPath,
    spec: &DualOperatorSpec,
    opts: &RelativeOptions,
) -> Result<usize> {
    if b1.dim() != spec.dim() || b2.dim() != spec.dim() {
        return Err(Error::Dimension(
            "coefficients and boundary matrix differ in size".into(),
        ));
    }
    let tau = spec.tau;
    let mut spread: f64 = 0.0;
    for q in 0..=32 {
        let t = tau * q as f64 / 32.0;
        let diff = b2.eval(t) - b1.eval(t);
        let (vals, _) = sym_eigen_sorted(&diff);
        if !(vals[0] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "B₂ − B₁ not positive definite at t = {t}"
            )));
        }
        spread = spread.max(*vals.last().unwrap());
    }
    let (b1, b2) = (b1.clone().with_tau(tau), b2.clone().with_tau(tau));
    let target = Target::Graph(spec.boundary.matrix().clone());
    let end = |s: f64| -> Result<Mat> {
        let bs = CoefficientPath::interpolate(&b1, &b2, s);
        Ok(fundamental_solution(&bs, opts.steps)?.monodromy().clone())
    };
    // Eigen-angles move by at most ‖B₂ − B₁‖τ over the homotopy.
    let samples = opts
        .samples
        .max((16.0 * spread * tau / std::f64::consts::PI).ceil() as usize);
    let grid: Vec<f64> = (0..=samples).map(|k| k as f64 / samples as f64).collect();
    let mut prof = Vec::with_capacity(grid.len());
    for &s in &grid {
        prof.push(ratio_profile(&target, &end(s)?));
    }
    let mut finds: Vec<(f64, usize)> = Vec::new();
    let k0 = kernel_of(&target, &end(0.0)?, opts.tol_kernel)
        .basis
        .ncols();
    if k0 > 0 {
        finds.push((0.0, k0));
    }
    let logp = |s: f64| -> f64 {
        match end(s) {
            Ok(g) => ratio_profile(&target, &g).1,
            Err(_) => f64::INFINITY,
        }
    };
    let last = grid.len() - 1;
    for i in 0..=last {
        let left = if i > 0 { prof[i - 1].1 } else { f64::INFINITY };
        let right = if i < last {
            prof[i + 1].1
        } else {
            f64::INFINITY
        };
        if prof[i].1 > left || prof[i].1 > right {
            continue;
        }
        let (lo, hi) = (grid[i.saturating_sub(1)], grid[(i + 1).min(last)]);
        let (s, _) = golden_min(&logp, lo, hi);
        if s >= 1.0 - 1e-9 || s <= 1e-9 {
            continue;
        }
        let kd = kernel_of(&target, &end(s)?, opts.tol_kernel).basis.ncols();
        if kd > 0 && !finds.iter().any(|&(x, _)| (x - s).abs() <= 1e-7) {
            finds.push((s, kd));
        }
    }
    log::debug!("relative nullity crossings: {finds:?}");
    Ok(finds.iter().map(|&(_, k)| k).sum())
}

/// Galerkin counts of the brake form `Q_{B,K}` on the symmetric subspace
/// `z(−t) = Nz(t)` of `L²(ℝ/τℤ; ℝ²ⁿ)`, with `modes` trigonometric modes per component.
pub fn brake_assemble_and_count(
    b: &CoefficientPath,
    k: f64,
    modes: usize,
) -> Result<(GalerkinAssembly, MorseCount)> {
    brake_assemble_and_count_with(b, k, modes, &GalerkinOptions::default())
}

pub fn brake_assemble_and_count_with(
    b: &CoefficientPath,
    k: f64,
    modes: usize,
    opts: &GalerkinOptions,
) -> Result<(GalerkinAssembly, MorseCount)> {
    b.check_reversible(64)?;
    let tau = b.tau();
    let omega = 2.0 * std::f64::consts::PI / tau;
    let ratio = k / omega;
    if (ratio - ratio.round()).abs() <= 1e-9 {
        return Err(Error::DegenerateSpec {
            margin: (ratio - ratio.round()).abs(),
        });
    }
    let asm = brake_assemble(b, k, modes)?;
    let refined = if opts.refine {
        Some(brake_assemble(b, k, 2 * modes)?)
    } else {
        None
    };
    Ok(finish(asm, refined, opts.spectrum))
}

fn brake_assemble(b: &CoefficientPath, k: f64, modes: usize) -> Result<GalerkinAssembly> {
    if modes == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    let n = b.n();
    let dim = 2 * n;
    let tau = b.tau();
    let omega = 2.0 * std::f64::consts::PI / tau;
    // Basis: x_i·sin(jωt), j = 1..=modes, then y_i·cos(jωt), j = 0..=modes, orthonormal.
    let nx = n * modes;
    let size = nx + n * (modes + 1);
    let xs = |i: usize, j: usize| i * modes + (j - 1);
    let yc = |i: usize, j: usize| nx + i * (modes + 1) + j;

    let mut g = Mat::zeros(size, size);
    for i in 0..n {
        g[(yc(i, 0), yc(i, 0))] = 1.0 / k;
        for j in 1..=modes {
            let w = omega * j as f64;
            // inverse of [[K, w], [w, K]]
            let det = k * k - w * w;
            let (p, q) = (xs(i, j), yc(i, j));
            g[(p, p)] = k / det;
            g[(q, q)] = k / det;
            g[(p, q)] = -w / det;
            g[(q, p)] = -w / det;
        }
    }

    // Fourier moments of C = (B − K)⁻¹ up to 2·modes on a periodic trapezoid grid.
    let lmax = 2 * modes;
    let q = (4 * lmax + 64).max(256);
    let times: Vec<f64> = (0..q).map(|s| tau * s as f64 / q as f64).collect();
    let eps = shift_margin(b, k, times.iter().copied())?;
    let cs: Vec<Mat> = times
        .iter()
        .map(|&t| {
            (b.eval(t) - Mat::identity(dim, dim) * k)
                .try_inverse()
                .ok_or_else(|| Error::Singular(format!("B − K at t = {t}")))
        })
        .collect::<Result<_>>()?;
    let wq = tau / q as f64;
    // mc[l][(x,y)] = ∫ C_xy cos(lωt), ms likewise with sin.
    let mut mc = vec![Mat::zeros(dim, dim); lmax + 1];
    let mut ms = vec![Mat::zeros(dim, dim); lmax + 1];
    for (s, c) in cs.iter().enumerate() {
        for l in 0..=lmax {
            let arg = omega * (l * s) as f64 * tau / q as f64;
            let (co, si) = (arg.cos() * wq, arg.sin() * wq);
            mc[l].zip_apply(c, |a, b| *a += co * b);
            ms[l].zip_apply(c, |a, b| *a += si * b);
        }
    }
    let cosm = |x: usize, y: usize, l: isize| mc[l.unsigned_abs()][(x, y)];
    let sinm = |x: usize, y: usize, l: isize| l.signum() as f64 * ms[l.unsigned_abs()][(x, y)];
    let norm = |j: usize| if j == 0 { 1.0 / tau } else { 2.0 / tau };
    // (kind, coordinate, frequency) per basis index; kind 0 = sin, 1 = cos.
    let mut info = Vec::with_capacity(size);
    for i in 0..n {
        for j in 1..=modes {
            info.push((0u8, i, j));
        }
    }
    for i in 0..n {
        for j in 0..=modes {
            info.push((1u8, n + i, j));
        }
    }
    for r in 0..size {
        let (kr, xr, jr) = info[r];
        for c in r..size {
            let (kc, xc, jc) = info[c];
            let (a, bb) = (jr as isize, jc as isize);
            let v = match (kr, kc) {
                (0, 0) => 0.5 * (cosm(xr, xc, a - bb) - cosm(xr, xc, a + bb)),
                (1, 1) => 0.5 * (cosm(xr, xc, a - bb) + cosm(xr, xc, a + bb)),
                (0, 1) => 0.5 * (sinm(xr, xc, a + bb) + sinm(xr, xc, a - bb)),
                _ => 0.5 * (sinm(xr, xc, a + bb) + sinm(xr, xc, bb - a)),
            };
            let v = v * (norm(jr) * norm(jc)).sqrt();
            g[(r, c)] += v;
            if c != r {
                g[(c, r)] += v;
            }
        }
    }
    let asymmetry = 0.0;
    let g = symmetrize(&g);
    Ok(GalerkinAssembly {
        basis_size: modes,
        basis: format!("brake trigonometric, {modes} modes"),
        g,
        asymmetry,
        epsilon: eps,
        eigenvalues: None,
    })
}
