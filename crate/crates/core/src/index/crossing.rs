//! Crossing detection for a symplectic path against a fixed subspace condition:
//! the graph condition `Ker(γ(t) − M) ≠ 0`, or the Lagrangian conditions
//! `γ(t)U_k ∩ U_k ≠ 0` with `U₁ = {0}×Rⁿ`, `U₂ = Rⁿ×{0}`.
//!
//! Candidates come from local minima of the smallest normalized singular value on
//! the path grid; each is refined on a sub-sampled bracket with golden-section search.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::{
    j_matrix, rotation, spectral_norm, sym_eigen_sorted, Mat, PathSource, Vector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingKind {
    Start,
    Interior,
    Junction,
    End,
}

/// One crossing of the path with the target condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub t: f64,
    pub kind: CrossingKind,
    pub kernel_dim: usize,
    /// Signature of the crossing form (right-sided form at a junction).
    pub signature: i64,
    pub positive: usize,
    pub negative: usize,
    /// Smallest singular-value ratio left out of the kernel (1 when none is left out).
    pub margin: f64,
    /// Contribution to the index under the active endpoint rule.
    pub contribution: i64,
}

/// Which intersection condition is being crossed.
#[derive(Debug, Clone)]
pub enum Target {
    Graph(Mat),
    Lagrangian1,
    Lagrangian2,
}

impl Target {
    fn residual(&self, g: &Mat) -> Mat {
        let n = g.nrows() / 2;
        match self {
            Target::Graph(m) => g - m,
            Target::Lagrangian1 => g.view((0, n), (n, n)).into_owned(),
            Target::Lagrangian2 => g.view((n, 0), (n, n)).into_owned(),
        }
    }

    fn lift(&self, g: &Mat, v: &Vector) -> Vector {
        let n = g.nrows() / 2;
        match self {
            Target::Graph(_) => g * v,
            Target::Lagrangian1 => {
                let mut full = DVector::zeros(2 * n);
                full.rows_mut(n, n).copy_from(v);
                g * full
            }
            Target::Lagrangian2 => {
                let mut full = DVector::zeros(2 * n);
                full.rows_mut(0, n).copy_from(v);
                g * full
            }
        }
    }

    fn scale(&self, g: &Mat) -> f64 {
        match self {
            Target::Graph(m) => spectral_norm(g) + spectral_norm(m),
            _ => spectral_norm(g),
        }
    }
}

/// Endpoint convention for the crossing count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartRule {
    /// Start contributes `m⁺` of its form (graph indices).
    PlusPositive,
    /// Start contributes `−m⁻` of its form (brake indices).
    MinusNegative,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub tol_kernel: f64,
    pub tol_form: f64,
    /// Grid minima above this ratio are not refined.
    pub screen: f64,
    pub subsamples: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            tol_kernel: 1e-8,
            tol_form: 1e-9,
            screen: 0.25,
            subsamples: 16,
        }
    }
}

/// Kernel data of `residual(γ(t))`.
pub(crate) struct KernelData {
    pub basis: Mat,
    pub margin: f64,
}

pub(crate) fn kernel_of(target: &Target, g: &Mat, tol: f64) -> KernelData {
    let r = target.residual(g);
    let scale = target.scale(g).max(f64::MIN_POSITIVE);
    let k = r.ncols();
    let svd = r.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| {
        svd.singular_values[a]
            .partial_cmp(&svd.singular_values[b])
            .unwrap()
    });
    let ratios: Vec<f64> = idx
        .iter()
        .map(|&i| svd.singular_values[i] / scale)
        .collect();
    let dim = ratios.iter().filter(|&&x| x < tol).count();
    let mut basis = Mat::zeros(k, dim);
    for (c, &i) in idx.iter().take(dim).enumerate() {
        basis.set_column(c, &vt.row(i).transpose());
    }
    let margin = if dim < k { ratios[dim] } else { 1.0 };
    KernelData { basis, margin }
}

fn min_ratio(target: &Target, g: &Mat) -> f64 {
    ratio_profile(target, g).0
}

/// Smallest singular-value ratio and the log of the product of all ratios. Dips of any
/// singular branch show up as dips of the log-product even when another branch is
/// smaller but slowly varying.
pub(crate) fn ratio_profile(target: &Target, g: &Mat) -> (f64, f64) {
    let r = target.residual(g);
    let scale = target.scale(g).max(f64::MIN_POSITIVE);
    let sv = r.singular_values();
    let min = sv.min() / scale;
    let logsum = sv.iter().map(|s| (s / scale).max(1e-300).ln()).sum();
    (min, logsum)
}

struct FormSplit {
    positive: usize,
    negative: usize,
    degenerate: bool,
}

fn form_split(w: &Mat, b: &Mat, tol_form: f64) -> FormSplit {
    let q = w.transpose() * b * w;
    let (vals, _) = sym_eigen_sorted(&q);
    let ref_scale = (spectral_norm(b) * spectral_norm(w).powi(2)).max(1e-300);
    let thr = tol_form * ref_scale;
    FormSplit {
        positive: vals.iter().filter(|&&x| x > thr).count(),
        negative: vals.iter().filter(|&&x| x < -thr).count(),
        degenerate: vals.iter().any(|&x| x.abs() <= thr),
    }
}

/// Result of a crossing scan.
#[derive(Debug, Clone)]
pub struct CrossingScan {
    pub records: Vec<CrossingRecord>,
    pub count: i64,
}

pub(crate) fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = 0.618_033_988_749_894_9;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Scan `path` for crossings with `target` and sum their contributions.
pub fn scan(
    path: &dyn PathSource,
    target: &Target,
    rule: StartRule,
    opts: &ScanOptions,
) -> Result<CrossingScan> {
    let (a, b) = path.span();
    let grid = path.grid();
    let vals = path.grid_values();
    let breaks: Vec<f64> = path.breakpoints();
    let profile: Vec<(f64, f64)> = vals.iter().map(|g| ratio_profile(target, g)).collect();
    let ratios: Vec<f64> = profile.iter().map(|p| p.0).collect();
    let logs: Vec<f64> = profile.iter().map(|p| p.1).collect();
    let len = b - a;
    let merge_tol = 1e-9 * len.max(1e-300);

    let is_break = |t: f64| breaks.iter().any(|&x| (x - t).abs() <= merge_tol);

    // Persistent kernels cannot be resolved by crossing forms.
    for k in 1..grid.len().saturating_sub(3) {
        if (k..k + 3).all(|i| ratios[i] < opts.tol_kernel && !is_break(grid[i])) {
            return Err(Error::UnresolvedCrossing {
                t: grid[k],
                reason: "kernel persists across grid cells".into(),
            });
        }
    }

    let f = |t: f64| ratio_profile(target, &path.eval(t)).1;
    let mut found: Vec<f64> = Vec::new();
    let m = grid.len() - 1;
    for k in 0..=m {
        let tk = grid[k];
        let special = is_break(tk) || k == 0 || k == m;
        let left = if k > 0 { logs[k - 1] } else { f64::INFINITY };
        let right = if k < m { logs[k + 1] } else { f64::INFINITY };
        let local_min = logs[k] <= left && logs[k] <= right;
        if !(local_min || special) || ratios[k] > opts.screen {
            continue;
        }
        let mut brackets = Vec::new();
        if special {
            // The kernel at an endpoint or junction masks nearby dips at grid level.
            if k > 0 {
                let mut l = k - 1;
                while k - l < 8 && l > 0 && !is_break(grid[l]) {
                    l -= 1;
                }
                brackets.push((grid[l], tk, Some(tk)));
            }
            if k < m {
                let mut r = k + 1;
                while r - k < 8 && r < m && !is_break(grid[r]) {
                    r += 1;
                }
                brackets.push((tk, grid[r], Some(tk)));
            }
        } else {
            // Neighbouring crossings a few cells apart can share one grid-level dip.
            let (mut l, mut r) = (k - 1, k + 1);
            while k - l < 3 && l > 0 && !is_break(grid[l]) {
                l -= 1;
            }
            while r - k < 3 && r < m && !is_break(grid[r]) {
                r += 1;
            }
            brackets.push((grid[l], grid[r], None));
        }
        for (lo, hi, anchor) in brackets {
            let cells = ((hi - lo) / (grid[k.min(m - 1) + 1] - grid[k.min(m - 1)]))
                .round()
                .max(1.0) as usize;
            let n_uniform = opts.subsamples.max(4) * cells.min(8);
            let mut ts: Vec<f64> = (0..=n_uniform)
                .map(|i| lo + (hi - lo) * i as f64 / n_uniform as f64)
                .collect();
            // Resolving a degenerate kernel splits it into crossings clustered at the
            // special point; log-spaced samples separate them.
            if let Some(a0) = anchor {
                let dir = if a0 == lo { 1.0 } else { -1.0 };
                let mut d = hi - lo;
                while d > 1e-11 * len {
                    d /= 1.02;
                    ts.push(a0 + dir * d);
                }
                ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            }
            let s = ts.len() - 1;
            let fs: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
            for i in 0..=s {
                let l = if i > 0 { fs[i - 1] } else { f64::INFINITY };
                let r = if i < s { fs[i + 1] } else { f64::INFINITY };
                if fs[i] <= l && fs[i] <= r {
                    let (blo, bhi) = (ts[i.saturating_sub(1)], ts[(i + 1).min(s)]);
                    let (t, v) = golden_min(&f, blo, bhi);
                    let t = if fs[i] < v { ts[i] } else { t };
                    if min_ratio(target, &path.eval(t)) < opts.tol_kernel {
                        found.push(t);
                    }
                }
            }
        }
    }
    found.sort_by(|x, y| x.partial_cmp(y).unwrap());
    found.dedup_by(|x, y| (*x - *y).abs() <= 1e-7 * len);

    let mut records = Vec::new();
    let mut count = 0i64;
    let classify = |t: f64, kind: CrossingKind| -> Result<Option<CrossingRecord>> {
        let g = path.eval(t);
        let ker = kernel_of(target, &g, opts.tol_kernel);
        let dim = ker.basis.ncols();
        if dim == 0 {
            return Ok(None);
        }
        let mut w = Mat::zeros(g.nrows(), dim);
        for c in 0..dim {
            w.set_column(c, &target.lift(&g, &ker.basis.column(c).into_owned()));
        }
        let (split, contribution) = match kind {
            CrossingKind::Junction => {
                let l = form_split(&w, &path.generator(t, true), opts.tol_form);
                let r = form_split(&w, &path.generator(t, false), opts.tol_form);
                if l.degenerate || r.degenerate {
                    return Err(Error::UnresolvedCrossing {
                        t,
                        reason: "degenerate crossing form at junction".into(),
                    });
                }
                let c = r.positive as i64 - l.negative as i64;
                (r, c)
            }
            _ => {
                let gen = path.generator(t, kind == CrossingKind::End);
                let s = form_split(&w, &gen, opts.tol_form);
                if s.degenerate {
                    return Err(Error::UnresolvedCrossing {
                        t,
                        reason: format!("degenerate crossing form ({kind:?})"),
                    });
                }
                let c = match (kind, rule) {
                    (CrossingKind::Start, StartRule::PlusPositive) => s.positive as i64,
                    (CrossingKind::Start, StartRule::MinusNegative) => -(s.negative as i64),
                    (CrossingKind::End, _) => -(s.negative as i64),
                    _ => s.positive as i64 - s.negative as i64,
                };
                (s, c)
            }
        };
        Ok(Some(CrossingRecord {
            t,
            kind,
            kernel_dim: dim,
            signature: split.positive as i64 - split.negative as i64,
            positive: split.positive,
            negative: split.negative,
            margin: ker.margin,
            contribution,
        }))
    };

    let mut special: Vec<(f64, CrossingKind)> = vec![(a, CrossingKind::Start)];
    for &t in &breaks {
        if t > a + merge_tol && t < b - merge_tol {
            special.push((t, CrossingKind::Junction));
        }
    }
    special.push((b, CrossingKind::End));
    let mut special_hits = Vec::new();
    for &(t, kind) in &special {
        if let Some(rec) = classify(t, kind)? {
            special_hits.push(t);
            count += rec.contribution;
            records.push(rec);
        }
    }
    let near_special = |t: f64| {
        special
            .iter()
            .any(|&(s, _)| (s - t).abs() <= 1e-7 * len.max(1.0) && special_hits.contains(&s))
            || (t - a).abs() <= merge_tol
            || (t - b).abs() <= merge_tol
    };
    for t in found {
        if near_special(t) {
            continue;
        }
        if let Some(rec) = classify(t, CrossingKind::Interior)? {
            count += rec.contribution;
            records.push(rec);
        }
    }
    records.sort_by(|x, y| x.t.partial_cmp(&y.t).unwrap());
    Ok(CrossingScan { records, count })
}

/// `γ(t)·exp(−α(t − a)J)`: rotates endpoint crossings off degenerate positions.
pub struct Perturbed<'a> {
    pub base: &'a dyn PathSource,
    pub alpha: f64,
}

impl PathSource for Perturbed<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn span(&self) -> (f64, f64) {
        self.base.span()
    }
    fn grid(&self) -> Vec<f64> {
        self.base.grid()
    }
    fn grid_values(&self) -> Vec<Mat> {
        let a = self.span().0;
        let n = self.dim() / 2;
        self.base
            .grid()
            .iter()
            .zip(self.base.grid_values())
            .map(|(&t, g)| g * rotation(n, -self.alpha * (t - a)))
            .collect()
    }
    fn eval(&self, t: f64) -> Mat {
        let a = self.span().0;
        self.base.eval(t) * rotation(self.dim() / 2, -self.alpha * (t - a))
    }
    fn generator(&self, t: f64, from_left: bool) -> Mat {
        // B_α = B − α (Jγ)(Jγ)ᵀ with γ the unperturbed path.
        let g = self.base.eval(t);
        let jg = j_matrix(self.dim() / 2) * g;
        self.base.generator(t, from_left) - &jg * jg.transpose() * self.alpha
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints()
    }
}

/// `γ(t)·R` for a constant matrix `R`; the generator is unchanged.
pub struct RightMul<'a> {
    pub base: &'a dyn PathSource,
    pub right: Mat,
}

impl PathSource for RightMul<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn span(&self) -> (f64, f64) {
        self.base.span()
    }
    fn grid(&self) -> Vec<f64> {
        self.base.grid()
    }
    fn grid_values(&self) -> Vec<Mat> {
        self.base
            .grid_values()
            .into_iter()
            .map(|g| g * &self.right)
            .collect()
    }
    fn eval(&self, t: f64) -> Mat {
        self.base.eval(t) * &self.right
    }
    fn generator(&self, t: f64, from_left: bool) -> Mat {
        self.base.generator(t, from_left)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints()
    }
}

/// Catenation of paths whose consecutive endpoints agree, on a global time axis
/// starting at the first part's start time.
pub struct Catenation<'a> {
    parts: Vec<&'a dyn PathSource>,
    offsets: Vec<f64>,
}

impl<'a> Catenation<'a> {
    pub fn new(parts: Vec<&'a dyn PathSource>) -> Self {
        let mut offsets = Vec::with_capacity(parts.len());
        let mut cursor = parts[0].span().0;
        for p in &parts {
            let (s, e) = p.span();
            offsets.push(cursor - s);
            cursor += e - s;
        }
        Self { parts, offsets }
    }

    /// Part index and local time for a global time; at a junction the left part wins
    /// unless `right` is set.
    fn locate(&self, t: f64, right: bool) -> (usize, f64) {
        let last = self.parts.len() - 1;
        for (i, p) in self.parts.iter().enumerate() {
            let (_, e) = p.span();
            let end = e + self.offsets[i];
            if t < end || (t == end && !right) || i == last {
                return (i, (t - self.offsets[i]).clamp(p.span().0, e));
            }
        }
        unreachable!()
    }
}

impl PathSource for Catenation<'_> {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }
    fn span(&self) -> (f64, f64) {
        let last = self.parts.len() - 1;
        (
            self.parts[0].span().0,
            self.parts[last].span().1 + self.offsets[last],
        )
    }
    fn grid(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, p) in self.parts.iter().enumerate() {
            let g = p.grid();
            let skip = if i == 0 { 0 } else { 1 };
            out.extend(g.iter().skip(skip).map(|t| t + self.offsets[i]));
        }
        out
    }
    fn grid_values(&self) -> Vec<Mat> {
        let mut out = Vec::new();
        for (i, p) in self.parts.iter().enumerate() {
            let skip = if i == 0 { 0 } else { 1 };
            out.extend(p.grid_values().into_iter().skip(skip));
        }
        out
    }
    fn eval(&self, t: f64) -> Mat {
        let (i, local) = self.locate(t, false);
        self.parts[i].eval(local)
    }
    fn generator(&self, t: f64, from_left: bool) -> Mat {
        let (i, local) = self.locate(t, !from_left);
        self.parts[i].generator(local, from_left)
    }
    fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, p) in self.parts.iter().enumerate() {
            out.extend(p.breakpoints().iter().map(|t| t + self.offsets[i]));
            if i + 1 < self.parts.len() {
                out.push(p.span().1 + self.offsets[i]);
            }
        }
        out
    }
}

/// The constant path `I` on `[0, 1]`.
pub struct ConstantIdentity {
    pub dim: usize,
    pub samples: usize,
}

impl PathSource for ConstantIdentity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn span(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn grid(&self) -> Vec<f64> {
        (0..=self.samples)
            .map(|k| k as f64 / self.samples as f64)
            .collect()
    }
    fn eval(&self, _t: f64) -> Mat {
        Mat::identity(self.dim, self.dim)
    }
    fn generator(&self, _t: f64, _from_left: bool) -> Mat {
        Mat::zeros(self.dim, self.dim)
    }
}

/// `λ ↦ exp(λ J A)` on `[lo, hi]`, in closed form; its generator is `A`.
pub struct ExpPath {
    pub a: Mat,
    pub lo: f64,
    pub hi: f64,
    pub samples: usize,
    ja: Mat,
}

impl ExpPath {
    pub fn new(a: Mat, lo: f64, hi: f64, samples: usize) -> Self {
        let ja = j_matrix(a.nrows() / 2) * &a;
        Self {
            a,
            lo,
            hi,
            samples,
            ja,
        }
    }
}

impl PathSource for ExpPath {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn span(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
    fn grid(&self) -> Vec<f64> {
        (0..=self.samples)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / self.samples as f64)
            .collect()
    }
    fn eval(&self, t: f64) -> Mat {
        (&self.ja * t).exp()
    }
    fn generator(&self, _t: f64, _from_left: bool) -> Mat {
        self.a.clone()
    }
}
