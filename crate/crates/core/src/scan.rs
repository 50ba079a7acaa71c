//! Index profiles `λ ↦ (i_{τ,M}(γ_λ), ν_{τ,M}(γ_λ))` along a trivial branch, and
//! classification of the parameters where the profile says a bifurcation may occur.
//!
//! Every candidate carries the flanking index values that were actually observed, the
//! resolution at which they were observed, and the gates that were checked.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::brake::{brake_maslov, brake_nullities_tol};
use crate::error::{Error, Result};
use crate::family::{linearization, HamiltonianFamily};
use crate::index::crossing::{self, kernel_of, CrossingKind, StartRule, Target};
use crate::index::{
    base_index, maslov_index_with, nullity_rel, IndexOptions, IndexReport, StairPiece,
};
use crate::symplectic::{
    fundamental_solution, fundamental_solution_on, sym_eigen_sorted, CoefficientPath, Mat,
    SymplecticMatrix, Vector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    FixedPeriod,
    AutonomousOrbit,
    EquilibriumOrbit,
    Brake,
}

impl std::str::FromStr for ScanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_period" => Ok(Self::FixedPeriod),
            "autonomous_orbit" => Ok(Self::AutonomousOrbit),
            "equilibrium_orbit" => Ok(Self::EquilibriumOrbit),
            "brake" => Ok(Self::Brake),
            _ => Err(Error::InvalidArgument(format!("unknown scan mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    NecessaryOnly,
    Jump,
    Rabinowitz,
    MonotoneFamily,
    OrbitJump,
    OrbitRabinowitz,
    EquilibriumOrbit,
    BrakeJump,
    BrakeRabinowitz,
    DeformationCrossing,
    None,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::NecessaryOnly => "NECESSARY_ONLY",
            Self::Jump => "JUMP",
            Self::Rabinowitz => "RABINOWITZ",
            Self::MonotoneFamily => "MONOTONE_FAMILY",
            Self::OrbitJump => "ORBIT_JUMP",
            Self::OrbitRabinowitz => "ORBIT_RABINOWITZ",
            Self::EquilibriumOrbit => "EQUILIBRIUM_ORBIT",
            Self::BrakeJump => "BRAKE_JUMP",
            Self::BrakeRabinowitz => "BRAKE_RABINOWITZ",
            Self::DeformationCrossing => "DEFORMATION_CROSSING",
            Self::None => "NONE",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct ProfileOptions {
    /// Integration steps over one period.
    pub steps: usize,
    pub index: IndexOptions,
    /// Also compute the brake pair `(μ₁, ν₁)` at every `λ`.
    pub brake: bool,
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            steps: 4096,
            index: IndexOptions::default(),
            brake: false,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrakeEntry {
    pub mu1: i64,
    pub nu1: usize,
    pub mu2: i64,
    pub nu2: usize,
    /// Kernel vectors `(0, y)` with `y ∈ Ker B` of `γ(τ/2)`.
    pub kernel: Vec<Vec<f64>>,
    /// Dimension of the kernel part whose solutions stay in `{0}×ℝⁿ` on `[0, τ/2]`.
    pub even_kernel_dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub lambda: f64,
    pub report: Option<IndexReport>,
    /// Orthonormal basis of `Ker(γ_λ(τ) − M)`.
    pub kernel: Vec<Vec<f64>>,
    pub brake: Option<BrakeEntry>,
    /// Set when the crossing count could not be resolved at this `λ`.
    pub unresolved: Option<String>,
}

impl ProfileEntry {
    pub fn i(&self) -> Option<i64> {
        self.report.as_ref().map(|r| r.i)
    }

    pub fn nu(&self) -> Option<usize> {
        self.report.as_ref().map(|r| r.nu)
    }

    /// The `(index, nullity)` pair the mode works with.
    fn level(&self, mode: ScanMode) -> Option<(i64, usize)> {
        match mode {
            ScanMode::Brake => self.brake.as_ref().map(|b| (b.mu1, b.nu1)),
            _ => self.report.as_ref().map(|r| (r.i, r.nu)),
        }
    }
}

fn columns(m: &Mat) -> Vec<Vec<f64>> {
    m.column_iter()
        .map(|c| c.iter().copied().collect())
        .collect()
}

fn evaluate(f: &dyn HamiltonianFamily, lambda: f64, opts: &ProfileOptions) -> Result<ProfileEntry> {
    let b = linearization(f, lambda);
    let m = f.boundary();
    let path = fundamental_solution(&b, opts.steps)?;
    let null = nullity_rel(path.monodromy(), m, opts.index.scan.tol_kernel)?;
    let (report, unresolved) = match maslov_index_with(&path, m, &opts.index) {
        Ok(r) => (Some(r), None),
        Err(Error::UnresolvedCrossing { t, reason }) => (None, Some(format!("t = {t}: {reason}"))),
        Err(e) => return Err(e),
    };
    let brake = if opts.brake {
        Some(brake_entry(&b, opts)?)
    } else {
        None
    };
    Ok(ProfileEntry {
        lambda,
        report,
        kernel: columns(&null.basis),
        brake,
        unresolved,
    })
}

fn brake_entry(b: &CoefficientPath, opts: &ProfileOptions) -> Result<BrakeEntry> {
    b.check_reversible(64)?;
    let dim = b.dim();
    let n = dim / 2;
    let half = fundamental_solution_on(
        b,
        0.0,
        0.5 * b.tau(),
        &Mat::identity(dim, dim),
        opts.steps / 2,
    )?;
    let (mu1, _, _) = brake_maslov(&half, 1, &opts.index)?;
    let (mu2, _, _) = brake_maslov(&half, 2, &opts.index)?;
    let end = half.monodromy();
    let (nu1, nu2) = brake_nullities_tol(end, opts.index.scan.tol_kernel)?;
    // Kernel of the B block, as y parts of vectors in U₁ = {0}×ℝⁿ.
    let y = kernel_of(&Target::Lagrangian1, end, opts.index.scan.tol_kernel).basis;
    let kernel = (0..y.ncols())
        .map(|j| {
            let mut v = vec![0.0; dim];
            for i in 0..n {
                v[n + i] = y[(i, j)];
            }
            v
        })
        .collect();
    let even_kernel_dim = if y.ncols() == 0 {
        0
    } else {
        // x-components of γ(t)(0, y) are B(t)y; stack them over the half period.
        let mats = half.matrices();
        let stride = (mats.len() / 64).max(1);
        let picked: Vec<&Mat> = mats.iter().step_by(stride).collect();
        let mut stack = Mat::zeros(n * picked.len(), y.ncols());
        for (k, g) in picked.iter().enumerate() {
            let blk = g.view((0, n), (n, n)) * &y;
            stack.view_mut((k * n, 0), (n, y.ncols())).copy_from(&blk);
        }
        let sv = stack.singular_values();
        let scale = sv.max().max(1.0);
        y.ncols() - sv.iter().filter(|&&s| s > 1e-7 * scale).count()
    };
    Ok(BrakeEntry {
        mu1,
        nu1,
        mu2,
        nu2,
        kernel,
        even_kernel_dim,
    })
}

/// Ordered parallel map over a slice of parameters.
fn par_map<T: Send>(xs: &[f64], threads: usize, f: &(dyn Fn(f64) -> T + Sync)) -> Vec<T> {
    let threads = if threads == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        threads
    };
    if threads <= 1 || xs.len() <= 1 {
        return xs.iter().map(|&x| f(x)).collect();
    }
    let chunk = xs.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = xs
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(|&x| f(x)).collect::<Vec<T>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("profile worker panicked"))
            .collect()
    })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "λ grid must be nonempty and finite".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "λ grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `(i, ν)` with crossing data and kernel basis at every grid value. Unresolved
/// crossings are flagged per entry; other failures abort.
pub fn index_profile(
    f: &dyn HamiltonianFamily,
    grid: &[f64],
    opts: &ProfileOptions,
) -> Result<Vec<ProfileEntry>> {
    check_grid(grid)?;
    par_map(grid, opts.threads, &|lam| evaluate(f, lam, opts))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    pub profile: ProfileOptions,
    /// Smallest half-width used when refining around a candidate.
    pub floor: f64,
    /// Kernel tolerance used at a parameter located by bisection.
    pub located_tol_kernel: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            profile: ProfileOptions::default(),
            floor: 1e-6,
            located_tol_kernel: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Index and nullity at the candidate (brake pair in brake mode).
    pub i_mu: i64,
    pub nu_mu: usize,
    /// Nullity above the baseline of the mode.
    pub effective_nu: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub i_minus: i64,
    pub i_plus: i64,
    pub nu_minus: usize,
    pub nu_plus: usize,
    /// Half-width of the final flank pair.
    pub resolution: f64,
    /// Two successive refinements gave the same flank values.
    pub stabilized: bool,
    /// `grid` or `bisection`.
    pub located_by: String,
    pub pattern: String,
    pub gates: Vec<Gate>,
    /// Further labels that also apply.
    pub also: Vec<Classification>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub mu: f64,
    pub classification: Classification,
    pub evidence: Evidence,
    /// Kernel basis handed to branch switching (forced direction removed in orbit mode).
    pub kernel: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSummary {
    /// `+1` when `∂_λ B_λ > 0`, `−1` when `< 0`.
    pub sign: i32,
    /// Smallest `|eigenvalue|` of `∂_λ B_λ(t)` over the samples.
    pub min_eigenvalue: f64,
    /// Grid points with positive nullity.
    pub sigma: Vec<f64>,
    /// Consecutive grid pairs violating `i(λ₂) ≥ i(λ₁) + ν(λ₁)` (mirrored for sign −1).
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub mode: ScanMode,
    pub grid: Vec<f64>,
    pub profile: Vec<ProfileEntry>,
    pub candidates: Vec<Candidate>,
    pub monotone: Option<MonotoneSummary>,
    pub unresolved: Vec<f64>,
    pub notes: Vec<String>,
    pub steps: usize,
    pub tol_kernel: f64,
    pub floor: f64,
}

/// Profile plus classification in one call.
pub fn scan(
    f: &dyn HamiltonianFamily,
    grid: &[f64],
    mode: ScanMode,
    opts: &ClassifyOptions,
) -> Result<ScanReport> {
    let mut po = opts.profile.clone();
    po.brake = po.brake || mode == ScanMode::Brake;
    let o = ClassifyOptions {
        profile: po,
        ..opts.clone()
    };
    let profile = index_profile(f, grid, &o.profile)?;
    classify(f, &profile, mode, &o)
}

fn baseline(mode: ScanMode) -> usize {
    if mode == ScanMode::AutonomousOrbit {
        1
    } else {
        0
    }
}

struct Flanks {
    lm: f64,
    lp: f64,
    minus: (i64, usize),
    plus: (i64, usize),
    h: f64,
    stabilized: bool,
}

struct Ctx<'a> {
    f: &'a dyn HamiltonianFamily,
    mode: ScanMode,
    opts: &'a ClassifyOptions,
}

impl Ctx<'_> {
    fn level_at(&self, lam: f64) -> Result<Option<(i64, usize)>> {
        Ok(evaluate(self.f, lam, &self.opts.profile)?.level(self.mode))
    }

    fn regular(&self, l: Option<(i64, usize)>) -> Option<(i64, usize)> {
        l.filter(|&(_, nu)| nu == baseline(self.mode))
    }

    /// Flank values starting from the grid neighbours, then `μ ± h` with `h` shrinking
    /// by 4 until two successive pairs agree or `h` drops below the floor.
    fn flanks(
        &self,
        mu: f64,
        grid_minus: (f64, (i64, usize)),
        grid_plus: (f64, (i64, usize)),
    ) -> Result<Flanks> {
        let mut best = Flanks {
            lm: grid_minus.0,
            lp: grid_plus.0,
            minus: grid_minus.1,
            plus: grid_plus.1,
            h: (mu - grid_minus.0).max(grid_plus.0 - mu),
            stabilized: false,
        };
        let mut h = 0.5 * (mu - grid_minus.0).min(grid_plus.0 - mu);
        while h >= self.opts.floor {
            let a = self.regular(self.level_at(mu - h)?);
            let b = self.regular(self.level_at(mu + h)?);
            if let (Some(a), Some(b)) = (a, b) {
                let same = a.0 == best.minus.0 && b.0 == best.plus.0;
                best = Flanks {
                    lm: mu - h,
                    lp: mu + h,
                    minus: a,
                    plus: b,
                    h,
                    stabilized: same,
                };
                if same {
                    break;
                }
            }
            h *= 0.25;
        }
        Ok(best)
    }
}

/// Candidate parameters from a profile, classified for `mode`.
pub fn classify(
    f: &dyn HamiltonianFamily,
    profile: &[ProfileEntry],
    mode: ScanMode,
    opts: &ClassifyOptions,
) -> Result<ScanReport> {
    let grid: Vec<f64> = profile.iter().map(|e| e.lambda).collect();
    check_grid(&grid)?;
    let base = baseline(mode);
    let mut notes = Vec::new();
    let mut o = opts.clone();
    if mode == ScanMode::Brake && !o.profile.brake {
        o.profile.brake = true;
    }
    let ctx = Ctx { f, mode, opts: &o };

    // Levels, recomputing brake data if the profile was built without it.
    let mut entries: Vec<ProfileEntry> = profile.to_vec();
    if mode == ScanMode::Brake && entries.iter().any(|e| e.brake.is_none()) {
        entries = index_profile(f, &grid, &o.profile)?;
    }
    let levels: Vec<Option<(i64, usize)>> = entries.iter().map(|e| e.level(mode)).collect();
    let unresolved: Vec<f64> = entries
        .iter()
        .filter(|e| e.unresolved.is_some())
        .map(|e| e.lambda)
        .collect();

    if mode == ScanMode::AutonomousOrbit {
        if let Some((k, _)) = levels
            .iter()
            .enumerate()
            .find(|(_, l)| matches!(l, Some((_, 0))))
        {
            return Err(Error::InvalidArgument(format!(
                "autonomous_orbit mode expects ν ≥ 1 along the branch, found ν = 0 at λ = {}",
                grid[k]
            )));
        }
    }
    for k in [0, grid.len() - 1] {
        if let Some((_, nu)) = levels[k] {
            if nu > base {
                return Err(Error::CoarseGrid { lambda: grid[k] });
            }
        }
    }

    let regular: Vec<usize> = (0..grid.len())
        .filter(|&k| ctx.regular(levels[k]).is_some())
        .collect();
    let monotone = monotone_summary(f, &grid, &levels);

    let mut candidates = Vec::new();
    // Candidates on the grid.
    for k in 0..grid.len() {
        let Some((i_mu, nu_mu)) = levels[k] else {
            continue;
        };
        if nu_mu <= base {
            continue;
        }
        let left = regular.iter().rev().find(|&&j| j < k).copied();
        let right = regular.iter().find(|&&j| j > k).copied();
        let (Some(l), Some(r)) = (left, right) else {
            notes.push(format!(
                "λ = {}: no regular grid point on both sides",
                grid[k]
            ));
            continue;
        };
        let fl = ctx.flanks(
            grid[k],
            (grid[l], levels[l].unwrap()),
            (grid[r], levels[r].unwrap()),
        )?;
        candidates.push(build_candidate(
            &ctx,
            &entries[k],
            i_mu,
            nu_mu,
            &fl,
            "grid",
            monotone.as_ref(),
        )?);
    }
    // Jumps between neighbouring regular grid points with nothing flagged in between.
    for w in regular.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (la, lb) = (levels[a].unwrap(), levels[b].unwrap());
        if la.0 == lb.0 || (a + 1..b).any(|j| levels[j].is_some_and(|(_, nu)| nu > base)) {
            continue;
        }
        match locate(&ctx, (grid[a], la), (grid[b], lb))? {
            Some((entry, lo, hi)) => {
                let Some((i_mu, nu_mu)) = entry.level(mode) else {
                    notes.push(format!(
                        "λ ≈ {}: index unresolved at the located parameter",
                        entry.lambda
                    ));
                    continue;
                };
                if nu_mu <= base {
                    notes.push(format!(
                        "index jump between λ = {} and {} but no kernel found at λ ≈ {}",
                        lo, hi, entry.lambda
                    ));
                    continue;
                }
                let fl = ctx.flanks(entry.lambda, (grid[a], la), (grid[b], lb))?;
                candidates.push(build_candidate(
                    &ctx,
                    &entry,
                    i_mu,
                    nu_mu,
                    &fl,
                    "bisection",
                    monotone.as_ref(),
                )?);
            }
            None => notes.push(format!(
                "index jump between λ = {} and {} not located",
                grid[a], grid[b]
            )),
        }
    }
    candidates.sort_by(|x, y| x.mu.partial_cmp(&y.mu).unwrap());

    Ok(ScanReport {
        mode,
        grid,
        profile: entries,
        candidates,
        monotone,
        unresolved,
        notes,
        steps: o.profile.steps,
        tol_kernel: o.profile.index.scan.tol_kernel,
        floor: o.floor,
    })
}

/// Bisects an index jump down to the floor and evaluates at the midpoint with the
/// loosened kernel tolerance.
fn locate(
    ctx: &Ctx,
    a: (f64, (i64, usize)),
    b: (f64, (i64, usize)),
) -> Result<Option<(ProfileEntry, f64, f64)>> {
    let base = baseline(ctx.mode);
    let (mut lo, mut hi) = (a.0, b.0);
    let ia = a.1 .0;
    while hi - lo > ctx.opts.floor {
        let mid = 0.5 * (lo + hi);
        let e = evaluate(ctx.f, mid, &ctx.opts.profile)?;
        match e.level(ctx.mode) {
            Some((_, nu)) if nu > base => return Ok(Some((e, lo, hi))),
            Some((i, _)) => {
                if i == ia {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            None => return Ok(None),
        }
    }
    let mid = 0.5 * (lo + hi);
    let mut po = ctx.opts.profile.clone();
    po.index.scan.tol_kernel = ctx.opts.located_tol_kernel;
    Ok(Some((evaluate(ctx.f, mid, &po)?, lo, hi)))
}

fn build_candidate(
    ctx: &Ctx,
    entry: &ProfileEntry,
    i_mu: i64,
    nu_mu: usize,
    fl: &Flanks,
    located_by: &str,
    monotone: Option<&MonotoneSummary>,
) -> Result<Candidate> {
    let mode = ctx.mode;
    let base = baseline(mode);
    let eff = nu_mu - base;
    let (im, ip) = (fl.minus.0, fl.plus.0);
    let top = i_mu + eff as i64;
    let jump = im != ip;
    let rabinowitz = jump && ((im == i_mu && ip == top) || (im == top && ip == i_mu));
    let mut gates = Vec::new();
    let mut also = Vec::new();
    let mut kernel = match mode {
        ScanMode::Brake => entry
            .brake
            .as_ref()
            .map(|b| b.kernel.clone())
            .unwrap_or_default(),
        _ => entry.kernel.clone(),
    };

    let classification = match mode {
        ScanMode::FixedPeriod | ScanMode::EquilibriumOrbit => {
            let fixed = if rabinowitz {
                Classification::Rabinowitz
            } else if jump {
                Classification::Jump
            } else {
                Classification::NecessaryOnly
            };
            if mode == ScanMode::EquilibriumOrbit {
                let g = equilibrium_gates(ctx.f, entry.lambda);
                let pass = g.iter().all(|x| x.passed);
                gates.extend(g);
                if pass && rabinowitz {
                    also.push(fixed);
                    Classification::EquilibriumOrbit
                } else {
                    fixed
                }
            } else {
                fixed
            }
        }
        ScanMode::AutonomousOrbit => {
            kernel = remove_forced_direction(ctx.f, entry.lambda, &kernel);
            gates.push(Gate {
                name: "kernel_dim_at_least_two".into(),
                passed: nu_mu >= 2,
                detail: format!("dim Ker(γ_μ(τ) − M) = {nu_mu}"),
            });
            let flank_one = fl.minus.1 == 1 && fl.plus.1 == 1;
            if rabinowitz && nu_mu > 1 {
                Classification::OrbitRabinowitz
            } else if jump && flank_one {
                Classification::OrbitJump
            } else {
                Classification::NecessaryOnly
            }
        }
        ScanMode::Brake => {
            if let Some(b) = &entry.brake {
                gates.push(Gate {
                    name: "no_even_kernel".into(),
                    passed: b.even_kernel_dim == 0,
                    detail: format!("{} kernel directions stay in {{0}}×ℝⁿ", b.even_kernel_dim),
                });
            }
            if rabinowitz {
                Classification::BrakeRabinowitz
            } else if jump {
                Classification::BrakeJump
            } else {
                Classification::NecessaryOnly
            }
        }
    };

    if let Some(m) = monotone {
        if matches!(mode, ScanMode::FixedPeriod | ScanMode::EquilibriumOrbit) {
            let expected = if m.sign > 0 { (i_mu, top) } else { (top, i_mu) };
            let holds = (im, ip) == expected;
            gates.push(Gate {
                name: "monotone_pattern".into(),
                passed: holds,
                detail: format!(
                    "expected flanks {} -> {}, observed {im} -> {ip}",
                    expected.0, expected.1
                ),
            });
            if holds {
                also.push(Classification::MonotoneFamily);
            }
        }
    }

    let symbol = if mode == ScanMode::Brake { "mu1" } else { "i" };
    let pattern = match classification {
        Classification::Rabinowitz
        | Classification::OrbitRabinowitz
        | Classification::BrakeRabinowitz
        | Classification::EquilibriumOrbit => format!(
            "{symbol}: {im} -> {ip}, nu_mu = {nu_mu}; flanks realize {{{i_mu}, {top}}} = {{i_mu, i_mu + nu_mu{}}}",
            if base > 0 { " - 1" } else { "" }
        ),
        Classification::Jump | Classification::OrbitJump | Classification::BrakeJump => {
            format!("{symbol}: {im} -> {ip} with regular flanks, nu_mu = {nu_mu}")
        }
        _ => format!("{symbol}: {im} -> {ip} unchanged across mu, nu_mu = {nu_mu}"),
    };

    Ok(Candidate {
        mu: entry.lambda,
        classification,
        evidence: Evidence {
            i_mu,
            nu_mu,
            effective_nu: eff,
            lambda_minus: fl.lm,
            lambda_plus: fl.lp,
            i_minus: im,
            i_plus: ip,
            nu_minus: fl.minus.1,
            nu_plus: fl.plus.1,
            resolution: fl.h,
            stabilized: fl.stabilized,
            located_by: located_by.into(),
            pattern,
            gates,
            also,
        },
        kernel,
    })
}

/// Projects the kernel basis off `v̇₀(0) = J∇H(u(0))` and re-orthonormalizes.
fn remove_forced_direction(
    f: &dyn HamiltonianFamily,
    lambda: f64,
    kernel: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let u0 = f.branch(lambda, 0.0);
    let g = f.gradient(lambda, 0.0, &u0);
    let n = f.n();
    let mut w = Vector::zeros(2 * n);
    for i in 0..n {
        w[i] = -g[n + i];
        w[n + i] = g[i];
    }
    let mut out: Vec<Vector> = Vec::new();
    let wn = w.norm();
    for k in kernel {
        let mut v = Vector::from_vec(k.clone());
        if wn > 0.0 {
            let wu = &w / wn;
            v -= &wu * wu.dot(&v);
        }
        for q in &out {
            v -= q * q.dot(&v);
        }
        let nv = v.norm();
        if nv > 1e-6 {
            out.push(v / nv);
        }
    }
    out.into_iter()
        .map(|v| v.iter().copied().collect())
        .collect()
}

/// Gates for a bifurcation of orbits from an equilibrium: autonomous family with a
/// stationary branch `v₀ ∈ Ker(M − I)`, `M` orthogonal of finite order, and
/// `Ker(M − I) ∩ Ker H''_μ(v₀) = {0}`.
pub fn equilibrium_gates(f: &dyn HamiltonianFamily, mu: f64) -> Vec<Gate> {
    let flags = f.flags();
    let m = f.boundary().matrix();
    let d = m.nrows();
    let id = Mat::identity(d, d);
    let v0 = f.branch(mu, 0.0);
    let mut gates = vec![Gate {
        name: "autonomous_equilibrium".into(),
        passed: flags.autonomous && f.branch_is_stationary() && (m * &v0 - &v0).amax() <= 1e-9,
        detail: format!(
            "autonomous = {}, stationary = {}, |(M − I)v₀| = {:.1e}",
            flags.autonomous,
            f.branch_is_stationary(),
            (m * &v0 - &v0).amax()
        ),
    }];
    let orth = (m.transpose() * m - &id).amax() <= 1e-9;
    let mut p = m.clone();
    let mut order = None;
    for l in 1..=64 {
        if (&p - &id).amax() <= 1e-9 {
            order = Some(l);
            break;
        }
        p = &p * m;
    }
    gates.push(Gate {
        name: "finite_order_boundary".into(),
        passed: orth && order.is_some(),
        detail: format!("orthogonal = {orth}, order = {order:?}"),
    });
    let h = f.hessian(mu, 0.0, &v0);
    let mut stack = Mat::zeros(2 * d, d);
    stack.view_mut((0, 0), (d, d)).copy_from(&(m - &id));
    stack.view_mut((d, 0), (d, d)).copy_from(&h);
    let sv = stack.singular_values();
    let scale = sv.max().max(1.0);
    let common = sv.iter().filter(|&&s| s <= 1e-8 * scale).count();
    gates.push(Gate {
        name: "no_constant_solutions".into(),
        passed: common == 0,
        detail: format!("dim(Ker(M − I) ∩ Ker H''_μ(v₀)) = {common}"),
    });
    gates
}

/// Detects `B_λ = B₀ + λB̂` with definite `B̂` along a λ-independent branch.
fn monotone_summary(
    f: &dyn HamiltonianFamily,
    grid: &[f64],
    levels: &[Option<(i64, usize)>],
) -> Option<MonotoneSummary> {
    if grid.len() < 3 {
        return None;
    }
    let (l0, l1, l2) = (grid[0], grid[grid.len() / 2], grid[grid.len() - 1]);
    let tau = f.tau();
    let mut sign = 0i32;
    let mut min_abs = f64::INFINITY;
    for k in 0..16 {
        let t = tau * k as f64 / 16.0;
        let u = f.branch(l0, t);
        if (&f.branch(l1, t) - &u).amax() > 1e-12 || (&f.branch(l2, t) - &u).amax() > 1e-12 {
            return None;
        }
        let b = |l: f64| f.hessian(l, t, &u);
        let d1 = (b(l1) - b(l0)) / (l1 - l0);
        let d2 = (b(l2) - b(l1)) / (l2 - l1);
        if (&d1 - &d2).amax() > 1e-7 * (1.0 + d1.amax()) {
            return None;
        }
        let (vals, _) = sym_eigen_sorted(&d1);
        let s = if vals[0] > 0.0 {
            1
        } else if *vals.last().unwrap() < 0.0 {
            -1
        } else {
            return None;
        };
        if sign != 0 && s != sign {
            return None;
        }
        sign = s;
        min_abs = min_abs.min(vals[0].abs().min(vals.last().unwrap().abs()));
    }
    let sigma = grid
        .iter()
        .zip(levels)
        .filter(|(_, l)| l.is_some_and(|(_, nu)| nu > 0))
        .map(|(&x, _)| x)
        .collect();
    let mut violations = 0;
    for w in levels.windows(2) {
        if let (Some((i1, n1)), Some((i2, n2))) = (w[0], w[1]) {
            let ok = if sign > 0 {
                i2 >= i1 + n1 as i64
            } else {
                i1 >= i2 + n2 as i64
            };
            if !ok {
                violations += 1;
            }
        }
    }
    Some(MonotoneSummary {
        sign,
        min_eigenvalue: min_abs,
        sigma,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeformationReport {
    /// `+1` for `B > 0`, `−1` for `B < 0`.
    pub sign: i32,
    /// Times `s ∈ (0, τ)` with `dim Ker(γ_B(s) − M) > 0`, with that dimension.
    pub crossings: Vec<(f64, usize)>,
    /// Nullity at `s = τ` itself.
    pub end_nullity: usize,
    /// Index of the full path (of `γ*₁` relative to `M⁻¹` when `B < 0`).
    pub i_tau: i64,
    pub base: i64,
    pub d0: usize,
    /// The index differs from `base + d0`, so crossings must exist.
    pub gate: bool,
    /// Index as a function of `s = λτ`, constant on each `(lo, hi]`.
    pub pieces: Vec<StairPiece>,
    pub candidates: Vec<Candidate>,
    /// Affine boundary targets `u₀(s) − Mu₀(0)` per crossing, when a branch is known.
    pub offsets: Vec<Vec<f64>>,
}

/// `γ_λ(t) = γ_B(λt)` for `B > 0`, or `γ*_λ` with coefficient `−λB(λ(τ − t))` for `B < 0`.
pub fn deformation_path_coefficient(
    b: &CoefficientPath,
    sign: i32,
    lambda: f64,
) -> CoefficientPath {
    let tau = b.tau();
    let bb = b.clone();
    if sign > 0 {
        CoefficientPath::from_fn(b.n(), tau, move |t| bb.eval(lambda * t) * lambda)
    } else {
        CoefficientPath::from_fn(b.n(), tau, move |t| bb.eval(lambda * (tau - t)) * (-lambda))
    }
}

/// Direct evaluation of the deformation index at `s = λτ`.
pub fn deformation_probe(
    b: &CoefficientPath,
    m: &SymplecticMatrix,
    sign: i32,
    s: f64,
    steps: usize,
    opts: &IndexOptions,
) -> Result<(i64, usize)> {
    let c = deformation_path_coefficient(b, sign, s / b.tau());
    let path = fundamental_solution(&c, steps)?;
    let target = if sign > 0 { m.clone() } else { m.inverse() };
    let r = maslov_index_with(&path, &target, opts)?;
    Ok((r.i, r.nu))
}

/// Crossing times of `s ↦ γ_B(s)` with `M` on `(0, τ)` and the index staircase in `s`.
pub fn deformation_scan(
    b: &CoefficientPath,
    m: &SymplecticMatrix,
    steps: usize,
    opts: &IndexOptions,
) -> Result<DeformationReport> {
    let tau = b.tau();
    let dim = b.dim();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for k in 0..=256 {
        let (vals, _) = sym_eigen_sorted(&b.eval(tau * k as f64 / 256.0));
        min = min.min(vals[0]);
        max = max.max(*vals.last().unwrap());
    }
    let sign = if min > 0.0 {
        1
    } else if max < 0.0 {
        -1
    } else {
        return Err(Error::Indefinite { min, max });
    };
    let path = fundamental_solution(b, steps)?;
    let target = Target::Graph(m.matrix().clone());
    let sc = crossing::scan(&path, &target, StartRule::PlusPositive, &opts.scan)?;
    let crossings: Vec<(f64, usize)> = sc
        .records
        .iter()
        .filter(|r| {
            !matches!(r.kind, CrossingKind::Start | CrossingKind::End) && r.t > 0.0 && r.t < tau
        })
        .map(|r| (r.t, r.kernel_dim))
        .collect();
    let end_nullity = nullity_rel(path.monodromy(), m, opts.scan.tol_kernel)?.nu;

    let bm = if sign > 0 { m.clone() } else { m.inverse() };
    let base = base_index(&bm, opts)?;
    let d0 = nullity_rel(&Mat::identity(dim, dim), &bm, opts.scan.tol_kernel)?.nu;
    let (i_tau, _) = deformation_probe(b, m, sign, tau, steps, opts)?;
    let gate = i_tau != base + d0 as i64;

    let mut pieces = Vec::new();
    let mut lo = 0.0;
    let mut acc = base + d0 as i64;
    let mut candidates = Vec::new();
    for &(t, nu) in &crossings {
        pieces.push(StairPiece { lo, hi: t, i: acc });
        let (i_mu, nu_mu) = (acc, nu);
        candidates.push(Candidate {
            mu: t,
            classification: Classification::DeformationCrossing,
            evidence: Evidence {
                i_mu,
                nu_mu,
                effective_nu: nu_mu,
                lambda_minus: lo,
                lambda_plus: t,
                i_minus: acc,
                i_plus: acc + nu as i64,
                nu_minus: 0,
                nu_plus: 0,
                resolution: 0.0,
                stabilized: true,
                located_by: "crossing scan".into(),
                pattern: format!(
                    "i: {} -> {} across s = {t}, nu = {nu}",
                    acc,
                    acc + nu as i64
                ),
                gates: vec![Gate {
                    name: "index_differs_from_constant_path".into(),
                    passed: gate,
                    detail: format!("i = {i_tau}, base + dim Ker(I − M) = {}", base + d0 as i64),
                }],
                also: Vec::new(),
            },
            kernel: Vec::new(),
        });
        acc += nu as i64;
        lo = t;
    }
    pieces.push(StairPiece {
        lo,
        hi: tau,
        i: acc,
    });
    for (k, c) in candidates.iter_mut().enumerate() {
        c.evidence.lambda_plus = pieces[k + 1].hi;
    }
    Ok(DeformationReport {
        sign,
        crossings,
        end_nullity,
        i_tau,
        base,
        d0,
        gate,
        pieces,
        candidates,
        offsets: Vec::new(),
    })
}

/// [`deformation_scan`] for a family frozen at `λ`, with the affine targets filled in.
pub fn deformation_scan_family(
    f: &dyn HamiltonianFamily,
    lambda: f64,
    steps: usize,
    opts: &IndexOptions,
) -> Result<DeformationReport> {
    let b = linearization(f, lambda);
    let m = f.boundary();
    let mut r = deformation_scan(&b, m, steps, opts)?;
    let u0 = f.branch(lambda, 0.0);
    r.offsets = r
        .crossings
        .iter()
        .map(|&(s, _)| {
            (f.branch(lambda, s) - m.matrix() * &u0)
                .iter()
                .copied()
                .collect()
        })
        .collect();
    Ok(r)
}
