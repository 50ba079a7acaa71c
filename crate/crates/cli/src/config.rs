//! Run configuration: the family, the boundary matrix and per-command parameters.

use std::fmt;
use std::path::Path;

use maslovkit::family::{
    verify_family, FamilyFlags, HamiltonianFamily, Monomial, PolynomialFamily, QuadraticQuartic,
};
use maslovkit::scan::ScanMode;
use maslovkit::symplectic::{symplectic_defect, Mat, SymplecticMatrix};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Parsed boundary matrices must satisfy this defect bound.
const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    LinearQuadratic,
    QuadraticPlusQuartic,
    RotationBlocks,
    Polynomial,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LinearQuadratic => "linear_quadratic",
            Self::QuadraticPlusQuartic => "quadratic_plus_quartic",
            Self::RotationBlocks => "rotation_blocks",
            Self::Polynomial => "polynomial",
        })
    }
}

/// `M` as text (`identity`, `rotation:θ`, `diag_kappa:κ`) or an explicit row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundarySpec {
    Named(String),
    Explicit { dimension: usize, entries: Vec<f64> },
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::Named("identity".into())
    }
}

/// Flags the family must have; unset entries are not checked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedFlags {
    pub m_periodic: Option<bool>,
    pub reversible: Option<bool>,
    pub autonomous: Option<bool>,
    pub even: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub kind: FamilyKind,
    #[serde(default)]
    pub n: Option<usize>,
    pub tau: f64,
    #[serde(default)]
    pub boundary: BoundarySpec,
    pub lambda_range: [f64; 2],
    /// Block frequencies for `rotation_blocks`.
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
    /// `H = ½⟨(A₀ + λA₁)z, z⟩ (+ c|z|⁴/4)`, rows of `2n×2n` matrices.
    #[serde(default)]
    pub a0: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub a1: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub quartic: Option<f64>,
    #[serde(default)]
    pub terms: Option<Vec<Monomial>>,
    #[serde(default)]
    pub flags: ExpectedFlags,
}

/// `{start, stop, points}` or an explicit `values` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

/// Ladders for `confirm`; each `δ` searches at `μ ± |δ|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchConfig {
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(default)]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default)]
    pub search_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub family: FamilyConfig,
    /// Parameter for `index`, `morse-oracle`, `brake-index` and `solve-bvp`.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub mode: Option<ScanMode>,
    /// Shift `K` of the dual operator.
    #[serde(default)]
    pub shift: Option<f64>,
    /// Initial value `z(0)` for `solve-bvp`.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    #[serde(default)]
    pub branch: Option<BranchConfig>,
}

fn bad(field: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn finite(field: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad(field, format!("must be finite, got {x}")))
    }
}

fn finite_all(field: &str, xs: &[f64]) -> Result<(), CliError> {
    for (k, &x) in xs.iter().enumerate() {
        finite(&format!("{field}[{k}]"), x)?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." {
            "config".to_string()
        } else {
            path
        };
        CliError::Config(format!("{field}: {}", e.inner()))
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(bad(
            "schema_version",
            format!(
                "unsupported {}, expected {SCHEMA_VERSION}",
                cfg.schema_version
            ),
        ));
    }
    Ok(cfg)
}

fn matrix(field: &str, rows: &[Vec<f64>], d: usize) -> Result<Mat, CliError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(bad(field, format!("expected a {d}×{d} matrix")));
    }
    for (i, r) in rows.iter().enumerate() {
        finite_all(&format!("{field}[{i}]"), r)?;
    }
    Ok(Mat::from_fn(d, d, |i, j| rows[i][j]))
}

impl FamilyConfig {
    /// Degrees of freedom, from `n` or whatever coefficient fixes it.
    pub fn degrees_of_freedom(&self) -> Result<usize, CliError> {
        let implied = match (&self.rho, &self.a0, &self.boundary) {
            (Some(r), _, _) if self.kind == FamilyKind::RotationBlocks => Some(r.len()),
            (_, Some(a), _) if self.kind != FamilyKind::Polynomial => Some(a.len() / 2),
            (_, _, BoundarySpec::Explicit { dimension, .. }) => Some(dimension / 2),
            _ => None,
        };
        match (self.n, implied) {
            (Some(0), _) => Err(bad("family.n", "must be positive")),
            (Some(n), Some(m)) if n != m => Err(bad(
                "family.n",
                format!("{n} disagrees with the coefficients ({m})"),
            )),
            (Some(n), _) => Ok(n),
            (None, Some(m)) if m > 0 => Ok(m),
            _ => Err(bad("family.n", "required for this kind and boundary")),
        }
    }

    pub fn boundary_matrix(&self, n: usize) -> Result<SymplecticMatrix, CliError> {
        let field = "family.boundary";
        let m = match &self.boundary {
            BoundarySpec::Named(s) => {
                let (name, arg) = match s.split_once(':') {
                    Some((a, b)) => (a.trim(), Some(b.trim())),
                    None => (s.trim(), None),
                };
                match (name, arg) {
                    ("identity", None) => SymplecticMatrix::identity(n),
                    ("rotation", Some(a)) => {
                        let theta: f64 = a
                            .parse()
                            .map_err(|_| bad(field, format!("bad angle '{a}'")))?;
                        SymplecticMatrix::rotation(n, finite(field, theta)?)
                    }
                    ("diag_kappa", Some(a)) => {
                        let kappa: usize = a
                            .parse()
                            .map_err(|_| bad(field, format!("bad κ '{a}'")))?;
                        SymplecticMatrix::diag_kappa(n, kappa).map_err(|e| bad(field, e))?
                    }
                    _ => {
                        return Err(bad(
                            field,
                            format!(
                                "unknown '{s}'; use identity, rotation:θ, diag_kappa:κ or an explicit matrix"
                            ),
                        ))
                    }
                }
            }
            BoundarySpec::Explicit { dimension, entries } => {
                if *dimension != 2 * n {
                    return Err(bad(
                        "family.boundary.dimension",
                        format!("{dimension} but the phase space has dimension {}", 2 * n),
                    ));
                }
                if entries.len() != dimension * dimension {
                    return Err(bad(
                        "family.boundary.entries",
                        format!(
                            "need {} row-major entries, got {}",
                            dimension * dimension,
                            entries.len()
                        ),
                    ));
                }
                finite_all("family.boundary.entries", entries)?;
                let m = Mat::from_row_slice(*dimension, *dimension, entries);
                SymplecticMatrix::new(m, f64::INFINITY).map_err(|e| bad(field, e))?
            }
        };
        let defect = symplectic_defect(m.matrix()).map_err(|e| bad(field, e))?;
        if !(defect <= BOUNDARY_TOL) {
            return Err(bad(
                field,
                format!("symplectic defect {defect:.3e} exceeds {BOUNDARY_TOL:.0e}"),
            ));
        }
        Ok(m)
    }

    pub fn build(&self) -> Result<Box<dyn HamiltonianFamily>, CliError> {
        let n = self.degrees_of_freedom()?;
        let d = 2 * n;
        let tau = finite("family.tau", self.tau)?;
        if tau <= 0.0 {
            return Err(bad("family.tau", "must be positive"));
        }
        let range = (
            finite("family.lambda_range[0]", self.lambda_range[0])?,
            finite("family.lambda_range[1]", self.lambda_range[1])?,
        );
        if range.1 < range.0 {
            return Err(bad("family.lambda_range", "must be increasing"));
        }
        let m = self.boundary_matrix(n)?;
        let need = |name: &str| {
            bad(
                &format!("family.{name}"),
                format!("required for kind {}", self.kind),
            )
        };
        let f: Box<dyn HamiltonianFamily> = match self.kind {
            FamilyKind::RotationBlocks => {
                let rho = self.rho.as_ref().ok_or_else(|| need("rho"))?;
                finite_all("family.rho", rho)?;
                Box::new(
                    QuadraticQuartic::rotation_blocks(rho, tau, m, range)
                        .map_err(|e| bad("family", e))?,
                )
            }
            FamilyKind::LinearQuadratic | FamilyKind::QuadraticPlusQuartic => {
                let a0 = match &self.a0 {
                    Some(a) => matrix("family.a0", a, d)?,
                    None => Mat::zeros(d, d),
                };
                let a1 = matrix("family.a1", self.a1.as_ref().ok_or_else(|| need("a1"))?, d)?;
                let c = match self.kind {
                    FamilyKind::QuadraticPlusQuartic => finite(
                        "family.quartic",
                        self.quartic.ok_or_else(|| need("quartic"))?,
                    )?,
                    _ if self.quartic.is_some() => {
                        return Err(bad(
                            "family.quartic",
                            "only allowed for quadratic_plus_quartic",
                        ))
                    }
                    _ => 0.0,
                };
                Box::new(
                    QuadraticQuartic::new(a0, a1, c, tau, m, range)
                        .map_err(|e| bad("family", e))?,
                )
            }
            FamilyKind::Polynomial => {
                let terms = self.terms.clone().ok_or_else(|| need("terms"))?;
                for (k, t) in terms.iter().enumerate() {
                    finite(&format!("family.terms[{k}].coeff"), t.coeff)?;
                }
                Box::new(
                    PolynomialFamily::new(terms, tau, m, range)
                        .map_err(|e| bad("family.terms", e))?,
                )
            }
        };
        verify_family(f.as_ref(), 8).map_err(|e| bad("family", e))?;
        check_flags(&self.flags, &f.flags())?;
        Ok(f)
    }
}

fn check_flags(want: &ExpectedFlags, have: &FamilyFlags) -> Result<(), CliError> {
    let pairs = [
        ("m_periodic", want.m_periodic, have.m_periodic),
        ("reversible", want.reversible, have.reversible),
        ("autonomous", want.autonomous, have.autonomous),
        ("even", want.even, have.even),
    ];
    for (name, w, h) in pairs {
        if let Some(w) = w {
            if w != h {
                return Err(bad(
                    &format!("family.flags.{name}"),
                    format!("declared {w} but the family has {h}"),
                ));
            }
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn lambda(&self) -> Result<f64, CliError> {
        finite(
            "lambda",
            self.lambda.ok_or_else(|| bad("lambda", "required"))?,
        )
    }

    pub fn shift(&self) -> Result<f64, CliError> {
        finite("shift", self.shift.ok_or_else(|| bad("shift", "required"))?)
    }

    pub fn mode(&self) -> ScanMode {
        self.mode.unwrap_or(ScanMode::FixedPeriod)
    }

    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let g = self.grid.as_ref().ok_or_else(|| bad("grid", "required"))?;
        let grid = match (&g.values, g.start, g.stop, g.points) {
            (Some(v), None, None, None) => {
                finite_all("grid.values", v)?;
                v.clone()
            }
            (None, Some(a), Some(b), Some(p)) => {
                finite("grid.start", a)?;
                finite("grid.stop", b)?;
                if p < 2 {
                    return Err(bad("grid.points", "need at least 2"));
                }
                (0..p)
                    .map(|k| a + (b - a) * k as f64 / (p - 1) as f64)
                    .collect()
            }
            _ => {
                return Err(bad(
                    "grid",
                    "give either values or all of start, stop, points",
                ))
            }
        };
        if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad(
                "grid",
                "must be strictly increasing with at least 2 points",
            ));
        }
        Ok(grid)
    }
}
