//! The subcommands, each producing a result value and its unresolved entries.

use maslovkit::bvp::{branch_switch, default_ladders, newton_bvp, NewtonOptions, SwitchOptions};
use maslovkit::dual_morse::{assemble_and_count, predicted_counts, DualOperatorSpec};
use maslovkit::family::{linearization, HamiltonianFamily};
use maslovkit::index::{maslov_index_with, IndexOptions};
use maslovkit::scan::{scan, ClassifyOptions, ScanReport};
use maslovkit::symplectic::{fundamental_solution, Vector};
use maslovkit::{brake::brake_indices, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::Settings;

/// Random starts tried by `solve-bvp` when no initial value is given.
const RANDOM_STARTS: usize = 8;

pub struct Outcome {
    pub result: Value,
    pub unresolved: Vec<String>,
    pub grid: Option<Vec<f64>>,
}

impl Outcome {
    fn plain(result: Value) -> Self {
        Self {
            result,
            unresolved: Vec::new(),
            grid: None,
        }
    }
}

pub fn index_options(s: &Settings) -> IndexOptions {
    IndexOptions::default().with_tol_kernel(s.tol_kernel)
}

pub fn classify_options(s: &Settings) -> ClassifyOptions {
    let mut o = ClassifyOptions::default();
    o.profile.steps = s.steps;
    o.profile.index = index_options(s);
    o
}

fn unresolved(lambda: f64, t: f64, reason: &str) -> (Value, String) {
    (
        json!({"status": "UNRESOLVED", "lambda": lambda, "t": t, "reason": reason}),
        format!("lambda = {lambda}: crossing near t = {t}: {reason}"),
    )
}

fn with_fields(mut v: Value, extra: Value) -> Value {
    if let (Some(m), Value::Object(e)) = (v.as_object_mut(), extra) {
        m.extend(e);
    }
    v
}

pub fn index(
    cfg: &RunConfig,
    f: &dyn HamiltonianFamily,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let lambda = cfg.lambda()?;
    let g = fundamental_solution(&linearization(f, lambda), s.steps)?;
    match maslov_index_with(&g, f.boundary(), &index_options(s)) {
        Ok(r) => Ok(Outcome::plain(with_fields(
            serde_json::to_value(&r)?,
            json!({"status": "ok", "lambda": lambda}),
        ))),
        Err(Error::UnresolvedCrossing { t, reason }) => {
            let (v, u) = unresolved(lambda, t, &reason);
            Ok(Outcome {
                result: v,
                unresolved: vec![u],
                grid: None,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn run_scan(
    cfg: &RunConfig,
    f: &dyn HamiltonianFamily,
    s: &Settings,
) -> Result<(ScanReport, Vec<f64>), CliError> {
    let grid = cfg.grid()?;
    match scan(f, &grid, cfg.mode(), &classify_options(s)) {
        Ok(r) => Ok((r, grid)),
        Err(e @ Error::CoarseGrid { .. }) => Err(CliError::Config(format!("grid: {e}"))),
        Err(e) => Err(e.into()),
    }
}

fn scan_unresolved(r: &ScanReport) -> Vec<String> {
    let mut out: Vec<String> = r
        .profile
        .iter()
        .filter_map(|p| {
            p.unresolved
                .as_ref()
                .map(|u| format!("lambda = {}: {u}", p.lambda))
        })
        .collect();
    for &l in &r.unresolved {
        if !r
            .profile
            .iter()
            .any(|p| p.lambda == l && p.unresolved.is_some())
        {
            out.push(format!("lambda = {l}: unresolved"));
        }
    }
    out
}

pub fn scan_cmd(
    cfg: &RunConfig,
    f: &dyn HamiltonianFamily,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let (r, grid) = run_scan(cfg, f, s)?;
    Ok(Outcome {
        unresolved: scan_unresolved(&r),
        result: serde_json::to_value(&r)?,
        grid: Some(grid),
    })
}

pub fn morse_oracle(
    cfg: &RunConfig,
    f: &dyn HamiltonianFamily,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let lambda = cfg.lambda()?;
    let k = cfg.shift()?;
    let spec = match DualOperatorSpec::new(f.boundary().clone(), f.tau(), k) {
        Ok(spec) => spec,
        Err(e @ (Error::DegenerateSpec { .. } | Error::InvalidArgument(_))) => {
            return Err(CliError::Config(format!("shift: {e}")))
        }
        Err(e) => return Err(e.into()),
    };
    let b = linearization(f, lambda);
    let (_, mc) = assemble_and_count(&b, &spec, s.basis)?;
    let base = json!({
        "lambda": lambda,
        "shift": k,
        "m_minus": mc.m_minus,
        "m_zero": mc.m_zero,
        "gap": mc.gap,
        "basis_size": mc.basis_size,
        "converged": mc.converged,
    });
    match predicted_counts(&b, &spec, s.steps, &index_options(s)) {
        Ok((pm, pz)) => {
            let agree = pm == mc.m_minus as i64 && pz == mc.m_zero;
            Ok(Outcome::plain(with_fields(
                base,
                json!({"status": "ok", "predicted": pm, "predicted_zero": pz, "match": agree}),
            )))
        }
        Err(Error::UnresolvedCrossing { t, reason }) => {
            let (v, u) = unresolved(lambda, t, &reason);
            Ok(Outcome {
                result: with_fields(base, with_fields(v, json!({"match": Value::Null}))),
                unresolved: vec![u],
                grid: None,
            })
        }
        Err(e) => Err(e.into()),
    }
}

pub fn brake_index(
    cfg: &RunConfig,
    f: &dyn HamiltonianFamily,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let lambda = cfg.lambda()?;
    match brake_indices(&linearization(f, lambda), s.steps, &index_options(s)) {
        Ok(r) => Ok(Outcome::plain(with_fields(
            serde_json::to_value(&r)?,
            json!({"status": "ok", "lambda": lambda}),
        ))),
        Err(e @ Error::NotReversible { .. }) => Err(CliError::Config(format!("family: {e}"))),
        Err(Error::UnresolvedCrossing { t, reason }) => {
            let (v, u) = unresolved(lambda, t, &reason);
            Ok(Outcome {
                result: v,
                unresolved: vec![u],
                grid: None,
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn point_value(p: &maslovkit::bvp::BranchPoint) -> Result<Value, CliError> {
    Ok(with_fields(
        serde_json::to_value(p)?,
        json!({"amplitude": p.amplitude()}),
    ))
}

pub fn solve_bvp(
    cfg: &RunConfig,
    f: &dyn HamiltonianFamily,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let lambda = cfg.lambda()?;
    let d = f.dim();
    let opts = NewtonOptions::default();
    let base = f.branch(lambda, 0.0);
    let starts: Vec<Vector> = match &cfg.initial {
        Some(z) if z.len() != d => {
            return Err(CliError::Config(format!(
                "initial: need {d} components, got {}",
                z.len()
            )))
        }
        Some(z) => vec![Vector::from_vec(z.clone())],
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed.unwrap_or(0));
            (0..RANDOM_STARTS)
                .map(|_| {
                    let v = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                    let a = rng.random_range(0.05..0.5);
                    &base + v.normalize() * a
                })
                .collect()
        }
    };
    let random = cfg.initial.is_none();
    let mut last = None;
    for z in &starts {
        match newton_bvp(f, lambda, z, None, &opts) {
            // A random start that falls back onto the trivial branch is not an answer.
            Ok(p) if random && p.distance <= 1e3 * opts.tol => last = Some(Ok(p)),
            Ok(p) => {
                return Ok(Outcome::plain(with_fields(
                    point_value(&p)?,
                    json!({"status": "ok", "start": z.as_slice()}),
                )))
            }
            Err(e @ (Error::IterationCap { .. } | Error::BlowUp { .. })) => last = Some(Err(e)),
            Err(e) => return Err(e.into()),
        }
    }
    match last {
        Some(Ok(p)) => Ok(Outcome::plain(with_fields(
            point_value(&p)?,
            json!({"status": "trivial"}),
        ))),
        Some(Err(e)) => Err(e.into()),
        None => Err(CliError::Config("initial: no start".into())),
    }
}

pub fn confirm(
    cfg: &RunConfig,
    f: &dyn HamiltonianFamily,
    s: &Settings,
) -> Result<Outcome, CliError> {
    let (r, grid) = run_scan(cfg, f, s)?;
    let bc = cfg.branch.clone().unwrap_or(crate::config::BranchConfig {
        deltas: None,
        amplitudes: None,
        search_radius: None,
    });
    let opts = SwitchOptions {
        search_radius: bc.search_radius,
        ..SwitchOptions::default()
    };
    let mut branches = Vec::new();
    for c in &r.candidates {
        if c.kernel.is_empty() {
            branches.push(
                json!({"mu": c.mu, "classification": c.classification, "skipped": "empty kernel"}),
            );
            continue;
        }
        let width = grid
            .windows(2)
            .find(|w| w[0] <= c.mu && c.mu <= w[1])
            .map_or(grid[1] - grid[0], |w| w[1] - w[0]);
        let (dd, da) = default_ladders(1.0, width);
        let deltas = bc.deltas.clone().unwrap_or(dd);
        let amplitudes = bc.amplitudes.clone().unwrap_or(da);
        let kernel: Vec<Vector> = c
            .kernel
            .iter()
            .map(|v| Vector::from_vec(v.clone()))
            .collect();
        let search = branch_switch(f, c.mu, &kernel, &deltas, &amplitudes, &opts)?;
        let mut sv = serde_json::to_value(&search)?;
        sv["points"] = Value::Array(
            search
                .points
                .iter()
                .map(point_value)
                .collect::<Result<_, _>>()?,
        );
        branches.push(json!({
            "mu": c.mu,
            "classification": c.classification,
            "deltas": deltas,
            "amplitudes": amplitudes,
            "search": sv,
        }));
    }
    Ok(Outcome {
        unresolved: scan_unresolved(&r),
        result: json!({"scan": serde_json::to_value(&r)?, "branches": branches}),
        grid: Some(grid),
    })
}
