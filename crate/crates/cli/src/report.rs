//! Schema-versioned report document and its table rendering.

use std::fmt::Write as _;

use maslovkit::family::FamilyFlags;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{RunConfig, SCHEMA_VERSION};

/// Command-line settings that shape the numerics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub steps: usize,
    pub basis: usize,
    pub tol_kernel: f64,
    pub seed: Option<u64>,
}

/// Every tolerance and resolution the run used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub steps: usize,
    pub basis: usize,
    pub tol_kernel: f64,
    pub perturbations: Vec<f64>,
    pub xi_samples: usize,
    pub boundary_defect: f64,
    pub located_tol_kernel: f64,
    pub refine_floor: f64,
    pub newton_tol: f64,
    pub newton_rcond: f64,
    pub grid_points: Option<usize>,
    pub grid_min_spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub kind: String,
    pub n: usize,
    pub tau: f64,
    /// `M`, row-major.
    pub boundary: Vec<f64>,
    pub lambda_range: [f64; 2],
    pub flags: FamilyFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub family: FamilySummary,
    pub settings: Settings,
    pub tolerances: Tolerances,
    pub result: Value,
    /// One line per unresolved computation; non-empty means exit code 2.
    pub unresolved: Vec<String>,
}

impl ReportDocument {
    pub fn new(
        command: &str,
        config: RunConfig,
        family: FamilySummary,
        settings: Settings,
        tolerances: Tolerances,
        result: Value,
        unresolved: Vec<String>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config,
            family,
            settings,
            tolerances,
            result,
            unresolved,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let f = &self.family;
        let _ = writeln!(
            out,
            "{}  kind={} n={} tau={} steps={} basis={} tol_kernel={:e}",
            self.command,
            f.kind,
            f.n,
            num(&Value::from(f.tau)),
            self.settings.steps,
            self.settings.basis,
            self.settings.tol_kernel
        );
        let r = &self.result;
        match self.command.as_str() {
            "scan" => scan_tables(&mut out, r),
            "confirm" => {
                scan_tables(&mut out, &r["scan"]);
                branch_table(&mut out, r);
            }
            "index" => pairs(
                &mut out,
                r,
                &[
                    "status",
                    "lambda",
                    "i",
                    "nu",
                    "cz",
                    "margin",
                    "perturbation",
                ],
            ),
            "morse-oracle" => pairs(
                &mut out,
                r,
                &[
                    "status",
                    "lambda",
                    "shift",
                    "m_minus",
                    "m_zero",
                    "predicted",
                    "predicted_zero",
                    "match",
                    "converged",
                    "gap",
                    "basis_size",
                ],
            ),
            "brake-index" => pairs(
                &mut out,
                r,
                &[
                    "status",
                    "lambda",
                    "mu1",
                    "nu1",
                    "mu2",
                    "nu2",
                    "perturbation",
                ],
            ),
            "solve-bvp" => pairs(
                &mut out,
                r,
                &[
                    "status",
                    "lambda",
                    "amplitude",
                    "boundary_residual",
                    "flow_residual",
                    "distance",
                    "energy_drift",
                    "kernel_dim",
                    "iterations",
                ],
            ),
            _ => {}
        }
        for u in &self.unresolved {
            let _ = writeln!(out, "UNRESOLVED  {u}");
        }
        out
    }
}

fn num(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::Number(x) => match (x.as_i64(), x.as_f64()) {
            (Some(i), _) => i.to_string(),
            (None, Some(f)) if f != 0.0 && (f.abs() < 1e-3 || f.abs() >= 1e6) => format!("{f:.4e}"),
            (None, Some(f)) => {
                let s = format!("{f:.6}");
                s.trim_end_matches('0').trim_end_matches('.').to_string()
            }
            _ => x.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn pairs(out: &mut String, r: &Value, keys: &[&str]) {
    let w = keys.iter().map(|k| k.len()).max().unwrap_or(0);
    for k in keys {
        if let Some(v) = r.get(*k) {
            let _ = writeln!(out, "  {k:<w$}  {}", num(v));
        }
    }
}

fn grid(out: &mut String, headers: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "  {}", line(headers.to_vec()));
    for row in rows {
        let _ = writeln!(out, "  {}", line(row.iter().map(String::as_str).collect()));
    }
}

fn scan_tables(out: &mut String, r: &Value) {
    let empty = Vec::new();
    let profile = r["profile"].as_array().unwrap_or(&empty);
    let brake = profile.iter().any(|p| !p["brake"].is_null());
    let mut headers = vec!["lambda", "i", "nu"];
    if brake {
        headers.extend(["mu1", "nu1"]);
    }
    headers.push("note");
    let rows: Vec<Vec<String>> = profile
        .iter()
        .map(|p| {
            let mut row = vec![
                num(&p["lambda"]),
                num(&p["report"]["i"]),
                num(&p["report"]["nu"]),
            ];
            if brake {
                row.push(num(&p["brake"]["mu1"]));
                row.push(num(&p["brake"]["nu1"]));
            }
            row.push(match &p["unresolved"] {
                Value::String(s) => format!("UNRESOLVED: {s}"),
                _ => String::new(),
            });
            row
        })
        .collect();
    grid(out, &headers, &rows);
    let cands = r["candidates"].as_array().unwrap_or(&empty);
    if cands.is_empty() {
        let _ = writeln!(out, "  no candidates");
        return;
    }
    let rows: Vec<Vec<String>> = cands
        .iter()
        .map(|c| {
            let e = &c["evidence"];
            vec![
                num(&c["mu"]),
                num(&c["classification"]),
                format!("{} -> {}", num(&e["i_minus"]), num(&e["i_plus"])),
                num(&e["nu_mu"]),
                num(&e["resolution"]),
                num(&e["located_by"]),
            ]
        })
        .collect();
    grid(
        out,
        &["mu", "class", "i", "nu_mu", "resolution", "located"],
        &rows,
    );
}

fn branch_table(out: &mut String, r: &Value) {
    let empty = Vec::new();
    let rows: Vec<Vec<String>> = r["branches"]
        .as_array()
        .unwrap_or(&empty)
        .iter()
        .flat_map(|b| {
            let mu = num(&b["mu"]);
            b["search"]["points"]
                .as_array()
                .cloned()
                .unwrap_or_default()
                .into_iter()
                .map(move |p| {
                    vec![
                        mu.clone(),
                        num(&p["lambda"]),
                        num(&p["side"]),
                        num(&p["amplitude"]),
                        num(&p["boundary_residual"]),
                        num(&p["flow_residual"]),
                    ]
                })
        })
        .collect();
    if rows.is_empty() {
        let _ = writeln!(out, "  no branch points");
    } else {
        grid(
            out,
            &[
                "mu",
                "lambda",
                "side",
                "|u(0)|",
                "bc residual",
                "flow residual",
            ],
            &rows,
        );
    }
}
