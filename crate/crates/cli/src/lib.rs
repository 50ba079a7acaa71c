//! Command-line front end: reads a JSON run configuration, runs one computation and
//! writes a JSON report (or a table).

pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use maslovkit::bvp::NewtonOptions;
use maslovkit::family::HamiltonianFamily;
use maslovkit::scan::ScanReport;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{FamilySummary, ReportDocument, Settings, Tolerances};

const MIN_STEPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Index and nullity of the linearization at `lambda`.
    Index,
    /// Index profile over the grid and classification of candidates.
    Scan,
    /// Galerkin Morse counts of the dual form against the index prediction.
    MorseOracle,
    /// Brake index pairs of the linearization at `lambda`.
    BrakeIndex,
    /// Newton shooting for one solution at `lambda`.
    SolveBvp,
    /// Scan, then branch switching at every candidate.
    Confirm,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Index => "index",
            Self::Scan => "scan",
            Self::MorseOracle => "morse-oracle",
            Self::BrakeIndex => "brake-index",
            Self::SolveBvp => "solve-bvp",
            Self::Confirm => "confirm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(
    name = "maslovkit",
    version,
    about = "Maslov-type indices and bifurcation checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Integration steps over one period.
    #[arg(long, global = true, default_value_t = 4096)]
    pub steps: usize,
    /// Galerkin cells for the Morse oracle.
    #[arg(long, global = true, default_value_t = 256)]
    pub basis: usize,
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol_kernel: f64,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// What goes to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Also write the scan profile as CSV (scan and confirm).
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
}

impl Cli {
    pub fn settings(&self) -> Settings {
        Settings {
            steps: self.steps,
            basis: self.basis,
            tol_kernel: self.tol_kernel,
            seed: self.seed,
        }
    }
}

fn check_settings(s: &Settings) -> Result<(), CliError> {
    if s.steps < MIN_STEPS {
        return Err(CliError::Config(format!(
            "--steps: need at least {MIN_STEPS}"
        )));
    }
    if s.basis < 1 {
        return Err(CliError::Config("--basis: must be positive".into()));
    }
    if !(s.tol_kernel > 0.0 && s.tol_kernel < 1.0) {
        return Err(CliError::Config("--tol-kernel: must lie in (0, 1)".into()));
    }
    Ok(())
}

fn summary(cfg: &RunConfig, f: &dyn HamiltonianFamily) -> FamilySummary {
    let m = f.boundary().matrix();
    let (lo, hi) = f.lambda_range();
    FamilySummary {
        kind: cfg.family.kind.to_string(),
        n: f.n(),
        tau: f.tau(),
        boundary: (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect(),
        lambda_range: [lo, hi],
        flags: f.flags(),
    }
}

fn tolerances(s: &Settings, grid: Option<&[f64]>) -> Tolerances {
    let io = commands::index_options(s);
    let co = commands::classify_options(s);
    let no = NewtonOptions::default();
    Tolerances {
        steps: s.steps,
        basis: s.basis,
        tol_kernel: io.scan.tol_kernel,
        perturbations: io.perturbations.clone(),
        xi_samples: io.xi_samples,
        boundary_defect: 1e-10,
        located_tol_kernel: co.located_tol_kernel,
        refine_floor: co.floor,
        newton_tol: no.tol,
        newton_rcond: no.rcond,
        grid_points: grid.map(<[f64]>::len),
        grid_min_spacing: grid.map(|g| {
            g.windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min)
        }),
    }
}

/// Runs one command on a parsed configuration.
pub fn execute(
    command: Command,
    cfg: RunConfig,
    settings: Settings,
) -> Result<ReportDocument, CliError> {
    check_settings(&settings)?;
    let f = cfg.family.build()?;
    let f = f.as_ref();
    let out = match command {
        Command::Index => commands::index(&cfg, f, &settings)?,
        Command::Scan => commands::scan_cmd(&cfg, f, &settings)?,
        Command::MorseOracle => commands::morse_oracle(&cfg, f, &settings)?,
        Command::BrakeIndex => commands::brake_index(&cfg, f, &settings)?,
        Command::SolveBvp => commands::solve_bvp(&cfg, f, &settings)?,
        Command::Confirm => commands::confirm(&cfg, f, &settings)?,
    };
    let family = summary(&cfg, f);
    let tol = tolerances(&settings, out.grid.as_deref());
    Ok(ReportDocument::new(
        command.name(),
        cfg,
        family,
        settings,
        tol,
        out.result,
        out.unresolved,
    ))
}

fn write_csv(path: &std::path::Path, doc: &ReportDocument) -> Result<(), CliError> {
    let scan = match doc.command.as_str() {
        "scan" => &doc.result,
        "confirm" => &doc.result["scan"],
        _ => return Err(CliError::Config("--csv: only for scan and confirm".into())),
    };
    let r: ScanReport = serde_json::from_value(scan.clone())?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lambda", "i", "nu", "mu1", "nu1", "unresolved"])?;
    for p in &r.profile {
        let opt = |x: Option<String>| x.unwrap_or_default();
        w.write_record([
            p.lambda.to_string(),
            opt(p.i().map(|v| v.to_string())),
            opt(p.nu().map(|v| v.to_string())),
            opt(p.brake.as_ref().map(|b| b.mu1.to_string())),
            opt(p.brake.as_ref().map(|b| b.nu1.to_string())),
            p.unresolved.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Full command-line run: returns the process exit code (0 ok, 2 unresolved entries,
/// 3 configuration error, 1 anything else).
pub fn run(cli: &Cli) -> u8 {
    match run_inner(cli) {
        Ok(doc) if doc.unresolved.is_empty() => 0,
        Ok(_) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_inner(cli: &Cli) -> Result<ReportDocument, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config: required".into()))?;
    let cfg = config::load(path)?;
    let doc = execute(cli.command, cfg, cli.settings())?;
    let json = doc.to_json()?;
    if let Some(p) = &cli.csv {
        write_csv(p, &doc)?;
    }
    match &cli.out {
        Some(p) => std::fs::write(p, &json)?,
        None if cli.format == Format::Json => print!("{json}"),
        None => {}
    }
    if cli.format == Format::Table {
        print!("{}", doc.to_table());
    }
    Ok(doc)
}
