//! Command-line front end: `solve`, `check` and `make-testcase`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::beltrami::{beltrami_of_map, project_constant_modulus, BeltramiField};
use crate::constraints::{load_constraints, BoundaryMode, ConstraintSet};
use crate::diagnostics::{diagnose, write_report, DiagnosticsReport, DEFAULT_BINS};
use crate::energy::{energy_gap, energy_gap_pointwise, lower_bound_check, EnergyReport};
use crate::error::{Error, Result};
use crate::mesh::{load_mesh, read_mesh_data, write_off, PiecewiseLinearMap, TriangleMesh};
use crate::qc::{run, SmoothingOrder, SolverParams, Termination, Variant};
use crate::testcase::{make_testcase, TestCaseKind};
use crate::fmt_f64;

/// Exit status for a run that ended without converging, or a failed check.
pub const EXIT_NOT_CONVERGED: u8 = 2;

/// Absolute tolerance, relative to `max(1, |target|)`, for a constrained
/// vertex read back from a file.
pub const CONSTRAINT_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "tqc", version, about = "Extremal Teichmüller maps between planar meshes")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the extremal map for a mesh and constraint file.
    Solve(SolveArgs),
    /// Verify a solved map against its inputs.
    Check(CheckArgs),
    /// Write a generated mesh and constraint file.
    MakeTestcase(MakeTestcaseArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub constraints: PathBuf,
    /// Mapped mesh (OFF).
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration trace CSV [default: <out>.trace.csv].
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Diagnostics directory [default: <out>.diag].
    #[arg(long)]
    pub diag: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value_t = Variant::Simplified)]
    pub variant: Variant,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub smooth_lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub smooth_passes: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_mu: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_gap: f64,
    #[arg(long, default_value_t = 0.9999)]
    pub mu_cap: f64,
    #[arg(long, value_enum, default_value_t = SmoothingOrder::SmoothThenProject)]
    pub order: SmoothingOrder,
    /// Accept steps that increase the energy gap.
    #[arg(long)]
    pub no_guard: bool,
}

impl SolverArgs {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            variant: self.variant,
            alpha: self.alpha,
            smooth_lambda: self.smooth_lambda,
            smooth_passes: self.smooth_passes,
            max_iter: self.max_iter,
            tol_mu: self.tol_mu,
            tol_gap: self.tol_gap,
            mu_cap: self.mu_cap,
            monotone_guard: !self.no_guard,
            order: self.order,
        }
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub constraints: PathBuf,
    /// Solved map (OFF or OBJ) with the same connectivity as `--mesh`.
    #[arg(long)]
    pub map: PathBuf,
    /// Beltrami field CSV written by `solve`; without it the projected
    /// coefficient of the map is used.
    #[arg(long)]
    pub mu: Option<PathBuf>,
    /// Write diagnostics to this directory.
    #[arg(long)]
    pub diag: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}

#[derive(Debug, Args)]
pub struct MakeTestcaseArgs {
    #[arg(value_enum)]
    pub name: TestCaseKind,
    /// Approximate face count.
    pub size: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Validated inputs of a `solve` run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mesh_path: PathBuf,
    pub constraints_path: PathBuf,
    pub out_path: PathBuf,
    pub trace_path: PathBuf,
    pub diag_dir: PathBuf,
    pub params: SolverParams,
    pub bins: usize,
}

impl RunConfig {
    pub fn from_args(args: &SolveArgs) -> Result<Self> {
        let with_suffix = |suffix: &str| {
            let mut s = args.out.clone().into_os_string();
            s.push(suffix);
            PathBuf::from(s)
        };
        let config = RunConfig {
            mesh_path: args.mesh.clone(),
            constraints_path: args.constraints.clone(),
            out_path: args.out.clone(),
            trace_path: args.trace.clone().unwrap_or_else(|| with_suffix(".trace.csv")),
            diag_dir: args.diag.clone().unwrap_or_else(|| with_suffix(".diag")),
            params: args.solver.params(),
            bins: args.bins,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.bins == 0 {
            return Err(Error::Parameter("bins must be positive".into()));
        }
        let paths = [
            &self.mesh_path,
            &self.constraints_path,
            &self.out_path,
            &self.trace_path,
            &self.diag_dir,
        ];
        for (i, a) in paths.iter().enumerate() {
            for b in &paths[i + 1..] {
                if a == b {
                    return Err(Error::Parameter(format!(
                        "path {} is used twice",
                        a.display()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parses arguments, sets up logging and threads, and runs the command.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
    configure_threads();
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn configure_threads() {
    let threads = std::env::var("TQC_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(1);
    let par = if threads > 1 {
        faer::Par::rayon(threads)
    } else {
        faer::Par::Seq
    };
    faer::set_global_parallelism(par);
}

pub fn execute(command: &Command) -> Result<ExitCode> {
    match command {
        Command::Solve(args) => cmd_solve(&RunConfig::from_args(args)?),
        Command::Check(args) => cmd_check(args),
        Command::MakeTestcase(args) => cmd_make_testcase(args),
    }
}

pub fn cmd_solve(config: &RunConfig) -> Result<ExitCode> {
    let mesh = load_mesh(&config.mesh_path)?;
    let constraints = load_constraints(&config.constraints_path, &mesh, BoundaryMode::Full)?;
    let result = run(&mesh, &constraints, &config.params)?;

    write_off(&config.out_path, result.map.values(), mesh.faces())?;
    result.trace.write_csv(&config.trace_path)?;
    let report = diagnose(&mesh, &result.map, &result.mu, config.bins)?;
    write_report(&report, &config.diag_dir)?;
    result.mu.write_csv(config.diag_dir.join("mu.csv"))?;

    let last = result.trace.last();
    println!("termination: {}", result.trace.termination);
    println!("iterations: {}", result.trace.iterations());
    println!("energy_gap: {}", fmt_f64(last.energy_gap));
    println!("k: {}", fmt_f64(last.k));
    println!("fold_count: {}", report.fold_count);
    Ok(match result.trace.termination {
        Termination::Converged => ExitCode::SUCCESS,
        Termination::MaxIter | Termination::Stalled => ExitCode::from(EXIT_NOT_CONVERGED),
    })
}

/// Outcome of verifying a map against its inputs.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub energy: EnergyReport,
    pub max_constraint_error: f64,
    pub constraints_ok: bool,
    pub lower_bound_ok: bool,
    pub diagnostics: DiagnosticsReport,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.constraints_ok && self.lower_bound_ok
    }
}

/// Loads a solved map and checks it against the mesh it was computed on.
pub fn load_map(path: &Path, mesh: &TriangleMesh) -> Result<PiecewiseLinearMap> {
    let (values, faces, _) = read_mesh_data(path)?;
    if values.len() != mesh.vertex_count() {
        return Err(Error::Connectivity(format!(
            "{} has {} vertices, mesh has {}",
            path.display(),
            values.len(),
            mesh.vertex_count()
        )));
    }
    if faces != mesh.faces() {
        return Err(Error::Connectivity(format!(
            "{} has different faces than the mesh",
            path.display()
        )));
    }
    Ok(PiecewiseLinearMap::new(values))
}

pub fn check_map(
    mesh: &TriangleMesh,
    constraints: &ConstraintSet,
    map: &PiecewiseLinearMap,
    mu: Option<BeltramiField>,
    bins: usize,
) -> Result<CheckOutcome> {
    map.validate(mesh)?;
    let mu = match mu {
        Some(mu) => mu,
        None => project_constant_modulus(mesh, &beltrami_of_map(mesh, map)?),
    };
    let energy = match energy_gap(mesh, map, &mu, constraints.target_area()) {
        Err(Error::NonConstantModulus { .. }) => {
            energy_gap_pointwise(mesh, map, &mu, constraints.target_area())?
        }
        other => other?,
    };
    let max_constraint_error = constraints
        .iter()
        .map(|&(v, w)| (map.values()[v] - w).norm() / w.norm().max(1.0))
        .fold(0.0, f64::max);
    Ok(CheckOutcome {
        energy,
        max_constraint_error,
        constraints_ok: max_constraint_error <= CONSTRAINT_TOL,
        lower_bound_ok: lower_bound_check(&energy),
        diagnostics: diagnose(mesh, map, &mu, bins)?,
    })
}

pub fn cmd_check(args: &CheckArgs) -> Result<ExitCode> {
    let mesh = load_mesh(&args.mesh)?;
    let constraints = load_constraints(&args.constraints, &mesh, BoundaryMode::Full)?;
    let map = load_map(&args.map, &mesh)?;
    let mu = args.mu.as_ref().map(BeltramiField::read_csv).transpose()?;
    let outcome = check_map(&mesh, &constraints, &map, mu, args.bins)?;
    if let Some(dir) = &args.diag {
        write_report(&outcome.diagnostics, dir)?;
    }

    let d = &outcome.diagnostics;
    println!("energy_gap: {}", fmt_f64(outcome.energy.energy_gap));
    println!("harmonic_energy: {}", fmt_f64(outcome.energy.harmonic_energy));
    println!("target_area: {}", fmt_f64(outcome.energy.target_area));
    println!("k: {}", fmt_f64(outcome.energy.k_modulus));
    println!("max_constraint_error: {}", fmt_f64(outcome.max_constraint_error));
    println!("fold_count: {}", d.fold_count);
    println!("min_jacobian: {}", fmt_f64(d.min_jacobian));
    println!("hopf_residual: {}", fmt_f64(d.hopf_residual_norm));
    println!("arg_laplacian_median_abs: {}", fmt_f64(d.arg_laplacian_median_abs));
    println!("result: {}", if outcome.passed() { "ok" } else { "FAILED" });
    Ok(if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    })
}

pub fn cmd_make_testcase(args: &MakeTestcaseArgs) -> Result<ExitCode> {
    let case = make_testcase(args.name, args.size)?;
    let (mesh_path, csv_path) = case.write(&args.out_dir)?;
    println!(
        "wrote {} ({} faces) and {}",
        mesh_path.display(),
        case.mesh.face_count(),
        csv_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_args(extra: &[&str]) -> SolveArgs {
        let mut argv = vec!["tqc", "solve", "--mesh", "m.off", "--constraints", "c.csv", "--out", "o.off"];
        argv.extend_from_slice(extra);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Solve(a) => a,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_match_solver_params() {
        let a = solve_args(&[]);
        assert_eq!(a.solver.params(), SolverParams::default());
        let c = RunConfig::from_args(&a).unwrap();
        assert_eq!(c.trace_path, PathBuf::from("o.off.trace.csv"));
        assert_eq!(c.diag_dir, PathBuf::from("o.off.diag"));
    }

    #[test]
    fn flags_override_params() {
        let a = solve_args(&["--variant", "full", "--alpha", "0.5", "--order", "project-then-smooth", "--no-guard"]);
        let p = a.solver.params();
        assert_eq!(p.variant, Variant::Full);
        assert_eq!(p.alpha, 0.5);
        assert_eq!(p.order, SmoothingOrder::ProjectThenSmooth);
        assert!(!p.monotone_guard);
    }

    #[test]
    fn config_rejects_repeated_paths_and_bad_params() {
        assert!(RunConfig::from_args(&solve_args(&["--trace", "m.off"])).is_err());
        assert!(RunConfig::from_args(&solve_args(&["--mu-cap", "1.0"])).is_err());
        assert!(RunConfig::from_args(&solve_args(&["--bins", "0"])).is_err());
    }
}
