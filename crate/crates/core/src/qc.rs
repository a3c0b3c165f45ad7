//! The quasi-conformal iteration.
//!
//! State is a pair `(f, μ)` with `f = LBS(μ)` and `μ` of constant modulus.
//! One step extracts the Beltrami coefficient of `f`, smooths and projects
//! it back to constant modulus, and re-solves. The energy gap of the pair is
//! the convergence monitor; with the monotone guard on, a step that raises it
//! is retried once with a damped update and otherwise ends the run.

use std::fmt::Write as _;
use std::path::Path;

use crate::beltrami::{
    beltrami_in_auxiliary_coordinates, beltrami_of_map, clamp_modulus, laplacian_smooth,
    project_constant_modulus, BeltramiField, MU_CAP,
};
use crate::constraints::ConstraintSet;
use crate::energy::{energy_gap, energy_gap_pointwise, EnergyReport, GAP_EPS_REL};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::lbs::lbs;
use crate::mesh::{PiecewiseLinearMap, TriangleMesh};

/// Fraction of folded faces above which a step is a hard error.
pub const MAX_FOLD_FRACTION: f64 = 0.1;

pub const TRACE_HEADER: &str = "iter,energy_gap,k,mu_std,step_inf,min_jacobian";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Variant {
    /// `μ̃ = μ_n + α · μ(f, μ_n)` followed by projection.
    Full,
    /// `μ̃ = μ(f, 0)`: the Beltrami coefficient of the new map itself.
    #[default]
    Simplified,
}

/// Where smoothing sits relative to the constant-modulus projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum SmoothingOrder {
    /// Smooth, then project: iterates have exactly constant modulus.
    #[default]
    SmoothThenProject,
    /// Project, then smooth.
    ProjectThenSmooth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub variant: Variant,
    /// Step size of the full variant, in (0, 1].
    pub alpha: f64,
    pub smooth_lambda: f64,
    pub smooth_passes: usize,
    pub max_iter: usize,
    /// Stop when `max |μ_{n+1} − μ_n|` falls to this.
    pub tol_mu: f64,
    /// Stop when the gap falls to this fraction of the initial gap.
    pub tol_gap: f64,
    pub mu_cap: f64,
    pub monotone_guard: bool,
    pub order: SmoothingOrder,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            variant: Variant::Simplified,
            alpha: 1.0,
            smooth_lambda: 0.5,
            smooth_passes: 1,
            max_iter: 500,
            tol_mu: 1e-6,
            tol_gap: 1e-8,
            mu_cap: MU_CAP,
            monotone_guard: true,
            order: SmoothingOrder::SmoothThenProject,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parameter(what.to_string()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.smooth_lambda > 0.0 && self.smooth_lambda <= 1.0) {
            return bad("smooth_lambda must lie in (0, 1]");
        }
        if self.smooth_passes == 0 {
            return bad("smooth_passes must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if !(self.tol_mu > 0.0) || !(self.tol_gap > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.mu_cap > 0.0 && self.mu_cap < 1.0) {
            return bad("mu_cap must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIter,
    Stalled,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIter => "max_iter",
            Termination::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy_gap: f64,
    pub k: f64,
    pub mu_std: f64,
    pub step_inf: f64,
    pub min_jacobian: f64,
    pub folded_faces: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub warnings: Vec<String>,
}

impl IterationTrace {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("trace has the initial record")
    }

    /// Iterations performed after initialization.
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{TRACE_HEADER}");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iter,
                fmt_f64(r.energy_gap),
                fmt_f64(r.k),
                fmt_f64(r.mu_std),
                fmt_f64(r.step_inf),
                fmt_f64(r.min_jacobian)
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Parses trace CSV rows back into records (fold counts are not stored).
pub fn parse_trace_csv(text: &str) -> Result<Vec<IterationRecord>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return Err(Error::parse(1, format!("expected header '{TRACE_HEADER}'"))),
    }
    lines
        .map(|(i, line)| {
            let bad = || Error::parse(i + 1, "malformed trace row");
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(bad());
            }
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
            Ok(IterationRecord {
                iter: cols[0].trim().parse().map_err(|_| bad())?,
                energy_gap: num(cols[1])?,
                k: num(cols[2])?,
                mu_std: num(cols[3])?,
                step_inf: num(cols[4])?,
                min_jacobian: num(cols[5])?,
                folded_faces: 0,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub map: PiecewiseLinearMap,
    pub mu: BeltramiField,
    pub trace: IterationTrace,
    pub report: EnergyReport,
}

/// `μ₀ ≡ 0` and `f₀ = LBS(0)`, the discrete harmonic extension.
pub fn initialize(
    mesh: &TriangleMesh,
    constraints: &ConstraintSet,
) -> Result<(PiecewiseLinearMap, BeltramiField)> {
    let mu = BeltramiField::zeros(mesh.face_count());
    let map = lbs(mesh, &mu, constraints)?;
    Ok((map, mu))
}

/// One QC update from `(f, μ)` with `f = LBS(μ)`; returns the next pair and
/// its number of folded faces.
pub fn qc_step(
    mesh: &TriangleMesh,
    constraints: &ConstraintSet,
    params: &SolverParams,
    map: &PiecewiseLinearMap,
    mu: &BeltramiField,
) -> Result<(PiecewiseLinearMap, BeltramiField, usize)> {
    let raw = match params.variant {
        Variant::Simplified => beltrami_of_map(mesh, map)?,
        Variant::Full => {
            let correction = beltrami_in_auxiliary_coordinates(mesh, map, mu)?;
            BeltramiField::new(
                mu.values()
                    .iter()
                    .zip(correction.values())
                    .map(|(m, c)| m + params.alpha * c)
                    .collect(),
            )
        }
    };
    let smooth = |f: &BeltramiField| {
        laplacian_smooth(mesh, f, params.smooth_lambda, params.smooth_passes)
    };
    let next_mu = match params.order {
        SmoothingOrder::SmoothThenProject => project_constant_modulus(mesh, &smooth(&raw)),
        SmoothingOrder::ProjectThenSmooth => smooth(&project_constant_modulus(mesh, &raw)),
    };
    let next_mu = clamp_modulus(&next_mu, params.mu_cap);
    let next_map = lbs(mesh, &next_mu, constraints)?;

    let folded = (0..mesh.face_count())
        .filter(|&t| next_map.mapped_area(mesh, t) <= 0.0)
        .count();
    if folded as f64 > MAX_FOLD_FRACTION * mesh.face_count() as f64 {
        return Err(Error::TooManyFolds {
            folded,
            faces: mesh.face_count(),
        });
    }
    Ok((next_map, next_mu, folded))
}

fn evaluate(
    mesh: &TriangleMesh,
    constraints: &ConstraintSet,
    params: &SolverParams,
    map: &PiecewiseLinearMap,
    mu: &BeltramiField,
) -> Result<EnergyReport> {
    match params.order {
        SmoothingOrder::SmoothThenProject => energy_gap(mesh, map, mu, constraints.target_area()),
        SmoothingOrder::ProjectThenSmooth => {
            energy_gap_pointwise(mesh, map, mu, constraints.target_area())
        }
    }
}

fn min_jacobian(mesh: &TriangleMesh, map: &PiecewiseLinearMap) -> f64 {
    (0..mesh.face_count())
        .map(|t| {
            let (fz, fzb) = mesh.face_derivative(t, map.values());
            fz.norm_sqr() - fzb.norm_sqr()
        })
        .fold(f64::INFINITY, f64::min)
}

fn record(
    mesh: &TriangleMesh,
    iter: usize,
    map: &PiecewiseLinearMap,
    mu: &BeltramiField,
    report: &EnergyReport,
    step_inf: f64,
    folded_faces: usize,
) -> IterationRecord {
    let (_, mu_std) = mu.modulus_moments(mesh, true);
    IterationRecord {
        iter,
        energy_gap: report.energy_gap,
        k: report.k_modulus,
        mu_std,
        step_inf,
        min_jacobian: min_jacobian(mesh, map),
        folded_faces,
    }
}

/// Runs the QC iteration to convergence, stall, or `max_iter`.
pub fn run(
    mesh: &TriangleMesh,
    constraints: &ConstraintSet,
    params: &SolverParams,
) -> Result<SolveResult> {
    run_with_observer(mesh, constraints, params, |_, _| {})
}

/// [`run`], calling `observe` with every accepted record and its energy report
/// (iteration 0 included).
pub fn run_with_observer(
    mesh: &TriangleMesh,
    constraints: &ConstraintSet,
    params: &SolverParams,
    mut observe: impl FnMut(&IterationRecord, &EnergyReport),
) -> Result<SolveResult> {
    params.validate()?;
    let (mut map, mut mu) = initialize(mesh, constraints)?;
    let mut report = evaluate(mesh, constraints, params, &map, &mu)?;
    let gap0 = report.energy_gap;
    let mut records = vec![record(mesh, 0, &map, &mu, &report, 0.0, 0)];
    observe(&records[0], &report);
    let mut warnings = Vec::new();
    // accepted increases are bounded relative to the initial gap, which is
    // never looser than a bound relative to the harmonic energy
    let guard_eps = GAP_EPS_REL * gap0.min(report.harmonic_energy.abs());
    let mut step_params = params.clone();

    let mut termination = Termination::MaxIter;
    if gap0 <= params.tol_gap * constraints.target_area() {
        termination = Termination::Converged;
    }
    let mut iter = 0;
    while termination == Termination::MaxIter && iter < params.max_iter {
        iter += 1;
        let (mut next_map, mut next_mu, mut folded) =
            qc_step(mesh, constraints, &step_params, &map, &mu)?;
        let mut next_report = evaluate(mesh, constraints, params, &next_map, &next_mu)?;

        if params.monotone_guard && next_report.energy_gap > report.energy_gap + guard_eps {
            match step_params.variant {
                Variant::Full => step_params.alpha *= 0.5,
                Variant::Simplified => step_params.smooth_passes += 1,
            }
            log::debug!(
                "iteration {iter}: gap rose {:e} -> {:e}; retrying with alpha {} passes {}",
                report.energy_gap,
                next_report.energy_gap,
                step_params.alpha,
                step_params.smooth_passes
            );
            (next_map, next_mu, folded) = qc_step(mesh, constraints, &step_params, &map, &mu)?;
            next_report = evaluate(mesh, constraints, params, &next_map, &next_mu)?;
            if next_report.energy_gap > report.energy_gap + guard_eps {
                termination = Termination::Stalled;
                break;
            }
        }

        if folded > 0 {
            let w = format!("iteration {iter}: {folded} folded faces");
            log::warn!("{w}");
            warnings.push(w);
        }
        let step_inf = next_mu.sup_distance(&mu);
        records.push(record(mesh, iter, &next_map, &next_mu, &next_report, step_inf, folded));
        observe(records.last().expect("non-empty"), &next_report);
        log::info!(
            "iter {iter}: gap {:e} k {:.6} step {:e}",
            next_report.energy_gap,
            next_report.k_modulus,
            step_inf
        );
        map = next_map;
        mu = next_mu;
        report = next_report;
        if step_inf <= params.tol_mu || report.energy_gap <= params.tol_gap * gap0 {
            termination = Termination::Converged;
        }
    }

    Ok(SolveResult {
        map,
        mu,
        trace: IterationTrace {
            records,
            termination,
            warnings,
        },
        report,
    })
}
