//! Post-solve verification: modulus histogram, harmonicity of `arg μ`,
//! Hopf-differential residual and fold statistics.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beltrami::{beltrami_of_map, dilation_stats, BeltramiField, DilationStats, DIR_EPS};
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::mesh::{PiecewiseLinearMap, TriangleMesh};

pub const DEFAULT_BINS: usize = 50;

/// Area-weighted histogram of `|μ|` over `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulusHistogram {
    /// `bins + 1` equally spaced edges from 0 to 1.
    pub edges: Vec<f64>,
    pub mass: Vec<f64>,
}

impl ModulusHistogram {
    pub fn bins(&self) -> usize {
        self.mass.len()
    }

    /// Index of the bin carrying the most mass.
    pub fn mode_bin(&self) -> usize {
        self.mass
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,mass\n");
        for (i, m) in self.mass.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_f64(self.edges[i]),
                fmt_f64(self.edges[i + 1]),
                fmt_f64(*m)
            );
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut mass = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(i + 1, "malformed histogram row"))?;
            if cols.len() != 3 {
                return Err(Error::parse(i + 1, "expected bin_lo,bin_hi,mass"));
            }
            if edges.is_empty() {
                edges.push(cols[0]);
            }
            edges.push(cols[1]);
            mass.push(cols[2]);
        }
        Ok(ModulusHistogram { edges, mass })
    }
}

pub fn modulus_histogram(mesh: &TriangleMesh, mu: &BeltramiField, bins: usize) -> ModulusHistogram {
    let bins = bins.max(1);
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut mass = vec![0.0; bins];
    for (m, a) in mu.values().iter().zip(mesh.face_areas()) {
        let b = ((m.norm() * bins as f64).floor() as usize).min(bins - 1);
        mass[b] += a;
    }
    ModulusHistogram { edges, mass }
}

/// Dual-graph Laplacian of `arg μ` on interior faces.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgLaplacian {
    /// `(face, value)` for every evaluated face.
    pub values: Vec<(usize, f64)>,
    pub median_abs: f64,
    /// Interior faces skipped because they or a neighbor have no direction.
    pub excluded: usize,
}

impl ArgLaplacian {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("face,value\n");
        for (f, v) in &self.values {
            let _ = writeln!(out, "{f},{}", fmt_f64(*v));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Vec<(usize, f64)>> {
        text.lines()
            .enumerate()
            .skip(1)
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, line)| {
                let bad = || Error::parse(i + 1, "expected face,value");
                let (f, v) = line.split_once(',').ok_or_else(bad)?;
                Ok((
                    f.trim().parse().map_err(|_| bad())?,
                    v.trim().parse().map_err(|_| bad())?,
                ))
            })
            .collect()
    }
}

fn wrap_angle(d: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = d.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Per interior face `T`: `(Ā / A_T) Σ_N wrap(arg μ_N − arg μ_T)`, the sum
/// over the three edge neighbors, with differences taken as principal values
/// in (−π, π] and `Ā` the mean face area.
pub fn arg_laplacian_stats(mesh: &TriangleMesh, mu: &BeltramiField) -> ArgLaplacian {
    let areas = mesh.face_areas();
    let mean_area = mesh.total_area() / mesh.face_count() as f64;
    let vals = mu.values();
    let mut values = Vec::new();
    let mut excluded = 0;
    for (t, nb) in mesh.face_neighbors().iter().enumerate() {
        let [Some(a), Some(b), Some(c)] = *nb else {
            continue;
        };
        if [t, a, b, c].iter().any(|&f| vals[f].norm() <= DIR_EPS) {
            excluded += 1;
            continue;
        }
        let theta = vals[t].arg();
        let sum: f64 = [a, b, c]
            .iter()
            .map(|&n| wrap_angle(vals[n].arg() - theta))
            .sum();
        values.push((t, sum * mean_area / areas[t]));
    }
    let mut abs: Vec<f64> = values.iter().map(|(_, v)| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let median_abs = match abs.len() {
        0 => 0.0,
        n if n % 2 == 1 => abs[n / 2],
        n => 0.5 * (abs[n / 2 - 1] + abs[n / 2]),
    };
    ArgLaplacian {
        values,
        median_abs,
        excluded,
    }
}

/// Area-weighted L¹ norm of `f_ζ · conj(f_ζ̄)` in the auxiliary coordinates
/// of `μ`, with `f_ζ = (f_z − μ̄ f_z̄) / (1 − |μ|²)` and
/// `f_ζ̄ = f_z̄ − μ f_z`.
pub fn hopf_residual(mesh: &TriangleMesh, map: &PiecewiseLinearMap, mu: &BeltramiField) -> Result<f64> {
    map.validate(mesh)?;
    mu.validate(mesh)?;
    mu.check_admissible()?;
    Ok((0..mesh.face_count())
        .map(|t| {
            let (fz, fzb) = mesh.face_derivative(t, map.values());
            let m = mu.values()[t];
            let f_zeta = (fz - m.conj() * fzb) / (1.0 - m.norm_sqr());
            let f_zetabar = fzb - m * fz;
            mesh.face_areas()[t] * (f_zeta * f_zetabar.conj()).norm()
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    #[serde(skip)]
    pub histogram: Option<ModulusHistogram>,
    #[serde(skip)]
    pub arg_laplacian: Vec<(usize, f64)>,
    pub bins: usize,
    pub arg_laplacian_median_abs: f64,
    pub arg_excluded: usize,
    pub hopf_residual_norm: f64,
    pub min_jacobian: f64,
    pub fold_count: usize,
    /// Statistics of the iterate `μ*`.
    pub mu_stats: DilationStats,
    /// Statistics of the Beltrami coefficient of the map itself; absent when
    /// the map folds.
    pub map_mu_stats: Option<DilationStats>,
}

/// Gathers every diagnostic for a solved pair `(f*, μ*)`.
pub fn diagnose(
    mesh: &TriangleMesh,
    map: &PiecewiseLinearMap,
    mu: &BeltramiField,
    bins: usize,
) -> Result<DiagnosticsReport> {
    let jac: Vec<f64> = (0..mesh.face_count())
        .map(|t| {
            let (fz, fzb) = mesh.face_derivative(t, map.values());
            fz.norm_sqr() - fzb.norm_sqr()
        })
        .collect();
    let arg = arg_laplacian_stats(mesh, mu);
    let map_mu_stats = beltrami_of_map(mesh, map)
        .ok()
        .and_then(|m| dilation_stats(&m, mesh).ok());
    Ok(DiagnosticsReport {
        histogram: Some(modulus_histogram(mesh, mu, bins)),
        bins,
        arg_laplacian_median_abs: arg.median_abs,
        arg_excluded: arg.excluded,
        arg_laplacian: arg.values,
        hopf_residual_norm: hopf_residual(mesh, map, mu)?,
        min_jacobian: jac.iter().cloned().fold(f64::INFINITY, f64::min),
        fold_count: jac.iter().filter(|j| **j <= 0.0).count(),
        mu_stats: dilation_stats(mu, mesh)?,
        map_mu_stats,
    })
}

/// Writes `report.json`, `hist.csv` and `arglap.csv` into `dir`.
pub fn write_report(report: &DiagnosticsReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(p, e))
    };
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write("report.json", json)?;
    if let Some(h) = &report.histogram {
        write("hist.csv", h.to_csv())?;
    }
    let arg = ArgLaplacian {
        values: report.arg_laplacian.clone(),
        median_abs: report.arg_laplacian_median_abs,
        excluded: report.arg_excluded,
    };
    write("arglap.csv", arg.to_csv())
}

/// Reads back a directory written by [`write_report`].
pub fn read_report(dir: impl AsRef<Path>) -> Result<DiagnosticsReport> {
    let dir = dir.as_ref();
    let read = |name: &str| {
        let p = dir.join(name);
        std::fs::read_to_string(&p).map_err(|e| Error::io(p, e))
    };
    let mut report: DiagnosticsReport = serde_json::from_str(&read("report.json")?)
        .map_err(|e| Error::parse(e.line(), e.to_string()))?;
    report.histogram = Some(ModulusHistogram::parse_csv(&read("hist.csv")?)?);
    report.arg_laplacian = ArgLaplacian::parse_csv(&read("arglap.csv")?)?;
    Ok(report)
}
