//! Dirichlet boundary correspondence and interior landmarks.
//!
//! CSV layout, UTF-8:
//!
//! ```text
//! # target_area=3.14
//! vertex_index,target_x,target_y,kind
//! 0,1.0,0.0,boundary
//! 17,0.2,0.1,landmark
//! ```
//!
//! The `# target_area=` comment is optional; without it the target area is
//! the shoelace area of the mapped boundary loops.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::mesh::{polygon_signed_area, TriangleMesh, C64};

pub const CSV_HEADER: &str = "vertex_index,target_x,target_y,kind";

/// Whether every boundary vertex must carry a boundary row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    #[default]
    Full,
    Partial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    boundary: Vec<(usize, C64)>,
    landmarks: Vec<(usize, C64)>,
    target_area: f64,
}

impl ConstraintSet {
    /// Validates the rows against the mesh. `target_area` of `None` computes
    /// it from the mapped boundary loops.
    pub fn new(
        mesh: &TriangleMesh,
        boundary: Vec<(usize, C64)>,
        landmarks: Vec<(usize, C64)>,
        target_area: Option<f64>,
        mode: BoundaryMode,
    ) -> Result<Self> {
        let n = mesh.vertex_count();
        let mut target: Vec<Option<C64>> = vec![None; n];
        for (kind, rows) in [("boundary", &boundary), ("landmark", &landmarks)] {
            for &(v, w) in rows {
                if v >= n {
                    return Err(Error::Constraint(format!(
                        "{kind} vertex {v} out of range (mesh has {n} vertices)"
                    )));
                }
                if !(w.re.is_finite() && w.im.is_finite()) {
                    return Err(Error::Constraint(format!("{kind} vertex {v}: non-finite target")));
                }
                let on_boundary = mesh.is_boundary_vertex(v);
                if kind == "boundary" && !on_boundary {
                    return Err(Error::Constraint(format!(
                        "boundary row names interior vertex {v}"
                    )));
                }
                if kind == "landmark" && on_boundary {
                    return Err(Error::Constraint(format!(
                        "landmark row names boundary vertex {v}"
                    )));
                }
                if target[v].replace(w).is_some() {
                    return Err(Error::Constraint(format!("duplicate vertex {v}")));
                }
            }
        }
        if boundary.is_empty() && landmarks.is_empty() {
            return Err(Error::Constraint("empty constraint set".into()));
        }
        if mode == BoundaryMode::Full && boundary.len() < mesh.boundary_vertex_count() {
            return Err(Error::Constraint(format!(
                "{} boundary rows for {} boundary vertices (full-boundary mode)",
                boundary.len(),
                mesh.boundary_vertex_count()
            )));
        }

        let target_area = match target_area {
            Some(a) => a,
            None => mapped_boundary_area(mesh, &target)?,
        };
        if !(target_area > 0.0 && target_area.is_finite()) {
            return Err(Error::Constraint(format!(
                "target area must be positive, got {target_area}"
            )));
        }
        Ok(ConstraintSet {
            boundary,
            landmarks,
            target_area,
        })
    }

    /// Boundary rows `w = f(z)` for every boundary vertex plus the given
    /// landmark rows.
    pub fn from_boundary_map(
        mesh: &TriangleMesh,
        f: impl Fn(C64) -> C64,
        landmarks: Vec<(usize, C64)>,
    ) -> Result<Self> {
        let boundary = mesh
            .boundary_loops()
            .iter()
            .flatten()
            .map(|&v| (v, f(mesh.vertices()[v])))
            .collect();
        Self::new(mesh, boundary, landmarks, None, BoundaryMode::Full)
    }

    pub fn boundary(&self) -> &[(usize, C64)] {
        &self.boundary
    }

    pub fn landmarks(&self) -> &[(usize, C64)] {
        &self.landmarks
    }

    pub fn target_area(&self) -> f64 {
        self.target_area
    }

    /// All constrained vertices, boundary rows first.
    pub fn iter(&self) -> impl Iterator<Item = &(usize, C64)> {
        self.boundary.iter().chain(&self.landmarks)
    }

    pub fn len(&self) -> usize {
        self.boundary.len() + self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-vertex fixed value, `None` for free vertices.
    pub fn fixed_values(&self, vertex_count: usize) -> Vec<Option<C64>> {
        let mut fixed = vec![None; vertex_count];
        for &(v, w) in self.iter() {
            fixed[v] = Some(w);
        }
        fixed
    }

    /// Serializes to the CSV layout, with the target area as a header comment.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# target_area={}", fmt_f64(self.target_area));
        let _ = writeln!(out, "{CSV_HEADER}");
        for (kind, rows) in [("boundary", &self.boundary), ("landmark", &self.landmarks)] {
            for &(v, w) in rows {
                let _ = writeln!(out, "{v},{},{},{kind}", fmt_f64(w.re), fmt_f64(w.im));
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn mapped_boundary_area(mesh: &TriangleMesh, target: &[Option<C64>]) -> Result<f64> {
    let mut area = 0.0;
    for l in mesh.boundary_loops() {
        let pts = l
            .iter()
            .map(|&v| {
                target[v].ok_or_else(|| {
                    Error::Constraint(format!(
                        "boundary vertex {v} unconstrained; target_area must be given explicitly"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        area += polygon_signed_area(&pts);
    }
    Ok(area)
}

/// Parses constraint CSV text against `mesh`.
pub fn parse_constraints(text: &str, mesh: &TriangleMesh, mode: BoundaryMode) -> Result<ConstraintSet> {
    let mut target_area = None;
    let mut boundary = Vec::new();
    let mut landmarks = Vec::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(value) = comment.trim().strip_prefix("target_area=") {
                let a: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("invalid target_area '{value}'")))?;
                target_area = Some(a);
            }
            continue;
        }
        if !seen_header {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.join(",") != CSV_HEADER {
                return Err(Error::parse(line_no, format!("expected header '{CSV_HEADER}'")));
            }
            seen_header = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(Error::parse(line_no, "expected 4 columns"));
        }
        let v: usize = cols[0]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid vertex index '{}'", cols[0])))?;
        let x: f64 = cols[1]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid target_x '{}'", cols[1])))?;
        let y: f64 = cols[2]
            .parse()
            .map_err(|_| Error::parse(line_no, format!("invalid target_y '{}'", cols[2])))?;
        match cols[3] {
            "boundary" => boundary.push((v, C64::new(x, y))),
            "landmark" => landmarks.push((v, C64::new(x, y))),
            other => return Err(Error::parse(line_no, format!("unknown kind '{other}'"))),
        }
    }
    if !seen_header {
        return Err(Error::parse(1, "missing header row"));
    }
    ConstraintSet::new(mesh, boundary, landmarks, target_area, mode)
}

pub fn load_constraints(
    path: impl AsRef<Path>,
    mesh: &TriangleMesh,
    mode: BoundaryMode,
) -> Result<ConstraintSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_constraints(&text, mesh, mode)
}
