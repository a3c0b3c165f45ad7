//! Planar triangle meshes and per-face differential operators.
//!
//! A [`TriangleMesh`] stores vertex positions as complex numbers `z = x + iy`
//! together with counterclockwise faces. Construction validates the mesh,
//! fixes clockwise faces, and derives the edge adjacency, boundary loops and
//! the per-corner coefficients of the linear shape functions' Wirtinger
//! derivatives, so that `f_z` and `f_z̄` of any piecewise-linear map are a
//! three-term sum per face.

mod generate;
mod io;

use std::collections::HashMap;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use generate::{annulus, disk, disk_with_rings};
pub use io::{
    load_mesh, load_mesh_with_warnings, parse_obj, parse_off, read_mesh_data, write_off, Parsed,
};

pub type C64 = Complex64;

/// Relative threshold on face area (times the mean face area) below which a
/// face is rejected as degenerate.
pub const AREA_EPS: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<C64>,
    faces: Vec<[usize; 3]>,
    areas: Vec<f64>,
    // d(phi_i)/dz and d(phi_i)/dzbar for the three corners of each face
    coef_z: Vec<[C64; 3]>,
    coef_zbar: Vec<[C64; 3]>,
    // neighbor across edge (corner i -> corner i + 1)
    neighbors: Vec<[Option<usize>; 3]>,
    boundary_loops: Vec<Vec<usize>>,
    on_boundary: Vec<bool>,
}

impl TriangleMesh {
    /// Builds a validated mesh. Clockwise faces are reoriented; a warning is
    /// logged for each.
    pub fn new(vertices: Vec<C64>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let (mesh, warnings) = Self::with_warnings(vertices, faces)?;
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(mesh)
    }

    /// Same as [`TriangleMesh::new`], but returns the warnings instead of
    /// logging them.
    pub fn with_warnings(
        vertices: Vec<C64>,
        mut faces: Vec<[usize; 3]>,
    ) -> Result<(Self, Vec<String>)> {
        let n = vertices.len();
        if n < 3 || faces.is_empty() {
            return Err(Error::EmptyMesh {
                vertices: n,
                faces: faces.len(),
            });
        }
        if let Some(index) = vertices.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite {
                what: "vertex position",
                index,
            });
        }

        let mut referenced = vec![false; n];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(Error::VertexOutOfRange {
                        face: fi,
                        vertex: v,
                        count: n,
                    });
                }
                referenced[v] = true;
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::RepeatedVertex { face: fi });
            }
        }
        if let Some(vertex) = referenced.iter().position(|r| !r) {
            return Err(Error::UnreferencedVertex { vertex });
        }

        let mut areas: Vec<f64> = faces
            .iter()
            .map(|f| signed_area(vertices[f[0]], vertices[f[1]], vertices[f[2]]))
            .collect();
        let mean = areas.iter().map(|a| a.abs()).sum::<f64>() / areas.len() as f64;
        let threshold = AREA_EPS * mean;
        let mut warnings = Vec::new();
        for (fi, (f, a)) in faces.iter_mut().zip(areas.iter_mut()).enumerate() {
            if !(a.abs() >= threshold) || *a == 0.0 {
                return Err(Error::DegenerateFace {
                    face: fi,
                    area: *a,
                    threshold,
                });
            }
            if *a < 0.0 {
                f.swap(1, 2);
                *a = -*a;
                warnings.push(format!("face {fi} was clockwise and has been reoriented"));
            }
        }

        let neighbors = face_neighbors(&faces)?;
        let boundary_loops = extract_boundary_loops(&vertices, &faces, &neighbors)?;
        let mut on_boundary = vec![false; n];
        for l in &boundary_loops {
            for &v in l {
                on_boundary[v] = true;
            }
        }

        let mut coef_z = Vec::with_capacity(faces.len());
        let mut coef_zbar = Vec::with_capacity(faces.len());
        for (f, &a) in faces.iter().zip(&areas) {
            let mut cz = [C64::new(0.0, 0.0); 3];
            let mut czb = [C64::new(0.0, 0.0); 3];
            for i in 0..3 {
                let zj = vertices[f[(i + 1) % 3]];
                let zk = vertices[f[(i + 2) % 3]];
                // grad(phi_i) as phi_x + i phi_y = i (z_k - z_j) / (2A)
                let e = zk - zj;
                czb[i] = C64::i() * e / (4.0 * a);
                cz[i] = -C64::i() * e.conj() / (4.0 * a);
            }
            coef_z.push(cz);
            coef_zbar.push(czb);
        }

        Ok((
            TriangleMesh {
                vertices,
                faces,
                areas,
                coef_z,
                coef_zbar,
                neighbors,
                boundary_loops,
                on_boundary,
            },
            warnings,
        ))
    }

    pub fn vertices(&self) -> &[C64] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Positive face areas, in face order.
    pub fn face_areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Boundary loops, outer loop first. Each loop keeps the domain on its
    /// left, so the outer loop is counterclockwise and holes are clockwise.
    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn boundary_vertex_count(&self) -> usize {
        self.on_boundary.iter().filter(|b| **b).count()
    }

    /// Edge-adjacent faces; entry `i` is the face across edge `(corner i,
    /// corner i+1)`.
    pub fn face_neighbors(&self) -> &[[Option<usize>; 3]] {
        &self.neighbors
    }

    /// Number of distinct undirected edges.
    pub fn edge_count(&self) -> usize {
        let interior: usize = self
            .neighbors
            .iter()
            .map(|n| n.iter().filter(|x| x.is_some()).count())
            .sum();
        let boundary: usize = self
            .neighbors
            .iter()
            .map(|n| n.iter().filter(|x| x.is_none()).count())
            .sum();
        interior / 2 + boundary
    }

    /// `(f_z, f_z̄)` of the affine interpolant of `values` on face `face`.
    #[inline]
    pub fn face_derivative(&self, face: usize, values: &[C64]) -> (C64, C64) {
        let f = &self.faces[face];
        let cz = &self.coef_z[face];
        let czb = &self.coef_zbar[face];
        // differences against corner 0 so constants map to exactly zero
        let v0 = values[f[0]];
        let d1 = values[f[1]] - v0;
        let d2 = values[f[2]] - v0;
        let fz = cz[1] * d1 + cz[2] * d2;
        let fzb = czb[1] * d1 + czb[2] * d2;
        (fz, fzb)
    }

    /// Per-corner coefficients `(∂φ_i/∂z, ∂φ_i/∂z̄)` of a face.
    pub fn shape_coefficients(&self, face: usize) -> (&[C64; 3], &[C64; 3]) {
        (&self.coef_z[face], &self.coef_zbar[face])
    }

    /// Face centroid in the source plane.
    pub fn centroid(&self, face: usize) -> C64 {
        let f = &self.faces[face];
        (self.vertices[f[0]] + self.vertices[f[1]] + self.vertices[f[2]]) / 3.0
    }
}

/// Signed area of the triangle `(a, b, c)`, positive when counterclockwise.
pub fn signed_area(a: C64, b: C64, c: C64) -> f64 {
    0.5 * ((b - a).conj() * (c - a)).im
}

/// Shoelace signed area of a closed polygon.
pub fn polygon_signed_area(points: &[C64]) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        acc += p.re * q.im - q.re * p.im;
    }
    0.5 * acc
}

fn face_neighbors(faces: &[[usize; 3]]) -> Result<Vec<[Option<usize>; 3]>> {
    let mut edges: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for (fi, f) in faces.iter().enumerate() {
        for c in 0..3 {
            let (a, b) = (f[c], f[(c + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push((fi, c));
        }
    }
    let mut neighbors = vec![[None; 3]; faces.len()];
    for (&(a, b), incident) in &edges {
        match incident.as_slice() {
            [_] => {}
            [(f0, c0), (f1, c1)] => {
                if faces[*f0][*c0] == faces[*f1][*c1] {
                    return Err(Error::InconsistentOrientation { a, b });
                }
                neighbors[*f0][*c0] = Some(*f1);
                neighbors[*f1][*c1] = Some(*f0);
            }
            _ => {
                return Err(Error::NonManifoldEdge {
                    a,
                    b,
                    count: incident.len(),
                })
            }
        }
    }
    Ok(neighbors)
}

fn extract_boundary_loops(
    vertices: &[C64],
    faces: &[[usize; 3]],
    neighbors: &[[Option<usize>; 3]],
) -> Result<Vec<Vec<usize>>> {
    // boundary half-edges a -> b, domain on the left
    let mut next: HashMap<usize, usize> = HashMap::new();
    let mut starts = Vec::new();
    for (f, nb) in faces.iter().zip(neighbors) {
        for c in 0..3 {
            if nb[c].is_none() {
                let (a, b) = (f[c], f[(c + 1) % 3]);
                if next.insert(a, b).is_some() {
                    return Err(Error::NonManifoldBoundary { vertex: a });
                }
                starts.push(a);
            }
        }
    }
    starts.sort_unstable();

    let mut visited: HashMap<usize, bool> = HashMap::with_capacity(next.len());
    let mut loops = Vec::new();
    for &start in &starts {
        if visited.contains_key(&start) {
            continue;
        }
        let mut l = vec![start];
        visited.insert(start, true);
        let mut cur = next[&start];
        while cur != start {
            if visited.insert(cur, true).is_some() {
                return Err(Error::NonManifoldBoundary { vertex: cur });
            }
            l.push(cur);
            cur = *next
                .get(&cur)
                .ok_or(Error::NonManifoldBoundary { vertex: cur })?;
        }
        loops.push(l);
    }

    // outer loop (largest positive area) first
    if let Some(outer) = loops
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| loop_area(vertices, a).total_cmp(&loop_area(vertices, b)))
        .map(|(i, _)| i)
    {
        let l = loops.remove(outer);
        loops.insert(0, l);
    }
    Ok(loops)
}

fn loop_area(vertices: &[C64], l: &[usize]) -> f64 {
    let pts: Vec<C64> = l.iter().map(|&v| vertices[v]).collect();
    polygon_signed_area(&pts)
}

/// One complex target position per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearMap {
    values: Vec<C64>,
}

impl PiecewiseLinearMap {
    pub fn new(values: Vec<C64>) -> Self {
        PiecewiseLinearMap { values }
    }

    /// Samples `f` at every mesh vertex.
    pub fn from_fn(mesh: &TriangleMesh, f: impl Fn(C64) -> C64) -> Self {
        PiecewiseLinearMap {
            values: mesh.vertices().iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn identity(mesh: &TriangleMesh) -> Self {
        PiecewiseLinearMap {
            values: mesh.vertices().to_vec(),
        }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks length against the mesh and finiteness.
    pub fn validate(&self, mesh: &TriangleMesh) -> Result<()> {
        if self.values.len() != mesh.vertex_count() {
            return Err(Error::LengthMismatch {
                what: "map values",
                expected: mesh.vertex_count(),
                actual: self.values.len(),
            });
        }
        if let Some(index) = self
            .values
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite {
                what: "map value",
                index,
            });
        }
        Ok(())
    }

    /// Signed area of face `face` after mapping.
    pub fn mapped_area(&self, mesh: &TriangleMesh, face: usize) -> f64 {
        let f = mesh.faces()[face];
        signed_area(self.values[f[0]], self.values[f[1]], self.values[f[2]])
    }
}

/// Per-face Wirtinger derivatives of a piecewise-linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceDerivatives {
    pub fz: Vec<C64>,
    pub fzbar: Vec<C64>,
}

impl FaceDerivatives {
    /// Per-face Jacobian determinant `|f_z|² − |f_z̄|²`.
    pub fn jacobians(&self) -> Vec<f64> {
        self.fz
            .iter()
            .zip(&self.fzbar)
            .map(|(a, b)| a.norm_sqr() - b.norm_sqr())
            .collect()
    }
}

/// Computes `f_z = (f_x − i f_y)/2` and `f_z̄ = (f_x + i f_y)/2` of the
/// affine interpolant on every face.
pub fn wirtinger_derivatives(
    mesh: &TriangleMesh,
    map: &PiecewiseLinearMap,
) -> Result<FaceDerivatives> {
    map.validate(mesh)?;
    let (fz, fzbar) = (0..mesh.face_count())
        .map(|t| mesh.face_derivative(t, map.values()))
        .unzip();
    Ok(FaceDerivatives { fz, fzbar })
}
