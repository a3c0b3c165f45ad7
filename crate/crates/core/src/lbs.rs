//! Linear Beltrami solver.
//!
//! Minimizes `E(f) = Σ_T area_T |f_z̄ − μ_T f_z|²` over piecewise-linear
//! maps with Dirichlet values at constrained vertices. Both Wirtinger
//! derivatives are complex-linear in the vertex values, so `E` is a
//! Hermitian form `fᴴ M f` and the minimizer solves `M_FF f_F = −M_FC f_C`
//! over the free vertices `F`. `M_FF` is factored with a sparse Cholesky.

use std::fmt::Write as _;
use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::beltrami::BeltramiField;
use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::mesh::{PiecewiseLinearMap, TriangleMesh, C64};

/// Relative residual accepted from the linear solve.
pub const SOLVER_TOL: f64 = 1e-10;

/// Normal equations of the LBS energy with constraints eliminated.
#[derive(Debug, Clone)]
pub struct LbsSystem {
    matrix: SparseColMat<usize, C64>,
    rhs: Vec<C64>,
    slot: Vec<Option<usize>>,
    free: Vec<usize>,
    constrained: Vec<(usize, C64)>,
}

impl LbsSystem {
    /// Number of free (unknown) vertices.
    pub fn dim(&self) -> usize {
        self.free.len()
    }

    pub fn rhs(&self) -> &[C64] {
        &self.rhs
    }

    /// Unknown slot of a mesh vertex, `None` when constrained.
    pub fn slot(&self, vertex: usize) -> Option<usize> {
        self.slot[vertex]
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    pub fn constrained(&self) -> &[(usize, C64)] {
        &self.constrained
    }

    /// Matrix entries `(row, col, value)` in column-major order.
    pub fn entries(&self) -> Vec<(usize, usize, C64)> {
        let m = self.matrix.as_ref();
        let mut out = Vec::with_capacity(m.compute_nnz());
        for j in 0..m.ncols() {
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                out.push((i, j, *v));
            }
        }
        out
    }

    /// `y = M_FF x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let m = self.matrix.as_ref();
        let mut y = vec![C64::new(0.0, 0.0); x.len()];
        for (j, &xj) in x.iter().enumerate().take(m.ncols()) {
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `xᴴ M_FF x` for free-vertex values `x`.
    pub fn quadratic_form(&self, x: &[C64]) -> f64 {
        self.apply(x)
            .iter()
            .zip(x)
            .map(|(y, xi)| (xi.conj() * y).re)
            .sum()
    }

    /// Dense copy of `M_FF`, for small debugging and verification cases.
    pub fn to_dense(&self) -> Mat<C64> {
        let n = self.dim();
        let mut d = Mat::<C64>::zeros(n, n);
        for (i, j, v) in self.entries() {
            d[(i, j)] = v;
        }
        d
    }

    /// Dumps the matrix as `row col re im` lines.
    pub fn write_coo(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        let _ = writeln!(out, "# {} {} {}", self.dim(), self.dim(), self.matrix.compute_nnz());
        for (i, j, v) in self.entries() {
            let _ = writeln!(out, "{i} {j} {} {}", fmt_f64(v.re), fmt_f64(v.im));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Assembles the constrained normal equations for target field `mu`.
pub fn assemble(
    mesh: &TriangleMesh,
    mu: &BeltramiField,
    constraints: &ConstraintSet,
) -> Result<LbsSystem> {
    mu.validate(mesh)?;
    mu.check_admissible()?;
    if constraints.is_empty() {
        return Err(Error::Constraint("empty constraint set".into()));
    }
    let n = mesh.vertex_count();
    let fixed = constraints.fixed_values(n);
    let mut slot = vec![None; n];
    let mut free = Vec::new();
    for v in 0..n {
        if fixed[v].is_none() {
            slot[v] = Some(free.len());
            free.push(v);
        }
    }
    let dim = free.len();

    let mut triplets: Vec<(usize, usize, C64)> = Vec::with_capacity(9 * mesh.face_count());
    let mut rhs = vec![C64::new(0.0, 0.0); dim];
    for (t, face) in mesh.faces().iter().enumerate() {
        let (cz, czb) = mesh.shape_coefficients(t);
        let area = mesh.face_areas()[t];
        let m = mu.values()[t];
        let g: [C64; 3] = std::array::from_fn(|i| czb[i] - m * cz[i]);
        for a in 0..3 {
            let Some(row) = slot[face[a]] else { continue };
            let ga = area * g[a].conj();
            for b in 0..3 {
                let entry = ga * g[b];
                match (slot[face[b]], fixed[face[b]]) {
                    (Some(col), _) => triplets.push((row, col, entry)),
                    (None, Some(w)) => rhs[row] -= entry * w,
                    (None, None) => unreachable!("vertex is either free or fixed"),
                }
            }
        }
    }
    // merge duplicates in a fixed order
    triplets.sort_by_key(|&(r, c, _)| (c, r));
    let mut merged: Vec<Triplet<usize, usize, C64>> = Vec::with_capacity(triplets.len() / 3);
    for (r, c, v) in triplets {
        match merged.last_mut() {
            Some(last) if last.row == r && last.col == c => last.val += v,
            _ => merged.push(Triplet::new(r, c, v)),
        }
    }
    let matrix = SparseColMat::try_new_from_triplets(dim, dim, &merged)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;

    Ok(LbsSystem {
        matrix,
        rhs,
        slot,
        free,
        constrained: constraints.iter().copied().collect(),
    })
}

/// Solves the assembled system and returns the full vertex map, with
/// constrained vertices set to their prescribed values exactly.
pub fn solve(system: &LbsSystem) -> Result<PiecewiseLinearMap> {
    let n = system.slot.len();
    let mut values = vec![C64::new(0.0, 0.0); n];
    for &(v, w) in &system.constrained {
        values[v] = w;
    }
    let dim = system.dim();
    if dim == 0 {
        return Ok(PiecewiseLinearMap::new(values));
    }

    let llt = system
        .matrix
        .as_ref()
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let b = Mat::<C64>::from_fn(dim, 1, |i, _| system.rhs[i]);
    let mut x = llt.solve(&b);

    let rhs_norm = norm(&system.rhs);
    let mut xv: Vec<C64> = (0..dim).map(|i| x[(i, 0)]).collect();
    let mut rel = relative_residual(system, &xv, rhs_norm);
    // iterative refinement if the direct solve came out loose
    for _ in 0..3 {
        if rel <= SOLVER_TOL {
            break;
        }
        let ax = system.apply(&xv);
        let r = Mat::<C64>::from_fn(dim, 1, |i, _| system.rhs[i] - ax[i]);
        let dx = llt.solve(&r);
        x += &dx;
        xv = (0..dim).map(|i| x[(i, 0)]).collect();
        rel = relative_residual(system, &xv, rhs_norm);
    }
    if !(rel <= SOLVER_TOL) {
        return Err(Error::Factorization(format!(
            "relative residual {rel:e} exceeds {SOLVER_TOL:e}"
        )));
    }
    for (&v, xi) in system.free.iter().zip(xv) {
        values[v] = xi;
    }
    Ok(PiecewiseLinearMap::new(values))
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn relative_residual(system: &LbsSystem, x: &[C64], rhs_norm: f64) -> f64 {
    let ax = system.apply(x);
    let r: Vec<C64> = ax.iter().zip(&system.rhs).map(|(a, b)| b - a).collect();
    let scale = if rhs_norm > 0.0 { rhs_norm } else { 1.0 };
    norm(&r) / scale
}

/// `LBS(μ)`: assemble and solve in one call.
pub fn lbs(mesh: &TriangleMesh, mu: &BeltramiField, constraints: &ConstraintSet) -> Result<PiecewiseLinearMap> {
    solve(&assemble(mesh, mu, constraints)?)
}

/// `Σ_T area_T |f_z̄ − μ_T f_z|²`.
pub fn residual_energy(mesh: &TriangleMesh, map: &PiecewiseLinearMap, mu: &BeltramiField) -> Result<f64> {
    map.validate(mesh)?;
    mu.validate(mesh)?;
    Ok((0..mesh.face_count())
        .map(|t| {
            let (fz, fzb) = mesh.face_derivative(t, map.values());
            mesh.face_areas()[t] * (fzb - mu.values()[t] * fz).norm_sqr()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::BoundaryMode;
    use crate::mesh::disk;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn fully_constrained_triangle_returns_constraints() {
        let m = TriangleMesh::new(vec![c(0., 0.), c(1., 0.), c(0., 1.)], vec![[0, 1, 2]]).unwrap();
        let targets = vec![(0, c(0., 0.)), (1, c(2., 0.)), (2, c(0., 3.))];
        let cs = ConstraintSet::new(&m, targets.clone(), vec![], None, BoundaryMode::Full).unwrap();
        let sys = assemble(&m, &BeltramiField::zeros(1), &cs).unwrap();
        assert_eq!(sys.dim(), 0);
        let f = solve(&sys).unwrap();
        assert_eq!(f.values(), &[c(0., 0.), c(2., 0.), c(0., 3.)]);
    }

    #[test]
    fn quadratic_form_matches_direct_energy() {
        let m = disk(150);
        let cs = ConstraintSet::from_boundary_map(&m, |z| z * 1.2 + 0.1, vec![]).unwrap();
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for mu in [
            BeltramiField::zeros(m.face_count()),
            BeltramiField::new((0..m.face_count()).map(|_| c(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5))).collect()),
        ] {
            let sys = assemble(&m, &mu, &cs).unwrap();
            let fixed = cs.fixed_values(m.vertex_count());
            let only_fixed = PiecewiseLinearMap::new(fixed.iter().map(|w| w.unwrap_or_default()).collect());
            let e_fixed = residual_energy(&m, &only_fixed, &mu).unwrap();
            for _ in 0..5 {
                let x: Vec<C64> = (0..sys.dim())
                    .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect();
                let mut full = only_fixed.clone();
                for (&v, xi) in sys.free_vertices().iter().zip(&x) {
                    full.values_mut()[v] = *xi;
                }
                let direct = residual_energy(&m, &full, &mu).unwrap();
                let rhs_term: f64 = x.iter().zip(sys.rhs()).map(|(xi, b)| (xi.conj() * b).re).sum();
                let via_system = sys.quadratic_form(&x) - 2.0 * rhs_term + e_fixed;
                assert!((direct - via_system).abs() <= 1e-10 * direct.max(1.0), "{direct} vs {via_system}");
            }
        }
    }

    #[test]
    fn matrix_is_hermitian_positive_definite() {
        let m = disk(200);
        assert!(m.vertex_count() <= 200);
        let cs = ConstraintSet::from_boundary_map(&m, |z| z, vec![]).unwrap();
        let mu = BeltramiField::new((0..m.face_count()).map(|t| C64::from_polar(0.6, t as f64)).collect());
        let sys = assemble(&m, &mu, &cs).unwrap();
        let d = sys.to_dense();
        let n = sys.dim();
        let scale = (0..n).map(|i| d[(i, i)].norm()).fold(0.0, f64::max);
        for i in 0..n {
            for j in 0..n {
                assert!((d[(i, j)] - d[(j, i)].conj()).norm() <= 1e-10 * scale);
            }
        }
        let eig = d.self_adjoint_eigenvalues(Side::Lower).unwrap();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min > 0.0, "smallest eigenvalue {min}");
    }

    #[test]
    fn identity_boundary_reproduces_identity() {
        let m = disk(500);
        let cs = ConstraintSet::from_boundary_map(&m, |z| z, vec![]).unwrap();
        let f = lbs(&m, &BeltramiField::zeros(m.face_count()), &cs).unwrap();
        for (w, z) in f.values().iter().zip(m.vertices()) {
            assert!((w - z).norm() < 1e-9);
        }
    }

    #[test]
    fn affine_data_is_reproduced_for_matching_mu() {
        let m = disk(800);
        let aff = |z: C64| z + 0.3 * z.conj();
        let cs = ConstraintSet::from_boundary_map(&m, aff, vec![]).unwrap();
        let f = lbs(&m, &BeltramiField::constant(m.face_count(), c(0.3, 0.)), &cs).unwrap();
        for (w, z) in f.values().iter().zip(m.vertices()) {
            assert!((w - aff(*z)).norm() < 1e-9);
        }
    }

    #[test]
    fn mobius_error_shrinks_under_refinement() {
        let mobius = |z: C64| (z - 0.3) / (1.0 - 0.3 * z);
        let max_err = |faces| {
            let m = disk(faces);
            let cs = ConstraintSet::from_boundary_map(&m, mobius, vec![]).unwrap();
            let f = lbs(&m, &BeltramiField::zeros(m.face_count()), &cs).unwrap();
            f.values()
                .iter()
                .zip(m.vertices())
                .map(|(w, z)| (w - mobius(*z)).norm())
                .fold(0.0, f64::max)
        };
        let coarse = max_err(512);
        let fine = max_err(8192);
        assert!(fine < coarse);
        assert!(fine <= 2e-2, "max error {fine}");
    }

    #[test]
    fn residual_energy_examples() {
        let m = disk(300);
        let f = PiecewiseLinearMap::from_fn(&m, |z| 2.0 * z + 0.6 * z.conj());
        let e = residual_energy(&m, &f, &BeltramiField::constant(m.face_count(), c(0.3, 0.))).unwrap();
        assert!(e < 1e-18);
        let id = PiecewiseLinearMap::identity(&m);
        let e = residual_energy(&m, &id, &BeltramiField::constant(m.face_count(), c(0.5, 0.))).unwrap();
        assert!((e - 0.25 * m.total_area()).abs() < 1e-12);

        // two faces, brute-force per-face evaluation
        let two = TriangleMesh::new(
            vec![c(0., 0.), c(1., 0.), c(0., 1.), c(1.2, 0.9)],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        let g = PiecewiseLinearMap::new(vec![c(0.1, 0.2), c(1.3, -0.1), c(-0.2, 0.8), c(0.9, 1.4)]);
        let mu = BeltramiField::new(vec![c(0.2, 0.1), c(-0.3, 0.4)]);
        let mut brute = 0.0;
        for (t, face) in two.faces().iter().enumerate() {
            let [p, q, r] = face.map(|v| two.vertices()[v]);
            let [fp, fq, fr] = face.map(|v| g.values()[v]);
            // solve for affine f = a z + b zbar + const through three points
            let (e1, e2) = (q - p, r - p);
            let (d1, d2) = (fq - fp, fr - fp);
            let det = e1 * e2.conj() - e1.conj() * e2;
            let a = (d1 * e2.conj() - d2 * e1.conj()) / det;
            let b = (e1 * d2 - e2 * d1) / det;
            let area = 0.5 * (e1.conj() * e2).im;
            brute += area * (b - mu.values()[t] * a).norm_sqr();
        }
        let e = residual_energy(&two, &g, &mu).unwrap();
        assert!((e - brute).abs() < 1e-14, "{e} vs {brute}");
    }

    #[test]
    fn rejects_inadmissible_mu() {
        let m = disk(50);
        let cs = ConstraintSet::from_boundary_map(&m, |z| z, vec![]).unwrap();
        let mu = BeltramiField::constant(m.face_count(), c(1.0, 0.0));
        assert!(matches!(assemble(&m, &mu, &cs), Err(Error::Inadmissible { .. })));
    }

    #[test]
    fn coo_dump_lists_every_entry() {
        let m = disk(24);
        let cs = ConstraintSet::from_boundary_map(&m, |z| z, vec![]).unwrap();
        let sys = assemble(&m, &BeltramiField::zeros(m.face_count()), &cs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.coo");
        sys.write_coo(&p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().count(), 1 + sys.entries().len());
    }
}
