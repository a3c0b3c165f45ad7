//! Generated meshes and constraints used by the acceptance suite and the
//! `make-testcase` command.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::mesh::{annulus, disk, write_off, TriangleMesh, C64};

/// Inner radius of the source annulus.
pub const ANNULUS_INNER: f64 = 0.5;
/// Inner radius of the target annulus; angles are kept.
pub const ANNULUS_TARGET_INNER: f64 = 0.4;
/// Affine test map `z + AFFINE_B · z̄`.
pub const AFFINE_B: f64 = 0.3;
/// Six landmarks placed on this radius.
pub const LANDMARK_RADIUS: f64 = 0.5;
/// Radial displacement of the landmarks, alternating outward and inward.
pub const LANDMARK_SHIFT: f64 = 0.12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TestCaseKind {
    Affine,
    Identity,
    Landmarks,
    Annulus,
}

impl TestCaseKind {
    pub fn name(self) -> &'static str {
        match self {
            TestCaseKind::Affine => "affine",
            TestCaseKind::Identity => "identity",
            TestCaseKind::Landmarks => "landmarks",
            TestCaseKind::Annulus => "annulus",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TestCase {
    pub kind: TestCaseKind,
    pub mesh: TriangleMesh,
    pub constraints: ConstraintSet,
}

/// Builds a test case with roughly `size` faces. Deterministic in `size`.
pub fn make_testcase(kind: TestCaseKind, size: usize) -> Result<TestCase> {
    let (mesh, constraints) = match kind {
        TestCaseKind::Identity => {
            let m = disk(size);
            let c = ConstraintSet::from_boundary_map(&m, |z| z, vec![])?;
            (m, c)
        }
        TestCaseKind::Affine => {
            let m = disk(size);
            let c = ConstraintSet::from_boundary_map(&m, |z| z + AFFINE_B * z.conj(), vec![])?;
            (m, c)
        }
        TestCaseKind::Landmarks => {
            let m = disk(size);
            let landmarks = landmark_rows(&m)?;
            let c = ConstraintSet::from_boundary_map(&m, |z| z, landmarks)?;
            (m, c)
        }
        TestCaseKind::Annulus => {
            let m = annulus(ANNULUS_INNER, size);
            let scale = ANNULUS_TARGET_INNER / ANNULUS_INNER;
            let c = ConstraintSet::from_boundary_map(
                &m,
                |z| if z.norm() < 0.5 * (1.0 + ANNULUS_INNER) { scale * z } else { z },
                vec![],
            )?;
            (m, c)
        }
    };
    Ok(TestCase {
        kind,
        mesh,
        constraints,
    })
}

/// Six interior vertices nearest `LANDMARK_RADIUS · e^{i(πk/3 + π/12)}`, each moved
/// radially by `±LANDMARK_SHIFT`.
fn landmark_rows(mesh: &TriangleMesh) -> Result<Vec<(usize, C64)>> {
    (0..6)
        .map(|k| {
            let p = C64::from_polar(LANDMARK_RADIUS, PI / 3.0 * k as f64 + PI / 12.0);
            let v = (0..mesh.vertex_count())
                .filter(|&v| !mesh.is_boundary_vertex(v))
                .min_by(|&a, &b| {
                    (mesh.vertices()[a] - p)
                        .norm()
                        .total_cmp(&(mesh.vertices()[b] - p).norm())
                })
                .ok_or_else(|| Error::Constraint("mesh has no interior vertex".into()))?;
            let z = mesh.vertices()[v];
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            Ok((v, z * (1.0 + sign * LANDMARK_SHIFT / z.norm())))
        })
        .collect()
}

impl TestCase {
    /// Writes `<name>.off` and `<name>.csv` into `dir`; returns both paths.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mesh_path = dir.join(format!("{}.off", self.kind.name()));
        let csv_path = dir.join(format!("{}.csv", self.kind.name()));
        write_off(&mesh_path, self.mesh.vertices(), self.mesh.faces())?;
        self.constraints.write(&csv_path)?;
        Ok((mesh_path, csv_path))
    }
}
