//! Per-face Beltrami fields: extraction from maps, the auxiliary-metric
//! coefficient, projection onto constant modulus, dual-graph smoothing and
//! dilation statistics.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::mesh::{PiecewiseLinearMap, TriangleMesh, C64};

/// Default admissibility cap on `|μ|`.
pub const MU_CAP: f64 = 0.9999;
/// Moduli at or below this have no defined direction.
pub const DIR_EPS: f64 = 1e-14;
/// `|f_z|` at or below this marks a degenerate face.
pub const DERIV_EPS: f64 = 1e-12;

pub const CSV_HEADER: &str = "face_index,re,im";

/// One complex Beltrami value per face.
#[derive(Debug, Clone, PartialEq)]
pub struct BeltramiField {
    values: Vec<C64>,
}

impl BeltramiField {
    pub fn new(values: Vec<C64>) -> Self {
        BeltramiField { values }
    }

    pub fn constant(faces: usize, value: C64) -> Self {
        BeltramiField {
            values: vec![value; faces],
        }
    }

    pub fn zeros(faces: usize) -> Self {
        Self::constant(faces, C64::new(0.0, 0.0))
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self, mesh: &TriangleMesh) -> Result<()> {
        if self.values.len() != mesh.face_count() {
            return Err(Error::LengthMismatch {
                what: "Beltrami field",
                expected: mesh.face_count(),
                actual: self.values.len(),
            });
        }
        if let Some(index) = self
            .values
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite {
                what: "Beltrami value",
                index,
            });
        }
        Ok(())
    }

    /// Fails on the first face with `|μ| ≥ 1`.
    pub fn check_admissible(&self) -> Result<()> {
        match self.values.iter().position(|m| !(m.norm() < 1.0)) {
            Some(face) => Err(Error::Inadmissible {
                face,
                modulus: self.values[face].norm(),
            }),
            None => Ok(()),
        }
    }

    /// `max |μ|`.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    /// `max |μ − other|`.
    pub fn sup_distance(&self, other: &BeltramiField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Area-weighted mean and standard deviation of `|μ|`, restricted to faces
    /// with a defined direction when `defined_only` is set.
    pub fn modulus_moments(&self, mesh: &TriangleMesh, defined_only: bool) -> (f64, f64) {
        let mut w = 0.0;
        let mut s1 = 0.0;
        for (m, a) in self.values.iter().zip(mesh.face_areas()) {
            let r = m.norm();
            if defined_only && r <= DIR_EPS {
                continue;
            }
            w += a;
            s1 += a * r;
        }
        if w == 0.0 {
            return (0.0, 0.0);
        }
        let mean = s1 / w;
        let mut s2 = 0.0;
        for (m, a) in self.values.iter().zip(mesh.face_areas()) {
            let r = m.norm();
            if defined_only && r <= DIR_EPS {
                continue;
            }
            s2 += a * (r - mean) * (r - mean);
        }
        (mean, (s2 / w).sqrt())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * self.values.len());
        let _ = writeln!(out, "{CSV_HEADER}");
        for (i, m) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{i},{},{}", fmt_f64(m.re), fmt_f64(m.im));
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::parse(1, format!("expected header '{CSV_HEADER}'"))),
        }
        let mut values = Vec::new();
        for (i, line) in lines {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || Error::parse(i + 1, "expected face_index,re,im");
            if cols.len() != 3 {
                return Err(bad());
            }
            let idx: usize = cols[0].parse().map_err(|_| bad())?;
            if idx != values.len() {
                return Err(Error::parse(i + 1, format!("face index {idx} out of order")));
            }
            values.push(C64::new(
                cols[1].parse().map_err(|_| bad())?,
                cols[2].parse().map_err(|_| bad())?,
            ));
        }
        Ok(BeltramiField { values })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }
}

/// `μ = f_z̄ / f_z` on every face.
pub fn beltrami_of_map(mesh: &TriangleMesh, map: &PiecewiseLinearMap) -> Result<BeltramiField> {
    map.validate(mesh)?;
    (0..mesh.face_count())
        .map(|t| {
            let (fz, fzb) = mesh.face_derivative(t, map.values());
            beltrami_ratio(t, fzb, fz)
        })
        .collect::<Result<Vec<_>>>()
        .map(BeltramiField::new)
}

#[inline]
fn beltrami_ratio(face: usize, num: C64, den: C64) -> Result<C64> {
    let modulus = den.norm();
    if !(modulus > DERIV_EPS) {
        return Err(Error::DegenerateDerivative { face, modulus });
    }
    Ok(num / den)
}

fn check_nu(mesh: &TriangleMesh, nu: &BeltramiField) -> Result<()> {
    nu.validate(mesh)?;
    nu.check_admissible()
}

/// Beltrami coefficient under the auxiliary metric `|dz + ν dz̄|²`, in the
/// closed form `(f_z̄ + ν f_z) / (f_z − ν̄ f_z̄)`.
///
/// For `ν ≡ 0` this is bit-identical to [`beltrami_of_map`].
pub fn auxiliary_beltrami(
    mesh: &TriangleMesh,
    map: &PiecewiseLinearMap,
    nu: &BeltramiField,
) -> Result<BeltramiField> {
    map.validate(mesh)?;
    check_nu(mesh, nu)?;
    (0..mesh.face_count())
        .map(|t| {
            let (fz, fzb) = mesh.face_derivative(t, map.values());
            let n = nu.values[t];
            if n == C64::new(0.0, 0.0) {
                beltrami_ratio(t, fzb, fz)
            } else {
                beltrami_ratio(t, fzb + n * fz, fz - n.conj() * fzb)
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(BeltramiField::new)
}

/// Beltrami coefficient of `f` with respect to the coordinate
/// `ζ = z + ν z̄` (face-wise constant ν): `(f_z̄ − ν f_z) / (f_z − ν̄ f_z̄)`.
///
/// Vanishes exactly when `f` has Beltrami coefficient ν, which makes it the
/// correction term of the full QC update.
pub fn beltrami_in_auxiliary_coordinates(
    mesh: &TriangleMesh,
    map: &PiecewiseLinearMap,
    nu: &BeltramiField,
) -> Result<BeltramiField> {
    map.validate(mesh)?;
    check_nu(mesh, nu)?;
    (0..mesh.face_count())
        .map(|t| {
            let (fz, fzb) = mesh.face_derivative(t, map.values());
            let n = nu.values[t];
            beltrami_ratio(t, fzb - n * fz, fz - n.conj() * fzb)
        })
        .collect::<Result<Vec<_>>>()
        .map(BeltramiField::new)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DilationStats {
    pub max_modulus: f64,
    pub mean_modulus: f64,
    pub modulus_std: f64,
    /// Maximal dilation `(1 + max|μ|) / (1 − max|μ|)`.
    pub k: f64,
}

pub fn dilation_stats(field: &BeltramiField, mesh: &TriangleMesh) -> Result<DilationStats> {
    field.validate(mesh)?;
    field.check_admissible()?;
    let max_modulus = field.sup_norm();
    let (mean_modulus, modulus_std) = field.modulus_moments(mesh, false);
    Ok(DilationStats {
        max_modulus,
        mean_modulus,
        modulus_std,
        k: (1.0 + max_modulus) / (1.0 - max_modulus),
    })
}

/// Projects onto constant modulus: every face keeps its argument and takes
/// the area-weighted mean modulus `k`. Faces with `|μ| ≤ DIR_EPS` map to 0.
pub fn project_constant_modulus(mesh: &TriangleMesh, field: &BeltramiField) -> BeltramiField {
    let areas = mesh.face_areas();
    let total: f64 = areas.iter().sum();
    let k = field
        .values
        .iter()
        .zip(areas)
        .map(|(m, a)| a * m.norm())
        .sum::<f64>()
        / total;
    BeltramiField::new(
        field
            .values
            .iter()
            .map(|m| {
                let r = m.norm();
                if r > DIR_EPS {
                    m * (k / r)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect(),
    )
}

/// Damped dual-graph averaging: each pass replaces `μ_T` with
/// `(1 − λ) μ_T + λ · mean_N(μ)`, the mean area-weighted over the faces
/// sharing an edge with `T`.
pub fn laplacian_smooth(
    mesh: &TriangleMesh,
    field: &BeltramiField,
    lambda: f64,
    passes: usize,
) -> BeltramiField {
    let areas = mesh.face_areas();
    let mut cur = field.values.clone();
    let mut next = cur.clone();
    for _ in 0..passes {
        for (t, nb) in mesh.face_neighbors().iter().enumerate() {
            let mut w = 0.0;
            let mut acc = C64::new(0.0, 0.0);
            // differences keep constant fields bitwise unchanged
            for &n in nb.iter().flatten() {
                w += areas[n];
                acc += areas[n] * (cur[n] - cur[t]);
            }
            next[t] = if w > 0.0 {
                cur[t] + lambda * (acc / w)
            } else {
                cur[t]
            };
        }
        std::mem::swap(&mut cur, &mut next);
    }
    BeltramiField::new(cur)
}

/// Rescales values with `|μ| > cap` to modulus `cap`, keeping the argument.
pub fn clamp_modulus(field: &BeltramiField, cap: f64) -> BeltramiField {
    BeltramiField::new(
        field
            .values
            .iter()
            .map(|&m| {
                let r = m.norm();
                if r > cap {
                    m * (cap / r)
                } else {
                    m
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::disk;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn two_faces() -> TriangleMesh {
        // two unit-area-0.5 triangles sharing edge (1, 2)
        TriangleMesh::new(
            vec![c(0., 0.), c(1., 0.), c(0., 1.), c(1., 1.)],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap()
    }

    #[test]
    fn identity_and_affine_coefficients() {
        let m = disk(200);
        let id = beltrami_of_map(&m, &PiecewiseLinearMap::identity(&m)).unwrap();
        assert!(id.values().iter().all(|v| v.norm() < 1e-14));
        let aff = beltrami_of_map(&m, &PiecewiseLinearMap::from_fn(&m, |z| z + 0.5 * z.conj())).unwrap();
        assert!(aff.values().iter().all(|v| (v - 0.5).norm() < 1e-12));
    }

    fn worst_z_squared_modulus(faces: usize) -> f64 {
        let m = disk(faces);
        let mu = beltrami_of_map(&m, &PiecewiseLinearMap::from_fn(&m, |z| z * z)).unwrap();
        (0..m.face_count())
            .filter(|&t| m.faces()[t].iter().all(|&v| m.vertices()[v].norm() > 0.1))
            .map(|t| mu.values()[t].norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn z_squared_is_nearly_conformal_away_from_origin() {
        // threshold measured on the generated 8k-face disk (0.0926)
        let coarse = worst_z_squared_modulus(8192);
        assert!(coarse <= 0.1, "max |mu| = {coarse}");
        let fine = worst_z_squared_modulus(4 * 8192);
        assert!(fine <= 0.6 * coarse, "{fine} vs {coarse}");
    }

    #[test]
    fn folded_face_reports_index() {
        let m = two_faces();
        let flat = PiecewiseLinearMap::new(vec![c(0., 0.); 4]);
        assert!(matches!(
            beltrami_of_map(&m, &flat),
            Err(Error::DegenerateDerivative { face: 0, .. })
        ));
    }

    #[test]
    fn auxiliary_examples() {
        let m = disk(150);
        let f = PiecewiseLinearMap::from_fn(&m, |z| z + 0.5 * z.conj());
        let zero = BeltramiField::zeros(m.face_count());
        assert_eq!(
            auxiliary_beltrami(&m, &f, &zero).unwrap(),
            beltrami_of_map(&m, &f).unwrap()
        );

        let nu = BeltramiField::new((0..m.face_count()).map(|t| c(0.3, -0.2 + 0.001 * t as f64 / m.face_count() as f64)).collect());
        let id = auxiliary_beltrami(&m, &PiecewiseLinearMap::identity(&m), &nu).unwrap();
        assert!(id.sup_distance(&nu) < 1e-12);

        // independent scalar evaluation of the closed form
        let scalar = |fz: C64, fzb: C64, n: C64| (fzb + n * fz) / (fz - n.conj() * fzb);
        let expected = scalar(c(1., 0.), c(0.5, 0.), c(0.2, 0.));
        assert!((expected - 0.7 / 0.9).norm() < 1e-15);
        let got = auxiliary_beltrami(&m, &f, &BeltramiField::constant(m.face_count(), c(0.2, 0.))).unwrap();
        assert!(got.values().iter().all(|v| (v - 0.7 / 0.9).norm() < 1e-12));

        let bad = BeltramiField::constant(m.face_count(), c(1.0, 0.0));
        assert!(matches!(
            auxiliary_beltrami(&m, &f, &bad),
            Err(Error::Inadmissible { .. })
        ));
    }

    #[test]
    fn auxiliary_coordinates_vanish_at_matching_coefficient() {
        let m = disk(150);
        let mu = c(0.2, 0.1);
        let f = PiecewiseLinearMap::from_fn(&m, |z| z + mu * z.conj());
        let r = beltrami_in_auxiliary_coordinates(&m, &f, &BeltramiField::constant(m.face_count(), mu))
            .unwrap();
        assert!(r.sup_norm() < 1e-14);
    }

    #[test]
    fn dilation_examples() {
        let m = two_faces();
        let s = dilation_stats(&BeltramiField::zeros(2), &m).unwrap();
        assert_eq!((s.k, s.max_modulus, s.mean_modulus, s.modulus_std), (1.0, 0.0, 0.0, 0.0));
        let s = dilation_stats(&BeltramiField::constant(2, c(0.5, 0.)), &m).unwrap();
        assert!((s.k - 3.0).abs() < 1e-15 && (s.mean_modulus - 0.5).abs() < 1e-15 && s.modulus_std < 1e-15);
        let s = dilation_stats(&BeltramiField::new(vec![c(0.2, 0.), c(0., 0.4)]), &m).unwrap();
        assert!((s.mean_modulus - 0.3).abs() < 1e-15);
        assert!((s.modulus_std - 0.1).abs() < 1e-15);
        assert!((s.k - 1.4 / 0.6).abs() < 1e-14);
        assert!(dilation_stats(&BeltramiField::constant(2, c(1.0, 0.)), &m).is_err());
    }

    #[test]
    fn projection_examples() {
        let m = two_faces();
        let cst = BeltramiField::constant(2, c(0.1, 0.2));
        assert!(project_constant_modulus(&m, &cst).sup_distance(&cst) < 1e-15);
        let p = project_constant_modulus(&m, &BeltramiField::new(vec![c(0.2, 0.), c(0., 0.4)]));
        assert!((p.values()[0] - c(0.3, 0.)).norm() < 1e-15);
        assert!((p.values()[1] - c(0., 0.3)).norm() < 1e-15);
        let z = project_constant_modulus(&m, &BeltramiField::zeros(2));
        assert_eq!(z, BeltramiField::zeros(2));
    }

    #[test]
    fn smoothing_examples() {
        let m = two_faces();
        let f = BeltramiField::new(vec![c(0., 0.), c(1., 0.)]);
        assert_eq!(laplacian_smooth(&m, &f, 1.0, 1).values(), &[c(1., 0.), c(0., 0.)]);
        assert_eq!(laplacian_smooth(&m, &f, 0.5, 1).values(), &[c(0.5, 0.), c(0.5, 0.)]);
        let cst = BeltramiField::constant(2, c(0.25, -0.5));
        assert_eq!(laplacian_smooth(&m, &cst, 0.7, 5), cst);

        let single = TriangleMesh::new(vec![c(0., 0.), c(1., 0.), c(0., 1.)], vec![[0, 1, 2]]).unwrap();
        let lone = BeltramiField::constant(1, c(0.3, 0.0));
        assert_eq!(laplacian_smooth(&single, &lone, 1.0, 3), lone);
    }

    #[test]
    fn clamp_examples() {
        let f = BeltramiField::constant(3, c(0.5, 0.));
        assert_eq!(clamp_modulus(&f, MU_CAP), f);
        let g = clamp_modulus(&BeltramiField::new(vec![c(0., 2.), c(0.1, 0.1), c(-3., 4.)]), 0.99);
        assert!((g.values()[0] - c(0., 0.99)).norm() < 1e-15);
        assert_eq!(g.values()[1], c(0.1, 0.1));
        assert!((g.values()[2] - c(-3., 4.) * (0.99 / 5.0)).norm() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let f = BeltramiField::new(vec![c(0.1, -1e-17), c(1.0 / 3.0, 2.0f64.sqrt() / 7.0)]);
        assert_eq!(BeltramiField::parse_csv(&f.to_csv()).unwrap(), f);
        assert!(BeltramiField::parse_csv("face,re\n").is_err());
        assert!(BeltramiField::parse_csv("face_index,re,im\n1,0,0\n").is_err());
    }
}
