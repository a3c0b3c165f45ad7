//! Harmonic energy and the Teichmüller energy gap.
//!
//! For a constant-modulus field `|μ| ≡ k`, the harmonic energy of `f` under
//! the auxiliary metric `|dz + μ dz̄|²` splits as
//!
//! ```text
//! E_aux(f) = A(f(Ω)) + 2 / (1 − k²) · Σ_T area_T |f_z̄ − μ f_z|²
//! ```
//!
//! so the gap `E_aux − A(Ω₂)` is a scaled LBS residual and needs no second
//! solve. Source and target metrics are flat.

use crate::beltrami::BeltramiField;
use crate::error::{Error, Result};
use crate::lbs::residual_energy;
use crate::mesh::{PiecewiseLinearMap, TriangleMesh};

/// Relative numerical floor: `gap_eps = GAP_EPS_REL · harmonic_energy`.
pub const GAP_EPS_REL: f64 = 1e-9;
/// Largest modulus spread accepted as "constant".
pub const CONSTANT_MODULUS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnergyReport {
    /// Harmonic energy under the auxiliary metric.
    pub harmonic_energy: f64,
    pub energy_gap: f64,
    pub target_area: f64,
    pub k_modulus: f64,
}

impl EnergyReport {
    pub fn gap_eps(&self) -> f64 {
        GAP_EPS_REL * self.harmonic_energy.abs()
    }
}

/// `Σ_T area_T (|f_z|² + |f_z̄|²)`.
pub fn harmonic_energy(mesh: &TriangleMesh, map: &PiecewiseLinearMap) -> Result<f64> {
    map.validate(mesh)?;
    Ok((0..mesh.face_count())
        .map(|t| {
            let (fz, fzb) = mesh.face_derivative(t, map.values());
            mesh.face_areas()[t] * (fz.norm_sqr() + fzb.norm_sqr())
        })
        .sum())
}

/// Harmonic energy of `f` measured in the auxiliary coordinates of `μ`,
/// evaluated face by face from the coordinate change.
pub fn auxiliary_harmonic_energy(
    mesh: &TriangleMesh,
    map: &PiecewiseLinearMap,
    mu: &BeltramiField,
) -> Result<f64> {
    map.validate(mesh)?;
    mu.validate(mesh)?;
    Ok((0..mesh.face_count())
        .map(|t| {
            let (fz, fzb) = mesh.face_derivative(t, map.values());
            let m = mu.values()[t];
            let s = 1.0 - m.norm_sqr();
            let f_zeta = (fz - m.conj() * fzb) / s;
            let f_zetabar = (fzb - m * fz) / s;
            mesh.face_areas()[t] * s * (f_zeta.norm_sqr() + f_zetabar.norm_sqr())
        })
        .sum())
}

/// Energy gap `(2 / (1 − k²)) · residual_energy` for a constant-modulus `μ`.
pub fn energy_gap(
    mesh: &TriangleMesh,
    map: &PiecewiseLinearMap,
    mu: &BeltramiField,
    target_area: f64,
) -> Result<EnergyReport> {
    mu.validate(mesh)?;
    let (k, std) = mu.modulus_moments(mesh, true);
    if std > CONSTANT_MODULUS_TOL {
        return Err(Error::NonConstantModulus { std });
    }
    if !(k < 1.0) {
        return Err(Error::Inadmissible {
            face: 0,
            modulus: k,
        });
    }
    let residual = residual_energy(mesh, map, mu)?;
    Ok(EnergyReport {
        harmonic_energy: auxiliary_harmonic_energy(mesh, map, mu)?,
        energy_gap: 2.0 / (1.0 - k * k) * residual,
        target_area,
        k_modulus: k,
    })
}

/// Gap with a per-face prefactor `2 / (1 − |μ_T|²)`; equals [`energy_gap`]
/// when the modulus is constant. Used when the iterate is smoothed after
/// projection and so is not constant-modulus.
pub fn energy_gap_pointwise(
    mesh: &TriangleMesh,
    map: &PiecewiseLinearMap,
    mu: &BeltramiField,
    target_area: f64,
) -> Result<EnergyReport> {
    map.validate(mesh)?;
    mu.validate(mesh)?;
    mu.check_admissible()?;
    let gap = (0..mesh.face_count())
        .map(|t| {
            let (fz, fzb) = mesh.face_derivative(t, map.values());
            let m = mu.values()[t];
            2.0 / (1.0 - m.norm_sqr()) * mesh.face_areas()[t] * (fzb - m * fz).norm_sqr()
        })
        .sum();
    let (k, _) = mu.modulus_moments(mesh, true);
    Ok(EnergyReport {
        harmonic_energy: auxiliary_harmonic_energy(mesh, map, mu)?,
        energy_gap: gap,
        target_area,
        k_modulus: k,
    })
}

/// Discrete lower bound: the energy is at least the target area and the gap
/// is non-negative, both up to `gap_eps`.
pub fn lower_bound_check(report: &EnergyReport) -> bool {
    let eps = report.gap_eps();
    report.energy_gap >= -eps && report.harmonic_energy >= report.target_area - eps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ConstraintSet;
    use crate::mesh::{disk, C64};

    #[test]
    fn harmonic_energy_examples() {
        let m = disk(1000);
        let a = m.total_area();
        let id = harmonic_energy(&m, &PiecewiseLinearMap::identity(&m)).unwrap();
        assert!((id - a).abs() < 1e-12);
        let aff = harmonic_energy(&m, &PiecewiseLinearMap::from_fn(&m, |z| z + 0.5 * z.conj())).unwrap();
        assert!((aff - 1.25 * a).abs() < 1e-12);
        let cst = harmonic_energy(&m, &PiecewiseLinearMap::from_fn(&m, |_| C64::new(2.0, -1.0))).unwrap();
        assert_eq!(cst, 0.0);
    }

    #[test]
    fn gap_examples() {
        let m = disk(600);
        let nf = m.face_count();
        let a = m.total_area();
        let cs = ConstraintSet::from_boundary_map(&m, |z| z + 0.3 * z.conj(), vec![]).unwrap();
        let f = PiecewiseLinearMap::from_fn(&m, |z| z + 0.3 * z.conj());
        let r = energy_gap(&m, &f, &BeltramiField::constant(nf, C64::new(0.3, 0.)), cs.target_area()).unwrap();
        assert!(r.energy_gap.abs() < 1e-15);
        assert!((r.k_modulus - 0.3).abs() < 1e-15);
        assert!((r.harmonic_energy - (r.energy_gap + r.target_area)).abs() < 1e-12);
        assert!(lower_bound_check(&r));

        let id = PiecewiseLinearMap::identity(&m);
        let r = energy_gap(&m, &id, &BeltramiField::constant(nf, C64::new(0.5, 0.)), a).unwrap();
        assert!((r.energy_gap - 2.0 / 3.0 * a).abs() < 1e-12);
        assert!((r.harmonic_energy - (r.energy_gap + a)).abs() < 1e-12);

        let r = energy_gap(&m, &id, &BeltramiField::zeros(nf), a).unwrap();
        assert!(r.energy_gap < 1e-15 * a);
        assert!((r.harmonic_energy - a).abs() < 1e-12);
        assert!(lower_bound_check(&r));

        let corrupted = EnergyReport {
            energy_gap: -1.0,
            ..r
        };
        assert!(!lower_bound_check(&corrupted));
    }

    #[test]
    fn gap_requires_constant_modulus() {
        let m = disk(100);
        let nf = m.face_count();
        let mu = BeltramiField::new((0..nf).map(|t| C64::new(0.1 + 0.1 * (t % 2) as f64, 0.)).collect());
        let id = PiecewiseLinearMap::identity(&m);
        assert!(matches!(energy_gap(&m, &id, &mu, 1.0), Err(Error::NonConstantModulus { .. })));
        let r = energy_gap_pointwise(&m, &id, &mu, 1.0).unwrap();
        assert!(r.energy_gap > 0.0);
        // pointwise variant agrees for constant modulus
        let cmu = BeltramiField::new((0..nf).map(|t| C64::from_polar(0.4, t as f64)).collect());
        let a = energy_gap(&m, &id, &cmu, 1.0).unwrap().energy_gap;
        let b = energy_gap_pointwise(&m, &id, &cmu, 1.0).unwrap().energy_gap;
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn gap_is_translation_invariant() {
        let m = disk(300);
        let nf = m.face_count();
        let mu = BeltramiField::new((0..nf).map(|t| C64::from_polar(0.25, 0.1 * t as f64)).collect());
        let f = PiecewiseLinearMap::from_fn(&m, |z| z * z + 0.2 * z.conj());
        let g = PiecewiseLinearMap::from_fn(&m, |z| z * z + 0.2 * z.conj() + C64::new(3.0, -7.0));
        let a = energy_gap(&m, &f, &mu, 1.0).unwrap().energy_gap;
        let b = energy_gap(&m, &g, &mu, 1.0).unwrap().energy_gap;
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn energy_dominates_mapped_area_per_face() {
        let m = disk(300);
        let f = PiecewiseLinearMap::from_fn(&m, |z| z * z + 0.4 * z.conj() + 0.1 * z * z.conj());
        for t in 0..m.face_count() {
            let (fz, fzb) = m.face_derivative(t, f.values());
            let e = m.face_areas()[t] * (fz.norm_sqr() + fzb.norm_sqr());
            assert!(e >= f.mapped_area(&m, t).abs() - 1e-15);
        }
    }
}
