use std::f64::consts::{PI, TAU};

use super::{TriangleMesh, C64};

/// Unit disk with concentric rings, `6 i` vertices on ring `i`; the ring
/// count is the smallest giving at least `target_faces` faces.
pub fn disk(target_faces: usize) -> TriangleMesh {
    let rings = ((target_faces.max(6) as f64 / 6.0).sqrt().ceil()) as usize;
    disk_with_rings(rings)
}

/// Unit disk with `rings` concentric rings (`6 · rings²` faces).
pub fn disk_with_rings(rings: usize) -> TriangleMesh {
    let rings = rings.max(1);
    let mut vertices = vec![C64::new(0.0, 0.0)];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for i in 1..=rings {
        let r = i as f64 / rings as f64;
        let m = 6 * i;
        ring_start.push(vertices.len());
        ring_len.push(m);
        for j in 0..m {
            vertices.push(C64::from_polar(r, TAU * j as f64 / m as f64));
        }
    }
    let mut faces = Vec::with_capacity(6 * rings * rings);
    for j in 0..6 {
        faces.push([0, 1 + j, 1 + (j + 1) % 6]);
    }
    for i in 1..rings {
        zip_rings(
            (ring_start[i], ring_len[i], 0.0),
            (ring_start[i + 1], ring_len[i + 1], 0.0),
            &mut faces,
        );
    }
    TriangleMesh::new(vertices, faces).expect("generated disk mesh is valid")
}

/// Annulus `inner_radius < |z| < 1` with near-equilateral faces, roughly
/// `target_faces` of them. Alternate rings are rotated by half a step.
pub fn annulus(inner_radius: f64, target_faces: usize) -> TriangleMesh {
    assert!(inner_radius > 0.0 && inner_radius < 1.0);
    let area = PI * (1.0 - inner_radius * inner_radius);
    let h = (area / (target_faces.max(16) as f64 * 3f64.sqrt() / 4.0)).sqrt();
    let bands = (((1.0 - inner_radius) / (h * 3f64.sqrt() / 2.0)).round() as usize).max(1);
    let mut vertices = Vec::new();
    let mut rings = Vec::new();
    for j in 0..=bands {
        let r = inner_radius + (1.0 - inner_radius) * j as f64 / bands as f64;
        let m = ((TAU * r / h).round() as usize).max(3);
        let offset = if j % 2 == 1 { 0.5 / m as f64 } else { 0.0 };
        rings.push((vertices.len(), m, offset));
        for k in 0..m {
            vertices.push(C64::from_polar(r, TAU * (k as f64 / m as f64 + offset)));
        }
    }
    let mut faces = Vec::new();
    for j in 0..bands {
        zip_rings(rings[j], rings[j + 1], &mut faces);
    }
    TriangleMesh::new(vertices, faces).expect("generated annulus mesh is valid")
}

/// Triangulates the band between two concentric rings given as
/// `(first vertex, count, angular offset in turns)`.
fn zip_rings(inner: (usize, usize, f64), outer: (usize, usize, f64), faces: &mut Vec<[usize; 3]>) {
    let (si, mi, oi) = inner;
    let (so, mo, oo) = outer;
    let (mut p, mut q) = (0usize, 0usize);
    while p < mi || q < mo {
        let next_in = (p + 1) as f64 / mi as f64 + oi;
        let next_out = (q + 1) as f64 / mo as f64 + oo;
        if q < mo && (p == mi || next_out <= next_in) {
            faces.push([si + p % mi, so + q % mo, so + (q + 1) % mo]);
            q += 1;
        } else {
            faces.push([si + p % mi, so + q % mo, si + (p + 1) % mi]);
            p += 1;
        }
    }
}
