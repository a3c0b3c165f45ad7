//! OFF / OBJ readers and an OFF writer for planar meshes.

use std::fmt::Write as _;
use std::path::Path;

use super::{TriangleMesh, C64};
use crate::error::{Error, Result};
use crate::fmt_f64;

/// Loads an OFF or OBJ mesh, chosen by file extension (OFF when unknown).
/// Warnings (reoriented faces, ignored z coordinates) are logged.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let (mesh, warnings) = load_mesh_with_warnings(path)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(mesh)
}

pub fn load_mesh_with_warnings(path: impl AsRef<Path>) -> Result<(TriangleMesh, Vec<String>)> {
    let (vertices, faces, mut warnings) = read_mesh_data(path)?;
    let (mesh, more) = TriangleMesh::with_warnings(vertices, faces)?;
    warnings.extend(more);
    Ok((mesh, warnings))
}

/// Reads vertices and faces without building or validating a mesh. Used for
/// mapped meshes, which may contain folded faces.
pub fn read_mesh_data(path: impl AsRef<Path>) -> Result<Parsed> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let is_obj = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    if is_obj {
        parse_obj(&text)
    } else {
        parse_off(&text)
    }
}

pub type Parsed = (Vec<C64>, Vec<[usize; 3]>, Vec<String>);

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = line.split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

fn number<T: std::str::FromStr>(token: &str, line: usize) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("invalid number '{token}'")))
}

fn check_z(z: Option<&&str>, line: usize, vertex: usize, warnings: &mut Vec<String>) -> Result<()> {
    if let Some(tok) = z {
        let z: f64 = number(tok, line)?;
        if z != 0.0 {
            warnings.push(format!("vertex {vertex}: nonzero z = {z} ignored"));
        }
    }
    Ok(())
}

/// Parses OFF text into raw vertices and faces (no validation).
pub fn parse_off(text: &str) -> Result<Parsed> {
    let mut lines = content_lines(text);
    let (line, mut header) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if !header[0].ends_with("OFF") {
        return Err(Error::parse(line, "missing OFF header"));
    }
    header.remove(0);
    let (line, counts) = if header.is_empty() {
        lines
            .next()
            .ok_or_else(|| Error::parse(line, "missing vertex/face counts"))?
    } else {
        (line, header)
    };
    if counts.len() < 2 {
        return Err(Error::parse(line, "expected vertex and face counts"));
    }
    let nv: usize = number(counts[0], line)?;
    let nf: usize = number(counts[1], line)?;

    let mut warnings = Vec::new();
    let mut vertices = Vec::with_capacity(nv);
    for v in 0..nv {
        let (line, tok) = lines
            .next()
            .ok_or_else(|| Error::parse(line, format!("expected {nv} vertices, found {v}")))?;
        if tok.len() < 2 {
            return Err(Error::parse(line, "vertex needs at least two coordinates"));
        }
        vertices.push(C64::new(number(tok[0], line)?, number(tok[1], line)?));
        check_z(tok.get(2), line, v, &mut warnings)?;
    }
    let mut faces = Vec::with_capacity(nf);
    for f in 0..nf {
        let (line, tok) = lines
            .next()
            .ok_or_else(|| Error::parse(line, format!("expected {nf} faces, found {f}")))?;
        let k: usize = number(tok[0], line)?;
        if k != 3 {
            return Err(Error::parse(line, format!("only triangles supported, got {k}-gon")));
        }
        if tok.len() < 4 {
            return Err(Error::parse(line, "truncated face"));
        }
        faces.push([
            number(tok[1], line)?,
            number(tok[2], line)?,
            number(tok[3], line)?,
        ]);
    }
    Ok((vertices, faces, warnings))
}

/// Parses OBJ text; only `v` and `f` records are used.
pub fn parse_obj(text: &str) -> Result<Parsed> {
    let mut warnings = Vec::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (line, tok) in content_lines(text) {
        match tok[0] {
            "v" => {
                if tok.len() < 3 {
                    return Err(Error::parse(line, "vertex needs at least two coordinates"));
                }
                let v = vertices.len();
                vertices.push(C64::new(number(tok[1], line)?, number(tok[2], line)?));
                check_z(tok.get(3), line, v, &mut warnings)?;
            }
            "f" => {
                if tok.len() != 4 {
                    return Err(Error::parse(line, "only triangles supported"));
                }
                let mut face = [0usize; 3];
                for (slot, t) in face.iter_mut().zip(&tok[1..]) {
                    let idx: i64 = number(t.split('/').next().unwrap_or(""), line)?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else {
                        vertices.len() as i64 + idx
                    };
                    if idx == 0 || resolved < 0 {
                        return Err(Error::parse(line, format!("invalid vertex reference {idx}")));
                    }
                    *slot = resolved as usize;
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    Ok((vertices, faces, warnings))
}

/// Writes vertices and faces as OFF with round-trip decimal formatting.
pub fn write_off(path: impl AsRef<Path>, vertices: &[C64], faces: &[[usize; 3]]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    let _ = writeln!(out, "OFF\n{} {} 0", vertices.len(), faces.len());
    for z in vertices {
        let _ = writeln!(out, "{} {} 0", fmt_f64(z.re), fmt_f64(z.im));
    }
    for f in faces {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn off_single_triangle() {
        let (v, f, w) = parse_off("OFF\n# comment\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(f, vec![[0, 1, 2]]);
        assert!(w.is_empty());
        let m = TriangleMesh::new(v, f).unwrap();
        assert_eq!(m.face_areas()[0], 0.5);
        assert_eq!(m.boundary_loops(), &[vec![0, 1, 2]]);
    }

    #[test]
    fn off_nonzero_z_warns() {
        let (_, _, w) = parse_off("OFF 3 1 0\n0 0 1\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn off_errors() {
        assert!(matches!(parse_off(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_off("PLY\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            parse_off("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n"),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(matches!(
            parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n4 0 1 3 2\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_off("OFF\n3 2 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn obj_with_slashes_and_negative_indices() {
        let text = "o tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf 1/1 2/1 -1\n";
        let (v, f, _) = parse_obj(text).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(f, vec![[0, 1, 2]]);
        assert!(parse_obj("v 0 0\nf 0 1 2\n").is_err());
    }

    #[test]
    fn write_then_load_round_trips() {
        let m = crate::mesh::disk(100);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("disk.off");
        write_off(&path, m.vertices(), m.faces()).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.faces(), m.faces());
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_mesh("/nonexistent/mesh.off").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/mesh.off"));
    }
}
