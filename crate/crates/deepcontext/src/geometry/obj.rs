//! Minimal OBJ mesh I/O: `v` and triangular `f` records only.

use super::TriMesh;
use crate::error::{Error, Result};
use glam::DVec3;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    parse_obj(reader, &path.display().to_string())
}

pub(crate) fn parse_obj(reader: impl BufRead, name: &str) -> Result<TriMesh> {
    let mut vertices: Vec<DVec3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(name, e))?;
        let line = line.trim();
        let bad = |detail: String| Error::Parse {
            what: format!("{name}:{}", lineno + 1),
            detail,
        };
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut coord = [0.0f64; 3];
                for c in &mut coord {
                    *c = parts
                        .next()
                        .ok_or_else(|| bad("vertex needs 3 coordinates".into()))?
                        .parse()
                        .map_err(|e| bad(format!("bad coordinate: {e}")))?;
                }
                vertices.push(DVec3::from_array(coord));
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .map(|tok| {
                        // accept v, v/t, v/t/n, v//n forms; only the vertex index is used
                        let v = tok.split('/').next().unwrap_or("");
                        v.parse::<usize>()
                            .map_err(|e| bad(format!("bad face index `{tok}`: {e}")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(bad(format!("only triangular faces supported, got {} indices", idx.len())));
                }
                let tri: Vec<usize> = idx
                    .iter()
                    .map(|&i| {
                        if i == 0 || i > vertices.len() {
                            Err(bad(format!("face index {i} out of range")))
                        } else {
                            Ok(i - 1)
                        }
                    })
                    .collect::<Result<_>>()?;
                triangles.push([tri[0], tri[1], tri[2]]);
            }
            // ignore comments, empty lines and unsupported records
            _ => {}
        }
    }
    TriMesh::new(vertices, triangles)
}

pub fn save_obj(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let mut write = |s: String| out.write_all(s.as_bytes()).map_err(|e| Error::io(path, e));
    for v in &mesh.vertices {
        write(format!("v {} {} {}\n", v.x, v.y, v.z))?;
    }
    for t in &mesh.triangles {
        write(format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn parses_vertices_and_faces() {
        let src = "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1 2 3\n";
        let mesh = parse_obj(Cursor::new(src), "inline").unwrap();
        assert_eq!(mesh.vertices.len(), 3);
        assert_eq!(mesh.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn accepts_slash_forms() {
        let src = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2/2 3//3\n";
        let mesh = parse_obj(Cursor::new(src), "inline").unwrap();
        assert_eq!(mesh.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn rejects_quads_and_bad_indices() {
        let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(parse_obj(Cursor::new(quad), "inline").is_err());
        let oob = "v 0 0 0\nf 1 2 3\n";
        assert!(parse_obj(Cursor::new(oob), "inline").is_err());
    }

    #[test]
    fn save_load_roundtrip() {
        let mesh = TriMesh::new(
            vec![
                glam::DVec3::new(0.0, 0.0, 0.0),
                glam::DVec3::new(1.5, 0.0, 0.25),
                glam::DVec3::new(0.0, 2.0, -0.5),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let dir = std::env::temp_dir().join("deepcontext_obj_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tri.obj");
        save_obj(&mesh, &path).unwrap();
        let back = load_obj(&path).unwrap();
        assert_eq!(back.triangles, mesh.triangles);
        for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
            assert!((*a - *b).length() < 1e-12);
        }
    }
}
