//! Text formats: the mesh file, CSV debug dumps and coordinate matrix dumps.
//!
//! The mesh file has four sections, each a keyword line with a row count
//! followed by whitespace-separated rows with 1-based node numbers:
//!
//! ```text
//! # level 0
//! COORD 8
//! 0 0 0
//! ...
//! TETRA 5
//! 1 2 3 5
//! ...
//! DB 2
//! ...
//! NB 10
//! ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point3;
use sprs::CsMat;

use crate::connectivity::{EdgeTable, FaceTable};
use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# level {}", mesh.level);
    let _ = writeln!(s, "COORD {}", mesh.n_nodes());
    for p in mesh.coords() {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "TETRA {}", mesh.n_elems());
    for t in mesh.tetra() {
        let _ = writeln!(s, "{} {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1, t[3] + 1);
    }
    for (name, list) in [("DB", mesh.dirichlet_faces()), ("NB", mesh.neumann_faces())] {
        let _ = writeln!(s, "{name} {}", list.len());
        for f in list {
            let _ = writeln!(s, "{} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
    }
    s
}

pub fn write_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    fs::write(path, mesh_to_string(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, path)
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<Mesh> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut level = 0;
    let mut coords = Vec::new();
    let mut tetra = Vec::new();
    let mut db = Vec::new();
    let mut nb = Vec::new();
    let mut seen = [false; 4];

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    while let Some((ln, line)) = lines.next() {
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("level") {
                level = v
                    .trim()
                    .parse()
                    .map_err(|_| err(ln, format!("bad level '{}'", v.trim())))?;
            }
            continue;
        }
        let mut head = line.split_whitespace();
        let key = head.next().unwrap_or_default();
        let count: usize = head
            .next()
            .ok_or_else(|| err(ln, format!("section {key} lacks a row count")))?
            .parse()
            .map_err(|_| err(ln, "bad row count".into()))?;
        let (slot, width) = match key {
            "COORD" => (0, 3),
            "TETRA" => (1, 4),
            "DB" => (2, 3),
            "NB" => (3, 3),
            _ => return Err(err(ln, format!("unknown section '{key}'"))),
        };
        if seen[slot] {
            return Err(err(ln, format!("section {key} repeated")));
        }
        seen[slot] = true;
        for _ in 0..count {
            let (rl, row) = lines
                .next()
                .ok_or_else(|| err(ln, format!("section {key} ends early")))?;
            let fields: Vec<&str> = row.split_whitespace().collect();
            if fields.len() != width {
                return Err(err(
                    rl,
                    format!("expected {width} values, found {}", fields.len()),
                ));
            }
            if slot == 0 {
                let v: Vec<f64> = fields
                    .iter()
                    .map(|f| {
                        f.parse()
                            .map_err(|_| err(rl, format!("bad coordinate '{f}'")))
                    })
                    .collect::<Result<_>>()?;
                coords.push(Point3::new(v[0], v[1], v[2]));
                continue;
            }
            let v: Vec<usize> = fields
                .iter()
                .map(|f| match f.parse::<usize>() {
                    Ok(k) if k >= 1 => Ok(k - 1),
                    _ => Err(err(rl, format!("bad 1-based index '{f}'"))),
                })
                .collect::<Result<_>>()?;
            match slot {
                1 => tetra.push([v[0], v[1], v[2], v[3]]),
                2 => db.push([v[0], v[1], v[2]]),
                _ => nb.push([v[0], v[1], v[2]]),
            }
        }
    }
    if !seen[0] || !seen[1] {
        return Err(err(0, "COORD and TETRA sections are required".into()));
    }
    Ok(Mesh::new(coords, tetra, db, nb)?.with_level(level))
}

/// `edge_id,node1,node2`, 1-based.
pub fn write_edges_csv(path: &Path, edges: &EdgeTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["edge_id", "node1", "node2"])?;
    for (k, [a, b]) in edges.edges().iter().enumerate() {
        w.write_record(&[
            (k + 1).to_string(),
            (a + 1).to_string(),
            (b + 1).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `face_id,n1,n2,n3,class`, 1-based.
pub fn write_faces_csv(path: &Path, faces: &FaceTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["face_id", "n1", "n2", "n3", "class"])?;
    for (k, f) in faces.faces().iter().enumerate() {
        let [a, b, c] = f.0;
        w.write_record(&[
            (k + 1).to_string(),
            (a + 1).to_string(),
            (b + 1).to_string(),
            (c + 1).to_string(),
            faces.class(k).as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `row col value` lines, 1-based, sorted row-major.
pub fn matrix_to_coo_string(m: &CsMat<f64>) -> String {
    let csr;
    let m = if m.is_csr() {
        m
    } else {
        csr = m.to_csr();
        &csr
    };
    let mut s = String::new();
    let _ = writeln!(s, "% {} {} {}", m.rows(), m.cols(), m.nnz());
    for (i, row) in m.outer_iterator().enumerate() {
        let mut entries: Vec<(usize, f64)> = row.iter().map(|(j, v)| (j, *v)).collect();
        entries.sort_by_key(|e| e.0);
        for (j, v) in entries {
            let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
        }
    }
    s
}

pub fn write_matrix_coo(path: &Path, m: &CsMat<f64>) -> Result<()> {
    fs::write(path, matrix_to_coo_string(m)).map_err(|e| Error::io(path, e))
}

/// One value per line.
pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    let mut s = String::with_capacity(24 * v.len());
    for x in v {
        let _ = writeln!(s, "{x:e}");
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("bad number '{}'", l.trim()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::Connectivity;
    use crate::mesh::initial_cube_mesh;
    use crate::refinement::refine_to_level;

    #[test]
    fn cube_mesh_round_trip() {
        let m = initial_cube_mesh();
        let text = mesh_to_string(&m);
        assert!(text.contains("TETRA 5\n1 2 3 5\n"));
        let back = parse_mesh(&text, Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn refined_mesh_round_trip_is_exact() {
        let m = refine_to_level(2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.txt");
        write_mesh(&p, &m).unwrap();
        let back = read_mesh(&p).unwrap();
        assert_eq!(back.level, 2);
        assert_eq!(back.coords(), m.coords());
        assert_eq!(back.tetra(), m.tetra());
        assert_eq!(back.neumann_faces(), m.neumann_faces());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = "COORD 1\n0 0\nTETRA 0\n";
        match parse_mesh(bad, Path::new("x")) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_mesh("TETRA 1\n0 1 2 3\n", Path::new("x")).is_err());
        assert!(parse_mesh("COORD 1\n0 0 0\nTETRA 1\n1 1 1 9\n", Path::new("x")).is_err());
    }

    #[test]
    fn csv_dumps() {
        let m = initial_cube_mesh();
        let c = Connectivity::build(&m).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let pe = dir.path().join("edges.csv");
        let pf = dir.path().join("faces.csv");
        write_edges_csv(&pe, &c.edges).unwrap();
        write_faces_csv(&pf, &c.faces).unwrap();
        let e = fs::read_to_string(&pe).unwrap();
        assert!(e.starts_with("edge_id,node1,node2\n1,1,2\n2,1,3\n3,1,5\n"));
        assert_eq!(e.lines().count(), 19);
        let f = fs::read_to_string(&pf).unwrap();
        assert_eq!(f.lines().count(), 17);
        assert!(f.lines().nth(1).unwrap().starts_with("1,1,2,3,"));
    }

    #[test]
    fn coo_dump_is_sorted_and_one_based() {
        let mut tri = sprs::TriMat::new((2, 3));
        tri.add_triplet(1, 2, 5.0);
        tri.add_triplet(0, 1, -1.0);
        tri.add_triplet(1, 0, 2.0);
        let s = matrix_to_coo_string(&tri.to_csc());
        assert_eq!(s, "% 2 3 3\n1 2 -1e0\n2 1 2e0\n2 3 5e0\n");
    }

    #[test]
    fn vector_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.txt");
        let v = vec![0.1, -2.5e-17, 1.0 / 3.0];
        write_vector(&p, &v).unwrap();
        assert_eq!(read_vector(&p).unwrap(), v);
    }
}
