//! Legacy ASCII VTK output.
//!
//! `u_h` is discontinuous, so the volume file carries it as a per-cell mean.
//! The nodal average is opt-in and smooths the jumps between elements.
//! Multipliers go to a separate triangle file, one cell per interior or
//! Dirichlet face.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::connectivity::FaceTable;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::solver::Solution;

pub const VTK_TRIANGLE: u8 = 5;
pub const VTK_TETRA: u8 = 10;

fn header(s: &mut String, title: &str, mesh: &Mesh) {
    let _ = writeln!(s, "# vtk DataFile Version 2.0");
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.n_nodes());
    for p in mesh.coords() {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
}

pub fn mesh_vtk_string(mesh: &Mesh, sol: Option<&Solution>, point_average: bool) -> String {
    let ne = mesh.n_elems();
    let mut s = String::new();
    header(&mut s, &format!("tet mesh level {}", mesh.level), mesh);
    let _ = writeln!(s, "CELLS {} {}", ne, 5 * ne);
    for t in mesh.tetra() {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(s, "{VTK_TETRA}");
    }
    let Some(sol) = sol else { return s };

    let _ = writeln!(s, "CELL_DATA {ne}");
    let _ = writeln!(s, "SCALARS u_h_mean double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for t in 0..ne {
        let m: f64 = sol.u[4 * t..4 * t + 4].iter().sum::<f64>() / 4.0;
        let _ = writeln!(s, "{m}");
    }
    if point_average {
        let mut sum = vec![0.0; mesh.n_nodes()];
        let mut cnt = vec![0u32; mesh.n_nodes()];
        for (t, el) in mesh.tetra().iter().enumerate() {
            for j in 0..4 {
                sum[el[j]] += sol.u[4 * t + j];
                cnt[el[j]] += 1;
            }
        }
        let _ = writeln!(s, "POINT_DATA {}", mesh.n_nodes());
        let _ = writeln!(s, "SCALARS u_h_nodal_average double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for (v, c) in sum.iter().zip(&cnt) {
            let a = if *c > 0 { v / *c as f64 } else { 0.0 };
            let _ = writeln!(s, "{a}");
        }
    }
    s
}

pub fn write_mesh_vtk(
    path: &Path,
    mesh: &Mesh,
    sol: Option<&Solution>,
    point_average: bool,
) -> Result<()> {
    fs::write(path, mesh_vtk_string(mesh, sol, point_average)).map_err(|e| Error::io(path, e))
}

/// Triangle grid of the faces that carry a multiplier, with `Λ` as cell data.
pub fn faces_vtk_string(mesh: &Mesh, faces: &FaceTable, lambda: &[f64]) -> String {
    let ids = faces.multiplier_faces();
    let mut s = String::new();
    header(&mut s, &format!("multipliers level {}", mesh.level), mesh);
    let _ = writeln!(s, "CELLS {} {}", ids.len(), 4 * ids.len());
    for &f in &ids {
        let [a, b, c] = faces.face(f).0;
        let _ = writeln!(s, "3 {a} {b} {c}");
    }
    let _ = writeln!(s, "CELL_TYPES {}", ids.len());
    for _ in &ids {
        let _ = writeln!(s, "{VTK_TRIANGLE}");
    }
    let _ = writeln!(s, "CELL_DATA {}", ids.len());
    let _ = writeln!(s, "SCALARS lambda double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for &f in &ids {
        let r = faces.multiplier_index(f).expect("multiplier face");
        let _ = writeln!(s, "{}", lambda[r]);
    }
    s
}

pub fn write_faces_vtk(path: &Path, mesh: &Mesh, faces: &FaceTable, lambda: &[f64]) -> Result<()> {
    fs::write(path, faces_vtk_string(mesh, faces, lambda)).map_err(|e| Error::io(path, e))
}

/// Structure read back from a legacy unstructured-grid file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkGrid {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    /// `(name, values)` for every CELL_DATA scalar.
    pub cell_scalars: Vec<(String, Vec<f64>)>,
    pub point_scalars: Vec<(String, Vec<f64>)>,
}

struct Tokens<'a> {
    it: Box<dyn Iterator<Item = &'a str> + 'a>,
}

impl<'a> Tokens<'a> {
    fn word(&mut self) -> std::result::Result<&'a str, String> {
        self.it
            .next()
            .ok_or_else(|| "unexpected end of file".to_string())
    }

    fn num(&mut self) -> std::result::Result<f64, String> {
        let t = self.word()?;
        t.parse().map_err(|_| format!("bad number '{t}'"))
    }

    fn int(&mut self) -> std::result::Result<usize, String> {
        let t = self.word()?;
        t.parse().map_err(|_| format!("bad integer '{t}'"))
    }
}

/// Minimal reader for the files this module writes.
pub fn parse_vtk(text: &str) -> std::result::Result<VtkGrid, String> {
    let mut lines = text.lines();
    let magic = lines.next().ok_or("empty file")?;
    if !magic.starts_with("# vtk DataFile") {
        return Err(format!("bad magic line '{magic}'"));
    }
    lines.next().ok_or("missing title")?;
    if lines.next().map(str::trim) != Some("ASCII") {
        return Err("only ASCII files are supported".into());
    }
    let mut tk = Tokens {
        it: Box::new(lines.flat_map(str::split_whitespace)),
    };
    if tk.word()? != "DATASET" || tk.word()? != "UNSTRUCTURED_GRID" {
        return Err("expected DATASET UNSTRUCTURED_GRID".into());
    }
    let mut g = VtkGrid::default();
    let mut attached: Option<(bool, usize)> = None;
    while let Ok(key) = tk.word() {
        match key {
            "POINTS" => {
                let n = tk.int()?;
                tk.word()?;
                for _ in 0..n {
                    g.points.push([tk.num()?, tk.num()?, tk.num()?]);
                }
            }
            "CELLS" => {
                let n = tk.int()?;
                let total = tk.int()?;
                let mut used = 0;
                for _ in 0..n {
                    let k = tk.int()?;
                    let mut c = Vec::with_capacity(k);
                    for _ in 0..k {
                        let v = tk.int()?;
                        if v >= g.points.len() {
                            return Err("cell references a missing point".into());
                        }
                        c.push(v);
                    }
                    used += k + 1;
                    g.cells.push(c);
                }
                if used != total {
                    return Err(format!("CELLS size {total} but {used} values read"));
                }
            }
            "CELL_TYPES" => {
                let n = tk.int()?;
                for _ in 0..n {
                    g.cell_types.push(tk.int()? as u8);
                }
            }
            "CELL_DATA" => attached = Some((true, tk.int()?)),
            "POINT_DATA" => attached = Some((false, tk.int()?)),
            "SCALARS" => {
                let name = tk.word()?.to_string();
                tk.word()?;
                let mut t = tk.word()?;
                if t == "1" {
                    t = tk.word()?;
                }
                if t != "LOOKUP_TABLE" {
                    return Err("expected LOOKUP_TABLE".into());
                }
                tk.word()?;
                let (on_cells, n) = attached.ok_or("SCALARS before CELL_DATA/POINT_DATA")?;
                let vals = (0..n)
                    .map(|_| tk.num())
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                if on_cells {
                    g.cell_scalars.push((name, vals));
                } else {
                    g.point_scalars.push((name, vals));
                }
            }
            other => return Err(format!("unexpected keyword '{other}'")),
        }
    }
    if g.cells.len() != g.cell_types.len() {
        return Err("CELLS and CELL_TYPES disagree".into());
    }
    Ok(g)
}
