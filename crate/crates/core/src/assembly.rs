//! Local element matrices and the global operators of the hybrid system
//!
//! ```text
//! [ A  −Cᵀ ] [U]   [ B  ]
//! [ −C  0  ] [Λ] = [−b_D]
//! ```
//!
//! with `A = K + M` block diagonal over elements (DOF `4·t + j` is vertex `j`
//! of element `t`), `C` one row per interior or Dirichlet face, `B` the load
//! plus Neumann vector and `b_D` the Dirichlet data.

use nalgebra::{Matrix3, Matrix4, Matrix4x3, Point3, Vector3, Vector4};
use rayon::prelude::*;
use sprs::{CsMat, TriMat};

use crate::connectivity::{FaceClass, FaceTable};
use crate::error::{Error, Result};
use crate::mesh::{face_centroid, ElemId, Mesh, GEOM_TOL, LOCAL_FACES};
use crate::quadrature::TetRule;

/// Right-hand side data of `−Δu + u = f`, `u = u_D` on Γ_D, `∇u·ν = g` on Γ_N.
pub trait ProblemData: Sync {
    fn f(&self, p: &Point3<f64>) -> f64;
    fn dirichlet(&self, p: &Point3<f64>) -> f64;
    /// Normal flux `g` at `p` for the outward unit normal `normal`.
    fn neumann_flux(&self, p: &Point3<f64>, normal: &Vector3<f64>) -> f64;
}

/// Quadrature used for `∫_T f φ_j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LoadQuadrature {
    /// 14-point rule, exact for `f` of degree ≤ 4.
    #[default]
    Degree5,
    /// `V/4 · Σ_i f(Ct_i) φ_j(Ct_i)` over the four face centroids `Ct_i`.
    FaceCentroid,
}

impl LoadQuadrature {
    pub fn rule(self) -> TetRule {
        match self {
            LoadQuadrature::Degree5 => TetRule::degree5(),
            LoadQuadrature::FaceCentroid => TetRule::face_centroids(),
        }
    }
}

impl std::str::FromStr for LoadQuadrature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degree5" => Ok(LoadQuadrature::Degree5),
            "face-centroid" => Ok(LoadQuadrature::FaceCentroid),
            _ => Err(Error::InvalidArgument(format!(
                "unknown load quadrature '{s}' (expected degree5 or face-centroid)"
            ))),
        }
    }
}

/// Gradients of the barycentric basis functions (rows) and the volume.
pub fn barycentric_gradients(p: &[Point3<f64>; 4]) -> Option<(Matrix4x3<f64>, f64)> {
    let j = Matrix3::from_columns(&[p[1] - p[0], p[2] - p[0], p[3] - p[0]]);
    let det = j.determinant();
    if det.abs() <= GEOM_TOL {
        return None;
    }
    let inv = j.try_inverse()?;
    let mut g = Matrix4x3::zeros();
    for r in 0..3 {
        g.set_row(r + 1, &inv.row(r));
    }
    let g0 = -(g.row(1) + g.row(2) + g.row(3));
    g.set_row(0, &g0);
    Some((g, det.abs() / 6.0))
}

/// `(K_T, M_T, volume, grads)`.
pub type LocalMatrices = (Matrix4<f64>, Matrix4<f64>, f64, Matrix4x3<f64>);

/// Stiffness and mass matrices of element `t`.
pub fn local_stiffness_mass(mesh: &Mesh, t: ElemId) -> Result<LocalMatrices> {
    let p = mesh.element_points(t);
    let (g, vol) = barycentric_gradients(&p).ok_or(Error::DegenerateElement { elem: t })?;
    let k = g * g.transpose() * vol;
    let m = (Matrix4::identity() + Matrix4::repeat(1.0)) * (vol / 20.0);
    Ok((k, m, vol, g))
}

/// Rows `σ_k·|F_k|·r_k` for the four slots of element `t`.
pub fn local_multiplier(faces: &FaceTable, t: ElemId) -> Matrix4<f64> {
    let mut c = Matrix4::zeros();
    for (k, lf) in LOCAL_FACES.iter().enumerate() {
        let f = faces.slot_face(t, k);
        let v = faces.sigma(t, k) * faces.area(f) / 3.0;
        for &j in lf {
            c[(k, j)] = v;
        }
    }
    c
}

/// `∫_T f φ_j` for all elements, laid out as `4·t + j`.
pub fn load_vector<F>(mesh: &Mesh, f: F, quad: LoadQuadrature) -> Result<Vec<f64>>
where
    F: Fn(&Point3<f64>) -> f64 + Sync,
{
    let rule = quad.rule();
    let per_elem: Vec<[f64; 4]> = (0..mesh.n_elems())
        .into_par_iter()
        .map(|t| element_load(mesh, t, &f, &rule))
        .collect::<Result<_>>()?;
    Ok(per_elem.into_iter().flatten().collect())
}

fn element_load<F>(mesh: &Mesh, t: ElemId, f: &F, rule: &TetRule) -> Result<[f64; 4]>
where
    F: Fn(&Point3<f64>) -> f64,
{
    let v = mesh.element_points(t);
    let vol = mesh.volume(t);
    if vol <= GEOM_TOL {
        return Err(Error::DegenerateElement { elem: t });
    }
    let mut b = [0.0; 4];
    for (l, w) in rule.points.iter().zip(&rule.weights) {
        let fv = w * vol * f(&crate::quadrature::bary_to_point(&v, l));
        for j in 0..4 {
            b[j] += fv * l[j];
        }
    }
    Ok(b)
}

/// Neumann contributions `|F|·g(Ct)/3` on the three vertices of every Neumann slot.
pub fn neumann_vector<P: ProblemData + ?Sized>(
    mesh: &Mesh,
    faces: &FaceTable,
    problem: &P,
) -> Vec<f64> {
    let mut ln = vec![0.0; 4 * mesh.n_elems()];
    for &f in faces.neumann_face_ids() {
        let slot = faces.owner_slot(f);
        let (t, k) = (slot / 4, slot % 4);
        let n = mesh.outward_normal(t, k);
        let ct = face_centroid(mesh, &faces.face(f).0);
        let v = faces.area(f) * problem.neumann_flux(&ct, &n) / 3.0;
        for &j in &LOCAL_FACES[k] {
            ln[4 * t + j] += v;
        }
    }
    ln
}

/// `|F|·u_D(Ct)` on Dirichlet rows, zero on interior rows.
pub fn dirichlet_vector<F>(mesh: &Mesh, faces: &FaceTable, u_d: F) -> Vec<f64>
where
    F: Fn(&Point3<f64>) -> f64,
{
    let mut bd = vec![0.0; faces.n_multipliers()];
    for &f in faces.dirichlet_face_ids() {
        let row = faces
            .multiplier_index(f)
            .expect("dirichlet faces carry a multiplier");
        bd[row] = faces.area(f) * u_d(&face_centroid(mesh, &faces.face(f).0));
    }
    bd
}

/// Per-element blocks kept for element-local elimination and recovery.
#[derive(Clone, Debug, PartialEq)]
pub struct ElementBlock {
    /// `K_T + M_T`.
    pub a: Matrix4<f64>,
    /// `C_T`, rows in slot order.
    pub c: Matrix4<f64>,
    /// Multiplier row of each slot; `None` for Neumann slots.
    pub rows: [Option<usize>; 4],
}

#[derive(Clone, Debug)]
pub struct LinearSystem {
    /// `K + M`, `N × N`.
    pub a: CsMat<f64>,
    /// `L × N`.
    pub c: CsMat<f64>,
    /// `b + LN`.
    pub b: Vec<f64>,
    pub b_d: Vec<f64>,
    pub blocks: Vec<ElementBlock>,
}

impl LinearSystem {
    /// `N = 4·nE`.
    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// Number of multipliers.
    pub fn l(&self) -> usize {
        self.b_d.len()
    }

    pub fn n_elems(&self) -> usize {
        self.blocks.len()
    }

    /// `B` restricted to element `t`.
    pub fn b_elem(&self, t: ElemId) -> Vector4<f64> {
        Vector4::from_column_slice(&self.b[4 * t..4 * t + 4])
    }

    /// The full `(N+L) × (N+L)` block operator.
    pub fn saddle_matrix(&self) -> CsMat<f64> {
        let (n, l) = (self.n(), self.l());
        let mut tri = TriMat::with_capacity((n + l, n + l), self.a.nnz() + 2 * self.c.nnz());
        for (v, (i, j)) in self.a.iter() {
            tri.add_triplet(i, j, *v);
        }
        for (v, (r, j)) in self.c.iter() {
            tri.add_triplet(n + r, j, -*v);
            tri.add_triplet(j, n + r, -*v);
        }
        tri.to_csr()
    }
}

pub fn assemble_system<P: ProblemData + ?Sized>(
    mesh: &Mesh,
    faces: &FaceTable,
    problem: &P,
    quad: LoadQuadrature,
) -> Result<LinearSystem> {
    let ne = mesh.n_elems();
    if faces.slot_to_face().len() != 4 * ne {
        return Err(Error::DimensionMismatch(format!(
            "face table has {} slots, mesh has {} elements",
            faces.slot_to_face().len(),
            ne
        )));
    }
    let l = faces.n_multipliers();
    let n = 4 * ne;

    let blocks: Vec<ElementBlock> = (0..ne)
        .into_par_iter()
        .map(|t| {
            let (k, m, _, _) = local_stiffness_mass(mesh, t)?;
            let mut rows = [None; 4];
            for (k, r) in rows.iter_mut().enumerate() {
                *r = faces.slot_multiplier(t, k);
            }
            Ok(ElementBlock {
                a: k + m,
                c: local_multiplier(faces, t),
                rows,
            })
        })
        .collect::<Result<_>>()?;

    let mut ta = TriMat::with_capacity((n, n), 16 * ne);
    let mut tc = TriMat::with_capacity((l, n), 12 * ne);
    for (t, blk) in blocks.iter().enumerate() {
        for i in 0..4 {
            for j in 0..4 {
                ta.add_triplet(4 * t + i, 4 * t + j, blk.a[(i, j)]);
            }
        }
        for (k, row) in blk.rows.iter().enumerate() {
            if let Some(r) = *row {
                for &j in &LOCAL_FACES[k] {
                    tc.add_triplet(r, 4 * t + j, blk.c[(k, j)]);
                }
            }
        }
    }

    let mut b = load_vector(mesh, |p| problem.f(p), quad)?;
    for (bi, li) in b.iter_mut().zip(neumann_vector(mesh, faces, problem)) {
        *bi += li;
    }
    let b_d = dirichlet_vector(mesh, faces, |p| problem.dirichlet(p));

    debug_assert!(faces
        .neumann_face_ids()
        .iter()
        .all(|&f| faces.class(f) == FaceClass::Neumann));

    Ok(LinearSystem {
        a: ta.to_csr(),
        c: tc.to_csr(),
        b,
        b_d,
        blocks,
    })
}

/// `y = M x` for a CSR matrix.
pub fn csr_mul_vec(m: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    debug_assert!(m.is_csr());
    m.outer_iterator()
        .map(|row| row.iter().map(|(j, v)| v * x[j]).sum())
        .collect()
}

/// `y = Mᵀ x` for a CSR matrix.
pub fn csr_mul_vec_transpose(m: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    debug_assert!(m.is_csr());
    let mut y = vec![0.0; m.cols()];
    for (i, row) in m.outer_iterator().enumerate() {
        for (j, v) in row.iter() {
            y[j] += v * x[i];
        }
    }
    y
}
