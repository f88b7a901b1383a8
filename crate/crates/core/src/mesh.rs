//! Tetrahedral mesh storage, the built-in cube mesh and geometric primitives.
//!
//! A tetrahedron `[a b c d]` owns the four oriented faces `[a b c]`, `[a c d]`,
//! `[a d b]` and `[d c b]` (its face *slots*, in that order). All elements of a
//! valid mesh share the sign of their signed 6-volume; that common sign fixes
//! which side of an oriented face its cross-product normal points to.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type ElemId = usize;
pub type EdgeId = usize;
pub type FaceId = usize;

/// Local vertex triples of the four face slots of `[a b c d]`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[0, 1, 2], [0, 2, 3], [0, 3, 1], [3, 2, 1]];

/// Local vertex opposite to each face slot.
pub const OPPOSITE_VERTEX: [usize; 4] = [3, 1, 2, 0];

/// Local vertex pairs of the six edges, in the order `(I,J) (I,K) (I,L) (J,K) (J,L) (K,L)`.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Absolute tolerance used for geometric zero tests.
pub const GEOM_TOL: f64 = 1e-12;

/// A face given by three node ids; cyclic rotations describe the same oriented
/// face and reversal describes the opposite one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OrientedFace(pub [NodeId; 3]);

/// Relative orientation of two faces with the same node set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelativeOrientation {
    Same,
    Opposite,
}

impl OrientedFace {
    pub fn new(x: NodeId, y: NodeId, z: NodeId) -> Self {
        OrientedFace([x, y, z])
    }

    pub fn nodes(&self) -> [NodeId; 3] {
        self.0
    }

    pub fn reversed(&self) -> Self {
        let [x, y, z] = self.0;
        OrientedFace([z, y, x])
    }

    /// Node triple sorted ascending; equal for both orientations of a face.
    pub fn canonical(&self) -> [NodeId; 3] {
        let mut k = self.0;
        k.sort_unstable();
        k
    }

    pub fn rotations(&self) -> [[NodeId; 3]; 3] {
        let [x, y, z] = self.0;
        [[x, y, z], [y, z, x], [z, x, y]]
    }

    /// Compare against `other`; `None` if the node sets differ.
    pub fn orientation_relative_to(&self, other: &OrientedFace) -> Option<RelativeOrientation> {
        if self.rotations().contains(&other.0) {
            Some(RelativeOrientation::Same)
        } else if self.reversed().rotations().contains(&other.0) {
            Some(RelativeOrientation::Opposite)
        } else {
            None
        }
    }
}

/// Sign of the signed 6-volume shared by every element of a mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    coords: Vec<Point3<f64>>,
    tetra: Vec<[NodeId; 4]>,
    dirichlet_faces: Vec<[NodeId; 3]>,
    neumann_faces: Vec<[NodeId; 3]>,
    pub level: u32,
    orientation: Option<Orientation>,
}

impl Mesh {
    /// Build a mesh, checking that every index is in range.
    ///
    /// Orientation is evaluated here but a mixed or degenerate mesh is still
    /// accepted; [`Mesh::orientation`] reports the problem to consumers that need it.
    pub fn new(
        coords: Vec<Point3<f64>>,
        tetra: Vec<[NodeId; 4]>,
        dirichlet_faces: Vec<[NodeId; 3]>,
        neumann_faces: Vec<[NodeId; 3]>,
    ) -> Result<Self> {
        let n = coords.len();
        let check = |what: &'static str, idx: NodeId| {
            if idx >= n {
                Err(Error::IndexOutOfRange {
                    what,
                    index: idx,
                    len: n,
                })
            } else {
                Ok(())
            }
        };
        for t in &tetra {
            for &v in t {
                check("tetra node", v)?;
            }
        }
        for f in dirichlet_faces.iter().chain(&neumann_faces) {
            for &v in f {
                check("boundary node", v)?;
            }
        }
        let mut mesh = Mesh {
            coords,
            tetra,
            dirichlet_faces,
            neumann_faces,
            level: 0,
            orientation: None,
        };
        mesh.orientation = mesh.scan_orientation().ok();
        Ok(mesh)
    }

    /// Constructor for meshes produced by refinement, which preserves orientation.
    pub(crate) fn from_parts(
        coords: Vec<Point3<f64>>,
        tetra: Vec<[NodeId; 4]>,
        dirichlet_faces: Vec<[NodeId; 3]>,
        neumann_faces: Vec<[NodeId; 3]>,
        level: u32,
        orientation: Option<Orientation>,
    ) -> Self {
        Mesh {
            coords,
            tetra,
            dirichlet_faces,
            neumann_faces,
            level,
            orientation,
        }
    }

    pub fn with_level(mut self, level: u32) -> Self {
        self.level = level;
        self
    }

    pub fn coords(&self) -> &[Point3<f64>] {
        &self.coords
    }

    pub fn tetra(&self) -> &[[NodeId; 4]] {
        &self.tetra
    }

    pub fn dirichlet_faces(&self) -> &[[NodeId; 3]] {
        &self.dirichlet_faces
    }

    pub fn neumann_faces(&self) -> &[[NodeId; 3]] {
        &self.neumann_faces
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elems(&self) -> usize {
        self.tetra.len()
    }

    pub fn n_boundary_faces(&self) -> usize {
        self.dirichlet_faces.len() + self.neumann_faces.len()
    }

    pub fn point(&self, v: NodeId) -> &Point3<f64> {
        &self.coords[v]
    }

    pub fn element_points(&self, t: ElemId) -> [Point3<f64>; 4] {
        self.tetra[t].map(|v| self.coords[v])
    }

    /// Oriented face of slot `k` (0-based) of element `t`.
    pub fn element_face(&self, t: ElemId, k: usize) -> OrientedFace {
        let e = self.tetra[t];
        let [x, y, z] = LOCAL_FACES[k];
        OrientedFace([e[x], e[y], e[z]])
    }

    pub fn element_faces(&self, t: ElemId) -> [OrientedFace; 4] {
        [0, 1, 2, 3].map(|k| self.element_face(t, k))
    }

    /// `det([b−a, c−a, d−a])`.
    pub fn signed_volume6(&self, t: ElemId) -> f64 {
        let [a, b, c, d] = self.element_points(t);
        signed_volume6_points(&a, &b, &c, &d)
    }

    pub fn volume(&self, t: ElemId) -> f64 {
        self.signed_volume6(t).abs() / 6.0
    }

    /// `(c−b)×(a−b)·(d−b)` for element `[a b c d]`.
    pub fn orientation_predicate(&self, t: ElemId) -> f64 {
        let [a, b, c, d] = self.element_points(t);
        (c - b).cross(&(a - b)).dot(&(d - b))
    }

    pub fn centroid(&self, t: ElemId) -> Point3<f64> {
        let [a, b, c, d] = self.element_points(t);
        Point3::from((a.coords + b.coords + c.coords + d.coords) / 4.0)
    }

    /// Common orientation of all elements.
    ///
    /// Fails on a zero-volume element or when two elements disagree.
    pub fn orientation(&self) -> Result<Orientation> {
        match self.orientation {
            Some(o) => Ok(o),
            None => self.scan_orientation(),
        }
    }

    fn scan_orientation(&self) -> Result<Orientation> {
        let mut first = None;
        for t in 0..self.n_elems() {
            let v = self.signed_volume6(t);
            if v.abs() <= GEOM_TOL {
                return Err(Error::DegenerateElement { elem: t });
            }
            let o = if v > 0.0 {
                Orientation::Positive
            } else {
                Orientation::Negative
            };
            match first {
                None => first = Some(o),
                Some(f) if f != o => return Err(Error::MixedOrientation { elem: t }),
                _ => {}
            }
        }
        first.ok_or_else(|| Error::InconsistentMesh("mesh has no elements".into()))
    }

    /// Outward unit normal of slot `k` of element `t`, found geometrically by
    /// pointing away from the opposite vertex.
    pub fn outward_normal(&self, t: ElemId, k: usize) -> Vector3<f64> {
        let p = self.element_points(t);
        let [x, y, z] = LOCAL_FACES[k];
        let n = (p[z] - p[y]).cross(&(p[x] - p[y]));
        let n = n / n.norm();
        if n.dot(&(p[OPPOSITE_VERTEX[k]] - p[x])) > 0.0 {
            -n
        } else {
            n
        }
    }

    /// Longest edge over all elements.
    pub fn diameter(&self) -> f64 {
        (0..self.n_elems())
            .map(|t| self.element_diameter(t))
            .fold(0.0, f64::max)
    }

    pub fn element_diameter(&self, t: ElemId) -> f64 {
        let p = self.element_points(t);
        LOCAL_EDGES
            .iter()
            .map(|&[i, j]| (p[i] - p[j]).norm())
            .fold(0.0, f64::max)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_elems()).map(|t| self.volume(t)).sum()
    }
}

pub fn signed_volume6_points(
    a: &Point3<f64>,
    b: &Point3<f64>,
    c: &Point3<f64>,
    d: &Point3<f64>,
) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a))
}

/// Area and unit normal of an oriented face.
///
/// The normal is `±(z−y)×(x−y)` normalized, with the sign chosen from the mesh
/// orientation so that it points out of any element holding `f` as one of its
/// slots.
pub fn face_area_and_normal(mesh: &Mesh, f: &OrientedFace) -> Result<(f64, Vector3<f64>)> {
    let [x, y, z] = f.0;
    let (px, py, pz) = (mesh.point(x), mesh.point(y), mesh.point(z));
    let cross = (pz - py).cross(&(px - py));
    let len = cross.norm();
    if len <= GEOM_TOL {
        return Err(Error::DegenerateFace { nodes: f.0 });
    }
    let sign = -mesh.orientation()?.sign();
    Ok((0.5 * len, cross * (sign / len)))
}

pub fn face_area(mesh: &Mesh, f: &[NodeId; 3]) -> f64 {
    let [x, y, z] = *f;
    0.5 * (mesh.point(z) - mesh.point(x))
        .cross(&(mesh.point(y) - mesh.point(x)))
        .norm()
}

pub fn face_centroid(mesh: &Mesh, f: &[NodeId; 3]) -> Point3<f64> {
    let [x, y, z] = *f;
    Point3::from((mesh.point(x).coords + mesh.point(y).coords + mesh.point(z).coords) / 3.0)
}

pub fn mesh_diameter_h(mesh: &Mesh) -> f64 {
    mesh.diameter()
}

/// The 8-node, 5-element mesh of the unit cube with two Dirichlet faces on `z = 1`.
pub fn initial_cube_mesh() -> Mesh {
    const COORD: [[f64; 3]; 8] = [
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [0.0, 1.0, 1.0],
        [1.0, 1.0, 1.0],
    ];
    const TETRA: [[usize; 4]; 5] = [
        [1, 2, 3, 5],
        [5, 8, 6, 2],
        [7, 3, 8, 5],
        [4, 8, 3, 2],
        [8, 3, 2, 5],
    ];
    const DB: [[usize; 3]; 2] = [[7, 8, 5], [5, 8, 6]];
    const NB: [[usize; 3]; 10] = [
        [1, 5, 2],
        [5, 6, 2],
        [1, 3, 5],
        [7, 5, 3],
        [7, 3, 8],
        [4, 8, 3],
        [2, 6, 8],
        [4, 2, 8],
        [4, 3, 2],
        [1, 2, 3],
    ];
    let coords = COORD
        .iter()
        .map(|c| Point3::new(c[0], c[1], c[2]))
        .collect();
    let tetra = TETRA.iter().map(|t| t.map(|v| v - 1)).collect();
    let db = DB.iter().map(|f| f.map(|v| v - 1)).collect();
    let nb = NB.iter().map(|f| f.map(|v| v - 1)).collect();
    Mesh::new(coords, tetra, db, nb).expect("built-in mesh is valid")
}

/// Single reference tetrahedron with all four faces on the Neumann boundary.
pub fn reference_tetra_mesh(tetra: [NodeId; 4]) -> Mesh {
    let coords = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
    ];
    let faces = [0, 1, 2, 3].map(|k| {
        let [x, y, z] = LOCAL_FACES[k];
        [tetra[x], tetra[y], tetra[z]]
    });
    Mesh::new(coords, vec![tetra], vec![], faces.to_vec()).expect("reference tetra is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cube_mesh_matches_reference_coordinates() {
        let m = initial_cube_mesh();
        assert_eq!(m.n_nodes(), 8);
        assert_eq!(m.n_elems(), 5);
        assert_eq!(*m.point(7), Point3::new(1.0, 1.0, 1.0));
        assert_eq!(m.tetra()[4], [7, 2, 1, 4]);
        assert_eq!(m.dirichlet_faces(), &[[6, 7, 4], [4, 7, 5]]);
        assert_eq!(m.neumann_faces().len(), 10);
    }

    #[test]
    fn cube_mesh_orientation_is_uniform_and_positive() {
        // Every element of the built-in mesh has det([b−a, c−a, d−a]) > 0.
        let m = initial_cube_mesh();
        assert_eq!(m.orientation().unwrap(), Orientation::Positive);
        let pred: Vec<f64> = (0..5).map(|t| m.orientation_predicate(t)).collect();
        assert_eq!(pred, vec![1.0, 1.0, 1.0, 1.0, 2.0]);
        for t in 0..5 {
            assert_eq!(m.orientation_predicate(t), m.signed_volume6(t));
        }
    }

    #[test]
    fn reference_volumes() {
        let m = reference_tetra_mesh([0, 1, 2, 3]);
        assert_eq!(m.signed_volume6(0), 1.0);
        assert_abs_diff_eq!(m.volume(0), 1.0 / 6.0);
        let m = reference_tetra_mesh([0, 2, 1, 3]);
        assert_eq!(m.signed_volume6(0), -1.0);

        let cube = initial_cube_mesh();
        assert_abs_diff_eq!(cube.volume(4), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cube.total_volume(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn face_area_and_normals() {
        let m = reference_tetra_mesh([0, 1, 2, 3]);
        let f = OrientedFace::new(0, 1, 2);
        let (a, n) = face_area_and_normal(&m, &f).unwrap();
        assert_abs_diff_eq!(a, 0.5);
        let (a2, n2) = face_area_and_normal(&m, &f.reversed()).unwrap();
        assert_eq!(a, a2);
        assert_abs_diff_eq!((n + n2).norm(), 0.0);
        // Slot 0 of [0 1 2 3] lies on z = 0; the outward normal is −e_z.
        assert_abs_diff_eq!(n, Vector3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn normals_of_first_cube_element_point_away_from_opposite_vertex() {
        let m = initial_cube_mesh();
        let p = m.element_points(0);
        for k in 0..4 {
            let (_, n) = face_area_and_normal(&m, &m.element_face(0, k)).unwrap();
            let [x, _, _] = LOCAL_FACES[k];
            assert!(n.dot(&(p[OPPOSITE_VERTEX[k]] - p[x])) < 0.0);
            assert_abs_diff_eq!((n - m.outward_normal(0, k)).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn collinear_face_is_rejected() {
        let coords = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let m = Mesh::new(coords, vec![[0, 1, 2, 3]], vec![], vec![]).unwrap();
        assert!(matches!(
            m.orientation(),
            Err(Error::DegenerateElement { elem: 0 })
        ));
        assert!(matches!(
            face_area_and_normal(&m, &OrientedFace::new(0, 1, 2)),
            Err(Error::DegenerateFace { .. })
        ));
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let r = Mesh::new(
            vec![Point3::origin(); 3],
            vec![[0, 1, 2, 3]],
            vec![],
            vec![],
        );
        assert!(matches!(r, Err(Error::IndexOutOfRange { index: 3, .. })));
    }

    #[test]
    fn diameters() {
        assert_abs_diff_eq!(mesh_diameter_h(&initial_cube_mesh()), 2f64.sqrt());
        assert_abs_diff_eq!(
            mesh_diameter_h(&reference_tetra_mesh([0, 1, 2, 3])),
            2f64.sqrt()
        );
    }

    #[test]
    fn closed_surface_identity() {
        let m = initial_cube_mesh();
        for t in 0..m.n_elems() {
            let mut s = Vector3::zeros();
            for (k, f) in m.element_faces(t).iter().enumerate() {
                let (a, n) = face_area_and_normal(&m, f).unwrap();
                assert_abs_diff_eq!((n - m.outward_normal(t, k)).norm(), 0.0, epsilon = 1e-14);
                s += n * a;
            }
            assert!(s.norm() <= 1e-12);
        }
    }

    #[test]
    fn face_relative_orientation() {
        let f = OrientedFace::new(3, 7, 9);
        assert_eq!(
            f.orientation_relative_to(&OrientedFace::new(9, 3, 7)),
            Some(RelativeOrientation::Same)
        );
        assert_eq!(
            f.orientation_relative_to(&OrientedFace::new(7, 3, 9)),
            Some(RelativeOrientation::Opposite)
        );
        assert_eq!(f.orientation_relative_to(&OrientedFace::new(7, 3, 8)), None);
        assert_eq!(f.canonical(), f.reversed().canonical());
    }
}
