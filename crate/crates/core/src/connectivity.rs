//! Edge enumeration, the directed edge-pair to element map and the oriented face table.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::mesh::{face_area, EdgeId, ElemId, FaceId, Mesh, NodeId, OrientedFace, LOCAL_EDGES};

#[inline]
fn pair_key(i: usize, j: usize) -> u64 {
    ((i as u64) << 32) | j as u64
}

/// Unique undirected edges in first-occurrence order of the per-element edge sequence.
#[derive(Clone, Debug)]
pub struct EdgeTable {
    edge_nodes: Vec<[NodeId; 2]>,
    lookup: FxHashMap<u64, EdgeId>,
}

impl EdgeTable {
    pub fn n_edges(&self) -> usize {
        self.edge_nodes.len()
    }

    /// Node pair of edge `e`, smaller id first.
    pub fn edge(&self, e: EdgeId) -> [NodeId; 2] {
        self.edge_nodes[e]
    }

    pub fn edges(&self) -> &[[NodeId; 2]] {
        &self.edge_nodes
    }

    /// Edge joining `i` and `j`, in either order.
    pub fn edge_id(&self, i: NodeId, j: NodeId) -> Option<EdgeId> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.lookup.get(&pair_key(a, b)).copied()
    }

    /// Dense node-by-node lookup matrix with 1-based edge numbers and 0 for "no edge".
    pub fn dense_lookup(&self, n_nodes: usize) -> Vec<Vec<usize>> {
        let mut m = vec![vec![0; n_nodes]; n_nodes];
        for (e, &[a, b]) in self.edge_nodes.iter().enumerate() {
            m[a][b] = e + 1;
            m[b][a] = e + 1;
        }
        m
    }
}

pub fn num_edges(mesh: &Mesh) -> EdgeTable {
    let mut edge_nodes = Vec::new();
    let mut lookup = FxHashMap::default();
    lookup.reserve(mesh.n_elems() * 2 + mesh.n_nodes());
    for t in mesh.tetra() {
        for [i, j] in LOCAL_EDGES {
            let (a, b) = (t[i].min(t[j]), t[i].max(t[j]));
            lookup.entry(pair_key(a, b)).or_insert_with(|| {
                edge_nodes.push([a, b]);
                edge_nodes.len() - 1
            });
        }
    }
    EdgeTable { edge_nodes, lookup }
}

/// Face triples used when filling the edge-pair map: `[i j k] [i l j] [i k l] [j l k]`.
const E2T_FACES: [[usize; 3]; 4] = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];

/// Directed map from a pair of edges of an oriented face to the element that owns it.
///
/// For an oriented face `[x y z]` with `e1=(x,y)`, `e2=(y,z)`, `e3=(z,x)` of element
/// `m`, the keys `(e2,e1)`, `(e3,e2)` and `(e1,e3)` map to `m`. The reversed keys
/// belong to the neighbour across the face, if any.
#[derive(Clone, Debug)]
pub struct EdgePairToElem {
    map: FxHashMap<u64, ElemId>,
}

impl EdgePairToElem {
    pub fn get(&self, e_a: EdgeId, e_b: EdgeId) -> Option<ElemId> {
        self.map.get(&pair_key(e_a, e_b)).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn face_edges(edges: &EdgeTable, f: [NodeId; 3]) -> Result<[EdgeId; 3]> {
    let [x, y, z] = f;
    let get = |a, b| {
        edges.edge_id(a, b).ok_or_else(|| {
            Error::InconsistentMesh(format!("edge ({a},{b}) missing from edge table"))
        })
    };
    Ok([get(x, y)?, get(y, z)?, get(z, x)?])
}

pub fn edge_pairs_to_elems(mesh: &Mesh, edges: &EdgeTable) -> Result<EdgePairToElem> {
    let mut map = FxHashMap::default();
    map.reserve(12 * mesh.n_elems());
    for (m, t) in mesh.tetra().iter().enumerate() {
        for [x, y, z] in E2T_FACES {
            let [e1, e2, e3] = face_edges(edges, [t[x], t[y], t[z]])?;
            for (a, b) in [(e2, e1), (e3, e2), (e1, e3)] {
                if let Some(prev) = map.insert(pair_key(a, b), m) {
                    if prev != m {
                        return Err(Error::InconsistentMesh(format!(
                            "elements {prev} and {m} share the oriented face {:?}",
                            [t[x], t[y], t[z]]
                        )));
                    }
                }
            }
        }
    }
    Ok(EdgePairToElem { map })
}

/// Unique oriented faces, element-major in slot order.
///
/// A slot face is kept when the element across it (looked up through the
/// reversed key) is absent or has a larger index.
pub fn faces_up(mesh: &Mesh, e2t: &EdgePairToElem, edges: &EdgeTable) -> Result<Vec<OrientedFace>> {
    let mut out = Vec::with_capacity(2 * mesh.n_elems() + mesh.n_boundary_faces() / 2);
    for s in 0..mesh.n_elems() {
        for f in mesh.element_faces(s) {
            let [e1, e2, _] = face_edges(edges, f.0)?;
            match e2t.get(e1, e2) {
                Some(nb) if nb <= s => {}
                _ => out.push(f),
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceClass {
    Interior,
    Dirichlet,
    Neumann,
}

impl FaceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            FaceClass::Interior => "interior",
            FaceClass::Dirichlet => "dirichlet",
            FaceClass::Neumann => "neumann",
        }
    }
}

/// Unique faces with slot bookkeeping, orientation signs and boundary classes.
#[derive(Clone, Debug)]
pub struct FaceTable {
    faces: Vec<OrientedFace>,
    slot_to_face: Vec<FaceId>,
    sigma: Vec<i8>,
    area: Vec<f64>,
    class: Vec<FaceClass>,
    owner_slot: Vec<usize>,
    multiplier: Vec<Option<usize>>,
    interior: Vec<FaceId>,
    dirichlet: Vec<FaceId>,
    neumann: Vec<FaceId>,
    n_multipliers: usize,
}

impl FaceTable {
    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn faces(&self) -> &[OrientedFace] {
        &self.faces
    }

    pub fn face(&self, f: FaceId) -> OrientedFace {
        self.faces[f]
    }

    /// Face stored for slot `k` of element `t`.
    pub fn slot_face(&self, t: ElemId, k: usize) -> FaceId {
        self.slot_to_face[4 * t + k]
    }

    pub fn slot_to_face(&self) -> &[FaceId] {
        &self.slot_to_face
    }

    pub fn sigma(&self, t: ElemId, k: usize) -> f64 {
        self.sigma[4 * t + k] as f64
    }

    pub fn sigmas(&self) -> &[i8] {
        &self.sigma
    }

    pub fn area(&self, f: FaceId) -> f64 {
        self.area[f]
    }

    pub fn class(&self, f: FaceId) -> FaceClass {
        self.class[f]
    }

    /// Global slot index `4·t + k` whose element stores `f` in its own orientation.
    pub fn owner_slot(&self, f: FaceId) -> usize {
        self.owner_slot[f]
    }

    /// Row of face `f` in the multiplier vector; `None` on Neumann faces.
    pub fn multiplier_index(&self, f: FaceId) -> Option<usize> {
        self.multiplier[f]
    }

    /// Multiplier row of slot `k` of element `t`.
    pub fn slot_multiplier(&self, t: ElemId, k: usize) -> Option<usize> {
        self.multiplier[self.slot_face(t, k)]
    }

    /// Number of multipliers, `n_interior + n_dirichlet`.
    pub fn n_multipliers(&self) -> usize {
        self.n_multipliers
    }

    pub fn interior_face_ids(&self) -> &[FaceId] {
        &self.interior
    }

    pub fn dirichlet_face_ids(&self) -> &[FaceId] {
        &self.dirichlet
    }

    pub fn neumann_face_ids(&self) -> &[FaceId] {
        &self.neumann
    }

    /// Faces in multiplier-row order.
    pub fn multiplier_faces(&self) -> Vec<FaceId> {
        (0..self.n_faces())
            .filter(|&f| self.multiplier[f].is_some())
            .collect()
    }
}

pub fn full_face_table(mesh: &Mesh, faces: &[OrientedFace]) -> Result<FaceTable> {
    let nf = faces.len();
    let mut by_key: FxHashMap<[NodeId; 3], FaceId> = FxHashMap::default();
    by_key.reserve(nf);
    for (i, f) in faces.iter().enumerate() {
        if by_key.insert(f.canonical(), i).is_some() {
            return Err(Error::InconsistentMesh(format!(
                "face {:?} listed twice",
                f.0
            )));
        }
    }

    let n_slots = 4 * mesh.n_elems();
    let mut slot_to_face = Vec::with_capacity(n_slots);
    let mut sigma = Vec::with_capacity(n_slots);
    let mut owner_slot = vec![usize::MAX; nf];
    let mut refs = vec![0u8; nf];
    for t in 0..mesh.n_elems() {
        for (k, sf) in mesh.element_faces(t).iter().enumerate() {
            let fid = *by_key.get(&sf.canonical()).ok_or_else(|| {
                Error::InconsistentMesh(format!(
                    "slot {k} of element {t} ({:?}) matches no face",
                    sf.0
                ))
            })?;
            let s = match faces[fid].orientation_relative_to(sf) {
                Some(crate::mesh::RelativeOrientation::Same) => {
                    if owner_slot[fid] != usize::MAX {
                        return Err(Error::InconsistentMesh(format!(
                            "face {:?} owned by two elements",
                            faces[fid].0
                        )));
                    }
                    owner_slot[fid] = 4 * t + k;
                    1
                }
                _ => -1,
            };
            refs[fid] += 1;
            slot_to_face.push(fid);
            sigma.push(s);
        }
    }

    let mut class = vec![FaceClass::Interior; nf];
    for (list, c) in [
        (mesh.dirichlet_faces(), FaceClass::Dirichlet),
        (mesh.neumann_faces(), FaceClass::Neumann),
    ] {
        for bf in list {
            let fid = *by_key.get(&OrientedFace(*bf).canonical()).ok_or_else(|| {
                Error::InconsistentMesh(format!("boundary face {bf:?} matches no element slot"))
            })?;
            if class[fid] != FaceClass::Interior {
                return Err(Error::InconsistentMesh(format!(
                    "boundary face {bf:?} listed twice"
                )));
            }
            class[fid] = c;
        }
    }

    for f in 0..nf {
        let expected = if class[f] == FaceClass::Interior {
            2
        } else {
            1
        };
        if refs[f] != expected || owner_slot[f] == usize::MAX {
            return Err(Error::InconsistentMesh(format!(
                "face {:?} ({}) referenced by {} slots",
                faces[f].0,
                class[f].as_str(),
                refs[f]
            )));
        }
    }

    let mut multiplier = vec![None; nf];
    let (mut interior, mut dirichlet, mut neumann) = (vec![], vec![], vec![]);
    let mut next = 0;
    for f in 0..nf {
        match class[f] {
            FaceClass::Interior => interior.push(f),
            FaceClass::Dirichlet => dirichlet.push(f),
            FaceClass::Neumann => neumann.push(f),
        }
        if class[f] != FaceClass::Neumann {
            multiplier[f] = Some(next);
            next += 1;
        }
    }

    let area = faces.iter().map(|f| face_area(mesh, &f.0)).collect();

    Ok(FaceTable {
        faces: faces.to_vec(),
        slot_to_face,
        sigma,
        area,
        class,
        owner_slot,
        multiplier,
        interior,
        dirichlet,
        neumann,
        n_multipliers: next,
    })
}

/// Everything downstream code needs about a mesh's topology.
#[derive(Clone, Debug)]
pub struct Connectivity {
    pub edges: EdgeTable,
    pub faces: FaceTable,
}

impl Connectivity {
    pub fn build(mesh: &Mesh) -> Result<Self> {
        let edges = num_edges(mesh);
        let e2t = edge_pairs_to_elems(mesh, &edges)?;
        let up = faces_up(mesh, &e2t, &edges)?;
        let faces = full_face_table(mesh, &up)?;
        Ok(Connectivity { edges, faces })
    }
}
