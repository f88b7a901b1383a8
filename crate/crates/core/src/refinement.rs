//! Uniform red refinement of every tetrahedron into 12 children.
//!
//! Each parent gets a node at its centroid and shares one node per edge
//! midpoint with its neighbours. Four corner children keep one parent vertex
//! each; the remaining octahedron is split into eight children around the
//! centroid. Boundary faces split 4-way through their edge midpoints.

use std::time::Instant;

use nalgebra::Point3;

use crate::connectivity::{edge_pairs_to_elems, faces_up, num_edges, EdgeTable};
use crate::error::{Error, Result};
use crate::mesh::{initial_cube_mesh, ElemId, Mesh, NodeId, LOCAL_EDGES};

/// Refinement level above which [`refine_to_level`] refuses to run unless forced.
pub const DEFAULT_LEVEL_CAP: u32 = 6;

/// Node bookkeeping of one refinement step.
#[derive(Clone, Debug)]
pub struct RefinementMap {
    /// New node at the midpoint of each parent edge, indexed by edge id.
    pub midpoint_node: Vec<NodeId>,
    /// New node at the centroid of each parent element.
    pub centroid_node: Vec<NodeId>,
    /// Parent of each child element.
    pub parent_elem: Vec<ElemId>,
}

/// Child index `q ∈ 0..12` of parent `m` in a mesh with `n_parents` elements.
///
/// Child 0 overwrites the parent slot; the other eleven are appended with stride 11.
#[inline]
pub fn child_index(n_parents: usize, m: ElemId, q: usize) -> ElemId {
    if q == 0 {
        m
    } else {
        n_parents + 11 * m + (q - 1)
    }
}

/// Children of `[i j k l]` given midpoints `mid[e]` in local edge order and centroid `c`.
fn children(t: [NodeId; 4], mid: [NodeId; 6], c: NodeId) -> [[NodeId; 4]; 12] {
    let [i, j, k, l] = t;
    let [mij, mik, mil, mjk, mjl, mkl] = mid;
    [
        [i, mij, mik, mil],
        [j, mjk, mij, mjl],
        [k, mik, mjk, mkl],
        [l, mkl, mjl, mil],
        [mij, mik, mil, c],
        [mjk, mij, mjl, c],
        [mik, mjk, mkl, c],
        [mkl, mjl, mil, c],
        [mij, mjk, mik, c],
        [mik, mkl, mil, c],
        [mij, mil, mjl, c],
        [mkl, mjk, mjl, c],
    ]
}

fn try_vec<T>(n: usize, what: &str) -> Result<Vec<T>> {
    let mut v = Vec::new();
    v.try_reserve_exact(n)
        .map_err(|_| Error::ResourceLimit(format!("cannot allocate {n} {what}")))?;
    Ok(v)
}

/// One red refinement step.
///
/// New nodes are numbered element by element: the element's centroid, then the
/// midpoints of those of its edges not met before, in local edge order.
pub fn red_refine(mesh: &Mesh, edges: &EdgeTable) -> Result<(Mesh, RefinementMap)> {
    let ne = mesh.n_elems();
    let ned = edges.n_edges();
    let n_new = ne
        .checked_mul(12)
        .ok_or_else(|| Error::ResourceLimit("element count overflows".into()))?;

    let mut coords: Vec<Point3<f64>> = try_vec(mesh.n_nodes() + ned + ne, "nodes")?;
    coords.extend_from_slice(mesh.coords());
    let mut midpoint_node = vec![usize::MAX; ned];
    let mut centroid_node = try_vec(ne, "centroids")?;
    let mut local_mid = try_vec::<[NodeId; 6]>(ne, "midpoint rows")?;

    for (m, t) in mesh.tetra().iter().enumerate() {
        centroid_node.push(coords.len());
        coords.push(mesh.centroid(m));
        let mut row = [0; 6];
        for (q, [a, b]) in LOCAL_EDGES.into_iter().enumerate() {
            let e = edges.edge_id(t[a], t[b]).ok_or_else(|| {
                Error::InconsistentMesh(format!("edge ({},{}) missing", t[a], t[b]))
            })?;
            if midpoint_node[e] == usize::MAX {
                midpoint_node[e] = coords.len();
                let (pa, pb) = (mesh.point(t[a]), mesh.point(t[b]));
                coords.push(Point3::from((pa.coords + pb.coords) * 0.5));
            }
            row[q] = midpoint_node[e];
        }
        local_mid.push(row);
    }

    let mut tetra = vec![[0; 4]; 0];
    tetra
        .try_reserve_exact(n_new)
        .map_err(|_| Error::ResourceLimit(format!("cannot allocate {n_new} elements")))?;
    tetra.resize(n_new, [0; 4]);
    let mut parent_elem = vec![0; n_new];
    for (m, t) in mesh.tetra().iter().enumerate() {
        for (q, ch) in children(*t, local_mid[m], centroid_node[m])
            .into_iter()
            .enumerate()
        {
            let idx = child_index(ne, m, q);
            tetra[idx] = ch;
            parent_elem[idx] = m;
        }
    }

    let lookup = |a: NodeId, b: NodeId| edges.edge_id(a, b).map(|e| midpoint_node[e]);
    let db = refine_boundary_faces(mesh.dirichlet_faces(), lookup)?;
    let nb = refine_boundary_faces(mesh.neumann_faces(), lookup)?;

    let refined = Mesh::from_parts(
        coords,
        tetra,
        db,
        nb,
        mesh.level + 1,
        mesh.orientation().ok(),
    );
    Ok((
        refined,
        RefinementMap {
            midpoint_node,
            centroid_node,
            parent_elem,
        },
    ))
}

/// Split each face `[n1 n2 n3]` into `[n1 m12 m13]`, `[n2 m23 m12]`, `[n3 m13 m23]`
/// and `[m12 m23 m13]`.
///
/// The first child replaces the parent; the other three are appended with stride 3.
pub fn refine_boundary_faces<F>(faces: &[[NodeId; 3]], midpoint: F) -> Result<Vec<[NodeId; 3]>>
where
    F: Fn(NodeId, NodeId) -> Option<NodeId>,
{
    let nf = faces.len();
    let mut out = vec![[0; 3]; 4 * nf];
    for (i, &[n1, n2, n3]) in faces.iter().enumerate() {
        let mid = |a, b| {
            midpoint(a, b).ok_or_else(|| {
                Error::InconsistentMesh(format!("boundary edge ({a},{b}) is not a mesh edge"))
            })
        };
        let (m12, m23, m13) = (mid(n1, n2)?, mid(n2, n3)?, mid(n1, n3)?);
        out[i] = [n1, m12, m13];
        out[nf + 3 * i] = [n2, m23, m12];
        out[nf + 3 * i + 1] = [n3, m13, m23];
        out[nf + 3 * i + 2] = [m12, m23, m13];
    }
    Ok(out)
}

/// Counts and stage timings (seconds) for one level.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LevelReport {
    pub level: u32,
    pub n_elems: usize,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_faces: usize,
    pub t_faceup: f64,
    pub t_numedges: f64,
    pub t_edge2tetra: f64,
    /// Time spent producing this level from the previous one.
    pub t_redrefine: f64,
}

fn check_cap(level: u32, force: bool) -> Result<()> {
    if level > DEFAULT_LEVEL_CAP && !force {
        return Err(Error::LevelCap {
            level,
            cap: DEFAULT_LEVEL_CAP,
        });
    }
    let elems = 12f64.powi(level as i32) * 5.0;
    if elems > (u32::MAX as f64) {
        return Err(Error::ResourceLimit(format!(
            "level {level} would create {elems:.3e} elements"
        )));
    }
    Ok(())
}

/// Refine the cube mesh `level` times.
pub fn refine_to_level(level: u32) -> Result<Mesh> {
    check_cap(level, false)?;
    let mut mesh = initial_cube_mesh();
    for _ in 0..level {
        let edges = num_edges(&mesh);
        mesh = red_refine(&mesh, &edges)?.0;
    }
    Ok(mesh)
}

/// Refine the cube mesh `level` times, timing the connectivity stages on every level.
///
/// `visit` sees each mesh from level 0 up to `level`.
pub fn refine_with_report<F>(
    level: u32,
    force: bool,
    mut visit: F,
) -> Result<(Mesh, Vec<LevelReport>)>
where
    F: FnMut(&Mesh) -> Result<()>,
{
    check_cap(level, force)?;
    let mut mesh = initial_cube_mesh();
    let mut reports = Vec::with_capacity(level as usize + 1);
    let mut t_redrefine = 0.0;
    loop {
        visit(&mesh)?;
        let clock = Instant::now();
        let edges = num_edges(&mesh);
        let t_numedges = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let e2t = edge_pairs_to_elems(&mesh, &edges)?;
        let t_edge2tetra = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let up = faces_up(&mesh, &e2t, &edges)?;
        let t_faceup = clock.elapsed().as_secs_f64();
        drop(e2t);
        reports.push(LevelReport {
            level: mesh.level,
            n_elems: mesh.n_elems(),
            n_nodes: mesh.n_nodes(),
            n_edges: edges.n_edges(),
            n_faces: up.len(),
            t_faceup,
            t_numedges,
            t_edge2tetra,
            t_redrefine,
        });
        if mesh.level >= level {
            break;
        }
        let clock = Instant::now();
        mesh = red_refine(&mesh, &edges)?.0;
        t_redrefine = clock.elapsed().as_secs_f64();
    }
    Ok((mesh, reports))
}
