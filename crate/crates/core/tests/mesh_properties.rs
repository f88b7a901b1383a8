use nalgebra::{Point3, Vector3};
use proptest::prelude::*;

use tet_hybrid::connectivity::{Connectivity, FaceClass};
use tet_hybrid::mesh::{face_area_and_normal, initial_cube_mesh, Mesh, LOCAL_FACES};
use tet_hybrid::refinement::{red_refine, refine_with_report};
use tet_hybrid::Error;

fn levels(max: u32) -> Vec<Mesh> {
    let mut out = Vec::new();
    refine_with_report(max, false, |m| {
        out.push(m.clone());
        Ok(())
    })
    .unwrap();
    out
}

#[test]
fn table_counts_levels_one_to_four() {
    let expected = [
        (60, 31, 114, 144),
        (720, 205, 1020, 1536),
        (8640, 1945, 10968, 17664),
        (103680, 21553, 126768, 208896),
    ];
    let (_, rows) = refine_with_report(4, false, |_| Ok(())).unwrap();
    for (r, e) in rows[1..].iter().zip(expected) {
        assert_eq!(
            (r.n_elems, r.n_nodes, r.n_edges, r.n_faces),
            e,
            "level {}",
            r.level
        );
    }
}

#[test]
fn euler_characteristic_of_a_ball() {
    let (_, rows) = refine_with_report(3, false, |_| Ok(())).unwrap();
    for r in rows {
        let chi = r.n_nodes as i64 - r.n_edges as i64 + r.n_faces as i64 - r.n_elems as i64;
        assert_eq!(chi, 1, "level {}", r.level);
    }
}

#[test]
fn geometric_invariants_per_level() {
    let ms = levels(3);
    let mut prev_h: Option<f64> = None;
    for m in &ms {
        for t in 0..m.n_elems() {
            assert!(
                m.orientation_predicate(t) > 0.0,
                "level {} elem {t}",
                m.level
            );
            let mut sum = Vector3::zeros();
            for (k, lf) in LOCAL_FACES.iter().enumerate() {
                let (area, n) = face_area_and_normal(m, &m.element_face(t, k)).unwrap();
                sum += n * area;
                // outward: points away from the opposite vertex
                let to_face = m.point(m.tetra()[t][lf[0]]) - m.centroid(t);
                assert!(n.dot(&to_face) > 0.0);
            }
            assert!(
                sum.norm() <= 1e-12,
                "closed surface residual {}",
                sum.norm()
            );
        }
        assert!((m.total_volume() - 1.0).abs() <= 1e-12);
        let h = m.diameter();
        if let Some(p) = prev_h {
            assert!((h - p / 2.0).abs() < 1e-12);
        }
        prev_h = Some(h);
    }
}

#[test]
fn sigma_pairing() {
    for m in levels(2) {
        let c = Connectivity::build(&m).unwrap();
        let faces = &c.faces;
        let mut seen = vec![Vec::new(); faces.n_faces()];
        for t in 0..m.n_elems() {
            for k in 0..4 {
                seen[faces.slot_face(t, k)].push(faces.sigma(t, k));
            }
        }
        for (f, s) in seen.iter().enumerate() {
            match faces.class(f) {
                FaceClass::Interior => {
                    let mut s = s.clone();
                    s.sort_by(f64::total_cmp);
                    assert_eq!(s, vec![-1.0, 1.0]);
                }
                _ => assert_eq!(s, &vec![1.0]),
            }
        }
    }
}

#[test]
fn multiplier_count_is_faces_minus_neumann() {
    let expected = [104, 1376, 17024];
    for (m, l) in levels(3)[1..].iter().zip(expected) {
        let c = Connectivity::build(m).unwrap();
        assert_eq!(c.faces.n_multipliers(), l);
        assert_eq!(
            c.faces.n_faces() - c.faces.neumann_face_ids().len(),
            c.faces.n_multipliers()
        );
    }
}

fn on_open_segment(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> bool {
    let ab = b - a;
    let s = (p - a).dot(&ab) / ab.norm_squared();
    s > 1e-9 && s < 1.0 - 1e-9 && (a + ab * s - p).norm() < 1e-9
}

#[test]
fn no_hanging_nodes() {
    for m in levels(2) {
        let c = Connectivity::build(&m).unwrap();
        for v in 0..m.n_nodes() {
            let p = m.point(v);
            for &[a, b] in c.edges.edges() {
                assert!(
                    !on_open_segment(p, m.point(a), m.point(b)),
                    "level {}: node {v} hangs on edge ({a},{b})",
                    m.level
                );
            }
        }
    }
}

#[test]
fn refined_boundary_lists_cover_the_cube_surface() {
    for m in levels(3) {
        let total: f64 = m
            .dirichlet_faces()
            .iter()
            .chain(m.neumann_faces())
            .map(|f| tet_hybrid::mesh::face_area(&m, f))
            .sum();
        assert!((total - 6.0).abs() < 1e-12);
        let db: f64 = m
            .dirichlet_faces()
            .iter()
            .map(|f| tet_hybrid::mesh::face_area(&m, f))
            .sum();
        // Γ_D is the top face z = 1
        assert!((db - 1.0).abs() < 1e-12);
        for f in m.dirichlet_faces() {
            assert!(f.iter().all(|&v| (m.point(v).z - 1.0).abs() < 1e-15));
        }
    }
}

#[test]
fn mixed_orientation_is_rejected() {
    let m = initial_cube_mesh();
    let mut tetra = m.tetra().to_vec();
    tetra[2].swap(0, 1);
    let bad = Mesh::new(
        m.coords().to_vec(),
        tetra,
        m.dirichlet_faces().to_vec(),
        m.neumann_faces().to_vec(),
    )
    .unwrap();
    assert!(matches!(
        bad.orientation(),
        Err(Error::MixedOrientation { .. })
    ));
}

fn tet_strategy() -> impl Strategy<Value = [[f64; 3]; 4]> {
    prop::array::uniform4(prop::array::uniform3(-1.0f64..1.0))
}

fn single(p: [[f64; 3]; 4], order: [usize; 4]) -> Mesh {
    Mesh::new(
        p.iter().map(|c| Point3::new(c[0], c[1], c[2])).collect(),
        vec![order],
        vec![],
        vec![
            [order[0], order[1], order[2]],
            [order[0], order[2], order[3]],
            [order[0], order[3], order[1]],
            [order[3], order[2], order[1]],
        ],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orientation_invariant_under_even_permutations(p in tet_strategy()) {
        let base = single(p, [0, 1, 2, 3]);
        let v = base.signed_volume6(0);
        prop_assume!(v.abs() > 1e-3);
        // the even permutations of four vertices
        for order in [[1, 2, 0, 3], [2, 0, 1, 3], [0, 2, 3, 1], [1, 0, 3, 2], [3, 2, 1, 0]] {
            let m = single(p, order);
            prop_assert!((m.signed_volume6(0) - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
        let odd = single(p, [1, 0, 2, 3]);
        prop_assert!((odd.signed_volume6(0) + v).abs() <= 1e-12 * (1.0 + v.abs()));
    }

    #[test]
    fn outward_normals_of_any_tetrahedron(p in tet_strategy(), flip in any::<bool>()) {
        let order = if flip { [0, 2, 1, 3] } else { [0, 1, 2, 3] };
        let m = single(p, order);
        prop_assume!(m.signed_volume6(0).abs() > 1e-3);
        let mut sum = Vector3::zeros();
        for (k, lf) in LOCAL_FACES.iter().enumerate() {
            let (area, n) = face_area_and_normal(&m, &m.element_face(0, k)).unwrap();
            let to_face = m.point(m.tetra()[0][lf[0]]) - m.centroid(0);
            prop_assert!(n.dot(&to_face) > 0.0);
            sum += n * area;
        }
        prop_assert!(sum.norm() <= 1e-12);
    }

    #[test]
    fn red_refinement_of_any_tetrahedron(p in tet_strategy(), flip in any::<bool>()) {
        let order = if flip { [0, 2, 1, 3] } else { [0, 1, 2, 3] };
        let m = single(p, order);
        let v6 = m.signed_volume6(0);
        prop_assume!(v6.abs() > 1e-3);
        let c = Connectivity::build(&m).unwrap();
        let (fine, _) = red_refine(&m, &c.edges).unwrap();
        prop_assert_eq!(fine.n_elems(), 12);
        prop_assert_eq!(fine.n_nodes(), 11);
        let mut vol = 0.0;
        for t in 0..12 {
            // children keep the parent's orientation
            prop_assert!(fine.signed_volume6(t) * v6 > 0.0);
            vol += fine.volume(t);
        }
        prop_assert!((vol - m.volume(0)).abs() <= 1e-12 * (1.0 + m.volume(0)));
        prop_assert!(Connectivity::build(&fine).is_ok());
    }
}
