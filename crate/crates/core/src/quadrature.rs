//! Barycentric quadrature rules on tetrahedra and triangles.
//!
//! Weights are normalized to sum to one; multiply by the cell measure.

use nalgebra::Point3;

/// A rule on a tetrahedron in barycentric coordinates.
#[derive(Clone, Debug)]
pub struct TetRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

/// A rule on a triangle in barycentric coordinates.
#[derive(Clone, Debug)]
pub struct TriRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TetRule {
    /// 14-point positive rule, exact for polynomials of degree 5.
    #[allow(clippy::excessive_precision)]
    pub fn degree5() -> Self {
        const A: f64 = 0.045_503_704_125_649_649_491_880_526_3;
        const W6: f64 = 0.042_546_020_777_081_466_438_069_43;
        const C1: f64 = 0.092_735_250_310_891_226_402_323_91;
        const W1: f64 = 0.073_493_043_116_361_949_543_710_21;
        const C2: f64 = 0.310_885_919_263_300_609_797_345_7;
        const W2: f64 = 0.112_687_925_718_015_850_799_185_7;
        let b = 0.5 - A;
        let mut points = Vec::with_capacity(14);
        let mut weights = Vec::with_capacity(14);
        for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            let mut p = [b; 4];
            p[i] = A;
            p[j] = A;
            points.push(p);
            weights.push(W6);
        }
        for (c, w) in [(C1, W1), (C2, W2)] {
            for i in 0..4 {
                let mut p = [c; 4];
                p[i] = 1.0 - 3.0 * c;
                points.push(p);
                weights.push(w);
            }
        }
        TetRule { points, weights }
    }

    /// The four face centroids with equal weights; exact for degree 1.
    pub fn face_centroids() -> Self {
        let t = 1.0 / 3.0;
        TetRule {
            points: vec![
                [t, t, t, 0.0],
                [t, 0.0, t, t],
                [t, t, 0.0, t],
                [0.0, t, t, t],
            ],
            weights: vec![0.25; 4],
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Physical location of each point on the tetrahedron with vertices `v`.
    pub fn map_points(&self, v: &[Point3<f64>; 4]) -> Vec<Point3<f64>> {
        self.points.iter().map(|l| bary_to_point(v, l)).collect()
    }

    /// `∫_T g` for a tetrahedron with vertices `v` and volume `volume`.
    pub fn integrate<F: FnMut(&Point3<f64>) -> f64>(
        &self,
        v: &[Point3<f64>; 4],
        volume: f64,
        mut g: F,
    ) -> f64 {
        let s: f64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * g(&bary_to_point(v, l)))
            .sum();
        s * volume
    }
}

impl TriRule {
    /// Edge midpoints, exact for degree 2.
    pub fn edge_midpoints() -> Self {
        TriRule {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
        }
    }

    pub fn centroid() -> Self {
        let t = 1.0 / 3.0;
        TriRule {
            points: vec![[t, t, t]],
            weights: vec![1.0],
        }
    }

    pub fn integrate<F: FnMut(&Point3<f64>) -> f64>(
        &self,
        v: &[Point3<f64>; 3],
        area: f64,
        mut g: F,
    ) -> f64 {
        let s: f64 = self
            .points
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| {
                let p = v[0].coords * l[0] + v[1].coords * l[1] + v[2].coords * l[2];
                w * g(&Point3::from(p))
            })
            .sum();
        s * area
    }
}

pub fn bary_to_point(v: &[Point3<f64>; 4], l: &[f64; 4]) -> Point3<f64> {
    Point3::from(v[0].coords * l[0] + v[1].coords * l[1] + v[2].coords * l[2] + v[3].coords * l[3])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(n: u32) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// ∫ x^a y^b z^c over the unit corner tetrahedron.
    fn tet_monomial(a: u32, b: u32, c: u32) -> f64 {
        fact(a) * fact(b) * fact(c) / fact(a + b + c + 3)
    }

    /// ∫ x^a y^b over the unit corner triangle.
    fn tri_monomial(a: u32, b: u32) -> f64 {
        fact(a) * fact(b) / fact(a + b + 2)
    }

    fn unit_tet() -> [Point3<f64>; 4] {
        [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ]
    }

    fn max_exact_degree(rule: &TetRule) -> i32 {
        let v = unit_tet();
        for deg in 0..=8u32 {
            for a in 0..=deg {
                for b in 0..=deg - a {
                    let c = deg - a - b;
                    let q = rule.integrate(&v, 1.0 / 6.0, |p| {
                        p.x.powi(a as i32) * p.y.powi(b as i32) * p.z.powi(c as i32)
                    });
                    let ex = tet_monomial(a, b, c);
                    if (q - ex).abs() > 1e-14 * ex.max(1e-3) {
                        return deg as i32 - 1;
                    }
                }
            }
        }
        8
    }

    #[test]
    fn degree5_rule_is_positive_and_exact_to_degree_5() {
        let r = TetRule::degree5();
        assert_eq!(r.len(), 14);
        assert!(r.weights.iter().all(|&w| w > 0.0));
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for p in &r.points {
            assert!(p.iter().all(|&l| l > 0.0));
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert_eq!(max_exact_degree(&r), 5);
    }

    #[test]
    fn face_centroid_rule_is_degree_one() {
        assert_eq!(max_exact_degree(&TetRule::face_centroids()), 1);
    }

    #[test]
    fn edge_midpoint_rule_is_degree_two() {
        let r = TriRule::edge_midpoints();
        let v = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        for deg in 0..=3u32 {
            for a in 0..=deg {
                let b = deg - a;
                let q = r.integrate(&v, 0.5, |p| p.x.powi(a as i32) * p.y.powi(b as i32));
                let ok = (q - tri_monomial(a, b)).abs() < 1e-15;
                assert_eq!(ok, deg <= 2, "x^{a} y^{b}");
            }
        }
    }
}
