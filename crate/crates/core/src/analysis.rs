//! Manufactured solutions, discrete error norms and convergence studies.
//!
//! Errors are measured in
//!
//! * the broken norm `‖v‖_Y² = Σ_T ‖∇v‖²_T + h⁻² ‖v‖²_T` for `u − u_h`, and
//! * `‖χ‖_h² = Σ_T h ‖χ‖²_{∂T∖Γ_N}` for `κ − κ_h`, where `κ = ∇u·ν_T` and
//!   `κ_h = σ·Λ` as seen from `T`.

use std::time::Instant;

use nalgebra::{Matrix3, Point3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{assemble_system, LoadQuadrature, ProblemData};
use crate::connectivity::{Connectivity, FaceClass, FaceTable};
use crate::error::{Error, Result};
use crate::mesh::{ElemId, Mesh, LOCAL_FACES};
use crate::quadrature::{TetRule, TriRule};
use crate::refinement::refine_with_report;
use crate::solver::{solve, Solution, SolverKind, SolverOptions};

/// Exact solutions with the data they induce for `−Δu + u = f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ManufacturedProblem {
    /// `u = x²y²z²`.
    Polynomial,
    /// `u = a·x + b·y + c·z + d`.
    Linear([f64; 4]),
}

impl ManufacturedProblem {
    pub fn linear_patch() -> Self {
        ManufacturedProblem::Linear([1.0, 2.0, 3.0, 4.0])
    }

    pub fn u(&self, p: &Point3<f64>) -> f64 {
        match self {
            ManufacturedProblem::Polynomial => (p.x * p.y * p.z).powi(2),
            ManufacturedProblem::Linear([a, b, c, d]) => a * p.x + b * p.y + c * p.z + d,
        }
    }

    pub fn grad_u(&self, p: &Point3<f64>) -> Vector3<f64> {
        match self {
            ManufacturedProblem::Polynomial => {
                let (x, y, z) = (p.x, p.y, p.z);
                Vector3::new(
                    2.0 * x * y * y * z * z,
                    2.0 * x * x * y * z * z,
                    2.0 * x * x * y * y * z,
                )
            }
            ManufacturedProblem::Linear([a, b, c, _]) => Vector3::new(*a, *b, *c),
        }
    }

    pub fn laplacian_u(&self, p: &Point3<f64>) -> f64 {
        match self {
            ManufacturedProblem::Polynomial => {
                let (x2, y2, z2) = (p.x * p.x, p.y * p.y, p.z * p.z);
                2.0 * (y2 * z2 + x2 * z2 + x2 * y2)
            }
            ManufacturedProblem::Linear(_) => 0.0,
        }
    }

    /// `κ = ∇u·ν`.
    pub fn kappa(&self, p: &Point3<f64>, normal: &Vector3<f64>) -> f64 {
        self.grad_u(p).dot(normal)
    }
}

impl ProblemData for ManufacturedProblem {
    fn f(&self, p: &Point3<f64>) -> f64 {
        -self.laplacian_u(p) + self.u(p)
    }

    fn dirichlet(&self, p: &Point3<f64>) -> f64 {
        self.u(p)
    }

    fn neumann_flux(&self, p: &Point3<f64>, normal: &Vector3<f64>) -> f64 {
        self.kappa(p, normal)
    }
}

/// Which `h` weights the element contributions of both norms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HConvention {
    /// Largest element diameter of the mesh.
    #[default]
    Global,
    /// Diameter of each element.
    PerElement,
}

fn element_h(mesh: &Mesh, t: ElemId, conv: HConvention, h: f64) -> f64 {
    match conv {
        HConvention::Global => h,
        HConvention::PerElement => mesh.element_diameter(t),
    }
}

/// Barycentric coordinates of `p` in element `t`.
pub fn barycentric(mesh: &Mesh, t: ElemId, p: &Point3<f64>) -> Result<[f64; 4]> {
    let v = mesh.element_points(t);
    let j = Matrix3::from_columns(&[v[1] - v[0], v[2] - v[0], v[3] - v[0]]);
    let lu = j.lu();
    let s = lu
        .solve(&(p - v[0]))
        .ok_or(Error::DegenerateElement { elem: t })?;
    Ok([1.0 - s.x - s.y - s.z, s.x, s.y, s.z])
}

/// `u_h(p)` from the four coefficients of element `t`.
pub fn evaluate_uh(sol: &Solution, mesh: &Mesh, t: ElemId, p: &Point3<f64>) -> Result<f64> {
    let l = barycentric(mesh, t, p)?;
    let min = l.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::OutsideElement {
            elem: t,
            min_bary: min,
        });
    }
    Ok((0..4).map(|j| l[j] * sol.u[4 * t + j]).sum())
}

fn check_len(mesh: &Mesh, sol: &Solution) -> Result<()> {
    if sol.u.len() != 4 * mesh.n_elems() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} coefficients, mesh needs {}",
            sol.u.len(),
            4 * mesh.n_elems()
        )));
    }
    Ok(())
}

pub fn y_norm_error(mesh: &Mesh, sol: &Solution, prob: &ManufacturedProblem) -> Result<f64> {
    y_norm_error_with(mesh, sol, prob, HConvention::Global)
}

pub fn y_norm_error_with(
    mesh: &Mesh,
    sol: &Solution,
    prob: &ManufacturedProblem,
    conv: HConvention,
) -> Result<f64> {
    check_len(mesh, sol)?;
    let rule = TetRule::degree5();
    let h = mesh.diameter();
    let parts: Vec<f64> = (0..mesh.n_elems())
        .into_par_iter()
        .map(|t| {
            let (g, vol) = crate::assembly::barycentric_gradients(&mesh.element_points(t))
                .ok_or(Error::DegenerateElement { elem: t })?;
            let coef = &sol.u[4 * t..4 * t + 4];
            let grad_h: Vector3<f64> = (0..4).map(|j| g.row(j).transpose() * coef[j]).sum();
            let v = mesh.element_points(t);
            let he = element_h(mesh, t, conv, h);
            let mut s = 0.0;
            for (l, w) in rule.points.iter().zip(&rule.weights) {
                let x = crate::quadrature::bary_to_point(&v, l);
                let uh: f64 = (0..4).map(|j| l[j] * coef[j]).sum();
                let e = prob.u(&x) - uh;
                let ge = prob.grad_u(&x) - grad_h;
                s += w * (ge.norm_squared() + e * e / (he * he));
            }
            Ok(s * vol)
        })
        .collect::<Result<_>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

pub fn multiplier_norm_error(
    mesh: &Mesh,
    faces: &FaceTable,
    sol: &Solution,
    prob: &ManufacturedProblem,
) -> Result<f64> {
    multiplier_norm_error_with(mesh, faces, sol, prob, HConvention::Global)
}

pub fn multiplier_norm_error_with(
    mesh: &Mesh,
    faces: &FaceTable,
    sol: &Solution,
    prob: &ManufacturedProblem,
    conv: HConvention,
) -> Result<f64> {
    check_len(mesh, sol)?;
    if sol.lambda.len() != faces.n_multipliers() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} multipliers, face table needs {}",
            sol.lambda.len(),
            faces.n_multipliers()
        )));
    }
    let rule = TriRule::edge_midpoints();
    let h = mesh.diameter();
    let parts: Vec<f64> = (0..mesh.n_elems())
        .into_par_iter()
        .map(|t| {
            let v = mesh.element_points(t);
            let he = element_h(mesh, t, conv, h);
            let mut s = 0.0;
            for (k, lf) in LOCAL_FACES.iter().enumerate() {
                let f = faces.slot_face(t, k);
                if faces.class(f) == FaceClass::Neumann {
                    continue;
                }
                let row = faces.multiplier_index(f).expect("non-Neumann face");
                let kh = faces.sigma(t, k) * sol.lambda[row];
                let n = mesh.outward_normal(t, k);
                let tri = [v[lf[0]], v[lf[1]], v[lf[2]]];
                s += he
                    * rule.integrate(&tri, faces.area(f), |x| {
                        let d = prob.kappa(x, &n) - kh;
                        d * d
                    });
            }
            s
        })
        .collect();
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// One row of a convergence study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    pub level: u32,
    pub n_elems: usize,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_faces: usize,
    pub n: usize,
    pub l: usize,
    pub h: f64,
    pub err_u_y: f64,
    pub order_u: Option<f64>,
    pub err_kappa_h: f64,
    pub order_kappa: Option<f64>,
    pub solver: String,
    /// Assembly plus solve wall time.
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudyOptions {
    pub solver: SolverKind,
    pub solver_options: SolverOptions,
    pub load: LoadQuadrature,
    pub h: HConvention,
    pub force: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            solver: SolverKind::Schur,
            solver_options: SolverOptions::default(),
            load: LoadQuadrature::default(),
            h: HConvention::default(),
            force: false,
        }
    }
}

/// Refine, assemble, solve and measure errors for one mesh.
pub fn measure_level(
    mesh: &Mesh,
    prob: &ManufacturedProblem,
    opts: &StudyOptions,
) -> Result<(ErrorReport, Connectivity, Solution)> {
    let clock = Instant::now();
    let conn = Connectivity::build(mesh)?;
    let sys = assemble_system(mesh, &conn.faces, prob, opts.load)?;
    let sol = solve(&sys, opts.solver, &opts.solver_options)?;
    let seconds = clock.elapsed().as_secs_f64();
    let err_u_y = y_norm_error_with(mesh, &sol, prob, opts.h)?;
    let err_kappa_h = multiplier_norm_error_with(mesh, &conn.faces, &sol, prob, opts.h)?;
    let report = ErrorReport {
        level: mesh.level,
        n_elems: mesh.n_elems(),
        n_nodes: mesh.n_nodes(),
        n_edges: conn.edges.n_edges(),
        n_faces: conn.faces.n_faces(),
        n: sys.n(),
        l: sys.l(),
        h: mesh.diameter(),
        err_u_y,
        order_u: None,
        err_kappa_h,
        order_kappa: None,
        solver: opts.solver.as_str().into(),
        seconds,
    };
    Ok((report, conn, sol))
}

/// Rows for levels `1..=max_level` with `log₂` orders between consecutive levels.
pub fn convergence_study(
    max_level: u32,
    prob: &ManufacturedProblem,
    opts: &StudyOptions,
) -> Result<Vec<ErrorReport>> {
    if max_level < 1 {
        return Err(Error::InvalidArgument(
            "convergence study needs max_level >= 1".into(),
        ));
    }
    let mut rows: Vec<ErrorReport> = Vec::new();
    refine_with_report(max_level, opts.force, |mesh| {
        if mesh.level == 0 {
            return Ok(());
        }
        let (mut r, _, _) = measure_level(mesh, prob, opts).map_err(|e| annotate(e, mesh.level))?;
        if let Some(prev) = rows.last() {
            r.order_u = Some((prev.err_u_y / r.err_u_y).log2());
            r.order_kappa = Some((prev.err_kappa_h / r.err_kappa_h).log2());
        }
        rows.push(r);
        Ok(())
    })?;
    Ok(rows)
}

fn annotate(e: Error, level: u32) -> Error {
    match e {
        Error::NotConverged { .. } | Error::Singular(_) => {
            Error::Singular(format!("level {level}: {e}"))
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::initial_cube_mesh;
    use crate::refinement::refine_to_level;
    use crate::solver::SolverStats;
    use approx::assert_abs_diff_eq;

    fn dummy_solution(u: Vec<f64>) -> Solution {
        Solution {
            u,
            lambda: vec![],
            stats: SolverStats {
                solver: "none".into(),
                n: 0,
                l: 0,
                iterations: 0,
                residual: 0.0,
                seconds: 0.0,
            },
        }
    }

    #[test]
    fn source_matches_finite_difference_laplacian() {
        let p = ManufacturedProblem::Polynomial;
        let h = 1e-3;
        for x in [Point3::new(0.3, 0.7, 0.2), Point3::new(0.9, 0.1, 0.55)] {
            let mut lap = 0.0;
            for d in 0..3 {
                let mut e = Vector3::zeros();
                e[d] = h;
                lap += (p.u(&(x + e)) - 2.0 * p.u(&x) + p.u(&(x - e))) / (h * h);
            }
            assert!((p.f(&x) - (-lap + p.u(&x))).abs() < 1e-6);
            let mut g = Vector3::zeros();
            for d in 0..3 {
                let mut e = Vector3::zeros();
                e[d] = h;
                g[d] = (p.u(&(x + e)) - p.u(&(x - e))) / (2.0 * h);
            }
            assert!((g - p.grad_u(&x)).norm() < 1e-6);
        }
    }

    #[test]
    fn evaluate_uh_at_vertices_and_centroid() {
        let m = initial_cube_mesh();
        let u: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let s = dummy_solution(u);
        for t in 0..5 {
            let v = m.element_points(t);
            for (j, vj) in v.iter().enumerate() {
                assert_abs_diff_eq!(
                    evaluate_uh(&s, &m, t, vj).unwrap(),
                    s.u[4 * t + j],
                    epsilon = 1e-12
                );
            }
            let mean: f64 = s.u[4 * t..4 * t + 4].iter().sum::<f64>() / 4.0;
            assert_abs_diff_eq!(
                evaluate_uh(&s, &m, t, &m.centroid(t)).unwrap(),
                mean,
                epsilon = 1e-12
            );
        }
        assert!(matches!(
            evaluate_uh(&s, &m, 0, &Point3::new(1.0, 1.0, 1.0)),
            Err(Error::OutsideElement { elem: 0, .. })
        ));
    }

    #[test]
    fn interpolant_of_linear_function_has_zero_y_error() {
        let m = refine_to_level(1).unwrap();
        let p = ManufacturedProblem::linear_patch();
        let u = m
            .tetra()
            .iter()
            .flat_map(|t| t.map(|v| p.u(m.point(v))))
            .collect();
        let e = y_norm_error(&m, &dummy_solution(u), &p).unwrap();
        assert!(e < 1e-12);
    }

    #[test]
    fn y_norm_of_constant_offset() {
        // u_h = u − 1 gives ‖1‖²·h⁻² = vol/h² = 1/2 on the cube
        let m = initial_cube_mesh();
        let p = ManufacturedProblem::linear_patch();
        let u = m
            .tetra()
            .iter()
            .flat_map(|t| t.map(|v| p.u(m.point(v)) - 1.0))
            .collect();
        let e = y_norm_error(&m, &dummy_solution(u), &p).unwrap();
        assert_abs_diff_eq!(e, (0.5f64).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn study_needs_a_level() {
        assert!(convergence_study(
            0,
            &ManufacturedProblem::Polynomial,
            &StudyOptions::default()
        )
        .is_err());
    }

    #[test]
    fn single_level_study_has_no_orders() {
        let rows = convergence_study(
            1,
            &ManufacturedProblem::Polynomial,
            &StudyOptions::default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].order_u, None);
        assert_eq!((rows[0].n, rows[0].l), (240, 104));
    }
}
