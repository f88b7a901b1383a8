//! Solvers for the hybrid saddle-point system.
//!
//! Both paths eliminate `U` exactly and solve for `Λ`:
//!
//! * the Schur path builds `S = −C A⁻¹ Cᵀ` from per-element 4×4 blocks
//!   (optionally on a worker pool) and runs Jacobi-preconditioned CG on `−S`;
//! * the direct path inverts the diagonal blocks of the global `A`, forms `−S`
//!   by sparse products and factors it with a sparse LDLᵀ.

use std::str::FromStr;
use std::time::Instant;

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::Serialize;
use sprs::{CsMat, TriMat};
use sprs_ldl::Ldl;

use crate::assembly::{csr_mul_vec, csr_mul_vec_transpose, ElementBlock, LinearSystem};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    Schur,
    SchurParallel,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Direct => "direct",
            SolverKind::Schur => "schur",
            SolverKind::SchurParallel => "schur-parallel",
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverKind::Direct),
            "schur" => Ok(SolverKind::Schur),
            "schur-parallel" => Ok(SolverKind::SchurParallel),
            _ => Err(Error::InvalidArgument(format!(
                "unknown solver '{s}' (expected direct, schur or schur-parallel)"
            ))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Relative residual target.
    pub tol: f64,
    /// CG iteration cap as a multiple of `L`.
    pub max_iter_factor: usize,
    /// Worker threads for the parallel Schur path.
    pub workers: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter_factor: 10,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverStats {
    pub solver: String,
    pub n: usize,
    pub l: usize,
    pub iterations: usize,
    /// Relative residual of the reduced system for `Λ`.
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    pub stats: SolverStats,
}

/// Reduced system for the multipliers.
#[derive(Clone, Debug)]
pub struct SchurSystem {
    /// `S = −C A⁻¹ Cᵀ`, `L × L`.
    pub s: CsMat<f64>,
    /// `−b_D + C A⁻¹ B`.
    pub rhs: Vec<f64>,
    /// `A_T⁻¹` per element, reused for recovery.
    pub a_inv: Vec<Matrix4<f64>>,
}

struct LocalSchur {
    a_inv: Matrix4<f64>,
    s: Matrix4<f64>,
    rhs: Vector4<f64>,
}

fn local_schur(t: usize, blk: &ElementBlock, b: Vector4<f64>) -> Result<LocalSchur> {
    let chol = blk
        .a
        .cholesky()
        .ok_or(Error::DegenerateElement { elem: t })?;
    let a_inv = chol.inverse();
    let w = a_inv * blk.c.transpose();
    Ok(LocalSchur {
        a_inv,
        s: -(blk.c * w),
        rhs: blk.c * (a_inv * b),
    })
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Sequential element-by-element construction of the reduced system.
pub fn build_schur(sys: &LinearSystem) -> Result<SchurSystem> {
    let locals = (0..sys.n_elems())
        .map(|t| local_schur(t, &sys.blocks[t], sys.b_elem(t)))
        .collect::<Result<Vec<_>>>()?;
    Ok(scatter_schur(sys, locals))
}

/// Local blocks computed on `workers` threads; the scatter runs in element
/// order so the result does not depend on the worker count.
pub fn build_schur_parallel(sys: &LinearSystem, workers: usize) -> Result<SchurSystem> {
    let locals = with_pool(workers, || {
        (0..sys.n_elems())
            .into_par_iter()
            .map(|t| local_schur(t, &sys.blocks[t], sys.b_elem(t)))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(scatter_schur(sys, locals))
}

fn scatter_schur(sys: &LinearSystem, locals: Vec<LocalSchur>) -> SchurSystem {
    let l = sys.l();
    let mut tri = TriMat::with_capacity((l, l), 16 * sys.n_elems());
    let mut rhs: Vec<f64> = sys.b_d.iter().map(|v| -v).collect();
    let mut a_inv = Vec::with_capacity(locals.len());
    for (blk, loc) in sys.blocks.iter().zip(locals) {
        for (p, rp) in blk.rows.iter().enumerate() {
            let Some(rp) = *rp else { continue };
            rhs[rp] += loc.rhs[p];
            for (q, rq) in blk.rows.iter().enumerate() {
                if let Some(rq) = *rq {
                    tri.add_triplet(rp, rq, loc.s[(p, q)]);
                }
            }
        }
        a_inv.push(loc.a_inv);
    }
    SchurSystem {
        s: tri.to_csr(),
        rhs,
        a_inv,
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Jacobi-preconditioned CG on `(−S) x = −rhs`. Returns `(x, iterations, relative residual)`.
pub fn pcg_neg_schur(
    s: &CsMat<f64>,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let l = rhs.len();
    let b: Vec<f64> = rhs.iter().map(|v| -v).collect();
    let bnorm = norm(&b);
    let mut x = vec![0.0; l];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let mut dinv = vec![0.0; l];
    for (i, row) in s.outer_iterator().enumerate() {
        let d = -row.get(i).copied().unwrap_or(0.0);
        if d <= 0.0 {
            return Err(Error::Singular(format!(
                "reduced system has non-positive diagonal {d:e} at row {i}"
            )));
        }
        dinv[i] = 1.0 / d;
    }
    let apply = |v: &[f64]| -> Vec<f64> { csr_mul_vec(s, v).into_iter().map(|y| -y).collect() };

    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Singular(format!(
                "reduced system is not positive definite (pᵀ(−S)p = {pap:e})"
            )));
        }
        let alpha = rz / pap;
        for i in 0..l {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            return Ok((x, it, res));
        }
        for i in 0..l {
            z[i] = r[i] * dinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..l {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}

fn recover_u(sys: &LinearSystem, a_inv: &[Matrix4<f64>], lambda: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; sys.n()];
    u.par_chunks_mut(4).enumerate().for_each(|(t, ut)| {
        let blk = &sys.blocks[t];
        let mut lt = Vector4::zeros();
        for (k, r) in blk.rows.iter().enumerate() {
            if let Some(r) = *r {
                lt[k] = lambda[r];
            }
        }
        let v = a_inv[t] * (sys.b_elem(t) + blk.c.transpose() * lt);
        ut.copy_from_slice(v.as_slice());
    });
    u
}

pub fn solve_schur(sys: &LinearSystem, opts: &SolverOptions) -> Result<Solution> {
    let clock = Instant::now();
    let schur = build_schur(sys)?;
    let (lambda, iterations, residual) = pcg_neg_schur(
        &schur.s,
        &schur.rhs,
        opts.tol,
        opts.max_iter_factor * sys.l().max(1),
    )?;
    let u = recover_u(sys, &schur.a_inv, &lambda);
    Ok(Solution {
        u,
        lambda,
        stats: SolverStats {
            solver: SolverKind::Schur.as_str().into(),
            n: sys.n(),
            l: sys.l(),
            iterations,
            residual,
            seconds: clock.elapsed().as_secs_f64(),
        },
    })
}

pub fn solve_schur_parallel(sys: &LinearSystem, opts: &SolverOptions) -> Result<Solution> {
    if opts.workers == 0 {
        return Err(Error::InvalidArgument("workers must be at least 1".into()));
    }
    let clock = Instant::now();
    let schur = build_schur_parallel(sys, opts.workers)?;
    let (lambda, iterations, residual) = pcg_neg_schur(
        &schur.s,
        &schur.rhs,
        opts.tol,
        opts.max_iter_factor * sys.l().max(1),
    )?;
    let u = with_pool(opts.workers, || recover_u(sys, &schur.a_inv, &lambda))?;
    Ok(Solution {
        u,
        lambda,
        stats: SolverStats {
            solver: SolverKind::SchurParallel.as_str().into(),
            n: sys.n(),
            l: sys.l(),
            iterations,
            residual,
            seconds: clock.elapsed().as_secs_f64(),
        },
    })
}

/// Block-diagonal inverse of the global `A`, read from its CSR storage.
fn block_inverse(a: &CsMat<f64>) -> Result<CsMat<f64>> {
    let n = a.rows();
    if !n.is_multiple_of(4) || a.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, expected 4nE x 4nE",
            a.rows(),
            a.cols()
        )));
    }
    let mut tri = TriMat::with_capacity((n, n), 4 * n);
    for t in 0..n / 4 {
        let mut blk = Matrix4::zeros();
        for i in 0..4 {
            let row = a.outer_view(4 * t + i).expect("row in range");
            for (j, v) in row.iter() {
                if j / 4 != t {
                    return Err(Error::DimensionMismatch(format!(
                        "A couples elements {t} and {}",
                        j / 4
                    )));
                }
                blk[(i, j % 4)] = *v;
            }
        }
        let inv = blk
            .try_inverse()
            .ok_or(Error::DegenerateElement { elem: t })?;
        for i in 0..4 {
            for j in 0..4 {
                tri.add_triplet(4 * t + i, 4 * t + j, inv[(i, j)]);
            }
        }
    }
    Ok(tri.to_csr())
}

const DIRECT_REFINEMENT_STEPS: usize = 3;

/// A factorization whose residual stays above this after refinement is
/// treated as failed; below it, what remains is rounding.
const DIRECT_RESIDUAL_LIMIT: f64 = 1e-8;

/// Global elimination followed by a sparse LDLᵀ factorization of `−S`.
pub fn solve_direct(sys: &LinearSystem, opts: &SolverOptions) -> Result<Solution> {
    let clock = Instant::now();
    let a_inv = block_inverse(&sys.a)?;
    let ct: CsMat<f64> = sys.c.transpose_view().to_csr();
    let a_inv_ct: CsMat<f64> = &a_inv * &ct;
    let prod: CsMat<f64> = &sys.c * &a_inv_ct;
    // the product is symmetric only up to rounding
    let prod_t: CsMat<f64> = prod.transpose_view().to_csr();
    let neg_s: CsMat<f64> = (&prod + &prod_t).map(|v| 0.5 * v);
    let a_inv_b = csr_mul_vec(&a_inv, &sys.b);
    let c_ainv_b = csr_mul_vec(&sys.c, &a_inv_b);
    let neg_rhs: Vec<f64> = sys.b_d.iter().zip(&c_ainv_b).map(|(d, c)| d - c).collect();

    let rel_res = |lambda: &[f64]| -> (Vec<f64>, f64) {
        let r = csr_mul_vec(&neg_s, lambda);
        let rr: Vec<f64> = neg_rhs.iter().zip(&r).map(|(b, a)| b - a).collect();
        let bn = norm(&neg_rhs);
        let n = norm(&rr);
        (rr, if bn == 0.0 { n } else { n / bn })
    };

    let mut steps = 1;
    let (lambda, res_l) = if sys.l() == 0 {
        (vec![], 0.0)
    } else {
        let ldl = Ldl::new()
            .numeric(neg_s.view())
            .map_err(|e| Error::Singular(format!("LDLᵀ factorization failed: {e}")))?;
        if let Some((i, d)) = ldl.d().iter().enumerate().find(|(_, d)| **d <= 0.0) {
            return Err(Error::Singular(format!(
                "reduced system is not positive definite (pivot {i} = {d:e})"
            )));
        }
        let mut lambda = ldl.solve(&neg_rhs[..]);
        let (mut rr, mut res) = rel_res(&lambda);
        // iterative refinement against the rounding left by the factorization
        while res > 0.1 * opts.tol && steps <= DIRECT_REFINEMENT_STEPS {
            let d = ldl.solve(&rr[..]);
            let next: Vec<f64> = lambda.iter().zip(&d).map(|(l, d)| l + d).collect();
            let (r2, res2) = rel_res(&next);
            if res2 >= res {
                break;
            }
            lambda = next;
            rr = r2;
            res = res2;
            steps += 1;
        }
        (lambda, res)
    };

    let mut rhs_u = sys.b.clone();
    for (r, v) in rhs_u.iter_mut().zip(csr_mul_vec_transpose(&sys.c, &lambda)) {
        *r += v;
    }
    let u = csr_mul_vec(&a_inv, &rhs_u);

    let res_full = saddle_residual(sys, &u, &lambda);
    let residual = res_l.max(res_full);
    let limit = opts.tol.max(DIRECT_RESIDUAL_LIMIT);
    if residual.is_nan() || residual > limit {
        return Err(Error::Singular(format!(
            "direct solve residual {residual:e} exceeds {limit:e}"
        )));
    }
    Ok(Solution {
        u,
        lambda,
        stats: SolverStats {
            solver: SolverKind::Direct.as_str().into(),
            n: sys.n(),
            l: sys.l(),
            iterations: steps,
            residual,
            seconds: clock.elapsed().as_secs_f64(),
        },
    })
}

/// Larger of `‖AU − CᵀΛ − B‖/‖B‖` and `‖CU − b_D‖/(1 + ‖b_D‖)`.
pub fn saddle_residual(sys: &LinearSystem, u: &[f64], lambda: &[f64]) -> f64 {
    let au = csr_mul_vec(&sys.a, u);
    let ctl = csr_mul_vec_transpose(&sys.c, lambda);
    let r1: Vec<f64> = (0..sys.n()).map(|i| au[i] - ctl[i] - sys.b[i]).collect();
    let bn = norm(&sys.b);
    let r1 = if bn == 0.0 { norm(&r1) } else { norm(&r1) / bn };
    let cu = csr_mul_vec(&sys.c, u);
    let r2: Vec<f64> = cu.iter().zip(&sys.b_d).map(|(a, b)| a - b).collect();
    let r2 = norm(&r2) / (1.0 + norm(&sys.b_d));
    r1.max(r2)
}

pub fn solve(sys: &LinearSystem, kind: SolverKind, opts: &SolverOptions) -> Result<Solution> {
    match kind {
        SolverKind::Direct => solve_direct(sys, opts),
        SolverKind::Schur => solve_schur(sys, opts),
        SolverKind::SchurParallel => solve_schur_parallel(sys, opts),
    }
}
