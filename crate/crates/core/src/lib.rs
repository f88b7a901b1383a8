//! Tetrahedral red refinement and a lowest-order primal hybrid finite element
//! method for `−Δu + u = f` on the unit cube with mixed boundary conditions.
//!
//! The pipeline is
//! [`refinement::refine_to_level`] → [`connectivity::Connectivity::build`] →
//! [`assembly::assemble_system`] → [`solver::solve`] → [`analysis`] error norms.
//!
//! ```
//! use tet_hybrid::prelude::*;
//!
//! let mesh = refine_to_level(1)?;
//! let conn = Connectivity::build(&mesh)?;
//! let prob = ManufacturedProblem::Polynomial;
//! let sys = assemble_system(&mesh, &conn.faces, &prob, LoadQuadrature::default())?;
//! let sol = solve(&sys, SolverKind::Schur, &SolverOptions::default())?;
//! assert_eq!((sol.u.len(), sol.lambda.len()), (240, 104));
//! # Ok::<(), tet_hybrid::Error>(())
//! ```

pub mod analysis;
pub mod assembly;
pub mod connectivity;
pub mod error;
pub mod io;
pub mod mesh;
pub mod quadrature;
pub mod refinement;
pub mod solver;
pub mod vtk;

pub use error::{Error, ErrorKind, Result};

pub mod prelude {
    pub use crate::analysis::{
        convergence_study, evaluate_uh, multiplier_norm_error, y_norm_error, ErrorReport,
        HConvention, ManufacturedProblem, StudyOptions,
    };
    pub use crate::assembly::{assemble_system, LinearSystem, LoadQuadrature, ProblemData};
    pub use crate::connectivity::{
        edge_pairs_to_elems, faces_up, full_face_table, num_edges, Connectivity, EdgeTable,
        FaceClass, FaceTable,
    };
    pub use crate::mesh::{initial_cube_mesh, mesh_diameter_h, Mesh, OrientedFace};
    pub use crate::refinement::{red_refine, refine_to_level, refine_with_report};
    pub use crate::solver::{solve, Solution, SolverKind, SolverOptions};
}
