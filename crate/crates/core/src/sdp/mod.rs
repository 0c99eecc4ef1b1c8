//! The six relaxations as one cone program, an ADMM solver, and rounding.

mod admm;
mod program;
mod rounding;

pub use admm::{solve, SdpSolution, SolutionDump, SolveStatus, SolverOptions};
pub use program::{
    build_cbm_general, build_cbm_noisy, build_cbm_partial, build_for_instance, build_graph_only, build_sbm_general, build_sbm_noisy,
    build_sbm_partial, graph_coefficient, Constraint, ConstraintDump, PackedMatrix, ProgramDump, SdpProgram, Variant, MAX_GRAM_CONDITION,
};
pub use rounding::{exactness_check, round, Exactness, Rounded, EXACT_DISTANCE_TOL, EXACT_MASS_TOL};
