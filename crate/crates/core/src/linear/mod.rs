//! The linearized operators at the flat solution, the adjoint mode systems,
//! the cokernel and the mode-space linear solve.

mod adjoint;
mod cokernel;
mod fdcheck;
mod ops;
mod system;

pub use adjoint::{adjoint_kernel, AdjointKernel, AdjointModeSystem};
pub use cokernel::{
    cokernel_basis, full_pairing, lemma_residuals, pair_residual, CokernelElement, CokernelKind,
    LemmaResiduals,
};
pub use fdcheck::{finite_difference_check, fitted_order, FdReport, FD_EXACT_FLOOR};
pub use ops::{apply_dphi, apply_t, volume_pairing};
pub use system::{gmres, solve_linearized, BlockSet, GmresOutcome, LinearConfig, LinearOperator, LinearSystem, ModeLayout};
