//! Inner minimisation at fixed `p`, outer continuation in `p`, and the
//! adjoint kernel for the zero-minimum case.

mod continuation;
mod inner;
mod kernel;

pub use continuation::{
    default_sigma, run_continuation, ContinuationOptions, ContinuationState, LevelRecord, Mode, ModeTag, SigmaCheck,
};
pub use inner::{minimize_inner, InnerExit, InnerOptions, InnerReport};
pub use kernel::{solve_adjoint_kernel, KernelBranch, KernelResult, SINGULAR_CONDITION};
