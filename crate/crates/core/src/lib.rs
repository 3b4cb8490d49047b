//! L-infinity minimisation of `S(u) = A : D^2 u + b(x, u, Du)` under clamped
//! boundary data, by `L^p` continuation, with checks of the limiting
//! Euler-Lagrange system.

pub mod diagnostics;
pub mod error;
pub mod functional;
pub mod grid;
pub mod linalg;
pub mod problem;
pub mod solver;

pub use diagnostics::{
    build_certificate, check_el_system, oracle_1d, AlmostMinStats, CertificateOptions, CertificateReport, ElCheck,
    LevelResiduals, McOptions, Oracle1DSolution, Thresholds,
};
pub use error::{Error, Result};
pub use functional::{EnergyParams, MultiplierSet};
pub use grid::{Grid, NodeClass, ScalarField};
pub use problem::{BoundaryData, BoundaryPreset, CoefficientModel, ProblemSpec, Reaction, ScalarReaction};
pub use solver::{
    run_continuation, ContinuationOptions, ContinuationState, InnerExit, InnerOptions, KernelBranch, KernelResult,
    LevelRecord, Mode, ModeTag,
};
