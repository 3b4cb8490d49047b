//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use linfel_core::{
    BoundaryData, BoundaryPreset, CoefficientModel, Grid, ProblemSpec, Reaction, ScalarField, ScalarReaction,
};

/// Cubic semilinear problem on the unit interval.
pub fn cubic_1d(nodes: usize) -> ProblemSpec {
    let grid = Arc::new(Grid::interval(1.0, nodes).expect("valid grid"));
    let boundary = BoundaryData::from_preset(grid, &BoundaryPreset::Hermite { a: 1.0, b: 0.0 }).expect("valid data");
    ProblemSpec::new(CoefficientModel::Identity, Reaction::GOfU { g: ScalarReaction::NegCube }, boundary)
        .expect("valid problem")
}

/// Radial coefficient with a gradient reaction on the unit square.
pub fn radial_2d(nodes: usize) -> ProblemSpec {
    let grid = Arc::new(Grid::rectangle([1.0, 1.0], [nodes, nodes]).expect("valid grid"));
    let boundary = BoundaryData::from_preset(grid, &BoundaryPreset::Sine { amplitude: 0.7 }).expect("valid data");
    ProblemSpec::new(
        CoefficientModel::Radial { amplitude: 0.5 },
        Reaction::SineGradient { scale: 0.5 },
        boundary,
    )
    .expect("valid problem")
}

pub fn start(spec: &ProblemSpec) -> ScalarField {
    spec.boundary().u0().clone()
}
