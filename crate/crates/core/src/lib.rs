//! Random-walk laboratory for leveled expander graphs: builds the graphs,
//! materializes their level-to-level transfer operators, runs exact and
//! Monte Carlo harmonic-measure computations, and certifies spectral gaps
//! and edge expansion.

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod error;
pub mod graph;
pub mod linalg;
pub mod operator;
pub mod reports;
pub mod spectral;
pub mod walk;

pub use error::{Error, Result};
pub use graph::{
    build_graph, build_unbalanced_tree, ExpanderConfig, ExpanderLayer, ExpanderModel,
    GraphVariant, LeveledGraph, VertexId,
};
pub use operator::{
    apply_transfer, decomposition_residual, density_from_measure, harmonic_measure_direct,
    harmonic_measure_exact, layer_gap, level_norm, liouville_report, operator_norms,
    propagate_measure, step_operators, transfer_matrix, DecayRow, HarmonicMeasure, LevelDensity,
    MeasureMethod, NormP, OperatorNorms, StepOperators, TransferOperator,
};
pub use spectral::{expander_gap, GapMethod, SpectralReport};
pub use walk::{
    geometric_chi_square, mc_expected_visits, mc_harmonic_measure, run_absorbed_walk, walk_rng,
    AbsorbedWalk, ChiSquareTest, VisitStats, WalkConfig,
};
