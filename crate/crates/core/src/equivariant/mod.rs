//! Group actions, the equivariant differential, BRST operators and the σ_Q morphism.

mod action;
mod brst;
mod forms;
mod metric;
mod numgrass;

pub use action::{symbolic_xi, ActionSpec};
pub use brst::{
    check_injective, eval_matrix, holomorphic_action, kahler_q, sigma_from_q, tautological_chart, tautological_q, verify_brst,
    BrstCheck, BrstReport, ComplexStructure, ConditionResult,
};
pub use forms::{
    contraction, equivariant_differential, equivariant_differential_field, exterior_derivative, is_equivariantly_closed,
    lie_derivative, EquivariantForm,
};
pub use numgrass::{CompiledSuperFunction, NumGrassmann};
pub use metric::{
    check_sigma_parallel, christoffel, induced_fiber_metric, lie_derivative_metric, MetricData, ParallelReport,
};
