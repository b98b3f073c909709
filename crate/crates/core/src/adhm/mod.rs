//! ADHM data for framed SU(N) instantons: constraints, group actions, the BRST fields
//! with and without the Lagrange-multiplier sector, and the multiplier completion.

pub mod complex;
pub mod constraints;
pub mod data;
pub mod fields;

pub use complex::{CExpr, CMatrix};
pub use constraints::{
    adhm_complex_multiplier_sector, adhm_constraint_functions, adhm_multiplier_sector, fermionic_constraints, multiplier_completion,
    symbolic_data, MultiplierReport, MultiplierSector,
};
pub use data::{check_stabilizer, constraint_complex, constraint_real, group_act, rank_bookkeeping, ADHMData, GroupElement};
pub use fields::{
    adhm_action_spec, adhm_base_components, adhm_fundamental_field, adhm_lifted_field, adhm_q_full, adhm_q_unconstrained, square_defect,
    square_residual, AdhmChart, LieParams,
};
