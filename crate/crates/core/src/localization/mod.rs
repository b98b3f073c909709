//! Fixed points, linearizations, Pfaffians and superdeterminants, the classical and
//! super localization formulas, and the exactness witness of the proof.

mod fixed;
mod formula;
mod witness;

pub use fixed::{
    base_components, eval_at, exact_at, find_fixed_points, linearize_base, linearize_fiber, point_substitution, residual,
    FixedPointStrategy, ZERO_TOL,
};
pub use formula::{
    classical_localize, exact_sqrt, pfaffian, sqrt_det_classical, sqrt_sdet_via_pfaffian, super_localize, superdeterminant,
    Contribution, HalfDet, LocalizationOutcome, LocalizationSetup, Prefactor,
};
pub use witness::{
    build_lambda_beta, exactness_witness, one_form_lie_residual, rescale, rescaling_residual, witness_residual, LambdaBeta,
};
