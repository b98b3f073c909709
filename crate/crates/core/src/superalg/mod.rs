//! Grassmann algebra of superfunctions on an (m,n) chart and graded derivations.

mod field;
mod function;

pub use field::SuperVectorField;
pub use function::{koszul_sign, OddMask, Parity, SuperChart, SuperFunction, MAX_ODD};
