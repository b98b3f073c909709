//! Numerical ground truth: quadrature on charted manifolds, Berezin integrals against
//! the canonical section Θ, Hodge duals and the super-Stokes boundary check.

pub mod berezin;
pub mod quadrature;
pub mod stokes;

pub use berezin::{global_berezin, quadrature, BerezinianSection, ChartedManifold, OracleChart};
pub use quadrature::{gauss_legendre, integrate, QuadResult, QuadratureOptions};
pub use stokes::{hodge_dual_big_h, hodge_dual_h, super_stokes_check, RootScaled, StokesOptions, StokesReport};
