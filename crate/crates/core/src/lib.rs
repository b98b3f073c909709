pub mod error;
pub mod scalar;
pub mod superalg;
pub mod linalg;
pub mod equivariant;
pub mod localization;
pub mod oracle;
pub mod adhm;
pub mod harness;
