//! Exact symbolic scalars: the coefficient ring for superfunctions and vector fields.

mod eval;
mod expr;
mod parse;

pub use eval::{Binding, CompiledExpr, Number};
pub use expr::{rational, sym, Atom, Monomial, ScalarExpr, Symbol};
pub use parse::{parse_ast, parse_rational, Ast};

