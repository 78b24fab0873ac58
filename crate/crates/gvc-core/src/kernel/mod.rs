//! Exact graded-commutative expression algebra: canonical polynomials over
//! the rationals in even/odd jet variables, with Koszul-sign bookkeeping.

mod expr;
mod multi_index;
mod symbol;

pub use expr::{GradedExpr, JetVar, KernelError, Side};
pub(crate) use expr::Factors;
pub use multi_index::MultiIndex;
pub use symbol::{Parity, SymbolDecl, SymbolId, SymbolRole, SymbolTable};

pub type Rational = num_rational::BigRational;

/// Convenience constructor for small rational constants.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}
