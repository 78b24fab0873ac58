//! Exact symbolic engine for Grassmann-graded Lagrangian field theory on jet
//! bundles: graded-commutative expression algebra over the rationals, jet
//! calculus (total derivatives, horizontal/vertical differentials,
//! prolongations), the variational complex at density level, Noether theorems,
//! Koszul-Tate and BRST operators, and the classical master equation.
//!
//! All arithmetic is exact rational; every verdict produced by this crate is a
//! polynomial identity, not an approximation.

pub mod brst;
pub mod checks;
pub mod jetcalc;
pub mod kernel;
pub mod linsolve;
pub mod models;
pub mod noether;
pub mod symmetry;
pub mod variational;

pub use kernel::{GradedExpr, JetVar, MultiIndex, Parity, Rational, SymbolDecl, SymbolId, SymbolRole, SymbolTable};
