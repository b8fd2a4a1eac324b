//! Validated derivation toolkit for Runge-Kutta methods.
//!
//! Order conditions are generated from rooted trees, solved or optimized
//! as interval constraint problems by branch-and-prune, and the emitted
//! Butcher tableaux provably enclose a scheme of the requested order and
//! structure. Stability and symplecticity checks run in the same
//! outward-rounded interval arithmetic.

pub mod expr;
pub mod interval;
pub mod properties;
pub mod solver;
pub mod tableau;
pub mod trees;

pub use interval::{Interval, IntervalBox};
