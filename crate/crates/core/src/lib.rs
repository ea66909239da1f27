//! Exact-arithmetic engines for Sylvester ranks and kernel dimensions of
//! crossed-product algebra elements: lamplighter-type approximation schemes,
//! the generalized odometer algebra, and rational-language rank values.
//!
//! Everything is computed over ℚ (or ℚ(s) for the odometer realization);
//! no floating point enters any result. Values that cannot be produced in
//! closed form are returned as [`betti::Enclosure`]s, pairs of exact
//! rationals certified to bracket the target.

pub mod betti;
pub mod checks;
pub mod dynamics;
pub mod exactla;
pub mod odometer;
pub mod ratlang;
pub mod rational;
pub mod scheme;

pub use rational::Rat;
