//! Exact character sums of division-polynomial sequences over elliptic
//! curves mod p.
//!
//! Pipeline: [`fp`] gives machine-word prime fields, [`curve`] the group law
//! and point orders, [`divpoly`] the sequence psi_n(P) by two independent
//! engines, [`characters`] exact root-of-unity characters, [`multiplicative`]
//! the sieve-backed twist functions, and [`sums`] the exact bucket-based sum
//! engines with the bound families and their hypothesis flags. [`checks`]
//! packages every exact identity as a named pass/fail check.

pub mod characters;
pub mod checks;
pub mod curve;
pub mod divpoly;
pub mod fp;
pub mod multiplicative;
pub mod sums;
