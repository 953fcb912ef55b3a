//! Convex mixtures of generalized Pauli channels built on mutually unbiased
//! bases: spectra, time-local rates, divisibility classification and
//! constructions of semigroup mixtures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channelcore;
pub mod dynamics;
pub mod exprcalc;
pub mod matrixlab;
pub mod mubgen;
pub mod par;
pub mod roots;
pub mod semigroupforge;
