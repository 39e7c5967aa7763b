// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lattice;
pub mod par;
pub mod spectral;
pub mod state;
pub mod evolve;
pub mod protocols;
pub mod routing;
pub mod crab;
pub mod nelder_mead;
