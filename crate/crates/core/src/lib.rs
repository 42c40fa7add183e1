//! Rotation estimation between spherical images.
//!
//! Images are projected onto spherical harmonics, spherical moments are read
//! off the coefficients through a precomputed coefficient table, soft cap
//! masks turn them into per-mask "triplets", and the relative rotation is the
//! rigid alignment of the two triplet clouds. A small MLP can refine the
//! analytical estimate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod error;
pub mod lbto;
pub mod mask;
pub mod moments;
pub mod pipeline;
pub mod registry;
pub mod rotation;
pub mod sphere;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
