//! Containment of spectrahedra.
//!
//! Given pencils `A(x)` and `B(x)`, decide whether `{x : A(x) ⪰ 0}` lies inside
//! `{x : B(x) ⪰ 0}` using a moment relaxation hierarchy, an sos-matrix
//! hierarchy and a complete-positivity feasibility test, all backed by the
//! bundled interior-point solver in [`sdpcore`].

// `!(a < b)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod momrelax;
pub mod pencil;
pub mod posmap;
pub mod radii;
pub mod reduce;
pub mod sdpcore;
pub mod search;
pub mod sosrelax;
pub mod symcore;

pub use error::{Error, Result};
