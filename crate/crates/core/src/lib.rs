//! Numerical laboratory for deformed Anosov diffeomorphisms of the torus.
//!
//! The map family is `f = A o g` on `T^n`: `A` a hyperbolic integer matrix and
//! `g` a product of volume-preserving (or optionally dissipative) flows
//! supported in small balls around fixed points of `A`. Inside those balls the
//! uniform contraction of `A` is traded for a bounded loss of hyperbolicity
//! while a dominated splitting survives. The modules measure what survives:
//! cone invariance and domination ([`cones`]), Lyapunov exponents and Birkhoff
//! sums along orbits ([`hyperbolicity`]), stable and unstable manifolds
//! ([`manifolds`]), push-forward measures ([`measures`]) and stable holonomies
//! ([`holonomy`]).

pub mod cones;
pub mod error;
pub mod holonomy;
pub mod hyperbolicity;
pub mod linalg;
pub mod manifolds;
pub mod measures;
pub mod sampling;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
