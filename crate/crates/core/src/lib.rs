//! Incompressible Navier–Stokes on box domains with time-dependent
//! Navier-slip boundary conditions
//!
//! ```text
//!   ∂ₜu − Δu + ∇π − u×curl u = 0,  div u = 0        in (0,τ)×Ω
//!   ν·u = 0,  ν×curl u = β(t)u                       on (0,τ)×∂Ω
//! ```
//!
//! The solution is built from the same pieces as the existence theory for
//! this system:
//!
//! - [`grid`]: the box, the MAC (marker-and-cell) layout and the wall faces.
//! - [`calculus`]: mimetic `div`, `grad`, the two discrete curls, traces and
//!   the discrete norms used by every report.
//! - [`hodge`]: the Leray projection onto divergence-free, non-penetrating
//!   fields and the Hodge Laplacians `B₀`/`B₁` with their resolvents.
//! - [`robin_stokes`]: the friction schedule `β(t,x)` with its validation
//!   and the Robin-Stokes operator `A_β` defined through its quadratic form.
//! - [`evolution`]: backward-Euler solves of `∂ₜu + A_β(t)u = f`, the
//!   maximal-regularity report and the Duhamel reconstruction check.
//! - [`navier_stokes`]: the bilinear map `B(u, v)`, the global-in-time
//!   Picard iteration `v ↦ a + B(v, v)`, constant estimation and pressure
//!   recovery.
//!
//! Supporting modules: [`fields`] (staggered storage), [`linalg`] (conjugate
//! gradients), [`presets`] (Taylor–Green and random smooth data).

pub mod calculus;
pub mod error;
pub mod evolution;
pub mod fields;
pub mod grid;
pub mod hodge;
pub mod linalg;
pub mod navier_stokes;
pub mod presets;
pub mod robin_stokes;

pub use error::{Error, Result};
pub use fields::{CellField, EdgeField, FaceField};
pub use grid::{AxisKind, BoundaryFace, BoxGrid};
