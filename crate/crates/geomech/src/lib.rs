//! Numerical Hamiltonian mechanics on symplectic and Poisson manifolds with
//! Lie-group symmetry.
//!
//! The crate provides, in order of construction:
//!
//! * [`so3`] — vector calculus on oriented Euclidean 3-space, the rotation
//!   group and its algebra (cross products, the hat isomorphism, the rotation
//!   exponential, coadjoint action);
//! * [`poisson`] — Poisson structures as point-dependent antisymmetric
//!   matrices: brackets, Hamiltonian vector fields, Jacobiator and Casimir
//!   diagnostics, structures on duals of Lie algebras with optional cocycle
//!   modification;
//! * [`actions`] — Lie algebra actions on configuration spaces, cotangent-lift
//!   momentum maps, their algebra and group cocycles, conservation drift
//!   monitoring;
//! * [`integrators`] — fixed-step time integration (RK4, Störmer–Verlet,
//!   RATTLE, implicit midpoint) with trajectory recording;
//! * [`reduction`] — reduced-momentum-equation residuals, rigid-body equations,
//!   rotation-group reconstruction, and reduced dynamics for the central-force
//!   problem and the spherical pendulum;
//! * [`systems`] — fully wired example systems (spherical pendulum, free rigid
//!   body, heavy top, Kepler problem) with orbit analytics.

#![allow(clippy::type_complexity)]

pub mod actions;
pub mod error;
pub mod integrators;
pub mod poisson;
pub mod reduction;
pub mod so3;
pub mod systems;

pub use error::{GeomechError, IntegrateError};
pub use so3::{coad, cross, exp_so3, hat, mixed, unhat, Matrix3, Vec3};
