//! Numerical geometric mechanics on coordinate charts.
//!
//! Lagrangian systems are handled in the Cartan (Lepage) picture: points of
//! `R x (TQ + T*Q)` carry `(t, q, v, p)`, the Legendre section fixes
//! `p = dL/dv`, and the equations of motion are checked as residuals in any
//! frame. On top of that sit momentum maps, Routh reduction over trivial
//! principal bundles with its gyroscopic force, and the Adler-Kostant-Symes
//! system on `SL(d)` together with its reduced form.
//!
//! Numerical modules are generic over [`Real`] (`f32` or `f64`). Every
//! tolerance in the test suites assumes `f64`; the expression language and
//! the AKS module evaluate in `f64` only.

pub mod aks;
pub mod builtins;
pub mod error;
pub mod exprlang;
pub mod geomcalc;
pub mod integrate;
pub mod liegroup;
pub mod linalg;
pub mod mech;
pub mod scalar;
pub mod symmetry;

pub use error::{Error, Result};
pub use scalar::Real;
