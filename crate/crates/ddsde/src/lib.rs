//! Numerical laboratory for distribution-dependent SDEs driven by additive
//! fractional Brownian motion.
//!
//! The crate simulates equations of the form
//! `X_t = xi + int_0^t B_s(X_s, L(X_s)) ds + W_t` with `W` a fractional
//! Brownian motion and `B` a (possibly distributional) measure-dependent
//! drift, and provides the diagnostics needed to probe well-posedness,
//! stability, and mean-field behaviour at desk scale:
//!
//! - [`fbm`]: exact and circulant-embedding fBm samplers, Hölder seminorms;
//! - [`field`]: spectral fields on a periodic domain with Littlewood-Paley
//!   block structure and Besov-Hölder norms;
//! - [`measure`]: empirical measures, Wasserstein distances, convolution of
//!   fields against measures;
//! - [`drift`]: declarative measure-dependent drifts and admissibility gates;
//! - [`young`]: averaged fields, nonlinear Young integrals, Hölder-exponent
//!   regression;
//! - [`solver`]: frozen-drift Euler integration, the Picard fixed-point map on
//!   measure flows, and the interacting particle system;
//! - [`experiments`]: config-driven experiment runners and the CLI.

pub mod drift;
pub mod error;
pub mod experiments;
pub mod fbm;
pub mod field;
pub mod measure;
pub mod rng;
pub mod solver;
pub mod young;

pub use error::{Error, Result};
