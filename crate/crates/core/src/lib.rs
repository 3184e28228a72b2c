//! Slow invariant manifold approximation by geodesic stretching on the
//! f-manifold, and the flow curvature method.
//!
//! Layering, bottom up:
//!
//! - [`jet`]: forward-mode differentiation (nested duals, Taylor series).
//! - [`models`]: the vector-field interface and the built-in test models.
//! - [`fmanifold`]: extended phase space, the metric and rescalings.
//! - [`curvature`]: Christoffel symbols, Riemann tensor, f-deviation.
//! - [`stretching`]: stretching rates, subspace split, SIM location sweeps.
//! - [`fcm`]: flow curvature method and its Gramian form.
//! - [`geodesics`]: integration of the extended system, geodesic residuals.
//! - [`config`], [`cli`], [`fixtures`], [`output`], [`reproduce`]: command-line
//!   plumbing.

pub mod cli;
pub mod config;
pub mod curvature;
pub mod error;
pub mod fcm;
pub mod fixtures;
pub mod fmanifold;
pub mod geodesics;
pub mod jet;
pub mod models;
pub mod output;
pub mod reproduce;
pub mod search;
pub mod stretching;

pub use curvature::{christoffel_at, riemann_at, CurvatureBundle, RiemannConvention};
pub use error::{GeoError, Result};
pub use fcm::{fcm_zero_set, gramian_det, psi};
pub use fmanifold::{metric_at, ExtendedPoint, MetricValue, TangentVector};
pub use geodesics::{geodesic_residual, integrate_extended, Trajectory};
pub use models::{builtin, ModelParameters, VectorField};
pub use stretching::{geodesic_stretching, locate_sim_point, sweep_sim_curve, Objective, SimCurve, Slice};
