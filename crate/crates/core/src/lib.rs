//! Probability that the drifted SABR process is absorbed at zero.
//!
//! The crate evaluates the joint first-passage density of the time-changed
//! driver pair as a Bessel series ([`density`]), integrates it over
//! {0 < s < t} ([`quadrature`]), and cross-checks the result with a seeded
//! Monte Carlo simulation ([`montecarlo`]). The [`geometry`] and [`kernels`]
//! modules carry the isometries between the SABR, hyperbolic and uncorrelated
//! planes together with numerical checks of the identities they satisfy.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Coefficient tables keep the digits they were generated with.
#![allow(clippy::excessive_precision)]

pub mod density;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod montecarlo;
pub mod params;
pub mod quad;
pub mod quadrature;
pub mod special;

pub use density::{f_joint, f_uncorrelated, series_diagnostics, DensityEvalConfig};
pub use error::{Error, Result};
pub use montecarlo::{
    estimate_first_passage, first_passage_histogram, simulate_sabr, McConfig, McEstimate, Scheme,
};
pub use params::{derive_wedge, ModelParams, WedgeCoordinates};
pub use quadrature::{
    bin_mass, cumulative, cumulative_wedge, hitting_probability, hitting_probability_wedge, sweep,
    QuadratureResult, SweepEntry,
};
pub use special::{bessel_i_scaled, log_gamma, BesselOrder};
