//! Variational second-order tools for nonsmooth functions.
//!
//! Numerical routes (Δ² quotients, graphical-derivative probes, envelope Hessians, segment
//! inequalities) work for any [`types::FunctionOracle`]; one-dimensional piecewise quadratics
//! additionally get an exact rational engine in [`exact`]. The [`certifier`] combines them into
//! convexity verdicts with replayable witnesses, and [`cli`] drives everything from JSON specs.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32`, `f64`); the exact engine is generic
//! over [`scalar::ExactScalar`] (`BigRational`, or `f64` with a relative tolerance).

pub mod certifier;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod ext;
pub mod interval;
pub mod linalg;
pub mod moreau;
pub mod parallel;
pub mod scalar;
pub mod types;
pub mod zoo;

pub use error::{Error, Result};

/// Exact scalar of the piecewise engine.
pub type Rational = num_rational::BigRational;
/// Exact piecewise quadratic.
pub type ExactPiecewise = exact::PiecewiseQuad1D<Rational>;
pub type Point64 = types::Point<f64>;
pub type Box64 = types::BoxRegion<f64>;
pub type Oracle64 = dyn types::FunctionOracle<f64>;
pub type Report64 = certifier::CertificateReport<f64>;
