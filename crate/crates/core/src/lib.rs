//! Range-based volatility estimators (Parkinson, Garman–Klass,
//! Rogers–Satchell and the Brownian-bridge range) under geometric Brownian
//! motion: path simulation, estimator formulas, analytical densities of the
//! underlying extremes, theoretical moments and Monte Carlo comparisons.

pub mod analytics;
pub mod densities;
pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod paths;
pub mod quadrature;
pub mod special;
pub mod ticks;
pub mod validation;

pub use densities::{DensityValue, ErfcArgument, SeriesConfig};
pub use error::{Error, Result};
pub use estimators::{EstimatorKind, GkVariant, VolatilityEstimate};
pub use paths::{BridgeExtremes, Extremes, Path, PhysicalBar, Tick, Window};

/// Crate version, echoed into output provenance lines.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
