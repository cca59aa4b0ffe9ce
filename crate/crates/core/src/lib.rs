//! Artificial-noise basis design for multi-jammer covert communication.
//!
//! The library minimizes a sample-average objective (interference leakage at
//! Bob plus a KL-divergence covertness penalty at Willie) over the complex
//! Stiefel manifold with a Riemannian SVRG solver, and evaluates the covert
//! performance of the result.
//!
//! Numeric kernels are generic over the real scalar ([`scalar::Real`], i.e.
//! `f32` or `f64`); the aliases below fix the default `f64` instantiation.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod io;
pub mod objective;
pub mod optimizer;
pub mod rng;
pub mod scalar;
pub mod stiefel;

pub use error::{Error, Result};
pub use optimizer::Variant;
pub use scalar::Real;

/// Default-precision complex matrix.
pub type CMatrix = stiefel::CMatrix<f64>;
/// Default-precision complex column vector.
pub type CVector = stiefel::CVector<f64>;
/// Default-precision manifold point.
pub type StiefelPoint = stiefel::StiefelPoint<f64>;
/// Default-precision tangent vector.
pub type TangentVector = stiefel::TangentVector<f64>;
/// Default-precision system configuration.
pub type SystemConfig = channel::SystemConfig<f64>;
/// Default-precision channel dataset.
pub type ChannelDataset = channel::ChannelDataset<f64>;
/// Default-precision solver options.
pub type OptimizerOptions = optimizer::OptimizerOptions<f64>;
/// Default-precision run log.
pub type OptimizerTrace = optimizer::OptimizerTrace<f64>;
/// Default-precision metric summary.
pub type CovertMetrics = objective::CovertMetrics<f64>;
