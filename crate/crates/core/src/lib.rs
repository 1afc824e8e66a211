//! Domain adaptation under factorizable joint shift.
//!
//! The crate is organised bottom-up:
//!
//! * [`theory`] decides the classical shift assumptions on finite joint tables
//!   and checks the implications between them by exhaustive search.
//! * [`toy`] generates the hexagon wealth/health benchmark together with its
//!   exact importance factors and analytic optimal predictor.
//! * [`nets`] holds the small feed-forward networks, heads and optimizers that
//!   every learned component is built from.
//! * [`importance`] learns the data and label importance factors `U(x)`, `V(y)`
//!   with the supervised and unsupervised joint-importance objectives.
//! * [`adaptation`] trains Gaussian predictors with the baselines and with the
//!   importance-weighted adversarial pipeline.
//! * [`harness`] runs seeded experiments, aggregates reports and writes the
//!   plot-ready CSV files.

pub mod adaptation;
pub mod digest;
pub mod error;
pub mod harness;
pub mod importance;
pub mod nets;
pub mod rng;
pub mod theory;
pub mod toy;

pub use error::{Error, Result};
