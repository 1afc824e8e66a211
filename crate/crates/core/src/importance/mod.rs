//! Joint importance aligning: learning `U(x)` and `V(y)` such that
//! `U(x) V(y)` approximates the target/source joint density ratio.
//!
//! The supervised objective sees labels in both domains. The unsupervised one
//! replaces `V(y)` by its expectation under a fitted source conditional, and
//! relies on the `K`-way parameterisation of `U` to rule out the degenerate
//! solution that puts all of the shift into `U`.

mod discrete;
mod fit;
mod models;
mod objective;
mod vtilde;

pub use discrete::{
    implied_target_marginal, minimize_table_l_sup, minimize_table_l_unsup, table_l_sup, table_l_unsup,
};
pub use fit::{
    cluster_purity, fit_supervised, fit_supervised_from, fit_unsupervised, fit_unsupervised_with, normalize_factors,
    products, quadrant_products, sample_weights, FittedFactors, ImportanceConfig,
};
pub use models::{label_bin, UForward, UModel, VFeatures, VForward, VModel};
pub use objective::{
    batch_products, joint_objective, l_sup, l_unsup, FactorGradient, ObjectiveBatch, ObjectiveValue,
    RECIPROCAL_FLOOR,
};
pub use vtilde::{gauss_hermite, LabelNodes, VTildeEstimator, VTildeMethod};
