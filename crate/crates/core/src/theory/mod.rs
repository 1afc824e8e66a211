//! Finite-domain oracle for the shift assumptions.
//!
//! Everything here works on explicit joint tables, so each claim about the
//! assumptions can be decided exactly (up to [`PROB_TOL`]) rather than
//! estimated from samples.

mod assumptions;
mod joint;
mod lemma;
mod theorems;

pub use assumptions::{check_assumption, witnesses, Assumption, MAX_PARTITION_NX};
pub use joint::{factorize, joint_importance, DiscreteJoint, FactorPair, FeatureMap, ImportanceTable, PROB_TOL};
pub use lemma::{entropy, jsd, lemma1_value, plugin_objective, Lemma1Value};
pub use theorems::{
    negative_control_theorem_1, negative_control_theorem_2, random_simplex, shift_by_factors, verify_theorem_1,
    verify_theorem_1_sized, verify_theorem_2, verify_theorem_2_sized, TheoremReport, TrialSizes,
    SPARSITY_THRESHOLD,
};
