//! The hexagon wealth/health benchmark.
//!
//! The target domain is uniform over a point-symmetric hexagon; the source
//! domain is uniform within each quadrant but with quadrant-specific counts,
//! which yields a joint importance that is piecewise constant and factorizes
//! as `u(wealth) v(health)`.

mod csv;
mod data;
mod hexagon;

pub use csv::{read_csv, write_csv, HEADER as CSV_HEADER};
pub use data::{
    ground_truth_importance, quadrant_tables, sample_source, sample_target, sample_uniform, Dataset, Domain,
    GroundTruthFactors, LabeledSample, SourceSpec,
};
pub use hexagon::{polygon_area, HexagonSpec, OptimalPredictor, Quadrant};
