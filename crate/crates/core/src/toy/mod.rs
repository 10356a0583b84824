//! Two small deterministic models that exercise an exchange end to end: a
//! metamer-scale growth model acting as the source, and elementary-scale
//! target models answering over the protocol.
//!
//! The growth formulas are synthetic. They only need to be deterministic and
//! to produce branching, multiscale plants.

mod configs;
mod growth;
mod handlers;

pub use configs::{builtin_file, builtin_pipeline, write_builtin_configs, BUILTIN_FILES};
pub use growth::{growth_export, GrowthAdapter, GrowthState, MetamerRecord, GROWTH_MODEL_KIND};
pub use handlers::{status_handler, water_handler, StatusModel, WaterModel, WaterParams};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToyError {
    #[error("graph has no fine-scale internodes")]
    MissingFineScale,
    #[error("cannot install graph: {0}")]
    Install(String),
}
