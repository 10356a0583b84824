//! Pipeline, dictionary and scheme files for the toy exchange, compiled in so
//! the command-line tool works without a config directory.

use std::path::Path;

use crate::pipeline::{PipelineConfig, PipelineError};

pub const BUILTIN_FILES: [(&str, &str); 6] = [
    ("metamer_scheme.xml", include_str!("../../configs/metamer_scheme.xml")),
    ("plantgl_to_groimp.xml", include_str!("../../configs/plantgl_to_groimp.xml")),
    ("groimp_to_plantgl.xml", include_str!("../../configs/groimp_to_plantgl.xml")),
    ("water_import.xml", include_str!("../../configs/water_import.xml")),
    ("water_export.xml", include_str!("../../configs/water_export.xml")),
    ("status_import.xml", include_str!("../../configs/status_import.xml")),
];

pub fn builtin_file(name: &str) -> Option<&'static str> {
    BUILTIN_FILES.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Loads one of the built-in pipelines, e.g. `water_import.xml`.
pub fn builtin_pipeline(name: &str) -> Result<PipelineConfig, PipelineError> {
    let text = builtin_file(name).ok_or_else(|| PipelineError::Config(format!("no built-in pipeline {name:?}")))?;
    let resolve = |rel: &str| builtin_file(rel).map(str::to_string).ok_or_else(|| format!("no built-in file {rel:?}"));
    PipelineConfig::from_xml(text, &resolve)
}

/// Writes the built-in files into `dir`, which must exist.
pub fn write_builtin_configs(dir: &Path) -> std::io::Result<()> {
    for (name, text) in BUILTIN_FILES {
        std::fs::write(dir.join(name), text)?;
    }
    Ok(())
}
