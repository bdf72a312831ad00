//! Coverage accounting, skill-separation diagnostics, PCA, and run-artifact
//! output.

pub mod coverage;
pub mod output;
pub mod pca;

pub use coverage::{CoverageCurve, CoverageGrid, CurvePoint, SkillOverlapMatrix};
pub use output::{
    emit_outputs, field_maps, state_at_cell, write_coverage_csv, write_overlap_csv,
    write_ppm, write_skills_csv, FieldMaps,
};
pub use pca::{pca_project, PcaProjection};
