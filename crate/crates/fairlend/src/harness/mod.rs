//! Experiment harness: configuration loading, orchestration and result
//! emission.

pub mod config;
pub mod csv;
pub mod experiment;
pub mod svg;

pub use config::{load_config, parse_config, preset, resolve_config, PRESET_NAMES};
pub use csv::{emit_csv, parse_csv, render_csv, CsvStream, MetricRow, CSV_HEADER, METRIC_COLUMNS};
pub use experiment::{run_experiment, ArtifactManifest, ExperimentSpec};
pub use svg::{emit_svg, render_svg, Series};
