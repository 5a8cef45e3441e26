//! Scenario documents, case studies, the warm-start pipeline, output
//! formats, and the pieces the `rlvrsim` command-line tool is built from.

pub mod cases;
pub mod csvio;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod scenario;
pub mod svg;

pub use cases::{case_names, registry, run_case_study, CaseOutcome, CaseStudy};
pub use csvio::{emit_csv, parse_csv};
pub use error::{Result, RunnerError};
pub use pipeline::{run_pipeline, PipelineReport};
pub use report::{compute_bounds, BoundsDoc, CheckDoc, ReportDoc};
pub use scenario::{load_scenario, serialize_scenario};
pub use svg::emit_svg;
