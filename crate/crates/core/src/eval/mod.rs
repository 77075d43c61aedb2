//! Evaluation protocol, metrics, episode logs and static visualization.

pub mod demo;
pub mod metrics;
pub mod record;
pub mod run;
pub mod viz;

pub use demo::{tagd_demo, GroupKind, TagdDemoConfig, TagdDemoReport, TagdDemoRow};
pub use metrics::MetricsSummary;
pub use record::{read_records, write_record, EpisodeRecord, RecordDetail, RecordLine, StepEntry, RECORD_SCHEMA_VERSION};
pub use run::{
    run_episode, run_eval, run_robustness, run_sweep, summarize, Decision, EvalReport, Policy, RobustnessReport,
    ScriptedPolicy, SuiteConfig, SweepAxis, SweepPoint,
};
pub use viz::{export_visualization, intensities, write_visualization, Visualization};
