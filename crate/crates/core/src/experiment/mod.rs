//! The experiment layer: configuration, dataset assembly, training,
//! evaluation, retrieval, and the suite driver with its report formats.

pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod report;
pub mod retrieval;
pub mod suite;
pub mod train;

pub use config::{apply_ablation, AblationKind, DataSource, ExperimentConfig};
pub use dataset::{read_identity_file, write_identity_file, Dataset};
pub use evaluate::{evaluate, evaluate_hard_subset, router_diagnostics, SplitEval};
pub use report::{text_table, JsonRecord, JsonValue};
pub use retrieval::{retrieval_eval, retrieval_from_representations, RetrievalReport};
pub use suite::{run_suite, suite_jsonl, suite_summary, SuiteOutput, SuiteSpec};
pub use train::{train, EpochLog, TrainOutcome};
