//! Experiment orchestration: configuration, training, benchmarks, sweeps
//! and report files.

pub mod catalog;
pub mod config;
pub mod report;
pub mod run;
pub mod train;

pub use catalog::{default_data_dir, preset, DATA_DIR_ENV, UCI_DATASETS, UCI_EPOCHS};
pub use config::{
    DataSource, DatasetConfig, ExperimentConfig, ModelConfig, OptimizerConfig, ReportConfig,
    SplitPlan,
};
pub use report::{emit_report, emit_sweep, load_report, load_sweep};
pub use run::{
    run_alpha_sweep, run_benchmark, run_hyperparam_sweep, RunReport, SplitResult, SweepReport,
    SweepRow,
};
pub use train::{train_ensemble, train_single, History, TrainedModel};
