//! Training runs, suites, grid search, result tables, and their CSV, SVG
//! and checkpoint outputs.

mod checkpoint;
mod config;
mod svg;
mod table;
mod train;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{ArchOverrides, ExperimentConfig};
pub use svg::{emit_svg_bars, render_svg_bars, PLOT_HEIGHT};
pub use table::{
    read_runs_csv, replicate_table, replication_configs, table_layout, write_runs_csv, GainRow,
    GainTable, ReplicateOptions, Replication, ResultTable, RunRow, TableRow, MAP_COLUMNS,
};
pub use train::{
    evaluate, expand_seeds, fit, grid_search, run_suite, train, train_with, CandidateScore,
    DataStore, Fitted, GridResult, RunRecord,
};
