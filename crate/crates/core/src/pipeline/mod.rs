//! End-to-end commands: cache precomputation, dataset generation,
//! estimation, training, evaluation and benchmarking.

mod commands;
mod config;
mod engine;
mod plot;
mod report;

pub use commands::{bench, estimate, eval, gen_data, precompute, run, train};
pub use config::{parse_grid, parse_list, RunConfig};
pub use engine::Engine;
pub use plot::{line_plot, Series};
pub use report::{
    build_trajectory, read_csv, write_csv, write_json, EvalReport, MethodSummary, StageTiming, Summary, Trajectory,
    TrajectoryRow,
};
