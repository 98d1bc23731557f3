//! AUC, the benchmark harness, the toy data generator and score grids.

mod auc;
mod bench;
mod grid;
mod toy;

pub use auc::auc;
pub use bench::{
    read_cells_csv, run_benchmark, run_benchmark_resume, run_trial, Aggregate, BenchConfig, Cell, EvalReport,
};
pub use grid::{contour_grid, write_grid_csv, GridPoint, Scorer};
pub use toy::{toy_dataset, toy_dataset_with, ToyConfig};
