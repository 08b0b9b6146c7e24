//! Monte Carlo campaigns over noise grids: adaptive sampling, bootstrap
//! intervals, the monolithic failure floor, ensembles, CSV and SVG output.

mod config;
mod run;
mod stats;
mod svg;

pub use config::{CodeFamily, DropoutRule, ExperimentConfig, Mode, ShotPolicy};
pub use run::{
    build_code, combine_ensemble, decoder_for, point_seeds, prepare, run_experiment, run_point, sample_until,
    write_csv, Ensemble, PointFailure, PointSeeds, Prepared, ResultRow, RunReport, Tally, CSV_HEADER,
};
pub use stats::{
    analytic_floor, bootstrap_ci, bootstrap_ci_bits, bootstrap_weighted, rule_of_three, DEFAULT_LEVEL,
    DEFAULT_RESAMPLES,
};
pub use svg::{plot_svg, Series};
