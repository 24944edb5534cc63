//! End-to-end optimization loop, configuration, history and artifacts.

pub mod config;
pub mod export;
pub mod history;
pub mod run;

pub use config::{Config, HjSteps, Mode};
pub use export::Exporter;
pub use history::{compute_ci, History, IterationRecord, SolveEvent, CSV_HEADER};
pub use run::{
    evaluate_pass, run, run_detailed, velocity_grid, Benchmark, Discretization, Outcome, Pass,
    SampleResult,
};
