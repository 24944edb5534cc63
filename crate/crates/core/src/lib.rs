//! Robust level-set shape optimization of elastic structures under random
//! loading.
//!
//! The crate couples linear and quadratic finite elements on adaptively
//! bisected triangulations, Karhunen–Loève random fields, a Lax–Friedrichs
//! level-set evolution and goal-oriented error estimation into one adaptive
//! optimization loop ([`driver::run`]).

pub mod control;
pub mod driver;
pub mod error;
pub mod estimators;
pub mod fem;
pub mod mesh;
pub mod objective;
pub mod level_set;
pub mod random_field;
pub mod vtk;

pub use error::{Error, Result};
