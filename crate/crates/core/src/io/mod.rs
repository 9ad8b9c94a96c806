//! Run configuration, nodal field files, VTK output and the run driver.

pub mod config;
pub mod fields;
pub mod run;
pub mod vtk;

pub use config::RunConfig;
pub use run::{run, OutflowSummary, RunSummary};
pub use vtk::{write_vtk, VtkData, VtkField};
