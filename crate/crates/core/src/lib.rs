//! Deterministic CPU + near-data-processing (NDP) system simulator and
//! offloading scheduler for LR-TDDFT kernel pipelines.
//!
//! The flow is: [`machine::MachineConfig`] describes the hardware,
//! [`workload::build_taskgraph`] produces the kernel DAG for a silicon system,
//! [`scheduler::plan`] places each task on the CPU or NDP units,
//! [`sim::simulate`] executes the placement on an analytic event model, and
//! [`experiment`] drives scenario matrices from a configuration file.

pub mod analyzer;
pub mod error;
pub mod experiment;
pub mod machine;
pub mod runtime;
pub mod scheduler;
pub mod sim;
pub mod workload;

pub use error::{Diagnostic, Result, SimError};
pub use machine::{MachineConfig, UnitClass, UnitRef};
