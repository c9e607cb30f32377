//! The asynchronous solver, its sequential reference and the delay harness.

pub mod config;
pub mod engine;
pub mod harness;
pub mod reference;
pub mod shared;
pub mod step;
pub mod trace;

pub use config::{
    resolve_gamma, DelayInjection, GammaChoice, GammaSource, ResolvedGamma, SolverConfig, AUTO_RHO, AUTO_SAFETY,
};
pub use engine::{run, RunResult, DIVERGENCE_FACTOR};
pub use harness::{simulate, CellRead, EpochLog, ReadRecord, SimulationOptions, SimulationResult, WriteEvent};
pub use reference::{
    run_sequential, solve_high_accuracy, solve_high_accuracy_capped, HighAccuracy, ReferenceResult, SequentialStepper,
};
pub use shared::SharedVector;
pub use step::{compute_block_step, draw_sample, vr_block_gradient, BlockStep, EpochContext, ReadBuffer, Sample};
pub use trace::{StalenessReport, Trace, TraceRecord, HISTOGRAM_BUCKETS};
