//! Dataset ingestion, synthetic instances, run specifications and output
//! files.

pub mod libsvm;
pub mod runspec;
pub mod synthetic;
pub mod trace_csv;

pub use libsvm::{load_libsvm, parse_libsvm, write_libsvm};
pub use runspec::{BuiltProblem, DataSource, FStar, RegKind, RunSpec};
pub use synthetic::{gen_synthetic, Synthetic, SyntheticKind, SyntheticSpec};
pub use trace_csv::{load_partition, read_vector, render_trace, write_trace, write_vector, TraceFormat, TRACE_HEADER};
