//! Library half of the `fgromov` binary: spec-file ingestion, the command
//! implementations, reduction traces, and report emission. The binary is a
//! thin argument-parsing shell over these.

pub mod commands;
pub mod report;
pub mod spec;
pub mod trace;

pub use commands::{
    cmd_certify_nilpotent, cmd_dichotomy, cmd_growth, cmd_harmonic, cmd_kleiner_dim, cmd_reduce,
    cmd_slowg, milnor_bound_check, Ctx, ReduceOptions,
};
pub use report::{emit_report, Report};
pub use spec::{parse_group_spec, parse_matrix_file, GroupSpecFile};
pub use trace::ReductionTrace;
