//! The randomized method: random-time evolutions along an exponential
//! schedule.

pub mod cost;
pub mod evolve;
pub mod sampler;
pub mod schedule;

pub use cost::{query_cost, total_query_cost, QueryModel};
pub use evolve::{infidelity_from_error, rms, MinQResult, RmBatch, RmRun, RmSolver, RmStats};
pub use sampler::{PdfKind, TimeSampler};
pub use schedule::{q_lower_bound, GapModel, RmSchedule};
