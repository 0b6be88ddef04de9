//! Scenarios, the closed-loop episode harness, batch runs and field export
//! on top of `ogm-cbf-core`.

pub mod error;
pub mod harness;
pub mod io;
pub mod scenario;

pub use error::NavError;
pub use harness::{run_batch, run_episode, BatchSummary, Episode, EpisodeMetrics, Stage, StageObserver, TrajectoryLog};
pub use io::export_fields;
pub use scenario::Scenario;
