//! Topology learning: flatten a mixture model into a single-Gaussian
//! lattice, carve its transition support by threshold pruning, and
//! optionally feed trained emissions back for another round.

mod feedback;
mod flatten;
mod pipeline;
mod prune;
mod sweep;

pub use feedback::feedback_emissions;
pub use flatten::{flatten_model, FlattenMode};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutcome, Provenance, SweepSummary};
pub use prune::prune;
pub use sweep::{decode_and_score, sweep_threshold, EpsilonRecord, SweepConfig, SweepResult};
