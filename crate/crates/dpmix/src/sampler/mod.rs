//! Blocked MCMC sampler: engine, sampler variants, label-switching moves,
//! the marginal partition score and per-sweep records.

pub mod engine;
pub mod geweke;
pub mod margpost;
pub mod moves;
pub mod record;
pub mod variant;

pub use engine::{alpha_log_conditional, ChainRunner, InitMode, SamplerConfig};
pub use record::{MemoryArchive, NullSink, SweepRecord, SweepSink};
pub use variant::SliceVariant;
