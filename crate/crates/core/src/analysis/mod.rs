//! Auxiliary processes built from the same uniforms as the sampler: the
//! spontaneous trace Z, its block rescaling Z̄, the dominating chains D^{(n)},
//! and hidden and visible regeneration times.

mod dprocess;
mod regeneration;
mod renewal;
mod trace;

use thiserror::Error;

use crate::cftp::CftpError;
use crate::model::ModelError;
use crate::partition::PartitionError;
use crate::random::RandomError;

pub use dprocess::{coalescence_violations, monotonicity_violations, DProcess};
pub use regeneration::{
    hidden_regeneration, block_bound_check, theta_bar, theta_bar_in, theta_from_lengths, theta_prime, theta_prime_in,
    visible_regeneration, Block, HiddenRegeneration, BlockBoundOutcome, VisibleRegeneration,
};
pub use renewal::{summability_diagnostic, u_f_statistics, RenewalStatistics, SummabilityReport};
pub use trace::{ellbar, ellbar_inv, sigma, RescaledTrace, SpontaneousTrace};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no admissible time found within {max_back} steps")]
    Aborted { max_back: u64 },
    #[error(transparent)]
    Source(#[from] RandomError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Cftp(#[from] CftpError),
}

/// D^{(origin)} on [origin, end] from a fresh rescaled trace.
pub fn d_process(
    source: &crate::random::IndexedUniformSource,
    origin: i64,
    end: i64,
    model: &crate::model::ContextTreeModel,
) -> Result<DProcess, AnalysisError> {
    let trace = RescaledTrace::new(source, model, origin + 1, end)?;
    Ok(DProcess::from_trace(&trace, origin, end))
}
