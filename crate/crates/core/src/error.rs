use alloc::string::String;

use crate::kernel::Kernel;

/// Failure modes shared by every estimator, band builder and study runner.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The kernel window around `x` holds no data or only collinear data.
    #[error("degenerate kernel window at x = {x} (bandwidth {h})")]
    DegenerateWindow { x: f64, h: f64 },

    /// The design density estimate vanished at `x`; the grid reaches beyond the data.
    #[error("design density is zero at x = {x}")]
    ZeroDensity { x: f64 },

    /// Every candidate bandwidth produced a degenerate leave-one-out fit.
    #[error("all candidate bandwidths are degenerate")]
    AllDegenerate,

    /// The heteroscedastic scale is zero at a design point carrying a nonzero residual.
    #[error("zero scale estimate at design point {index} with nonzero residual")]
    ZeroScale { index: usize },

    /// The kernel has no registered sampler for the smoothed bootstrap.
    #[error("kernel {0:?} has no registered sampler")]
    UnsamplableKernel(Kernel),

    /// The requested double bootstrap exceeds the replicate budget.
    #[error("double bootstrap cost {cost} exceeds the limit {limit}")]
    CostGuard { cost: u64, limit: u64 },

    /// Too many datasets of a study failed.
    #[error("study aborted: {failed} of {total} datasets failed")]
    StudyAborted { failed: usize, total: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
