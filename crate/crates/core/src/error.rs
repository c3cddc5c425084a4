use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },
    #[error("pulse has no time bins (duration / bin width rounds to zero)")]
    NoBins,
    #[error("ensemble needs at least one shot")]
    NoShots,
    #[error("cascade needs at least one stage")]
    NoStages,
    #[error("bin structure mismatch: {left} vs {right}")]
    BinMismatch { left: usize, right: usize },
    #[error("statistic undefined for zero mean")]
    ZeroMean,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("empty input")]
    Empty,
    #[error("degenerate data: {0}")]
    Degenerate(&'static str),
    #[error("no convergence after {0} iterations")]
    NoConvergence(usize),
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "must lie in [0, 1]",
        })
    }
}
