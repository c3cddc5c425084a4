//! Parallel shot execution. Shots are cut into a fixed set of index ranges,
//! so results are identical for any thread count.

use std::ops::Range;

use anyhow::Result;
use rayon::prelude::*;
use rydabs_core::absorber::{merge_all, CascadeExperiment, CascadeResult};
use rydabs_core::{EnsembleResult, Experiment};

/// Splits `0..shots` into at most `batches` contiguous, near-equal ranges.
pub fn batch_ranges(shots: u64, batches: usize) -> Vec<Range<u64>> {
    let k = (batches as u64).clamp(1, shots.max(1));
    (0..k)
        .map(|i| (shots * i / k)..(shots * (i + 1) / k))
        .filter(|r| !r.is_empty())
        .collect()
}

/// One ensemble per batch, in batch order.
pub fn run_batches(
    exp: &Experiment,
    shots: u64,
    seed: u64,
    batches: usize,
) -> Result<Vec<EnsembleResult>> {
    if shots == 0 {
        return Err(rydabs_core::Error::NoShots.into());
    }
    exp.validate()?;
    batch_ranges(shots, batches)
        .into_par_iter()
        .map(|r| exp.run_range(seed, r).map_err(Into::into))
        .collect()
}

pub fn run(exp: &Experiment, shots: u64, seed: u64, batches: usize) -> Result<EnsembleResult> {
    Ok(merge_all(&run_batches(exp, shots, seed, batches)?)?)
}

pub fn run_cascade(
    exp: &CascadeExperiment,
    shots: u64,
    seed: u64,
    batches: usize,
) -> Result<CascadeResult> {
    if shots == 0 {
        return Err(rydabs_core::Error::NoShots.into());
    }
    exp.validate()?;
    let parts: Vec<CascadeResult> = batch_ranges(shots, batches)
        .into_par_iter()
        .map(|r| exp.run_range(seed, r))
        .collect::<Result<_, _>>()?;
    let mut it = parts.into_iter();
    let mut acc = it.next().expect("at least one batch");
    for p in it {
        acc.merge_from(&p)?;
    }
    Ok(acc)
}
