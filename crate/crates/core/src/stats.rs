//! Estimators over simulated ensembles.

use alloc::vec;
use alloc::vec::Vec;

use crate::absorber::{CorrelationSums, EnsembleResult, DETECTOR_PAIRS};
use crate::detector::ClickRecord;
use crate::error::{Error, Result};

/// Value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub sem: f64,
}

impl Estimate {
    /// Distance from `target` in units of the standard error.
    pub fn z(&self, target: f64) -> f64 {
        (self.value - target) / self.sem
    }
}

/// Histogram of non-negative integer outcomes; index is the outcome.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountHistogram(Vec<u64>);

impl CountHistogram {
    pub fn from_samples<I: IntoIterator<Item = u64>>(samples: I) -> Self {
        let mut h = Self::default();
        for s in samples {
            h.add(s);
        }
        h
    }

    pub fn add(&mut self, value: u64) {
        self.add_n(value, 1);
    }

    pub fn add_n(&mut self, value: u64, n: u64) {
        let i = value as usize;
        if i >= self.0.len() {
            self.0.resize(i + 1, 0);
        }
        self.0[i] += n;
    }

    pub fn count(&self, value: u64) -> u64 {
        self.0.get(value as usize).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn merge_from(&mut self, other: &Self) {
        if other.0.len() > self.0.len() {
            self.0.resize(other.0.len(), 0);
        }
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    fn moments(&self) -> (u128, u128, u128) {
        self.0
            .iter()
            .enumerate()
            .fold((0, 0, 0), |(n, s1, s2), (v, &c)| {
                let (v, c) = (v as u128, u128::from(c));
                (n + c, s1 + c * v, s2 + c * v * v)
            })
    }

    pub fn mean(&self) -> Result<f64> {
        let (n, s1, _) = self.moments();
        if n == 0 {
            return Err(Error::Empty);
        }
        Ok(s1 as f64 / n as f64)
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> Result<f64> {
        let (n, s1, s2) = self.moments();
        if n < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: n as usize,
            });
        }
        // n*s2 - s1^2 is exact in integers
        let num = n * s2 - s1 * s1;
        Ok(num as f64 / (n as f64 * (n - 1) as f64))
    }

    pub fn mean_estimate(&self) -> Result<Estimate> {
        let n = self.total();
        let var = self.variance()?;
        Ok(Estimate {
            value: self.mean()?,
            sem: libm::sqrt(var / n as f64),
        })
    }
}

/// Mandel-Q parameter `Var(n)/<n> - 1` with the unbiased sample variance.
pub fn mandel_q(hist: &CountHistogram) -> Result<f64> {
    let mean = hist.mean()?;
    if mean == 0.0 {
        return Err(Error::ZeroMean);
    }
    Ok(hist.variance()? / mean - 1.0)
}

/// Ratio of Mandel-Q to the mean; `-1` for any Bernoulli variable.
pub fn q_over_mean(hist: &CountHistogram) -> Result<f64> {
    Ok(mandel_q(hist)? / hist.mean()?)
}

/// Standard error of the mean, sample standard deviation over `sqrt(n)`.
pub fn sem(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let ss: f64 = samples.iter().map(|x| (x - mean) * (x - mean)).sum();
    Ok(libm::sqrt(ss / (nf - 1.0) / nf))
}

/// `t * n_in - <N_out>`, the number of photons removed beyond linear loss.
pub fn photon_deficit(ens: &EnsembleResult, n_in: f64, t: f64) -> Result<Estimate> {
    let out = ens.out_totals.mean_estimate()?;
    Ok(Estimate {
        value: t * n_in - out.value,
        sem: out.sem,
    })
}

/// Mean photons per bin before and after the absorber.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseBin {
    pub in_rate: f64,
    pub out_rate: f64,
    /// `out_rate / in_rate`, undefined for empty input bins.
    pub transmission: Option<f64>,
    /// Standard error of `out_rate`.
    pub out_sem: f64,
}

pub fn pulse_shape(ens: &EnsembleResult) -> Result<Vec<PulseBin>> {
    if ens.shots == 0 {
        return Err(Error::NoShots);
    }
    let n = ens.shots as f64;
    Ok((0..ens.bins)
        .map(|i| {
            let in_rate = ens.in_bin_sum[i] as f64 / n;
            let out_rate = ens.out_bin_sum[i] as f64 / n;
            let var = if ens.shots > 1 {
                (ens.out_bin_sq[i] as f64 - n * out_rate * out_rate) / (n - 1.0)
            } else {
                0.0
            };
            PulseBin {
                in_rate,
                out_rate,
                transmission: (in_rate > 0.0).then(|| out_rate / in_rate),
                out_sem: libm::sqrt(var.max(0.0) / n),
            }
        })
        .collect())
}

/// Mean of the defined per-bin transmissions over `bins`.
pub fn mean_transmission(shape: &[PulseBin], bins: core::ops::Range<usize>) -> Option<f64> {
    let vals: Vec<f64> = shape[bins].iter().filter_map(|b| b.transmission).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

/// Time-resolved intensity correlation averaged over all counter pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct G2Matrix {
    /// Cell edges in µs (`cells + 1` entries).
    pub edges: Vec<f64>,
    /// Row-major `g2(t1, t2)`; `None` where a marginal rate vanishes.
    pub values: Vec<Option<f64>>,
    /// Click pairs contributing to each cell, summed over counter pairs and
    /// both time orderings.
    pub n_pairs: Vec<u64>,
    /// Mean clicks per shot in each cell, summed over counters.
    pub marginals: Vec<f64>,
    /// Jackknife standard errors, when estimated from batches.
    pub sigma: Option<Vec<Option<f64>>>,
}

impl G2Matrix {
    pub fn cells(&self) -> usize {
        self.marginals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.cells() + j]
    }

    pub fn sigma(&self, i: usize, j: usize) -> Option<f64> {
        self.sigma.as_ref().and_then(|s| s[i * self.cells() + j])
    }
}

/// Pair-averaged, symmetrised g2 matrix from accumulated click sums.
/// `bin_width` (µs) only sets the cell edges.
pub fn g2_matrix(ens: &EnsembleResult, bin_width: f64) -> Result<G2Matrix> {
    let corr = correlations(ens)?;
    let values = g2_values(corr, ens.shots);
    let cells = corr.cells;
    let mut n_pairs = vec![0u64; cells * cells];
    for i in 0..cells {
        for j in 0..cells {
            n_pairs[i * cells + j] = corr
                .pair_products
                .iter()
                .map(|p| p[i * cells + j] + p[j * cells + i])
                .sum();
        }
    }
    let n = ens.shots as f64;
    let marginals = (0..cells)
        .map(|i| corr.detector_sums.iter().map(|d| d[i]).sum::<u64>() as f64 / n)
        .collect();
    let cell_width = bin_width * corr.cell_bins as f64;
    Ok(G2Matrix {
        edges: (0..=cells)
            .map(|k| (k as f64 * cell_width).min(ens.bins as f64 * bin_width))
            .collect(),
        values,
        n_pairs,
        marginals,
        sigma: None,
    })
}

/// Mean of the defined g2 cells with both times in `cells` (each unordered
/// cell pair counted once).
pub fn g2_block_mean(ens: &EnsembleResult, cells: core::ops::Range<usize>) -> Result<f64> {
    let corr = correlations(ens)?;
    let values = g2_values(corr, ens.shots);
    let n = corr.cells;
    let (mut sum, mut k) = (0.0, 0usize);
    for i in cells.clone() {
        for j in i..cells.end {
            if let Some(g) = values[i * n + j] {
                sum += g;
                k += 1;
            }
        }
    }
    if k == 0 {
        return Err(Error::Degenerate("no defined g2 cells in block"));
    }
    Ok(sum / k as f64)
}

/// g2 matrix of the merged batches, with jackknife errors over the batches.
pub fn g2_matrix_with_errors(batches: &[EnsembleResult], bin_width: f64) -> Result<G2Matrix> {
    let total = crate::absorber::merge_all(batches)?;
    let mut g2 = g2_matrix(&total, bin_width)?;
    let errs = jackknife_vec(batches, |e| Ok(g2_values(correlations(e)?, e.shots)))?;
    g2.sigma = Some(errs.into_iter().map(|e| e.map(|e| e.sem)).collect());
    Ok(g2)
}

/// g2 matrix computed directly from per-shot click records.
pub fn g2_from_clicks(
    clicks: &[ClickRecord],
    cell_bins: usize,
    bin_width: f64,
) -> Result<G2Matrix> {
    let first = clicks.first().ok_or(Error::Empty)?;
    let bins = first.detectors[0].len();
    let mut ens = EnsembleResult::empty(bins, Some(cell_bins));
    let corr = ens.correlations.as_mut().ok_or(Error::Empty)?;
    for c in clicks {
        corr.record(c);
    }
    ens.shots = clicks.len() as u64;
    g2_matrix(&ens, bin_width)
}

fn correlations(ens: &EnsembleResult) -> Result<&CorrelationSums> {
    if ens.shots == 0 {
        return Err(Error::Empty);
    }
    ens.correlations.as_ref().ok_or(Error::InvalidParameter {
        name: "g2_cell_bins",
        reason: "correlations were not accumulated",
    })
}

fn g2_values(corr: &CorrelationSums, shots: u64) -> Vec<Option<f64>> {
    let cells = corr.cells;
    let n = shots as f64;
    let ordered = |pair: usize, i: usize, j: usize| -> Option<f64> {
        let (a, b) = DETECTOR_PAIRS[pair];
        let ma = corr.detector_sums[a][i];
        let mb = corr.detector_sums[b][j];
        (ma > 0 && mb > 0)
            .then(|| corr.pair_products[pair][i * cells + j] as f64 * n / (ma as f64 * mb as f64))
    };
    let mut out = vec![None; cells * cells];
    for i in 0..cells {
        for j in 0..cells {
            let (mut sum, mut k) = (0.0, 0u32);
            for pair in 0..DETECTOR_PAIRS.len() {
                for g in [ordered(pair, i, j), ordered(pair, j, i)]
                    .into_iter()
                    .flatten()
                {
                    sum += g;
                    k += 1;
                }
            }
            out[i * cells + j] = (k > 0).then(|| sum / f64::from(k));
        }
    }
    out
}

/// Delete-one-batch jackknife of a scalar estimator.
pub fn jackknife<F>(batches: &[EnsembleResult], estimator: F) -> Result<Estimate>
where
    F: Fn(&EnsembleResult) -> Result<f64>,
{
    let v = jackknife_vec(batches, |e| Ok(vec![Some(estimator(e)?)]))?;
    v.into_iter()
        .next()
        .flatten()
        .ok_or(Error::Degenerate("estimator undefined"))
}

/// Delete-one-batch jackknife of a vector of estimates; entries undefined in
/// the full sample or in any leave-one-out sample come back as `None`.
pub fn jackknife_vec<F>(batches: &[EnsembleResult], estimator: F) -> Result<Vec<Option<Estimate>>>
where
    F: Fn(&EnsembleResult) -> Result<Vec<Option<f64>>>,
{
    let k = batches.len();
    if k < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: k });
    }
    let full = estimator(&crate::absorber::merge_all(batches)?)?;
    // prefix[i] merges batches[..i], suffix[i] merges batches[i..]
    let mut prefix: Vec<Option<EnsembleResult>> = vec![None];
    for b in batches {
        let next = match prefix.last().and_then(Option::as_ref) {
            Some(p) => crate::absorber::merge(p, b)?,
            None => b.clone(),
        };
        prefix.push(Some(next));
    }
    let mut suffix: Vec<Option<EnsembleResult>> = vec![None; k + 1];
    for i in (0..k).rev() {
        suffix[i] = Some(match &suffix[i + 1] {
            Some(s) => crate::absorber::merge(&batches[i], s)?,
            None => batches[i].clone(),
        });
    }
    let mut loo = Vec::with_capacity(k);
    for i in 0..k {
        let rest = match (&prefix[i], &suffix[i + 1]) {
            (Some(p), Some(s)) => crate::absorber::merge(p, s)?,
            (Some(p), None) => p.clone(),
            (None, Some(s)) => s.clone(),
            (None, None) => unreachable!("k >= 2"),
        };
        loo.push(estimator(&rest)?);
    }
    let kf = k as f64;
    Ok(full
        .iter()
        .enumerate()
        .map(|(idx, value)| {
            let value = (*value)?;
            let vals: Option<Vec<f64>> = loo.iter().map(|l| l[idx]).collect();
            let vals = vals?;
            let mean = vals.iter().sum::<f64>() / kf;
            let ss: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
            Some(Estimate {
                value,
                sem: libm::sqrt((kf - 1.0) / kf * ss),
            })
        })
        .collect())
}
