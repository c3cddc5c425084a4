//! Photon and ion detection: efficiency thinning, HBT splitting to four
//! single-photon counters, optional dark counts and dead time, and MCP ion
//! detection.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{check_unit, Error, Result};
use crate::pulse::{multinomial, BinnedCounts};

/// Number of photon counters (two HBT setups with two detectors each).
pub const DETECTORS: usize = 4;

/// Detection chain parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorConfig {
    /// Photon detection efficiency applied before splitting.
    pub eta_probe: f64,
    /// MCP detection efficiency for field-ionised Rydberg atoms.
    pub eta_ion: f64,
    /// Branch probabilities of the splitter tree, one per counter.
    pub split: [f64; DETECTORS],
    /// Counter dead time in µs; `None` disables it.
    pub dead_time: Option<f64>,
    /// Dark count rate per counter in counts per µs; `None` disables it.
    pub dark_rate: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            eta_probe: 1.0,
            eta_ion: 0.29,
            split: [0.25; DETECTORS],
            dead_time: None,
            dark_rate: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit("eta_probe", self.eta_probe)?;
        check_unit("eta_ion", self.eta_ion)?;
        for &p in &self.split {
            check_unit("split", p)?;
        }
        if (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "split",
                reason: "branch probabilities must sum to 1",
            });
        }
        if matches!(self.dead_time, Some(d) if !(d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "dead_time",
                reason: "must be finite and non-negative",
            });
        }
        if matches!(self.dark_rate, Some(r) if !(r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "dark_rate",
                reason: "must be finite and non-negative",
            });
        }
        Ok(())
    }
}

/// Detected clicks of one shot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClickRecord {
    pub detectors: [BinnedCounts; DETECTORS],
    pub ion_clicks: u32,
}

/// Binomial thinning: every photon survives independently with probability
/// `eta`.
pub fn thin_counts<R: Rng + ?Sized>(counts: &BinnedCounts, eta: f64, rng: &mut R) -> BinnedCounts {
    counts
        .iter()
        .map(|&c| binomial(u64::from(c), eta, rng) as u32)
        .collect::<Vec<_>>()
        .into()
}

/// Multinomial assignment of every photon to one of the four counters.
pub fn split_hbt<R: Rng + ?Sized>(
    counts: &BinnedCounts,
    cfg: &DetectorConfig,
    rng: &mut R,
) -> [BinnedCounts; DETECTORS] {
    let bins = counts.len();
    let mut out: [BinnedCounts; DETECTORS] = core::array::from_fn(|_| BinnedCounts::zeros(bins));
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let parts = multinomial(u64::from(c), &cfg.split, rng);
        for (det, k) in out.iter_mut().zip(parts) {
            det[i] = k as u32;
        }
    }
    out
}

/// Number of ion clicks from `excitations` Rydberg atoms.
pub fn detect_ions<R: Rng + ?Sized>(excitations: u32, eta_ion: f64, rng: &mut R) -> u32 {
    binomial(u64::from(excitations), eta_ion, rng) as u32
}

/// Full detection chain for one shot: thinning, splitting, dark counts,
/// dead time and ion detection. `bin_width` is in µs.
pub fn detect<R: Rng + ?Sized>(
    output: &BinnedCounts,
    excitations: u32,
    cfg: &DetectorConfig,
    bin_width: f64,
    rng: &mut R,
) -> ClickRecord {
    let thinned = if cfg.eta_probe < 1.0 {
        thin_counts(output, cfg.eta_probe, rng)
    } else {
        output.clone()
    };
    let mut detectors = split_hbt(&thinned, cfg, rng);
    if let Some(rate) = cfg.dark_rate.filter(|&r| r > 0.0) {
        for det in detectors.iter_mut() {
            add_dark_counts(det, rate * bin_width, rng);
        }
    }
    if let Some(dead) = cfg.dead_time.filter(|&d| d > 0.0) {
        for det in detectors.iter_mut() {
            apply_dead_time(det, dead, bin_width);
        }
    }
    let ion_clicks = detect_ions(excitations, cfg.eta_ion, rng);
    ClickRecord {
        detectors,
        ion_clicks,
    }
}

fn add_dark_counts<R: Rng + ?Sized>(det: &mut BinnedCounts, mean_per_bin: f64, rng: &mut R) {
    if let Ok(dist) = Poisson::new(mean_per_bin) {
        for c in det.iter_mut() {
            *c += dist.sample(rng) as u32;
        }
    }
}

/// Without sub-bin timing, a dead time shorter than a bin caps the clicks per
/// bin at `floor(bin / dead)`; a longer one allows one click per bin and
/// blanks the following `floor(dead / bin)` bins.
fn apply_dead_time(det: &mut BinnedCounts, dead: f64, bin_width: f64) {
    let blank = libm::floor(dead / bin_width) as usize;
    if blank == 0 {
        let cap = libm::floor(bin_width / dead).max(1.0) as u32;
        for c in det.iter_mut() {
            *c = (*c).min(cap);
        }
        return;
    }
    let mut dead_until = 0usize;
    for i in 0..det.len() {
        if i < dead_until {
            det[i] = 0;
        } else if det[i] > 0 {
            det[i] = 1;
            dead_until = i + 1 + blank;
        }
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).map(|d| d.sample(rng)).unwrap_or(0)
    }
}
