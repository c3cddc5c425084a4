//! Input pulse envelopes and coherent-state photon sampling.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Deref, DerefMut};

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{check_unit, Error, Result};

/// Tapered fraction used when no taper is configured.
pub const DEFAULT_TAPER: f64 = 0.3;

/// Input pulse: mean photon number, duration and time binning (times in µs).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSpec {
    pub mean_photons: f64,
    pub duration: f64,
    pub bin_width: f64,
    pub taper: f64,
}

impl PulseSpec {
    pub fn new(mean_photons: f64, duration: f64, bin_width: f64, taper: f64) -> Result<Self> {
        let spec = Self {
            mean_photons,
            duration,
            bin_width,
            taper,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 2 µs pulse in 50 ns bins with the default taper.
    pub fn with_mean(mean_photons: f64) -> Self {
        Self {
            mean_photons,
            duration: 2.0,
            bin_width: 0.05,
            taper: DEFAULT_TAPER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photons >= 0.0 && self.mean_photons.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "mean_photons",
                reason: "must be finite and non-negative",
            });
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: "must be positive",
            });
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "bin_width",
                reason: "must be positive",
            });
        }
        check_unit("taper", self.taper)?;
        if self.bins() == 0 {
            return Err(Error::NoBins);
        }
        Ok(())
    }

    /// Number of time bins, `round(duration / bin_width)`.
    pub fn bins(&self) -> usize {
        libm::round(self.duration / self.bin_width) as usize
    }

    /// Start time of bin `i` in µs.
    pub fn bin_start(&self, i: usize) -> f64 {
        i as f64 * self.bin_width
    }
}

/// Photon numbers per time bin.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct BinnedCounts(pub Vec<u32>);

impl BinnedCounts {
    pub fn zeros(bins: usize) -> Self {
        Self(vec![0; bins])
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }
}

impl From<Vec<u32>> for BinnedCounts {
    fn from(v: Vec<u32>) -> Self {
        Self(v)
    }
}

impl Deref for BinnedCounts {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl DerefMut for BinnedCounts {
    fn deref_mut(&mut self) -> &mut [u32] {
        &mut self.0
    }
}

/// Tukey (tapered cosine) window sampled at bin centres and normalised to
/// unit sum.
///
/// `taper` is the fraction of the pulse spent in the two cosine ramps, so
/// `0` is rectangular and `1` is a Hann window.
pub fn tukey_envelope(spec: &PulseSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let bins = spec.bins();
    let alpha = spec.taper;
    let raw: Vec<f64> = (0..bins)
        .map(|i| {
            // distance of the bin centre from the nearer pulse edge, as a
            // fraction of the duration; mirrored bins get identical values
            let j = i.min(bins - 1 - i);
            let x = (j as f64 + 0.5) / bins as f64;
            if x < alpha / 2.0 {
                0.5 * (1.0 - libm::cos(2.0 * PI * x / alpha))
            } else {
                1.0
            }
        })
        .collect();
    let norm: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / norm).collect())
}

/// Coherent input pulse: each bin is an independent Poisson draw with mean
/// `mean_photons * w_i`.
pub fn sample_input<R: Rng + ?Sized>(spec: &PulseSpec, rng: &mut R) -> Result<BinnedCounts> {
    let weights = tukey_envelope(spec)?;
    Ok(sample_with_weights(spec.mean_photons, &weights, rng))
}

pub(crate) fn sample_with_weights<R: Rng + ?Sized>(
    mean: f64,
    weights: &[f64],
    rng: &mut R,
) -> BinnedCounts {
    weights
        .iter()
        .map(|&w| {
            let lambda = mean * w;
            if lambda > 0.0 {
                // lambda > 0 and finite, so construction cannot fail
                Poisson::new(lambda)
                    .map(|d| d.sample(rng) as u32)
                    .unwrap_or(0)
            } else {
                0
            }
        })
        .collect::<Vec<_>>()
        .into()
}

/// Number-state input: exactly `photons` photons spread multinomially over
/// the envelope.
pub fn sample_fock<R: Rng + ?Sized>(
    spec: &PulseSpec,
    photons: u32,
    rng: &mut R,
) -> Result<BinnedCounts> {
    let weights = tukey_envelope(spec)?;
    Ok(sample_fock_with_weights(photons, &weights, rng))
}

pub(crate) fn sample_fock_with_weights<R: Rng + ?Sized>(
    photons: u32,
    weights: &[f64],
    rng: &mut R,
) -> BinnedCounts {
    multinomial(u64::from(photons), weights, rng)
        .into_iter()
        .map(|c| c as u32)
        .collect::<Vec<_>>()
        .into()
}

/// Multinomial split of `n` items over `probs` via conditional binomials.
pub(crate) fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    for (slot, &p) in out.iter_mut().zip(probs) {
        if left == 0 {
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = if q >= 1.0 {
            left
        } else {
            Binomial::new(left, q).map(|d| d.sample(rng)).unwrap_or(0)
        };
        *slot = k;
        left -= k;
        mass -= p;
    }
    out
}
