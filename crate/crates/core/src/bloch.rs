//! Weak-probe steady state of the ladder scheme |g> - |e> - |r>.
//!
//! All rates and detunings are ordinary frequencies in MHz with the common
//! factor 2π left implicit; times are in µs. Every formula below combines
//! quantities of the same unit, so the convention cancels, except
//! `1 / (2 tau_ryd)` which is converted with an explicit 1/2π.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

fn sq(x: f64) -> f64 {
    x * x
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicsParams {
    /// Intermediate-state detuning Δ.
    pub delta_e: f64,
    /// Two-photon detuning δ.
    pub delta_2: f64,
    /// Control Rabi frequency Ω_c.
    pub omega_c: f64,
    /// Probe Rabi frequency for one photon per µs.
    pub omega_p: f64,
    /// Intermediate-state decay rate Γ.
    pub gamma_e: f64,
    /// Lumped ground-Rydberg dephasing γ.
    pub gamma_deph: f64,
    /// Rydberg lifetime in µs; infinity removes the term.
    pub tau_ryd: f64,
    /// Resonant optical depth of the probe transition.
    pub od_b: f64,
    /// Whether the control-induced Raman decay broadens the Rydberg line.
    pub include_raman: bool,
}

impl PhysicsParams {
    /// Rb-87 ladder at Δ = 100 MHz as used for the absorber.
    pub const fn measured() -> Self {
        Self {
            delta_e: 100.0,
            delta_2: 0.0,
            omega_c: 10.0,
            omega_p: 0.033,
            gamma_e: 6.05,
            gamma_deph: 0.5,
            tau_ryd: 530.0,
            od_b: 12.5,
            include_raman: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason| Err(Error::InvalidParameter { name, reason });
        if !(self.gamma_e > 0.0) {
            return bad("gamma_e", "must be positive");
        }
        if !(self.omega_c >= 0.0) {
            return bad("omega_c", "must be non-negative");
        }
        if !(self.od_b >= 0.0) {
            return bad("od_b", "must be non-negative");
        }
        if !(self.tau_ryd > 0.0) {
            return bad("tau_ryd", "must be positive");
        }
        if !(self.gamma_deph >= 0.0) {
            return bad("gamma_deph", "must be non-negative");
        }
        if !(self.delta_e.is_finite() && self.delta_2.is_finite() && self.omega_p >= 0.0) {
            return bad("delta_e", "detunings must be finite");
        }
        Ok(())
    }

    /// Ground-Rydberg coherence decay rate:
    /// `γ + γ_Raman / 2 + 1 / (2 τ_Ryd)`.
    pub fn coherence_decay(&self) -> f64 {
        let raman = if self.include_raman && self.delta_e != 0.0 {
            sq(self.omega_c / (2.0 * self.delta_e)) * self.gamma_e
        } else {
            0.0
        };
        let lifetime = if self.tau_ryd.is_finite() {
            1.0 / (2.0 * self.tau_ryd) / (2.0 * PI)
        } else {
            0.0
        };
        self.gamma_deph + raman / 2.0 + lifetime
    }

    pub fn control_off(&self) -> Self {
        Self {
            omega_c: 0.0,
            ..*self
        }
    }
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self::measured()
    }
}

/// Cloud and beam geometry. Descriptive only; nothing in the model depends on
/// it except the blockade check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentGeometry {
    pub atom_number: u64,
    pub sigma_z: f64,
    pub sigma_r: f64,
    pub waist_probe: f64,
    pub waist_control: f64,
    pub blockade_radius: f64,
    pub temperature_uk: f64,
}

impl ExperimentGeometry {
    pub const fn measured() -> Self {
        Self {
            atom_number: 25_000,
            sigma_z: 6.0,
            sigma_r: 10.0,
            waist_probe: 6.5,
            waist_control: 14.0,
            blockade_radius: 17.0,
            temperature_uk: 8.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma_z,
            self.sigma_r,
            self.waist_probe,
            self.waist_control,
            self.blockade_radius,
            self.temperature_uk,
        ];
        if self.atom_number == 0 || all.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "geometry",
                reason: "all sizes and the atom number must be positive",
            });
        }
        Ok(())
    }

    /// The single-excitation picture needs the blockade to cover the cloud.
    pub fn blockade_covers_cloud(&self) -> bool {
        self.blockade_radius > self.sigma_z.max(self.sigma_r)
    }
}

impl Default for ExperimentGeometry {
    fn default() -> Self {
        Self::measured()
    }
}

/// Raman decay of the Rydberg state through the detuned intermediate state,
/// `(Ω_c / 2Δ)² Γ`.
pub fn raman_decay_rate(omega_c: f64, delta_e: f64, gamma_e: f64) -> Result<f64> {
    if delta_e == 0.0 {
        return Err(Error::InvalidParameter {
            name: "delta_e",
            reason: "Raman rate diverges at zero detuning",
        });
    }
    Ok(sq(omega_c / (2.0 * delta_e)) * gamma_e)
}

/// Rabi frequency of the symmetric collective state, `sqrt(N) Ω`.
pub fn collective_rabi(omega_single: f64, n_atoms: u64) -> Result<f64> {
    if n_atoms == 0 {
        return Err(Error::InvalidParameter {
            name: "n_atoms",
            reason: "must be at least one",
        });
    }
    Ok(libm::sqrt(n_atoms as f64) * omega_single)
}

/// Dimensionless probe response
/// `L = (Γ/2) / (Γ/2 - iΔ_p + (Ω_c/2)² / (γ_gr - iδ))`; the field transmission
/// through the cloud is `exp(-OD Re L)`.
pub fn susceptibility_lorentzian(
    phys: &PhysicsParams,
    probe_detuning: f64,
    two_photon_detuning: f64,
) -> Complex64 {
    response(
        phys.gamma_e,
        phys.omega_c,
        probe_detuning,
        two_photon_detuning,
        phys.coherence_decay(),
    )
}

/// Same as [`susceptibility_lorentzian`] with an explicit coherence decay.
pub fn response(
    gamma_e: f64,
    omega_c: f64,
    probe_detuning: f64,
    two_photon_detuning: f64,
    gamma_gr: f64,
) -> Complex64 {
    let half = Complex64::new(gamma_e / 2.0, 0.0);
    let coupling = if omega_c == 0.0 {
        Complex64::new(0.0, 0.0)
    } else if gamma_gr == 0.0 && two_photon_detuning == 0.0 {
        // perfect dark state
        return Complex64::new(0.0, 0.0);
    } else {
        Complex64::new(sq(omega_c / 2.0), 0.0) / Complex64::new(gamma_gr, -two_photon_detuning)
    };
    half / (half - Complex64::new(0.0, probe_detuning) + coupling)
}

pub fn transmission(phys: &PhysicsParams, probe_detuning: f64, two_photon_detuning: f64) -> f64 {
    libm::exp(-phys.od_b * susceptibility_lorentzian(phys, probe_detuning, two_photon_detuning).re)
}

/// `(δ, T(δ))` over the grid at fixed probe detuning.
pub fn transmission_spectrum(
    phys: &PhysicsParams,
    probe_detuning: f64,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::Empty);
    }
    Ok(grid
        .iter()
        .map(|&d| (d, transmission(phys, probe_detuning, d)))
        .collect())
}

/// Evenly spaced grid of `points` values spanning `[-span, span]`.
pub fn symmetric_grid(span: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => alloc::vec![0.0],
        _ => (0..points)
            .map(|i| -span + 2.0 * span * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Probability to scatter a probe photon off the intermediate state with the
/// control field off.
pub fn scattering_probability(phys: &PhysicsParams, probe_detuning: f64) -> f64 {
    1.0 - transmission(&phys.control_off(), probe_detuning, 0.0)
}

/// Extra absorption on two-photon resonance over the control-off background,
/// `T_off - T_on(δ = 0)`, at the configured intermediate detuning.
///
/// A homogeneous-medium estimate; it does not reproduce calibrated
/// conversion probabilities of an inhomogeneous cloud.
pub fn conversion_probability(phys: &PhysicsParams) -> f64 {
    let off = transmission(&phys.control_off(), phys.delta_e, 0.0);
    let on = transmission(phys, phys.delta_e, 0.0);
    (off - on).max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaFit {
    pub gamma: f64,
    /// Sum of squared transmission residuals at the optimum.
    pub residual: f64,
    pub iterations: usize,
}

const FIT_MAX_ITER: usize = 500;
const FIT_REL_TOL: f64 = 1e-6;
const GAMMA_MIN: f64 = 1e-9;
const GAMMA_MAX: f64 = 1e6;

/// Least-squares estimate of the dephasing rate γ from a measured spectrum.
///
/// One-dimensional search in `ln γ`: geometric bracketing from the current
/// `phys.gamma_deph`, then golden-section refinement to a relative width of
/// 1e-6.
pub fn fit_dephasing(
    measured: &[(f64, f64)],
    phys: &PhysicsParams,
    probe_detuning: f64,
) -> Result<GammaFit> {
    if measured.len() < 5 {
        return Err(Error::TooFewSamples {
            needed: 5,
            got: measured.len(),
        });
    }
    let (lo, hi) = measured
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, t)| {
            (lo.min(t), hi.max(t))
        });
    if !(hi - lo > 1e-12) {
        return Err(Error::Degenerate("flat spectrum"));
    }
    let cost = |x: f64| -> f64 {
        let p = PhysicsParams {
            gamma_deph: libm::exp(x),
            ..*phys
        };
        measured
            .iter()
            .map(|&(d, t)| {
                let r = transmission(&p, probe_detuning, d) - t;
                r * r
            })
            .sum()
    };
    let (x_min, x_max) = (libm::log(GAMMA_MIN), libm::log(GAMMA_MAX));
    let start = if phys.gamma_deph > 0.0 {
        libm::log(phys.gamma_deph)
    } else {
        libm::log(0.5)
    };
    let mut iterations = 0;

    // bracket: find a < b < c with f(b) below both ends
    let mut step = core::f64::consts::LN_2;
    let (mut a, mut b) = (start, start + step);
    let (mut fa, mut fb) = (cost(a), cost(b));
    if fb > fa {
        core::mem::swap(&mut a, &mut b);
        core::mem::swap(&mut fa, &mut fb);
        step = -step;
    }
    let mut c = b + step;
    let mut fc = cost(c);
    while fc < fb {
        iterations += 1;
        if iterations > FIT_MAX_ITER || !(x_min..=x_max).contains(&c) {
            return Err(Error::NoConvergence(iterations));
        }
        step *= 1.6;
        a = b;
        b = c;
        fb = fc;
        c = b + step;
        fc = cost(c);
    }
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };

    // golden section on [lo, hi]
    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while hi - lo > FIT_REL_TOL {
        iterations += 1;
        if iterations > FIT_MAX_ITER {
            return Err(Error::NoConvergence(iterations));
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = cost(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    Ok(GammaFit {
        gamma: libm::exp(x),
        residual: cost(x),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raman_rate() {
        assert_eq!(raman_decay_rate(0.0, 100.0, 6.05).unwrap(), 0.0);
        let r = raman_decay_rate(10.0, 100.0, 6.05).unwrap();
        assert!((r - 0.015_125).abs() < 1e-15);
        let r2 = raman_decay_rate(10.0, 200.0, 6.05).unwrap();
        assert!((r2 - r / 4.0).abs() < 1e-18);
        assert!(raman_decay_rate(10.0, 0.0, 6.05).is_err());
    }

    #[test]
    fn collective_enhancement() {
        assert_eq!(collective_rabi(0.033, 1).unwrap(), 0.033);
        assert_eq!(collective_rabi(0.033, 4).unwrap(), 0.066);
        assert!((collective_rabi(0.033, 25_000).unwrap() - 5.22).abs() < 5e-3);
        assert!(collective_rabi(0.033, 0).is_err());
    }

    #[test]
    fn two_level_resonance() {
        let p = PhysicsParams::measured().control_off();
        let l = susceptibility_lorentzian(&p, 0.0, 0.0);
        assert_eq!(l, Complex64::new(1.0, 0.0));
        assert!((transmission(&p, 0.0, 0.0) - libm::exp(-12.5)).abs() < 1e-18);
    }

    #[test]
    fn ideal_dark_state_is_transparent() {
        let l = response(6.05, 10.0, 100.0, 0.0, 0.0);
        assert_eq!(l, Complex64::new(0.0, 0.0));
        let p = PhysicsParams {
            gamma_deph: 0.0,
            tau_ryd: f64::INFINITY,
            include_raman: false,
            ..PhysicsParams::measured()
        };
        assert_eq!(transmission(&p, 100.0, 0.0), 1.0);
    }

    #[test]
    fn detuned_background_scattering() {
        let p = PhysicsParams::measured();
        let re = susceptibility_lorentzian(&p.control_off(), 100.0, 0.0).re;
        // (Γ/2)^2 / ((Γ/2)^2 + Δ^2)
        let expected = sq(3.025) / (sq(3.025) + 1e4);
        assert!((re - expected).abs() < 1e-15);
        assert!((re - 9.14e-4).abs() < 1e-6);
        assert!((scattering_probability(&p, 100.0) - 0.0114).abs() < 1e-4);
    }

    #[test]
    fn conversion_probability_estimates() {
        let p = PhysicsParams::measured();
        let c = conversion_probability(&p);
        assert!((0.13..=0.15).contains(&c), "{c}");
        let dark = PhysicsParams {
            gamma_deph: 0.0,
            tau_ryd: f64::INFINITY,
            include_raman: false,
            ..p
        };
        assert_eq!(conversion_probability(&dark), 0.0);
        let thicker = PhysicsParams { od_b: 20.0, ..p };
        assert!(conversion_probability(&thicker) > c);
    }

    #[test]
    fn empty_grid_rejected() {
        assert_eq!(
            transmission_spectrum(&PhysicsParams::measured(), 100.0, &[]).unwrap_err(),
            Error::Empty
        );
    }

    #[test]
    fn flat_or_short_data_rejected() {
        let p = PhysicsParams::measured();
        let flat: Vec<(f64, f64)> = symmetric_grid(5.0, 21)
            .into_iter()
            .map(|d| (d, 1.0))
            .collect();
        assert!(matches!(
            fit_dephasing(&flat, &p, 100.0),
            Err(Error::Degenerate(_))
        ));
        assert!(fit_dephasing(&flat[..3], &p, 100.0).is_err());
    }
}
