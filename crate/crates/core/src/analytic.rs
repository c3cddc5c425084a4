//! Closed-form results for an absorber that takes at most one photon.

use crate::error::{check_unit, Error, Result};

/// Ion statistics of a perfectly blockaded medium.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdealIonStats {
    pub mean_ions: f64,
    pub mandel_q: f64,
    pub q_over_mean: f64,
}

fn check_inputs(n_in: f64, t: f64, p_ryd: f64) -> Result<()> {
    if !(n_in >= 0.0 && n_in.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "n_in",
            reason: "must be finite and non-negative",
        });
    }
    check_unit("t", t)?;
    check_unit("p_ryd", p_ryd)
}

/// Probability that a coherent pulse of mean `n_in` creates an excitation.
pub fn p_excitation(n_in: f64, t: f64, p_ryd: f64) -> Result<f64> {
    check_inputs(n_in, t, p_ryd)?;
    Ok(-libm::expm1(-t * n_in * p_ryd))
}

/// Mean transmitted photon number, `t n + exp(-t n p) - 1`.
pub fn mean_out(n_in: f64, t: f64, p_ryd: f64) -> Result<f64> {
    check_inputs(n_in, t, p_ryd)?;
    Ok(t * n_in + libm::expm1(-t * n_in * p_ryd))
}

/// Detected-ion statistics when the single excitation is detected with
/// efficiency `eta`: the click number is Bernoulli(`eta * P1`).
pub fn ideal_ion_stats(n_in: f64, t: f64, p_ryd: f64, eta: f64) -> Result<IdealIonStats> {
    check_unit("eta", eta)?;
    let mean_ions = eta * p_excitation(n_in, t, p_ryd)?;
    if mean_ions == 0.0 {
        return Err(Error::ZeroMean);
    }
    Ok(IdealIonStats {
        mean_ions,
        mandel_q: -mean_ions,
        q_over_mean: -1.0,
    })
}

/// Total-pulse `<n(n-1)>/<n>^2` of a Poisson(`mu`) distribution with exactly
/// one photon removed (the vacuum stays vacuum), by direct summation.
pub fn subtracted_poisson_g2_total(mu: f64) -> Result<f64> {
    if !(mu > 1.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "mu",
            reason: "must be finite and greater than one",
        });
    }
    // tail beyond mu + 20 sqrt(mu) is far below 1e-12
    let k_max = libm::ceil(mu + 20.0 * libm::sqrt(mu) + 10.0) as u64;
    let ln_mu = libm::log(mu);
    let (mut mean, mut fact2) = (0.0, 0.0);
    for k in 1..=k_max {
        let kf = k as f64;
        let pmf = libm::exp(kf * ln_mu - mu - libm::lgamma(kf + 1.0));
        let n = kf - 1.0;
        mean += pmf * n;
        fact2 += pmf * n * (n - 1.0);
    }
    Ok(fact2 / (mean * mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_out_limits() {
        assert_eq!(mean_out(0.0, 0.99, 0.35).unwrap(), 0.0);
        assert_eq!(mean_out(7.0, 0.99, 0.0).unwrap(), 0.99 * 7.0);
        assert!(mean_out(-1.0, 0.99, 0.35).is_err());
        assert!(mean_out(1.0, 1.2, 0.35).is_err());
    }

    #[test]
    fn mean_out_reference_points() {
        assert!((mean_out(20.0, 0.99, 0.35).unwrap() - 18.800_98).abs() < 1e-4);
        assert!((mean_out(5.65, 0.99, 0.35).unwrap() - 4.7347).abs() < 1e-3);
        let p0 = 1.0 - p_excitation(5.65, 0.99, 0.35).unwrap();
        assert!((p0 - 0.1412).abs() < 1e-4, "{p0}");
    }

    #[test]
    fn ion_stats() {
        let s = ideal_ion_stats(3.0, 0.99, 0.35, 0.29).unwrap();
        assert!((s.mean_ions - 0.29 * 0.6463).abs() < 1e-4);
        assert!((s.mean_ions - 0.1874).abs() < 1e-4);
        assert_eq!(s.mandel_q, -s.mean_ions);
        assert_eq!(s.q_over_mean, -1.0);
        let sat = ideal_ion_stats(1e4, 0.99, 0.35, 0.29).unwrap();
        assert!((sat.mean_ions - 0.29).abs() < 1e-12);
        assert!((sat.mandel_q + 0.29).abs() < 1e-12);
        assert_eq!(ideal_ion_stats(0.0, 0.99, 0.35, 0.29), Err(Error::ZeroMean));
    }

    #[test]
    fn subtracted_g2_reference() {
        let g = subtracted_poisson_g2_total(15.76).unwrap();
        assert!((g - 1.0045).abs() < 1e-4, "{g}");
        assert!((subtracted_poisson_g2_total(1e4).unwrap() - 1.0).abs() < 1e-7);
        assert!(subtracted_poisson_g2_total(0.5).is_err());
    }
}
