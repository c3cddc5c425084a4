//! The figure-data commands. Each returns its tables and summary in memory;
//! `main` decides where they go.

use std::path::Path;

use anyhow::{Context, Result};
use rydabs_core::absorber::{merge_all, CascadeExperiment};
use rydabs_core::analytic::{mean_out, p_excitation};
use rydabs_core::bloch::{self, PhysicsParams};
use rydabs_core::stats::{self, jackknife, mandel_q, q_over_mean, Estimate};
use rydabs_core::{AbsorberParams, EnsembleResult, Experiment};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::output::{num, opt, CommandOutput, Table};
use crate::runner;

fn est_json(e: Option<Estimate>) -> Value {
    match e {
        Some(e) => json!({ "value": e.value, "sem": e.sem }),
        None => Value::Null,
    }
}

/// Headline statistics of one single-absorber ensemble.
#[derive(Clone, Debug)]
pub struct PointStats {
    pub n_out: Estimate,
    pub ion_mean: Option<Estimate>,
    pub ion_q: Option<Estimate>,
    pub q_over_mean: Option<Estimate>,
    pub p_no_absorption: f64,
}

pub fn point_stats(batches: &[EnsembleResult]) -> Result<PointStats> {
    let total = merge_all(batches)?;
    let n_out = total.out_totals.mean_estimate()?;
    let ion_mean = total.ions.mean_estimate().ok();
    let (ion_q, q_over_mean) = if batches.len() >= 2 {
        (
            jackknife(batches, |e| mandel_q(&e.ions)).ok(),
            jackknife(batches, |e| q_over_mean(&e.ions)).ok(),
        )
    } else {
        (None, None)
    };
    Ok(PointStats {
        n_out,
        ion_mean,
        ion_q,
        q_over_mean,
        p_no_absorption: total.p_no_absorption(),
    })
}

fn single(cfg: &RunConfig, mean: f64, absorber: AbsorberParams, g2: bool) -> Experiment {
    let mut pulse = cfg.pulse_spec();
    pulse.mean_photons = mean;
    let exp = Experiment::new(pulse, absorber).with_detector(cfg.detector());
    if g2 {
        exp.with_g2_cells(cfg.g2_cell_bins())
    } else {
        exp
    }
}

/// Transmitted photons and ion statistics against input photon number.
pub fn sweep(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut table = Table::new(&[
        "n_in_photons",
        "n_out_photons",
        "n_out_sem",
        "n_out_closed_form_photons",
        "deficit_photons",
        "deficit_sem",
        "ion_mean",
        "ion_mean_sem",
        "ion_mandel_q",
        "ion_mandel_q_sem",
        "ion_q_over_mean",
        "ion_q_over_mean_sem",
        "p_no_absorption",
    ]);
    let a = cfg.absorber();
    for (k, &n_in) in cfg.sweep.n_in.iter().enumerate() {
        let exp = single(cfg, n_in, a, false);
        let batches = runner::run_batches(
            &exp,
            cfg.run.shots,
            cfg.run.seed.wrapping_add(k as u64),
            cfg.run.batches,
        )?;
        let s = point_stats(&batches)?;
        let deficit = stats::photon_deficit(&merge_all(&batches)?, n_in, a.t)?;
        table.push(vec![
            num(n_in),
            num(s.n_out.value),
            num(s.n_out.sem),
            num(mean_out(n_in, a.t, a.p_ryd)?),
            num(deficit.value),
            num(deficit.sem),
            opt(s.ion_mean.map(|e| e.value)),
            opt(s.ion_mean.map(|e| e.sem)),
            opt(s.ion_q.map(|e| e.value)),
            opt(s.ion_q.map(|e| e.sem)),
            opt(s.q_over_mean.map(|e| e.value)),
            opt(s.q_over_mean.map(|e| e.sem)),
            num(s.p_no_absorption),
        ]);
    }
    let summary = json!({
        "command": "sweep",
        "points": cfg.sweep.n_in.len(),
        "shots_per_point": cfg.run.shots,
        "absorber": { "p_ryd": a.p_ryd, "p_ryd2": a.p_ryd2, "t": a.t },
    });
    Ok(CommandOutput {
        tables: vec![("sweep.csv", table)],
        summary,
        passed: None,
    })
}

/// Front and rear thirds of a pulse with `bins` bins.
pub fn thirds(bins: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let third = (bins / 3).max(1);
    (0..third, bins - third..bins)
}

/// Input and transmitted pulse shapes, with the ideal absorber as overlay.
pub fn pulse(cfg: &RunConfig) -> Result<CommandOutput> {
    let a = cfg.absorber();
    let ideal = AbsorberParams::new(1.0, 0.0, a.t);
    let n = cfg.pulse.mean_photons;
    let measured = runner::run(
        &single(cfg, n, a, false),
        cfg.run.shots,
        cfg.run.seed,
        cfg.run.batches,
    )?;
    let perfect = runner::run(
        &single(cfg, n, ideal, false),
        cfg.run.shots,
        cfg.run.seed.wrapping_add(1),
        cfg.run.batches,
    )?;
    let shape = stats::pulse_shape(&measured)?;
    let ideal_shape = stats::pulse_shape(&perfect)?;
    let spec = cfg.pulse_spec();
    let mut table = Table::new(&[
        "bin_start_us",
        "in_rate_photons_per_bin",
        "out_rate_photons_per_bin",
        "transmission",
        "sem",
        "ideal_out_rate_photons_per_bin",
        "ideal_transmission",
    ]);
    for (i, (b, ib)) in shape.iter().zip(&ideal_shape).enumerate() {
        table.push(vec![
            num(spec.bin_start(i)),
            num(b.in_rate),
            num(b.out_rate),
            opt(b.transmission),
            num(b.out_sem),
            num(ib.out_rate),
            opt(ib.transmission),
        ]);
    }
    let (front, rear) = thirds(shape.len());
    let summary = json!({
        "command": "pulse",
        "n_in": n,
        "shots": cfg.run.shots,
        "p_no_absorption": measured.p_no_absorption(),
        "p_no_absorption_closed_form": 1.0 - p_excitation(n, a.t, a.p_ryd)?,
        "front_third_transmission": stats::mean_transmission(&shape, front.clone()),
        "rear_third_transmission": stats::mean_transmission(&shape, rear.clone()),
        "ideal_front_third_transmission": stats::mean_transmission(&ideal_shape, front),
        "ideal_rear_third_transmission": stats::mean_transmission(&ideal_shape, rear),
    });
    Ok(CommandOutput {
        tables: vec![("pulse.csv", table)],
        summary,
        passed: None,
    })
}

/// Early- and late-pulse block averages of g2 with jackknife errors.
#[derive(Clone, Debug)]
pub struct G2Blocks {
    pub early: Estimate,
    pub late: Estimate,
}

pub fn g2_blocks(batches: &[EnsembleResult]) -> Result<G2Blocks> {
    let cells = batches
        .first()
        .and_then(|b| b.correlations.as_ref())
        .context("correlations were not accumulated")?
        .cells;
    let (front, rear) = thirds(cells);
    Ok(G2Blocks {
        early: jackknife(batches, |e| stats::g2_block_mean(e, front.clone()))?,
        late: jackknife(batches, |e| stats::g2_block_mean(e, rear.clone()))?,
    })
}

/// Pair-averaged intensity correlation map of the transmitted pulse.
pub fn g2(cfg: &RunConfig) -> Result<CommandOutput> {
    let exp = single(cfg, cfg.pulse.mean_photons, cfg.absorber(), true);
    let batches = runner::run_batches(&exp, cfg.run.shots, cfg.run.seed, cfg.run.batches)?;
    let bin_width = cfg.pulse_spec().bin_width;
    let g = if batches.len() >= 2 {
        stats::g2_matrix_with_errors(&batches, bin_width)?
    } else {
        stats::g2_matrix(&merge_all(&batches)?, bin_width)?
    };
    let mut table = Table::new(&["t1_us", "t2_us", "g2", "n_pairs", "g2_sem"]);
    let c = g.cells();
    for i in 0..c {
        for j in 0..c {
            table.push(vec![
                num(g.edges[i]),
                num(g.edges[j]),
                opt(g.get(i, j)),
                g.n_pairs[i * c + j].to_string(),
                opt(g.sigma(i, j)),
            ]);
        }
    }
    let blocks = if batches.len() >= 2 {
        g2_blocks(&batches).ok()
    } else {
        None
    };
    let summary = json!({
        "command": "g2",
        "n_in": cfg.pulse.mean_photons,
        "shots": cfg.run.shots,
        "cells": c,
        "cell_us": g.edges.get(1).copied(),
        "early_block_g2": est_json(blocks.as_ref().map(|b| b.early)),
        "late_block_g2": est_json(blocks.as_ref().map(|b| b.late)),
    });
    Ok(CommandOutput {
        tables: vec![("g2.csv", table)],
        summary,
        passed: None,
    })
}

fn probe_detuning(cfg: &RunConfig) -> f64 {
    cfg.spectrum.probe_detuning.unwrap_or(cfg.physics.delta_e)
}

/// Weak-probe transmission against two-photon detuning.
pub fn spectrum(cfg: &RunConfig) -> Result<CommandOutput> {
    let phys = cfg.physics();
    let dp = probe_detuning(cfg);
    let grid = bloch::symmetric_grid(cfg.spectrum.span_mhz, cfg.spectrum.points);
    let mut table = Table::new(&["delta_mhz", "transmission"]);
    for (d, t) in bloch::transmission_spectrum(&phys, dp, &grid)? {
        table.push(vec![num(d), num(t)]);
    }
    let geometry = cfg.geometry();
    let summary = json!({
        "command": "spectrum",
        "probe_detuning_mhz": dp,
        "scattering_probability_control_off": bloch::scattering_probability(&phys, dp),
        "linear_transmission_control_off": 1.0 - bloch::scattering_probability(&phys, dp),
        "conversion_probability_estimate": bloch::conversion_probability(&phys),
        "raman_decay_rate_mhz": bloch::raman_decay_rate(phys.omega_c, phys.delta_e, phys.gamma_e).ok(),
        "coherence_decay_mhz": phys.coherence_decay(),
        "collective_rabi_one_photon_per_us_mhz": bloch::collective_rabi(phys.omega_p, geometry.atom_number)?,
        "blockade_covers_cloud": geometry.blockade_covers_cloud(),
    });
    Ok(CommandOutput {
        tables: vec![("spectrum.csv", table)],
        summary,
        passed: None,
    })
}

/// Fits the dephasing rate to a spectrum CSV.
pub fn fit_gamma(cfg: &RunConfig, data: &Path) -> Result<CommandOutput> {
    let measured = crate::output::read_spectrum(data)?;
    let phys = cfg.physics();
    let dp = probe_detuning(cfg);
    let fit = bloch::fit_dephasing(&measured, &phys, dp)?;
    let fitted = PhysicsParams {
        gamma_deph: fit.gamma,
        ..phys
    };
    let mut table = Table::new(&["delta_mhz", "transmission", "model_transmission"]);
    for &(d, t) in &measured {
        table.push(vec![
            num(d),
            num(t),
            num(bloch::transmission(&fitted, dp, d)),
        ]);
    }
    let summary = json!({
        "command": "fit-gamma",
        "data": data.display().to_string(),
        "points": measured.len(),
        "gamma_mhz": fit.gamma,
        "residual_sum_squares": fit.residual,
        "iterations": fit.iterations,
    });
    Ok(CommandOutput {
        tables: vec![("fit.csv", table)],
        summary,
        passed: None,
    })
}

/// Absorbers in series: per-stage statistics and photon-number resolution.
pub fn cascade(cfg: &RunConfig) -> Result<CommandOutput> {
    let stages = cfg.cascade_stages();
    let mut exp = CascadeExperiment::new(cfg.pulse_spec(), stages.clone());
    exp.detector = cfg.detector();
    exp.input = cfg.cascade_input();
    let r = runner::run_cascade(&exp, cfg.run.shots, cfg.run.seed, cfg.run.batches)?;
    let shots = r.shots() as f64;

    let mut stage_table = Table::new(&[
        "stage",
        "p_ryd",
        "p_ryd2",
        "t",
        "mean_in_photons",
        "mean_out_photons",
        "p_absorb",
        "mean_excitations",
        "ion_mean",
    ]);
    for (k, (s, p)) in r.stages.iter().zip(&stages).enumerate() {
        stage_table.push(vec![
            (k + 1).to_string(),
            num(p.p_ryd),
            num(p.p_ryd2),
            num(p.t),
            num(s.mean_input()),
            num(s.mean_output()),
            num(1.0 - s.p_no_absorption()),
            num(s.absorbed.mean()?),
            num(s.ions.mean()?),
        ]);
    }

    let mut joint = Table::new(&["pattern", "shots", "probability"]);
    for (pattern, &n) in &r.joint {
        let key: Vec<String> = pattern.iter().map(u8::to_string).collect();
        joint.push(vec![key.join("-"), n.to_string(), num(n as f64 / shots)]);
    }

    let mut counting = Table::new(&[
        "photons_in",
        "stages_fired",
        "shots",
        "fraction_given_input",
    ]);
    let mut exact = 0u64;
    for (&(photons, fired), &n) in &r.counting {
        let given: u64 = r
            .counting
            .iter()
            .filter(|((p, _), _)| *p == photons)
            .map(|(_, &v)| v)
            .sum();
        if photons == fired {
            exact += n;
        }
        counting.push(vec![
            photons.to_string(),
            fired.to_string(),
            n.to_string(),
            num(n as f64 / given as f64),
        ]);
    }
    let summary = json!({
        "command": "cascade",
        "stages": stages.len(),
        "shots": r.shots(),
        "input": match exp.input {
            rydabs_core::absorber::InputState::Coherent => json!({ "coherent": cfg.pulse.mean_photons }),
            rydabs_core::absorber::InputState::Fock(n) => json!({ "fock": n }),
        },
        "p_first_two_absorb": (stages.len() >= 2).then(|| r.p_all_absorb(&[0, 1])),
        "exact_count_fraction": exact as f64 / shots,
    });
    Ok(CommandOutput {
        tables: vec![
            ("stages.csv", stage_table),
            ("joint.csv", joint),
            ("counting.csv", counting),
        ],
        summary,
        passed: None,
    })
}

struct Check {
    name: String,
    value: f64,
    expected: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        (self.value - self.expected).abs() <= self.tolerance
    }
}

/// Monte-Carlo against closed forms at the configured operating point, with
/// second-photon leakage switched off so the closed forms apply. Tolerances
/// are three standard errors.
pub fn validate(cfg: &RunConfig, oracle_p_ryd: Option<f64>) -> Result<CommandOutput> {
    let mut a = cfg.absorber();
    a.p_ryd2 = 0.0;
    let p_oracle = oracle_p_ryd.unwrap_or(a.p_ryd);
    let eta = cfg.detector.eta_ion;
    let mut checks = Vec::new();
    let mut points = vec![3.0, cfg.pulse.mean_photons];
    points.dedup();
    for (k, &n_in) in points.iter().enumerate() {
        let exp = single(cfg, n_in, a, false);
        let batches = runner::run_batches(
            &exp,
            cfg.run.shots,
            cfg.run.seed.wrapping_add(k as u64),
            cfg.run.batches.max(2),
        )?;
        let total = merge_all(&batches)?;
        let n_out = total.out_totals.mean_estimate()?;
        checks.push(Check {
            name: format!("mean_out(n_in={n_in})"),
            value: n_out.value,
            expected: mean_out(n_in, a.t, p_oracle)?,
            tolerance: 3.0 * n_out.sem,
        });
        let p1 = p_excitation(n_in, a.t, p_oracle)?;
        let shots = total.shots as f64;
        let p0 = 1.0 - p1;
        checks.push(Check {
            name: format!("p_no_absorption(n_in={n_in})"),
            value: total.p_no_absorption(),
            expected: p0,
            tolerance: 3.0 * (p0 * (1.0 - p0) / shots).sqrt(),
        });
        let ions = total.ions.mean_estimate()?;
        checks.push(Check {
            name: format!("ion_mean(n_in={n_in})"),
            value: ions.value,
            expected: eta * p1,
            tolerance: 3.0 * ions.sem,
        });
        if let Ok(r) = jackknife(&batches, |e| q_over_mean(&e.ions)) {
            checks.push(Check {
                name: format!("ion_q_over_mean(n_in={n_in})"),
                value: r.value,
                // with 0/1 counts the unbiased-variance estimator sits at
                // -1 + (1 - m) / (m (n - 1)) rather than exactly -1
                expected: {
                    let m = eta * p1;
                    -1.0 + (1.0 - m) / (m * (shots - 1.0))
                },
                tolerance: 3.0 * r.sem + 1e-12,
            });
        }
        // ion detection thins the excitation number: Q_ions = eta * Q_excitations
        if let Ok(r) = jackknife(&batches, |e| {
            Ok(mandel_q(&e.ions)? - eta * mandel_q(&e.absorbed)?)
        }) {
            checks.push(Check {
                name: format!("thinning_law(n_in={n_in})"),
                value: r.value,
                expected: 0.0,
                tolerance: 3.0 * r.sem,
            });
        }
    }
    let mut table = Table::new(&["check", "value", "expected", "tolerance", "pass"]);
    for c in &checks {
        table.push(vec![
            c.name.clone(),
            num(c.value),
            num(c.expected),
            num(c.tolerance),
            c.passed().to_string(),
        ]);
    }
    let passed = checks.iter().all(Check::passed);
    let summary = json!({
        "command": "validate",
        "shots": cfg.run.shots,
        "oracle_p_ryd": p_oracle,
        "checks": checks.len(),
        "failed": checks.iter().filter(|c| !c.passed()).map(|c| c.name.clone()).collect::<Vec<_>>(),
        "passed": passed,
    });
    Ok(CommandOutput {
        tables: vec![("validate.csv", table)],
        summary,
        passed: Some(passed),
    })
}
