//! Bin-wise Monte-Carlo propagation of a photon pulse through the saturable
//! absorber.
//!
//! Photons are processed in time order. Each one is first lost to background
//! scattering with probability `1 - t`; a survivor is converted into a
//! Rydberg excitation with probability `p_ryd` while the medium holds no
//! excitation, with `p_ryd2` while it holds one, and never once it holds two.
//! Excitations do not decay during the pulse.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use crate::detector::{self, ClickRecord, DetectorConfig, DETECTORS};
use crate::error::{check_unit, Error, Result};
use crate::pulse::{self, BinnedCounts, PulseSpec};
use crate::rng::ShotStreams;
use crate::stats::CountHistogram;

/// Maximum number of excitations the medium can hold.
pub const MAX_EXCITATIONS: u8 = 2;

/// Unordered counter pairs used for cross-correlations.
pub const DETECTOR_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbsorberParams {
    /// Conversion probability of a photon into the first Rydberg excitation.
    pub p_ryd: f64,
    /// Absorption probability once the medium is already blockaded.
    pub p_ryd2: f64,
    /// Linear transmission; background scattering is `1 - t`.
    pub t: f64,
}

impl AbsorberParams {
    pub const fn new(p_ryd: f64, p_ryd2: f64, t: f64) -> Self {
        Self { p_ryd, p_ryd2, t }
    }

    /// Measured operating point: `p_ryd = 0.35`, `p_ryd2 = 0.001`, `t = 0.99`.
    pub const fn measured() -> Self {
        Self::new(0.35, 0.001, 0.99)
    }

    /// Deterministic single-photon absorber without background loss.
    pub const fn ideal() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("p_ryd", self.p_ryd)?;
        check_unit("p_ryd2", self.p_ryd2)?;
        check_unit("t", self.t)
    }

    /// Second-excitation probability larger than the first is allowed but
    /// physically suspicious.
    pub fn has_suspicious_leakage(&self) -> bool {
        self.p_ryd2 > self.p_ryd
    }

    fn absorption_probability(&self, excitations: u8) -> f64 {
        match excitations {
            0 => self.p_ryd,
            1 => self.p_ryd2,
            _ => 0.0,
        }
    }
}

impl Default for AbsorberParams {
    fn default() -> Self {
        Self::measured()
    }
}

/// One realisation of a pulse passing the absorber.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotRecord {
    pub input_bins: BinnedCounts,
    pub output_bins: BinnedCounts,
    pub absorbed: u8,
    pub background_lost: u32,
    pub absorption_bin: Option<usize>,
}

pub fn simulate_shot<R: Rng + ?Sized>(
    params: &AbsorberParams,
    input: &BinnedCounts,
    rng: &mut R,
) -> ShotRecord {
    let mut output = BinnedCounts::zeros(input.len());
    let mut absorbed = 0u8;
    let mut background_lost = 0u32;
    let mut absorption_bin = None;
    for (bin, &photons) in input.iter().enumerate() {
        for _ in 0..photons {
            if rng.random::<f64>() >= params.t {
                background_lost += 1;
                continue;
            }
            let p = params.absorption_probability(absorbed);
            if rng.random::<f64>() < p {
                absorbed += 1;
                absorption_bin.get_or_insert(bin);
            } else {
                output[bin] += 1;
            }
        }
    }
    ShotRecord {
        input_bins: input.clone(),
        output_bins: output,
        absorbed,
        background_lost,
        absorption_bin,
    }
}

/// Photon statistics of the input pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InputState {
    /// Poissonian photon number per bin (laser light).
    Coherent,
    /// Exactly this many photons, distributed over the envelope.
    Fock(u32),
}

/// Shot-summed click products of the four counters on a coarse time grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelationSums {
    pub cell_bins: usize,
    pub cells: usize,
    /// Per counter, clicks summed over shots in each cell.
    pub detector_sums: [Vec<u64>; DETECTORS],
    /// Per unordered pair (see [`DETECTOR_PAIRS`]), row-major
    /// `Σ n_a(i) n_b(j)` over shots.
    pub pair_products: [Vec<u64>; 6],
}

impl CorrelationSums {
    pub fn new(bins: usize, cell_bins: usize) -> Self {
        let cell_bins = cell_bins.max(1);
        let cells = bins.div_ceil(cell_bins);
        Self {
            cell_bins,
            cells,
            detector_sums: core::array::from_fn(|_| vec![0; cells]),
            pair_products: core::array::from_fn(|_| vec![0; cells * cells]),
        }
    }

    pub fn record(&mut self, clicks: &ClickRecord) {
        let cells = self.cells;
        let per_cell: [Vec<u64>; DETECTORS] = core::array::from_fn(|d| {
            let mut v = vec![0u64; cells];
            for (i, &c) in clicks.detectors[d].iter().enumerate() {
                v[i / self.cell_bins] += u64::from(c);
            }
            v
        });
        for (acc, v) in self.detector_sums.iter_mut().zip(&per_cell) {
            for (a, &c) in acc.iter_mut().zip(v) {
                *a += c;
            }
        }
        for (products, &(a, b)) in self.pair_products.iter_mut().zip(&DETECTOR_PAIRS) {
            for (i, &na) in per_cell[a].iter().enumerate() {
                if na == 0 {
                    continue;
                }
                let row = &mut products[i * cells..(i + 1) * cells];
                for (p, &nb) in row.iter_mut().zip(&per_cell[b]) {
                    *p += na * nb;
                }
            }
        }
    }

    fn merge_from(&mut self, other: &Self) -> Result<()> {
        if self.cells != other.cells || self.cell_bins != other.cell_bins {
            return Err(Error::BinMismatch {
                left: self.cells,
                right: other.cells,
            });
        }
        for (a, b) in self.detector_sums.iter_mut().zip(&other.detector_sums) {
            add_into(a, b);
        }
        for (a, b) in self.pair_products.iter_mut().zip(&other.pair_products) {
            add_into(a, b);
        }
        Ok(())
    }
}

/// Mergeable accumulator of shot statistics. All fields are integer sums, so
/// merging is exactly associative and commutative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnsembleResult {
    pub shots: u64,
    pub bins: usize,
    pub in_total_sum: u64,
    pub in_total_sq: u64,
    pub out_total_sum: u64,
    pub out_total_sq: u64,
    pub in_bin_sum: Vec<u64>,
    pub out_bin_sum: Vec<u64>,
    pub out_bin_sq: Vec<u64>,
    /// Shots per number of Rydberg excitations created.
    pub absorbed: CountHistogram,
    /// Shots per total number of transmitted photons.
    pub out_totals: CountHistogram,
    /// Shots per number of detected ions.
    pub ions: CountHistogram,
    /// Shots per bin of the first absorption.
    pub first_absorption: Vec<u64>,
    pub correlations: Option<CorrelationSums>,
}

impl EnsembleResult {
    pub fn empty(bins: usize, g2_cell_bins: Option<usize>) -> Self {
        Self {
            shots: 0,
            bins,
            in_total_sum: 0,
            in_total_sq: 0,
            out_total_sum: 0,
            out_total_sq: 0,
            in_bin_sum: vec![0; bins],
            out_bin_sum: vec![0; bins],
            out_bin_sq: vec![0; bins],
            absorbed: CountHistogram::default(),
            out_totals: CountHistogram::default(),
            ions: CountHistogram::default(),
            first_absorption: vec![0; bins],
            correlations: g2_cell_bins.map(|c| CorrelationSums::new(bins, c)),
        }
    }

    pub fn record(&mut self, shot: &ShotRecord, clicks: &ClickRecord) {
        self.shots += 1;
        let tin = shot.input_bins.total();
        let tout = shot.output_bins.total();
        self.in_total_sum += tin;
        self.in_total_sq += tin * tin;
        self.out_total_sum += tout;
        self.out_total_sq += tout * tout;
        for i in 0..self.bins {
            let o = u64::from(shot.output_bins[i]);
            self.in_bin_sum[i] += u64::from(shot.input_bins[i]);
            self.out_bin_sum[i] += o;
            self.out_bin_sq[i] += o * o;
        }
        self.absorbed.add(u64::from(shot.absorbed));
        self.out_totals.add(tout);
        self.ions.add(u64::from(clicks.ion_clicks));
        if let Some(bin) = shot.absorption_bin {
            self.first_absorption[bin] += 1;
        }
        if let Some(corr) = self.correlations.as_mut() {
            corr.record(clicks);
        }
    }

    pub fn merge_from(&mut self, other: &Self) -> Result<()> {
        if self.bins != other.bins {
            return Err(Error::BinMismatch {
                left: self.bins,
                right: other.bins,
            });
        }
        match (&mut self.correlations, &other.correlations) {
            (Some(a), Some(b)) => a.merge_from(b)?,
            (None, None) => {}
            (Some(a), None) => {
                return Err(Error::BinMismatch {
                    left: a.cells,
                    right: 0,
                })
            }
            (None, Some(b)) => {
                return Err(Error::BinMismatch {
                    left: 0,
                    right: b.cells,
                })
            }
        }
        self.shots += other.shots;
        self.in_total_sum += other.in_total_sum;
        self.in_total_sq += other.in_total_sq;
        self.out_total_sum += other.out_total_sum;
        self.out_total_sq += other.out_total_sq;
        add_into(&mut self.in_bin_sum, &other.in_bin_sum);
        add_into(&mut self.out_bin_sum, &other.out_bin_sum);
        add_into(&mut self.out_bin_sq, &other.out_bin_sq);
        add_into(&mut self.first_absorption, &other.first_absorption);
        self.absorbed.merge_from(&other.absorbed);
        self.out_totals.merge_from(&other.out_totals);
        self.ions.merge_from(&other.ions);
        Ok(())
    }

    /// Mean number of transmitted photons per shot.
    pub fn mean_output(&self) -> f64 {
        self.out_total_sum as f64 / self.shots as f64
    }

    pub fn mean_input(&self) -> f64 {
        self.in_total_sum as f64 / self.shots as f64
    }

    /// Fraction of shots in which nothing was absorbed.
    pub fn p_no_absorption(&self) -> f64 {
        self.absorbed.count(0) as f64 / self.shots as f64
    }
}

pub fn merge(a: &EnsembleResult, b: &EnsembleResult) -> Result<EnsembleResult> {
    let mut out = a.clone();
    out.merge_from(b)?;
    Ok(out)
}

/// Merge a non-empty set of partial results.
pub fn merge_all<'a, I>(parts: I) -> Result<EnsembleResult>
where
    I: IntoIterator<Item = &'a EnsembleResult>,
{
    let mut it = parts.into_iter();
    let mut acc = it.next().ok_or(Error::Empty)?.clone();
    for p in it {
        acc.merge_from(p)?;
    }
    Ok(acc)
}

fn add_into(acc: &mut [u64], other: &[u64]) {
    for (a, &b) in acc.iter_mut().zip(other) {
        *a += b;
    }
}

/// A complete single-absorber experiment: input pulse, absorber, detection.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub pulse: PulseSpec,
    pub absorber: AbsorberParams,
    pub detector: DetectorConfig,
    pub input: InputState,
    /// g2 grid cell size in bins; `None` skips correlation accumulation.
    pub g2_cell_bins: Option<usize>,
}

impl Experiment {
    pub fn new(pulse: PulseSpec, absorber: AbsorberParams) -> Self {
        Self {
            pulse,
            absorber,
            detector: DetectorConfig::default(),
            input: InputState::Coherent,
            g2_cell_bins: None,
        }
    }

    pub fn with_detector(mut self, detector: DetectorConfig) -> Self {
        self.detector = detector;
        self
    }

    pub fn with_g2_cells(mut self, cell_bins: usize) -> Self {
        self.g2_cell_bins = Some(cell_bins);
        self
    }

    pub fn with_input(mut self, input: InputState) -> Self {
        self.input = input;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        self.absorber.validate()?;
        self.detector.validate()
    }

    pub fn empty_result(&self) -> EnsembleResult {
        EnsembleResult::empty(self.pulse.bins(), self.g2_cell_bins)
    }

    /// Runs shots `0..shots`.
    pub fn run(&self, shots: u64, seed: u64) -> Result<EnsembleResult> {
        if shots == 0 {
            return Err(Error::NoShots);
        }
        self.run_range(seed, 0..shots)
    }

    /// Runs the shots with the given indices. Splitting `0..n` into ranges
    /// and merging the parts reproduces `run(n, seed)` exactly.
    pub fn run_range(&self, seed: u64, shots: Range<u64>) -> Result<EnsembleResult> {
        self.validate()?;
        let weights = pulse::tukey_envelope(&self.pulse)?;
        let streams = ShotStreams::new(seed);
        let mut acc = self.empty_result();
        for index in shots {
            let mut rng = streams.shot(index);
            let (shot, clicks) = self.shot(&weights, &mut rng);
            acc.record(&shot, &clicks);
        }
        Ok(acc)
    }

    /// One shot from an explicit envelope.
    pub fn shot<R: Rng + ?Sized>(&self, weights: &[f64], rng: &mut R) -> (ShotRecord, ClickRecord) {
        let input = sample(self.input, self.pulse.mean_photons, weights, rng);
        let shot = simulate_shot(&self.absorber, &input, rng);
        let clicks = detector::detect(
            &shot.output_bins,
            u32::from(shot.absorbed),
            &self.detector,
            self.pulse.bin_width,
            rng,
        );
        (shot, clicks)
    }
}

fn sample<R: Rng + ?Sized>(
    input: InputState,
    mean: f64,
    weights: &[f64],
    rng: &mut R,
) -> BinnedCounts {
    match input {
        InputState::Coherent => pulse::sample_with_weights(mean, weights, rng),
        InputState::Fock(n) => pulse::sample_fock_with_weights(n, weights, rng),
    }
}

/// Coherent-input ensemble with ideal photon counters and the default MCP.
pub fn run_ensemble(
    params: &AbsorberParams,
    spec: &PulseSpec,
    shots: u64,
    seed: u64,
) -> Result<EnsembleResult> {
    Experiment::new(*spec, *params).run(shots, seed)
}

/// Absorbers in series; the transmitted photons of each stage are the input
/// of the next.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeExperiment {
    pub pulse: PulseSpec,
    pub stages: Vec<AbsorberParams>,
    pub detector: DetectorConfig,
    pub input: InputState,
}

/// Per-stage ensembles plus joint statistics of one cascade run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CascadeResult {
    pub stages: Vec<EnsembleResult>,
    /// Shots per vector of excitations created in each stage.
    pub joint: BTreeMap<Vec<u8>, u64>,
    /// Shots per (input photon number, number of stages that absorbed).
    pub counting: BTreeMap<(u64, u64), u64>,
}

impl CascadeResult {
    pub fn shots(&self) -> u64 {
        self.stages.first().map_or(0, |s| s.shots)
    }

    pub fn merge_from(&mut self, other: &Self) -> Result<()> {
        if self.stages.len() != other.stages.len() {
            return Err(Error::BinMismatch {
                left: self.stages.len(),
                right: other.stages.len(),
            });
        }
        for (a, b) in self.stages.iter_mut().zip(&other.stages) {
            a.merge_from(b)?;
        }
        for (k, v) in &other.joint {
            *self.joint.entry(k.clone()).or_insert(0) += v;
        }
        for (k, v) in &other.counting {
            *self.counting.entry(*k).or_insert(0) += v;
        }
        Ok(())
    }

    /// Probability that every listed stage absorbed at least one photon.
    pub fn p_all_absorb(&self, stages: &[usize]) -> f64 {
        let hits: u64 = self
            .joint
            .iter()
            .filter(|(k, _)| stages.iter().all(|&s| k[s] > 0))
            .map(|(_, &v)| v)
            .sum();
        hits as f64 / self.shots() as f64
    }
}

impl CascadeExperiment {
    pub fn new(pulse: PulseSpec, stages: Vec<AbsorberParams>) -> Self {
        Self {
            pulse,
            stages,
            detector: DetectorConfig::default(),
            input: InputState::Coherent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::NoStages);
        }
        self.pulse.validate()?;
        self.detector.validate()?;
        self.stages.iter().try_for_each(AbsorberParams::validate)
    }

    pub fn run(&self, shots: u64, seed: u64) -> Result<CascadeResult> {
        if shots == 0 {
            return Err(Error::NoShots);
        }
        self.run_range(seed, 0..shots)
    }

    pub fn run_range(&self, seed: u64, shots: Range<u64>) -> Result<CascadeResult> {
        self.validate()?;
        let weights = pulse::tukey_envelope(&self.pulse)?;
        let bins = self.pulse.bins();
        let streams = ShotStreams::new(seed);
        let mut result = CascadeResult {
            stages: self
                .stages
                .iter()
                .map(|_| EnsembleResult::empty(bins, None))
                .collect(),
            joint: BTreeMap::new(),
            counting: BTreeMap::new(),
        };
        for index in shots {
            let mut rng = streams.shot(index);
            let records = self.shot(&weights, &mut rng);
            let photons = records.first().map_or(0, |(s, _)| s.input_bins.total());
            let pattern: Vec<u8> = records.iter().map(|(s, _)| s.absorbed).collect();
            let fired = pattern.iter().filter(|&&a| a > 0).count() as u64;
            for (acc, (shot, clicks)) in result.stages.iter_mut().zip(&records) {
                acc.record(shot, clicks);
            }
            *result.joint.entry(pattern).or_insert(0) += 1;
            *result.counting.entry((photons, fired)).or_insert(0) += 1;
        }
        Ok(result)
    }

    pub fn shot<R: Rng + ?Sized>(
        &self,
        weights: &[f64],
        rng: &mut R,
    ) -> Vec<(ShotRecord, ClickRecord)> {
        let mut input = sample(self.input, self.pulse.mean_photons, weights, rng);
        let mut records = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            let shot = simulate_shot(stage, &input, rng);
            let clicks = detector::detect(
                &shot.output_bins,
                u32::from(shot.absorbed),
                &self.detector,
                self.pulse.bin_width,
                rng,
            );
            input = shot.output_bins.clone();
            records.push((shot, clicks));
        }
        records
    }
}

/// Cascade of `stages` driven by a coherent pulse.
pub fn simulate_cascade(
    stages: &[AbsorberParams],
    spec: &PulseSpec,
    shots: u64,
    seed: u64,
) -> Result<CascadeResult> {
    CascadeExperiment::new(*spec, stages.to_vec()).run(shots, seed)
}
