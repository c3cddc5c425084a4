//! Run configuration: one structured file with dotted keys, defaults equal to
//! the measured operating point, and `key=value` overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rydabs_core::absorber::InputState;
use rydabs_core::bloch::{ExperimentGeometry, PhysicsParams};
use rydabs_core::{AbsorberParams, DetectorConfig, Experiment, PulseSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    pub mean_photons: f64,
    pub duration_us: f64,
    pub bin_ns: f64,
    pub taper: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            mean_photons: 15.76,
            duration_us: 2.0,
            bin_ns: 50.0,
            taper: rydabs_core::pulse::DEFAULT_TAPER,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbsorberSection {
    pub p_ryd: f64,
    pub p_ryd2: f64,
    pub t: f64,
}

impl Default for AbsorberSection {
    fn default() -> Self {
        let p = AbsorberParams::measured();
        Self {
            p_ryd: p.p_ryd,
            p_ryd2: p.p_ryd2,
            t: p.t,
        }
    }
}

impl From<AbsorberSection> for AbsorberParams {
    fn from(s: AbsorberSection) -> Self {
        AbsorberParams::new(s.p_ryd, s.p_ryd2, s.t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeSection {
    /// Absorber stages in beam order; empty means `default_stages` copies of
    /// `[absorber]`.
    pub stages: Vec<AbsorberSection>,
    pub default_stages: usize,
    /// Number-state input instead of a coherent pulse.
    pub fock: Option<u32>,
}

impl Default for CascadeSection {
    fn default() -> Self {
        Self {
            stages: Vec::new(),
            default_stages: 5,
            fock: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub delta_e: f64,
    pub delta_2: f64,
    pub omega_c: f64,
    pub omega_p: f64,
    pub gamma_e: f64,
    pub gamma_deph: f64,
    pub tau_ryd: f64,
    pub od_b: f64,
    pub include_raman: bool,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        let p = PhysicsParams::measured();
        Self {
            delta_e: p.delta_e,
            delta_2: p.delta_2,
            omega_c: p.omega_c,
            omega_p: p.omega_p,
            gamma_e: p.gamma_e,
            gamma_deph: p.gamma_deph,
            tau_ryd: p.tau_ryd,
            od_b: p.od_b,
            include_raman: p.include_raman,
        }
    }
}

impl From<&PhysicsSection> for PhysicsParams {
    fn from(s: &PhysicsSection) -> Self {
        PhysicsParams {
            delta_e: s.delta_e,
            delta_2: s.delta_2,
            omega_c: s.omega_c,
            omega_p: s.omega_p,
            gamma_e: s.gamma_e,
            gamma_deph: s.gamma_deph,
            tau_ryd: s.tau_ryd,
            od_b: s.od_b,
            include_raman: s.include_raman,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub atom_number: u64,
    pub sigma_z_um: f64,
    pub sigma_r_um: f64,
    pub waist_probe_um: f64,
    pub waist_control_um: f64,
    pub blockade_radius_um: f64,
    pub temperature_uk: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let g = ExperimentGeometry::measured();
        Self {
            atom_number: g.atom_number,
            sigma_z_um: g.sigma_z,
            sigma_r_um: g.sigma_r,
            waist_probe_um: g.waist_probe,
            waist_control_um: g.waist_control,
            blockade_radius_um: g.blockade_radius,
            temperature_uk: g.temperature_uk,
        }
    }
}

impl From<&GeometrySection> for ExperimentGeometry {
    fn from(s: &GeometrySection) -> Self {
        ExperimentGeometry {
            atom_number: s.atom_number,
            sigma_z: s.sigma_z_um,
            sigma_r: s.sigma_r_um,
            waist_probe: s.waist_probe_um,
            waist_control: s.waist_control_um,
            blockade_radius: s.blockade_radius_um,
            temperature_uk: s.temperature_uk,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub eta_probe: f64,
    pub eta_ion: f64,
    pub split: [f64; 4],
    pub dead_time_ns: Option<f64>,
    /// Dark counts per second and counter.
    pub dark_cps: Option<f64>,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorConfig::default();
        Self {
            eta_probe: d.eta_probe,
            eta_ion: d.eta_ion,
            split: d.split,
            dead_time_ns: None,
            dark_cps: None,
        }
    }
}

impl From<&DetectorSection> for DetectorConfig {
    fn from(s: &DetectorSection) -> Self {
        DetectorConfig {
            eta_probe: s.eta_probe,
            eta_ion: s.eta_ion,
            split: s.split,
            dead_time: s.dead_time_ns.map(|ns| ns * 1e-3),
            dark_rate: s.dark_cps.map(|cps| cps * 1e-6),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub shots: u64,
    pub seed: u64,
    pub out: PathBuf,
    /// Independent shot batches; also the jackknife sample count.
    pub batches: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            shots: 100_000,
            seed: 42,
            out: PathBuf::from("results"),
            batches: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2Section {
    pub cell_ns: f64,
}

impl Default for G2Section {
    fn default() -> Self {
        Self { cell_ns: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Fixed probe detuning of the scan; defaults to `physics.delta_e`.
    pub probe_detuning: Option<f64>,
    pub span_mhz: f64,
    pub points: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            probe_detuning: None,
            span_mhz: 5.0,
            points: 201,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n_in: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            n_in: vec![
                0.5, 1.0, 2.0, 3.0, 5.0, 5.65, 8.0, 10.0, 12.0, 15.76, 20.0, 25.0, 30.0, 35.0,
            ],
        }
    }
}

/// Everything a command needs. `RunConfig::default()` is the measured
/// parameter set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pulse: PulseSection,
    pub absorber: AbsorberSection,
    pub cascade: CascadeSection,
    pub physics: PhysicsSection,
    pub geometry: GeometrySection,
    pub detector: DetectorSection,
    pub run: RunSection,
    pub g2: G2Section,
    pub spectrum: SpectrumSection,
    pub sweep: SweepSection,
}

impl RunConfig {
    /// Loads a `.toml` or `.json` file and applies `key=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut tree = match path {
            Some(p) => read_tree(p)?,
            None => Value::Object(Default::default()),
        };
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: RunConfig =
            serde_json::from_value(tree).context("configuration does not match the schema")?;
        Ok(cfg)
    }

    pub fn pulse_spec(&self) -> PulseSpec {
        PulseSpec {
            mean_photons: self.pulse.mean_photons,
            duration: self.pulse.duration_us,
            bin_width: self.pulse.bin_ns * 1e-3,
            taper: self.pulse.taper,
        }
    }

    pub fn absorber(&self) -> AbsorberParams {
        self.absorber.into()
    }

    pub fn detector(&self) -> DetectorConfig {
        (&self.detector).into()
    }

    pub fn physics(&self) -> PhysicsParams {
        (&self.physics).into()
    }

    pub fn geometry(&self) -> ExperimentGeometry {
        (&self.geometry).into()
    }

    pub fn g2_cell_bins(&self) -> usize {
        ((self.g2.cell_ns / self.pulse.bin_ns).round() as usize).max(1)
    }

    pub fn experiment(&self) -> Experiment {
        Experiment::new(self.pulse_spec(), self.absorber())
            .with_detector(self.detector())
            .with_g2_cells(self.g2_cell_bins())
    }

    pub fn cascade_stages(&self) -> Vec<AbsorberParams> {
        if self.cascade.stages.is_empty() {
            vec![self.absorber(); self.cascade.default_stages]
        } else {
            self.cascade.stages.iter().map(|&s| s.into()).collect()
        }
    }

    pub fn cascade_input(&self) -> InputState {
        self.cascade
            .fock
            .map_or(InputState::Coherent, InputState::Fock)
    }

    /// Validates every section; returns human-readable warnings for suspicious
    /// but admissible settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        if self.run.shots == 0 {
            bail!("run.shots must be at least 1");
        }
        if self.run.batches == 0 {
            bail!("run.batches must be at least 1");
        }
        if !(self.g2.cell_ns > 0.0) {
            bail!("g2.cell_ns must be positive");
        }
        if self.spectrum.points == 0 || !(self.spectrum.span_mhz > 0.0) {
            bail!("spectrum needs points >= 1 and span_mhz > 0");
        }
        self.pulse_spec().validate().context("[pulse]")?;
        self.absorber().validate().context("[absorber]")?;
        self.detector().validate().context("[detector]")?;
        self.physics().validate().context("[physics]")?;
        self.geometry().validate().context("[geometry]")?;
        for (i, s) in self.cascade_stages().iter().enumerate() {
            s.validate()
                .with_context(|| format!("[cascade] stage {i}"))?;
        }
        let mut warnings = Vec::new();
        let all = std::iter::once(self.absorber()).chain(self.cascade_stages());
        if all.into_iter().any(|a| a.has_suspicious_leakage()) {
            warnings.push("p_ryd2 exceeds p_ryd".to_string());
        }
        if !self.geometry().blockade_covers_cloud() {
            warnings.push(
                "blockade radius does not exceed the cloud size; single-excitation model is questionable"
                    .to_string(),
            );
        }
        let bins = self.pulse.duration_us / (self.pulse.bin_ns * 1e-3);
        if (bins - bins.round()).abs() > 1e-9 {
            warnings.push(format!(
                "pulse duration is not a whole number of bins; using {}",
                bins.round()
            ));
        }
        Ok(warnings)
    }
}

fn read_tree(path: &Path) -> Result<Value> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        let table: toml::Table =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(serde_json::to_value(table)?)
    }
}

/// `a.b.c=value`, where the value is read as a TOML literal and falls back to
/// a bare string.
fn apply_override(tree: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .with_context(|| format!("override `{assignment}` is not key=value"))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => match t.remove("v") {
            Some(v) => serde_json::to_value(v)?,
            None => Value::String(raw.trim().to_string()),
        },
        Err(_) => Value::String(raw.trim().to_string()),
    };
    let mut node = tree;
    let parts: Vec<&str> = key.trim().split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .with_context(|| format!("override `{key}` descends into a non-table"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    bail!("empty override key")
}
