//! Experiment configuration: one TOML file, one section per module.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use wavekin_core::evolver::EvolveConfig;
use wavekin_core::fields::{NoiseLaw, SpectrumFamily};
use wavekin_core::kinetic::KernelShape;
use wavekin_core::lattice::BoxSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Census,
    FirstIterate,
    Wke,
    Ensemble,
    Compare,
    Diagrams,
    Chaos,
}

impl Experiment {
    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Census => "census",
            Experiment::FirstIterate => "first-iterate",
            Experiment::Wke => "wke",
            Experiment::Ensemble => "ensemble",
            Experiment::Compare => "compare",
            Experiment::Diagrams => "diagrams",
            Experiment::Chaos => "chaos",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional; must agree with the command line when present.
    pub experiment: Option<Experiment>,
    #[serde(rename = "box")]
    pub box_spec: BoxSpec,
    pub spectrum: Option<SpectrumFamily>,
    #[serde(default)]
    pub noise: NoiseSection,
    pub evolve: Option<EvolveConfig>,
    pub ensemble: Option<EnsembleSection>,
    pub kinetic: Option<KineticSection>,
    pub census: Option<CensusSection>,
    pub first_iterate: Option<FirstIterateSection>,
    pub compare: Option<CompareSection>,
    pub diagrams: Option<DiagramsSection>,
    pub chaos: Option<ChaosSection>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub law: NoiseLaw,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub members: u64,
    pub seed: u64,
    /// Also write member 0's initial field as a binary record.
    #[serde(default)]
    pub dump_initial_field: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticSection {
    pub h: f64,
    /// Broadening width; the grid default when absent.
    pub width: Option<f64>,
    #[serde(default)]
    pub kernel: KernelShape,
    pub tau_end: Option<f64>,
    pub dtau: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusSection {
    pub times: Vec<f64>,
    pub k: Option<Vec<i32>>,
    /// Box sizes to scan; the `[box]` size when absent.
    pub l_values: Option<Vec<f64>>,
    /// Aspect ratios to scan; the `[box]` ratios when absent.
    pub betas: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub volume_samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirstIterateSection {
    pub times: Vec<f64>,
    pub modes: Option<Vec<Vec<i32>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub l_values: Vec<f64>,
    pub tau: f64,
    pub dt: f64,
    /// Kinetic step; `tau / 10` when absent.
    pub dtau: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramsSection {
    pub max_order: usize,
    /// Rescaled time for the truncated moment; skipped when absent.
    pub tau: Option<f64>,
    #[serde(default = "default_moment_order")]
    pub moment_order: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_moment_order() -> usize {
    2
}

fn default_delta() -> f64 {
    0.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosSection {
    pub modes: Vec<Vec<i32>>,
}

/// Parsed file plus the raw text it came from.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub raw: String,
    pub echo: toml::Value,
}

pub fn load(path: &std::path::Path) -> Result<Loaded> {
    let raw = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let config: ExperimentConfig = toml::from_str(&raw).map_err(|e| anyhow!("config {}: {e}", path.display()))?;
    let echo: toml::Value = toml::from_str(&raw)?;
    config.box_spec.validate()?;
    Ok(Loaded { config, raw, echo })
}

pub fn required<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T> {
    section.as_ref().ok_or_else(|| anyhow!("missing required section [{name}]"))
}

pub fn field<T: Copy>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| anyhow!("missing required field {name}"))
}

pub fn wave_vector(m: &[i32], d: usize, name: &str) -> Result<wavekin_core::lattice::WaveVector> {
    if m.len() != d {
        bail!("{name}: wave vector {m:?} must have {d} components");
    }
    Ok(wavekin_core::lattice::WaveVector::new(m))
}
