//! Random-phase initial data `A_k(0) = √n_in(k) · η_k` and the binary field
//! record used for debug dumps.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{BoxSpec, ModeSet};

/// Initial spectrum `n_in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SpectrumFamily {
    /// `a · exp(-|k - center|² / w²)`.
    GaussianBump {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// `a` for `|k| ≤ width`, a cosine-squared taper down to zero at `|k| = edge`.
    Plateau { amplitude: f64, width: f64, edge: f64 },
    /// Radial table `|k| ↦ value`.
    CustomTable {
        radii: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        interpolation: Interpolation,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    Nearest,
}

impl SpectrumFamily {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        SpectrumFamily::GaussianBump { amplitude, width, center: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            SpectrumFamily::GaussianBump { amplitude, width, center } => {
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    return bad(format!("gaussian amplitude {amplitude} must be >= 0"));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return bad(format!("gaussian width {width} must be > 0"));
                }
                if center.len() > 3 || center.iter().any(|c| !c.is_finite()) {
                    return bad("gaussian center must have at most 3 finite components".into());
                }
            }
            SpectrumFamily::Plateau { amplitude, width, edge } => {
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    return bad(format!("plateau amplitude {amplitude} must be >= 0"));
                }
                if !(*width > 0.0 && edge > width && edge.is_finite()) {
                    return bad(format!("plateau needs 0 < width < edge, got {width}, {edge}"));
                }
            }
            SpectrumFamily::CustomTable { radii, values, .. } => {
                if radii.is_empty() || radii.len() != values.len() {
                    return bad("spectrum table needs equally many (>= 1) radii and values".into());
                }
                if radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] < 0.0 {
                    return bad("spectrum table radii must be non-negative and strictly increasing".into());
                }
                if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return bad("spectrum table values must be finite and >= 0".into());
                }
            }
        }
        Ok(())
    }

    /// Evaluates `n_in` at a real wave number (components beyond `k.len()`
    /// are zero).
    pub fn eval(&self, k: &[f64]) -> Result<f64> {
        match self {
            SpectrumFamily::GaussianBump { amplitude, width, center } => {
                let r2: f64 = k
                    .iter()
                    .enumerate()
                    .map(|(j, x)| (x - center.get(j).copied().unwrap_or(0.0)).powi(2))
                    .sum();
                Ok(amplitude * (-r2 / (width * width)).exp())
            }
            SpectrumFamily::Plateau { amplitude, width, edge } => {
                let r = norm(k);
                Ok(if r <= *width {
                    *amplitude
                } else if r >= *edge {
                    0.0
                } else {
                    let s = (r - width) / (edge - width);
                    amplitude * (0.5 * std::f64::consts::PI * s).cos().powi(2)
                })
            }
            SpectrumFamily::CustomTable { radii, values, interpolation } => {
                let r = norm(k);
                let (lo, hi) = (radii[0], radii[radii.len() - 1]);
                if r < lo - 1e-12 || r > hi + 1e-12 {
                    return Err(Error::Extrapolation { query: r, lo, hi });
                }
                let i = radii.partition_point(|&x| x <= r).clamp(1, radii.len().max(2) - 1);
                if radii.len() == 1 {
                    return Ok(values[0]);
                }
                let (r0, r1, v0, v1) = (radii[i - 1], radii[i], values[i - 1], values[i]);
                Ok(match interpolation {
                    Interpolation::Linear => {
                        let s = ((r - r0) / (r1 - r0)).clamp(0.0, 1.0);
                        v0 + s * (v1 - v0)
                    }
                    Interpolation::Nearest => {
                        if r - r0 <= r1 - r {
                            v0
                        } else {
                            v1
                        }
                    }
                })
            }
        }
    }
}

fn norm(k: &[f64]) -> f64 {
    k.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn spectrum_eval(f: &SpectrumFamily, k: &[f64]) -> Result<f64> {
    f.eval(k)
}

/// `n_in` on every mode of the lattice.
pub fn spectrum_on_modes(spec: &BoxSpec, modes: &ModeSet, f: &SpectrumFamily) -> Result<Vec<f64>> {
    f.validate()?;
    modes.modes().iter().map(|&m| f.eval(&spec.wave_number(m)[..spec.d])).collect()
}

/// Law of the normalised noise `η_k` (mean zero, `E|η|² = 1`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    /// `η = (g1 + i g2) / √2` with independent standard normals.
    #[default]
    Gaussian,
    /// `η = e^{iθ}` with `θ` uniform on `[0, 2π)`.
    UniformPhase,
}

impl NoiseLaw {
    pub fn draw<R: Rng>(&self, rng: &mut R) -> Complex64 {
        match self {
            NoiseLaw::Gaussian => {
                let g1: f64 = rng.sample(StandardNormal);
                let g2: f64 = rng.sample(StandardNormal);
                Complex64::new(g1, g2) * std::f64::consts::FRAC_1_SQRT_2
            }
            NoiseLaw::UniformPhase => {
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                Complex64::from_polar(1.0, theta)
            }
        }
    }
}

/// Key of a counter-based random stream: one ChaCha key per `(seed, member)`
/// and one ChaCha stream per mode index, so a field does not depend on the
/// order in which modes or ensemble members are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub member: u64,
}

impl StreamKey {
    pub fn new(seed: u64, member: u64) -> Self {
        StreamKey { seed, member }
    }

    pub fn mode_rng(&self, mode: usize) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.member.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(mode as u64);
        rng
    }
}

/// Complex amplitudes `A_k` on the truncated lattice at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    pub spec: BoxSpec,
    pub amplitudes: Vec<Complex64>,
    pub t: f64,
}

impl WaveField {
    pub fn zeros(spec: &BoxSpec, modes: &ModeSet) -> Self {
        WaveField { spec: spec.clone(), amplitudes: vec![Complex64::new(0.0, 0.0); modes.len()], t: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    pub fn mass(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn conj(&self) -> WaveField {
        WaveField { amplitudes: self.amplitudes.iter().map(|a| a.conj()).collect(), ..self.clone() }
    }
}

/// Samples `A_k = √n_in(k) η_k` with `η_k` drawn from the stream of mode `k`.
pub fn sample_field(spec: &BoxSpec, f: &SpectrumFamily, law: NoiseLaw, seed: u64) -> Result<WaveField> {
    let modes = ModeSet::build(spec)?;
    let n_in = spectrum_on_modes(spec, &modes, f)?;
    Ok(sample_field_with(spec, &n_in, law, StreamKey::new(seed, 0)))
}

/// Sampling with a precomputed spectrum; used by ensembles.
pub fn sample_field_with(spec: &BoxSpec, n_in: &[f64], law: NoiseLaw, key: StreamKey) -> WaveField {
    let amplitudes = n_in
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let eta = law.draw(&mut key.mode_rng(i));
            eta * n.sqrt()
        })
        .collect();
    WaveField { spec: spec.clone(), amplitudes, t: 0.0 }
}

const RECORD_MAGIC: &[u8; 4] = b"WKFR";
const RECORD_VERSION: u32 = 1;

/// Writes the binary field record: magic, version, box header, time, mode
/// count and the amplitudes as little-endian `(re, im)` pairs of `f64`.
pub fn write_record<W: Write>(field: &WaveField, mut out: W) -> Result<()> {
    let s = &field.spec;
    out.write_all(RECORD_MAGIC)?;
    out.write_u32::<LittleEndian>(RECORD_VERSION)?;
    out.write_u32::<LittleEndian>(s.d as u32)?;
    out.write_f64::<LittleEndian>(s.l)?;
    for b in &s.beta {
        out.write_f64::<LittleEndian>(*b)?;
    }
    out.write_f64::<LittleEndian>(s.cutoff)?;
    out.write_f64::<LittleEndian>(s.gamma)?;
    out.write_u8(s.linear as u8)?;
    out.write_f64::<LittleEndian>(field.t)?;
    out.write_u64::<LittleEndian>(field.amplitudes.len() as u64)?;
    for a in &field.amplitudes {
        out.write_f64::<LittleEndian>(a.re)?;
        out.write_f64::<LittleEndian>(a.im)?;
    }
    Ok(())
}

pub fn read_record<R: Read>(mut input: R) -> Result<WaveField> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != RECORD_MAGIC {
        return Err(Error::Record("bad magic".into()));
    }
    let version = input.read_u32::<LittleEndian>()?;
    if version != RECORD_VERSION {
        return Err(Error::Record(format!("unsupported version {version}")));
    }
    let d = input.read_u32::<LittleEndian>()? as usize;
    if !(1..=3).contains(&d) {
        return Err(Error::Record(format!("dimension {d} out of range")));
    }
    let l = input.read_f64::<LittleEndian>()?;
    let beta = (0..d).map(|_| input.read_f64::<LittleEndian>()).collect::<std::io::Result<Vec<_>>>()?;
    let cutoff = input.read_f64::<LittleEndian>()?;
    let gamma = input.read_f64::<LittleEndian>()?;
    let linear = input.read_u8()? != 0;
    let t = input.read_f64::<LittleEndian>()?;
    let n = input.read_u64::<LittleEndian>()? as usize;
    let spec = BoxSpec { d, l, beta, cutoff, gamma, linear };
    spec.validate()?;
    let mut amplitudes = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let re = input.read_f64::<LittleEndian>()?;
        let im = input.read_f64::<LittleEndian>()?;
        amplitudes.push(Complex64::new(re, im));
    }
    Ok(WaveField { spec, amplitudes, t })
}
