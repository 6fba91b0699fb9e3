//! Monte-Carlo ensembles of microscopic evolutions.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolver::{EvolveConfig, Evolver};
use crate::fields::{sample_field_with, spectrum_on_modes, NoiseLaw, SpectrumFamily, StreamKey, WaveField};
use crate::lattice::{BoxSpec, ModeSet, WaveVector};
use crate::stats::MomentAccumulator;

/// Members per parallel work unit. Results do not depend on it.
const CHUNK: u64 = 16;

/// Per-mode `E|A_k|²` estimate at one snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub t: f64,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: u64,
}

/// Amplitudes of a few tracked modes, one row per ensemble member.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSamples {
    pub t: f64,
    pub modes: Vec<WaveVector>,
    pub values: Vec<Vec<Complex64>>,
}

impl ModeSamples {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn column(&self, k: WaveVector) -> Result<usize> {
        self.modes
            .iter()
            .position(|&m| m == k)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {k} was not tracked")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleOutput {
    pub tables: Vec<MomentTable>,
    pub samples: Vec<ModeSamples>,
}

struct Partial {
    acc: Vec<MomentAccumulator>,
    rows: Vec<Vec<Vec<Complex64>>>,
}

/// Evolves `M` independently seeded fields and accumulates `|A_k|²` at every
/// snapshot. Member `j` draws from stream key `(base_seed, j)`, so the result
/// is fixed by `base_seed` whatever the thread schedule.
pub fn run_ensemble(
    spec: &BoxSpec,
    f: &SpectrumFamily,
    law: NoiseLaw,
    cfg: &EvolveConfig,
    m: u64,
    base_seed: u64,
) -> Result<Vec<MomentTable>> {
    Ok(run_ensemble_tracked(spec, f, law, cfg, m, base_seed, &[])?.tables)
}

/// As [`run_ensemble`], additionally keeping the raw amplitudes of `track`.
pub fn run_ensemble_tracked(
    spec: &BoxSpec,
    f: &SpectrumFamily,
    law: NoiseLaw,
    cfg: &EvolveConfig,
    m: u64,
    base_seed: u64,
    track: &[WaveVector],
) -> Result<EnsembleOutput> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("ensemble size {m} must be at least 2")));
    }
    cfg.validate()?;
    let modes = ModeSet::build(spec)?;
    let n_in = spectrum_on_modes(spec, &modes, f)?;
    let tracked: Vec<usize> = track
        .iter()
        .map(|&k| modes.index_of(k).ok_or_else(|| Error::InvalidArgument(format!("tracked mode {k} outside the lattice"))))
        .collect::<Result<_>>()?;
    let snapshots = cfg.snapshot_times.len().max(1);
    let chunks: Vec<(u64, u64)> = (0..m.div_ceil(CHUNK)).map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(m))).collect();

    let partials: Vec<Result<Partial>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut ev = Evolver::new(spec, &modes, cfg.dealias_factor)?;
            let mut part = Partial {
                acc: vec![MomentAccumulator::new(modes.len()); snapshots],
                rows: vec![Vec::with_capacity((hi - lo) as usize); snapshots],
            };
            let mut buf = vec![0.0; modes.len()];
            for member in lo..hi {
                let wrap = |e: Error| Error::Member { member, seed: base_seed, source: Box::new(e) };
                let field = sample_field_with(spec, &n_in, law, StreamKey::new(base_seed, member));
                let snaps = ev.evolve(&field, cfg).map_err(wrap)?;
                for (s, snap) in snaps.iter().enumerate() {
                    for (b, a) in buf.iter_mut().zip(&snap.amplitudes) {
                        *b = a.norm_sqr();
                    }
                    part.acc[s].push(&buf).map_err(wrap)?;
                    if !tracked.is_empty() {
                        part.rows[s].push(tracked.iter().map(|&i| snap.amplitudes[i]).collect());
                    }
                }
            }
            Ok(part)
        })
        .collect();

    let mut acc = vec![MomentAccumulator::new(modes.len()); snapshots];
    let mut rows: Vec<Vec<Vec<Complex64>>> = vec![Vec::new(); snapshots];
    for part in partials {
        let part = part?;
        for s in 0..snapshots {
            acc[s].merge(&part.acc[s])?;
        }
        for (dst, src) in rows.iter_mut().zip(part.rows) {
            dst.extend(src);
        }
    }

    let times = snapshot_times(cfg);
    let tables = acc
        .iter()
        .zip(&times)
        .map(|(a, &t)| MomentTable {
            t,
            mean: (0..a.width()).map(|i| a.mean(i)).collect(),
            stderr: (0..a.width()).map(|i| a.stderr(i)).collect(),
            samples: a.count(),
        })
        .collect();
    let samples = if track.is_empty() {
        Vec::new()
    } else {
        rows.into_iter().zip(&times).map(|(values, &t)| ModeSamples { t, modes: track.to_vec(), values }).collect()
    };
    Ok(EnsembleOutput { tables, samples })
}

/// The times the evolver actually records for `cfg`.
pub fn snapshot_times(cfg: &EvolveConfig) -> Vec<f64> {
    let steps = cfg.steps();
    let dt = cfg.t_end / steps as f64;
    if cfg.snapshot_times.is_empty() {
        return vec![steps as f64 * dt];
    }
    cfg.snapshot_times.iter().map(|&t| ((t / dt).round() as usize).min(steps) as f64 * dt).collect()
}

/// Collects tracked amplitudes from already evolved fields.
pub fn samples_from_fields(fields: &[WaveField], modes: &ModeSet, track: &[WaveVector]) -> Result<ModeSamples> {
    let idx: Vec<usize> = track
        .iter()
        .map(|&k| modes.index_of(k).ok_or_else(|| Error::InvalidArgument(format!("mode {k} outside the lattice"))))
        .collect::<Result<_>>()?;
    let t = fields.first().map_or(0.0, |f| f.t);
    if fields.iter().any(|f| f.spec != fields[0].spec || f.len() != modes.len()) {
        return Err(Error::InvalidArgument("sample fields must share one box".into()));
    }
    Ok(ModeSamples {
        t,
        modes: track.to_vec(),
        values: fields.iter().map(|f| idx.iter().map(|&i| f.amplitudes[i]).collect()).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointMomentQuery {
    pub modes: Vec<WaveVector>,
    pub p: Vec<u32>,
    pub q: Vec<u32>,
}

impl JointMomentQuery {
    pub fn new(modes: Vec<WaveVector>, p: Vec<u32>, q: Vec<u32>) -> Result<Self> {
        let query = JointMomentQuery { modes, p, q };
        query.validate()?;
        Ok(query)
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.modes.len();
        if r == 0 || self.p.len() != r || self.q.len() != r {
            return Err(Error::InvalidArgument("joint moment needs r >= 1 modes with one (p, q) pair each".into()));
        }
        for i in 0..r {
            if self.modes[i + 1..].contains(&self.modes[i]) {
                return Err(Error::InvalidArgument(format!("wave vector {} repeated", self.modes[i])));
            }
        }
        Ok(())
    }
}

/// Sample mean and standard error of a complex observable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: Complex64,
    pub stderr: f64,
}

fn estimate(values: impl Iterator<Item = Complex64> + Clone) -> Estimate {
    let m = values.clone().count() as f64;
    let mean = values.clone().sum::<Complex64>() / m;
    let var = if m > 1.0 { values.map(|x| (x - mean).norm_sqr()).sum::<f64>() / (m - 1.0) } else { 0.0 };
    Estimate { mean, stderr: (var / m).sqrt() }
}

fn monomial(row: &[Complex64], cols: &[usize], p: &[u32], q: &[u32]) -> Complex64 {
    cols.iter().enumerate().fold(Complex64::new(1.0, 0.0), |acc, (j, &c)| {
        let a = row[c];
        acc * a.powu(p[j]) * a.conj().powu(q[j])
    })
}

/// Sample mean of `Π_j A_{k_j}^{p_j} Ā_{k_j}^{q_j}`.
pub fn joint_moment(samples: &ModeSamples, query: &JointMomentQuery) -> Result<Estimate> {
    query.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let cols: Vec<usize> = query.modes.iter().map(|&k| samples.column(k)).collect::<Result<_>>()?;
    Ok(estimate(samples.values.iter().map(|row| monomial(row, &cols, &query.p, &query.q))))
}

/// Largest normalised factorisation defect over all exponent patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosDefect {
    /// `max |E Π A^p Ā^q - Π δ_{p=q} E|A|^{2p}| / Π (E|A|²)^{(p+q)/2}`.
    pub defect: f64,
    /// Standard error of the maximising pattern, same normalisation.
    pub stderr: f64,
    /// Largest defect in units of its own standard error over all patterns.
    pub max_z: f64,
    pub pattern: (Vec<u32>, Vec<u32>),
}

/// Exponent patterns `(p, q)` with `1 <= Σ(p_j + q_j) <= order`.
pub fn exponent_patterns(r: usize, order: u32) -> Vec<(Vec<u32>, Vec<u32>)> {
    let mut out = Vec::new();
    let mut e = vec![0u32; 2 * r];
    loop {
        let total: u32 = e.iter().sum();
        if total >= 1 && total <= order {
            out.push((e[..r].to_vec(), e[r..].to_vec()));
        }
        // odometer over [0, order]^{2r}
        let mut i = 0;
        loop {
            if i == 2 * r {
                return out;
            }
            e[i] += 1;
            if e[i] <= order {
                break;
            }
            e[i] = 0;
            i += 1;
        }
    }
}

/// Factorisation defect of the tracked modes `k_1..k_r` (`r >= 2`), over
/// all patterns of total degree at most four. The reference product uses the
/// same samples; its uncertainty enters the standard error through the
/// linearisation `X - Σ_j (Π_{l≠j} μ_l) Y_j`.
pub fn chaos_defect(samples: &ModeSamples, modes: &[WaveVector]) -> Result<ChaosDefect> {
    let r = modes.len();
    if r < 2 {
        return Err(Error::InvalidArgument("chaos defect needs at least two modes".into()));
    }
    JointMomentQuery::new(modes.to_vec(), vec![0; r], vec![0; r])?;
    let cols: Vec<usize> = modes.iter().map(|&k| samples.column(k)).collect::<Result<_>>()?;
    let m = samples.len() as f64;
    if m < 2.0 {
        return Err(Error::InvalidArgument("chaos defect needs at least two samples".into()));
    }
    let second: Vec<f64> =
        cols.iter().map(|&c| samples.values.iter().map(|row| row[c].norm_sqr()).sum::<f64>() / m).collect();

    let mut best = ChaosDefect { defect: 0.0, stderr: 0.0, max_z: 0.0, pattern: (vec![0; r], vec![0; r]) };
    for (p, q) in exponent_patterns(r, 4) {
        let scale: f64 = (0..r).map(|j| second[j].powf(0.5 * (p[j] + q[j]) as f64)).product();
        if scale == 0.0 {
            continue;
        }
        let diagonal = p == q;
        let mu: Vec<f64> = if diagonal {
            cols.iter()
                .zip(&p)
                .map(|(&c, &pj)| samples.values.iter().map(|row| row[c].norm_sqr().powi(pj as i32)).sum::<f64>() / m)
                .collect()
        } else {
            Vec::new()
        };
        let weights: Vec<f64> = if diagonal {
            (0..r).map(|j| (0..r).filter(|&l| l != j).map(|l| mu[l]).product()).collect()
        } else {
            Vec::new()
        };
        let reference: f64 = if diagonal { mu.iter().product() } else { 0.0 };
        let z = samples.values.iter().map(|row| {
            let x = monomial(row, &cols, &p, &q);
            if diagonal {
                let lin: f64 =
                    cols.iter().enumerate().map(|(j, &c)| weights[j] * row[c].norm_sqr().powi(p[j] as i32)).sum();
                x - lin
            } else {
                x
            }
        });
        let est = estimate(z);
        let joint = samples.values.iter().map(|row| monomial(row, &cols, &p, &q)).sum::<Complex64>() / m;
        let defect = (joint - reference).norm() / scale;
        let stderr = est.stderr / scale;
        let zscore = if stderr > 0.0 { defect / stderr } else if defect > 0.0 { f64::INFINITY } else { 0.0 };
        best.max_z = best.max_z.max(zscore);
        if defect > best.defect {
            best.defect = defect;
            best.stderr = stderr;
            best.pattern = (p, q);
        }
    }
    Ok(best)
}

/// CSV with columns `t, m_x.., mean, stderr, M`, one row per mode and table.
pub fn write_moment_csv<W: Write>(tables: &[MomentTable], modes: &ModeSet, out: W) -> Result<()> {
    let d = modes.d();
    let mut w = csv::Writer::from_writer(out);
    let axes = ["m_x", "m_y", "m_z"];
    let mut header = vec!["t".to_string()];
    header.extend(axes[..d].iter().map(|s| s.to_string()));
    header.extend(["mean", "stderr", "M"].iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for table in tables {
        for (i, k) in modes.modes().iter().enumerate() {
            let mut rec = vec![format!("{}", table.t)];
            rec.extend(k.components(d).iter().map(|c| c.to_string()));
            rec.push(format!("{:e}", table.mean[i]));
            rec.push(format!("{:e}", table.stderr[i]));
            rec.push(table.samples.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
