//! Wave kinetic equation `∂_τ n = K(n)` on a Cartesian mesh, the
//! second-order lattice and continuum predictions, and the hierarchy residual.
//!
//! Normalisation: for the microscopic system `i∂_t A = ωA + ε L^{-d} Σ A Ā A`,
//! `E|A_k(t)|² - n_in(k) ≈ 2ε² ∫∫ t² sinc²(Ωt/2) B dk1 dk3` and
//! `t² sinc²(Ωt/2) → 2πt δ(Ω)`, hence `K(n) = 4π ∫∫ B δ(Ω) dk1 dk3` with
//! `B = n1 n2 n3 - n n2 n3 + n n1 n3 - n n1 n2` and `t = τ/ε²`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::census::Budget;
use crate::error::{Error, Result};
use crate::fields::SpectrumFamily;
use crate::lattice::{BoxSpec, ModeSet, WaveVector};

/// Uniform mesh `k = h m` inside the cutoff ball.
#[derive(Clone, Debug)]
pub struct KineticGrid {
    h: f64,
    mesh: BoxSpec,
    nodes: ModeSet,
}

impl KineticGrid {
    pub fn new(d: usize, h: f64, beta: Vec<f64>, cutoff: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("mesh spacing {h} must lie in (0, 1]")));
        }
        let mesh = BoxSpec::new(d, 1.0 / h, beta, cutoff, 0.0)?;
        let nodes = ModeSet::build(&mesh)?;
        Ok(KineticGrid { h, mesh, nodes })
    }

    /// Mesh with the aspect ratios and cutoff of `spec`.
    pub fn for_spec(spec: &BoxSpec, h: f64) -> Result<Self> {
        Self::new(spec.d, h, spec.beta.clone(), spec.cutoff)
    }

    pub fn d(&self) -> usize {
        self.mesh.d
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn beta(&self) -> &[f64] {
        &self.mesh.beta
    }

    pub fn cutoff(&self) -> f64 {
        self.mesh.cutoff
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &ModeSet {
        &self.nodes
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d() as i32)
    }

    pub fn wave_number(&self, i: usize) -> [f64; 3] {
        self.mesh.wave_number(self.nodes.mode(i))
    }

    pub fn omega(&self, i: usize) -> f64 {
        self.nodes.omegas()[i]
    }

    /// Mesh node at the real wave number `k`, if `k` is one.
    pub fn node_at(&self, k: &[f64]) -> Option<usize> {
        let mut m = [0i32; 3];
        for (j, &x) in k.iter().enumerate().take(self.d()) {
            let y = x / self.h;
            let r = y.round();
            if (y - r).abs() > 1e-9 {
                return None;
            }
            m[j] = r as i32;
        }
        self.nodes.index_of(WaveVector(m))
    }

    pub fn values_of(&self, f: &SpectrumFamily) -> Result<Vec<f64>> {
        f.validate()?;
        (0..self.len()).map(|i| f.eval(&self.wave_number(i)[..self.d()])).collect()
    }

    /// Frequency change across one cell at the cutoff, `2 β_max · cutoff · h`.
    pub fn frequency_spacing(&self) -> f64 {
        let bmax = self.beta().iter().cloned().fold(0.0, f64::max);
        2.0 * bmax * self.cutoff() * self.h
    }

    /// Gaussian broadening of width twice the frequency spacing.
    pub fn default_broadening(&self) -> DeltaBroadening {
        DeltaBroadening::gaussian(2.0 * self.frequency_spacing())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    /// Uniform on `[-w, w]`.
    Box,
    /// Normal density of standard deviation `w`.
    #[default]
    Gaussian,
}

/// Broadened energy delta `δ_w(Ω)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaBroadening {
    pub width: f64,
    #[serde(default)]
    pub kernel: KernelShape,
}

/// Gaussian tails beyond this many widths are dropped.
const GAUSSIAN_SUPPORT: f64 = 6.0;

impl DeltaBroadening {
    pub fn gaussian(width: f64) -> Self {
        DeltaBroadening { width, kernel: KernelShape::Gaussian }
    }

    pub fn boxcar(width: f64) -> Self {
        DeltaBroadening { width, kernel: KernelShape::Box }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidArgument(format!("broadening width {} must be > 0", self.width)));
        }
        Ok(())
    }

    pub fn support(&self) -> f64 {
        match self.kernel {
            KernelShape::Box => self.width,
            KernelShape::Gaussian => GAUSSIAN_SUPPORT * self.width,
        }
    }

    pub fn eval(&self, omega: f64) -> f64 {
        let w = self.width;
        match self.kernel {
            KernelShape::Box => {
                if omega.abs() <= w {
                    0.5 / w
                } else {
                    0.0
                }
            }
            KernelShape::Gaussian => {
                if omega.abs() > GAUSSIAN_SUPPORT * w {
                    0.0
                } else {
                    (-0.5 * (omega / w).powi(2)).exp() / (w * (2.0 * PI).sqrt())
                }
            }
        }
    }
}

/// `n1 n2 n3 - n n2 n3 + n n1 n3 - n n1 n2`.
#[inline]
pub fn bracket(n: f64, n1: f64, n2: f64, n3: f64) -> f64 {
    n1 * n2 * n3 - n * n2 * n3 + n * n1 * n3 - n * n1 * n2
}

/// Weight `1 + c` given to a quadruple's contribution at its first slot.
///
/// The unweighted kernel conserves `Σ n` but not `Σ ω n` once `δ` is
/// broadened: a quadruple moves `(+1, -1, +1, -1)` units into
/// `(k, k1, k2, k3)`, whose frequency change is `-Ω`. Adding the smallest
/// correction orthogonal to `(1, 1, 1, 1)` that removes it gives the share
/// `Ω (ω_k - S/4) / |ω - S/4|²` at slot `k`, `S` the frequency sum.
#[inline]
pub fn energy_weight(w: f64, w1: f64, w2: f64, w3: f64) -> f64 {
    let omega = w1 - w2 + w3 - w;
    if omega == 0.0 {
        return 1.0;
    }
    let s = 0.25 * (w + w1 + w2 + w3);
    let norm = (w - s).powi(2) + (w1 - s).powi(2) + (w2 - s).powi(2) + (w3 - s).powi(2);
    if norm == 0.0 {
        1.0
    } else {
        1.0 + omega * (w - s) / norm
    }
}

/// Collision integral at node `i` and the coefficient of `n(k)` in it.
fn collision_at(grid: &KineticGrid, phi: &[f64], b: &DeltaBroadening, i: usize) -> (f64, f64) {
    let nodes = grid.nodes();
    let omegas = nodes.omegas();
    let k = nodes.mode(i);
    let (w, n) = (omegas[i], phi[i]);
    let support = b.support();
    let (mut value, mut diag) = (0.0, 0.0);
    for (i1, &k1) in nodes.modes().iter().enumerate() {
        let (w1, n1) = (omegas[i1], phi[i1]);
        let shift = k1 - k;
        for (i3, &k3) in nodes.modes().iter().enumerate() {
            let Some(i2) = nodes.index_of(shift + k3) else { continue };
            let w2 = omegas[i2];
            let omega = w1 - w2 + omegas[i3] - w;
            if omega.abs() > support {
                continue;
            }
            let (n2, n3) = (phi[i2], phi[i3]);
            let weight = b.eval(omega) * energy_weight(w, w1, w2, omegas[i3]);
            value += weight * bracket(n, n1, n2, n3);
            diag += weight * (n1 * n3 - n2 * n3 - n1 * n2);
        }
    }
    let scale = 4.0 * PI * grid.cell_volume().powi(2);
    (scale * value, scale * diag)
}

/// Broadened collision operator `K(φ)` on every mesh node.
pub fn collision(grid: &KineticGrid, phi: &[f64], b: &DeltaBroadening) -> Result<Vec<f64>> {
    check_values(grid, phi)?;
    b.validate()?;
    Ok((0..grid.len()).into_par_iter().map(|i| collision_at(grid, phi, b, i).0).collect())
}

/// `K(φ)` at a single mesh node.
pub fn collision_at_node(grid: &KineticGrid, phi: &[f64], b: &DeltaBroadening, node: usize) -> Result<f64> {
    check_values(grid, phi)?;
    b.validate()?;
    if node >= grid.len() {
        return Err(Error::InvalidArgument(format!("node {node} outside the mesh")));
    }
    Ok(collision_at(grid, phi, b, node).0)
}

fn check_values(grid: &KineticGrid, phi: &[f64]) -> Result<()> {
    if phi.len() != grid.len() {
        return Err(Error::InvalidArgument(format!("{} values for a mesh of {} nodes", phi.len(), grid.len())));
    }
    if phi.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidArgument("kinetic values must be finite and non-negative".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticState {
    pub tau: f64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WkeConfig {
    pub tau_end: f64,
    pub dtau: f64,
    /// Recorded times; every step when empty.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Abort once `sup n` exceeds this multiple of `max(sup n_in, 1)`.
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
}

fn default_blowup() -> f64 {
    1e3
}

impl WkeConfig {
    pub fn new(tau_end: f64, dtau: f64) -> Self {
        WkeConfig { tau_end, dtau, snapshot_times: Vec::new(), blowup_factor: default_blowup() }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dtau > 0.0 && self.dtau.is_finite()) {
            return Err(Error::InvalidArgument(format!("dtau = {} must be positive", self.dtau)));
        }
        if !(self.tau_end >= 0.0 && self.tau_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau_end = {} must be >= 0", self.tau_end)));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0])
            || self.snapshot_times.iter().any(|&t| !(0.0..=self.tau_end * (1.0 + 1e-12)).contains(&t))
        {
            return Err(Error::InvalidArgument("snapshot times must be sorted within [0, tau_end]".into()));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::InvalidArgument("blow-up factor must exceed 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        if self.tau_end == 0.0 {
            0
        } else {
            ((self.tau_end / self.dtau) - 1e-9).ceil().max(1.0) as usize
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<KineticState>,
    /// Total mass `Σ h^d |n|` removed by clipping negative values.
    pub clip_mass: f64,
    /// Steps at which clipping occurred.
    pub clip_events: usize,
    /// RK4 stability estimate `2.78 / max_k |∂K(k)/∂n(k)|` at `τ = 0`.
    pub stability_bound: f64,
    pub dtau: f64,
}

/// Classical RK4 for `∂_τ n = K(n)`; negative values are clipped to zero and
/// the removed mass is recorded.
pub fn solve_wke(grid: &KineticGrid, n_in: &[f64], cfg: &WkeConfig, b: &DeltaBroadening) -> Result<Trajectory> {
    check_values(grid, n_in)?;
    cfg.validate()?;
    b.validate()?;
    let steps = cfg.steps();
    let dtau = if steps == 0 { cfg.dtau } else { cfg.tau_end / steps as f64 };
    let targets: Vec<usize> = if cfg.snapshot_times.is_empty() {
        (0..=steps).collect()
    } else {
        cfg.snapshot_times.iter().map(|&t| ((t / dtau).round() as usize).min(steps)).collect()
    };
    let bound = cfg.blowup_factor * n_in.iter().cloned().fold(1.0, f64::max);
    let hd = grid.cell_volume();

    let eval = |n: &[f64]| -> Vec<f64> { (0..grid.len()).into_par_iter().map(|i| collision_at(grid, n, b, i).0).collect() };
    let max_diag = (0..grid.len())
        .into_par_iter()
        .map(|i| collision_at(grid, n_in, b, i).1.abs())
        .reduce(|| 0.0, f64::max);
    let stability_bound = if max_diag > 0.0 { 2.78 / max_diag } else { f64::INFINITY };

    let mut n = n_in.to_vec();
    let mut traj = Trajectory { states: Vec::new(), clip_mass: 0.0, clip_events: 0, stability_bound, dtau };
    let mut next = 0;
    let mut stage = vec![0.0; n.len()];
    for step in 0..=steps {
        while next < targets.len() && targets[next] == step {
            traj.states.push(KineticState { tau: step as f64 * dtau, values: n.clone() });
            next += 1;
        }
        if step == steps || next == targets.len() {
            break;
        }
        let k1 = eval(&n);
        axpy(&mut stage, &n, 0.5 * dtau, &k1);
        let k2 = eval(&stage);
        axpy(&mut stage, &n, 0.5 * dtau, &k2);
        let k3 = eval(&stage);
        axpy(&mut stage, &n, dtau, &k3);
        let k4 = eval(&stage);
        let mut clipped = 0.0;
        for i in 0..n.len() {
            n[i] += dtau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            if n[i] < 0.0 {
                clipped -= n[i];
                n[i] = 0.0;
            }
        }
        if clipped > 0.0 {
            traj.clip_mass += clipped * hd;
            traj.clip_events += 1;
        }
        let sup = n.iter().cloned().fold(0.0, f64::max);
        if !sup.is_finite() || sup > bound {
            return Err(Error::BlowUp { step: step + 1, sup, bound });
        }
    }
    Ok(traj)
}

/// `stage = n + a k`, clipped at zero so that the operator sees admissible data.
fn axpy(stage: &mut [f64], n: &[f64], a: f64, k: &[f64]) {
    for ((s, x), y) in stage.iter_mut().zip(n).zip(k) {
        *s = (x + a * y).max(0.0);
    }
}

/// `t² sinc²(Ωt/2) = |∫_0^t e^{iΩs} ds|²`.
#[inline]
pub fn resonance_kernel(omega: f64, t: f64) -> f64 {
    let x = 0.5 * omega * t;
    if x.abs() < 1e-4 {
        t * t * (1.0 - x * x / 3.0)
    } else {
        let s = x.sin() / x;
        t * t * s * s
    }
}

/// Second-order lattice prediction for `E|A_k(t)|² - n_in(k)`:
/// `2 c² Σ_{k1,k3,k2=k1+k3-k} t² sinc²(Ωt/2) B`, `c = ε L^{-d}`.
pub fn first_iterate_sum(spec: &BoxSpec, n_in: &SpectrumFamily, t: f64, k: WaveVector) -> Result<f64> {
    first_iterate_sum_with(spec, n_in, t, k, &Budget::default())
}

pub fn first_iterate_sum_with(
    spec: &BoxSpec,
    n_in: &SpectrumFamily,
    t: f64,
    k: WaveVector,
    budget: &Budget,
) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
    }
    let modes = ModeSet::build(spec)?;
    budget.check_pairs(modes.len())?;
    let values = crate::fields::spectrum_on_modes(spec, &modes, n_in)?;
    let n_k = n_in.eval(&spec.wave_number(k)[..spec.d])?;
    let c = spec.coupling();
    Ok(2.0 * c * c * kernel_sum(&modes, &values, n_k, spec.omega(k), k, t))
}

/// `Σ_{k1,k3 ∈ S, k1+k3-k ∈ S} F_t(Ω) B`; `k` itself need not lie in `S`.
fn kernel_sum(modes: &ModeSet, values: &[f64], n: f64, w: f64, k: WaveVector, t: f64) -> f64 {
    let omegas = modes.omegas();
    (0..modes.len())
        .into_par_iter()
        .map(|i1| {
            let k1 = modes.mode(i1);
            let (w1, n1) = (omegas[i1], values[i1]);
            let mut s = 0.0;
            for (i3, &k3) in modes.modes().iter().enumerate() {
                let Some(i2) = modes.index_of(k1 + k3 - k) else { continue };
                let omega = w1 - omegas[i2] + omegas[i3] - w;
                s += resonance_kernel(omega, t) * bracket(n, n1, values[i2], values[i3]);
            }
            s
        })
        .sum()
}

/// Continuum counterpart `2 ε² ∫∫ t² sinc²(Ωt/2) B dk1 dk3`, by the mesh rule
/// of `grid`, at mesh node `k`.
pub fn first_iterate_integral(grid: &KineticGrid, n_in: &[f64], eps: f64, t: f64, k: usize) -> Result<f64> {
    check_values(grid, n_in)?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
    }
    if k >= grid.len() {
        return Err(Error::InvalidArgument(format!("node {k} outside the mesh")));
    }
    let kv = grid.nodes().mode(k);
    let s = kernel_sum(grid.nodes(), n_in, n_in[k], grid.omega(k), kv, t);
    Ok(2.0 * eps * eps * grid.cell_volume().powi(2) * s)
}

/// Residual of the `r`-point hierarchy on factorised data at snapshot `index`:
/// `|Σ_j Π_{l≠j} n(k_l) K(n)(k_j) - d/dτ Π_j n(k_j)|`, the derivative by a
/// central difference of neighbouring snapshots.
pub fn hierarchy_residual(
    grid: &KineticGrid,
    traj: &Trajectory,
    b: &DeltaBroadening,
    ks: &[usize],
    index: usize,
) -> Result<f64> {
    let r = ks.len();
    if !(1..=3).contains(&r) {
        return Err(Error::InvalidArgument(format!("hierarchy order r = {r} must be 1, 2 or 3")));
    }
    if ks.iter().any(|&k| k >= grid.len()) {
        return Err(Error::InvalidArgument("hierarchy wave number outside the mesh".into()));
    }
    if index == 0 || index + 1 >= traj.states.len() {
        return Err(Error::InvalidArgument("hierarchy residual needs neighbouring snapshots".into()));
    }
    let (prev, cur, next) = (&traj.states[index - 1], &traj.states[index], &traj.states[index + 1]);
    let (h1, h2) = (cur.tau - prev.tau, next.tau - cur.tau);
    if (h1 - h2).abs() > 1e-9 * h1.max(h2) || h1 <= 0.0 {
        return Err(Error::InvalidArgument("hierarchy residual needs equally spaced snapshots".into()));
    }
    let product = |s: &KineticState| ks.iter().map(|&k| s.values[k]).product::<f64>();
    let lhs = (product(next) - product(prev)) / (h1 + h2);
    let rhs: f64 = (0..r)
        .map(|j| {
            let others: f64 = (0..r).filter(|&l| l != j).map(|l| cur.values[ks[l]]).product();
            others * collision_at(grid, &cur.values, b, ks[j]).0
        })
        .sum();
    Ok((rhs - lhs).abs())
}

/// CSV with columns `tau, k_x.., n`.
pub fn write_trajectory_csv<W: Write>(grid: &KineticGrid, traj: &Trajectory, out: W) -> Result<()> {
    let d = grid.d();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["tau".to_string()];
    header.extend(["k_x", "k_y", "k_z"][..d].iter().map(|s| s.to_string()));
    header.push("n".into());
    w.write_record(&header)?;
    for s in &traj.states {
        for i in 0..grid.len() {
            let k = grid.wave_number(i);
            let mut rec = vec![format!("{}", s.tau)];
            rec.extend(k[..d].iter().map(|x| format!("{x}")));
            rec.push(format!("{:e}", s.values[i]));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
