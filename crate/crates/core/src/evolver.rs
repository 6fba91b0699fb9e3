//! Time integration of `i∂_t A_k = ω(k) A_k + c Σ_{k1-k2+k3=k} A_{k1} Ā_{k2} A_{k3}`
//! on the truncated lattice, `c = ε L^{-d}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::PaddedGrid;
use crate::fields::WaveField;
use crate::lattice::{BoxSpec, ModeSet};

pub const DEFAULT_DEALIAS: f64 = 2.0;

const MAX_MIDPOINT_ITERATIONS: usize = 100;
const MAX_SUBSTEP_DEPTH: u32 = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact linear half steps around an implicit-midpoint nonlinear step.
    #[default]
    StrangSplit,
    /// Fourth-order Runge–Kutta in the interaction picture.
    Rk4InteractionPicture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_dealias")]
    pub dealias_factor: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

fn default_dealias() -> f64 {
    DEFAULT_DEALIAS
}

impl EvolveConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        EvolveConfig { dt, t_end, scheme: Scheme::default(), dealias_factor: DEFAULT_DEALIAS, snapshot_times: Vec::new() }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end >= self.dt && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be finite and >= dt = {}", self.t_end, self.dt));
        }
        if self.dealias_factor < 1.5 || !self.dealias_factor.is_finite() {
            return bad(format!("dealias factor {} must be >= 1.5", self.dealias_factor));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] < w[0]) {
            return bad("snapshot times must be sorted".into());
        }
        if self.snapshot_times.iter().any(|&t| !(0.0..=self.t_end * (1.0 + 1e-12)).contains(&t)) {
            return bad("snapshot times must lie in [0, t_end]".into());
        }
        Ok(())
    }

    /// Number of steps; the step actually taken is `t_end / steps`, which
    /// equals `dt` whenever `dt` divides `t_end`.
    pub fn steps(&self) -> usize {
        ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize
    }
}

/// `min(0.1 / ω_max, 0.05 / (c · max|A|²))`, ignoring a vanishing rate.
pub fn default_dt(spec: &BoxSpec, field: &WaveField) -> f64 {
    let amax = field.amplitudes.iter().map(|a| a.norm_sqr()).fold(0.0, f64::max);
    let linear = spec.omega_max();
    let nonlinear = spec.coupling() * amax;
    let mut dt = f64::INFINITY;
    if linear > 0.0 {
        dt = dt.min(0.1 / linear);
    }
    if nonlinear > 0.0 {
        dt = dt.min(0.05 / nonlinear);
    }
    if dt.is_finite() { dt } else { 0.1 }
}

/// Reusable integrator state for one box.
pub struct Evolver {
    spec: BoxSpec,
    omega: Vec<f64>,
    c: f64,
    grid: PaddedGrid,
}

impl Evolver {
    pub fn new(spec: &BoxSpec, modes: &ModeSet, dealias_factor: f64) -> Result<Self> {
        spec.validate()?;
        Ok(Evolver {
            spec: spec.clone(),
            omega: modes.omegas().to_vec(),
            c: spec.coupling(),
            grid: PaddedGrid::new(modes, dealias_factor)?,
        })
    }

    pub fn spec(&self) -> &BoxSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n != self.omega.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {n} amplitudes but the mode set has {}",
                self.omega.len()
            )));
        }
        Ok(())
    }

    pub fn nonlinear(&mut self, amps: &[Complex64], out: &mut [Complex64]) -> Result<()> {
        self.check_len(amps.len())?;
        self.grid.cubic(amps, self.c, out);
        Ok(())
    }

    /// `(mass, energy)` with the quartic part evaluated on the grid.
    pub fn conserved(&mut self, amps: &[Complex64]) -> Result<(f64, f64)> {
        self.check_len(amps.len())?;
        let mass = amps.iter().map(|a| a.norm_sqr()).sum();
        let quadratic: f64 = amps.iter().zip(&self.omega).map(|(a, w)| w * a.norm_sqr()).sum();
        let quartic = if self.c == 0.0 { 0.0 } else { self.grid.quartic(amps) };
        Ok((mass, quadratic + 0.5 * self.c * quartic))
    }

    pub fn evolve(&mut self, field: &WaveField, cfg: &EvolveConfig) -> Result<Vec<WaveField>> {
        cfg.validate()?;
        self.check_len(field.len())?;
        let steps = cfg.steps();
        let dt = cfg.t_end / steps as f64;
        let mut targets: Vec<usize> =
            cfg.snapshot_times.iter().map(|&t| ((t / dt).round() as usize).min(steps)).collect();
        if targets.is_empty() {
            targets.push(steps);
        }
        let snap = |amps: Vec<Complex64>, step: usize| WaveField {
            spec: field.spec.clone(),
            amplitudes: amps,
            t: field.t + step as f64 * dt,
        };

        if self.c == 0.0 {
            return Ok(targets
                .iter()
                .map(|&s| {
                    let t = s as f64 * dt;
                    let amps = field
                        .amplitudes
                        .iter()
                        .zip(&self.omega)
                        .map(|(a, w)| a * Complex64::from_polar(1.0, -w * t))
                        .collect();
                    snap(amps, s)
                })
                .collect());
        }

        let n = self.len();
        let mut work = Workspace::new(n);
        let mut out = Vec::with_capacity(targets.len());
        let mut next = 0;
        // Strang steps carry the interaction-picture state `B = e^{iωt} A`, so
        // every step builds its phases from the absolute time instead of
        // compounding one rounded factor.
        let half: Vec<Complex64> = self.omega.iter().map(|w| unit_phase(-0.5 * w * dt)).collect();
        let strang = cfg.scheme == Scheme::StrangSplit;
        let mut a = field.amplitudes.clone();
        let mut phase = vec![Complex64::new(0.0, 0.0); n];
        for step in 0..=steps {
            while next < targets.len() && targets[next] == step {
                let amps = if strang && step > 0 {
                    let t = step as f64 * dt;
                    a.iter().zip(&self.omega).map(|(b, w)| b * unit_phase(-w * t)).collect()
                } else {
                    a.clone()
                };
                out.push(snap(amps, step));
                next += 1;
            }
            if step == steps || next == targets.len() {
                break;
            }
            if strang {
                let tm = (step as f64 + 0.5) * dt;
                for (p, w) in phase.iter_mut().zip(&self.omega) {
                    *p = Complex64::from_polar(1.0, -w * tm);
                }
                for (x, p) in a.iter_mut().zip(&phase) {
                    *x *= p;
                }
                self.midpoint(&mut a, dt, &mut work)?;
                for (x, p) in a.iter_mut().zip(&phase) {
                    *x *= p.conj();
                }
            } else {
                self.rk4ip_step(&mut a, &half, dt, &mut work);
            }
            let mass: f64 = a.iter().map(|x| x.norm_sqr()).sum();
            if !mass.is_finite() || mass > 1e250 {
                return Err(Error::NonFinite { step: step + 1, t: field.t + (step + 1) as f64 * dt });
            }
        }
        Ok(out)
    }

    /// Nonlinear flow over `dt` by implicit midpoint, halving the step
    /// whenever the fixed-point iteration does not contract.
    fn midpoint(&mut self, a: &mut [Complex64], dt: f64, w: &mut Workspace) -> Result<()> {
        self.midpoint_at_depth(a, dt, w, 0)
    }

    fn midpoint_at_depth(&mut self, a: &mut [Complex64], dt: f64, w: &mut Workspace, depth: u32) -> Result<()> {
        if self.try_midpoint(a, dt, w) {
            return Ok(());
        }
        if depth >= MAX_SUBSTEP_DEPTH {
            return Err(Error::InvalidArgument(format!(
                "nonlinear substep did not converge after {depth} halvings; reduce dt"
            )));
        }
        self.midpoint_at_depth(a, 0.5 * dt, w, depth + 1)?;
        self.midpoint_at_depth(a, 0.5 * dt, w, depth + 1)
    }

    /// Solves `A1 = A0 - i dt N((A0 + A1) / 2)` by fixed-point iteration and
    /// leaves `a` untouched on failure. The map preserves `Σ|A|²` because
    /// `⟨A, N(A)⟩` is real.
    fn try_midpoint(&mut self, a: &mut [Complex64], dt: f64, w: &mut Workspace) -> bool {
        let norm: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return true;
        }
        let minus_i_dt = Complex64::new(0.0, -dt);
        w.mid.copy_from_slice(a);
        let mut prev = f64::INFINITY;
        for it in 0..MAX_MIDPOINT_ITERATIONS {
            self.grid.cubic(&w.mid, self.c, &mut w.k1);
            let mut diff = 0.0;
            for ((m, &x), f) in w.mid.iter_mut().zip(a.iter()).zip(&w.k1) {
                let next = x + 0.5 * minus_i_dt * f;
                diff += (next - *m).norm_sqr();
                *m = next;
            }
            let diff = diff.sqrt();
            if diff <= 1e-16 * norm || (it > 2 && diff >= prev && diff <= 1e-12 * norm) {
                break;
            }
            if it + 1 == MAX_MIDPOINT_ITERATIONS || !diff.is_finite() || (it > 1 && diff > 0.5 * prev) {
                return false;
            }
            prev = diff;
        }
        for (x, m) in a.iter_mut().zip(&w.mid) {
            *x = 2.0 * m - *x;
        }
        true
    }

    fn rk4ip_step(&mut self, a: &mut [Complex64], half: &[Complex64], dt: f64, w: &mut Workspace) {
        let mi = Complex64::new(0.0, -1.0);
        let c = self.c;
        // ai = e^{-iωdt/2} a
        for ((ai, x), p) in w.ai.iter_mut().zip(a.iter()).zip(half) {
            *ai = x * p;
        }
        self.grid.cubic(a, c, &mut w.k1);
        for (k, p) in w.k1.iter_mut().zip(half) {
            *k *= mi * p;
        }
        for ((m, ai), k) in w.mid.iter_mut().zip(&w.ai).zip(&w.k1) {
            *m = ai + 0.5 * dt * k;
        }
        self.grid.cubic(&w.mid, c, &mut w.k2);
        for k in w.k2.iter_mut() {
            *k *= mi;
        }
        for ((m, ai), k) in w.mid.iter_mut().zip(&w.ai).zip(&w.k2) {
            *m = ai + 0.5 * dt * k;
        }
        self.grid.cubic(&w.mid, c, &mut w.k3);
        for k in w.k3.iter_mut() {
            *k *= mi;
        }
        for (((m, ai), k), p) in w.mid.iter_mut().zip(&w.ai).zip(&w.k3).zip(half) {
            *m = (ai + dt * k) * p;
        }
        self.grid.cubic(&w.mid, c, &mut w.k4);
        for k in w.k4.iter_mut() {
            *k *= mi;
        }
        for i in 0..a.len() {
            let s = w.ai[i] + dt / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i]);
            a[i] = s * half[i] + dt / 6.0 * w.k4[i];
        }
    }
}

/// `e^{iθ}` rounded to the neighbouring pair of doubles whose squared
/// modulus is closest to one, so that repeated rotations do not drift in
/// modulus.
pub fn unit_phase(theta: f64) -> Complex64 {
    let (s0, c0) = theta.sin_cos();
    let mut best = (c0, s0);
    let mut best_err = modulus_defect(c0, s0).abs();
    for c in [c0.next_down(), c0, c0.next_up()] {
        for s in [s0.next_down(), s0, s0.next_up()] {
            let e = modulus_defect(c, s).abs();
            if e < best_err {
                best = (c, s);
                best_err = e;
            }
        }
    }
    Complex64::new(best.0, best.1)
}

/// `c² + s² - 1` to roughly twice working precision.
fn modulus_defect(c: f64, s: f64) -> f64 {
    let (ph, qh) = (c * c, s * s);
    let (pl, ql) = (c.mul_add(c, -ph), s.mul_add(s, -qh));
    let sh = ph + qh;
    let bp = sh - ph;
    let sl = (ph - (sh - bp)) + (qh - bp);
    (sh - 1.0) + sl + pl + ql
}

struct Workspace {
    ai: Vec<Complex64>,
    mid: Vec<Complex64>,
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n];
        Workspace { ai: z.clone(), mid: z.clone(), k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z }
    }
}

fn check_spec(spec: &BoxSpec, field: &WaveField) -> Result<ModeSet> {
    if spec != &field.spec {
        return Err(Error::InvalidArgument("field was sampled on a different box".into()));
    }
    ModeSet::build(spec)
}

/// `c Σ A_{k1} Ā_{k2} A_{k3}` for every mode, via a zero-padded grid.
pub fn nonlinear_term(spec: &BoxSpec, field: &WaveField) -> Result<WaveField> {
    let modes = check_spec(spec, field)?;
    let mut ev = Evolver::new(spec, &modes, DEFAULT_DEALIAS)?;
    let mut out = vec![Complex64::new(0.0, 0.0); field.len()];
    ev.nonlinear(&field.amplitudes, &mut out)?;
    Ok(WaveField { spec: spec.clone(), amplitudes: out, t: field.t })
}

pub fn evolve(spec: &BoxSpec, field: &WaveField, cfg: &EvolveConfig) -> Result<Vec<WaveField>> {
    let modes = check_spec(spec, field)?;
    Evolver::new(spec, &modes, cfg.dealias_factor)?.evolve(field, cfg)
}

pub fn conserved(spec: &BoxSpec, field: &WaveField) -> Result<(f64, f64)> {
    let modes = check_spec(spec, field)?;
    Evolver::new(spec, &modes, DEFAULT_DEALIAS)?.conserved(&field.amplitudes)
}

/// Direct `O(N³)` evaluation of the cubic sum, for cross-checks.
pub fn direct_cubic(spec: &BoxSpec, modes: &ModeSet, amps: &[Complex64]) -> Vec<Complex64> {
    let c = spec.coupling();
    let mut out = vec![Complex64::new(0.0, 0.0); modes.len()];
    for (i1, &k1) in modes.modes().iter().enumerate() {
        for (i2, &k2) in modes.modes().iter().enumerate() {
            let p = amps[i1] * amps[i2].conj();
            for (i3, &k3) in modes.modes().iter().enumerate() {
                if let Some(k) = modes.index_of(k1 - k2 + k3) {
                    out[k] += c * p * amps[i3];
                }
            }
        }
    }
    out
}

/// Direct quartic sum `Σ_{k1-k2+k3-k4=0} A1 Ā2 A3 Ā4`.
pub fn direct_quartic(modes: &ModeSet, amps: &[Complex64]) -> f64 {
    let mut s = Complex64::new(0.0, 0.0);
    for (i1, &k1) in modes.modes().iter().enumerate() {
        for (i2, &k2) in modes.modes().iter().enumerate() {
            let p = amps[i1] * amps[i2].conj();
            for (i3, &k3) in modes.modes().iter().enumerate() {
                if let Some(i4) = modes.index_of(k1 - k2 + k3) {
                    s += p * amps[i3] * amps[i4].conj();
                }
            }
        }
    }
    s.re
}
