//! The rescaled lattice `Z^d_L = L^{-1} Z^d`, the dispersion relation
//! `ω(k) = Σ_j β_j (k^j)²` and resonance arithmetic.
//!
//! Wave vectors are stored as integer multiples of `1/L`. When every aspect
//! ratio is rational the resonance factor `Ω` is available as an exact integer
//! numerator, so exact-resonance detection never depends on rounding. For
//! irrational aspect ratios `Ω` is computed in floating point from the factored
//! form `-2 (k1 - k)·(k3 - k)_β`, and exactness is decided per coordinate.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest common denominator tried when recognising rational aspect ratios.
const MAX_RATIONAL_DENOMINATOR: i64 = 1000;

/// Default upper bound on the size of a [`ModeSet`].
pub const DEFAULT_MAX_MODES: usize = 4_000_000;

/// Rationally independent aspect ratios used when a "generic" torus is requested.
pub const GENERIC_BETA: [f64; 3] = [1.0, std::f64::consts::SQRT_2, 1.732_050_807_568_877_2];

/// The discrete box: dimension, size, aspect ratios, frequency cutoff and the
/// scaling-law exponent `γ` (with `ε = L^{-γ}` and `T_kin = ε^{-2}`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub beta: Vec<f64>,
    pub cutoff: f64,
    pub gamma: f64,
    /// Switches the nonlinearity off while keeping `ε` (and hence `T_kin`)
    /// defined by `γ`. This is the `γ = ∞` control.
    #[serde(default)]
    pub linear: bool,
}

impl BoxSpec {
    pub fn new(d: usize, l: f64, beta: Vec<f64>, cutoff: f64, gamma: f64) -> Result<Self> {
        let spec = BoxSpec { d, l, beta, cutoff, gamma, linear: false };
        spec.validate()?;
        Ok(spec)
    }

    /// Square torus `β = (1, …, 1)`.
    pub fn square(d: usize, l: f64, cutoff: f64, gamma: f64) -> Result<Self> {
        Self::new(d, l, vec![1.0; d], cutoff, gamma)
    }

    /// Generic irrational torus with `β` taken from [`GENERIC_BETA`].
    pub fn generic(d: usize, l: f64, cutoff: f64, gamma: f64) -> Result<Self> {
        Self::new(d, l, GENERIC_BETA[..d.min(3)].to_vec(), cutoff, gamma)
    }

    pub fn with_l(&self, l: f64) -> Result<Self> {
        let spec = BoxSpec { l, ..self.clone() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_linear(mut self, linear: bool) -> Self {
        self.linear = linear;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::InvalidSpec(format!("dimension d = {} must be 1, 2 or 3", self.d)));
        }
        if !(self.l.is_finite() && self.l >= 1.0) {
            return Err(Error::InvalidSpec(format!("box size L = {} must be finite and >= 1", self.l)));
        }
        if self.beta.len() != self.d {
            return Err(Error::InvalidSpec(format!(
                "beta has {} components, expected d = {}",
                self.beta.len(),
                self.d
            )));
        }
        if self.beta.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::InvalidSpec(format!("aspect ratios {:?} must be positive", self.beta)));
        }
        if !(self.cutoff.is_finite() && self.cutoff >= 0.0) {
            return Err(Error::InvalidSpec(format!("cutoff {} must be finite and >= 0", self.cutoff)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::InvalidSpec(format!("gamma {} must be finite and >= 0", self.gamma)));
        }
        Ok(())
    }

    /// `ε = L^{-γ}`.
    pub fn epsilon(&self) -> f64 {
        self.l.powf(-self.gamma)
    }

    /// `T_kin = ε^{-2}`.
    pub fn t_kin(&self) -> f64 {
        self.epsilon().powi(-2)
    }

    /// Coefficient `c = ε L^{-d}` of the cubic term, or zero for a linear run.
    pub fn coupling(&self) -> f64 {
        if self.linear {
            0.0
        } else {
            self.epsilon() * self.volume_factor()
        }
    }

    /// `L^{-d}`.
    pub fn volume_factor(&self) -> f64 {
        self.l.powi(-(self.d as i32))
    }

    /// Largest integer coordinate that fits inside the cutoff ball.
    pub fn index_radius(&self) -> i32 {
        (self.cutoff * self.l + 1e-9).floor() as i32
    }

    fn radius_sq(&self) -> i64 {
        let r = self.cutoff * self.l;
        (r * r + 1e-9).floor() as i64
    }

    /// Human-readable label for the aspect ratios, e.g. `square` or `1:1.4142`.
    pub fn beta_label(&self) -> String {
        if self.beta.iter().all(|b| *b == 1.0) {
            "square".to_string()
        } else {
            self.beta.iter().map(|b| format!("{b:.6}")).collect::<Vec<_>>().join(":")
        }
    }

    pub fn arithmetic(&self) -> Arithmetic {
        Arithmetic::detect(&self.beta)
    }

    /// Real wave number `k = m / L`.
    pub fn wave_number(&self, k: WaveVector) -> [f64; 3] {
        let mut out = [0.0; 3];
        for j in 0..self.d {
            out[j] = k.0[j] as f64 / self.l;
        }
        out
    }

    /// `ω(k) = Σ_j β_j (m_j / L)²`.
    pub fn omega(&self, k: WaveVector) -> f64 {
        let s: f64 = (0..self.d).map(|j| self.beta[j] * (k.0[j] as f64).powi(2)).sum();
        s / (self.l * self.l)
    }

    /// Upper bound of `ω` over the cutoff ball.
    pub fn omega_max(&self) -> f64 {
        let bmax = self.beta.iter().cloned().fold(0.0, f64::max);
        bmax * self.cutoff * self.cutoff
    }

    /// `β`-weighted product `Σ_j β_j a_j b_j / L²` of two integer vectors.
    pub fn beta_dot(&self, a: WaveVector, b: WaveVector) -> f64 {
        let s: f64 = (0..self.d).map(|j| self.beta[j] * (a.0[j] as f64) * (b.0[j] as f64)).sum();
        s / (self.l * self.l)
    }
}

/// An integer wave vector `m`; the physical wave number is `m / L`.
/// Components beyond the box dimension are always zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WaveVector(pub [i32; 3]);

impl WaveVector {
    pub const ZERO: WaveVector = WaveVector([0; 3]);

    pub fn new(m: &[i32]) -> Self {
        assert!(m.len() <= 3, "wave vectors have at most three components");
        let mut out = [0; 3];
        out[..m.len()].copy_from_slice(m);
        WaveVector(out)
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    pub fn components(&self, d: usize) -> &[i32] {
        &self.0[..d]
    }
}

impl Add for WaveVector {
    type Output = WaveVector;
    fn add(self, rhs: WaveVector) -> WaveVector {
        WaveVector([self.0[0] + rhs.0[0], self.0[1] + rhs.0[1], self.0[2] + rhs.0[2]])
    }
}

impl Sub for WaveVector {
    type Output = WaveVector;
    fn sub(self, rhs: WaveVector) -> WaveVector {
        WaveVector([self.0[0] - rhs.0[0], self.0[1] - rhs.0[1], self.0[2] - rhs.0[2]])
    }
}

impl Neg for WaveVector {
    type Output = WaveVector;
    fn neg(self) -> WaveVector {
        WaveVector([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl fmt::Display for WaveVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

/// How resonance factors are evaluated for a given set of aspect ratios.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arithmetic {
    /// `β_j = weights_j / denom`; `Q L² Ω` is an exact integer.
    Rational { denom: i64, weights: [i64; 3] },
    /// Aspect ratios are treated as rationally independent: `Ω = 0` exactly
    /// iff `(k1 - k)^j (k3 - k)^j = 0` for every coordinate `j`.
    Independent,
}

impl Arithmetic {
    pub fn detect(beta: &[f64]) -> Arithmetic {
        for q in 1..=MAX_RATIONAL_DENOMINATOR {
            let mut weights = [0i64; 3];
            let ok = beta.iter().enumerate().all(|(j, &b)| {
                let scaled = b * q as f64;
                let rounded = scaled.round();
                weights[j] = rounded as i64;
                (scaled - rounded).abs() <= 1e-9 * scaled.max(1.0)
            });
            if ok {
                return Arithmetic::Rational { denom: q, weights };
            }
        }
        Arithmetic::Independent
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Arithmetic::Rational { .. })
    }

    /// Whether the quadruple with increments `a = k1 - k`, `b = k3 - k` is an
    /// exact resonance.
    pub fn is_exact(&self, d: usize, a: WaveVector, b: WaveVector) -> bool {
        match *self {
            Arithmetic::Rational { weights, .. } => {
                (0..d).map(|j| weights[j] * a.0[j] as i64 * b.0[j] as i64).sum::<i64>() == 0
            }
            Arithmetic::Independent => (0..d).all(|j| a.0[j] as i64 * b.0[j] as i64 == 0),
        }
    }

    /// Exact integer `Q L² Ω = -2 Σ_j w_j a_j b_j` for rational aspect ratios.
    pub fn resonance_numerator(&self, d: usize, a: WaveVector, b: WaveVector) -> Option<i64> {
        match *self {
            Arithmetic::Rational { weights, .. } => {
                Some(-2 * (0..d).map(|j| weights[j] * a.0[j] as i64 * b.0[j] as i64).sum::<i64>())
            }
            Arithmetic::Independent => None,
        }
    }
}

/// All lattice points inside the cutoff ball, in lexicographic order of `m`,
/// with a dense reverse index and precomputed frequencies.
#[derive(Clone, Debug)]
pub struct ModeSet {
    d: usize,
    radius: i32,
    modes: Vec<WaveVector>,
    omega: Vec<f64>,
    lookup: Vec<u32>,
}

const ABSENT: u32 = u32::MAX;

impl ModeSet {
    pub fn build(spec: &BoxSpec) -> Result<ModeSet> {
        Self::build_with_limit(spec, DEFAULT_MAX_MODES)
    }

    pub fn build_with_limit(spec: &BoxSpec, max_modes: usize) -> Result<ModeSet> {
        spec.validate()?;
        let d = spec.d;
        let radius = spec.index_radius();
        let side = (2 * radius + 1) as u64;
        let box_count = side.pow(d as u32);
        // The ball occupies roughly π/4 (d=2) or π/6 (d=3) of its bounding box.
        let ball_estimate = match d {
            1 => box_count,
            2 => box_count * 785 / 1000,
            _ => box_count * 523 / 1000,
        };
        if ball_estimate > max_modes as u64 || box_count > 8 * max_modes as u64 {
            return Err(Error::TooManyModes { count: ball_estimate, limit: max_modes as u64 });
        }
        let r2 = spec.radius_sq();
        let mut modes = Vec::new();
        let span = |j: usize| if j < d { -radius..=radius } else { 0..=0 };
        for m0 in span(0) {
            for m1 in span(1) {
                for m2 in span(2) {
                    let k = WaveVector([m0, m1, m2]);
                    if k.norm_sq() <= r2 {
                        modes.push(k);
                    }
                }
            }
        }
        if modes.len() > max_modes {
            return Err(Error::TooManyModes { count: modes.len() as u64, limit: max_modes as u64 });
        }
        let mut lookup = vec![ABSENT; box_count as usize];
        for (i, k) in modes.iter().enumerate() {
            lookup[dense_index(d, radius, *k)] = i as u32;
        }
        let omega = modes.iter().map(|k| spec.omega(*k)).collect();
        Ok(ModeSet { d, radius, modes, omega, lookup })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Largest coordinate magnitude of any mode.
    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[WaveVector] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> WaveVector {
        self.modes[i]
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omega
    }

    pub fn index_of(&self, k: WaveVector) -> Option<usize> {
        let r = self.radius;
        if (0..3).any(|j| k.0[j].abs() > if j < self.d { r } else { 0 }) {
            return None;
        }
        match self.lookup[dense_index(self.d, r, k)] {
            ABSENT => None,
            i => Some(i as usize),
        }
    }

    pub fn contains(&self, k: WaveVector) -> bool {
        self.index_of(k).is_some()
    }

    /// Index of `-k`; always present because the ball is symmetric.
    pub fn negated_index(&self, i: usize) -> usize {
        self.index_of(-self.modes[i]).expect("mode set is closed under negation")
    }
}

fn dense_index(d: usize, radius: i32, k: WaveVector) -> usize {
    let side = (2 * radius + 1) as usize;
    let mut idx = 0usize;
    for j in 0..d {
        idx = idx * side + (k.0[j] + radius) as usize;
    }
    idx
}

pub fn build_lattice(spec: &BoxSpec) -> Result<ModeSet> {
    ModeSet::build(spec)
}

pub fn omega(spec: &BoxSpec, k: WaveVector) -> f64 {
    spec.omega(k)
}

/// `Ω = ω(k1) - ω(k2) + ω(k3) - ω(k)`.
///
/// When the momentum constraint `k1 - k2 + k3 = k` holds the factored form
/// `-2 (k1 - k)·(k3 - k)_β` is used. In strict mode a violated constraint is an
/// error; otherwise the four frequencies are combined directly.
pub fn resonance(
    spec: &BoxSpec,
    k1: WaveVector,
    k2: WaveVector,
    k3: WaveVector,
    k: WaveVector,
    strict: bool,
) -> Result<f64> {
    if k1 - k2 + k3 == k {
        Ok(resonance_factored(spec, k1 - k, k3 - k))
    } else if strict {
        Err(Error::MomentumViolation)
    } else {
        Ok(spec.omega(k1) - spec.omega(k2) + spec.omega(k3) - spec.omega(k))
    }
}

/// `Ω` from the increments `a = k1 - k` and `b = k3 - k`.
#[inline]
pub fn resonance_factored(spec: &BoxSpec, a: WaveVector, b: WaveVector) -> f64 {
    -2.0 * spec.beta_dot(a, b)
}
