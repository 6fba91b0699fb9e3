//! Lattice-point counting in the quasi-resonance window
//! `W_δ = {(k1, k2, k3) : k1 - k2 + k3 = k, |Ω| ≤ δ}` restricted to the cutoff
//! ball, and the comparison between exact and quasi resonances.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{resonance_factored, Arithmetic, BoxSpec, ModeSet, WaveVector};

/// Default number of quasi Monte-Carlo samples for window volumes.
pub const DEFAULT_VOLUME_SAMPLES: usize = 1_000_000;

/// Upper bound on the number of elementary operations a counting call may
/// perform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_operations: u128,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_operations: 20_000_000_000 }
    }
}

impl Budget {
    pub fn check(&self, estimated: u128) -> Result<()> {
        if estimated > self.max_operations {
            Err(Error::BudgetExceeded { estimated, budget: self.max_operations })
        } else {
            Ok(())
        }
    }

    /// Cost of a double loop over a mode set of size `n`.
    pub fn check_pairs(&self, n: usize) -> Result<()> {
        self.check((n as u128) * (n as u128))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowQuery {
    pub spec: BoxSpec,
    pub k: WaveVector,
    /// Half-width of the window; zero selects exact resonances.
    pub delta: f64,
}

/// One line of a census table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusRow {
    pub beta_label: String,
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub t: f64,
    pub delta: f64,
    pub quasi_count: u64,
    pub exact_count: u64,
    pub volume_prediction: f64,
}

/// Resonance data of every admissible pair `(k1, k3)` for one output mode.
///
/// The exact resonances are counted separately; the remaining pairs keep their
/// `|Ω|` in sorted order so that any window width can be answered by bisection.
#[derive(Clone, Debug)]
pub struct PairCensus {
    admissible: u64,
    exact: u64,
    quasi_abs_omega: Vec<f64>,
}

impl PairCensus {
    pub fn collect(spec: &BoxSpec, modes: &ModeSet, k: WaveVector, budget: &Budget) -> Result<Self> {
        if modes.is_empty() {
            return Ok(PairCensus { admissible: 0, exact: 0, quasi_abs_omega: Vec::new() });
        }
        budget.check_pairs(modes.len())?;
        let arith = spec.arithmetic();
        let d = spec.d;
        // Exact numerators are rescaled by 1 / (Q L²) only at the end.
        let scale = match arith {
            Arithmetic::Rational { denom, .. } => 1.0 / (denom as f64 * spec.l * spec.l),
            Arithmetic::Independent => 1.0,
        };
        let parts: Vec<(u64, u64, Vec<f64>)> = modes
            .modes()
            .par_iter()
            .map(|&k1| {
                let mut admissible = 0u64;
                let mut exact = 0u64;
                let mut quasi = Vec::new();
                let a = k1 - k;
                for &k3 in modes.modes() {
                    if !modes.contains(k1 + k3 - k) {
                        continue;
                    }
                    admissible += 1;
                    let b = k3 - k;
                    match arith.resonance_numerator(d, a, b) {
                        Some(0) => exact += 1,
                        Some(num) => quasi.push(num.unsigned_abs() as f64 * scale),
                        None => {
                            if arith.is_exact(d, a, b) {
                                exact += 1;
                            } else {
                                quasi.push(resonance_factored(spec, a, b).abs());
                            }
                        }
                    }
                }
                (admissible, exact, quasi)
            })
            .collect();
        let mut admissible = 0;
        let mut exact = 0;
        let mut quasi_abs_omega = Vec::new();
        for (a, e, q) in parts {
            admissible += a;
            exact += e;
            quasi_abs_omega.extend(q);
        }
        quasi_abs_omega.sort_by(f64::total_cmp);
        Ok(PairCensus { admissible, exact, quasi_abs_omega })
    }

    /// Number of momentum-admissible pairs.
    pub fn admissible(&self) -> u64 {
        self.admissible
    }

    pub fn exact(&self) -> u64 {
        self.exact
    }

    /// Pairs with `0 < |Ω| ≤ delta`.
    pub fn quasi(&self, delta: f64) -> u64 {
        let bound = delta * (1.0 + 1e-12);
        self.quasi_abs_omega.partition_point(|&w| w <= bound) as u64
    }

    /// Pairs with `|Ω| ≤ delta`, exact resonances included.
    pub fn window(&self, delta: f64) -> u64 {
        self.exact + self.quasi(delta)
    }

    /// Largest `|Ω|` over admissible pairs.
    pub fn max_abs_omega(&self) -> f64 {
        self.quasi_abs_omega.last().copied().unwrap_or(0.0)
    }
}

/// `#{(k1, k3) : k1 + k3 - k ∈ ModeSet, |Ω| ≤ δ}`.
pub fn count_window(q: &WindowQuery) -> Result<u64> {
    count_window_with(q, &Budget::default())
}

pub fn count_window_with(q: &WindowQuery, budget: &Budget) -> Result<u64> {
    if q.delta < 0.0 || q.delta.is_nan() {
        return Err(Error::InvalidArgument(format!("window half-width {} must be >= 0", q.delta)));
    }
    let modes = ModeSet::build(&q.spec)?;
    Ok(PairCensus::collect(&q.spec, &modes, q.k, budget)?.window(q.delta))
}

/// Number of exact resonances `Ω = 0` for output mode `k`.
pub fn count_exact(spec: &BoxSpec, k: WaveVector) -> Result<u64> {
    let modes = ModeSet::build(spec)?;
    Ok(PairCensus::collect(spec, &modes, k, &Budget::default())?.exact())
}

/// For each box and each time `t`, the quasi-resonant count at `δ = 1/t`
/// (exact resonances excluded), the exact count and the volume prediction
/// `L^{2d} Vol(W_δ)`.
pub fn crossover_scan(
    specs: &[BoxSpec],
    k: WaveVector,
    times: &[f64],
    volume_samples: usize,
    budget: &Budget,
) -> Result<Vec<CensusRow>> {
    if times.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::InvalidArgument("scan times must be positive and finite".into()));
    }
    let mut rows = Vec::new();
    for spec in specs {
        let modes = ModeSet::build(spec)?;
        let census = PairCensus::collect(spec, &modes, k, budget)?;
        let deltas: Vec<f64> = times.iter().map(|t| 1.0 / t).collect();
        let volumes = if volume_samples > 0 {
            window_volumes(spec, spec.wave_number(k), &deltas, volume_samples)
        } else {
            vec![f64::NAN; deltas.len()]
        };
        let lattice_scale = spec.l.powi(2 * spec.d as i32);
        for ((&t, &delta), vol) in times.iter().zip(&deltas).zip(volumes) {
            rows.push(CensusRow {
                beta_label: spec.beta_label(),
                d: spec.d,
                l: spec.l,
                t,
                delta,
                quasi_count: census.quasi(delta),
                exact_count: census.exact(),
                volume_prediction: lattice_scale * vol,
            });
        }
    }
    Ok(rows)
}

/// Largest scanned time at which the quasi count still exceeds the exact
/// count, for rows belonging to one box (sorted by increasing `t`).
pub fn crossover_time(rows: &[CensusRow]) -> Option<f64> {
    rows.iter().filter(|r| r.quasi_count > r.exact_count).map(|r| r.t).fold(None, |acc, t| {
        Some(acc.map_or(t, |a: f64| a.max(t)))
    })
}

pub fn write_census_csv<W: Write>(rows: &[CensusRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["beta_label", "d", "L", "t", "delta", "quasi_count", "exact_count", "volume_prediction"])?;
    for r in rows {
        w.write_record([
            r.beta_label.clone(),
            r.d.to_string(),
            format!("{}", r.l),
            format!("{:e}", r.t),
            format!("{:e}", r.delta),
            r.quasi_count.to_string(),
            r.exact_count.to_string(),
            format!("{:e}", r.volume_prediction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Quasi Monte-Carlo estimate of the continuum window volume
/// `Vol{(k1, k3) ∈ B² : k1 + k3 - k ∈ B, |Ω| ≤ δ}` for every `δ` in `deltas`,
/// where `B` is the cutoff ball. One Halton point set serves all widths.
pub fn window_volumes(spec: &BoxSpec, k: [f64; 3], deltas: &[f64], samples: usize) -> Vec<f64> {
    let d = spec.d;
    let c = spec.cutoff;
    let c2 = c * c;
    let box_volume = (2.0 * c).powi(2 * d as i32);
    let mut omegas = Vec::new();
    let mut point = [0.0; 6];
    for i in 0..samples {
        halton_point(i as u64 + 1, 2 * d, &mut point);
        let mut k1 = [0.0; 3];
        let mut k3 = [0.0; 3];
        for j in 0..d {
            k1[j] = c * (2.0 * point[j] - 1.0);
            k3[j] = c * (2.0 * point[d + j] - 1.0);
        }
        let norm = |v: &[f64; 3]| v[..d].iter().map(|x| x * x).sum::<f64>();
        let mut k2 = [0.0; 3];
        for j in 0..d {
            k2[j] = k1[j] + k3[j] - k[j];
        }
        if norm(&k1) > c2 || norm(&k3) > c2 || norm(&k2) > c2 {
            continue;
        }
        let omega: f64 = -2.0 * (0..d).map(|j| spec.beta[j] * (k1[j] - k[j]) * (k3[j] - k[j])).sum::<f64>();
        omegas.push(omega.abs());
    }
    omegas.sort_by(f64::total_cmp);
    deltas
        .iter()
        .map(|&delta| box_volume * omegas.partition_point(|&w| w <= delta) as f64 / samples as f64)
        .collect()
}

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

fn halton_point(i: u64, dims: usize, out: &mut [f64; 6]) {
    for (j, p) in PRIMES.iter().enumerate().take(dims) {
        out[j] = radical_inverse(i, *p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> BoxSpec {
        BoxSpec::square(1, 1.0, 1.0, 1.0).unwrap()
    }

    /// Straight enumeration over all `(k1, k2, k3)` triples, independent of the
    /// `(k1, k3)` reduction used by the census.
    fn brute(spec: &BoxSpec, k: WaveVector, delta: f64) -> (u64, u64) {
        let modes = ModeSet::build(spec).unwrap();
        let (mut window, mut exact) = (0, 0);
        for &k1 in modes.modes() {
            for &k2 in modes.modes() {
                for &k3 in modes.modes() {
                    if k1 - k2 + k3 != k {
                        continue;
                    }
                    let om = spec.omega(k1) - spec.omega(k2) + spec.omega(k3) - spec.omega(k);
                    if om.abs() <= delta + 1e-12 {
                        window += 1;
                    }
                    if om.abs() < 1e-12 {
                        exact += 1;
                    }
                }
            }
        }
        (window, exact)
    }

    #[test]
    fn toy_instance() {
        let q = WindowQuery { spec: toy(), k: WaveVector::ZERO, delta: 0.5 };
        assert_eq!(count_window(&q).unwrap(), 5);
        assert_eq!(count_exact(&toy(), WaveVector::ZERO).unwrap(), 5);
        let q = WindowQuery { delta: 10.0, ..q };
        assert_eq!(count_window(&q).unwrap(), 7);
        assert_eq!(brute(&toy(), WaveVector::ZERO, 0.5), (5, 5));
    }

    #[test]
    fn matches_brute_force() {
        let spec = BoxSpec::square(2, 3.0, 1.0, 1.0).unwrap();
        let modes = ModeSet::build(&spec).unwrap();
        for k in [WaveVector::ZERO, WaveVector::new(&[1, 2]), WaveVector::new(&[-2, 0])] {
            let c = PairCensus::collect(&spec, &modes, k, &Budget::default()).unwrap();
            for delta in [0.0, 0.2, 0.5, 1.0] {
                let (window, exact) = brute(&spec, k, delta);
                assert_eq!(c.window(delta), window, "k={k} delta={delta}");
                assert_eq!(c.exact(), exact);
            }
        }
    }

    #[test]
    fn empty_mode_set_counts_nothing() {
        let modes = ModeSet::build(&toy()).unwrap();
        let census = PairCensus::collect(&toy(), &modes, WaveVector::new(&[5]), &Budget::default()).unwrap();
        assert_eq!(census.admissible(), 0);
        assert_eq!(census.window(100.0), 0);
    }

    #[test]
    fn budget_guard() {
        let q = WindowQuery { spec: BoxSpec::square(2, 16.0, 1.0, 1.0).unwrap(), k: WaveVector::ZERO, delta: 0.1 };
        let err = count_window_with(&q, &Budget { max_operations: 1000 }).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn degenerate_lower_bound() {
        for spec in [BoxSpec::square(2, 5.0, 1.0, 1.0).unwrap(), BoxSpec::generic(2, 5.0, 1.0, 1.0).unwrap()] {
            let modes = ModeSet::build(&spec).unwrap();
            let c = PairCensus::collect(&spec, &modes, WaveVector::ZERO, &Budget::default()).unwrap();
            assert!(c.exact() >= 2 * modes.len() as u64 - 1);
        }
    }

    #[test]
    fn irrational_exact_count_is_per_coordinate() {
        let l = 8.0;
        let sq = BoxSpec::square(2, l, 1.0, 1.0).unwrap();
        let irr = BoxSpec::new(2, l, vec![1.0, std::f64::consts::SQRT_2], 1.0, 1.0).unwrap();
        let modes = ModeSet::build(&sq).unwrap();
        let k = WaveVector::ZERO;
        let mut per_coordinate = 0u64;
        for &k1 in modes.modes() {
            for &k3 in modes.modes() {
                if modes.contains(k1 + k3 - k) && (0..2).all(|j| (k1 - k).0[j] * (k3 - k).0[j] == 0) {
                    per_coordinate += 1;
                }
            }
        }
        let exact_irr = count_exact(&irr, k).unwrap();
        assert_eq!(exact_irr, per_coordinate);
        assert!(exact_irr < count_exact(&sq, k).unwrap());
    }

    #[test]
    fn halton_volume_of_unconstrained_window() {
        // With δ above every |Ω| the volume is that of {k1, k3, k1 + k3 ∈ B}
        // which for d = 1, c = 1, k = 0 is 3 (a hexagon of area 3).
        let spec = BoxSpec::square(1, 1.0, 1.0, 1.0).unwrap();
        let v = window_volumes(&spec, [0.0; 3], &[100.0], 200_000);
        assert!((v[0] - 3.0).abs() < 1e-3, "{}", v[0]);
    }

    #[test]
    fn scan_rows_and_crossover() {
        let specs = vec![BoxSpec::square(2, 4.0, 1.0, 1.0).unwrap()];
        let times = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let rows = crossover_scan(&specs, WaveVector::ZERO, &times, 10_000, &Budget::default()).unwrap();
        assert_eq!(rows.len(), times.len());
        assert!(rows.windows(2).all(|w| w[1].quasi_count <= w[0].quasi_count));
        // Ω ∈ (2/L²) Z on the square torus, so δ < 2/L² leaves no quasi resonances.
        assert_eq!(rows.last().unwrap().quasi_count, 0);
        let tc = crossover_time(&rows).unwrap();
        assert!(tc < 32.0);
        let mut buf = Vec::new();
        write_census_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("beta_label,d,L,t,delta,quasi_count,exact_count,volume_prediction\n"));
        assert_eq!(text.lines().count(), times.len() + 1);
    }
}
