//! Decorated couple sums and truncated second-moment predictions.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::couple::{enum_couples_of_order_capped, Couple};
use super::time_integral::{node_rates, time_integral};
use super::tree::{Sign, SignedTree};
use crate::census::Budget;
use crate::error::{Error, Result};
use crate::lattice::{BoxSpec, ModeSet, WaveVector};

/// Expansion cap for lattice-summed values.
pub const LATTICE_CAP: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagramConfig {
    /// Fraction of the kinetic time: `t = τ δ T_kin`.
    pub delta: f64,
    pub order_cap: usize,
    pub budget: Budget,
}

impl Default for DiagramConfig {
    fn default() -> Self {
        DiagramConfig { delta: 0.5, order_cap: LATTICE_CAP, budget: Budget { max_operations: 1_000_000_000 } }
    }
}

impl DiagramConfig {
    /// `λ = δ L^{2γ}`, the factor converting rescaled time τ to physical time.
    pub fn lambda(&self, spec: &BoxSpec) -> f64 {
        self.delta * spec.t_kin()
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta = {} must be positive", self.delta)));
        }
        Ok(())
    }
}

/// Per-tree data for evaluating decorations.
struct TreePlan<'a> {
    tree: &'a SignedTree,
    /// Pair label of each node that is a leaf.
    label: Vec<usize>,
    sign: Sign,
}

impl TreePlan<'_> {
    /// Decorates the tree from pair wave vectors; `None` if an intermediate
    /// node leaves the mode set. Returns the root index and the phase integral.
    fn evaluate(&self, modes: &ModeSet, pair_k: &[usize], lambda: f64, tau: f64, scratch: &mut Scratch) -> Result<Option<(usize, Complex64)>> {
        let n = self.tree.len();
        scratch.idx.clear();
        scratch.idx.resize(n, 0);
        scratch.res.clear();
        scratch.res.resize(n, 0.0);
        let omegas = modes.omegas();
        for i in (0..n).rev() {
            match self.tree.node(i).children {
                None => scratch.idx[i] = pair_k[self.label[i]],
                Some([a, b, c]) => {
                    let k: WaveVector = modes.mode(scratch.idx[a]) - modes.mode(scratch.idx[b]) + modes.mode(scratch.idx[c]);
                    let Some(j) = modes.index_of(k) else { return Ok(None) };
                    scratch.idx[i] = j;
                    scratch.res[i] = omegas[scratch.idx[a]] - omegas[scratch.idx[b]] + omegas[scratch.idx[c]] - omegas[j];
                }
            }
        }
        let rates = node_rates(self.tree, &scratch.res, lambda);
        Ok(Some((scratch.idx[0], time_integral(self.tree, &rates, tau)?)))
    }
}

#[derive(Default)]
struct Scratch {
    idx: Vec<usize>,
    res: Vec<f64>,
}

fn check_inputs(spec: &BoxSpec, modes: &ModeSet, n_in: &[f64], tau: f64) -> Result<()> {
    spec.validate()?;
    if n_in.len() != modes.len() {
        return Err(Error::InvalidArgument(format!("{} spectrum values for {} modes", n_in.len(), modes.len())));
    }
    if n_in.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidArgument("spectrum values must be finite and non-negative".into()));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("τ = {tau} must be non-negative")));
    }
    Ok(())
}

/// Contribution of `c` to `E[A_k(t) conj(A_k(t))]` for Gaussian initial data
/// with spectrum `n_in` (aligned with `ModeSet::build(spec)`), per mode `k`,
/// at `t = τ λ`.
pub fn couple_value(c: &Couple, spec: &BoxSpec, n_in: &[f64], tau: f64, cfg: &DiagramConfig) -> Result<Vec<Complex64>> {
    let modes = ModeSet::build(spec)?;
    couple_value_on(c, spec, &modes, n_in, tau, cfg)
}

fn couple_value_on(c: &Couple, spec: &BoxSpec, modes: &ModeSet, n_in: &[f64], tau: f64, cfg: &DiagramConfig) -> Result<Vec<Complex64>> {
    check_inputs(spec, modes, n_in, tau)?;
    cfg.validate()?;
    let pairs = c.pairs();
    let s = modes.len();
    let cost = (s as u128).saturating_pow(pairs.len() as u32).saturating_mul(c.leaf_count() as u128);
    cfg.budget.check(cost)?;
    let lambda = cfg.lambda(spec);
    let lp = c.plus().leaves().len();
    let plans: Vec<TreePlan> = [Sign::Plus, Sign::Minus]
        .into_iter()
        .map(|sign| {
            let tree = c.tree(sign);
            let mut label = vec![usize::MAX; tree.len()];
            let offset = if sign == Sign::Plus { 0 } else { lp };
            for (g, &node) in tree.leaves().iter().enumerate() {
                let gl = g + offset;
                label[node] = pairs.iter().position(|&(a, b)| a == gl || b == gl).expect("perfect pairing");
            }
            TreePlan { tree, label, sign }
        })
        .collect();
    // node factor -iζ c λ at every branching node of both trees
    let node_factor = spec.coupling() * lambda;
    let mut prefactor = Complex64::new(1.0, 0.0);
    for plan in &plans {
        for i in plan.tree.branching() {
            prefactor *= Complex64::new(0.0, -plan.tree.node(i).sign.value() * node_factor);
        }
    }
    debug_assert!(plans[0].sign == Sign::Plus);
    let p = pairs.len();
    let chunks: Vec<Result<Vec<Complex64>>> = (0..s)
        .into_par_iter()
        .map(|first| {
            let mut out = vec![Complex64::new(0.0, 0.0); s];
            let mut pair_k = vec![0usize; p];
            pair_k[0] = first;
            let mut scratch = Scratch::default();
            loop {
                let weight: f64 = pair_k.iter().map(|&i| n_in[i]).product();
                if weight != 0.0 {
                    if let Some((rp, ip)) = plans[0].evaluate(modes, &pair_k, lambda, tau, &mut scratch)? {
                        if let Some((rm, im)) = plans[1].evaluate(modes, &pair_k, lambda, tau, &mut scratch)? {
                            if rp == rm {
                                out[rp] += prefactor * weight * ip * im;
                            }
                        }
                    }
                }
                // odometer over pairs 1..p
                let mut j = 1;
                while j < p {
                    pair_k[j] += 1;
                    if pair_k[j] < s {
                        break;
                    }
                    pair_k[j] = 0;
                    j += 1;
                }
                if j >= p {
                    break;
                }
            }
            Ok(out)
        })
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); s];
    for chunk in chunks {
        for (t, v) in total.iter_mut().zip(chunk?) {
            *t += v;
        }
    }
    Ok(total)
}

/// Sum of all couple values with `n₊ + n₋ ≤ order`, per mode; real by
/// conjugate symmetry, which is checked before the imaginary part is dropped.
pub fn truncated_moment(spec: &BoxSpec, n_in: &[f64], tau: f64, order: usize, cfg: &DiagramConfig) -> Result<Vec<f64>> {
    Ok(truncated_moment_by_order(spec, n_in, tau, order, cfg)?.into_iter().fold(vec![0.0; n_in.len()], |mut acc, v| {
        acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
        acc
    }))
}

/// Per-order contributions `[order 0, order 1, ...]` to the truncated moment.
pub fn truncated_moment_by_order(spec: &BoxSpec, n_in: &[f64], tau: f64, order: usize, cfg: &DiagramConfig) -> Result<Vec<Vec<f64>>> {
    if order > cfg.order_cap {
        return Err(Error::CapExceeded { order, cap: cfg.order_cap });
    }
    let modes = ModeSet::build(spec)?;
    check_inputs(spec, &modes, n_in, tau)?;
    let mut out = Vec::with_capacity(order + 1);
    for n in 0..=order {
        let couples = enum_couples_of_order_capped(n, cfg.order_cap)?;
        let mut sum = vec![Complex64::new(0.0, 0.0); modes.len()];
        for c in &couples {
            for (s, v) in sum.iter_mut().zip(couple_value_on(c, spec, &modes, n_in, tau, cfg)?) {
                *s += v;
            }
        }
        let mut real = Vec::with_capacity(sum.len());
        for (i, v) in sum.into_iter().enumerate() {
            if v.im.abs() > IMAGINARY_TOLERANCE * v.re.abs().max(1.0) {
                return Err(Error::ImaginaryResidue { mode: i, value: v.im });
            }
            real.push(v.re);
        }
        out.push(real);
    }
    Ok(out)
}

/// Allowed imaginary residue, relative to `max(1, |Re|)`.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;
