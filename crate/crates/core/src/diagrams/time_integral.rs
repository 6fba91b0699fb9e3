//! Iterated oscillatory time integrals over tree-ordered domains.
//!
//! For a tree with rate `θ_n` at each branching node,
//! `I(τ) = ∫_D Π_n e^{iθ_n t_n} dt`, where `D` requires `0 < t_c < t_n < τ`
//! whenever branching node `c` is a child of `n`. Integration runs leaves
//! upward; every intermediate function is an exact finite sum of terms
//! `a·s^p·e^{iμs}`.

use num_complex::Complex64;

use super::tree::SignedTree;
use crate::error::{Error, Result};

/// Below this value of `|μ|τ` the exponential is integrated through its
/// power series instead of the closed form.
pub const SERIES_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Mono {
    a: Complex64,
    p: u32,
    mu: f64,
}

#[derive(Clone, Debug, Default)]
struct Poly(Vec<Mono>);

impl Poly {
    fn one() -> Poly {
        Poly(vec![Mono { a: Complex64::new(1.0, 0.0), p: 0, mu: 0.0 }])
    }

    fn push(&mut self, m: Mono) {
        match self.0.iter_mut().find(|x| x.p == m.p && x.mu.to_bits() == m.mu.to_bits()) {
            Some(x) => x.a += m.a,
            None => self.0.push(m),
        }
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for x in &self.0 {
            for y in &other.0 {
                out.push(Mono { a: x.a * y.a, p: x.p + y.p, mu: x.mu + y.mu });
            }
        }
        out
    }

    fn shift(&self, theta: f64) -> Poly {
        Poly(self.0.iter().map(|m| Mono { mu: m.mu + theta, ..*m }).collect())
    }

    /// `s ↦ ∫_0^s (self)(t) dt`, valid for `s ≤ tau`.
    fn integrate(&self, tau: f64) -> Poly {
        let mut out = Poly::default();
        for m in &self.0 {
            if m.mu == 0.0 || m.mu.abs() * tau < SERIES_THRESHOLD {
                let z = Complex64::new(0.0, m.mu);
                let mut coef = m.a;
                for j in 0..64u32 {
                    let p = m.p + j + 1;
                    out.push(Mono { a: coef / p as f64, p, mu: 0.0 });
                    coef = coef * z / (j + 1) as f64;
                    if coef.norm() * tau.powi(j as i32 + 1) <= 1e-18 * m.a.norm() {
                        break;
                    }
                }
            } else {
                // ∫_0^s t^p e^{iμt} = e^{iμs} Σ_q (-1)^{p-q} p!/q! s^q/(iμ)^{p-q+1} - (-1)^p p!/(iμ)^{p+1}
                let z = Complex64::new(0.0, m.mu);
                let p = m.p;
                let mut fact_ratio = 1.0; // p!/q!
                let mut zpow = z; // (iμ)^{p-q+1}
                for q in (0..=p).rev() {
                    let sign = if (p - q) % 2 == 0 { 1.0 } else { -1.0 };
                    out.push(Mono { a: m.a * sign * fact_ratio / zpow, p: q, mu: m.mu });
                    if q > 0 {
                        fact_ratio *= q as f64;
                        zpow *= z;
                    }
                }
                let sign = if p % 2 == 0 { -1.0 } else { 1.0 };
                out.push(Mono { a: m.a * sign * fact_ratio / zpow, p: 0, mu: 0.0 });
            }
        }
        out
    }

    fn eval(&self, s: f64) -> Complex64 {
        self.0.iter().map(|m| m.a * s.powi(m.p as i32) * Complex64::from_polar(1.0, m.mu * s)).sum()
    }
}

fn node_poly(tree: &SignedTree, i: usize, rates: &[f64], tau: f64) -> Poly {
    let children = tree.node(i).children.expect("branching node");
    let mut body = Poly::one();
    for c in children {
        if !tree.node(c).is_leaf() {
            body = body.mul(&node_poly(tree, c, rates, tau));
        }
    }
    body.shift(rates[i]).integrate(tau)
}

/// `∫_D Π e^{iθ_n t_n} dt`; `rates` is indexed by node (leaf entries unused).
pub fn time_integral(tree: &SignedTree, rates: &[f64], tau: f64) -> Result<Complex64> {
    if rates.len() != tree.len() {
        return Err(Error::InvalidArgument(format!("{} rates for a tree of {} nodes", rates.len(), tree.len())));
    }
    if !(tau >= 0.0 && tau.is_finite()) || rates.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidArgument("time integral needs finite rates and τ ≥ 0".into()));
    }
    if tree.is_trivial() {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(node_poly(tree, 0, rates, tau).eval(tau))
}

/// Rates `θ_n = -ζ_n λ Ω_n` of the interaction-picture phases in rescaled time.
pub fn node_rates(tree: &SignedTree, resonance: &[f64], lambda: f64) -> Vec<f64> {
    tree.nodes()
        .iter()
        .zip(resonance)
        .map(|(n, &o)| if n.is_leaf() { 0.0 } else { -n.sign.value() * lambda * o })
        .collect()
}

/// Volume of the tree-ordered domain: `τ^n / Π_n |subtree(n)|`.
pub fn domain_volume(tree: &SignedTree, tau: f64) -> f64 {
    tree.branching().iter().fold(tau.powi(tree.order() as i32), |v, &i| v / tree.branching_size(i) as f64)
}
