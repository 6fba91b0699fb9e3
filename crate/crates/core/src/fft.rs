//! Zero-padded periodic grid for evaluating cubic convolutions in physical
//! space.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::lattice::ModeSet;

/// Largest padded grid (points) a workspace will allocate.
pub const DEFAULT_MAX_GRID_POINTS: usize = 1 << 26;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Per-axis grid size for a mode set of index radius `r`: at least
/// `ceil(factor * (2r + 1))`, and never below `4r + 1`, the size at which
/// the cubic product stops aliasing back onto the box.
pub fn padded_size(radius: i32, factor: f64) -> usize {
    let span = (2 * radius + 1) as f64;
    let n = (factor * span - 1e-9).ceil() as usize;
    n.max(4 * radius as usize + 1).max(1)
}

pub struct PaddedGrid {
    d: usize,
    n: usize,
    slots: Vec<usize>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    grid: Vec<Complex64>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl PaddedGrid {
    pub fn new(modes: &ModeSet, factor: f64) -> Result<Self> {
        Self::with_limit(modes, factor, DEFAULT_MAX_GRID_POINTS)
    }

    pub fn with_limit(modes: &ModeSet, factor: f64, max_points: usize) -> Result<Self> {
        if !(factor >= 1.0 && factor.is_finite()) {
            return Err(Error::InvalidArgument(format!("dealias factor {factor} must be >= 1")));
        }
        let d = modes.d();
        let n = padded_size(modes.radius(), factor);
        let points = (n as u128).pow(d as u32);
        if points > max_points as u128 {
            return Err(Error::BudgetExceeded { estimated: points, budget: max_points as u128 });
        }
        let slots = modes
            .modes()
            .iter()
            .map(|m| {
                m.components(d)
                    .iter()
                    .fold(0usize, |acc, &c| acc * n + c.rem_euclid(n as i32) as usize)
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Ok(PaddedGrid {
            d,
            n,
            slots,
            fwd,
            inv,
            grid: vec![ZERO; points as usize],
            line: vec![ZERO; n],
            scratch: vec![ZERO; scratch_len],
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn points(&self) -> usize {
        self.grid.len()
    }

    /// Physical-space samples `v_j = Σ_m A_m e^{2πi m·j/n}`, left in the
    /// internal buffer.
    fn synthesize(&mut self, amps: &[Complex64]) {
        self.grid.fill(ZERO);
        for (&s, &a) in self.slots.iter().zip(amps) {
            self.grid[s] = a;
        }
        let plan = self.inv.clone();
        self.transform(&*plan);
    }

    fn transform(&mut self, plan: &dyn Fft<f64>) {
        let n = self.n;
        for axis in 0..self.d {
            let stride = n.pow((self.d - 1 - axis) as u32);
            if stride == 1 {
                for chunk in self.grid.chunks_exact_mut(n) {
                    plan.process_with_scratch(chunk, &mut self.scratch);
                }
                continue;
            }
            let block = stride * n;
            for base in (0..self.grid.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (i, x) in self.line.iter_mut().enumerate() {
                        *x = self.grid[start + i * stride];
                    }
                    plan.process_with_scratch(&mut self.line, &mut self.scratch);
                    for (i, x) in self.line.iter().enumerate() {
                        self.grid[start + i * stride] = *x;
                    }
                }
            }
        }
    }

    /// `out_k = c Σ_{k1-k2+k3=k} A_{k1} Ā_{k2} A_{k3}` for every mode.
    pub fn cubic(&mut self, amps: &[Complex64], c: f64, out: &mut [Complex64]) {
        self.synthesize(amps);
        for v in self.grid.iter_mut() {
            *v *= v.norm_sqr();
        }
        let plan = self.fwd.clone();
        self.transform(&*plan);
        let scale = c / self.grid.len() as f64;
        for (o, &s) in out.iter_mut().zip(&self.slots) {
            *o = self.grid[s] * scale;
        }
    }

    /// `Σ_{k1-k2+k3-k4=0} A_{k1} Ā_{k2} A_{k3} Ā_{k4}`, evaluated as the grid
    /// mean of `|v|⁴`.
    pub fn quartic(&mut self, amps: &[Complex64]) -> f64 {
        self.synthesize(amps);
        let s: f64 = self.grid.iter().map(|v| v.norm_sqr().powi(2)).sum();
        s / self.grid.len() as f64
    }
}
