//! Gaussian heat kernels sampled on the lattice and the integrated
//! diffusivity `V(1)` for exponentially dilated stacks.

use serde::{Deserialize, Serialize};

use super::model::DiffusionModel;
use crate::profile::neumaier_sum;
use crate::{Boundary, CapacityProfile, Error, Grid, Result};

/// Gaussian weights indexed by periodic displacement, summed over images
/// and normalized to unit mass.
#[derive(Debug, Clone)]
pub(crate) struct PeriodicKernel {
    grid: Grid,
    weights: Vec<f64>,
}

impl PeriodicKernel {
    /// `cov` is the full covariance (`2V` times the diffusion tensor).
    /// Returns `None` for a zero covariance (identity kernel).
    pub(crate) fn new(grid: Grid, cov: [[f64; 2]; 2]) -> Result<Option<Self>> {
        if grid.boundary() != Boundary::Periodic {
            return Err(Error::invalid("heat kernels are defined on periodic grids only"));
        }
        let weights = if grid.dim() == 1 {
            let var = cov[0][0];
            if var == 0.0 {
                return Ok(None);
            }
            if !(var > 0.0 && var.is_finite()) {
                return Err(Error::invalid(format!("kernel variance must be positive, got {var}")));
            }
            axis_weights(grid.extent(0), var, |y| y * y / var)
        } else {
            if cov.iter().flatten().all(|c| *c == 0.0) {
                return Ok(None);
            }
            let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
            if !(cov[0][0] > 0.0 && cov[1][1] > 0.0 && det > 0.0) {
                return Err(Error::invalid(
                    "2D heat kernel needs a positive definite diffusion tensor",
                ));
            }
            let inv = [
                [cov[1][1] / det, -cov[0][1] / det],
                [-cov[1][0] / det, cov[0][0] / det],
            ];
            let (n0, n1) = (grid.extent(0), grid.extent(1));
            let m0 = images(n0, cov[0][0]);
            let m1 = images(n1, cov[1][1]);
            let mut w = vec![0.0; grid.sites()];
            for j0 in 0..n0 {
                for j1 in 0..n1 {
                    let mut acc = 0.0;
                    for a in -m0..=m0 {
                        let y0 = j0 as f64 + (a * n0 as i64) as f64;
                        for b in -m1..=m1 {
                            let y1 = j1 as f64 + (b * n1 as i64) as f64;
                            let q = inv[0][0] * y0 * y0 + 2.0 * inv[0][1] * y0 * y1 + inv[1][1] * y1 * y1;
                            acc += (-0.5 * q).exp();
                        }
                    }
                    w[j0 * n1 + j1] = acc;
                }
            }
            w
        };
        let total = neumaier_sum(&weights);
        Ok(Some(PeriodicKernel {
            grid,
            weights: weights.into_iter().map(|w| w / total).collect(),
        }))
    }

    /// Circular convolution of one channel; zero inputs are skipped.
    pub(crate) fn convolve(&self, input: &[f64], out: &mut [f64]) {
        let (n0, n1) = (self.grid.extent(0), self.grid.extent(1));
        for (y, &v) in input.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let [y0, y1] = self.grid.coords(y);
            for x0 in 0..n0 {
                let d0 = (x0 + n0 - y0) % n0;
                let krow = &self.weights[d0 * n1..(d0 + 1) * n1];
                let orow = &mut out[x0 * n1..(x0 + 1) * n1];
                for (x1, o) in orow.iter_mut().enumerate() {
                    let d1 = (x1 + n1 - y1) % n1;
                    *o += v * krow[d1];
                }
            }
        }
    }

    pub(crate) fn apply(&self, p: &CapacityProfile) -> CapacityProfile {
        let n = self.grid.sites();
        let mut values = vec![0.0; p.values().len()];
        for c in 0..p.channels() {
            self.convolve(p.channel(c), &mut values[c * n..(c + 1) * n]);
        }
        CapacityProfile::from_trusted(*p.grid(), p.channels(), values)
    }
}

fn images(n: usize, var: f64) -> i64 {
    (10.0 * var.sqrt() / n as f64).ceil() as i64 + 1
}

fn axis_weights(n: usize, var: f64, q: impl Fn(f64) -> f64) -> Vec<f64> {
    let m = images(n, var);
    (0..n)
        .map(|j| {
            (-m..=m)
                .map(|a| (-0.5 * q(j as f64 + (a * n as i64) as f64)).exp())
                .sum()
        })
        .collect()
}

/// Covariance of the Gaussian spreading between times `s` and `t`.
pub(crate) fn covariance_between(model: &DiffusionModel, s: f64, t: f64) -> [[f64; 2]; 2] {
    let a = model.diffusivity.integral_tensor(t);
    let b = model.diffusivity.integral_tensor(s);
    let mut cov = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            cov[i][j] = 2.0 * (a[i][j] - b[i][j]);
        }
    }
    cov
}

/// `π(t, ·)`: the initial profile convolved with the lattice-sampled Gaussian
/// of covariance `2V(t)` (periodic images summed, kernel renormalized).
pub fn heat_kernel_solution(model: &DiffusionModel, t: f64) -> Result<CapacityProfile> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("time must lie in [0, 1], got {t}")));
    }
    model.validate()?;
    if !model.absorption.is_zero() {
        return Err(Error::invalid("heat_kernel_solution takes no absorption"));
    }
    if model.source.is_some() {
        return Err(Error::invalid("heat_kernel_solution takes no source; use duhamel_solution"));
    }
    match PeriodicKernel::new(*model.initial.grid(), covariance_between(model, 0.0, t))? {
        None => Ok(model.initial.clone()),
        Some(k) => Ok(k.apply(&model.initial)),
    }
}

/// How the diffusivity grows across a dilated stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DilationGrowth {
    /// `D(t) = e^{α(1−t)}`.
    Exponent { alpha: f64 },
    /// Per-layer dilation ratio `λ` over `depth` layers, `e^α = λ^{2(L−1)}`.
    Ratio { lambda: f64, depth: usize },
}

impl DilationGrowth {
    pub fn exponent(&self) -> f64 {
        match *self {
            DilationGrowth::Exponent { alpha } => alpha,
            DilationGrowth::Ratio { lambda, depth } => 2.0 * (depth as f64 - 1.0) * lambda.ln(),
        }
    }
}

/// `V(1) = ∫₀¹ D(s) ds`.
///
/// * `Exponent { α }`: `(e^α − 1) / α`, with the value 1 at `α = 0`.
/// * `Ratio { λ, L }`: `λ^{2L−2} / ((2L − 2) ln λ)`, the large-`L` form that
///   drops the `−1`; the exact integral is this times `1 − λ^{−(2L−2)}`.
///   `λ = 1` gives 1.
pub fn v_integral(growth: DilationGrowth) -> Result<f64> {
    match growth {
        DilationGrowth::Exponent { alpha } => {
            if !alpha.is_finite() {
                return Err(Error::invalid(format!("growth exponent must be finite, got {alpha}")));
            }
            Ok(if alpha == 0.0 { 1.0 } else { alpha.exp_m1() / alpha })
        }
        DilationGrowth::Ratio { lambda, depth } => {
            if !(lambda >= 1.0 && lambda.is_finite()) {
                return Err(Error::invalid(format!("dilation ratio must be >= 1, got {lambda}")));
            }
            if depth < 2 {
                return Err(Error::invalid(format!("depth must be >= 2, got {depth}")));
            }
            if lambda == 1.0 {
                return Ok(1.0);
            }
            let span = 2.0 * (depth as f64 - 1.0);
            Ok(lambda.powf(span) / (span * lambda.ln()))
        }
    }
}
