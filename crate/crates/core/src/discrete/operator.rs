//! The per-layer capacity operator `W ∘ W = I + εΔ` and its weight view.
//!
//! Coefficients are stored as exact squares of the weight magnitudes, so
//! squaring [`WeightStencil`] reproduces [`LayerOperator`] bit for bit
//! (IEEE `sqrt(w * w) == |w|`). Rounding a coefficient to the nearest square
//! moves it by at most a few ulps.

use rand::Rng;

use crate::{CapacityProfile, Error, Grid, Offset, Result, RngSpec, StencilGenerator};

/// Gather form: `κ'(x) = diagonal · κ(x) + Σ_v coeff_v · κ(x + v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOperator {
    diagonal: f64,
    taps: Vec<(Offset, f64)>,
}

/// Signed per-offset weights whose squares are the operator coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightStencil {
    pub center: f64,
    pub taps: Vec<(Offset, f64)>,
}

fn square_snapped(x: f64) -> f64 {
    let w = x.sqrt();
    w * w
}

pub(crate) fn check_rate(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!(
            "capacity rate epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    Ok(())
}

/// One layer of residual capacity propagation.
pub fn build_operator(gen: &StencilGenerator, epsilon: f64) -> Result<LayerOperator> {
    check_rate(epsilon)?;
    Ok(LayerOperator {
        diagonal: square_snapped(1.0 - epsilon),
        taps: gen
            .entries()
            .iter()
            .map(|(o, r)| (*o, square_snapped(epsilon * r)))
            .collect(),
    })
}

/// Weight stencil with `w_v² = εδ_v`, `w_0² = 1 − ε`; off-diagonal signs
/// are drawn uniformly from `rng`.
pub fn weights_from_operator(
    gen: &StencilGenerator,
    epsilon: f64,
    rng: &RngSpec,
) -> Result<WeightStencil> {
    let op = build_operator(gen, epsilon)?;
    let mut stream = rng.stream();
    Ok(WeightStencil {
        center: op.diagonal.sqrt(),
        taps: op
            .taps
            .iter()
            .map(|(o, c)| {
                let sign = if stream.gen::<bool>() { 1.0 } else { -1.0 };
                (*o, sign * c.sqrt())
            })
            .collect(),
    })
}

impl WeightStencil {
    /// Elementwise square: the capacity operator `W ∘ W`.
    pub fn capacity_operator(&self) -> LayerOperator {
        LayerOperator {
            diagonal: self.center * self.center,
            taps: self.taps.iter().map(|(o, w)| (*o, w * w)).collect(),
        }
    }
}

impl LayerOperator {
    pub fn diagonal(&self) -> f64 {
        self.diagonal
    }

    pub fn taps(&self) -> &[(Offset, f64)] {
        &self.taps
    }

    /// Sum of one column: the fraction of a site's capacity that stays on the grid
    /// (ignoring boundary loss).
    pub fn column_sum(&self) -> f64 {
        self.diagonal + self.taps.iter().map(|t| t.1).sum::<f64>()
    }

    pub fn apply(&self, kappa: &CapacityProfile) -> CapacityProfile {
        let grid = *kappa.grid();
        let n = grid.sites();
        let mut out = Vec::with_capacity(kappa.values().len());
        for c in 0..kappa.channels() {
            let src = kappa.channel(c);
            let mut dst: Vec<f64> = src.iter().map(|v| self.diagonal * v).collect();
            for (offset, coeff) in &self.taps {
                gather_shifted(&grid, src, &mut dst, *offset, *coeff);
            }
            debug_assert_eq!(dst.len(), n);
            out.extend(dst);
        }
        CapacityProfile::from_trusted(grid, kappa.channels(), out)
    }
}

/// `dst[x] += coeff * src[x + offset]`, skipping sources outside an absorbing grid.
pub(crate) fn gather_shifted(grid: &Grid, src: &[f64], dst: &mut [f64], offset: Offset, coeff: f64) {
    let n1 = grid.extent(1);
    let col_map = axis_map(grid, 1, offset.0[1]);
    for i0 in 0..grid.extent(0) {
        let Some(s0) = shift_axis(grid, 0, i0, offset.0[0]) else {
            continue;
        };
        let dst_row = &mut dst[i0 * n1..(i0 + 1) * n1];
        let src_row = &src[s0 * n1..(s0 + 1) * n1];
        for (d, s1) in dst_row.iter_mut().zip(&col_map) {
            if let Some(s1) = s1 {
                *d += coeff * src_row[*s1];
            }
        }
    }
}

fn shift_axis(grid: &Grid, axis: usize, i: usize, by: i64) -> Option<usize> {
    let n = grid.extent(axis) as i64;
    let x = i as i64 + by;
    match grid.boundary() {
        crate::Boundary::Periodic => Some(x.rem_euclid(n) as usize),
        crate::Boundary::Absorbing => (0..n).contains(&x).then_some(x as usize),
    }
}

fn axis_map(grid: &Grid, axis: usize, by: i64) -> Vec<Option<usize>> {
    (0..grid.extent(axis))
        .map(|i| shift_axis(grid, axis, i, by))
        .collect()
}
