use crate::discrete::gather_into;
use crate::{CapacityProfile, Error, Result, StencilGenerator};

/// Exact `L → ∞` limit of residual propagation with `ε = c/(L − 1)` on the
/// lattice: `exp(c (J − I)) κ` with `J` the pure jump operator of `gen`,
/// summed as a Poisson mixture of `m`-jump distributions until the
/// neglected Poisson tail is below 1e-17.
pub fn lattice_diffusion_limit(
    gen: &StencilGenerator,
    rate: f64,
    kappa: &CapacityProfile,
) -> Result<CapacityProfile> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::invalid(format!("rate must be nonnegative, got {rate}")));
    }
    if gen.dim() != kappa.grid().dim() {
        return Err(Error::ShapeMismatch(format!(
            "generator is {}D but grid is {}D",
            gen.dim(),
            kappa.grid().dim()
        )));
    }
    let grid = *kappa.grid();
    let n = grid.sites();
    let mut out = Vec::with_capacity(kappa.values().len());
    for c in 0..kappa.channels() {
        let mut term = kappa.channel(c).to_vec();
        let mut weight = (-rate).exp();
        let mut acc: Vec<f64> = term.iter().map(|v| weight * v).collect();
        let mut m = 0usize;
        loop {
            // Past the mode the Poisson terms shrink at least geometrically.
            let next_ratio = rate / (m + 1) as f64;
            if next_ratio < 1.0 && weight * next_ratio / (1.0 - next_ratio) < 1e-17 {
                break;
            }
            m += 1;
            let mut next = vec![0.0; n];
            for (offset, r) in gen.entries() {
                gather_into(&grid, &term, &mut next, *offset, *r);
            }
            term = next;
            weight *= rate / m as f64;
            acc.iter_mut().zip(&term).for_each(|(a, t)| *a += weight * t);
            if m > 10_000 {
                return Err(Error::invalid("lattice limit did not converge"));
            }
        }
        out.extend(acc);
    }
    CapacityProfile::from_values(grid, kappa.channels(), out)
}
