use crate::{CapacityProfile, Error, PiecewiseConstant, Result};

/// Mass split of leaky diffusion: `κ^X = e^{−∫₀¹α} · mass(κ^L)` reaches the
/// input, the rest leaks. Diffusion moves no mass on a periodic grid and the
/// leak rate is spatially uniform, so the diffusivity does not enter.
pub fn leak_split_analytic(
    alpha: &PiecewiseConstant,
    diffusivity: f64,
    kappa_l: &CapacityProfile,
) -> Result<(f64, f64)> {
    if !(diffusivity >= 0.0 && diffusivity.is_finite()) {
        return Err(Error::invalid(format!(
            "diffusivity must be nonnegative, got {diffusivity}"
        )));
    }
    let total = kappa_l.mass();
    let mass_x = (-alpha.integral(1.0)).exp() * total;
    Ok((mass_x, total - mass_x))
}
