use super::kernel::{covariance_between, PeriodicKernel};
use super::model::DiffusionModel;
use crate::{CapacityProfile, Error, Result};

/// Source-driven diffusion in closed form:
/// `π(t) = G_{2V(t)} * π(0) + ∫₀ᵗ G_{2V(t)−2V(τ)} * s(τ, ·) dτ`,
/// the time integral taken by the midpoint rule over `round(t·steps)`
/// equal intervals (the solver's own grid when `t = 1`).
pub fn duhamel_solution(model: &DiffusionModel, t: f64, steps: usize) -> Result<CapacityProfile> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("time must lie in [0, 1], got {t}")));
    }
    if steps == 0 {
        return Err(Error::invalid("duhamel_solution needs at least one step"));
    }
    model.validate()?;
    if !model.absorption.is_zero() {
        return Err(Error::invalid("duhamel_solution takes no absorption"));
    }
    let source = model
        .source
        .as_ref()
        .ok_or_else(|| Error::invalid("duhamel_solution needs a source density"))?;
    let grid = *model.initial.grid();
    let n = grid.sites();
    if model.initial.channels() != 1 {
        return Err(Error::ShapeMismatch("duhamel_solution is single-channel".into()));
    }

    let mut acc = match PeriodicKernel::new(grid, covariance_between(model, 0.0, t))? {
        None => model.initial.values().to_vec(),
        Some(k) => k.apply(&model.initial).into_values(),
    };
    let intervals = (t * steps as f64).round() as usize;
    if intervals == 0 {
        return CapacityProfile::from_values(grid, 1, acc);
    }
    let h = t / intervals as f64;
    let mut injected = vec![0.0; n];
    for j in 0..intervals {
        let tau = (j as f64 + 0.5) * h;
        let s = source.density(tau, &grid);
        if s.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "source density has {} values, grid has {n} sites",
                s.len()
            )));
        }
        if let Some(bad) = s.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "source density must be nonnegative, got {bad} at t = {tau}"
            )));
        }
        injected.iter_mut().zip(&s).for_each(|(a, b)| *a = h * b);
        match PeriodicKernel::new(grid, covariance_between(model, tau, t))? {
            None => acc.iter_mut().zip(&injected).for_each(|(a, b)| *a += b),
            Some(k) => k.convolve(&injected, &mut acc),
        }
    }
    CapacityProfile::from_values(grid, 1, acc)
}
