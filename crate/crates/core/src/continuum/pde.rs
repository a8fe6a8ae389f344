//! Explicit Euler, centred differences, unit lattice spacing.

use super::model::DiffusionModel;
use crate::discrete::gather_into;
use crate::{CapacityProfile, Error, Offset, Result, Trajectory};

/// Stencil of `dt · (Σ D_ij ∂_i∂_j)` at one time. The mixed derivative uses
/// the diagonal pair aligned with the sign of `D_01`, which keeps every
/// off-centre coefficient nonnegative when `|D_01| ≤ min(D_00, D_11)`.
fn diffusion_taps(dim: usize, d: [[f64; 2]; 2], dt: f64) -> (f64, Vec<(Offset, f64)>) {
    if dim == 1 {
        let a = dt * d[0][0];
        return (-2.0 * a, vec![(Offset::d1(-1), a), (Offset::d1(1), a)]);
    }
    let x = d[0][1];
    let m = x.abs();
    let a0 = dt * (d[0][0] - m);
    let a1 = dt * (d[1][1] - m);
    let diag = dt * m;
    let mut taps = vec![
        (Offset::d2(-1, 0), a0),
        (Offset::d2(1, 0), a0),
        (Offset::d2(0, -1), a1),
        (Offset::d2(0, 1), a1),
    ];
    if m > 0.0 {
        let s = if x > 0.0 { 1 } else { -1 };
        taps.push((Offset::d2(1, s), diag));
        taps.push((Offset::d2(-1, -s), diag));
    }
    let centre = -2.0 * dt * (d[0][0] + d[1][1] - m);
    (centre, taps)
}

/// Stability ratio checked by [`solve_pde`]: `D·dt` in 1D and
/// `(D_00 + D_11 − |D_01|)·dt` in 2D, plus half the absorption per step.
pub fn cfl_ratio(model: &DiffusionModel, steps: usize) -> f64 {
    let dt = 1.0 / steps as f64;
    let dim = model.dim();
    let mut worst = 0.0f64;
    for k in 0..steps {
        let t = k as f64 * dt;
        let d = model.diffusivity.tensor_at(t);
        let spread = if dim == 1 {
            d[0][0]
        } else {
            d[0][0] + d[1][1] - d[0][1].abs()
        };
        worst = worst.max(dt * spread + 0.5 * dt * model.absorption.at(t));
    }
    worst
}

/// `π^{k+1} = π^k + dt (D(t_k) Δ_h π^k − α(t_k) π^k + s(t_k, ·))` on
/// `t ∈ [0, 1]`, `dt = 1/steps`. Returns `steps + 1` profiles.
pub fn solve_pde(model: &DiffusionModel, steps: usize) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::invalid("solve_pde needs at least one step"));
    }
    model.validate()?;
    let grid = *model.initial.grid();
    let dim = grid.dim();
    let dt = 1.0 / steps as f64;
    if dim == 2 {
        let d = model.diffusivity.tensor_at(0.0);
        if d[0][1].abs() > d[0][0].min(d[1][1]) {
            return Err(Error::invalid(
                "explicit solver needs |D_01| <= min(D_00, D_11) for a nonnegative stencil",
            ));
        }
    }
    let ratio = cfl_ratio(model, steps);
    if ratio > 0.5 {
        return Err(Error::Cfl { ratio, limit: 0.5 });
    }

    let channels = model.initial.channels();
    let n = grid.sites();
    let mut profiles = Vec::with_capacity(steps + 1);
    profiles.push(model.initial.clone());
    for k in 0..steps {
        let t = k as f64 * dt;
        let (centre, taps) = diffusion_taps(dim, model.diffusivity.tensor_at(t), dt);
        let keep = 1.0 + centre - dt * model.absorption.at(t);
        let source = match &model.source {
            Some(s) => {
                let v = s.density(t, &grid);
                if v.len() != n {
                    return Err(Error::ShapeMismatch(format!(
                        "source density has {} values, grid has {n} sites",
                        v.len()
                    )));
                }
                if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                    return Err(Error::invalid(format!(
                        "source density must be nonnegative, got {bad} at t = {t}"
                    )));
                }
                Some(v)
            }
            None => None,
        };
        let current = profiles.last().expect("seeded");
        let mut next = Vec::with_capacity(current.values().len());
        for c in 0..channels {
            let src = current.channel(c);
            let mut dst: Vec<f64> = src.iter().map(|v| keep * v).collect();
            for (offset, coeff) in &taps {
                if *coeff != 0.0 {
                    gather_into(&grid, src, &mut dst, *offset, *coeff);
                }
            }
            if let (0, Some(s)) = (c, &source) {
                for (x, sv) in dst.iter_mut().zip(s) {
                    *x += dt * sv;
                }
            }
            next.extend(dst);
        }
        profiles.push(CapacityProfile::from_trusted(grid, channels, next));
    }
    Ok(Trajectory { profiles, dt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuum::Diffusivity;
    use crate::{make_one_hot, Grid, PiecewiseConstant};

    #[test]
    fn no_dynamics_is_constant() {
        let p = make_one_hot(Grid::periodic(16), 3, 0).unwrap();
        let m = DiffusionModel::new(p.clone(), Diffusivity::constant(0.0));
        let tr = solve_pde(&m, 10).unwrap();
        assert_eq!(tr.len(), 11);
        assert!(tr.profiles.iter().all(|q| *q == p));
    }

    #[test]
    fn cfl_violation_reports_ratio() {
        let p = make_one_hot(Grid::periodic(16), 3, 0).unwrap();
        let m = DiffusionModel::new(p, Diffusivity::constant(60.0));
        match solve_pde(&m, 100) {
            Err(Error::Cfl { ratio, limit }) => {
                assert!((ratio - 0.6).abs() < 1e-12);
                assert_eq!(limit, 0.5);
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    #[test]
    fn pure_absorption_decays_exponentially() {
        let p = make_one_hot(Grid::periodic(16), 3, 0).unwrap();
        let m = DiffusionModel::new(p, Diffusivity::constant(0.0))
            .with_absorption(PiecewiseConstant::constant(1.0).unwrap());
        let tr = solve_pde(&m, 1000).unwrap();
        assert!((tr.last().mass() - (-1f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn conserves_mass_without_sinks() {
        let p = CapacityProfile::gaussian(Grid::periodic(64), [20.0, 0.0], 4.0, 1.0).unwrap();
        let m = DiffusionModel::new(p, Diffusivity::constant(5.0));
        let tr = solve_pde(&m, 200).unwrap();
        for q in &tr.profiles {
            assert!((q.mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn planar_tensor_stencil_is_nonnegative_and_conservative() {
        let g = Grid::new_2d(16, 16, crate::Boundary::Periodic).unwrap();
        let p = make_one_hot(g, g.flat_index([8, 8]), 0).unwrap();
        let m = DiffusionModel::new(p, Diffusivity::Tensor { d: [[2.0, -1.0], [-1.0, 3.0]] });
        let tr = solve_pde(&m, 40).unwrap();
        assert!((tr.last().mass() - 1.0).abs() < 1e-12);
        let bad = DiffusionModel::new(
            make_one_hot(g, 0, 0).unwrap(),
            Diffusivity::Tensor { d: [[1.0, 1.5], [1.5, 4.0]] },
        );
        assert!(solve_pde(&bad, 100).is_err());
    }
}
