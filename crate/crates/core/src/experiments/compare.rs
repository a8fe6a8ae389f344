//! Side-by-side discrete propagation and matching continuum solution for a
//! single architecture.
//!
//! Routing: residual and multidim runs compare with the heat kernel (and the
//! exact lattice limit), dilated runs with a piecewise-constant diffusivity,
//! multichannel runs collapse channels first, source variants compare with
//! the Duhamel integral and leak variants with the analytic mass split.

use std::sync::Arc;

use super::config::{checked, CompareConfig, SCHEMA_VERSION};
use super::report::{ConfigEcho, ExperimentReport, NamedProfile, Role, RunRecord};
use super::studies::RunOptions;
use crate::continuum::{
    diffusivity_for, duhamel_solution, heat_kernel_solution, lattice_diffusion_limit,
    leak_split_analytic, DiffusionModel, Diffusivity,
};
use crate::discrete::{
    collapse_channels, propagate_dilated, propagate_multichannel, propagate_recurrent,
    propagate_residual, propagate_with_leak, propagate_with_source, LeakResult, Variant,
};
use crate::metrics::{lp_error, profile_stats, Norm};
use crate::{second_moment, CapacityProfile, PiecewiseConstant, Result, RngSpec};

fn named(name: &str, p: &CapacityProfile) -> NamedProfile {
    NamedProfile {
        name: name.to_string(),
        extents: p.grid().extents().to_vec(),
        channels: p.channels(),
        values: p.values().to_vec(),
    }
}

fn distances(rec: &mut RunRecord, a: &CapacityProfile, b: &CapacityProfile) -> Result<()> {
    rec.metric("l1_error", lp_error(a, b, Norm::L1)?);
    rec.metric("l2_error", lp_error(a, b, Norm::L2)?);
    rec.metric("linf_error", lp_error(a, b, Norm::LInf)?);
    Ok(())
}

fn scaled(p: &CapacityProfile, factor: f64) -> Result<CapacityProfile> {
    CapacityProfile::from_values(
        *p.grid(),
        p.channels(),
        p.values().iter().map(|v| v * factor).collect(),
    )
}

pub fn run_compare(cfg: &CompareConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let grid = cfg.grid;
    let gen = cfg
        .architecture
        .generator
        .build(grid.dim(), &RngSpec::new(opts.seed).derive(1))?;
    let variant = cfg.variant();
    let depth = cfg.architecture.depth.expect("validated");
    let spec = checked(cfg.architecture.spec(variant, depth, gen.clone()))?;
    let steps = spec.steps() as f64;
    // Total rate over the stack; `D = rate · m₂ / 2` on the unit time interval.
    let rate = steps * spec.outflow_per_step();
    let channels = if variant == Variant::Multichannel {
        spec.channel_count()
    } else {
        1
    };
    let input = cfg.input.build(grid, channels)?;
    let mut rec = RunRecord::new(format!("{}:L={depth}", variant.name()), Role::Primary)
        .param("depth", depth as f64)
        .param("capacity_rate", spec.capacity_rate)
        .param("scaling_exponent", spec.scaling_exponent)
        .param("epsilon", spec.epsilon());

    let (discrete, continuum) = match variant {
        Variant::Residual | Variant::Multidim => {
            let d = propagate_residual(&spec, &input)?.profiles.pop().expect("nonempty");
            let model = DiffusionModel::new(input.clone(), diffusivity_for(&gen, rate));
            let c = heat_kernel_solution(&model, 1.0)?;
            let limit = lattice_diffusion_limit(&gen, rate, &input)?;
            rec.metric("lattice_l1_error", lp_error(&d, &limit, Norm::L1)?);
            (d, c)
        }
        Variant::Dilated => {
            let d = propagate_dilated(&spec, &input)?.profiles.pop().expect("nonempty");
            let m2 = second_moment(&gen).get(0, 0);
            let n = spec.steps();
            let knots = (1..n).map(|k| k as f64 / n as f64).collect();
            let values = (0..n)
                .map(|k| 0.5 * rate * m2 * (spec.dilation_at_step(k) as f64).powi(2))
                .collect();
            let schedule = PiecewiseConstant::new(knots, values)?;
            let model = DiffusionModel::new(input.clone(), Diffusivity::Piecewise { schedule });
            (d, heat_kernel_solution(&model, 1.0)?)
        }
        Variant::Multichannel => {
            let d = collapse_channels(
                &propagate_multichannel(&spec, &input)?
                    .profiles
                    .pop()
                    .expect("nonempty"),
            );
            let model = DiffusionModel::new(collapse_channels(&input), diffusivity_for(&gen, rate));
            (d, heat_kernel_solution(&model, 1.0)?)
        }
        Variant::SkipSource | Variant::Cumulative => {
            let source = cfg.source.clone().expect("validated");
            let d = propagate_with_source(&spec, &grid, &source)?
                .profiles
                .pop()
                .expect("nonempty");
            let model = DiffusionModel::new(CapacityProfile::zeros(grid, 1)?, diffusivity_for(&gen, rate))
                .with_source(Arc::new(source));
            let c = duhamel_solution(&model, 1.0, cfg.solver_steps)?;
            rec.metric("continuum_mass", c.mass());
            (d, c)
        }
        Variant::Leak | Variant::Bias | Variant::Recurrent => {
            let split: LeakResult = if variant == Variant::Recurrent {
                propagate_recurrent(&spec, &input)?
            } else {
                propagate_with_leak(&spec, &input)?
            };
            // Per-layer leak αε is absorption at rate αε/dt per unit time.
            let alpha = spec.leak.clone().expect("validated").scaled(spec.epsilon() / spec.dt())?;
            let d_scalar = 0.5 * rate * second_moment(&gen).trace();
            let (ax, ay) = leak_split_analytic(&alpha, d_scalar, &input)?;
            let mass_x = split.input_mass();
            let mass_y = split.side.total_mass();
            rec.metric("mass_x", mass_x);
            rec.metric("mass_y", mass_y);
            rec.metric("analytic_mass_x", ax);
            rec.metric("analytic_mass_y", ay);
            rec.metric("mass_x_relative_error", ((mass_x - ax) / ax).abs());
            rec.metric("conservation_error", ((mass_x + mass_y - input.mass()) / input.mass()).abs());
            let model = DiffusionModel::new(input.clone(), diffusivity_for(&gen, rate));
            let c = scaled(&heat_kernel_solution(&model, 1.0)?, (-alpha.integral(1.0)).exp())?;
            (split.input_capacity, c)
        }
    };
    distances(&mut rec, &discrete, &continuum)?;
    rec.metric("discrete_mass", discrete.mass());
    match profile_stats(&discrete) {
        Ok(s) => rec.metric("std_width", s.std_width),
        Err(e) => rec.flag(format!("stats_unavailable: {e}")),
    }

    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        study: format!("compare:{}", variant.name()),
        seed: opts.seed,
        rng_algorithm: RngSpec::ALGORITHM.to_string(),
        config: ConfigEcho::Compare(cfg.clone()),
        records: vec![rec],
        fits: Vec::new(),
        classifications: Vec::new(),
        summary: Default::default(),
        rules: vec![
            "continuum diffusivity D = (steps * per-step outflow) * m2 / 2 on t in [0, 1]; errors are discrete minus continuum"
                .into(),
        ],
        profiles: vec![named("discrete", &discrete), named("continuum", &continuum)],
    })
}
