//! Study runners. Each sweep point is an independent propagation; points run
//! on a bounded worker pool and are assembled in sweep-key order.

use rayon::prelude::*;

use super::config::{checked, sorted, ExperimentConfig, Study};
use super::report::{
    Classification, ConfigEcho, Degeneracy, ExperimentReport, FitRecord, Role, RunRecord,
};
use crate::continuum::{
    diffusivity_for, heat_kernel_solution, lattice_diffusion_limit, leak_split_analytic, v_integral,
    DiffusionModel, DilationGrowth,
};
use crate::discrete::{
    collapse_channels, propagate_dilated, propagate_multichannel, propagate_recurrent,
    propagate_residual, propagate_with_leak, ArchitectureSpec, ChannelCoupling, Variant,
};
use crate::metrics::{fit_power_law, lp_error, profile_stats, Norm};
use crate::{second_moment, CapacityProfile, Error, Grid, PiecewiseConstant, Result, RngSpec, StencilGenerator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub seed: u64,
    /// Upper bound on concurrently executing sweep points.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { seed: 0, jobs: 1 }
    }
}

/// Runs the study named in `cfg`.
pub fn run_study(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    match cfg.study {
        Study::Convergence => run_convergence(cfg, opts),
        Study::ScalingSweep => run_scaling_sweep(cfg, opts),
        Study::DilatedErf => run_dilated_erf(cfg, opts),
        Study::MultichannelXavier => run_multichannel_xavier(cfg, opts),
        Study::LeakSplit => run_leak_split(cfg, opts),
        Study::RecurrentMemory => run_recurrent_memory(cfg, opts),
    }
}

pub(crate) fn par_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<R>> = pool.install(|| items.par_iter().map(&f).collect());
    results.into_iter().collect()
}

struct Setup {
    grid: Grid,
    gen: StencilGenerator,
    /// Diagonal of the generator's second-moment matrix.
    m2: [f64; 2],
}

fn setup(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Setup> {
    let grid = cfg.grid;
    let gen = cfg
        .architecture
        .generator
        .build(grid.dim(), &RngSpec::new(opts.seed).derive(1))?;
    let m = second_moment(&gen);
    Ok(Setup {
        grid,
        m2: [m.get(0, 0), if grid.dim() == 2 { m.get(1, 1) } else { 0.0 }],
        gen,
    })
}

fn new_report(cfg: &ExperimentConfig, opts: &RunOptions) -> ExperimentReport {
    ExperimentReport {
        schema_version: super::config::SCHEMA_VERSION,
        study: cfg.study.name().to_string(),
        seed: opts.seed,
        rng_algorithm: RngSpec::ALGORITHM.to_string(),
        config: ConfigEcho::Study(cfg.clone()),
        records: Vec::new(),
        fits: Vec::new(),
        classifications: Vec::new(),
        summary: Default::default(),
        rules: Vec::new(),
        profiles: Vec::new(),
    }
}

/// `6σ ≤ n` on every axis for the predicted per-axis variances.
fn width_fits(grid: &Grid, var: [f64; 2]) -> bool {
    (0..grid.dim()).all(|a| 6.0 * var[a].sqrt() <= grid.extent(a) as f64)
}

fn require_width(grid: &Grid, var: [f64; 2], what: &str) -> Result<()> {
    if width_fits(grid, var) {
        return Ok(());
    }
    let w: Vec<String> = (0..grid.dim()).map(|a| format!("{:.3}", var[a].sqrt())).collect();
    Err(Error::config(
        "grid.extents",
        format!(
            "{what}: predicted width [{}] needs at least 6 widths per axis, grid is {:?}",
            w.join(", "),
            grid.extents()
        ),
    ))
}

fn predicted_var(s: &Setup, rate_sum: f64, input_var: f64) -> [f64; 2] {
    [rate_sum * s.m2[0] + input_var, rate_sum * s.m2[1] + input_var]
}

fn spatial_variant(cfg: &ExperimentConfig) -> Variant {
    cfg.architecture.variant.unwrap_or(if cfg.grid.dim() == 2 {
        Variant::Multidim
    } else {
        Variant::Residual
    })
}

fn base_record(key: String, role: Role, spec: &ArchitectureSpec) -> RunRecord {
    RunRecord::new(key, role)
        .param("depth", spec.depth as f64)
        .param("capacity_rate", spec.capacity_rate)
        .param("scaling_exponent", spec.scaling_exponent)
        .param("epsilon", spec.epsilon())
}

fn record_stats(rec: &mut RunRecord, p: &CapacityProfile) -> Option<f64> {
    match profile_stats(p) {
        Ok(s) => {
            rec.metric("mass", s.mass);
            rec.metric("std_width", s.std_width);
            rec.metric("quantile_width_99", s.quantile_width_99);
            Some(s.std_width)
        }
        Err(e) => {
            rec.flag(format!("stats_unavailable: {e}"));
            None
        }
    }
}

fn fit(name: String, x: &str, y: &str, points: &[(f64, f64)], predicted: Option<f64>) -> Option<FitRecord> {
    let f = fit_power_law(points).ok()?;
    Some(FitRecord {
        name,
        x: x.to_string(),
        y: y.to_string(),
        points: points.len(),
        exponent: f.exponent,
        prefactor: f.prefactor,
        r2: f.r2,
        predicted,
    })
}

/// `(param x, metric y)` pairs over records matching `keep`.
fn series(records: &[RunRecord], x: &str, y: &str, keep: impl Fn(&RunRecord) -> bool) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| keep(r))
        .filter_map(|r| Some((*r.params.get(x)?, *r.metrics.get(y)?)))
        .filter(|(_, v)| *v > 0.0)
        .collect()
}

/// Largest value of `f` over the records, `None` if no record yields one.
fn max_over(records: &[RunRecord], f: impl Fn(&RunRecord) -> Option<f64>) -> Option<f64> {
    records.iter().filter_map(f).reduce(f64::max)
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

/// Residual propagation against its continuum limit: the lattice-sampled
/// heat kernel with `D = c·m₂/2`, and the exact lattice limit
/// `exp(c(J − I))κ`. Controls use the depth exponent `controls.exponent`.
pub fn run_convergence(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let s = setup(cfg, opts)?;
    let variant = spatial_variant(cfg);
    let c = cfg.architecture.capacity_rate;
    let input = cfg.input.build(s.grid, 1)?;
    require_width(&s.grid, predicted_var(&s, c, cfg.input.variance()), "heat kernel")?;
    let model = DiffusionModel::new(input.clone(), diffusivity_for(&s.gen, c));
    let kernel = heat_kernel_solution(&model, 1.0)?;
    let limit = lattice_diffusion_limit(&s.gen, c, &input)?;

    let depths = sorted(cfg.sweep.depths.as_deref().expect("validated"));
    let mut tasks: Vec<(Role, usize)> = depths.iter().map(|l| (Role::Primary, *l)).collect();
    if cfg.controls.enabled {
        tasks.extend(depths.iter().map(|l| (Role::Control, *l)));
    }
    let records = par_map(opts.jobs, &tasks, |&(role, depth)| {
        let p = match role {
            Role::Control => cfg.controls.exponent,
            _ => 1.0,
        };
        let spec = cfg
            .architecture
            .spec(variant, depth, s.gen.clone())
            .with_exponent(p);
        let mut rec = base_record(format!("{}:L={depth}", role.name()), role, &spec);
        if spec.epsilon() > 1.0 {
            rec.flag("rate_exceeds_one");
            return Ok(rec);
        }
        let spec = checked(spec)?;
        let last = propagate_residual(&spec, &input)?.profiles.pop().expect("nonempty");
        rec.metric("l1_error", lp_error(&last, &kernel, Norm::L1)?);
        rec.metric("l2_error", lp_error(&last, &kernel, Norm::L2)?);
        rec.metric("linf_error", lp_error(&last, &kernel, Norm::LInf)?);
        rec.metric("lattice_l1_error", lp_error(&last, &limit, Norm::L1)?);
        record_stats(&mut rec, &last);
        Ok(rec)
    })?;

    let mut report = new_report(cfg, opts);
    let primary = |r: &RunRecord| r.role == Role::Primary;
    let control = |r: &RunRecord| r.role == Role::Control;
    let pts = series(&records, "depth", "l1_error", primary);
    if let Some(f) = fit("l1_error_vs_depth".into(), "depth", "l1_error", &pts, Some(-1.0)) {
        report.summarize("convergence_rate", -f.exponent);
        report.fits.push(f);
    }
    let pts = series(&records, "depth", "lattice_l1_error", primary);
    if let Some(f) = fit("lattice_l1_error_vs_depth".into(), "depth", "lattice_l1_error", &pts, Some(-1.0)) {
        report.summarize("lattice_convergence_rate", -f.exponent);
        report.fits.push(f);
    }
    let pts = series(&records, "depth", "l1_error", control);
    if let Some(f) = fit("control_l1_error_vs_depth".into(), "depth", "l1_error", &pts, None) {
        report.fits.push(f);
    }
    if let Some(last) = records.iter().rfind(|r| primary(r)) {
        for m in ["l1_error", "lattice_l1_error"] {
            if let Some(v) = last.metrics.get(m) {
                report.summarize(&format!("{m}_at_max_depth"), *v);
            }
        }
    }
    report.rules.push(
        "convergence_rate = -(least-squares slope of log l1_error against log depth); \
         l1_error compares with the lattice-sampled heat kernel, lattice_l1_error with exp(c(J - I)) applied to the input"
            .into(),
    );
    report.records = records;
    Ok(report)
}

/// Width exponent `e(p)` of `std_width ∝ L^e` for each depth exponent `p`,
/// classified against the tolerance band around 0.
pub fn run_scaling_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let s = setup(cfg, opts)?;
    let variant = spatial_variant(cfg);
    let input = cfg.input.build(s.grid, 1)?;
    let depths = sorted(cfg.sweep.depths.as_deref().expect("validated"));
    let exponents = sorted(cfg.sweep.exponents.as_deref().expect("validated"));
    let tasks: Vec<(f64, usize)> = exponents
        .iter()
        .flat_map(|p| depths.iter().map(move |l| (*p, *l)))
        .collect();
    let records = par_map(opts.jobs, &tasks, |&(p, depth)| {
        let spec = cfg
            .architecture
            .spec(variant, depth, s.gen.clone())
            .with_exponent(p);
        let role = if p == 1.0 { Role::Primary } else { Role::Control };
        let mut rec = base_record(format!("p={p},L={depth}"), role, &spec);
        if spec.epsilon() > 1.0 {
            rec.flag("rate_exceeds_one");
            return Ok(rec);
        }
        let var = predicted_var(&s, spec.steps() as f64 * spec.epsilon(), cfg.input.variance());
        rec.metric("predicted_std", (var[0] + var[1]).sqrt());
        if !width_fits(&s.grid, var) {
            rec.flag("width_exceeds_grid");
            return Ok(rec);
        }
        let spec = checked(spec)?;
        let last = propagate_residual(&spec, &input)?.profiles.pop().expect("nonempty");
        record_stats(&mut rec, &last);
        Ok(rec)
    })?;

    let tol = cfg.thresholds.exponent_tolerance;
    let mut report = new_report(cfg, opts);
    for p in &exponents {
        let pts = series(&records, "depth", "std_width", |r| r.params["scaling_exponent"] == *p);
        let predicted = (1.0 - p) / 2.0;
        if let Some(f) = fit(format!("width_exponent[p={p}]"), "depth", "std_width", &pts, Some(predicted)) {
            report.classifications.push(Classification {
                scaling_exponent: *p,
                fitted: f.exponent,
                predicted,
                verdict: Degeneracy::classify(f.exponent, tol),
            });
            report.fits.push(f);
        }
    }
    report.rules.push(format!(
        "e(p) = least-squares slope of log std_width against log depth; \
         e > {tol}: shattering-divergent, |e| <= {tol}: non-degenerate, e < -{tol}: trivial-contraction; \
         the variance law predicts e(p) = (1 - p)/2"
    ));
    report.records = records;
    Ok(report)
}

/// Dilated stacks: measured width against the exact variance
/// `ε·m₂·Σ d_ℓ²`, and the width exponent against `R_L/√L` with `R_L = λ^L`.
pub fn run_dilated_erf(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let s = setup(cfg, opts)?;
    let input = cfg.input.build(s.grid, 1)?;
    let depths = sorted(cfg.sweep.depths.as_deref().expect("validated"));
    let lambdas = match &cfg.sweep.dilation_ratios {
        Some(v) => sorted(v),
        None => vec![cfg.architecture.dilation_ratio.expect("validated")],
    };
    let mut tasks: Vec<(Role, f64, usize)> = lambdas
        .iter()
        .flat_map(|l| depths.iter().map(move |d| (Role::Primary, *l, *d)))
        .collect();
    if cfg.controls.enabled && !lambdas.contains(&1.0) {
        tasks.extend(depths.iter().map(|d| (Role::Control, 1.0, *d)));
    }
    // Plan first so grid problems surface before any propagation.
    let mut planned = Vec::with_capacity(tasks.len());
    for &(role, lambda, depth) in &tasks {
        let spec = checked(
            cfg.architecture
                .spec(Variant::Dilated, depth, s.gen.clone())
                .with_dilation(lambda),
        )?;
        let reach = s.gen.reach(0) * spec.dilation_at_step(0) as usize;
        if s.grid.extent(0) <= 2 * reach {
            return Err(Error::config(
                "grid.extents",
                format!(
                    "dilation {} at depth {depth} reaches {reach} sites; grid needs more than {}",
                    spec.dilation_at_step(0),
                    2 * reach
                ),
            ));
        }
        let sum_d2: f64 = (0..spec.steps())
            .map(|k| (spec.dilation_at_step(k) as f64).powi(2))
            .sum();
        let var = predicted_var(&s, spec.epsilon() * sum_d2, cfg.input.variance());
        require_width(&s.grid, var, &format!("lambda={lambda}, depth={depth}"))?;
        planned.push((role, lambda, spec, var[0]));
    }
    let records = par_map(opts.jobs, &planned, |(role, lambda, spec, var)| {
        let depth = spec.depth;
        let mut rec = base_record(format!("{}:lambda={lambda},L={depth}", role.name()), *role, spec)
            .param("dilation_ratio", *lambda)
            .param("receptive_field_over_sqrt_depth", lambda.powi(depth as i32) / (depth as f64).sqrt());
        rec.metric("predicted_std", var.sqrt());
        rec.metric("v_integral", v_integral(DilationGrowth::Ratio { lambda: *lambda, depth })?);
        let last = propagate_dilated(spec, &input)?.profiles.pop().expect("nonempty");
        if let Some(w) = record_stats(&mut rec, &last) {
            rec.metric("width_ratio", w / var.sqrt());
        }
        Ok(rec)
    })?;

    let mut report = new_report(cfg, opts);
    for lambda in &lambdas {
        let pts = series(&records, "receptive_field_over_sqrt_depth", "std_width", |r| {
            r.role == Role::Primary && r.params["dilation_ratio"] == *lambda
        });
        let predicted = (*lambda > 1.0).then_some(1.0);
        if let Some(f) = fit(
            format!("width_vs_receptive_field[lambda={lambda}]"),
            "receptive_field_over_sqrt_depth",
            "std_width",
            &pts,
            predicted,
        ) {
            report.fits.push(f);
        }
    }
    if let Some(worst) = max_over(&records, |r| Some((r.metrics.get("width_ratio")? - 1.0).abs())) {
        report.summarize("max_width_ratio_deviation", worst);
    }
    report.rules.push(
        "width_ratio = std_width / sqrt(epsilon * m2 * sum of squared dilations (+ input variance)); \
         receptive field R_L = lambda^L"
            .into(),
    );
    report.records = records;
    Ok(report)
}

/// Channel-uniform multi-channel runs collapsed and compared with the
/// single-channel reference; controls drop the `1/C` rate normalization.
pub fn run_multichannel_xavier(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let s = setup(cfg, opts)?;
    let depth = cfg.architecture.depth.expect("validated");
    let counts = sorted(cfg.sweep.channels.as_deref().expect("validated"));

    let ref_spec = checked(
        ArchitectureSpec::new(Variant::Residual, depth, cfg.architecture.capacity_rate, s.gen.clone())
            .with_exponent(cfg.architecture.scaling_exponent),
    )?;
    let ref_var = predicted_var(&s, ref_spec.steps() as f64 * ref_spec.epsilon(), cfg.input.variance());
    require_width(&s.grid, ref_var, "reference run")?;
    let ref_input = collapse_channels(&cfg.input.build(s.grid, 1)?);
    let reference = propagate_residual(&ref_spec, &ref_input)?
        .profiles
        .pop()
        .expect("nonempty");
    let mut ref_rec = base_record("reference".into(), Role::Reference, &ref_spec).param("channels", 1.0);
    let ref_width = record_stats(&mut ref_rec, &reference);

    let mut tasks: Vec<(Role, usize)> = counts.iter().map(|c| (Role::Primary, *c)).collect();
    if cfg.controls.enabled {
        tasks.extend(counts.iter().filter(|c| **c > 1).map(|c| (Role::Control, *c)));
    }
    let mut records = par_map(opts.jobs, &tasks, |&(role, count)| {
        let coupling = ChannelCoupling {
            count,
            blocks: None,
            normalized: role == Role::Primary,
        };
        let spec = ArchitectureSpec::new(Variant::Multichannel, depth, cfg.architecture.capacity_rate, s.gen.clone())
            .with_exponent(cfg.architecture.scaling_exponent)
            .with_channels(coupling);
        let mut rec = base_record(format!("{}:C={count}", role.name()), role, &spec)
            .param("channels", count as f64);
        if spec.outflow_per_step() > 1.0 {
            rec.flag("rate_exceeds_one");
            return Ok(rec);
        }
        let spec = checked(spec)?;
        let input = cfg.input.build(s.grid, count)?;
        let collapsed = collapse_channels(
            &propagate_multichannel(&spec, &input)?
                .profiles
                .pop()
                .expect("nonempty"),
        );
        match role {
            Role::Primary => {
                rec.metric("deviation_l1", lp_error(&collapsed, &reference, Norm::L1)?);
                rec.metric("deviation_linf", lp_error(&collapsed, &reference, Norm::LInf)?);
                record_stats(&mut rec, &collapsed);
            }
            _ => {
                let var = [ref_var[0] * count as f64, ref_var[1] * count as f64];
                if !width_fits(&s.grid, var) {
                    rec.flag("width_exceeds_grid");
                }
                if let (Some(w), Some(r)) = (record_stats(&mut rec, &collapsed), ref_width) {
                    rec.metric("width_ratio", w / r);
                    rec.metric("expected_width_ratio", (count as f64).sqrt());
                }
            }
        }
        Ok(rec)
    })?;

    let mut report = new_report(cfg, opts);
    if let Some(v) = max_over(&records, |r| r.metrics.get("deviation_l1").copied()) {
        report.summarize("max_deviation_l1", v);
    }
    let ratio_error = |r: &RunRecord| {
        Some((r.metrics.get("width_ratio")? / r.metrics.get("expected_width_ratio")? - 1.0).abs())
    };
    if let Some(v) = max_over(&records, ratio_error) {
        report.summarize("max_control_ratio_deviation", v);
    }
    report.rules.push(
        "deviation_l1 = L1 distance between the collapsed C-channel output and the single-channel reference; \
         controls use epsilon = c/(L-1) without the 1/C factor and expect width_ratio = sqrt(C)"
            .into(),
    );
    records.insert(0, ref_rec);
    report.records = records;
    Ok(report)
}

fn constant_leak(alpha: f64, field: &str) -> Result<PiecewiseConstant> {
    PiecewiseConstant::constant(alpha).map_err(|e| Error::config(field, e.to_string()))
}

fn check_leak(spec: &ArchitectureSpec, alpha: f64, field: &str) -> Result<()> {
    let per_layer = alpha * spec.epsilon();
    if per_layer > 1.0 {
        return Err(Error::config(
            field,
            format!(
                "leak {alpha} at depth {} gives a per-layer leak {per_layer} above 1",
                spec.depth
            ),
        ));
    }
    Ok(())
}

/// Discrete mass split against `e^{−∫α}`; controls hold the per-layer leak
/// `α·ε_ref` fixed in depth.
pub fn run_leak_split(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let s = setup(cfg, opts)?;
    let variant = cfg.architecture.variant.unwrap_or(Variant::Leak);
    let input = cfg.input.build(s.grid, 1)?;
    let total = input.mass();
    let depths = sorted(cfg.sweep.depths.as_deref().expect("validated"));
    let rates = sorted(cfg.sweep.leak_rates.as_deref().expect("validated"));
    let eps_ref = cfg.controls.reference_epsilon;

    let mut planned = Vec::new();
    for role in [Role::Primary, Role::Control] {
        if role == Role::Control && !cfg.controls.enabled {
            continue;
        }
        for &alpha in &rates {
            if role == Role::Control && alpha == 0.0 {
                continue;
            }
            for &depth in &depths {
                let base = cfg.architecture.spec(variant, depth, s.gen.clone());
                let effective = match role {
                    Role::Control => alpha * eps_ref / base.epsilon(),
                    _ => alpha,
                };
                let spec = base.with_leak(constant_leak(effective, "sweep.leak_rates")?);
                match role {
                    Role::Control => check_leak(&spec, effective, "controls.reference_epsilon")?,
                    _ => check_leak(&spec, alpha, "sweep.leak_rates")?,
                }
                planned.push((role, alpha, effective, checked(spec)?));
            }
        }
    }
    let records = par_map(opts.jobs, &planned, |(role, alpha, effective, spec)| {
        let mut rec = base_record(
            format!("{}:alpha={alpha},L={}", role.name(), spec.depth),
            *role,
            spec,
        )
        .param("leak_rate", *alpha)
        .param("effective_leak_rate", *effective);
        let split = propagate_with_leak(spec, &input)?;
        let mass_x = split.input_mass();
        let mass_y = split.side.total_mass();
        rec.metric("mass_x", mass_x);
        rec.metric("mass_y", mass_y);
        rec.metric("conservation_error", rel(mass_x + mass_y, total));
        if *role == Role::Primary {
            let alpha_t = constant_leak(*alpha * spec.epsilon() / spec.dt(), "sweep.leak_rates")?;
            let d = cfg.architecture.capacity_rate * s.m2[0] / 2.0;
            let (ax, _) = leak_split_analytic(&alpha_t, d, &input)?;
            rec.metric("analytic_mass_x", ax);
            rec.metric("relative_error", rel(mass_x, ax));
        } else if mass_x < cfg.thresholds.vanishing_mass * total {
            rec.flag("vanishing");
        }
        Ok(rec)
    })?;

    let mut report = new_report(cfg, opts);
    let metric = |m: &'static str, role: Option<Role>| {
        move |r: &RunRecord| {
            if role.is_some_and(|x| x != r.role) {
                return None;
            }
            r.metrics.get(m).copied()
        }
    };
    for (name, value) in [
        ("max_relative_error", max_over(&records, metric("relative_error", Some(Role::Primary)))),
        ("max_conservation_error", max_over(&records, metric("conservation_error", None))),
        ("max_control_mass_x", max_over(&records, metric("mass_x", Some(Role::Control)))),
    ] {
        if let Some(v) = value {
            report.summarize(name, v);
        }
    }
    report.rules.push(format!(
        "relative_error = |mass_x - exp(-integral of alpha) * mass| / analytic; \
         controls keep the per-layer leak alpha * {eps_ref} fixed as depth grows and are flagged vanishing below {} of the input mass",
        cfg.thresholds.vanishing_mass
    ));
    report.records = records;
    Ok(report)
}

/// Memory length: the smallest `k` such that the side capacities of the `k`
/// most recent steps hold at least half of `total`. `None` if never reached.
pub fn memory_length(side_masses: &[f64], total: f64) -> Option<usize> {
    let target = 0.5 * total;
    let mut acc = 0.0;
    for (k, m) in side_masses.iter().enumerate() {
        acc += m;
        if acc >= target {
            return Some(k + 1);
        }
    }
    None
}

/// Recurrent memory `M(N)/N`; controls keep the per-step rate `ε_ref`
/// constant in the sequence length.
pub fn run_recurrent_memory(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let s = setup(cfg, opts)?;
    let input = cfg.input.build(s.grid, 1)?;
    let total = input.mass();
    let lengths = sorted(cfg.sweep.depths.as_deref().expect("validated"));
    let rates = sorted(cfg.sweep.leak_rates.as_deref().expect("validated"));
    let eps_ref = cfg.controls.reference_epsilon;

    let mut planned = Vec::new();
    for role in [Role::Primary, Role::Control] {
        if role == Role::Control && !cfg.controls.enabled {
            continue;
        }
        for &alpha in &rates {
            for &n in &lengths {
                let mut spec = cfg
                    .architecture
                    .spec(Variant::Recurrent, n, s.gen.clone())
                    .with_leak(constant_leak(alpha, "sweep.leak_rates")?);
                let field = match role {
                    Role::Control => {
                        spec.capacity_rate = eps_ref;
                        spec.scaling_exponent = 0.0;
                        "controls.reference_epsilon"
                    }
                    _ => "sweep.leak_rates",
                };
                check_leak(&spec, alpha, field)?;
                planned.push((role, alpha, checked(spec)?));
            }
        }
    }
    let records = par_map(opts.jobs, &planned, |(role, alpha, spec)| {
        let n = spec.depth;
        let mut rec = base_record(format!("{}:alpha={alpha},N={n}", role.name()), *role, spec)
            .param("leak_rate", *alpha)
            .param("sequence_length", n as f64);
        let split = propagate_recurrent(spec, &input)?;
        let side = split.side.masses();
        let mass_y: f64 = crate::profile::neumaier_sum(&side);
        rec.metric("input_mass", split.input_mass());
        rec.metric("side_mass", mass_y);
        rec.metric("conservation_error", rel(split.input_mass() + mass_y, total));
        match memory_length(&side, total) {
            Some(m) => {
                rec.metric("memory_steps", m as f64);
                rec.metric("memory_fraction", m as f64 / n as f64);
            }
            None => rec.flag("memory_undefined"),
        }
        if *role == Role::Primary && *alpha > 0.0 {
            let t = std::f64::consts::LN_2 / (alpha * spec.capacity_rate);
            if t <= 1.0 {
                rec.metric("predicted_fraction", t);
            }
        }
        Ok(rec)
    })?;

    let mut report = new_report(cfg, opts);
    for role in [Role::Primary, Role::Control] {
        for alpha in &rates {
            let pts = series(&records, "sequence_length", "memory_steps", |r| {
                r.role == role && r.params["leak_rate"] == *alpha
            });
            let predicted = if role == Role::Primary { 1.0 } else { 0.0 };
            if let Some(f) = fit(
                format!("{}_memory_vs_length[alpha={alpha}]", role.name()),
                "sequence_length",
                "memory_steps",
                &pts,
                Some(predicted),
            ) {
                report.fits.push(f);
            }
        }
    }
    if let Some(v) = max_over(&records, |r| r.metrics.get("conservation_error").copied()) {
        report.summarize("max_conservation_error", v);
    }
    report.rules.push(format!(
        "memory_steps = smallest k whose k most recent side capacities hold at least half of the output capacity \
         (undefined if never reached); controls fix the per-step rate at {eps_ref}"
    ));
    report.records = records;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memory_length_counts_recent_steps() {
        assert_eq!(memory_length(&[0.3, 0.3, 0.4], 1.0), Some(2));
        assert_eq!(memory_length(&[0.5], 1.0), Some(1));
        assert_eq!(memory_length(&[0.1, 0.1], 1.0), None);
        assert_eq!(memory_length(&[], 1.0), None);
    }

    #[test]
    fn classification_bands() {
        assert_eq!(Degeneracy::classify(0.25, 0.05), Degeneracy::ShatteringDivergent);
        assert_eq!(Degeneracy::classify(0.05, 0.05), Degeneracy::NonDegenerate);
        assert_eq!(Degeneracy::classify(-0.5, 0.05), Degeneracy::TrivialContraction);
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..100).collect();
        let out = par_map(8, &items, |x| Ok(x * 2)).unwrap();
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
        let err = par_map(4, &items, |x| {
            if *x >= 10 {
                Err(Error::invalid(format!("{x}")))
            } else {
                Ok(*x)
            }
        });
        assert_eq!(err, Err(Error::invalid("10")));
    }
}
