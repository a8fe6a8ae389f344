//! Layer-by-layer propagation for each architecture variant.

use serde::{Deserialize, Serialize};

use super::operator::{build_operator, gather_shifted, LayerOperator};
use super::spec::{ArchitectureSpec, Variant};
use crate::{CapacityProfile, Error, Grid, Offset, Result, SourceDensity, Trajectory};

/// Capacity diverted to side inputs (or biases) at each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideCapacities {
    Spatial(Vec<CapacityProfile>),
    /// Per-layer total mass (bias terms have no spatial structure).
    Aggregated(Vec<f64>),
}

impl SideCapacities {
    pub fn masses(&self) -> Vec<f64> {
        match self {
            SideCapacities::Spatial(ps) => ps.iter().map(CapacityProfile::mass).collect(),
            SideCapacities::Aggregated(ms) => ms.clone(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        crate::profile::neumaier_sum(&self.masses())
    }

    pub fn len(&self) -> usize {
        match self {
            SideCapacities::Spatial(ps) => ps.len(),
            SideCapacities::Aggregated(ms) => ms.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Split of the output capacity between the propagated stream, the side
/// inputs of every layer, and the network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakResult {
    pub trajectory: Trajectory,
    pub side: SideCapacities,
    pub input_capacity: CapacityProfile,
}

impl LeakResult {
    pub fn input_mass(&self) -> f64 {
        self.input_capacity.mass()
    }

    /// `mass(κ^X) + Σ mass(κ^Y)`, which equals `mass(κ^L)`.
    pub fn total_mass(&self) -> f64 {
        crate::profile::neumaier_sum(&[self.input_mass(), self.side.total_mass()])
    }
}

fn require_variant(spec: &ArchitectureSpec, allowed: &[Variant], op: &str) -> Result<()> {
    if !allowed.contains(&spec.variant) {
        return Err(Error::invalid(format!(
            "{op} does not handle variant {}",
            spec.variant.name()
        )));
    }
    Ok(())
}

fn check_input(spec: &ArchitectureSpec, kappa: &CapacityProfile, channels: usize) -> Result<()> {
    if kappa.channels() != channels {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channel(s), spec expects {channels}",
            kappa.channels()
        )));
    }
    check_grid(spec, kappa.grid())
}

fn check_grid(spec: &ArchitectureSpec, grid: &Grid) -> Result<()> {
    if spec.generator_dim() != grid.dim() {
        return Err(Error::ShapeMismatch(format!(
            "generator is {}D but grid is {}D",
            spec.generator_dim(),
            grid.dim()
        )));
    }
    if spec.variant == Variant::Multidim && grid.dim() != 2 {
        return Err(Error::ShapeMismatch("multidim runs need a 2D grid".into()));
    }
    Ok(())
}

fn step_operators(spec: &ArchitectureSpec) -> Result<Vec<LayerOperator>> {
    let eps = spec.epsilon();
    (0..spec.steps())
        .map(|k| {
            let d = spec.dilation_at_step(k);
            let gen = spec.generator_at_step(k);
            if d == 1 {
                build_operator(gen, eps)
            } else {
                build_operator(&gen.dilated(d), eps)
            }
        })
        .collect()
}

fn iterate(ops: &[LayerOperator], kappa: &CapacityProfile, dt: f64) -> Trajectory {
    let mut profiles = Vec::with_capacity(ops.len() + 1);
    profiles.push(kappa.clone());
    for op in ops {
        let next = op.apply(profiles.last().expect("seeded"));
        profiles.push(next);
    }
    Trajectory { profiles, dt }
}

/// `κ^{ℓ−1} = (I + εΔ) κ^ℓ`, applied `L − 1` times.
pub fn propagate_residual(spec: &ArchitectureSpec, kappa_l: &CapacityProfile) -> Result<Trajectory> {
    require_variant(spec, &[Variant::Residual, Variant::Multidim], "propagate_residual")?;
    spec.validate()?;
    check_input(spec, kappa_l, 1)?;
    Ok(iterate(&step_operators(spec)?, kappa_l, spec.dt()))
}

/// Residual propagation with dilated stencils; the step leaving layer
/// `ℓ + 1` uses offsets scaled by `round(λ^(ℓ−1))`.
pub fn propagate_dilated(spec: &ArchitectureSpec, kappa_l: &CapacityProfile) -> Result<Trajectory> {
    require_variant(spec, &[Variant::Dilated], "propagate_dilated")?;
    spec.validate()?;
    check_input(spec, kappa_l, 1)?;
    let grid = kappa_l.grid();
    for k in 0..spec.steps() {
        let d = spec.dilation_at_step(k) as usize;
        let gen = spec.generator_at_step(k);
        for axis in 0..grid.dim() {
            let reach = gen.reach(axis) * d;
            if grid.extent(axis) <= 2 * reach {
                return Err(Error::DilationOverflow {
                    reach,
                    extent: grid.extent(axis),
                });
            }
        }
    }
    Ok(iterate(&step_operators(spec)?, kappa_l, spec.dt()))
}

/// Zero initial capacity; each step propagates and then injects
/// `dt · s(t_k, ·)` (rescaled convention, no factor `L`).
pub fn propagate_with_source(
    spec: &ArchitectureSpec,
    grid: &Grid,
    source: &dyn SourceDensity,
) -> Result<Trajectory> {
    require_variant(
        spec,
        &[Variant::SkipSource, Variant::Cumulative],
        "propagate_with_source",
    )?;
    spec.validate()?;
    check_grid(spec, grid)?;
    let ops = step_operators(spec)?;
    let dt = spec.dt();
    let mut profiles = Vec::with_capacity(spec.depth);
    profiles.push(CapacityProfile::zeros(*grid, 1)?);
    for (k, op) in ops.iter().enumerate() {
        let t = k as f64 * dt;
        let s = source.density(t, grid);
        if s.len() != grid.sites() {
            return Err(Error::ShapeMismatch(format!(
                "source density has {} values, grid has {} sites",
                s.len(),
                grid.sites()
            )));
        }
        if let Some(bad) = s.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "source density must be nonnegative, got {bad} at t = {t}"
            )));
        }
        let mut next = op.apply(profiles.last().expect("seeded")).into_values();
        for (x, sv) in next.iter_mut().zip(&s) {
            *x += dt * sv;
        }
        profiles.push(CapacityProfile::from_trusted(*grid, 1, next));
    }
    Ok(Trajectory { profiles, dt })
}

/// Per step: `κ^Y = α_ℓ ε κ^ℓ` leaves to the side input and
/// `κ^{ℓ−1} = (1 − α_ℓ ε) (I + εΔ) κ^ℓ` continues. Bias runs report
/// the side capacity as per-layer masses.
pub fn propagate_with_leak(spec: &ArchitectureSpec, kappa_l: &CapacityProfile) -> Result<LeakResult> {
    require_variant(spec, &[Variant::Leak, Variant::Bias], "propagate_with_leak")?;
    leak_steps(spec, kappa_l)
}

/// Recurrent networks: the same stepping as [`propagate_with_leak`] with
/// depth read as sequence length `N`. `side[k]` is the capacity reaching the
/// input `k` steps back; `input_capacity` is the initial-state capacity.
pub fn propagate_recurrent(spec: &ArchitectureSpec, kappa_l: &CapacityProfile) -> Result<LeakResult> {
    require_variant(spec, &[Variant::Recurrent], "propagate_recurrent")?;
    leak_steps(spec, kappa_l)
}

fn leak_steps(spec: &ArchitectureSpec, kappa_l: &CapacityProfile) -> Result<LeakResult> {
    spec.validate()?;
    check_input(spec, kappa_l, 1)?;
    let ops = step_operators(spec)?;
    let eps = spec.epsilon();
    let dt = spec.dt();
    let aggregate = spec.variant == Variant::Bias;
    let grid = *kappa_l.grid();

    let mut profiles = Vec::with_capacity(spec.depth);
    let mut spatial = Vec::new();
    let mut aggregated = Vec::new();
    profiles.push(kappa_l.clone());
    for (k, op) in ops.iter().enumerate() {
        let leak = spec.leak_at(k as f64 * dt) * eps;
        let current = profiles.last().expect("seeded");
        let side: Vec<f64> = current.values().iter().map(|v| leak * v).collect();
        let keep = 1.0 - leak;
        let mut next = op.apply(current).into_values();
        next.iter_mut().for_each(|v| *v *= keep);
        let side = CapacityProfile::from_trusted(grid, 1, side);
        if aggregate {
            aggregated.push(side.mass());
        } else {
            spatial.push(side);
        }
        profiles.push(CapacityProfile::from_trusted(grid, 1, next));
    }
    let input_capacity = profiles.last().expect("seeded").clone();
    Ok(LeakResult {
        trajectory: Trajectory { profiles, dt },
        side: if aggregate {
            SideCapacities::Aggregated(aggregated)
        } else {
            SideCapacities::Spatial(spatial)
        },
        input_capacity,
    })
}

/// Block operator over channels: capacity at `(c', x + v)` flows to `(c, x)`
/// at rate `ε δ^{cc'}_v`; each site keeps `1 − εC`.
#[derive(Debug, Clone)]
struct ChannelOperator {
    diagonal: f64,
    blocks: Vec<Vec<Vec<(Offset, f64)>>>,
}

fn channel_operator(spec: &ArchitectureSpec, k: usize) -> Result<ChannelOperator> {
    let coupling = spec
        .channels
        .as_ref()
        .ok_or_else(|| Error::invalid("multichannel spec without channels"))?;
    let c = coupling.count;
    let eps = spec.epsilon();
    let outflow = spec.outflow_per_step();
    let block = |row: usize, col: usize| -> Result<Vec<(Offset, f64)>> {
        let gen = match &coupling.blocks {
            Some(b) => &b[row][col],
            None => spec.generator_at_step(k),
        };
        Ok(build_operator(gen, eps)?.taps().to_vec())
    };
    let mut blocks = Vec::with_capacity(c);
    for row in 0..c {
        blocks.push((0..c).map(|col| block(row, col)).collect::<Result<Vec<_>>>()?);
    }
    let keep = 1.0 - outflow;
    Ok(ChannelOperator {
        diagonal: keep.sqrt() * keep.sqrt(),
        blocks,
    })
}

impl ChannelOperator {
    fn apply(&self, kappa: &CapacityProfile) -> CapacityProfile {
        let grid = *kappa.grid();
        let mut out = Vec::with_capacity(kappa.values().len());
        for (c, row) in self.blocks.iter().enumerate() {
            let mut dst: Vec<f64> = kappa.channel(c).iter().map(|v| self.diagonal * v).collect();
            for (src_c, taps) in row.iter().enumerate() {
                let src = kappa.channel(src_c);
                for (offset, coeff) in taps {
                    gather_shifted(&grid, src, &mut dst, *offset, *coeff);
                }
            }
            out.extend(dst);
        }
        CapacityProfile::from_trusted(grid, kappa.channels(), out)
    }
}

/// Multi-channel propagation with a `C × C` block table.
pub fn propagate_multichannel(
    spec: &ArchitectureSpec,
    kappa_l: &CapacityProfile,
) -> Result<Trajectory> {
    require_variant(spec, &[Variant::Multichannel], "propagate_multichannel")?;
    spec.validate()?;
    check_input(spec, kappa_l, spec.channel_count())?;
    let ops = (0..spec.steps())
        .map(|k| channel_operator(spec, k))
        .collect::<Result<Vec<_>>>()?;
    let mut profiles = Vec::with_capacity(spec.depth);
    profiles.push(kappa_l.clone());
    for op in &ops {
        let next = op.apply(profiles.last().expect("seeded"));
        profiles.push(next);
    }
    Ok(Trajectory {
        profiles,
        dt: spec.dt(),
    })
}

/// Sitewise sum over channels.
pub fn collapse_channels(profile: &CapacityProfile) -> CapacityProfile {
    let n = profile.grid().sites();
    let mut out = profile.channel(0).to_vec();
    for c in 1..profile.channels() {
        for (o, v) in out.iter_mut().zip(profile.channel(c)) {
            *o += v;
        }
    }
    debug_assert_eq!(out.len(), n);
    CapacityProfile::from_trusted(*profile.grid(), 1, out)
}

/// Outcome of [`propagate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Propagation {
    Stream(Trajectory),
    Split(LeakResult),
}

impl Propagation {
    pub fn trajectory(&self) -> &Trajectory {
        match self {
            Propagation::Stream(t) => t,
            Propagation::Split(l) => &l.trajectory,
        }
    }
}

/// Dispatches on `spec.variant`. Source variants ignore `kappa_l` except
/// for its grid and need `source`.
pub fn propagate(
    spec: &ArchitectureSpec,
    kappa_l: &CapacityProfile,
    source: Option<&dyn SourceDensity>,
) -> Result<Propagation> {
    match spec.variant {
        Variant::Residual | Variant::Multidim => propagate_residual(spec, kappa_l).map(Propagation::Stream),
        Variant::Dilated => propagate_dilated(spec, kappa_l).map(Propagation::Stream),
        Variant::Multichannel => propagate_multichannel(spec, kappa_l).map(Propagation::Stream),
        Variant::SkipSource | Variant::Cumulative => {
            let source = source.ok_or_else(|| {
                Error::invalid(format!("variant {} needs a source density", spec.variant.name()))
            })?;
            propagate_with_source(spec, kappa_l.grid(), source).map(Propagation::Stream)
        }
        Variant::Leak | Variant::Bias => propagate_with_leak(spec, kappa_l).map(Propagation::Split),
        Variant::Recurrent => propagate_recurrent(spec, kappa_l).map(Propagation::Split),
    }
}
