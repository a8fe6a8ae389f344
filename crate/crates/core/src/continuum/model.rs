use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{CapacityProfile, Error, PiecewiseConstant, Result, SourceDensity};

/// Diffusion coefficient `D(t)` on `t ∈ [0, 1]`, or a constant 2D tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diffusivity {
    Constant { value: f64 },
    /// `D(t) = scale · e^{growth (1 − t)}`, the smooth analogue of dilations
    /// growing exponentially towards the output.
    Exponential { scale: f64, growth: f64 },
    Piecewise { schedule: PiecewiseConstant },
    /// Constant symmetric tensor `D_ij` for 2D grids.
    Tensor { d: [[f64; 2]; 2] },
}

impl Diffusivity {
    pub fn constant(value: f64) -> Self {
        Diffusivity::Constant { value }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let ok = match self {
            Diffusivity::Constant { value } => value.is_finite() && *value >= 0.0,
            Diffusivity::Exponential { scale, growth } => {
                scale.is_finite() && *scale >= 0.0 && growth.is_finite()
            }
            Diffusivity::Piecewise { .. } => true,
            Diffusivity::Tensor { d } => {
                if dim != 2 {
                    return Err(Error::invalid("a diffusion tensor needs a 2D grid"));
                }
                d[0][1] == d[1][0]
                    && d[0][0] >= 0.0
                    && d[1][1] >= 0.0
                    && d[0][0] * d[1][1] - d[0][1] * d[0][1] >= 0.0
                    && d.iter().flatten().all(|x| x.is_finite())
            }
        };
        if !ok {
            return Err(Error::invalid(format!(
                "diffusivity must be nonnegative (tensor: symmetric positive semidefinite): {self:?}"
            )));
        }
        Ok(())
    }

    /// Scalar `D(t)`; the mean diagonal entry for a tensor.
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Diffusivity::Constant { value } => *value,
            Diffusivity::Exponential { scale, growth } => scale * (growth * (1.0 - t)).exp(),
            Diffusivity::Piecewise { schedule } => schedule.at(t),
            Diffusivity::Tensor { d } => 0.5 * (d[0][0] + d[1][1]),
        }
    }

    /// `V(t) = ∫₀ᵗ D(s) ds` for scalar diffusivities.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            Diffusivity::Constant { value } => value * t,
            Diffusivity::Exponential { scale, growth } => {
                if *growth == 0.0 {
                    scale * t
                } else {
                    // ∫₀ᵗ e^{g(1−s)} ds = e^g (1 − e^{−g t}) / g
                    scale * growth.exp() * (-(-growth * t).exp_m1()) / growth
                }
            }
            Diffusivity::Piecewise { schedule } => schedule.integral(t),
            Diffusivity::Tensor { d } => 0.5 * (d[0][0] + d[1][1]) * t,
        }
    }

    /// `∫₀ᵗ D_ij(s) ds` as a 2×2 tensor (scalar diffusivities are isotropic).
    pub fn integral_tensor(&self, t: f64) -> [[f64; 2]; 2] {
        match self {
            Diffusivity::Tensor { d } => [[d[0][0] * t, d[0][1] * t], [d[1][0] * t, d[1][1] * t]],
            other => {
                let v = other.integral(t);
                [[v, 0.0], [0.0, v]]
            }
        }
    }

    pub fn tensor_at(&self, t: f64) -> [[f64; 2]; 2] {
        match self {
            Diffusivity::Tensor { d } => *d,
            other => {
                let v = other.at(t);
                [[v, 0.0], [0.0, v]]
            }
        }
    }

    pub fn max_on_unit_interval(&self) -> f64 {
        match self {
            Diffusivity::Constant { value } => *value,
            Diffusivity::Exponential { scale, growth } => scale * growth.max(0.0).exp(),
            Diffusivity::Piecewise { schedule } => schedule.max(),
            Diffusivity::Tensor { d } => d[0][0].max(d[1][1]),
        }
    }
}

/// Continuum counterpart of a propagation run:
/// `∂π/∂t = Σ D_ij ∂_i∂_j π − α(t) π + s(t, x)`, `π(0, ·) = initial`.
#[derive(Clone)]
pub struct DiffusionModel {
    pub diffusivity: Diffusivity,
    pub absorption: PiecewiseConstant,
    pub source: Option<Arc<dyn SourceDensity>>,
    pub initial: CapacityProfile,
}

impl fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("diffusivity", &self.diffusivity)
            .field("absorption", &self.absorption)
            .field("source", &self.source.as_ref().map(|_| "<density>"))
            .field("initial_mass", &self.initial.mass())
            .finish()
    }
}

impl DiffusionModel {
    pub fn new(initial: CapacityProfile, diffusivity: Diffusivity) -> Self {
        DiffusionModel {
            diffusivity,
            absorption: PiecewiseConstant::zero(),
            source: None,
            initial,
        }
    }

    pub fn with_absorption(mut self, alpha: PiecewiseConstant) -> Self {
        self.absorption = alpha;
        self
    }

    pub fn with_source(mut self, source: Arc<dyn SourceDensity>) -> Self {
        self.source = Some(source);
        self
    }

    pub fn dim(&self) -> usize {
        self.initial.grid().dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.diffusivity.validate(self.dim())
    }
}
