use serde::{Deserialize, Serialize};

use crate::{Error, PiecewiseConstant, Result, StencilGenerator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Residual,
    SkipSource,
    Cumulative,
    Leak,
    Bias,
    Dilated,
    Multichannel,
    Multidim,
    Recurrent,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Residual => "residual",
            Variant::SkipSource => "skip_source",
            Variant::Cumulative => "cumulative",
            Variant::Leak => "leak",
            Variant::Bias => "bias",
            Variant::Dilated => "dilated",
            Variant::Multichannel => "multichannel",
            Variant::Multidim => "multidim",
            Variant::Recurrent => "recurrent",
        }
    }

    fn uses_leak(self) -> bool {
        matches!(self, Variant::Leak | Variant::Bias | Variant::Recurrent)
    }
}

/// One generator shared by every layer, or one per propagation step
/// (step `k` maps layer `L − k` to `L − k − 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeneratorSchedule {
    Single(StencilGenerator),
    PerLayer(Vec<StencilGenerator>),
}

/// Channel coupling for multi-channel propagation. `blocks[c][c']` moves
/// capacity from channel `c'` to channel `c`; `None` means every block
/// equals the architecture's generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCoupling {
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<StencilGenerator>>>,
    /// Divide the layer rate by the channel count (the 1/(C·L) scaling).
    #[serde(default = "default_true")]
    pub normalized: bool,
}

fn default_true() -> bool {
    true
}

fn default_exponent() -> f64 {
    1.0
}

/// Which architecture to propagate through and with what scaling.
///
/// The per-layer capacity rate is `ε = c · (L − 1)^(−p)`, further divided by
/// the channel count for normalized multi-channel runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub variant: Variant,
    /// Number of layers `L`, or sequence length `N` for recurrent runs.
    pub depth: usize,
    pub capacity_rate: f64,
    #[serde(default = "default_exponent")]
    pub scaling_exponent: f64,
    pub generators: GeneratorSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak: Option<PiecewiseConstant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dilation_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<ChannelCoupling>,
}

impl ArchitectureSpec {
    pub fn new(variant: Variant, depth: usize, capacity_rate: f64, generator: StencilGenerator) -> Self {
        ArchitectureSpec {
            variant,
            depth,
            capacity_rate,
            scaling_exponent: 1.0,
            generators: GeneratorSchedule::Single(generator),
            leak: None,
            dilation_ratio: None,
            channels: None,
        }
    }

    pub fn with_exponent(mut self, p: f64) -> Self {
        self.scaling_exponent = p;
        self
    }

    pub fn with_leak(mut self, alpha: PiecewiseConstant) -> Self {
        self.leak = Some(alpha);
        self
    }

    pub fn with_dilation(mut self, ratio: f64) -> Self {
        self.dilation_ratio = Some(ratio);
        self
    }

    pub fn with_channels(mut self, coupling: ChannelCoupling) -> Self {
        self.channels = Some(coupling);
        self
    }

    pub fn with_generators(mut self, generators: GeneratorSchedule) -> Self {
        self.generators = generators;
        self
    }

    pub fn steps(&self) -> usize {
        self.depth.saturating_sub(1)
    }

    /// Reverse-time step `1 / (L − 1)`.
    pub fn dt(&self) -> f64 {
        1.0 / self.steps() as f64
    }

    pub fn channel_count(&self) -> usize {
        self.channels.as_ref().map_or(1, |c| c.count)
    }

    /// Per-layer off-diagonal capacity rate.
    pub fn epsilon(&self) -> f64 {
        let base = self.capacity_rate * (self.steps() as f64).powf(-self.scaling_exponent);
        match &self.channels {
            Some(ch) if ch.normalized => base / ch.count as f64,
            _ => base,
        }
    }

    /// Total fraction of a site's capacity leaving it in one step.
    pub fn outflow_per_step(&self) -> f64 {
        self.epsilon() * self.channel_count() as f64
    }

    pub fn generator_at_step(&self, k: usize) -> &StencilGenerator {
        match &self.generators {
            GeneratorSchedule::Single(g) => g,
            GeneratorSchedule::PerLayer(gs) => &gs[k],
        }
    }

    pub fn generator_dim(&self) -> usize {
        self.generator_at_step(0).dim()
    }

    /// Integer dilation used at step `k`: layer `ℓ = L − 1 − k` has
    /// dilation `round(λ^(ℓ−1))`, so the first step carries the largest one.
    pub fn dilation_at_step(&self, k: usize) -> i64 {
        match self.dilation_ratio {
            Some(lambda) => {
                let layer = self.depth - 1 - k;
                lambda.powi(layer as i32 - 1).round() as i64
            }
            None => 1,
        }
    }

    pub fn leak_at(&self, t: f64) -> f64 {
        self.leak.as_ref().map_or(0.0, |a| a.at(t))
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::invalid(format!("depth must be >= 2, got {}", self.depth)));
        }
        if !(self.capacity_rate > 0.0 && self.capacity_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "capacity_rate must be positive, got {}",
                self.capacity_rate
            )));
        }
        if !(self.scaling_exponent >= 0.0 && self.scaling_exponent.is_finite()) {
            return Err(Error::invalid(format!(
                "scaling_exponent must be >= 0, got {}",
                self.scaling_exponent
            )));
        }
        if let GeneratorSchedule::PerLayer(gs) = &self.generators {
            if gs.len() != self.steps() {
                return Err(Error::invalid(format!(
                    "per-layer generator list needs {} entries, got {}",
                    self.steps(),
                    gs.len()
                )));
            }
            if gs.iter().any(|g| g.dim() != gs[0].dim()) {
                return Err(Error::invalid("per-layer generators must share one dimension"));
            }
        }

        let v = self.variant;
        match (v.uses_leak(), &self.leak) {
            (true, None) => {
                return Err(Error::invalid(format!("variant {} requires a leak schedule", v.name())))
            }
            (false, Some(_)) => {
                return Err(Error::invalid(format!("variant {} takes no leak schedule", v.name())))
            }
            _ => {}
        }
        match (v == Variant::Dilated, self.dilation_ratio) {
            (true, None) => return Err(Error::invalid("variant dilated requires dilation_ratio")),
            (true, Some(l)) if !(l >= 1.0 && l.is_finite()) => {
                return Err(Error::invalid(format!("dilation_ratio must be >= 1, got {l}")))
            }
            (false, Some(_)) => {
                return Err(Error::invalid(format!("variant {} takes no dilation_ratio", v.name())))
            }
            _ => {}
        }
        match (v == Variant::Multichannel, &self.channels) {
            (true, None) => return Err(Error::invalid("variant multichannel requires channels")),
            (true, Some(ch)) => {
                if ch.count == 0 {
                    return Err(Error::invalid("channel count must be >= 1"));
                }
                if let Some(blocks) = &ch.blocks {
                    if blocks.len() != ch.count || blocks.iter().any(|row| row.len() != ch.count) {
                        return Err(Error::invalid(format!(
                            "channel block table must be {0}x{0}",
                            ch.count
                        )));
                    }
                    if blocks.iter().flatten().any(|g| g.dim() != self.generator_dim()) {
                        return Err(Error::invalid("channel blocks must match the generator dimension"));
                    }
                }
            }
            (false, Some(_)) => {
                return Err(Error::invalid(format!("variant {} takes no channels", v.name())))
            }
            _ => {}
        }
        if v == Variant::Multidim && self.generator_dim() != 2 {
            return Err(Error::invalid("variant multidim needs a 2D generator"));
        }

        let eps = self.epsilon();
        let outflow = self.outflow_per_step();
        if !(eps > 0.0 && outflow <= 1.0) {
            return Err(Error::invalid(format!(
                "per-step outflow epsilon*channels = {outflow} must lie in (0, 1]"
            )));
        }
        if let Some(alpha) = &self.leak {
            let worst = alpha.max() * eps;
            if worst > 1.0 {
                return Err(Error::invalid(format!(
                    "leak fraction alpha*epsilon = {worst} exceeds 1"
                )));
            }
        }
        Ok(())
    }
}
