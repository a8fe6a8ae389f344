//! Experiment configuration files (TOML).
//!
//! Every file carries `schema_version = 1`. Unknown keys are rejected, and
//! semantic errors are reported as [`Error::Config`] with the dotted path of
//! the offending field.

use serde::{Deserialize, Serialize};

use crate::discrete::{ArchitectureSpec, ChannelCoupling, Variant};
use crate::profile::make_one_hot_channels;
use crate::{
    random_generator, CapacityProfile, Error, Grid, Offset, PiecewiseConstant, Result, RngSpec,
    SourceSpec, StencilGenerator,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Convergence,
    ScalingSweep,
    DilatedErf,
    MultichannelXavier,
    LeakSplit,
    RecurrentMemory,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Convergence => "convergence",
            Study::ScalingSweep => "scaling_sweep",
            Study::DilatedErf => "dilated_erf",
            Study::MultichannelXavier => "multichannel_xavier",
            Study::LeakSplit => "leak_split",
            Study::RecurrentMemory => "recurrent_memory",
        }
    }
}

/// Spatial generator shared by every layer.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    /// Equal rates to the `2·dim` nearest neighbours.
    #[default]
    Nearest,
    /// Explicit offsets (one entry per axis) and rates, normalized to sum 1.
    Explicit { offsets: Vec<Vec<i64>>, rates: Vec<f64> },
    /// Uniform random rates on every offset within `radius`, drawn from the run seed.
    Random { radius: usize },
}

impl GeneratorConfig {
    pub fn build(&self, dim: usize, rng: &RngSpec) -> Result<StencilGenerator> {
        let field = "architecture.generator";
        let wrap = |e: Error| Error::config(field, e.to_string());
        match self {
            GeneratorConfig::Nearest => StencilGenerator::nearest_neighbor(dim).map_err(wrap),
            GeneratorConfig::Explicit { offsets, rates } => {
                if offsets.len() != rates.len() {
                    return Err(Error::config(
                        field,
                        format!("{} offsets but {} rates", offsets.len(), rates.len()),
                    ));
                }
                let mut entries = Vec::with_capacity(offsets.len());
                for (o, r) in offsets.iter().zip(rates) {
                    let offset = match (dim, o.as_slice()) {
                        (1, [v]) => Offset::d1(*v),
                        (2, [a, b]) => Offset::d2(*a, *b),
                        _ => {
                            return Err(Error::config(
                                field,
                                format!("offset {o:?} must have {dim} component(s)"),
                            ))
                        }
                    };
                    entries.push((offset, *r));
                }
                StencilGenerator::new(dim, entries).map_err(wrap)
            }
            GeneratorConfig::Random { radius } => random_generator(rng, *radius, dim).map_err(wrap),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    /// Defaults per study (residual, or multidim on 2D grids).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default = "one")]
    pub capacity_rate: f64,
    #[serde(default = "one")]
    pub scaling_exponent: f64,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak: Option<PiecewiseConstant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dilation_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    /// Divide the multi-channel rate by the channel count.
    #[serde(default = "default_true")]
    pub channel_normalized: bool,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig {
            variant: None,
            depth: None,
            capacity_rate: 1.0,
            scaling_exponent: 1.0,
            generator: GeneratorConfig::Nearest,
            leak: None,
            dilation_ratio: None,
            channels: None,
            channel_normalized: true,
        }
    }
}

impl ArchitectureConfig {
    /// Spec for `variant` at `depth`, with every field taken from this section.
    pub fn spec(&self, variant: Variant, depth: usize, generator: StencilGenerator) -> ArchitectureSpec {
        let mut spec = ArchitectureSpec::new(variant, depth, self.capacity_rate, generator)
            .with_exponent(self.scaling_exponent);
        if let Some(alpha) = &self.leak {
            spec = spec.with_leak(alpha.clone());
        }
        if let Some(l) = self.dilation_ratio {
            spec = spec.with_dilation(l);
        }
        if let Some(c) = self.channels {
            spec = spec.with_channels(ChannelCoupling {
                count: c,
                blocks: None,
                normalized: self.channel_normalized,
            });
        }
        spec
    }

    fn check_scalars(&self) -> Result<()> {
        if !(self.capacity_rate > 0.0 && self.capacity_rate.is_finite()) {
            return Err(Error::config(
                "architecture.capacity_rate",
                format!("must be positive, got {}", self.capacity_rate),
            ));
        }
        if !(self.scaling_exponent >= 0.0 && self.scaling_exponent.is_finite()) {
            return Err(Error::config(
                "architecture.scaling_exponent",
                format!("must be >= 0, got {}", self.scaling_exponent),
            ));
        }
        if let Some(l) = self.dilation_ratio {
            check_ratio("architecture.dilation_ratio", l)?;
        }
        if let Some(d) = self.depth {
            check_depth("architecture.depth", d)?;
        }
        if self.channels == Some(0) {
            return Err(Error::config("architecture.channels", "must be >= 1"));
        }
        Ok(())
    }
}

fn check_ratio(field: &str, l: f64) -> Result<()> {
    if !(l >= 1.0 && l.is_finite()) {
        return Err(Error::config(field, format!("must be >= 1, got {l}")));
    }
    Ok(())
}

fn check_depth(field: &str, d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::config(field, format!("must be >= 2, got {d}")));
    }
    Ok(())
}

/// Output-layer capacity `κ^L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    /// Unit mass at `site` (one coordinate per axis; grid centre by default).
    OneHot {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        site: Option<Vec<usize>>,
        #[serde(default)]
        channel: usize,
    },
    /// Lattice-sampled Gaussian (grid centre by default).
    Gaussian {
        variance: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        mass: f64,
        #[serde(default)]
        channel: usize,
    },
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig::OneHot {
            site: None,
            channel: 0,
        }
    }
}

impl InputConfig {
    pub fn build(&self, grid: Grid, channels: usize) -> Result<CapacityProfile> {
        let wrap = |e: Error| Error::config("input", e.to_string());
        let dim = grid.dim();
        match self {
            InputConfig::OneHot { site, channel } => {
                let coords = match site {
                    None => [grid.extent(0) / 2, if dim == 2 { grid.extent(1) / 2 } else { 0 }],
                    Some(s) if s.len() == dim && s.iter().zip(grid.extents()).all(|(a, n)| a < n) => {
                        [s[0], s.get(1).copied().unwrap_or(0)]
                    }
                    Some(s) => {
                        return Err(Error::config(
                            "input.site",
                            format!("{s:?} is not a site of a grid with extents {:?}", grid.extents()),
                        ))
                    }
                };
                make_one_hot_channels(grid, channels, grid.flat_index(coords), *channel).map_err(wrap)
            }
            InputConfig::Gaussian {
                variance,
                center,
                mass,
                channel,
            } => {
                if *channel >= channels {
                    return Err(Error::config(
                        "input.channel",
                        format!("channel {channel} out of range for {channels} channel(s)"),
                    ));
                }
                let c = match center {
                    None => [
                        (grid.extent(0) / 2) as f64,
                        if dim == 2 { (grid.extent(1) / 2) as f64 } else { 0.0 },
                    ],
                    Some(c) if c.len() == dim => [c[0], c.get(1).copied().unwrap_or(0.0)],
                    Some(_) => {
                        return Err(Error::config("input.center", format!("needs {dim} component(s)")))
                    }
                };
                let g = CapacityProfile::gaussian(grid, c, *variance, *mass).map_err(wrap)?;
                let sites = grid.sites();
                let mut values = vec![0.0; sites * channels];
                values[channel * sites..(channel + 1) * sites].copy_from_slice(g.values());
                CapacityProfile::from_values(grid, channels, values).map_err(wrap)
            }
        }
    }

    /// Per-axis variance of the input about its centre (0 for one-hot).
    pub fn variance(&self) -> f64 {
        match self {
            InputConfig::OneHot { .. } => 0.0,
            InputConfig::Gaussian { variance, .. } => *variance,
        }
    }
}

/// Sweep axes. A list that is present must be nonempty.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dilation_ratios: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak_rates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Band `|e(p)| ≤ tol` counted as non-degenerate.
    #[serde(default = "default_tolerance")]
    pub exponent_tolerance: f64,
    /// Control runs whose input capacity falls below this are flagged as vanishing.
    #[serde(default = "default_vanishing")]
    pub vanishing_mass: f64,
}

fn default_tolerance() -> f64 {
    0.05
}

fn default_vanishing() -> f64 {
    1e-8
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            exponent_tolerance: default_tolerance(),
            vanishing_mass: default_vanishing(),
        }
    }
}

/// Mis-scaled sibling runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Controls {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Per-layer rate held fixed in depth by the leak and recurrent controls.
    #[serde(default = "default_reference_epsilon")]
    pub reference_epsilon: f64,
    /// Depth exponent used by the convergence control.
    #[serde(default = "default_control_exponent")]
    pub exponent: f64,
}

fn default_reference_epsilon() -> f64 {
    0.2
}

fn default_control_exponent() -> f64 {
    0.5
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            enabled: true,
            reference_epsilon: default_reference_epsilon(),
            exponent: default_control_exponent(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub study: Study,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub grid: Grid,
    #[serde(default)]
    pub architecture: ArchitectureConfig,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub controls: Controls,
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        let field = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.contains("field"))
            .unwrap_or("config")
            .to_string();
        Error::config(field, msg)
    })
}

fn check_schema(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::config(
            "schema_version",
            format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

fn required<'a, T>(list: &'a Option<Vec<T>>, field: &str) -> Result<&'a [T]> {
    match list {
        None => Err(Error::config(field, "required for this study")),
        Some(v) if v.is_empty() => Err(Error::config(field, "must not be empty")),
        Some(v) => Ok(v),
    }
}

fn nonempty<T>(list: &Option<Vec<T>>, field: &str) -> Result<()> {
    if matches!(list, Some(v) if v.is_empty()) {
        return Err(Error::config(field, "must not be empty"));
    }
    Ok(())
}

/// Ascending, deduplicated copy of a sweep axis.
pub(crate) fn sorted<T: Copy + PartialOrd>(v: &[T]) -> Vec<T> {
    let mut out = v.to_vec();
    out.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
    out.dedup_by(|a, b| a == b);
    out
}

impl ExperimentConfig {
    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks field-level constraints. Grid-size checks that depend on
    /// predicted widths happen when a study is planned.
    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        self.architecture.check_scalars()?;
        let s = &self.sweep;
        nonempty(&s.depths, "sweep.depths")?;
        nonempty(&s.exponents, "sweep.exponents")?;
        nonempty(&s.channels, "sweep.channels")?;
        nonempty(&s.dilation_ratios, "sweep.dilation_ratios")?;
        nonempty(&s.leak_rates, "sweep.leak_rates")?;
        for d in s.depths.iter().flatten() {
            check_depth("sweep.depths", *d)?;
        }
        for p in s.exponents.iter().flatten() {
            if !(*p >= 0.0 && p.is_finite()) {
                return Err(Error::config("sweep.exponents", format!("must be >= 0, got {p}")));
            }
        }
        for c in s.channels.iter().flatten() {
            if *c == 0 {
                return Err(Error::config("sweep.channels", "must be >= 1"));
            }
        }
        for l in s.dilation_ratios.iter().flatten() {
            check_ratio("sweep.dilation_ratios", *l)?;
        }
        for a in s.leak_rates.iter().flatten() {
            if !(*a >= 0.0 && a.is_finite()) {
                return Err(Error::config("sweep.leak_rates", format!("must be >= 0, got {a}")));
            }
        }
        let t = &self.thresholds;
        if !(t.exponent_tolerance >= 0.0 && t.exponent_tolerance.is_finite()) {
            return Err(Error::config("thresholds.exponent_tolerance", "must be >= 0"));
        }
        if !(t.vanishing_mass >= 0.0 && t.vanishing_mass.is_finite()) {
            return Err(Error::config("thresholds.vanishing_mass", "must be >= 0"));
        }
        let c = &self.controls;
        if !(c.reference_epsilon > 0.0 && c.reference_epsilon <= 1.0) {
            return Err(Error::config("controls.reference_epsilon", "must lie in (0, 1]"));
        }
        if !(c.exponent >= 0.0 && c.exponent.is_finite()) {
            return Err(Error::config("controls.exponent", "must be >= 0"));
        }
        self.architecture
            .generator
            .build(self.grid.dim(), &RngSpec::new(0))?;
        if self.input.variance() < 0.0 {
            return Err(Error::config("input.variance", "must be positive"));
        }

        let variant = self.architecture.variant;
        let spatial = |allowed: &[Variant]| -> Result<()> {
            match variant {
                Some(v) if !allowed.contains(&v) => Err(Error::config(
                    "architecture.variant",
                    format!("{} is not supported by study {}", v.name(), self.study.name()),
                )),
                _ => Ok(()),
            }
        };
        match self.study {
            Study::Convergence => {
                required(&s.depths, "sweep.depths")?;
                spatial(&[Variant::Residual, Variant::Multidim])?;
                if self.architecture.scaling_exponent != 1.0 {
                    return Err(Error::config(
                        "architecture.scaling_exponent",
                        "convergence runs use exponent 1",
                    ));
                }
            }
            Study::ScalingSweep => {
                required(&s.depths, "sweep.depths")?;
                required(&s.exponents, "sweep.exponents")?;
                spatial(&[Variant::Residual, Variant::Multidim])?;
            }
            Study::DilatedErf => {
                required(&s.depths, "sweep.depths")?;
                spatial(&[Variant::Dilated])?;
                if self.architecture.dilation_ratio.is_none() && s.dilation_ratios.is_none() {
                    return Err(Error::config(
                        "architecture.dilation_ratio",
                        "required (or give sweep.dilation_ratios)",
                    ));
                }
                if self.grid.dim() != 1 {
                    return Err(Error::config("grid.extents", "dilated runs use a 1D grid"));
                }
            }
            Study::MultichannelXavier => {
                required(&s.channels, "sweep.channels")?;
                spatial(&[Variant::Multichannel])?;
                if self.architecture.depth.is_none() {
                    return Err(Error::config("architecture.depth", "required for this study"));
                }
            }
            Study::LeakSplit => {
                required(&s.depths, "sweep.depths")?;
                required(&s.leak_rates, "sweep.leak_rates")?;
                spatial(&[Variant::Leak, Variant::Bias])?;
            }
            Study::RecurrentMemory => {
                required(&s.depths, "sweep.depths")?;
                required(&s.leak_rates, "sweep.leak_rates")?;
                spatial(&[Variant::Recurrent])?;
            }
        }
        Ok(())
    }
}

/// Configuration for a side-by-side discrete/continuum comparison of one
/// architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub grid: Grid,
    pub architecture: ArchitectureConfig,
    #[serde(default)]
    pub input: InputConfig,
    /// Source density for skip-source and cumulative runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpec>,
    /// Time steps for the continuum quadrature.
    #[serde(default = "default_solver_steps")]
    pub solver_steps: usize,
}

fn default_solver_steps() -> usize {
    1000
}

impl CompareConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: CompareConfig = parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn variant(&self) -> Variant {
        self.architecture.variant.unwrap_or(if self.grid.dim() == 2 {
            Variant::Multidim
        } else {
            Variant::Residual
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_schema(self.schema_version)?;
        self.architecture.check_scalars()?;
        if self.architecture.depth.is_none() {
            return Err(Error::config("architecture.depth", "required"));
        }
        if self.solver_steps == 0 {
            return Err(Error::config("solver_steps", "must be positive"));
        }
        self.architecture
            .generator
            .build(self.grid.dim(), &RngSpec::new(0))?;
        let variant = self.variant();
        match variant {
            Variant::SkipSource | Variant::Cumulative => match &self.source {
                None => return Err(Error::config("source", "required for source variants")),
                Some(s) => s
                    .validate(&self.grid)
                    .map_err(|e| Error::config("source", e.to_string()))?,
            },
            Variant::Dilated if self.architecture.dilation_ratio.is_none() => {
                return Err(Error::config("architecture.dilation_ratio", "required for dilated runs"))
            }
            Variant::Leak | Variant::Bias | Variant::Recurrent if self.architecture.leak.is_none() => {
                return Err(Error::config("architecture.leak", "required for leak variants"))
            }
            Variant::Multichannel if self.architecture.channels.is_none() => {
                return Err(Error::config("architecture.channels", "required for multichannel runs"))
            }
            _ => {}
        }
        Ok(())
    }
}

/// Validates a built spec, attributing failures to the architecture section.
pub(crate) fn checked(spec: ArchitectureSpec) -> Result<ArchitectureSpec> {
    spec.validate().map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config("architecture", other.to_string()),
    })?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SWEEP: &str = r#"
schema_version = 1
study = "scaling_sweep"
grid = { extents = [512] }

[sweep]
depths = [17, 33]
exponents = [0.5, 1.0]
"#;

    #[test]
    fn parses_minimal_sweep() {
        let cfg = ExperimentConfig::from_toml_str(SWEEP).unwrap();
        assert_eq!(cfg.study, Study::ScalingSweep);
        assert_eq!(cfg.thresholds.exponent_tolerance, 0.05);
        assert_eq!(cfg.input, InputConfig::default());
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    fn field_of(text: &str) -> String {
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_name_fields() {
        let bad = SWEEP.replace("exponents = [0.5, 1.0]", "exponents = []");
        assert_eq!(field_of(&bad), "sweep.exponents");
        let bad = format!("{SWEEP}\n[architecture]\ndilation_ratio = 0.5\n");
        assert_eq!(field_of(&bad), "architecture.dilation_ratio");
        let bad = SWEEP.replace("schema_version = 1", "schema_version = 2");
        assert_eq!(field_of(&bad), "schema_version");
        let bad = SWEEP.replace("study", "studdy");
        assert!(field_of(&bad).contains("stud"));
        let bad = SWEEP.replace("exponents = [0.5, 1.0]", "");
        assert_eq!(field_of(&bad), "sweep.exponents");
    }

    #[test]
    fn one_hot_defaults_to_centre() {
        let g = Grid::periodic(9);
        let p = InputConfig::default().build(g, 1).unwrap();
        assert_eq!(p.values()[4], 1.0);
        let bad = InputConfig::OneHot {
            site: Some(vec![9]),
            channel: 0,
        };
        assert!(bad.build(g, 1).is_err());
    }
}
