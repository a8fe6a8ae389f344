//! Source densities `s(t, x)` injected into propagation with sources.

use serde::{Deserialize, Serialize};

use crate::{CapacityProfile, Error, Grid, Result};

pub trait SourceDensity: Send + Sync {
    /// Single-channel density at reverse time `t`. Values must be nonnegative.
    fn density(&self, t: f64, grid: &Grid) -> Vec<f64>;
}

impl<F> SourceDensity for F
where
    F: Fn(f64, &Grid) -> Vec<f64> + Send + Sync,
{
    fn density(&self, t: f64, grid: &Grid) -> Vec<f64> {
        self(t, grid)
    }
}

/// Config-friendly source densities, active on the window `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// `rate` units of capacity per unit time at one site.
    OneHot {
        site: usize,
        #[serde(default = "one")]
        rate: f64,
        #[serde(default)]
        start: f64,
        #[serde(default = "one")]
        end: f64,
    },
    /// Lattice-sampled Gaussian bump carrying `rate` per unit time.
    Gaussian {
        center: Vec<f64>,
        variance: f64,
        #[serde(default = "one")]
        rate: f64,
        #[serde(default)]
        start: f64,
        #[serde(default = "one")]
        end: f64,
    },
    /// Given profile, constant in time (e.g. a rescaled self-capacity density).
    Profile { profile: CapacityProfile },
}

fn one() -> f64 {
    1.0
}

impl SourceSpec {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let (rate, start, end) = match self {
            SourceSpec::OneHot {
                site,
                rate,
                start,
                end,
            } => {
                if *site >= grid.sites() {
                    return Err(Error::invalid(format!("source site {site} out of range")));
                }
                (*rate, *start, *end)
            }
            SourceSpec::Gaussian {
                center,
                variance,
                rate,
                start,
                end,
            } => {
                if center.len() != grid.dim() {
                    return Err(Error::invalid("source center must have one entry per axis"));
                }
                if !(*variance > 0.0) {
                    return Err(Error::invalid("source variance must be positive"));
                }
                (*rate, *start, *end)
            }
            SourceSpec::Profile { profile } => {
                if profile.grid() != grid || profile.channels() != 1 {
                    return Err(Error::ShapeMismatch(
                        "source profile must be single-channel on the run grid".into(),
                    ));
                }
                return Ok(());
            }
        };
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::invalid(format!("source rate must be nonnegative, got {rate}")));
        }
        if !(start >= 0.0 && start < end) {
            return Err(Error::invalid("source window must satisfy 0 <= start < end"));
        }
        Ok(())
    }
}

impl SourceDensity for SourceSpec {
    fn density(&self, t: f64, grid: &Grid) -> Vec<f64> {
        let active = |start: f64, end: f64| t >= start && t < end;
        match self {
            SourceSpec::OneHot {
                site,
                rate,
                start,
                end,
            } => {
                let mut v = vec![0.0; grid.sites()];
                if active(*start, *end) {
                    v[*site] = *rate;
                }
                v
            }
            SourceSpec::Gaussian {
                center,
                variance,
                rate,
                start,
                end,
            } => {
                if !active(*start, *end) {
                    return vec![0.0; grid.sites()];
                }
                let c = [center[0], center.get(1).copied().unwrap_or(0.0)];
                CapacityProfile::gaussian(*grid, c, *variance, *rate)
                    .map(CapacityProfile::into_values)
                    .unwrap_or_else(|_| vec![0.0; grid.sites()])
            }
            SourceSpec::Profile { profile } => profile.values().to_vec(),
        }
    }
}
