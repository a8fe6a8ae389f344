//! Capacity profiles: nonnegative mass per (channel, site).

use serde::{Deserialize, Serialize};

use crate::{Error, Grid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityProfile {
    grid: Grid,
    channels: usize,
    values: Vec<f64>,
}

impl CapacityProfile {
    pub fn zeros(grid: Grid, channels: usize) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("channel count must be >= 1"));
        }
        Ok(CapacityProfile {
            grid,
            channels,
            values: vec![0.0; channels * grid.sites()],
        })
    }

    /// Channel-major values: `values[c * sites + site]`.
    pub fn from_values(grid: Grid, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("channel count must be >= 1"));
        }
        if values.len() != channels * grid.sites() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {channels} channel(s) x {} sites, got {}",
                channels * grid.sites(),
                grid.sites(),
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::invalid(format!(
                "capacity values must be finite and nonnegative, value[{i}] = {v}"
            )));
        }
        Ok(CapacityProfile {
            grid,
            channels,
            values,
        })
    }

    /// Lattice-sampled Gaussian bump with the given per-axis variance,
    /// periodic images summed, normalized to `mass`. Single channel.
    pub fn gaussian(grid: Grid, center: [f64; 2], variance: f64, mass: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::invalid(format!(
                "gaussian variance must be positive, got {variance}"
            )));
        }
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!("mass must be nonnegative, got {mass}")));
        }
        let axis_weights: Vec<Vec<f64>> = (0..grid.dim())
            .map(|axis| sampled_gaussian_axis(&grid, axis, center[axis], variance))
            .collect();
        let mut values = vec![0.0; grid.sites()];
        for (idx, v) in values.iter_mut().enumerate() {
            let c = grid.coords(idx);
            *v = (0..grid.dim()).map(|a| axis_weights[a][c[a]]).product();
        }
        let total = neumaier_sum(&values);
        if total > 0.0 {
            values.iter_mut().for_each(|v| *v *= mass / total);
        }
        Self::from_values(grid, 1, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.grid.sites();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        neumaier_sum(&self.values)
    }

    pub fn channel_mass(&self, c: usize) -> f64 {
        neumaier_sum(self.channel(c))
    }

    pub fn same_shape(&self, other: &CapacityProfile) -> bool {
        self.grid == other.grid && self.channels == other.channels
    }

    /// Builds a profile whose values are already known to be nonnegative
    /// (products and sums of nonnegative terms).
    pub(crate) fn from_trusted(grid: Grid, channels: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), channels * grid.sites());
        debug_assert!(values.iter().all(|v| *v >= 0.0), "negative capacity");
        CapacityProfile {
            grid,
            channels,
            values,
        }
    }
}

/// Unit mass at `(channel, site)` on a single-channel profile, or on a
/// `channels`-channel profile via [`make_one_hot_channels`].
pub fn make_one_hot(grid: Grid, site: usize, channel: usize) -> Result<CapacityProfile> {
    make_one_hot_channels(grid, channel + 1, site, channel)
}

pub fn make_one_hot_channels(
    grid: Grid,
    channels: usize,
    site: usize,
    channel: usize,
) -> Result<CapacityProfile> {
    if site >= grid.sites() {
        return Err(Error::invalid(format!(
            "site {site} out of range for grid with {} sites",
            grid.sites()
        )));
    }
    if channel >= channels {
        return Err(Error::invalid(format!(
            "channel {channel} out of range for {channels} channel(s)"
        )));
    }
    let mut p = CapacityProfile::zeros(grid, channels)?;
    p.values[channel * grid.sites() + site] = 1.0;
    Ok(p)
}

/// Ordered profiles at reverse layer times `t_k = k * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub profiles: Vec<CapacityProfile>,
    pub dt: f64,
}

impl Trajectory {
    pub fn first(&self) -> &CapacityProfile {
        &self.profiles[0]
    }

    pub fn last(&self) -> &CapacityProfile {
        self.profiles.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

/// Compensated summation; keeps mass bookkeeping accurate over long runs.
pub fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn sampled_gaussian_axis(grid: &Grid, axis: usize, center: f64, variance: f64) -> Vec<f64> {
    let n = grid.extent(axis);
    let sigma = variance.sqrt();
    let images = match grid.boundary() {
        crate::Boundary::Periodic => (10.0 * sigma / n as f64).ceil() as i64 + 1,
        crate::Boundary::Absorbing => 0,
    };
    (0..n)
        .map(|j| {
            (-images..=images)
                .map(|m| {
                    let d = j as f64 + (m * n as i64) as f64 - center;
                    (-d * d / (2.0 * variance)).exp()
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_has_unit_mass() {
        let g = Grid::periodic(9);
        let p = make_one_hot(g, 4, 0).unwrap();
        assert_eq!(p.values()[4], 1.0);
        assert_eq!(p.mass(), 1.0);
        assert_eq!(p.values().iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn one_hot_bounds() {
        let g = Grid::periodic(9);
        assert!(matches!(make_one_hot(g, 9, 0), Err(Error::InvalidArgument(_))));
        assert!(make_one_hot_channels(g, 2, 3, 2).is_err());
        let p = make_one_hot_channels(g, 3, 3, 2).unwrap();
        assert_eq!(p.channel(2)[3], 1.0);
        assert_eq!(p.mass(), 1.0);
    }

    #[test]
    fn rejects_negative_and_nan() {
        let g = Grid::periodic(3);
        assert!(CapacityProfile::from_values(g, 1, vec![0.0, -1e-30, 1.0]).is_err());
        assert!(CapacityProfile::from_values(g, 1, vec![0.0, f64::NAN, 1.0]).is_err());
        assert!(CapacityProfile::from_values(g, 1, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn gaussian_profile_is_normalized_and_centered() {
        let g = Grid::periodic(64);
        let p = CapacityProfile::gaussian(g, [32.0, 0.0], 9.0, 2.0).unwrap();
        assert!((p.mass() - 2.0).abs() < 1e-14);
        assert_eq!(p.values()[31], p.values()[33]);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let xs = [1.0, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        assert!((neumaier_sum(&xs) - 4e-16).abs() < 1e-30);
    }
}
