//! Scalar diagnostics on capacity profiles.
//!
//! Periodic axes are measured on the minimal wrapped window: the
//! complement of the longest circular run of exactly-zero marginal mass.
//! If that window is wider than half the axis, sites whose marginal mass is
//! at most [`NEGLIGIBLE_MASS`] of the total are treated as empty instead and
//! the mass left outside the window is reported as `truncated_mass`. A window
//! still wider than half the axis makes the centroid ambiguous.

use serde::{Deserialize, Serialize};

use crate::discrete::collapse_channels;
use crate::profile::neumaier_sum;
use crate::{Boundary, CapacityProfile, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileStats {
    pub mass: f64,
    /// Per-axis centroid in lattice units, reduced to `[0, n)` on periodic axes.
    pub centroid: Vec<f64>,
    /// Square root of the total variance about the centroid.
    pub std_width: f64,
    /// Diameter of the smallest centred ball holding 99% of the mass.
    pub quantile_width_99: f64,
    /// Mass outside the measurement window (0 unless tails were truncated).
    pub truncated_mass: f64,
}

/// Relative marginal mass below which a site may be treated as empty.
pub const NEGLIGIBLE_MASS: f64 = 1e-16;

/// Unwrapped site positions and weights of one collapsed profile.
struct Placed {
    mass: f64,
    /// Mass inside the window.
    window_mass: f64,
    truncated_mass: f64,
    centroid: Vec<f64>,
    /// (unwrapped coordinates, weight) for every site with nonzero weight.
    points: Vec<([f64; 2], f64)>,
}

fn place(p: &CapacityProfile) -> Result<Placed> {
    let p = collapse_channels(p);
    let grid = *p.grid();
    let mass = p.mass();
    if !(mass > 0.0) {
        return Err(Error::UndefinedStats("profile has zero mass".into()));
    }
    let dim = grid.dim();
    let mut starts = [0usize; 2];
    let mut widths = [grid.extent(0), grid.extent(1)];
    for axis in 0..dim {
        let n = grid.extent(axis);
        let mut marginal = vec![0.0; n];
        for (idx, v) in p.values().iter().enumerate() {
            marginal[grid.coords(idx)[axis]] += v;
        }
        if grid.boundary() == Boundary::Periodic {
            let (start, width) = wrapped_window(&marginal, 0.0)
                .or_else(|| wrapped_window(&marginal, NEGLIGIBLE_MASS * mass))
                .ok_or(Error::AmbiguousCentroid { extent: n })?;
            starts[axis] = start;
            widths[axis] = width;
        }
    }
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    'sites: for (idx, &v) in p.values().iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let c = grid.coords(idx);
        let mut x = [0.0; 2];
        for axis in 0..dim {
            let n = grid.extent(axis);
            let offset = (c[axis] + n - starts[axis]) % n;
            if offset >= widths[axis] {
                excluded.push(v);
                continue 'sites;
            }
            x[axis] = (starts[axis] + offset) as f64;
        }
        points.push((x, v));
    }
    let weights: Vec<f64> = points.iter().map(|(_, w)| *w).collect();
    let window_mass = neumaier_sum(&weights);
    let centroid = (0..dim)
        .map(|a| {
            let terms: Vec<f64> = points.iter().map(|(x, w)| x[a] * w).collect();
            neumaier_sum(&terms) / window_mass
        })
        .collect();
    Ok(Placed {
        mass,
        window_mass,
        truncated_mass: neumaier_sum(&excluded),
        centroid,
        points,
    })
}

/// `(start, width)` of the minimal window holding every site above
/// `threshold`, or `None` if it covers more than half of the axis.
fn wrapped_window(marginal: &[f64], threshold: f64) -> Option<(usize, usize)> {
    let n = marginal.len();
    let empty = |v: f64| v <= threshold;
    let anchor = marginal.iter().position(|v| !empty(*v))?;
    // Scanning from just past an occupied site keeps every zero run contiguous.
    let (mut best_len, mut best_end) = (0usize, anchor);
    let mut run = 0usize;
    for step in 1..=n {
        let i = (anchor + step) % n;
        if empty(marginal[i]) {
            run += 1;
            if run > best_len {
                best_len = run;
                best_end = i;
            }
        } else {
            run = 0;
        }
    }
    let window = n - best_len;
    if 2 * window > n {
        return None;
    }
    Some(((best_end + 1) % n, window))
}

fn squared_distance(x: &[f64; 2], c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(a, ca)| (x[a] - ca).powi(2)).sum()
}

pub fn profile_stats(p: &CapacityProfile) -> Result<ProfileStats> {
    let placed = place(p)?;
    let terms: Vec<f64> = placed
        .points
        .iter()
        .map(|(x, w)| w * squared_distance(x, &placed.centroid))
        .collect();
    let variance = neumaier_sum(&terms) / placed.window_mass;
    let q99 = quantile_from(&placed, 0.99);
    let grid = *p.grid();
    let centroid = placed
        .centroid
        .iter()
        .enumerate()
        .map(|(a, c)| match grid.boundary() {
            Boundary::Periodic => c.rem_euclid(grid.extent(a) as f64),
            Boundary::Absorbing => *c,
        })
        .collect();
    Ok(ProfileStats {
        mass: placed.mass,
        centroid,
        std_width: variance.sqrt(),
        quantile_width_99: q99,
        truncated_mass: placed.truncated_mass,
    })
}

/// Diameter of the smallest ball around the centroid holding fraction `q`.
pub fn quantile_width(p: &CapacityProfile, q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::invalid(format!("quantile must lie in (0, 1], got {q}")));
    }
    Ok(quantile_from(&place(p)?, q))
}

fn quantile_from(placed: &Placed, q: f64) -> f64 {
    let mut by_distance: Vec<(f64, f64)> = placed
        .points
        .iter()
        .map(|(x, w)| (squared_distance(x, &placed.centroid).sqrt(), *w))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    let target = q * placed.window_mass * (1.0 - 1e-12);
    let mut acc = 0.0;
    for (d, w) in &by_distance {
        acc += w;
        if acc >= target {
            return 2.0 * d;
        }
    }
    2.0 * by_distance.last().map_or(0.0, |x| x.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L1,
    L2,
    LInf,
}

/// Discrete Lp distance over all sites and channels.
pub fn lp_error(a: &CapacityProfile, b: &CapacityProfile, norm: Norm) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(
            "profiles differ in grid or channel count".into(),
        ));
    }
    let diffs = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs());
    Ok(match norm {
        Norm::L1 => neumaier_sum(&diffs.collect::<Vec<_>>()),
        Norm::L2 => neumaier_sum(&diffs.map(|d| d * d).collect::<Vec<_>>()).sqrt(),
        Norm::LInf => diffs.fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r2: f64,
}

/// Least-squares line through `(ln x, ln y)`: `y ≈ prefactor · x^exponent`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "power-law fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some((x, y)) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::invalid(format!(
            "power-law fit needs positive finite points, got ({x}, {y})"
        )));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = points.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("power-law fit needs at least 2 distinct x values"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(PowerLawFit {
        exponent: slope,
        prefactor: intercept.exp(),
        r2,
    })
}
