//! Box-counting dimension and covered-area estimates on dyadic grids.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{csv, fmt_sig17};
use crate::julia::{bounding_box, PointCloud};
use crate::poly::Complex;

pub const MIN_POINTS: usize = 10_000;
pub const DEFAULT_SCALE_COUNT: usize = 7;
/// Dyadic exponent of the coarsest scale: `r = diam / 2^FIRST_EXPONENT`.
pub const FIRST_EXPONENT: u32 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionFit {
    pub dimension: f64,
    /// Cell sizes, strictly decreasing.
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub r_squared: f64,
    /// Index range `[start, end)` of the scales used in the fit.
    pub fit_range: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaConfig {
    /// Relative spread allowed among the last three reliable covered areas.
    pub plateau_tolerance: f64,
    /// Minimum mean number of points per occupied cell for a scale to count as reliable.
    pub min_density: f64,
}

impl Default for AreaConfig {
    fn default() -> Self {
        Self { plateau_tolerance: 0.2, min_density: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AreaEstimate {
    /// `(cell size, occupied cells, covered area)` per scale.
    pub per_scale: Vec<(f64, usize, f64)>,
    pub extrapolated: f64,
    pub positive: bool,
    /// Number of leading scales that satisfy the density requirement.
    pub reliable: usize,
}

/// Occupied-cell counts on the dyadic grids `r = L / 2^k`, `k = 3, 4, ...`.
///
/// `L` is the cloud's diameter rounded up to a power of two and the cells are
/// those of the global lattice `r Z^2`. Grids are therefore shared by any two
/// clouds whose diameters fall in the same binade, so a larger cloud never
/// occupies fewer cells than a subset of it.
pub fn dyadic_counts(points: &[Complex], scale_count: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    let (lo, hi) = bounding_box(points).ok_or(Error::InsufficientPoints { got: 0, need: 1 })?;
    let diam = (hi.re - lo.re).max(hi.im - lo.im);
    if !(diam > 0.0 && diam.is_finite()) {
        return Err(Error::DegenerateCloud);
    }
    let side = 2f64.powi(diam.log2().ceil() as i32);
    let mut scales = Vec::with_capacity(scale_count);
    let mut counts = Vec::with_capacity(scale_count);
    for k in 0..scale_count as i32 {
        let r = side * 2f64.powi(-(FIRST_EXPONENT as i32) - k);
        let mut keys: Vec<(i64, i64)> =
            points.par_iter().map(|z| ((z.re / r).floor() as i64, (z.im / r).floor() as i64)).collect();
        keys.par_sort_unstable();
        keys.dedup();
        scales.push(r);
        counts.push(keys.len());
    }
    Ok((scales, counts))
}

/// Least-squares slope and r² of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    (slope, intercept, r2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionConfig {
    /// Number of scales in the regression window.
    pub fit_scales: usize,
    /// Minimum mean number of points per occupied cell for a scale to enter the fit.
    pub min_density: f64,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        Self { fit_scales: 4, min_density: 4.0 }
    }
}

pub fn box_dimension(cloud: &PointCloud, scale_count: usize) -> Result<DimensionFit> {
    box_dimension_with(cloud, scale_count, &DimensionConfig::default())
}

/// Box-counting slope over the finest well-sampled interior scales.
///
/// The coarsest and finest scales are always dropped. Of the rest, scales
/// with fewer than `min_density` points per occupied cell are discarded and
/// the finest `fit_scales` survivors are fitted, since boundary cells bias the
/// coarse end of the range for sets with interior.
pub fn box_dimension_with(cloud: &PointCloud, scale_count: usize, cfg: &DimensionConfig) -> Result<DimensionFit> {
    if cloud.points.len() < MIN_POINTS {
        return Err(Error::InsufficientPoints { got: cloud.points.len(), need: MIN_POINTS });
    }
    if scale_count < 4 {
        return Err(Error::InvalidInput(format!("scale_count must be at least 4, got {scale_count}")));
    }
    if cfg.fit_scales < 2 {
        return Err(Error::InvalidInput(format!("fit_scales must be at least 2, got {}", cfg.fit_scales)));
    }
    let (scales, counts) = dyadic_counts(&cloud.points, scale_count)?;
    let n = cloud.points.len() as f64;
    let mut end = scale_count - 1;
    while end > 3 && n / (counts[end - 1] as f64) < cfg.min_density {
        end -= 1;
    }
    let start = end.saturating_sub(cfg.fit_scales).max(1);
    let fit_range = (start, end);
    let x: Vec<f64> = scales[start..end].iter().map(|r| -r.ln()).collect();
    let y: Vec<f64> = counts[start..end].iter().map(|&c| (c as f64).ln()).collect();
    let (dimension, _, r_squared) = linear_fit(&x, &y);
    Ok(DimensionFit { dimension, scales, counts, r_squared, fit_range })
}

pub fn area_estimate(cloud: &PointCloud, scale_count: usize, cfg: &AreaConfig) -> Result<AreaEstimate> {
    if cloud.points.len() < MIN_POINTS {
        return Err(Error::InsufficientPoints { got: cloud.points.len(), need: MIN_POINTS });
    }
    if scale_count < 4 {
        return Err(Error::InvalidInput(format!("scale_count must be at least 4, got {scale_count}")));
    }
    let (scales, counts) = dyadic_counts(&cloud.points, scale_count)?;
    let n = cloud.points.len() as f64;
    let per_scale: Vec<(f64, usize, f64)> =
        scales.iter().zip(&counts).map(|(&r, &c)| (r, c, c as f64 * r * r)).collect();
    let reliable = counts.iter().take_while(|&&c| n / c as f64 >= cfg.min_density).count();
    let extrapolated = if reliable > 0 { per_scale[reliable - 1].2 } else { 0.0 };
    let positive = reliable >= 3 && {
        let tail: Vec<f64> = per_scale[reliable - 3..reliable].iter().map(|s| s.2).collect();
        let max = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = tail.iter().copied().fold(f64::INFINITY, f64::min);
        max > 0.0 && (max - min) / max <= cfg.plateau_tolerance
    };
    Ok(AreaEstimate { per_scale, extrapolated, positive, reliable })
}

pub fn area_csv(est: &AreaEstimate) -> String {
    csv(
        &["scale", "count", "covered_area"],
        est.per_scale.iter().map(|&(r, c, a)| vec![fmt_sig17(r), c.to_string(), fmt_sig17(a)]),
    )
}
