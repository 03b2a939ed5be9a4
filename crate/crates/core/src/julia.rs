//! Julia-set sampling by random inverse iteration, occupancy rasters,
//! filled-Julia-set membership, inclusion and open-set-condition checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly::{Complex, Polynomial};
use crate::semigroup::{inverse_branches, MultiMap};

pub const DEFAULT_BURN_IN: usize = 256;
pub const DEFAULT_POINTS: usize = 200_000;
pub const DEFAULT_FILLED_ITER: usize = 256;

/// Backward-orbit sample of a Julia set.
///
/// `symbols[k]` records the generator used to reach `points[k]`, i.e.
/// `f_{symbols[k]}(points[k])` is the previous state of the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Complex>,
    pub symbols: Vec<usize>,
    pub seed: u64,
    pub burn_in: usize,
    pub count: usize,
}

impl PointCloud {
    /// Builds a cloud from bare points (no symbol history).
    pub fn from_points(points: Vec<Complex>) -> Self {
        let count = points.len();
        Self { symbols: vec![0; count], points, seed: 0, burn_in: 0, count }
    }

    pub fn bbox(&self) -> Option<(Complex, Complex)> {
        bounding_box(&self.points)
    }
}

pub fn bounding_box(points: &[Complex]) -> Option<(Complex, Complex)> {
    let first = *points.first()?;
    let (mut lo, mut hi) = (first, first);
    for z in points {
        lo.re = lo.re.min(z.re);
        lo.im = lo.im.min(z.im);
        hi.re = hi.re.max(z.re);
        hi.im = hi.im.max(z.im);
    }
    Some((lo, hi))
}

/// The repelling fixed point of `f_1` with the largest `|f_1'|`.
pub fn repelling_fixed_point(f: &MultiMap) -> Result<Complex> {
    let g = f.generator(0);
    let fixed = g.shifted_identity().roots()?;
    let dg = f.generator_derivative(0);
    let (best, mult) = fixed
        .iter()
        .map(|&z| (z, dg.eval(z).norm()))
        .fold((Complex::new(0.0, 0.0), f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if !(mult > 1.0) {
        return Err(Error::NoRepellingFixedPoint);
    }
    Ok(best)
}

pub fn backward_orbit(f: &MultiMap, n_points: usize, burn_in: usize, seed: u64) -> Result<PointCloud> {
    let start = repelling_fixed_point(f)?;
    backward_orbit_from(f, start, n_points, burn_in, seed)
}

/// Chaos game started from an explicit point.
pub fn backward_orbit_from(f: &MultiMap, start: Complex, n_points: usize, burn_in: usize, seed: u64) -> Result<PointCloud> {
    if !(start.re.is_finite() && start.im.is_finite()) {
        return Err(Error::NonFinite("chaos-game start point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = f.m();
    let mut z = start;
    let mut points = Vec::with_capacity(n_points);
    let mut symbols = Vec::with_capacity(n_points);
    for step in 0..burn_in + n_points {
        let j = rng.random_range(0..m);
        let roots = inverse_branches(f, j, z)?;
        z = roots[rng.random_range(0..roots.len())];
        if step >= burn_in {
            points.push(z);
            symbols.push(j);
        }
    }
    Ok(PointCloud { points, symbols, seed, burn_in, count: n_points })
}

/// Binary occupancy grid. Row 0 is the top row (largest imaginary part).
#[derive(Clone, Debug, PartialEq)]
pub struct GridRaster {
    pub min: Complex,
    pub max: Complex,
    pub nx: usize,
    pub ny: usize,
    bits: Vec<u64>,
}

impl GridRaster {
    pub fn new(min: Complex, max: Complex, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidInput(format!("raster resolution must be at least 2x2, got {nx}x{ny}")));
        }
        if !(max.re > min.re && max.im > min.im) {
            return Err(Error::InvalidInput("raster bounding box is degenerate".into()));
        }
        Ok(Self { min, max, nx, ny, bits: vec![0; (nx * ny).div_ceil(64)] })
    }

    /// Cell `(column, row)` containing `z`, if inside the box.
    pub fn cell_of(&self, z: Complex) -> Option<(usize, usize)> {
        if !(z.re >= self.min.re && z.re <= self.max.re && z.im >= self.min.im && z.im <= self.max.im) {
            return None;
        }
        let fx = (z.re - self.min.re) / (self.max.re - self.min.re);
        let fy = (self.max.im - z.im) / (self.max.im - self.min.im);
        let ix = ((fx * self.nx as f64) as usize).min(self.nx - 1);
        let iy = ((fy * self.ny as f64) as usize).min(self.ny - 1);
        Some((ix, iy))
    }

    pub fn get(&self, ix: usize, iy: usize) -> bool {
        let k = iy * self.nx + ix;
        self.bits[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn set(&mut self, ix: usize, iy: usize) {
        let k = iy * self.nx + ix;
        self.bits[k / 64] |= 1 << (k % 64);
    }

    pub fn occupied(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn cell_area(&self) -> f64 {
        (self.max.re - self.min.re) / self.nx as f64 * (self.max.im - self.min.im) / self.ny as f64
    }

    /// Binary PGM (P5): occupied cells black, empty cells white.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.nx, self.ny).into_bytes();
        out.reserve(self.nx * self.ny);
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                out.push(if self.get(ix, iy) { 0 } else { 255 });
            }
        }
        out
    }
}

/// Marks every cell hit by the cloud; returns the raster and the number of points outside the box.
pub fn rasterize(points: &[Complex], min: Complex, max: Complex, nx: usize, ny: usize) -> Result<(GridRaster, usize)> {
    let empty = GridRaster::new(min, max, nx, ny)?;
    let (raster, outside) = points
        .par_chunks(8192)
        .fold(
            || (empty.clone(), 0usize),
            |(mut r, mut out), chunk| {
                for &z in chunk {
                    match r.cell_of(z) {
                        Some((ix, iy)) => r.set(ix, iy),
                        None => out += 1,
                    }
                }
                (r, out)
            },
        )
        .reduce(
            || (empty.clone(), 0usize),
            |(mut a, oa), (b, ob)| {
                for (x, y) in a.bits.iter_mut().zip(&b.bits) {
                    *x |= y;
                }
                (a, oa + ob)
            },
        );
    Ok((raster, outside))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Escaped(usize),
}

/// Escape-time oracle for the filled Julia set of a single polynomial.
#[derive(Clone, Debug)]
pub struct FilledSetOracle {
    pub map: Polynomial,
    pub escape_radius: f64,
    pub max_iter: usize,
    disk: Option<(Complex, f64)>,
}

impl FilledSetOracle {
    pub fn new(map: Polynomial, max_iter: usize) -> Result<Self> {
        let r = Self::minimal_radius(&map)?;
        Self::with_radius(map, r, max_iter)
    }

    pub fn with_radius(map: Polynomial, escape_radius: f64, max_iter: usize) -> Result<Self> {
        if max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        let need = Self::minimal_radius(&map)?;
        if !(escape_radius >= need) {
            return Err(Error::InvalidInput(format!(
                "escape radius {escape_radius} is below the coefficient bound {need}"
            )));
        }
        let disk = map.centered_monomial_form().map(|(a, c)| {
            let d = map.degree() as f64;
            (c, a.norm().powf(-1.0 / (d - 1.0)))
        });
        Ok(Self { map, escape_radius, max_iter, disk })
    }

    /// Smallest radius the coefficient bound certifies: `|z| > R` implies `|p(z)| > 2|z|`.
    pub fn minimal_radius(map: &Polynomial) -> Result<f64> {
        let d = map.degree();
        let c = map.coeffs();
        let lead = c[d].norm();
        if d == 1 {
            if lead <= 2.0 {
                return Err(Error::InvalidInput(format!(
                    "affine map with |a| = {lead} <= 2 has no escape radius with doubling"
                )));
            }
            return Ok((c[0].norm() / (lead - 2.0)).max(1.0));
        }
        let s: f64 = c[..d].iter().map(|x| x.norm()).sum();
        Ok(((2.0 + s) / lead).max(1.0))
    }

    pub fn membership(&self, z: Complex) -> Membership {
        let mut z = z;
        for step in 0..self.max_iter {
            if z.norm() > self.escape_radius {
                return Membership::Escaped(step);
            }
            z = self.map.eval(z);
        }
        if z.norm() > self.escape_radius {
            Membership::Escaped(self.max_iter)
        } else {
            Membership::Inside
        }
    }

    /// Center and radius when the filled set is a round disk.
    pub fn disk(&self) -> Option<(Complex, f64)> {
        self.disk
    }
}

pub fn filled_membership(oracle: &FilledSetOracle, z: Complex) -> Membership {
    oracle.membership(z)
}

/// A planar set given by a membership predicate and a boundary parametrisation.
pub trait Region: Sync {
    fn contains(&self, z: Complex) -> bool;
    fn boundary(&self, n: usize) -> Vec<Complex>;
    fn bbox(&self) -> (Complex, Complex) {
        let pts = self.boundary(720);
        bounding_box(&pts).unwrap_or((Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)))
    }
}

fn circle(center: Complex, radius: f64, n: usize) -> Vec<Complex> {
    (0..n)
        .map(|k| center + Complex::from_polar(radius, 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct Disk {
    pub center: Complex,
    pub radius: f64,
    pub closed: bool,
}

impl Region for Disk {
    fn contains(&self, z: Complex) -> bool {
        let d = (z - self.center).norm();
        if self.closed {
            d <= self.radius
        } else {
            d < self.radius
        }
    }

    fn boundary(&self, n: usize) -> Vec<Complex> {
        circle(self.center, self.radius, n)
    }
}

/// `K(g)`, or its interior when `open` is set.
///
/// When `g` is a centred monomial the set is a round disk and membership is
/// decided exactly; otherwise the escape-time oracle is used and the
/// boundary is sampled by inverse iteration.
#[derive(Clone, Debug)]
pub struct FilledJulia {
    pub oracle: FilledSetOracle,
    pub open: bool,
}

impl FilledJulia {
    pub fn new(map: Polynomial, open: bool) -> Result<Self> {
        Ok(Self { oracle: FilledSetOracle::new(map, DEFAULT_FILLED_ITER)?, open })
    }
}

impl Region for FilledJulia {
    fn contains(&self, z: Complex) -> bool {
        match self.oracle.disk() {
            Some((c, r)) => {
                let d = (z - c).norm();
                if self.open {
                    d < r
                } else {
                    d <= r
                }
            }
            None => self.oracle.membership(z) == Membership::Inside,
        }
    }

    fn boundary(&self, n: usize) -> Vec<Complex> {
        if let Some((c, r)) = self.oracle.disk() {
            return circle(c, r, n);
        }
        let f = MultiMap::new(vec![self.oracle.map.clone()]).expect("one generator");
        backward_orbit(&f, n, DEFAULT_BURN_IN, 0).map(|c| c.points).unwrap_or_default()
    }
}

/// `map^{-1}(inner)`.
pub struct Preimage<'a> {
    pub map: Polynomial,
    pub inner: &'a dyn Region,
}

impl Region for Preimage<'_> {
    fn contains(&self, z: Complex) -> bool {
        self.inner.contains(self.map.eval(z))
    }

    fn boundary(&self, n: usize) -> Vec<Complex> {
        let f = MultiMap::new(vec![self.map.clone()]).expect("one generator");
        let per = n.div_ceil(self.map.degree()).max(1);
        self.inner
            .boundary(per)
            .into_iter()
            .filter_map(|w| inverse_branches(&f, 0, w).ok())
            .flatten()
            .collect()
    }
}

/// `outer \ inner`.
pub struct Difference<'a> {
    pub outer: &'a dyn Region,
    pub inner: &'a dyn Region,
}

impl Region for Difference<'_> {
    fn contains(&self, z: Complex) -> bool {
        self.outer.contains(z) && !self.inner.contains(z)
    }

    fn boundary(&self, n: usize) -> Vec<Complex> {
        let mut b = self.outer.boundary(n);
        b.extend(self.inner.boundary(n));
        b
    }

    fn bbox(&self) -> (Complex, Complex) {
        self.outer.bbox()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Inclusion {
    Holds,
    Fails(Complex),
}

impl Inclusion {
    pub fn holds(&self) -> bool {
        matches!(self, Inclusion::Holds)
    }
}

fn compass(z: Complex, margin: f64) -> impl Iterator<Item = Complex> {
    (0..8).map(move |k| z + Complex::from_polar(margin, std::f64::consts::FRAC_PI_4 * k as f64))
}

/// Checks that every sample of `∂A` lies in `B` together with its `margin` compass probes.
pub fn inclusion_test(b: &dyn Region, samples: &[Complex], margin: f64) -> Inclusion {
    let witness = samples
        .par_iter()
        .find_first(|&&z| !b.contains(z) || (margin > 0.0 && compass(z, margin).any(|p| !b.contains(p))));
    match witness {
        Some(&z) => Inclusion::Fails(z),
        None => Inclusion::Holds,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OscConfig {
    /// Grid resolution per axis for the interior samples of `U`.
    pub grid: usize,
    /// Boundary samples of `U` used for the closure-separation test.
    pub boundary_samples: usize,
    /// Separation required between the closures, as an absolute distance.
    pub margin: f64,
}

impl Default for OscConfig {
    fn default() -> Self {
        Self { grid: 400, boundary_samples: 4096, margin: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscReport {
    pub forward_invariance: bool,
    pub pairwise_disjoint: bool,
    pub separating: bool,
    /// Smallest distance found between boundary samples of distinct preimages.
    pub min_separation: f64,
    pub interior_samples: usize,
}

/// Numerical open-set-condition check for `U` under the inverse branches of `f`.
pub fn osc_check(f: &MultiMap, u: &dyn Region, cfg: &OscConfig) -> Result<OscReport> {
    let (lo, hi) = u.bbox();
    let n = cfg.grid.max(2);
    let grid: Vec<Complex> = (0..n * n)
        .map(|k| {
            let (ix, iy) = (k % n, k / n);
            Complex::new(
                lo.re + (hi.re - lo.re) * (ix as f64 + 0.5) / n as f64,
                lo.im + (hi.im - lo.im) * (iy as f64 + 0.5) / n as f64,
            )
        })
        .collect();
    let interior: Vec<Complex> = grid.par_iter().copied().filter(|&z| u.contains(z)).collect();
    let m = f.m();

    let forward_invariance = interior
        .par_iter()
        .map(|&w| -> Result<bool> {
            for j in 0..m {
                if inverse_branches(f, j, w)?.into_iter().any(|r| !u.contains(r)) {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .all(|b| b);

    // grid over the hull of U and its preimages
    let pre_bound: Vec<Vec<Complex>> = (0..m)
        .map(|j| -> Result<Vec<Complex>> {
            let mut out = Vec::new();
            for w in u.boundary(cfg.boundary_samples) {
                out.extend(inverse_branches(f, j, w)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let hull_points: Vec<Complex> = pre_bound.iter().flatten().copied().chain([lo, hi]).collect();
    let hull = bounding_box(&hull_points).expect("nonempty");
    let pairwise_disjoint = (0..n * n).into_par_iter().all(|k| {
        let (ix, iy) = (k % n, k / n);
        let z = Complex::new(
            hull.0.re + (hull.1.re - hull.0.re) * (ix as f64 + 0.5) / n as f64,
            hull.0.im + (hull.1.im - hull.0.im) * (iy as f64 + 0.5) / n as f64,
        );
        (0..m).filter(|&j| u.contains(f.generator(j).eval(z))).count() <= 1
    });

    let mut min_separation = f64::INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            min_separation = min_separation.min(min_distance(&pre_bound[i], &pre_bound[j], cfg.margin));
        }
    }
    let separating = pairwise_disjoint && min_separation > cfg.margin;
    Ok(OscReport { forward_invariance, pairwise_disjoint, separating, min_separation, interior_samples: interior.len() })
}

/// Minimum distance between two point sets via a uniform hash grid of cell size `h`.
pub(crate) fn min_distance(a: &[Complex], b: &[Complex], h: f64) -> f64 {
    use std::collections::HashMap;
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let h = h.max(1e-12);
    let key = |z: Complex| ((z.re / h).floor() as i64, (z.im / h).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<Complex>> = HashMap::new();
    for &z in b {
        buckets.entry(key(z)).or_default().push(z);
    }
    let near = a
        .par_iter()
        .map(|&z| {
            let (kx, ky) = key(z);
            let mut best = f64::INFINITY;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(v) = buckets.get(&(kx + dx, ky + dy)) {
                        for w in v {
                            best = best.min((z - w).norm());
                        }
                    }
                }
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min);
    if near.is_finite() {
        return near;
    }
    // nothing within one cell: the exact value is irrelevant beyond "greater than h"
    let step_a = (a.len() / 512).max(1);
    let step_b = (b.len() / 512).max(1);
    a.iter()
        .step_by(step_a)
        .flat_map(|z| b.iter().step_by(step_b).map(move |w| (z - w).norm()))
        .fold(f64::INFINITY, f64::min)
        .max(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn interval() -> MultiMap {
        MultiMap::new(vec![
            Polynomial::from_real(&[0.0, 2.0]).unwrap(),
            Polynomial::from_real(&[-1.0, 2.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn interval_cloud_lies_on_unit_segment() {
        let cloud = backward_orbit(&interval(), 20_000, DEFAULT_BURN_IN, 7).unwrap();
        assert_eq!(cloud.count, cloud.points.len());
        for z in &cloud.points {
            assert!(z.re >= -1e-6 && z.re <= 1.0 + 1e-6 && z.im.abs() < 1e-6);
        }
    }

    #[test]
    fn backward_orbit_is_reproducible() {
        let f = interval();
        let a = backward_orbit(&f, 1000, 32, 11).unwrap();
        let b = backward_orbit(&f, 1000, 32, 11).unwrap();
        assert_eq!(a, b);
        let c2 = backward_orbit(&f, 1000, 32, 12).unwrap();
        assert_ne!(a.points, c2.points);
    }

    #[test]
    fn symbols_link_consecutive_points() {
        let f = MultiMap::new(vec![
            Polynomial::from_real(&[0.0, 0.0, 2.0]).unwrap(),
            Polynomial::monomial(2).unwrap(),
        ])
        .unwrap();
        let cloud = backward_orbit(&f, 500, 64, 3).unwrap();
        for k in 1..cloud.points.len() {
            let img = f.generator(cloud.symbols[k]).eval(cloud.points[k]);
            assert!((img - cloud.points[k - 1]).norm() < 1e-12);
        }
    }

    #[test]
    fn no_repelling_fixed_point() {
        let f = MultiMap::new(vec![Polynomial::from_real(&[0.0, 0.5]).unwrap()]).unwrap();
        assert!(matches!(backward_orbit(&f, 10, 10, 0), Err(Error::NoRepellingFixedPoint)));
    }

    #[test]
    fn raster_examples() {
        let (lo, hi) = (c(-1.0, -1.0), c(1.0, 1.0));
        let (r, out) = rasterize(&[c(0.0, 0.0)], lo, hi, 3, 3).unwrap();
        assert_eq!((r.occupied(), out), (1, 0));
        assert!(r.get(1, 1));
        let (r, _) = rasterize(&[], lo, hi, 3, 3).unwrap();
        assert_eq!(r.occupied(), 0);
        let (r, out) = rasterize(&[c(5.0, 0.0), c(0.9, 0.9)], lo, hi, 4, 4).unwrap();
        assert_eq!((r.occupied(), out), (1, 1));
        assert!(r.get(3, 0), "row 0 is the top row");
        assert!(GridRaster::new(lo, hi, 1, 5).is_err());
    }

    #[test]
    fn raster_disk_fraction_matches_monte_carlo_area() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Complex> = (0..10_000)
            .map(|_| {
                let r: f64 = rng.random::<f64>().sqrt();
                let t: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                Complex::from_polar(r, t)
            })
            .collect();
        let (r, _) = rasterize(&pts, c(-1.0, -1.0), c(1.0, 1.0), 100, 100).unwrap();
        // 10^4 points over ~7854 cells leave holes; compare against the
        // expected fraction of cells hit by a Poisson sample of this density
        let frac = r.occupied() as f64 / 1e4;
        let cells_in_disk = std::f64::consts::FRAC_PI_4 * 1e4;
        let expected = cells_in_disk * (1.0 - (-1e4 / cells_in_disk).exp()) / 1e4;
        assert!((frac - expected).abs() < 0.02, "frac {frac}, expected {expected}");
    }

    #[test]
    fn pgm_layout() {
        let (r, _) = rasterize(&[c(0.9, 0.9)], c(-1.0, -1.0), c(1.0, 1.0), 2, 2).unwrap();
        let pgm = r.to_pgm();
        assert!(pgm.starts_with(b"P5\n2 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 4..], &[255, 0, 255, 255]);
    }

    #[test]
    fn filled_membership_examples() {
        let sq = FilledSetOracle::new(Polynomial::monomial(2).unwrap(), 100).unwrap();
        assert_eq!(filled_membership(&sq, c(0.5, 0.0)), Membership::Inside);
        assert!(matches!(filled_membership(&sq, c(2.0, 0.0)), Membership::Escaped(_)));
        let b = c(0.1, 0.0);
        let g = Polynomial::centered_power(c(0.5, 0.0), b, 2, b).unwrap();
        let o = FilledSetOracle::new(g, 100).unwrap();
        assert_eq!(filled_membership(&o, b), Membership::Inside);
        let (center, radius) = o.disk().unwrap();
        assert!((center - b).norm() < 1e-14 && (radius - 2.0).abs() < 1e-12);
    }

    #[test]
    fn escape_radius_bound_is_enforced() {
        let p = Polynomial::from_real(&[3.0, 0.0, 1.0]).unwrap();
        let r = FilledSetOracle::minimal_radius(&p).unwrap();
        assert_eq!(r, 5.0);
        assert!(FilledSetOracle::with_radius(p.clone(), 4.0, 10).is_err());
        for k in 0..64 {
            let z = Complex::from_polar(r * 1.0001, k as f64 * 0.1);
            assert!(p.eval(z).norm() > 2.0 * z.norm());
        }
    }

    #[test]
    fn inclusion_examples() {
        let a = Disk { center: c(0.0, 0.0), radius: 1.0, closed: true };
        let samples = a.boundary(720);
        let big = Disk { center: c(0.0, 0.0), radius: 2.0, closed: false };
        assert!(inclusion_test(&big, &samples, 0.5).holds());
        let tight = Disk { center: c(0.0, 0.0), radius: 1.01, closed: false };
        assert!(!inclusion_test(&tight, &samples, 0.5).holds());
    }

    #[test]
    fn annulus_osc_open_disjoint_but_not_separating() {
        let f = MultiMap::new(vec![
            Polynomial::from_real(&[0.0, 0.0, 2.0]).unwrap(),
            Polynomial::monomial(2).unwrap(),
        ])
        .unwrap();
        let outer = Disk { center: c(0.0, 0.0), radius: 1.0, closed: false };
        let inner = Disk { center: c(0.0, 0.0), radius: 0.5, closed: true };
        let u = Difference { outer: &outer, inner: &inner };
        let rep = osc_check(&f, &u, &OscConfig { grid: 200, boundary_samples: 2048, margin: 1e-3 }).unwrap();
        assert!(rep.forward_invariance);
        assert!(!rep.separating);
        assert!(rep.min_separation < 1e-3);
    }

    #[test]
    fn min_distance_hash_matches_brute_force() {
        let a: Vec<Complex> = (0..50).map(|k| c(k as f64 * 0.01, 0.0)).collect();
        let b: Vec<Complex> = (0..50).map(|k| c(k as f64 * 0.013, 0.05)).collect();
        let brute = a.iter().flat_map(|z| b.iter().map(move |w| (z - w).norm())).fold(f64::INFINITY, f64::min);
        assert!((min_distance(&a, &b, 0.1) - brute).abs() < 1e-15);
        assert!(min_distance(&a, &b, 0.001) >= 0.001);
    }
}
