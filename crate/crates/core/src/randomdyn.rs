//! Monte Carlo escape probability of random compositions and its raster.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::julia::FilledSetOracle;
use crate::poly::Complex;
use crate::semigroup::MultiMap;

pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_TRIALS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeConfig {
    pub probabilities: Vec<f64>,
    pub escape_radius: f64,
    pub max_iter: usize,
    pub trials: usize,
    pub seed: u64,
}

impl EscapeConfig {
    /// Uniform probabilities and the smallest certified escape radius.
    pub fn uniform(f: &MultiMap, trials: usize, seed: u64) -> Result<Self> {
        let m = f.m();
        let cfg = Self {
            probabilities: vec![1.0 / m as f64; m],
            escape_radius: escape_radius(f)?,
            max_iter: DEFAULT_MAX_ITER,
            trials,
            seed,
        };
        cfg.validate(f)?;
        Ok(cfg)
    }

    pub fn validate(&self, f: &MultiMap) -> Result<()> {
        if self.probabilities.len() != f.m() {
            return Err(Error::InvalidInput(format!(
                "probabilities: expected {} entries, got {}",
                f.m(),
                self.probabilities.len()
            )));
        }
        if self.probabilities.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidInput("probabilities: every entry must be positive".into()));
        }
        let sum: f64 = self.probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("probabilities: entries sum to {sum}, not 1")));
        }
        let need = escape_radius(f)?;
        if !(self.escape_radius >= need && self.escape_radius.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "escape_radius: {} is below the coefficient bound {need}",
                self.escape_radius
            )));
        }
        if self.max_iter == 0 || self.trials == 0 {
            return Err(Error::InvalidInput("max_iter and trials must be positive".into()));
        }
        Ok(())
    }
}

/// Smallest radius beyond which every generator at least doubles the modulus.
pub fn escape_radius(f: &MultiMap) -> Result<f64> {
    f.generators().map(FilledSetOracle::minimal_radius).try_fold(0.0f64, |acc, r| Ok(acc.max(r?)))
}

/// Largest `rho` (on a geometric grid) with `sum_k |c_k| rho^k < rho` for every generator.
///
/// The closed disk of radius `rho` is then mapped into itself by every
/// generator, so orbits entering it stay bounded. Returns 0 when no such
/// disk is found.
pub fn trap_radius(f: &MultiMap, escape_radius: f64) -> f64 {
    let holds = |rho: f64| {
        f.generators()
            .all(|g| g.coeffs().iter().rev().fold(0.0, |acc, c| acc * rho + c.norm()) < rho)
    };
    let mut rho = escape_radius;
    while rho > 1e-9 {
        if holds(rho) {
            return rho;
        }
        rho *= 0.999;
    }
    0.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TInfinity {
    pub value: f64,
    pub std_error: f64,
    pub escaped: usize,
    /// Orbits that neither escaped nor entered the trap; counted as bounded.
    pub undecided: usize,
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Fate {
    Escaped,
    Trapped,
    Undecided,
}

struct Sampler<'a> {
    f: &'a MultiMap,
    cumulative: Vec<f64>,
    radius: f64,
    trap: f64,
    max_iter: usize,
}

impl<'a> Sampler<'a> {
    fn new(f: &'a MultiMap, cfg: &EscapeConfig) -> Result<Self> {
        cfg.validate(f)?;
        let mut acc = 0.0;
        let cumulative = cfg.probabilities.iter().map(|p| {
            acc += p;
            acc
        });
        let mut cumulative: Vec<f64> = cumulative.collect();
        *cumulative.last_mut().expect("m >= 1") = 1.0;
        Ok(Self { f, cumulative, radius: cfg.escape_radius, trap: trap_radius(f, cfg.escape_radius), max_iter: cfg.max_iter })
    }

    fn fate(&self, z: Complex, rng: &mut ChaCha8Rng) -> Fate {
        let mut z = z;
        for _ in 0..self.max_iter {
            let m = z.norm();
            if m > self.radius {
                return Fate::Escaped;
            }
            if m <= self.trap {
                return Fate::Trapped;
            }
            let u: f64 = rng.random();
            let j = self.cumulative.iter().position(|&c| u < c).unwrap_or(self.cumulative.len() - 1);
            z = self.f.generator(j).eval(z);
        }
        let m = z.norm();
        if m > self.radius {
            Fate::Escaped
        } else if m <= self.trap {
            Fate::Trapped
        } else {
            Fate::Undecided
        }
    }

    fn estimate(&self, z: Complex, trials: usize, mut rng: ChaCha8Rng) -> TInfinity {
        // points already decided do not consume randomness
        let m = z.norm();
        if m > self.radius || m <= self.trap {
            let value = if m > self.radius { 1.0 } else { 0.0 };
            let escaped = if m > self.radius { trials } else { 0 };
            return TInfinity { value, std_error: 0.0, escaped, undecided: 0, trials };
        }
        let (mut escaped, mut undecided) = (0, 0);
        for _ in 0..trials {
            match self.fate(z, &mut rng) {
                Fate::Escaped => escaped += 1,
                Fate::Trapped => {}
                Fate::Undecided => undecided += 1,
            }
        }
        let value = escaped as f64 / trials as f64;
        let std_error = (value * (1.0 - value) / trials as f64).sqrt();
        TInfinity { value, std_error, escaped, undecided, trials }
    }
}

/// Fraction of random orbits from `z` that leave the escape disk.
pub fn t_infinity(f: &MultiMap, cfg: &EscapeConfig, z: Complex) -> Result<TInfinity> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("starting point"));
    }
    let s = Sampler::new(f, cfg)?;
    Ok(s.estimate(z, cfg.trials, ChaCha8Rng::seed_from_u64(cfg.seed)))
}

/// Per-pixel estimates with byte values `round(255 T)`. Row 0 is the top row.
#[derive(Clone, Debug, PartialEq)]
pub struct Coliseum {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    pub pixels: Vec<u8>,
    pub undecided: usize,
}

impl Coliseum {
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.nx, self.ny).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }
}

/// Each pixel draws from its own ChaCha stream (`seed`, stream = pixel index),
/// so the result does not depend on scheduling.
pub fn coliseum_raster(f: &MultiMap, cfg: &EscapeConfig, min: Complex, max: Complex, nx: usize, ny: usize) -> Result<Coliseum> {
    if nx == 0 || ny == 0 || !(max.re > min.re && max.im > min.im) {
        return Err(Error::InvalidInput("raster needs a nonempty box and resolution".into()));
    }
    let s = Sampler::new(f, cfg)?;
    let dx = (max.re - min.re) / nx as f64;
    let dy = (max.im - min.im) / ny as f64;
    let est: Vec<TInfinity> = (0..nx * ny)
        .into_par_iter()
        .map(|k| {
            let (ix, iy) = (k % nx, k / nx);
            let z = Complex::new(min.re + (ix as f64 + 0.5) * dx, max.im - (iy as f64 + 0.5) * dy);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            s.estimate(z, cfg.trials, rng)
        })
        .collect();
    let values: Vec<f64> = est.iter().map(|t| t.value).collect();
    let pixels = values.iter().map(|v| (255.0 * v).round() as u8).collect();
    let undecided = est.iter().map(|t| t.undecided).sum();
    Ok(Coliseum { nx, ny, values, pixels, undecided })
}
