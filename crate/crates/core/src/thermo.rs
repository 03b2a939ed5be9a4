//! Preimage pressure sums, the Bowen parameter and the Moran equation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{csv, fmt_sig17};
use crate::julia::repelling_fixed_point;
use crate::poly::{step_norm, Complex, Metric};
use crate::semigroup::{inverse_branches, MultiMap};

/// Hard cap on the number of leaves of a preimage tree.
pub const TERM_BUDGET: u128 = 10_000_000;

/// Per-step derivative norms below this are treated as critical.
pub const CRITICAL_STEP: f64 = 1e-9;

pub const DEFAULT_BOWEN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureSample {
    pub t: f64,
    pub level: usize,
    pub value: f64,
    pub term_count: u128,
}

/// Which level-`n` approximant of the pressure a Bowen solve uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Estimator {
    /// `P_n(t) = (1/n) log Z_n(t)`.
    Average,
    /// `n P_n(t) - (n-1) P_{n-1}(t) = log(Z_n(t) / Z_{n-1}(t))`, which cancels
    /// the `O(1/n)` base-point term of the plain average.
    #[default]
    Extrapolated,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BowenResult {
    pub delta: f64,
    pub bracket: (f64, f64),
    pub level: usize,
    pub residual: f64,
    pub estimator: Estimator,
}

/// Log chain derivatives `log ||f_w'(x)||` over all `x` in `f_w^{-1}(z0)`, `|w| = n`.
///
/// These do not depend on `t`, so one tree serves every pressure evaluation.
/// The tree also keeps the level `n-1` sums for the extrapolated estimator.
#[derive(Clone, Debug)]
pub struct PreimageTree {
    pub level: usize,
    pub base: Complex,
    pub logs: Vec<f64>,
    pub parent_logs: Vec<f64>,
}

impl PreimageTree {
    pub fn build(f: &MultiMap, n: usize, z0: Complex, metric: Metric) -> Result<Self> {
        Self::build_with_budget(f, n, z0, metric, TERM_BUDGET)
    }

    pub fn build_with_budget(f: &MultiMap, n: usize, z0: Complex, metric: Metric, budget: u128) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("pressure level must be at least 1".into()));
        }
        if !(z0.re.is_finite() && z0.im.is_finite()) {
            return Err(Error::NonFinite("pressure base point"));
        }
        let needed = (f.total_degree() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if needed > budget {
            return Err(Error::BudgetExceeded { needed, budget });
        }
        let mut first = Vec::new();
        for j in 0..f.m() {
            for r in inverse_branches(f, j, z0)? {
                first.push((j, r));
            }
        }
        let parts: Vec<(Vec<f64>, Vec<f64>)> = first
            .par_iter()
            .map(|&(j, r)| {
                let (mut out, mut parents) = (Vec::new(), Vec::new());
                let step = step_log(f, j, r, z0, metric)?;
                descend(f, r, n - 1, step, metric, &mut out, &mut parents)?;
                Ok((out, parents))
            })
            .collect::<Result<_>>()?;
        let mut logs = Vec::new();
        let mut parent_logs = Vec::new();
        for (l, p) in parts {
            logs.extend(l);
            parent_logs.extend(p);
        }
        if n == 1 {
            parent_logs = vec![0.0];
        }
        let min = logs.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min > 0.0) {
            return Err(Error::NotExpanding(format!(
                "minimum level-{n} chain derivative over the preimage tree is {:.6e} <= 1",
                min.exp()
            )));
        }
        Ok(Self { level: n, base: z0, logs, parent_logs })
    }

    pub fn term_count(&self) -> u128 {
        self.logs.len() as u128
    }

    /// `P_n(t) = (1/n) log sum exp(-t * L_k)`.
    pub fn pressure(&self, t: f64) -> f64 {
        log_partition(&self.logs, t) / self.level as f64
    }

    /// `log Z_n(t) - log Z_{n-1}(t)`.
    pub fn extrapolated_pressure(&self, t: f64) -> f64 {
        log_partition(&self.logs, t) - log_partition(&self.parent_logs, t)
    }

    pub fn estimate(&self, t: f64, estimator: Estimator) -> f64 {
        match estimator {
            Estimator::Average => self.pressure(t),
            Estimator::Extrapolated => self.extrapolated_pressure(t),
        }
    }

    pub fn sample(&self, t: f64) -> PressureSample {
        PressureSample { t, level: self.level, value: self.pressure(t), term_count: self.term_count() }
    }

    /// Bisection for the zero of the chosen level-`n` pressure approximant.
    pub fn zero(&self, tol: f64, estimator: Estimator) -> Result<BowenResult> {
        let pressure = |t: f64| self.estimate(t, estimator);
        let p0 = pressure(0.0);
        if p0 < 0.0 {
            return Err(Error::NoSignChange(p0));
        }
        if p0 == 0.0 {
            return Ok(BowenResult { delta: 0.0, bracket: (0.0, 0.0), level: self.level, residual: 0.0, estimator });
        }
        let mut hi = 4.0;
        while pressure(hi) >= 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(Error::NotExpanding("pressure stays nonnegative up to t = 1e6".into()));
            }
        }
        let mut lo = 0.0;
        let mut mid = 0.5 * (lo + hi);
        let mut pm = pressure(mid);
        for _ in 0..400 {
            if pm == 0.0 || (hi - lo <= tol && pm.abs() < tol) {
                break;
            }
            if pm > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            let next = 0.5 * (lo + hi);
            if next == mid {
                break;
            }
            mid = next;
            pm = pressure(mid);
        }
        if pm == 0.0 {
            lo = mid;
            hi = mid;
        }
        Ok(BowenResult { delta: mid, bracket: (lo, hi), level: self.level, residual: pm.abs(), estimator })
    }
}

fn step_log(f: &MultiMap, j: usize, r: Complex, image: Complex, metric: Metric) -> Result<f64> {
    let dv = f.generator_derivative(j).eval(r);
    let s = step_norm(r, image, dv, metric);
    if !(s >= CRITICAL_STEP) {
        return Err(Error::NotExpanding(format!("critical preimage near {r} (step derivative {s:.3e})")));
    }
    Ok(s.ln())
}

fn log_partition(logs: &[f64], t: f64) -> f64 {
    let max = logs.iter().map(|l| -t * l).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (-t * l - max).exp()).sum();
    max + sum.ln()
}

fn descend(
    f: &MultiMap,
    w: Complex,
    depth: usize,
    acc: f64,
    metric: Metric,
    out: &mut Vec<f64>,
    parents: &mut Vec<f64>,
) -> Result<()> {
    if depth == 0 {
        out.push(acc);
        return Ok(());
    }
    if depth == 1 {
        parents.push(acc);
    }
    for j in 0..f.m() {
        for r in inverse_branches(f, j, w)? {
            let step = step_log(f, j, r, w, metric)?;
            descend(f, r, depth - 1, acc + step, metric, out, parents)?;
        }
    }
    Ok(())
}

pub fn pressure_approx(f: &MultiMap, t: f64, n: usize, z0: Complex, metric: Metric) -> Result<PressureSample> {
    Ok(PreimageTree::build(f, n, z0, metric)?.sample(t))
}

/// Bowen parameter at level `n` with the chaos-game start point as base.
pub fn bowen_parameter(f: &MultiMap, n: usize, tol: f64) -> Result<BowenResult> {
    let z0 = repelling_fixed_point(f)?;
    bowen_parameter_at(f, n, tol, z0, Metric::Euclidean)
}

pub fn bowen_parameter_at(f: &MultiMap, n: usize, tol: f64, z0: Complex, metric: Metric) -> Result<BowenResult> {
    bowen_parameter_with(f, n, tol, z0, metric, Estimator::default())
}

pub fn bowen_parameter_with(
    f: &MultiMap,
    n: usize,
    tol: f64,
    z0: Complex,
    metric: Metric,
    estimator: Estimator,
) -> Result<BowenResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    PreimageTree::build(f, n, z0, metric)?.zero(tol, estimator)
}

/// Pressure on a `(t, n)` grid; one tree per level.
pub fn pressure_grid(f: &MultiMap, ts: &[f64], levels: &[usize], z0: Complex, metric: Metric) -> Result<Vec<PressureSample>> {
    let mut out = Vec::with_capacity(ts.len() * levels.len());
    for &n in levels {
        let tree = PreimageTree::build(f, n, z0, metric)?;
        out.extend(ts.iter().map(|&t| tree.sample(t)));
    }
    Ok(out)
}

pub fn pressure_csv(samples: &[PressureSample]) -> String {
    csv(
        &["t", "n", "pressure"],
        samples.iter().map(|s| vec![fmt_sig17(s.t), s.level.to_string(), fmt_sig17(s.value)]),
    )
}

/// Solution `t` of `sum r_i^{-t} = 1` for contraction reciprocals `r_i > 1`.
pub fn moran_delta(ratios: &[f64]) -> Result<f64> {
    if ratios.is_empty() {
        return Err(Error::InvalidInput("moran ratios must be nonempty".into()));
    }
    if let Some(r) = ratios.iter().find(|r| !(r.is_finite() && **r > 1.0)) {
        return Err(Error::InvalidInput(format!("moran ratios must exceed 1, got {r}")));
    }
    let r0 = ratios[0];
    let m = ratios.len() as f64;
    if ratios.iter().all(|&r| r == r0) {
        return Ok(m.ln() / r0.ln());
    }
    let f = |t: f64| ratios.iter().map(|r| r.powf(-t)).sum::<f64>() - 1.0;
    let r_min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, m.ln() / r_min.ln());
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = f(mid);
        if v.abs() < 1e-12 {
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
    }
    Ok(mid)
}

/// `log(d1+d2) / sum_i (d_i/(d1+d2)) log d_i`.
pub fn d1d2_lower_bound(d1: usize, d2: usize) -> Result<f64> {
    if d1 < 2 || d2 < 2 {
        return Err(Error::InvalidInput(format!("degrees must be at least 2, got ({d1}, {d2})")));
    }
    let (a, b) = (d1 as f64, d2 as f64);
    let s = a + b;
    Ok(s.ln() / (a / s * a.ln() + b / s * b.ln()))
}
