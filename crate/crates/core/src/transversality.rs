//! Parameter dependence of the conjugacy `h_lambda` at eventually periodic
//! fiber points, its derivative series, overlap detection, analytic
//! transversality certificates and near-collision scaling probes.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{csv, fmt_sig17, Report};
use crate::julia::{backward_orbit, PointCloud};
use crate::poly::{Complex, Metric, Polynomial};
use crate::semigroup::{chain_deriv, estimate_expanding, inverse_branches, EPWord, ExpandingEstimate, MultiMap, OVERFLOW_MODULUS};

pub const DEFAULT_PATH_STEPS: usize = 64;
pub const COLLISION_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_SERIES_TERMS: usize = 60;
pub const FD_EPS: f64 = 1e-5;
/// Step used for the third-derivative sample entering the finite-difference bound.
pub const CURVATURE_STEP: f64 = 1e-2;
const NEWTON_MAX_ITER: usize = 60;
/// Orbit terms beyond `N` sampled for the constant `M` of the tail bound.
const TAIL_SAMPLE: usize = 32;
/// Chaos-game size used when the base system carries no expanding constants.
const ESTIMATE_POINTS: usize = 50_000;
const ESTIMATE_LEVEL: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PerturbationKind {
    /// `alpha o g o alpha^{-1}` with `alpha_lambda(z) = z + (lambda - lambda0)(a1 z + b1)`.
    Conjugation { index: usize, a1: Complex, b1: Complex },
    /// `g + (lambda - lambda0) (z - center)^exponent`.
    Monomial { index: usize, exponent: usize, center: Complex },
    /// `g + (lambda - lambda0) g'`.
    DerivativePerturb { index: usize },
    /// `g(z - (lambda - lambda0)) + (lambda - lambda0)`.
    Translation { index: usize },
}

impl PerturbationKind {
    pub fn index(&self) -> usize {
        match *self {
            PerturbationKind::Conjugation { index, .. }
            | PerturbationKind::Monomial { index, .. }
            | PerturbationKind::DerivativePerturb { index }
            | PerturbationKind::Translation { index } => index,
        }
    }
}

/// One-parameter holomorphic family through a base system at `lambda0`.
#[derive(Clone, Debug)]
pub struct PerturbationFamily {
    pub base: MultiMap,
    pub kind: PerturbationKind,
    pub lambda0: Complex,
    constants: ExpandingEstimate,
}

impl PerturbationFamily {
    /// Attaches expanding constants: those carried by `base`, the exact ones for
    /// affine systems, or an estimate from a seeded backward orbit.
    pub fn new(base: MultiMap, kind: PerturbationKind, lambda0: Complex) -> Result<Self> {
        let constants = match base.expanding() {
            Some(c) => *c,
            None if base.is_affine() => ExpandingEstimate::exact_affine(&base)?,
            None => {
                let cloud = backward_orbit(&base, ESTIMATE_POINTS, 256, 0)?;
                estimate_expanding(&base, &cloud, ESTIMATE_LEVEL, Metric::Euclidean)?
            }
        };
        Self::with_constants(base, kind, lambda0, constants)
    }

    pub fn with_constants(base: MultiMap, kind: PerturbationKind, lambda0: Complex, constants: ExpandingEstimate) -> Result<Self> {
        if kind.index() >= base.m() {
            return Err(Error::InvalidInput(format!(
                "perturbed index {} out of range 1..={}",
                kind.index() + 1,
                base.m()
            )));
        }
        if !(lambda0.re.is_finite() && lambda0.im.is_finite()) {
            return Err(Error::NonFinite("lambda0"));
        }
        if let PerturbationKind::Monomial { exponent, center, .. } = kind {
            if exponent > base.generator(kind.index()).degree() {
                return Err(Error::InvalidInput(format!(
                    "monomial exponent {exponent} exceeds the degree of the perturbed generator"
                )));
            }
            if !(center.re.is_finite() && center.im.is_finite()) {
                return Err(Error::NonFinite("monomial center"));
            }
        }
        if !(constants.c > 0.0 && constants.eta > 1.0) {
            return Err(Error::NotExpanding(format!("C = {}, eta = {}", constants.c, constants.eta)));
        }
        let fam = Self { base, kind, lambda0, constants };
        let g0 = fam.perturbed(lambda0)?;
        let g = fam.base.generator(kind.index());
        let scale = g.max_coeff_modulus().max(1.0);
        let same = g0.degree() == g.degree()
            && g0.coeffs().iter().zip(g.coeffs()).all(|(a, b)| (a - b).norm() <= 1e-14 * scale);
        if !same {
            return Err(Error::InvalidInput("family does not reproduce the base system at lambda0".into()));
        }
        Ok(fam)
    }

    pub fn constants(&self) -> &ExpandingEstimate {
        &self.constants
    }

    pub fn index(&self) -> usize {
        self.kind.index()
    }

    /// The perturbed generator at `lambda`.
    pub fn perturbed(&self, lambda: Complex) -> Result<Polynomial> {
        let g = self.base.generator(self.index());
        let d = lambda - self.lambda0;
        let one = Complex::new(1.0, 0.0);
        match self.kind {
            PerturbationKind::Conjugation { a1, b1, .. } => {
                let s = one + a1 * d;
                if s.norm() < 1e-12 {
                    return Err(Error::InvalidInput("conjugating map degenerates at this lambda".into()));
                }
                let inv = Polynomial::affine(s.inv(), -b1 * d / s)?;
                let outer = Polynomial::affine(s, b1 * d)?;
                Ok(outer.compose(&g.compose(&inv)))
            }
            PerturbationKind::Monomial { exponent, center, .. } => {
                let mono = if exponent == 0 {
                    Polynomial::constant(d)
                } else {
                    &Polynomial::centered_power(one, center, exponent, Complex::new(0.0, 0.0))? * d
                };
                Ok(g + &mono)
            }
            PerturbationKind::DerivativePerturb { .. } => {
                let dg = self.base.generator_derivative(self.index()) * d;
                Ok(g + &dg)
            }
            PerturbationKind::Translation { .. } => {
                let shift = Polynomial::affine(one, -d)?;
                Ok(&g.compose(&shift) + &Polynomial::constant(d))
            }
        }
    }

    pub fn at(&self, lambda: Complex) -> Result<MultiMap> {
        if lambda == self.lambda0 {
            return Ok(self.base.clone());
        }
        self.base.replace(self.index(), self.perturbed(lambda)?)
    }

    /// `d f_{lambda, index} / d lambda` at `lambda0`, evaluated at `z`.
    pub fn dlambda(&self, z: Complex) -> Complex {
        let j = self.index();
        let (gz, dgz) = self.base.eval(j, z);
        match self.kind {
            PerturbationKind::Conjugation { a1, b1, .. } => (a1 * gz + b1) - dgz * (a1 * z + b1),
            PerturbationKind::Monomial { exponent, center, .. } => (z - center).powu(exponent as u32),
            PerturbationKind::DerivativePerturb { .. } => dgz,
            PerturbationKind::Translation { .. } => Complex::new(1.0, 0.0) - dgz,
        }
    }
}

/// A point of the fiber `J_w` together with its itinerary.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberPoint {
    pub word: EPWord,
    pub z: Complex,
}

fn periodic_points(f: &MultiMap, period: &[usize]) -> Result<Vec<(Complex, f64)>> {
    let mut p = Polynomial::monomial(1)?;
    for &j in period {
        p = f.generator(j).compose(&p);
    }
    let pts = if p.degree() == 1 {
        let c = p.coeffs();
        let a = c[1] - Complex::new(1.0, 0.0);
        if a.norm() < 1e-14 {
            return Err(Error::InvalidInput("period map has no isolated fixed point".into()));
        }
        vec![-c[0] / a]
    } else {
        p.shifted_identity().roots()?
    };
    pts.into_iter()
        .map(|z| Ok((z, chain_deriv(f, period, z, Metric::Euclidean)?.derivative.norm())))
        .collect()
}

fn preferred(a: Complex, b: Complex) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

impl FiberPoint {
    /// The canonical point of `w`: the periodic point of the period map with the
    /// largest multiplier, pulled back along the preperiod through the branch of
    /// largest real part.
    pub fn canonical(f: &MultiMap, w: &EPWord) -> Result<Self> {
        w.check(f)?;
        let cycle = periodic_points(f, &w.period.0)?;
        let (mut z, mult) = cycle
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(preferred(a.0, b.0)))
            .expect("period map has degree >= 1");
        if !(mult > 1.0) {
            return Err(Error::NotExpanding(format!("cycle of {w} has multiplier {mult}")));
        }
        for &j in w.preperiod.0.iter().rev() {
            z = inverse_branches(f, j, z)?.into_iter().max_by(|a, b| preferred(*a, *b)).expect("nonempty");
        }
        Ok(Self { word: w.clone(), z })
    }

    /// The eventually periodic point of itinerary `w` closest to `hint`.
    pub fn near(f: &MultiMap, w: &EPWord, hint: Complex) -> Result<Self> {
        w.check(f)?;
        let cycle = periodic_points(f, &w.period.0)?;
        let mut layer: Vec<Complex> = cycle.into_iter().filter(|c| c.1 > 1.0).map(|c| c.0).collect();
        if layer.is_empty() {
            return Err(Error::NotExpanding(format!("no repelling cycle with itinerary {w}")));
        }
        for &j in w.preperiod.0.iter().rev() {
            let mut next = Vec::new();
            for z in layer {
                next.extend(inverse_branches(f, j, z)?);
            }
            layer = next;
        }
        let z = layer
            .into_iter()
            .min_by(|a, b| (a - hint).norm().total_cmp(&(b - hint).norm()))
            .expect("nonempty");
        Ok(Self { word: w.clone(), z })
    }

    /// The point `f_{w_1}(z)` with itinerary `sigma(w)`.
    pub fn shift(&self, f: &MultiMap) -> Self {
        Self { word: self.word.shift(), z: f.generator(self.word.symbol(0)).eval(self.z) }
    }
}

fn check_finite(z: Complex) -> Result<()> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite("complex parameter"));
    }
    Ok(())
}

/// Newton for a fixed point of the period map of `f`, started at `z`.
fn newton_cycle(f: &MultiMap, period: &[usize], z: Complex) -> Result<Complex> {
    let mut z = z;
    for _ in 0..NEWTON_MAX_ITER {
        let cd = chain_deriv(f, period, z, Metric::Euclidean).map_err(|_| Error::NewtonDivergence { z })?;
        let denom = cd.derivative - Complex::new(1.0, 0.0);
        if denom.norm() < 1e-300 {
            return Err(Error::NewtonDivergence { z });
        }
        let step = (cd.image - z) / denom;
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 1e8 {
            return Err(Error::NewtonDivergence { z });
        }
        if step.norm() <= 4.0 * f64::EPSILON * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    let residual = (crate::semigroup::compose_along(f, period, z)? - z).norm();
    if residual <= 1e-12 * (1.0 + z.norm()) {
        Ok(z)
    } else {
        Err(Error::NewtonDivergence { z })
    }
}

/// `h_lambda(w, z)` at the canonical point of `w`.
pub fn conjugacy_point(fam: &PerturbationFamily, w: &EPWord, lambda: Complex, path_steps: usize) -> Result<Complex> {
    let p = FiberPoint::canonical(&fam.base, w)?;
    conjugacy_point_at(fam, &p, lambda, path_steps)
}

/// `h_lambda(w, z)` for an eventually periodic fiber point, continued along
/// the straight path from `lambda0` in `path_steps` steps.
pub fn conjugacy_point_at(fam: &PerturbationFamily, p: &FiberPoint, lambda: Complex, path_steps: usize) -> Result<Complex> {
    check_finite(lambda)?;
    check_finite(p.z)?;
    p.word.check(&fam.base)?;
    if path_steps == 0 {
        return Err(Error::InvalidInput("path_steps must be at least 1".into()));
    }
    let pre = &p.word.preperiod.0;
    let period = &p.word.period.0;
    // the lambda0 orbit along the preperiod, ending on the cycle
    let mut orbit = Vec::with_capacity(pre.len() + 1);
    orbit.push(p.z);
    for &j in pre {
        let next = fam.base.generator(j).eval(*orbit.last().unwrap());
        orbit.push(next);
    }
    let cyc = *orbit.last().unwrap();
    let back = crate::semigroup::compose_along(&fam.base, period, cyc)?;
    if (back - cyc).norm() > 1e-8 * (1.0 + cyc.norm()) {
        return Err(Error::InvalidInput(format!(
            "{} is not an eventually periodic point of itinerary {}",
            p.z, p.word
        )));
    }
    if lambda == fam.lambda0 {
        return Ok(p.z);
    }
    for s in 1..=path_steps {
        let lam = fam.lambda0 + (lambda - fam.lambda0) * (s as f64 / path_steps as f64);
        let f = fam.at(lam)?;
        let k = orbit.len() - 1;
        orbit[k] = newton_cycle(&f, period, orbit[k])?;
        for i in (0..k).rev() {
            let roots = inverse_branches(&f, pre[i], orbit[i + 1])?;
            let prev = orbit[i];
            let mut order: Vec<(f64, Complex)> = roots.iter().map(|&r| ((r - prev).norm(), r)).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order.len() > 1 {
                let sep = (order[0].1 - order[1].1).norm();
                if sep < COLLISION_THRESHOLD {
                    return Err(Error::BranchCollision { z: order[0].1, separation: sep });
                }
            }
            orbit[i] = order[0].1;
        }
    }
    Ok(orbit[0])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugacyDerivative {
    pub value: Complex,
    pub terms_used: usize,
    pub tail_bound: f64,
    pub heuristic_constants: bool,
}

/// Partial sum of the derivative series at the canonical point of `w`.
pub fn dh_series(fam: &PerturbationFamily, w: &EPWord, n: usize) -> Result<ConjugacyDerivative> {
    let p = FiberPoint::canonical(&fam.base, w)?;
    dh_series_at(fam, &p, n)
}

/// `sum_{n<=N} a_n / f'_{w|n}(z)` with `a_n = -d f_{w_n}/d lambda (f_{w|n-1}(z))`.
///
/// Terms with `w_n` different from the perturbed index vanish identically. When
/// the period avoids that index the series is finite and the tail bound is 0.
pub fn dh_series_at(fam: &PerturbationFamily, p: &FiberPoint, n: usize) -> Result<ConjugacyDerivative> {
    if n == 0 {
        return Err(Error::InvalidInput("series needs at least one term".into()));
    }
    check_finite(p.z)?;
    p.word.check(&fam.base)?;
    let idx = fam.index();
    let pre_len = p.word.preperiod.len();
    let periodic_hit = p.word.period.0.contains(&idx);
    let last = if periodic_hit { n } else { n.min(pre_len) };
    let mut z = p.z;
    let mut deriv = Complex::new(1.0, 0.0);
    let mut value = Complex::new(0.0, 0.0);
    let mut m_sample: f64 = 0.0;
    let horizon = if periodic_hit { n + TAIL_SAMPLE } else { last };
    let mut terms_used = 0;
    // Along the period the computed orbit is pinned to J: onto the exact Julia
    // set of a single generator, or onto the exact cycle. Rounding would
    // otherwise push it off J exponentially fast.
    let period = &p.word.period.0;
    let pin = if period.len() == 1 { GeneratorJulia::exact(&fam.base, period[0]) } else { None };
    let cycle = if pin.is_none() && horizon > pre_len {
        let start = crate::semigroup::compose_along(&fam.base, &p.word.preperiod.0, p.z)?;
        let back = crate::semigroup::compose_along(&fam.base, period, start)?;
        if (back - start).norm() <= 1e-8 * (1.0 + start.norm()) {
            let refined = newton_cycle(&fam.base, period, start).unwrap_or(start);
            let mut pts = vec![refined];
            for &j in &period[..period.len() - 1] {
                pts.push(fam.base.generator(j).eval(*pts.last().unwrap()));
            }
            Some(pts)
        } else {
            None
        }
    } else {
        None
    };
    for k in 1..=horizon {
        if k > pre_len {
            if let Some(pin) = &pin {
                z = pin.project(z).unwrap_or(z);
            } else if let Some(cyc) = &cycle {
                z = cyc[(k - 1 - pre_len) % cyc.len()];
            }
        }
        let j = p.word.symbol(k - 1);
        let (v, dv) = fam.base.eval(j, z);
        deriv *= dv;
        if j == idx {
            let a = -fam.dlambda(z);
            if k <= last {
                value += a / deriv;
            } else {
                m_sample = m_sample.max(a.norm());
            }
        }
        if k <= last {
            terms_used = k;
        }
        z = v;
        if !(z.norm() <= OVERFLOW_MODULUS) || !deriv.norm().is_finite() {
            return Err(Error::Overflow { modulus: z.norm() });
        }
    }
    let tail_bound = if periodic_hit {
        let c = &fam.constants;
        m_sample / (c.c * c.eta.powi(n as i32) * (c.eta - 1.0))
    } else {
        0.0
    };
    Ok(ConjugacyDerivative { value, terms_used, tail_bound, heuristic_constants: fam.constants.heuristic })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdCheck {
    pub series: ConjugacyDerivative,
    pub finite_difference: Complex,
    /// Sample of `|h'''|` at step `CURVATURE_STEP`.
    pub curvature: f64,
    pub error: f64,
    pub bound: f64,
}

impl FdCheck {
    pub fn passes(&self) -> bool {
        self.error < self.bound
    }
}

/// Compares the series with the central difference of the continuation at `eps`.
///
/// The bound is `10 (tail + eps^2 M2)` plus the rounding term of the difference
/// quotient, `1e-13 (1 + |h|) / eps`.
pub fn fd_check(fam: &PerturbationFamily, p: &FiberPoint, n: usize, eps: f64) -> Result<FdCheck> {
    let series = dh_series_at(fam, p, n)?;
    let h = |d: f64| conjugacy_point_at(fam, p, fam.lambda0 + Complex::new(d, 0.0), DEFAULT_PATH_STEPS);
    let fd = (h(eps)? - h(-eps)?) / (2.0 * eps);
    let s = CURVATURE_STEP;
    let third = (h(2.0 * s)? - h(s)? * 2.0 + h(-s)? * 2.0 - h(-2.0 * s)?) / (2.0 * s * s * s);
    let curvature = third.norm();
    let error = (series.value - fd).norm();
    let rounding = 1e-13 * (1.0 + p.z.norm()) / eps;
    let bound = 10.0 * (series.tail_bound + eps * eps * curvature) + rounding;
    Ok(FdCheck { series, finite_difference: fd, curvature, error, bound })
}

/// Uniform hash grid for nearest-point queries.
pub(crate) struct PointIndex<'a> {
    h: f64,
    buckets: HashMap<(i64, i64), Vec<&'a Complex>>,
}

impl<'a> PointIndex<'a> {
    pub(crate) fn new(points: &'a [Complex], h: f64) -> Self {
        let h = h.max(1e-12);
        let mut buckets: HashMap<(i64, i64), Vec<&Complex>> = HashMap::new();
        for z in points {
            buckets.entry(Self::key_of(h, *z)).or_default().push(z);
        }
        Self { h, buckets }
    }

    fn key_of(h: f64, z: Complex) -> (i64, i64) {
        ((z.re / h).floor() as i64, (z.im / h).floor() as i64)
    }

    /// Nearest indexed point within distance `r`, if any.
    pub(crate) fn nearest_within(&self, z: Complex, r: f64) -> Option<(Complex, f64)> {
        let (kx, ky) = Self::key_of(self.h, z);
        let reach = (r / self.h).ceil() as i64;
        let mut best: Option<(Complex, f64)> = None;
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                if let Some(v) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &&w in v {
                        let d = (z - w).norm();
                        if d <= r && best.is_none_or(|b| d < b.1) {
                            best = Some((w, d));
                        }
                    }
                }
            }
        }
        best
    }
}

/// Julia set of a single generator, decided exactly where possible.
#[derive(Clone, Debug)]
pub enum GeneratorJulia {
    Point(Complex),
    Circle { center: Complex, radius: f64 },
    Sample(Vec<Complex>),
}

impl GeneratorJulia {
    /// The Julia set of `f_j` when it is a point or a round circle.
    pub fn exact(f: &MultiMap, j: usize) -> Option<Self> {
        let g = f.generator(j);
        if g.degree() == 1 {
            let c = g.coeffs();
            return Some(GeneratorJulia::Point(-c[0] / (c[1] - Complex::new(1.0, 0.0))));
        }
        let (a, center) = g.centered_monomial_form()?;
        let d = g.degree() as f64;
        Some(GeneratorJulia::Circle { center, radius: a.norm().powf(-1.0 / (d - 1.0)) })
    }

    pub fn of(f: &MultiMap, j: usize) -> Result<Self> {
        if let Some(exact) = Self::exact(f, j) {
            return Ok(exact);
        }
        let g = f.generator(j);
        let single = MultiMap::new(vec![g.clone()])?;
        Ok(GeneratorJulia::Sample(backward_orbit(&single, 20_000, 256, 0)?.points))
    }

    pub fn distance(&self, z: Complex) -> f64 {
        match self {
            GeneratorJulia::Point(p) => (z - p).norm(),
            GeneratorJulia::Circle { center, radius } => ((z - center).norm() - radius).abs(),
            GeneratorJulia::Sample(v) => v.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min),
        }
    }

    /// Nearest point of the set, when it is known exactly.
    pub fn project(&self, z: Complex) -> Option<Complex> {
        match self {
            GeneratorJulia::Point(p) => Some(*p),
            GeneratorJulia::Circle { center, radius } => {
                let d = z - center;
                (d.norm() > 0.0).then(|| center + d * (radius / d.norm()))
            }
            GeneratorJulia::Sample(_) => None,
        }
    }

    pub fn samples(&self, n: usize) -> Vec<Complex> {
        match self {
            GeneratorJulia::Point(p) => vec![*p],
            GeneratorJulia::Circle { center, radius } => (0..n)
                .map(|k| center + Complex::from_polar(*radius, std::f64::consts::TAU * k as f64 / n as f64))
                .collect(),
            GeneratorJulia::Sample(v) => v.iter().step_by((v.len() / n.max(1)).max(1)).copied().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlapPoint {
    pub z: Complex,
    pub i: usize,
    pub j: usize,
    /// `i alpha_ij^inf` and `j alpha_ji^inf`.
    pub words: (EPWord, EPWord),
    /// Distances from `f_i(z)`, `f_j(z)` to the tagged single-generator Julia sets.
    pub tag_distance: (f64, f64),
}

fn nearest_julia(julias: &[GeneratorJulia], w: Complex) -> (usize, f64) {
    julias
        .iter()
        .enumerate()
        .map(|(k, jl)| (k, jl.distance(w)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one generator")
}

fn snap(f: &MultiMap, julias: &[GeneratorJulia], i: usize, alpha: usize, z: Complex) -> Option<Complex> {
    let target = julias[alpha].project(f.generator(i).eval(z))?;
    inverse_branches(f, i, target)
        .ok()?
        .into_iter()
        .min_by(|a, b| (a - z).norm().total_cmp(&(b - z).norm()))
}

fn dedup(points: Vec<OverlapPoint>, spacing: f64) -> Vec<OverlapPoint> {
    let mut kept: Vec<OverlapPoint> = Vec::new();
    let mut grid: HashMap<(i64, i64), Vec<Complex>> = HashMap::new();
    let h = spacing.max(1e-12);
    let key = |z: Complex| ((z.re / h).floor() as i64, (z.im / h).floor() as i64);
    for p in points {
        let (kx, ky) = key(p.z);
        let close = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| grid.get(&(kx + dx, ky + dy)).is_some_and(|v| v.iter().any(|w| (w - p.z).norm() < spacing)))
        });
        if !close {
            grid.entry((kx, ky)).or_default().push(p.z);
            kept.push(p);
        }
    }
    kept
}

/// Points close to two distinct preimages of the Julia cloud.
///
/// Candidates are midpoints of cross-pairs closer than `tol`, thinned to
/// spacing `tol`. Each is tagged with the nearest single-generator Julia sets
/// of `f_i(z)` and `f_j(z)` and, where those sets are known exactly, moved
/// onto the exact preimage.
pub fn find_overlaps(f: &MultiMap, cloud: &PointCloud, tol: f64) -> Result<Vec<OverlapPoint>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let m = f.m();
    let pre: Vec<Vec<Complex>> = (0..m)
        .map(|j| -> Result<Vec<Complex>> {
            let per: Vec<Vec<Complex>> =
                cloud.points.par_iter().map(|&w| inverse_branches(f, j, w)).collect::<Result<_>>()?;
            Ok(per.into_iter().flatten().collect())
        })
        .collect::<Result<_>>()?;
    let julias: Vec<GeneratorJulia> = (0..m).map(|j| GeneratorJulia::of(f, j)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let index = PointIndex::new(&pre[j], tol);
            let candidates: Vec<Complex> = pre[i]
                .par_iter()
                .filter_map(|&q| index.nearest_within(q, tol).map(|(w, _)| 0.5 * (q + w)))
                .collect();
            let tagged: Vec<OverlapPoint> = candidates
                .into_iter()
                .map(|z| {
                    let (ai, _) = nearest_julia(&julias, f.generator(i).eval(z));
                    let (aj, _) = nearest_julia(&julias, f.generator(j).eval(z));
                    let z = match (snap(f, &julias, i, ai, z), snap(f, &julias, j, aj, z)) {
                        (Some(a), Some(b)) if (a - b).norm() < tol => a,
                        _ => z,
                    };
                    let di = julias[ai].distance(f.generator(i).eval(z));
                    let dj = julias[aj].distance(f.generator(j).eval(z));
                    OverlapPoint { z, i, j, words: (EPWord::tail(i, ai), EPWord::tail(j, aj)), tag_distance: (di, dj) }
                })
                .collect();
            out.extend(dedup(tagged, tol));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenprinChecks {
    pub cond_i: bool,
    pub cond_ii: bool,
    pub cond_iii: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlapGradient {
    pub point: OverlapPoint,
    /// One complex derivative per perturbation direction.
    pub gradient: Vec<Complex>,
    pub modulus: f64,
    pub tail_bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtcReport {
    pub overlap_count: usize,
    pub min_grad_modulus: f64,
    pub all_nonzero: bool,
    pub genprin: GenprinChecks,
    pub heuristic_constants: bool,
    pub overlaps: Vec<OverlapGradient>,
}

impl AtcReport {
    pub fn report(&self) -> Report {
        let mut r = Report::new();
        r.push("overlaps", self.overlap_count);
        if self.overlap_count == 0 {
            r.push("verdict", "ATC vacuous");
        } else {
            r.push("verdict", if self.all_nonzero { "ATC certified" } else { "ATC not certified" });
        }
        r.push("min_grad_modulus", fmt_sig17(self.min_grad_modulus));
        r.push("all_nonzero", self.all_nonzero);
        r.push("cond_i", self.genprin.cond_i);
        r.push("cond_ii", self.genprin.cond_ii);
        r.push("cond_iii", self.genprin.cond_iii);
        r.push("heuristic_constants", self.heuristic_constants);
        r
    }
}

fn same_base(a: &MultiMap, b: &MultiMap) -> bool {
    a.m() == b.m() && a.generators().zip(b.generators()).all(|(p, q)| p.coeffs() == q.coeffs())
}

/// Analytic transversality certificate over the given perturbation directions.
///
/// For each detected overlap point the gradient of
/// `h(i alpha_ij^inf, z) - h(j alpha_ji^inf, z)` is evaluated direction by
/// direction; its Euclidean norm must exceed the norm of the tail bounds.
pub fn atc_certify(dirs: &[PerturbationFamily], cloud: &PointCloud, tol: f64, n: usize) -> Result<AtcReport> {
    let first = dirs.first().ok_or_else(|| Error::InvalidInput("at least one perturbation direction is needed".into()))?;
    let f = &first.base;
    if dirs.iter().any(|d| !same_base(&d.base, f) || d.lambda0 != first.lambda0) {
        return Err(Error::InvalidInput("perturbation directions must share the base system and lambda0".into()));
    }
    let overlaps = find_overlaps(f, cloud, tol)?;
    let index = PointIndex::new(&cloud.points, tol);
    let far = |w: Complex| index.nearest_within(w, 3.0 * tol).is_none();
    let m = f.m();

    // a point within tol of f_i^{-1}(J) maps within about |f_i'| tol of J
    let image_tol = |k: usize, z: Complex| tol * f.generator_derivative(k).eval(z).norm().max(1.0);
    let cond_i = overlaps
        .iter()
        .all(|o| o.tag_distance.0 < image_tol(o.i, o.z) && o.tag_distance.1 < image_tol(o.j, o.z));
    let cond_ii = overlaps.iter().all(|o| {
        (0..m).filter(|&k| k != o.i && k != o.j).all(|k| far(f.generator(k).eval(o.z)))
    });
    let mut cond_iii = true;
    for j in 0..m {
        let samples = GeneratorJulia::of(f, j)?.samples(720);
        for k in (0..m).filter(|&k| k != j) {
            if !samples.iter().all(|&z| far(f.generator(k).eval(z))) {
                cond_iii = false;
            }
        }
    }

    let mut grads = Vec::with_capacity(overlaps.len());
    for o in overlaps {
        let p1 = FiberPoint { word: o.words.0.clone(), z: o.z };
        let p2 = FiberPoint { word: o.words.1.clone(), z: o.z };
        let mut gradient = Vec::with_capacity(dirs.len());
        let mut tail2 = 0.0;
        for d in dirs {
            let s1 = dh_series_at(d, &p1, n)?;
            let s2 = dh_series_at(d, &p2, n)?;
            gradient.push(s1.value - s2.value);
            tail2 += (s1.tail_bound + s2.tail_bound).powi(2);
        }
        let modulus = gradient.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
        let tail_bound = tail2.sqrt();
        if !(modulus > tail_bound) {
            return Err(Error::Inconclusive { z: o.z, value: modulus, tail: tail_bound });
        }
        grads.push(OverlapGradient { point: o, gradient, modulus, tail_bound });
    }
    let min_grad_modulus = grads.iter().map(|g| g.modulus - g.tail_bound).fold(f64::INFINITY, f64::min);
    Ok(AtcReport {
        overlap_count: grads.len(),
        min_grad_modulus,
        all_nonzero: true,
        genprin: GenprinChecks { cond_i, cond_ii, cond_iii },
        heuristic_constants: dirs.iter().any(|d| d.constants.heuristic),
        overlaps: grads,
    })
}

/// Square grid of `n x n` parameter nodes centred at `center` with half-width `radius`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaGrid {
    pub center: Complex,
    pub radius: f64,
    pub n: usize,
}

impl LambdaGrid {
    pub fn node(&self, k: usize) -> Complex {
        let (ix, iy) = (k % self.n, k / self.n);
        let step = 2.0 * self.radius / (self.n - 1).max(1) as f64;
        self.center + Complex::new(-self.radius + ix as f64 * step, -self.radius + iy as f64 * step)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TcRow {
    pub r: f64,
    pub measure_fraction: f64,
    pub covering_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TcProbe {
    pub rows: Vec<TcRow>,
    /// Least-squares slope of `log measure_fraction` against `log r` over nonzero rows.
    pub measure_exponent: f64,
    /// Same for the covering counts.
    pub covering_exponent: f64,
    pub skipped: Vec<usize>,
    pub min_abs_delta: f64,
}

impl TcProbe {
    pub fn csv(&self) -> String {
        csv(
            &["r", "measure_fraction", "covering_count"],
            self.rows.iter().map(|row| vec![fmt_sig17(row.r), fmt_sig17(row.measure_fraction), row.covering_count.to_string()]),
        )
    }
}

/// Sublevel statistics of `Delta(lambda) = h_lambda(p) - h_lambda(q)` on a parameter grid.
pub fn tc_scaling_probe(
    fam: &PerturbationFamily,
    pair: (&FiberPoint, &FiberPoint),
    grid: &LambdaGrid,
    radii: &[f64],
) -> Result<TcProbe> {
    if pair.0.word.symbol(0) == pair.1.word.symbol(0) {
        return Err(Error::InvalidInput("the two itineraries must differ in their first symbol".into()));
    }
    if grid.n < 2 || !(grid.radius > 0.0) {
        return Err(Error::InvalidInput("parameter grid needs n >= 2 and a positive radius".into()));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidInput("radii must be positive".into()));
    }
    let nodes = grid.n * grid.n;
    let deltas: Vec<Result<f64>> = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let lam = grid.node(k);
            let a = conjugacy_point_at(fam, pair.0, lam, DEFAULT_PATH_STEPS)?;
            let b = conjugacy_point_at(fam, pair.1, lam, DEFAULT_PATH_STEPS)?;
            Ok((a - b).norm())
        })
        .collect();
    let mut skipped = Vec::new();
    let mut valid = Vec::with_capacity(nodes);
    for (k, d) in deltas.into_iter().enumerate() {
        match d {
            Ok(v) => valid.push((k, v)),
            Err(Error::BranchCollision { .. }) | Err(Error::NewtonDivergence { .. }) => skipped.push(k),
            Err(e) => return Err(e),
        }
    }
    if valid.is_empty() {
        return Err(Error::InsufficientPoints { got: 0, need: 1 });
    }
    let lo = grid.center - Complex::new(grid.radius, grid.radius);
    let rows: Vec<TcRow> = radii
        .iter()
        .map(|&r| {
            let hits: Vec<usize> = valid.iter().filter(|(_, d)| *d <= r).map(|(k, _)| *k).collect();
            let mut boxes: Vec<(i64, i64)> = hits
                .iter()
                .map(|&k| {
                    let z = grid.node(k) - lo;
                    ((z.re / r).floor() as i64, (z.im / r).floor() as i64)
                })
                .collect();
            boxes.sort_unstable();
            boxes.dedup();
            TcRow { r, measure_fraction: hits.len() as f64 / valid.len() as f64, covering_count: boxes.len() }
        })
        .collect();
    let fit = |ys: Vec<(f64, f64)>| -> f64 {
        if ys.len() < 2 {
            return f64::NAN;
        }
        let x: Vec<f64> = ys.iter().map(|p| p.0).collect();
        let y: Vec<f64> = ys.iter().map(|p| p.1).collect();
        crate::geometry::linear_fit(&x, &y).0
    };
    let measure_exponent =
        fit(rows.iter().filter(|r| r.measure_fraction > 0.0).map(|r| (r.r.ln(), r.measure_fraction.ln())).collect());
    let covering_exponent =
        fit(rows.iter().filter(|r| r.covering_count > 0).map(|r| (r.r.ln(), (r.covering_count as f64).ln())).collect());
    let min_abs_delta = valid.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    Ok(TcProbe { rows, measure_exponent, covering_exponent, skipped, min_abs_delta })
}
