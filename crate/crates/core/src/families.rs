//! Constructors for the concrete systems: affine self-similar families, the
//! `(z^{d1}, g_t)` family with its threshold `t_1`, and quadratic pairs.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::julia::{bounding_box, FilledJulia, Inclusion, Preimage, Region};
use crate::poly::{Complex, Polynomial};
use crate::semigroup::MultiMap;

/// Relative tolerance for the equilateral check on Sierpinski vertices.
pub const VERTEX_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum NamedFamily {
    Interval,
    Sierpinski([Complex; 3]),
    Snowflake,
    Pentakun,
    /// Regular `k`-gon analogue of the gasket (`k >= 3`).
    NKun(usize),
}

impl NamedFamily {
    pub fn default_sierpinski() -> Self {
        NamedFamily::Sierpinski([
            Complex::new(1.0, 0.0),
            Complex::from_polar(1.0, TAU / 3.0),
            Complex::from_polar(1.0, 2.0 * TAU / 3.0),
        ])
    }
}

/// `a (z - p) + p`.
fn homothety(ratio: f64, p: Complex) -> Result<Polynomial> {
    Polynomial::affine(Complex::new(ratio, 0.0), p * (1.0 - ratio))
}

fn roots_of_unity(k: usize) -> Vec<Complex> {
    (1..=k).map(|j| Complex::from_polar(1.0, TAU * j as f64 / k as f64)).collect()
}

/// Expansion ratio `1/r_k` of the `k`-gon family, with
/// `r_k = 1 / (2 (1 + sum_{i=1}^{floor(k/4)} cos(2 pi i / k)))`.
pub fn nkun_ratio(k: usize) -> f64 {
    let s: f64 = (1..=k / 4).map(|i| (TAU * i as f64 / k as f64).cos()).sum();
    2.0 * (1.0 + s)
}

pub fn make_named(family: &NamedFamily) -> Result<MultiMap> {
    let gens = match family {
        NamedFamily::Interval => vec![
            Polynomial::from_real(&[0.0, 2.0])?,
            Polynomial::from_real(&[-1.0, 2.0])?,
        ],
        NamedFamily::Sierpinski(p) => {
            for z in p {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite("sierpinski vertex"));
                }
            }
            let sides = [(p[0] - p[1]).norm(), (p[1] - p[2]).norm(), (p[2] - p[0]).norm()];
            let max = sides.iter().copied().fold(0.0, f64::max);
            let min = sides.iter().copied().fold(f64::INFINITY, f64::min);
            if !(min > 0.0) || max - min > VERTEX_TOL * max {
                return Err(Error::BadVertices(sides));
            }
            p.iter().map(|&v| homothety(2.0, v)).collect::<Result<_>>()?
        }
        NamedFamily::Snowflake => {
            let mut pts = roots_of_unity(6);
            pts.push(Complex::new(0.0, 0.0));
            pts.into_iter().map(|v| homothety(3.0, v)).collect::<Result<_>>()?
        }
        NamedFamily::Pentakun => {
            let ratio = 2.0 / (3.0 - 5f64.sqrt());
            roots_of_unity(5).into_iter().map(|v| homothety(ratio, v)).collect::<Result<_>>()?
        }
        NamedFamily::NKun(k) => {
            if *k < 3 {
                return Err(Error::InvalidInput(format!("nkun needs k >= 3, got {k}")));
            }
            let ratio = nkun_ratio(*k);
            roots_of_unity(*k).into_iter().map(|v| homothety(ratio, v)).collect::<Result<_>>()?
        }
    };
    MultiMap::new(gens)
}

/// Expansion ratios `|a_j|` of an affine system, for the Moran equation.
pub fn affine_ratios(f: &MultiMap) -> Result<Vec<f64>> {
    f.generators()
        .map(|g| {
            if g.degree() == 1 {
                Ok(g.leading().norm())
            } else {
                Err(Error::InvalidInput("Moran ratios need affine generators".into()))
            }
        })
        .collect()
}

/// Parameters of the pair `(z^{d1}, t e^{i alpha} (z - b)^{d2} + b)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct D1D2Params {
    pub d1: usize,
    pub d2: usize,
    pub b: Complex,
    /// Rotation fixed by `d2 (pi + theta) + alpha = theta (mod 2 pi)`, `theta = arg b`.
    pub alpha: f64,
    pub t: f64,
}

impl D1D2Params {
    pub fn new(d1: usize, d2: usize, b: Complex, t: f64) -> Result<Self> {
        validate_d1d2(d1, d2, b)?;
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
        }
        Ok(Self { d1, d2, b, alpha: d1d2_alpha(d2, b), t })
    }

    pub fn with_t(&self, t: f64) -> Result<Self> {
        Self::new(self.d1, self.d2, self.b, t)
    }

    /// `d2 (pi + theta) + alpha - theta` reduced to `(-pi, pi]`.
    pub fn congruence_residual(&self) -> f64 {
        let theta = self.b.arg();
        let x = (self.d2 as f64 * (PI + theta) + self.alpha - theta).rem_euclid(TAU);
        if x > PI {
            x - TAU
        } else {
            x
        }
    }

    /// `v = 1 + |b|`; the threshold lies below `v^{1 - d2}`.
    pub fn v(&self) -> f64 {
        1.0 + self.b.norm()
    }

    pub fn beta(&self) -> Result<Polynomial> {
        Polynomial::monomial(self.d1)
    }

    pub fn g(&self) -> Result<Polynomial> {
        g_map(self.d2, self.b, self.alpha, self.t)
    }
}

fn validate_d1d2(d1: usize, d2: usize, b: Complex) -> Result<()> {
    if d1 < 2 || d2 < 2 || (d1 == 2 && d2 == 2) {
        return Err(Error::InvalidInput(format!("need d1, d2 >= 2 and (d1, d2) != (2, 2), got ({d1}, {d2})")));
    }
    if !(b.re.is_finite() && b.im.is_finite()) {
        return Err(Error::NonFinite("b"));
    }
    let u = b.norm();
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidInput(format!("need 0 < |b| < 1, got {u}")));
    }
    Ok(())
}

pub fn d1d2_alpha(d2: usize, b: Complex) -> f64 {
    let theta = b.arg();
    let a = (theta - d2 as f64 * (PI + theta)).rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

fn g_map(d2: usize, b: Complex, alpha: f64, t: f64) -> Result<Polynomial> {
    Polynomial::centered_power(Complex::from_polar(t, alpha), b, d2, b)
}

pub fn make_d1d2(p: &D1D2Params) -> Result<MultiMap> {
    MultiMap::new(vec![p.beta()?, p.g()?])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct T1Config {
    /// Samples per boundary circle.
    pub samples: usize,
    /// Probe margin as a fraction of the diameter of the contained set.
    pub margin: f64,
    /// Uniform scan points used to detect non-monotone behaviour before bisection.
    pub scan: usize,
}

impl Default for T1Config {
    fn default() -> Self {
        Self { samples: 720, margin: 1e-3, scan: 16 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct T1Result {
    pub t1: f64,
    /// Last parameter where the predicate held and first where it failed.
    pub bracket: (f64, f64),
    /// `1 / v^{d2 - 1}`.
    pub upper: f64,
    /// `a_R = R^{1 - d2}`.
    pub a_r: f64,
    pub big_r: f64,
    pub r: f64,
    pub evaluations: usize,
}

fn diameter(points: &[Complex]) -> f64 {
    bounding_box(points).map(|(lo, hi)| (hi - lo).norm()).unwrap_or(0.0)
}

/// Which of the three chained inclusions fails at `c`, if any.
///
/// 1. `K(beta) ⊂ int beta^{-1}(K(g_c))`
/// 2. `beta^{-1}(K(g_c)) ⊂⊂ int g_c^{-1}(K(beta))`
/// 3. `g_c^{-1}(K(beta)) ⊂⊂ int K(g_c)`
pub fn t1_predicate(d1: usize, d2: usize, b: Complex, c: f64, cfg: &T1Config) -> Result<Option<usize>> {
    let p = D1D2Params::new(d1, d2, b, c)?;
    let beta = p.beta()?;
    let g = p.g()?;
    let kb = FilledJulia::new(beta.clone(), false)?;
    let kb_open = FilledJulia::new(beta.clone(), true)?;
    let kg = FilledJulia::new(g.clone(), false)?;
    let kg_open = FilledJulia::new(g.clone(), true)?;

    let check = |a: Vec<Complex>, target: &dyn Region| -> Inclusion {
        let margin = cfg.margin * diameter(&a);
        crate::julia::inclusion_test(target, &a, margin)
    };

    let s1 = kb.boundary(cfg.samples);
    if !check(s1, &Preimage { map: beta.clone(), inner: &kg_open }).holds() {
        return Ok(Some(1));
    }
    let s2 = Preimage { map: beta.clone(), inner: &kg }.boundary(cfg.samples * d1);
    if !check(s2, &Preimage { map: g.clone(), inner: &kb_open }).holds() {
        return Ok(Some(2));
    }
    let s3 = Preimage { map: g, inner: &kb }.boundary(cfg.samples * d2);
    if !check(s3, &kg_open).holds() {
        return Ok(Some(3));
    }
    Ok(None)
}

/// Smallest `R` (on a 0.1% grid) with the three sufficient conditions used
/// for the certified lower bound; returns `(R, r)`.
pub fn certified_radius(d1: usize, d2: usize, b: Complex) -> Result<(f64, f64)> {
    validate_d1d2(d1, d2, b)?;
    let u = b.norm();
    let r = (1.0 - u + 1.0) / 2.0;
    let (fd1, fd2) = (d1 as f64, d2 as f64);
    let denom = fd1 * fd2 - fd1 - fd2;
    let r_def = ((-fd1 * r.ln() + fd1 * fd2 * 2f64.ln()) / denom).exp();
    let ok = |big: f64| -> bool {
        let root = big.powf(1.0 / fd1);
        let inner = (0.75 * root + u).powf(fd1) + u <= big;
        let outer = (big + u).powf(1.0 / fd1) + u <= 1.5 * root;
        let compact = 1.5 * root < big;
        let holds_k = 0.5 * root > 1.0 + u;
        big > r_def && inner && outer && compact && holds_k
    };
    let mut big = r_def * (1.0 + 1e-9);
    for _ in 0..100_000 {
        if ok(big) {
            return Ok((big, r));
        }
        big *= 1.001;
    }
    Err(Error::NonConvergence { iterations: 100_000, residual: big })
}

/// Bisection for the supremum of parameters where the chained inclusions hold.
pub fn find_t1(d1: usize, d2: usize, b: Complex, tol: f64) -> Result<T1Result> {
    find_t1_with(d1, d2, b, tol, &T1Config::default())
}

pub fn find_t1_with(d1: usize, d2: usize, b: Complex, tol: f64, cfg: &T1Config) -> Result<T1Result> {
    validate_d1d2(d1, d2, b)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    if cfg.samples < 8 || cfg.scan < 2 {
        return Err(Error::InvalidInput("t1 search needs samples >= 8 and scan >= 2".into()));
    }
    let v = 1.0 + b.norm();
    let upper = v.powi(1 - d2 as i32);
    let mut evaluations = 0;
    let mut holds = |c: f64| -> Result<bool> {
        evaluations += 1;
        Ok(t1_predicate(d1, d2, b, c, cfg)?.is_none())
    };

    // t = 0 counts as true: the proof's construction makes small t admissible.
    let scan: Vec<f64> = (1..=cfg.scan).map(|k| upper * k as f64 / cfg.scan as f64).collect();
    let mut values = Vec::with_capacity(scan.len());
    for &t in &scan {
        values.push(holds(t)?);
    }
    let first_false = values.iter().position(|&x| !x);
    let (mut lo, mut hi) = match first_false {
        None => (upper, upper),
        Some(k) => {
            if let Some(later) = values[k..].iter().position(|&x| x) {
                return Err(Error::PredicateNonMonotone { true_at: scan[k + later], false_at: scan[k] });
            }
            (if k == 0 { 0.0 } else { scan[k - 1] }, scan[k])
        }
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (big_r, r) = certified_radius(d1, d2, b)?;
    Ok(T1Result {
        t1: lo,
        bracket: (lo, hi),
        upper,
        a_r: big_r.powf(1.0 - d2 as f64),
        big_r,
        r,
        evaluations,
    })
}

/// Point of `beta^{-1}(J(g_t))` where `|g_t|` is largest.
///
/// At the threshold this is where `beta^{-1}(J(g_t))` touches `g_t^{-1}(J(beta))`.
/// The point is exact on `beta^{-1}(J(g_t))` up to rounding.
pub fn d1d2_contact_point(p: &D1D2Params) -> Result<Complex> {
    let beta = MultiMap::new(vec![p.beta()?])?;
    let g = p.g()?;
    let rho = p.t.powf(-1.0 / (p.d2 as f64 - 1.0));
    let point = |phi: f64| -> Result<Vec<Complex>> {
        crate::semigroup::inverse_branches(&beta, 0, p.b + Complex::from_polar(rho, phi))
    };
    let n = 4096;
    let mut best = (f64::NEG_INFINITY, 0.0, 0);
    for k in 0..n {
        let phi = TAU * k as f64 / n as f64;
        for (i, z) in point(phi)?.into_iter().enumerate() {
            let m = g.eval(z).norm();
            if m > best.0 {
                best = (m, phi, i);
            }
        }
    }
    // golden-section refinement on the winning branch
    let branch = best.2;
    let value = |phi: f64| -> Result<f64> { Ok(g.eval(point(phi)?[branch]).norm()) };
    let h = TAU / n as f64;
    let (mut a, mut bnd) = (best.1 - h, best.1 + h);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..80 {
        let x1 = bnd - gr * (bnd - a);
        let x2 = a + gr * (bnd - a);
        if value(x1)? > value(x2)? {
            bnd = x2;
        } else {
            a = x1;
        }
    }
    // the branch index is continuous only away from the cut of arg; pick the
    // closest root to the sampled one
    let phi = 0.5 * (a + bnd);
    let approx = point(best.1)?[branch];
    Ok(point(phi)?
        .into_iter()
        .min_by(|x, y| (x - approx).norm().total_cmp(&(y - approx).norm()))
        .expect("d1 >= 2 branches"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadraticKind {
    /// `(z - lambda)^2 + lambda`.
    Translation,
    /// `z^2 + lambda`.
    Additive,
}

pub fn make_quadratic_pair(a: Complex, kind: QuadraticKind, lambda: Complex) -> Result<MultiMap> {
    if !(a.re.is_finite() && a.im.is_finite() && lambda.re.is_finite() && lambda.im.is_finite()) {
        return Err(Error::NonFinite("quadratic pair parameters"));
    }
    let m = a.norm();
    if m < 1e-12 || (m - 1.0).abs() < 1e-12 {
        return Err(Error::BadModulus(m));
    }
    let first = Polynomial::new(vec![Complex::new(0.0, 0.0), Complex::new(0.0, 0.0), a])?;
    let one = Complex::new(1.0, 0.0);
    let second = match kind {
        QuadraticKind::Translation => Polynomial::centered_power(one, lambda, 2, lambda)?,
        QuadraticKind::Additive => Polynomial::new(vec![lambda, Complex::new(0.0, 0.0), one])?,
    };
    MultiMap::new(vec![first, second])
}

/// Membership in the parameter set `{a : |2 + a + 1/a| != 4}`.
pub fn in_set_a(a: Complex) -> bool {
    a.norm() > 0.0 && ((Complex::new(2.0, 0.0) + a + a.inv()).norm() - 4.0).abs() > 1e-12
}
