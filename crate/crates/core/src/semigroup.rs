//! Finitely generated multimaps, symbolic words and derivative bookkeeping.
//!
//! Symbols are stored zero-based. `Word::from_one_based` and the `Display`
//! impls convert to the one-based labels used in configs and reports.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::julia::PointCloud;
use crate::poly::{step_norm, Complex, Metric, Polynomial};

/// Moduli above this abort a forward orbit.
pub const OVERFLOW_MODULUS: f64 = 1e150;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpandingEstimate {
    pub c: f64,
    pub eta: f64,
    pub level: usize,
    /// False only when the constants are known exactly (affine similarities).
    pub heuristic: bool,
}

impl ExpandingEstimate {
    /// Exact constants for a system of affine maps `a_j z + b_j`: `C = 1`, `eta = min |a_j|`.
    pub fn exact_affine(f: &MultiMap) -> Result<Self> {
        let mut eta = f64::INFINITY;
        for g in f.generators() {
            if g.degree() != 1 {
                return Err(Error::InvalidInput("exact constants need affine generators".into()));
            }
            eta = eta.min(g.leading().norm());
        }
        if eta <= 1.0 {
            return Err(Error::NotExpanding(format!("min |a_j| = {eta} <= 1")));
        }
        Ok(Self { c: 1.0, eta, level: 1, heuristic: false })
    }
}

#[derive(Clone, Debug)]
struct Generator {
    poly: Polynomial,
    deriv: Polynomial,
    centered: Option<(Complex, Complex)>,
}

#[derive(Clone, Debug)]
pub struct MultiMap {
    gens: Vec<Generator>,
    expanding: Option<ExpandingEstimate>,
}

impl MultiMap {
    pub fn new(generators: Vec<Polynomial>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidInput("a multimap needs at least one generator".into()));
        }
        let gens = generators
            .into_iter()
            .map(|poly| Generator {
                deriv: poly.derivative(),
                centered: poly.centered_monomial_form(),
                poly,
            })
            .collect();
        Ok(Self { gens, expanding: None })
    }

    pub fn with_expanding(mut self, est: ExpandingEstimate) -> Result<Self> {
        if !(est.c > 0.0 && est.c <= 1.0 && est.eta > 1.0) {
            return Err(Error::InvalidInput(format!(
                "expanding constants need C in (0,1] and eta > 1, got C = {}, eta = {}",
                est.c, est.eta
            )));
        }
        self.expanding = Some(est);
        Ok(self)
    }

    pub fn expanding(&self) -> Option<&ExpandingEstimate> {
        self.expanding.as_ref()
    }

    pub fn m(&self) -> usize {
        self.gens.len()
    }

    pub fn generator(&self, j: usize) -> &Polynomial {
        &self.gens[j].poly
    }

    pub fn generator_derivative(&self, j: usize) -> &Polynomial {
        &self.gens[j].deriv
    }

    pub fn generators(&self) -> impl Iterator<Item = &Polynomial> {
        self.gens.iter().map(|g| &g.poly)
    }

    pub fn total_degree(&self) -> usize {
        self.gens.iter().map(|g| g.poly.degree()).sum()
    }

    pub fn is_affine(&self) -> bool {
        self.gens.iter().all(|g| g.poly.degree() == 1)
    }

    /// `f_j(z)` and `f_j'(z)`.
    #[inline]
    pub fn eval(&self, j: usize, z: Complex) -> (Complex, Complex) {
        let g = &self.gens[j];
        (g.poly.eval(z), g.deriv.eval(z))
    }

    /// Returns a copy of this system with generator `j` replaced.
    pub fn replace(&self, j: usize, poly: Polynomial) -> Result<Self> {
        let mut polys: Vec<Polynomial> = self.generators().cloned().collect();
        polys[j] = poly;
        Self::new(polys)
    }

    fn check_symbol(&self, j: usize) -> Result<()> {
        if j >= self.m() {
            return Err(Error::InvalidInput(format!("symbol {} out of range 1..={}", j + 1, self.m())));
        }
        Ok(())
    }

    pub fn check_word(&self, w: &[usize]) -> Result<()> {
        w.iter().try_for_each(|&j| self.check_symbol(j))
    }
}

/// Finite word, zero-based symbols; the first symbol acts first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn from_one_based(symbols: &[usize]) -> Result<Self> {
        if symbols.contains(&0) {
            return Err(Error::InvalidInput("word symbols are numbered from 1".into()));
        }
        Ok(Self(symbols.iter().map(|s| s - 1).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        Word(self.0.iter().chain(&other.0).copied().collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s + 1)?;
        }
        Ok(())
    }
}

/// Eventually periodic word `preperiod · period^∞`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EPWord {
    pub preperiod: Word,
    pub period: Word,
}

impl EPWord {
    pub fn new(preperiod: Word, period: Word) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidInput("period of an eventually periodic word must be nonempty".into()));
        }
        Ok(Self { preperiod, period })
    }

    /// `j^∞`.
    pub fn fixed(j: usize) -> Self {
        Self { preperiod: Word::default(), period: Word(vec![j]) }
    }

    /// `i j^∞`.
    pub fn tail(i: usize, j: usize) -> Self {
        Self { preperiod: Word(vec![i]), period: Word(vec![j]) }
    }

    /// Symbol at position `k` (zero-based).
    pub fn symbol(&self, k: usize) -> usize {
        let p = self.preperiod.len();
        if k < p {
            self.preperiod.0[k]
        } else {
            self.period.0[(k - p) % self.period.len()]
        }
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word((0..n).map(|k| self.symbol(k)).collect())
    }

    /// Left shift `σ(w)`.
    pub fn shift(&self) -> EPWord {
        if self.preperiod.is_empty() {
            let mut period = self.period.0.clone();
            period.rotate_left(1);
            EPWord { preperiod: Word::default(), period: Word(period) }
        } else {
            EPWord { preperiod: Word(self.preperiod.0[1..].to_vec()), period: self.period.clone() }
        }
    }

    pub fn contains_symbol(&self, j: usize) -> bool {
        self.preperiod.0.contains(&j) || self.period.0.contains(&j)
    }

    pub fn check(&self, f: &MultiMap) -> Result<()> {
        f.check_word(&self.preperiod.0)?;
        f.check_word(&self.period.0)
    }
}

impl fmt::Display for EPWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})^inf", self.preperiod, self.period)
    }
}

/// Chain derivative along a word.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainDerivative {
    /// Product of per-step derivative norms in the requested metric.
    pub norm: f64,
    /// Complex Euclidean derivative `f_w'(z)`.
    pub derivative: Complex,
    /// `f_w(z)`.
    pub image: Complex,
}

/// `f_w(z)`, applying `w[0]` first.
pub fn compose_along(f: &MultiMap, w: &[usize], z: Complex) -> Result<Complex> {
    f.check_word(w)?;
    let mut z = z;
    for &j in w {
        z = f.generator(j).eval(z);
        let m = z.norm();
        if !(m <= OVERFLOW_MODULUS) {
            return Err(Error::Overflow { modulus: m });
        }
    }
    Ok(z)
}

pub fn chain_deriv(f: &MultiMap, w: &[usize], z: Complex, metric: Metric) -> Result<ChainDerivative> {
    f.check_word(w)?;
    let mut z = z;
    let mut norm = 1.0;
    let mut derivative = Complex::new(1.0, 0.0);
    for &j in w {
        let (v, dv) = f.eval(j, z);
        norm *= step_norm(z, v, dv, metric);
        derivative *= dv;
        z = v;
        let m = z.norm();
        if !(m <= OVERFLOW_MODULUS) {
            return Err(Error::Overflow { modulus: m });
        }
    }
    Ok(ChainDerivative { norm, derivative, image: z })
}

/// All solutions of `f_j(z) = w`, with multiplicity.
pub fn inverse_branches(f: &MultiMap, j: usize, w: Complex) -> Result<Vec<Complex>> {
    f.check_symbol(j)?;
    let g = &f.gens[j];
    if g.poly.degree() == 1 {
        let c = g.poly.coeffs();
        return Ok(vec![(w - c[0]) / c[1]]);
    }
    if let Some((a, center)) = g.centered {
        let d = g.poly.degree();
        let base = (w - center) / a;
        let r = base.norm().powf(1.0 / d as f64);
        let theta = base.arg() / d as f64;
        return Ok((0..d)
            .map(|k| {
                let angle = theta + 2.0 * std::f64::consts::PI * k as f64 / d as f64;
                center + Complex::from_polar(r, angle)
            })
            .collect());
    }
    g.poly.shifted(w).roots()
}

/// Estimates `(C, eta)` from the symbol history of a backward-orbit cloud.
///
/// Consecutive cloud points are linked by `f_{s_k}(z_k) = z_{k-1}`, so every
/// window of `n` consecutive steps is a sampled point of the skew-product
/// Julia set together with a word of length `n`.
pub fn estimate_expanding(f: &MultiMap, cloud: &PointCloud, n: usize, metric: Metric) -> Result<ExpandingEstimate> {
    if n == 0 {
        return Err(Error::InvalidInput("expanding level must be at least 1".into()));
    }
    if cloud.points.len() <= n {
        return Err(Error::InsufficientPoints { got: cloud.points.len(), need: n + 1 });
    }
    let logs: Vec<f64> = cloud
        .points
        .iter()
        .zip(&cloud.symbols)
        .map(|(&z, &j)| {
            let (v, dv) = f.eval(j, z);
            step_norm(z, v, dv, metric).ln()
        })
        .collect();
    let mut prefix = Vec::with_capacity(logs.len() + 1);
    prefix.push(0.0);
    for l in &logs {
        prefix.push(prefix.last().unwrap() + l);
    }
    // window of length k ending at index e (inclusive) covers e+1-k..=e
    let min_window = |k: usize| -> f64 {
        (k..=logs.len()).map(|e| prefix[e] - prefix[e - k]).fold(f64::INFINITY, f64::min)
    };
    let min_n = min_window(n);
    if !(min_n > 0.0) {
        return Err(Error::NotExpanding(format!(
            "minimum chain derivative at level {n} is {:.6e} <= 1",
            min_n.exp()
        )));
    }
    let log_eta = min_n / n as f64;
    let mut log_c: f64 = 0.0;
    for k in 1..=n {
        log_c = log_c.min(min_window(k) - k as f64 * log_eta);
    }
    Ok(ExpandingEstimate { c: log_c.exp(), eta: log_eta.exp(), level: n, heuristic: true })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PostcriticalSample {
    pub points: Vec<Complex>,
    pub bounded: bool,
    pub radius: f64,
}

/// Finite critical values of every generator and their forward images up to `depth`.
pub fn postcritical_sample(f: &MultiMap, depth: usize, escape_radius: f64) -> Result<PostcriticalSample> {
    let key = |z: Complex| ((z.re * 1e12).round() as i64, (z.im * 1e12).round() as i64);
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    let mut frontier = Vec::new();
    let mut bounded = true;
    let mut radius: f64 = 0.0;
    let mut admit = |z: Complex, points: &mut Vec<Complex>, next: &mut Vec<Complex>| {
        if z.norm() > escape_radius || !z.re.is_finite() || !z.im.is_finite() {
            bounded = false;
            return;
        }
        if seen.insert(key(z)) {
            radius = radius.max(z.norm());
            points.push(z);
            next.push(z);
        }
    };
    for g in &f.gens {
        if g.poly.degree() < 2 {
            continue;
        }
        for c in g.deriv.roots()? {
            admit(g.poly.eval(c), &mut points, &mut frontier);
        }
    }
    for _ in 0..depth {
        let mut next = Vec::new();
        for &z in &frontier {
            for g in &f.gens {
                admit(g.poly.eval(z), &mut points, &mut next);
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    Ok(PostcriticalSample { points, bounded, radius })
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

    fn annulus() -> MultiMap {
        MultiMap::new(vec![
            Polynomial::from_real(&[0.0, 0.0, 2.0]).unwrap(),
            Polynomial::monomial(2).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn compose_examples() {
        let f = interval();
        assert_eq!(compose_along(&f, &[0, 1], c(0.0, 0.0)).unwrap(), c(-1.0, 0.0));
        assert_eq!(compose_along(&f, &[], c(0.3, 0.2)).unwrap(), c(0.3, 0.2));
        assert_eq!(compose_along(&annulus(), &[1, 0], c(1.0, 0.0)).unwrap(), c(2.0, 0.0));
        let g = MultiMap::new(vec![Polynomial::monomial(2).unwrap()]).unwrap();
        assert!(matches!(compose_along(&g, &[0; 20], c(2.0, 0.0)), Err(Error::Overflow { .. })));
        assert!(compose_along(&f, &[2], c(0.0, 0.0)).is_err());
    }

    #[test]
    fn chain_deriv_examples() {
        let f = interval();
        let d = chain_deriv(&f, &[0, 1, 1, 0, 1], c(0.2, 0.1), Metric::Euclidean).unwrap();
        assert_eq!(d.norm, 32.0);
        assert_eq!(chain_deriv(&f, &[], c(0.2, 0.1), Metric::Euclidean).unwrap().norm, 1.0);
        let sq = MultiMap::new(vec![Polynomial::monomial(2).unwrap()]).unwrap();
        let d = chain_deriv(&sq, &[0, 0], c(1.0, 0.0), Metric::Euclidean).unwrap();
        assert_eq!(d.norm, 4.0);
        // symbolic oracle (z^4)' = 4 z^3
        let z = c(0.3, 0.8);
        let d = chain_deriv(&sq, &[0, 0], z, Metric::Euclidean).unwrap();
        assert!((d.derivative - z.powu(3) * 4.0).norm() < 1e-14);
    }

    #[test]
    fn inverse_branch_examples() {
        let sq = MultiMap::new(vec![Polynomial::monomial(2).unwrap(), Polynomial::from_real(&[-1.0, 2.0]).unwrap()])
            .unwrap();
        let mut r = inverse_branches(&sq, 0, c(4.0, 0.0)).unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - c(-2.0, 0.0)).norm() < 1e-15 && (r[1] - c(2.0, 0.0)).norm() < 1e-15);
        assert_eq!(inverse_branches(&sq, 1, c(0.0, 0.0)).unwrap(), vec![c(0.5, 0.0)]);
        let shifted = MultiMap::new(vec![Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap()]).unwrap();
        let r = inverse_branches(&shifted, 0, c(1.0, 0.0)).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn epword_symbols_and_shift() {
        let w = EPWord::new(Word(vec![1, 0]), Word(vec![2, 1])).unwrap();
        let syms: Vec<usize> = (0..7).map(|k| w.symbol(k)).collect();
        assert_eq!(syms, vec![1, 0, 2, 1, 2, 1, 2]);
        let s = w.shift().shift();
        assert_eq!(s, EPWord::new(Word::default(), Word(vec![2, 1])).unwrap());
        assert_eq!(s.shift().period, Word(vec![1, 2]));
        assert!(EPWord::new(Word(vec![0]), Word::default()).is_err());
        assert_eq!(format!("{}", EPWord::tail(1, 0)), "2(1)^inf");
    }

    #[test]
    fn exact_affine_constants() {
        let est = ExpandingEstimate::exact_affine(&interval()).unwrap();
        assert_eq!((est.c, est.eta, est.heuristic), (1.0, 2.0, false));
        assert!(ExpandingEstimate::exact_affine(&annulus()).is_err());
    }

    #[test]
    fn postcritical_examples() {
        let s = postcritical_sample(&annulus(), 10, 20.0).unwrap();
        assert!(s.bounded);
        assert_eq!(s.points, vec![c(0.0, 0.0)]);
        let s = postcritical_sample(&interval(), 10, 20.0).unwrap();
        assert!(s.bounded && s.points.is_empty());
        let esc = MultiMap::new(vec![
            Polynomial::monomial(2).unwrap(),
            Polynomial::from_real(&[5.0, 0.0, 1.0]).unwrap(),
        ])
        .unwrap();
        let s = postcritical_sample(&esc, 4, 20.0).unwrap();
        assert!(!s.bounded);
        assert!(s.points.iter().all(|z| z.norm() <= 20.0));
    }
}
