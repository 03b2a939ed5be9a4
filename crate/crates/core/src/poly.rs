//! Dense complex polynomials, the chordal metric and polynomial root finding.
//!
//! Coefficients are stored in ascending degree order. A [`Polynomial`] built
//! through [`Polynomial::new`] always has degree at least one; the only way to
//! obtain a constant is [`Polynomial::derivative`] of an affine map, which is
//! flagged by [`Polynomial::is_constant`].

use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Coefficients with modulus at or below this are trimmed from the top.
pub const TRIM_TOL: f64 = 1e-14;

/// Maximum number of simultaneous-iteration sweeps in [`Polynomial::roots`].
pub const ROOT_MAX_ITER: usize = 500;

/// Target for `|p(r)| / (1 + |r|)^deg` on the monic normalisation.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Metric {
    #[default]
    Euclidean,
    Spherical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex>,
}

impl Polynomial {
    /// Builds a polynomial of degree >= 1 from ascending coefficients.
    pub fn new(coeffs: Vec<Complex>) -> Result<Self> {
        let p = Self::from_raw(coeffs)?;
        if p.degree() == 0 {
            return Err(Error::DegreeTooLow(p.coeffs.len()));
        }
        Ok(p)
    }

    /// Like [`Polynomial::new`] but from real coefficients.
    pub fn from_real(coeffs: &[f64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| Complex::new(c, 0.0)).collect())
    }

    fn from_raw(mut coeffs: Vec<Complex>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients"));
        }
        while coeffs.len() > 1 && coeffs.last().map_or(false, |c| c.norm() <= TRIM_TOL) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex::new(0.0, 0.0));
        }
        Ok(Self { coeffs })
    }

    /// `a z + b`.
    pub fn affine(a: Complex, b: Complex) -> Result<Self> {
        Self::new(vec![b, a])
    }

    /// `scale * (z - center)^degree + shift`.
    pub fn centered_power(scale: Complex, center: Complex, degree: usize, shift: Complex) -> Result<Self> {
        let base = Self { coeffs: vec![-center, Complex::new(1.0, 0.0)] };
        let mut p = Self::constant(Complex::new(1.0, 0.0));
        for _ in 0..degree {
            p = &p * &base;
        }
        let mut coeffs: Vec<Complex> = p.coeffs.iter().map(|c| c * scale).collect();
        coeffs[0] += shift;
        Self::new(coeffs)
    }

    /// `z^degree`.
    pub fn monomial(degree: usize) -> Result<Self> {
        let mut coeffs = vec![Complex::new(0.0, 0.0); degree + 1];
        coeffs[degree] = Complex::new(1.0, 0.0);
        Self::new(coeffs)
    }

    pub(crate) fn constant(c: Complex) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn coeffs(&self) -> &[Complex] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() == 1
    }

    pub fn leading(&self) -> Complex {
        *self.coeffs.last().expect("nonempty")
    }

    pub fn max_coeff_modulus(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Horner evaluation.
    #[inline]
    pub fn eval(&self, z: Complex) -> Complex {
        let mut acc = Complex::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Value and first derivative in one Horner pass.
    #[inline]
    pub fn eval_with_derivative(&self, z: Complex) -> (Complex, Complex) {
        let mut p = Complex::new(0.0, 0.0);
        let mut dp = Complex::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Upper bound for `|p(z)|` on `|z| <= r`.
    pub fn modulus_bound(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
    }

    /// Formal derivative. For an affine map the result is a constant.
    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() == 1 {
            return Self::constant(Complex::new(0.0, 0.0));
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        Self { coeffs }
    }

    /// `self(inner(z))`.
    pub fn compose(&self, inner: &Polynomial) -> Polynomial {
        let mut acc = Self::constant(Complex::new(0.0, 0.0));
        for c in self.coeffs.iter().rev() {
            acc = &acc * inner;
            acc.coeffs[0] += c;
        }
        // the leading coefficient is an exact product, so only exact zeros are dropped
        while acc.coeffs.len() > 1 && acc.coeffs.last().is_some_and(|c| c.norm() == 0.0) {
            acc.coeffs.pop();
        }
        acc
    }

    fn trimmed(mut self) -> Self {
        while self.coeffs.len() > 1 && self.coeffs.last().map_or(false, |c| c.norm() <= TRIM_TOL) {
            self.coeffs.pop();
        }
        self
    }

    /// `self - w`, i.e. the polynomial whose roots are the preimages of `w`.
    pub fn shifted(&self, w: Complex) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] -= w;
        Self { coeffs }
    }

    /// `p(z) - z`, whose roots are the fixed points.
    pub fn shifted_identity(&self) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        coeffs[1] -= Complex::new(1.0, 0.0);
        Self { coeffs }.trimmed()
    }

    /// Detects `p(z) = a (z - c)^d + c` with `d >= 2` and returns `(a, c)`.
    ///
    /// For such maps the filled Julia set is the closed disk about `c` of
    /// radius `|a|^{-1/(d-1)}` and preimages have a closed form.
    pub fn centered_monomial_form(&self) -> Option<(Complex, Complex)> {
        let d = self.degree();
        if d < 2 {
            return None;
        }
        let a = self.leading();
        let c = -self.coeffs[d - 1] / (a * d as f64);
        let rebuilt = Self::centered_power(a, c, d, c).ok()?;
        let scale = 1.0 + self.max_coeff_modulus();
        let close = rebuilt.coeffs.len() == self.coeffs.len()
            && rebuilt.coeffs.iter().zip(&self.coeffs).all(|(x, y)| (x - y).norm() <= 1e-12 * scale);
        close.then_some((a, c))
    }

    /// Roots with multiplicity.
    ///
    /// Degrees one and two are solved in closed form; higher degrees use the
    /// Aberth–Ehrlich simultaneous iteration on the monic normalisation.
    pub fn roots(&self) -> Result<Vec<Complex>> {
        let n = self.degree();
        if n == 0 {
            return Ok(Vec::new());
        }
        let lead = self.leading();
        let monic: Vec<Complex> = self.coeffs.iter().map(|c| c / lead).collect();
        match n {
            1 => Ok(vec![-monic[0]]),
            2 => Ok(quadratic_roots(monic[1], monic[0])),
            _ => aberth(&monic),
        }
    }

    /// Maximum relative residual `|p(r)| / (1 + |r|)^deg` of the monic normalisation.
    pub fn root_residual(&self, roots: &[Complex]) -> f64 {
        let lead = self.leading();
        let n = self.degree() as i32;
        roots
            .iter()
            .map(|&r| (self.eval(r) / lead).norm() / (1.0 + r.norm()).powi(n))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.norm() == 0.0 && self.coeffs.len() > 1 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})z")?,
                _ => write!(f, "({c})z^{k}")?,
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let zero = Complex::new(0.0, 0.0);
        let coeffs = (0..n)
            .map(|k| self.coeffs.get(k).copied().unwrap_or(zero) + rhs.coeffs.get(k).copied().unwrap_or(zero))
            .collect();
        Polynomial { coeffs }.trimmed()
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(rhs * Complex::new(-1.0, 0.0))
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut coeffs = vec![Complex::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Polynomial { coeffs }
    }
}

impl Mul<Complex> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Complex) -> Polynomial {
        Polynomial { coeffs: self.coeffs.iter().map(|c| c * rhs).collect() }.trimmed()
    }
}

/// Chordal distance on the Riemann sphere.
pub fn spherical_distance(z: Complex, w: Complex) -> f64 {
    2.0 * (z - w).norm() / ((1.0 + z.norm_sqr()) * (1.0 + w.norm_sqr())).sqrt()
}

/// Norm of `p'(z)` in the chosen metric.
pub fn deriv_norm(p: &Polynomial, z: Complex, metric: Metric) -> f64 {
    let (v, dv) = p.eval_with_derivative(z);
    step_norm(z, v, dv, metric)
}

/// Metric norm of a derivative `dv` at `z` mapping to `v`.
#[inline]
pub(crate) fn step_norm(z: Complex, v: Complex, dv: Complex, metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => dv.norm(),
        Metric::Spherical => dv.norm() * (1.0 + z.norm_sqr()) / (1.0 + v.norm_sqr()),
    }
}

fn quadratic_roots(b: Complex, c: Complex) -> Vec<Complex> {
    // z^2 + b z + c, cancellation-free form
    let disc = (b * b - c * 4.0).sqrt();
    let q = if (b.conj() * disc).re >= 0.0 { -(b + disc) * 0.5 } else { -(b - disc) * 0.5 };
    if q.norm() == 0.0 {
        return vec![Complex::new(0.0, 0.0); 2];
    }
    vec![q, c / q]
}

/// A few Newton steps, each kept only if it lowers `|p|`.
fn polish(p: &Polynomial, mut r: Complex) -> Complex {
    let mut res = p.eval(r).norm();
    for _ in 0..4 {
        let (v, dv) = p.eval_with_derivative(r);
        if res == 0.0 || dv.norm() == 0.0 {
            break;
        }
        let next = r - v / dv;
        let next_res = p.eval(next).norm();
        if !(next_res < res) {
            break;
        }
        r = next;
        res = next_res;
    }
    r
}

fn aberth(monic: &[Complex]) -> Result<Vec<Complex>> {
    let n = monic.len() - 1;
    let poly = Polynomial { coeffs: monic.to_vec() };
    // Fujiwara bound for the initial circle
    let radius = (0..n)
        .map(|k| {
            let c = monic[k].norm();
            if k == 0 {
                (c / 2.0).powf(1.0 / n as f64)
            } else {
                c.powf(1.0 / (n - k) as f64)
            }
        })
        .fold(0.0, f64::max)
        * 2.0;
    let radius = if radius > 0.0 { radius } else { 1.0 };
    let center = -monic[n - 1] / n as f64;
    let mut z: Vec<Complex> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            center + Complex::from_polar(radius * 0.5, angle)
        })
        .collect();

    let converged = |z: &[Complex]| -> (bool, f64) {
        let mut worst = 0.0f64;
        let mut ok = true;
        for &r in z {
            let rn = r.norm();
            let res = poly.eval(r).norm();
            let scaled = res / (1.0 + rn).powi(n as i32);
            worst = worst.max(scaled);
            let floor = 32.0 * f64::EPSILON * poly.modulus_bound(rn) / (1.0 + rn).powi(n as i32);
            if scaled >= ROOT_RESIDUAL_TOL.max(floor) {
                ok = false;
            }
        }
        (ok, worst)
    };

    let mut residual = f64::INFINITY;
    for _ in 0..ROOT_MAX_ITER {
        let (ok, worst) = converged(&z);
        residual = worst;
        if ok {
            return Ok(z.into_iter().map(|r| polish(&poly, r)).collect());
        }
        for i in 0..n {
            let (p, dp) = poly.eval_with_derivative(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut repulsion = Complex::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    let d = z[i] - z[j];
                    if d.norm() > 0.0 {
                        repulsion += d.inv();
                    }
                }
            }
            let step = ratio / (Complex::new(1.0, 0.0) - ratio * repulsion);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
            }
        }
    }
    let (ok, worst) = converged(&z);
    if ok {
        Ok(z)
    } else {
        Err(Error::NonConvergence { iterations: ROOT_MAX_ITER, residual: worst.min(residual) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn sorted(mut v: Vec<Complex>) -> Vec<Complex> {
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        v
    }

    #[test]
    fn horner_examples() {
        let sq = Polynomial::monomial(2).unwrap();
        assert!((sq.eval(c(1.0, 1.0)) - c(0.0, 2.0)).norm() < 1e-15);
        let lin = Polynomial::from_real(&[-1.0, 2.0]).unwrap();
        assert_eq!(lin.eval(c(0.5, 0.0)), c(0.0, 0.0));
        let cubic = Polynomial::from_real(&[0.1, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(cubic.eval(c(0.0, 0.0)), c(0.1, 0.0));
    }

    #[test]
    fn derivative_examples() {
        let d = Polynomial::monomial(2).unwrap().derivative();
        assert_eq!(d.coeffs(), &[c(0.0, 0.0), c(2.0, 0.0)]);
        let d = Polynomial::from_real(&[-1.0, 2.0]).unwrap().derivative();
        assert!(d.is_constant());
        assert_eq!(d.coeffs(), &[c(2.0, 0.0)]);
        // t(z-b)^2 + b -> 2t(z-b)
        let (t, b) = (c(0.7, 0.2), c(0.1, -0.3));
        let p = Polynomial::centered_power(t, b, 2, b).unwrap();
        let d = p.derivative();
        for z in [c(0.3, 0.4), c(-1.0, 2.0)] {
            assert!((d.eval(z) - t * 2.0 * (z - b)).norm() < 1e-14);
        }
    }

    #[test]
    fn trimming_and_validation() {
        assert!(matches!(Polynomial::from_real(&[1.0]), Err(Error::DegreeTooLow(_))));
        assert!(matches!(Polynomial::from_real(&[1.0, 1e-15]), Err(Error::DegreeTooLow(_))));
        assert!(matches!(Polynomial::from_real(&[1.0, f64::NAN]), Err(Error::NonFinite(_))));
        assert_eq!(Polynomial::from_real(&[1.0, 2.0, 1e-16]).unwrap().degree(), 1);
    }

    #[test]
    fn spherical_distance_examples() {
        assert_eq!(spherical_distance(c(0.0, 0.0), c(0.0, 0.0)), 0.0);
        assert!((spherical_distance(c(0.0, 0.0), c(1.0, 0.0)) - 2f64.sqrt()).abs() < 1e-15);
        assert!((spherical_distance(c(1.0, 0.0), c(-1.0, 0.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn deriv_norm_examples() {
        let sq = Polynomial::monomial(2).unwrap();
        assert!((deriv_norm(&sq, c(1.0, 0.0), Metric::Spherical) - 2.0).abs() < 1e-15);
        assert_eq!(deriv_norm(&sq, c(0.0, 0.0), Metric::Spherical), 0.0);
        assert_eq!(deriv_norm(&sq, c(0.0, 0.0), Metric::Euclidean), 0.0);
        let lin = Polynomial::from_real(&[-1.0, 2.0]).unwrap();
        assert_eq!(deriv_norm(&lin, c(0.3, 0.0), Metric::Euclidean), 2.0);
    }

    #[test]
    fn root_examples() {
        let r = sorted(Polynomial::from_real(&[-4.0, 0.0, 1.0]).unwrap().roots().unwrap());
        assert!((r[0] - c(-2.0, 0.0)).norm() < 1e-14 && (r[1] - c(2.0, 0.0)).norm() < 1e-14);
        let r = sorted(Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap().roots().unwrap());
        assert!((r[0] - c(0.0, -1.0)).norm() < 1e-14 && (r[1] - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn cube_roots_of_unity_against_exponential_oracle() {
        let roots = Polynomial::from_real(&[-1.0, 0.0, 0.0, 1.0]).unwrap().roots().unwrap();
        assert_eq!(roots.len(), 3);
        for k in 0..3 {
            let expected = Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 3.0);
            let best = roots.iter().map(|r| (r - expected).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-10, "k = {k}, error {best}");
        }
    }

    #[test]
    fn aberth_handles_higher_degree_and_multiple_roots() {
        // (z-1)^2 (z+2)(z-i)
        let p = &(&Polynomial::from_real(&[1.0, -2.0, 1.0]).unwrap() * &Polynomial::from_real(&[2.0, 1.0]).unwrap())
            * &Polynomial::new(vec![c(0.0, -1.0), c(1.0, 0.0)]).unwrap();
        let roots = p.roots().unwrap();
        assert_eq!(roots.len(), 4);
        for r in &roots {
            assert!(p.eval(*r).norm() < 1e-10 * (1.0 + p.max_coeff_modulus()));
        }
        assert!(roots.iter().any(|r| (r - c(-2.0, 0.0)).norm() < 1e-10));
        assert!(roots.iter().any(|r| (r - c(0.0, 1.0)).norm() < 1e-10));
        assert_eq!(roots.iter().filter(|r| (*r - c(1.0, 0.0)).norm() < 1e-5).count(), 2);
    }

    #[test]
    fn double_root_from_critical_value() {
        // z^2 + 1 = 1
        let roots = Polynomial::from_real(&[1.0, 0.0, 1.0]).unwrap().shifted(c(1.0, 0.0)).roots().unwrap();
        assert!(roots.iter().all(|r| r.norm() < 1e-12));
    }

    #[test]
    fn centered_form_detection() {
        let (t, b) = (c(0.4, 0.3), c(0.1, 0.0));
        let g = Polynomial::centered_power(t, b, 2, b).unwrap();
        let (a, center) = g.centered_monomial_form().unwrap();
        assert!((a - t).norm() < 1e-14 && (center - b).norm() < 1e-14);
        assert!(Polynomial::from_real(&[0.1, 0.0, 1.0]).unwrap().centered_monomial_form().is_none());
        assert!(Polynomial::monomial(3).unwrap().centered_monomial_form().is_some());
        assert!(Polynomial::from_real(&[-1.0, 2.0]).unwrap().centered_monomial_form().is_none());
    }

    #[test]
    fn compose_keeps_small_leading_coefficients() {
        let half = Polynomial::from_real(&[0.0, 0.0, 0.5]).unwrap();
        let mut p = half.clone();
        for _ in 0..5 {
            p = half.compose(&p);
        }
        assert_eq!(p.degree(), 64);
        assert_eq!(p.leading(), c(0.5f64.powi(63), 0.0));
    }

    #[test]
    fn compose_matches_pointwise() {
        let p = Polynomial::from_real(&[0.5, -1.0, 2.0]).unwrap();
        let q = Polynomial::new(vec![c(0.1, 0.2), c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        let pq = p.compose(&q);
        assert_eq!(pq.degree(), 4);
        let z = c(0.3, -0.7);
        assert!((pq.eval(z) - p.eval(q.eval(z))).norm() < 1e-13);
    }
}
