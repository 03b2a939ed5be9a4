//! Randomised invariants shared by the property suite and the acceptance gate.
#![allow(dead_code)]

use std::sync::OnceLock;

use proptest::prelude::*;
use proptest::test_runner::{RngAlgorithm, TestRng, TestRunner};

use semilab::families::{make_quadratic_pair, QuadraticKind};
use semilab::semigroup::{chain_deriv, compose_along};
use semilab::transversality::{
    conjugacy_point_at, dh_series_at, FiberPoint, PerturbationFamily, PerturbationKind, DEFAULT_PATH_STEPS,
};
use semilab::{Complex, EPWord, Metric, MultiMap, Polynomial, Word};

pub fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

pub fn complex(r: f64) -> impl Strategy<Value = Complex> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

/// Degree `1..=max_deg`, lower coefficients in the unit box, leading modulus in `[0.5, 1]`.
pub fn poly(max_deg: usize) -> impl Strategy<Value = Polynomial> {
    (1..=max_deg).prop_flat_map(|d| {
        (prop::collection::vec(complex(1.0), d), 0.5f64..1.0, 0.0..std::f64::consts::TAU).prop_map(
            |(mut lower, m, arg)| {
                lower.push(Complex::from_polar(m, arg));
                Polynomial::new(lower).unwrap()
            },
        )
    })
}

pub fn system(max_m: usize, max_deg: usize) -> impl Strategy<Value = MultiMap> {
    prop::collection::vec(poly(max_deg), 1..=max_m).prop_map(|g| MultiMap::new(g).unwrap())
}

pub fn word(m: usize, max_len: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..m, 0..=max_len)
}

pub fn rel_close(a: Complex, b: Complex, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

pub fn annulus() -> MultiMap {
    make_quadratic_pair(c(2.0, 0.0), QuadraticKind::Additive, c(0.0, 0.0)).unwrap()
}

/// Perturbation families through the annulus pair, constants computed once.
pub fn families() -> &'static [PerturbationFamily] {
    static FAMS: OnceLock<Vec<PerturbationFamily>> = OnceLock::new();
    FAMS.get_or_init(|| {
        let zero = c(0.0, 0.0);
        let base = annulus();
        let first = PerturbationFamily::new(base.clone(), PerturbationKind::Translation { index: 1 }, zero).unwrap();
        let k = *first.constants();
        let kinds = [
            PerturbationKind::Translation { index: 0 },
            PerturbationKind::Translation { index: 1 },
            PerturbationKind::DerivativePerturb { index: 0 },
            PerturbationKind::DerivativePerturb { index: 1 },
            PerturbationKind::Monomial { index: 1, exponent: 0, center: zero },
            PerturbationKind::Monomial { index: 0, exponent: 2, center: c(0.1, 0.0) },
            PerturbationKind::Conjugation { index: 1, a1: c(0.3, 0.1), b1: c(0.5, -0.2) },
        ];
        kinds.iter().map(|&kind| PerturbationFamily::with_constants(base.clone(), kind, zero, k).unwrap()).collect()
    })
}

pub fn ep_word() -> impl Strategy<Value = EPWord> {
    (word(2, 2), prop::collection::vec(0..2usize, 1..=2))
        .prop_map(|(pre, per)| EPWord::new(Word(pre), Word(per)).unwrap())
}

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn composite(f: &MultiMap, w: &[usize]) -> Polynomial {
    let mut p = Polynomial::monomial(1).unwrap();
    for &j in w {
        p = f.generator(j).compose(&p);
    }
    p
}

/// Words drawn for `f`, with symbols reduced modulo `m`.
fn split_words(f: &MultiMap, u: Vec<usize>, v: Vec<usize>) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let u: Vec<usize> = u.into_iter().map(|j| j % f.m()).collect();
    let v: Vec<usize> = v.into_iter().map(|j| j % f.m()).collect();
    let uv = u.iter().chain(&v).copied().collect();
    (u, v, uv)
}

pub fn composition_associativity(cases: u32) -> Result<(), String> {
    let s = (system(3, 3), word(3, 3), word(3, 3), complex(1.2));
    run(cases, s, |(f, u, v, z)| {
        let (u, v, uv) = split_words(&f, u, v);
        let (Ok(whole), Ok(fu)) = (compose_along(&f, &uv, z), compose_along(&f, &u, z)) else {
            return Err(TestCaseError::reject("overflow"));
        };
        let split = compose_along(&f, &v, fu).unwrap();
        prop_assert!(rel_close(whole, split, 1e-10), "{whole} vs {split}");
        // independent oracle: the expanded composite polynomial, up to its Horner rounding bound
        let p = composite(&f, &uv);
        let slack = 64.0 * f64::EPSILON * p.modulus_bound(z.norm());
        prop_assert!((p.eval(z) - whole).norm() <= 1e-10 * (1.0 + whole.norm()) + slack, "{} vs {whole}", p.eval(z));
        Ok(())
    })
}

pub fn chain_rule_multiplicativity(cases: u32) -> Result<(), String> {
    let s = (system(3, 3), word(3, 3), word(3, 3), complex(1.2));
    run(cases, s, |(f, u, v, z)| {
        let (u, v, uv) = split_words(&f, u, v);
        for metric in [Metric::Euclidean, Metric::Spherical] {
            let (Ok(whole), Ok(a)) = (chain_deriv(&f, &uv, z, metric), chain_deriv(&f, &u, z, metric)) else {
                return Err(TestCaseError::reject("overflow"));
            };
            let b = chain_deriv(&f, &v, a.image, metric).unwrap();
            prop_assert!(rel_close(whole.derivative, a.derivative * b.derivative, 1e-10));
            prop_assert!((whole.norm - a.norm * b.norm).abs() <= 1e-10 * whole.norm.max(a.norm * b.norm));
        }
        let p = composite(&f, &uv);
        let whole = chain_deriv(&f, &uv, z, Metric::Euclidean).unwrap().derivative;
        let dp = p.derivative();
        let slack = 64.0 * f64::EPSILON * dp.modulus_bound(z.norm());
        prop_assert!((dp.eval(z) - whole).norm() <= 1e-10 * (1.0 + whole.norm()) + slack);
        Ok(())
    })
}

pub fn root_residuals(cases: u32) -> Result<(), String> {
    run(cases, poly(8), |p| {
        let roots = p.roots().unwrap();
        prop_assert_eq!(roots.len(), p.degree());
        let scale = 1.0 + p.max_coeff_modulus();
        for r in roots {
            prop_assert!(p.eval(r).norm() < 1e-10 * scale, "|p({})| = {:e}", r, p.eval(r).norm());
        }
        Ok(())
    })
}

pub fn conjugacy_cocycle(cases: u32) -> Result<(), String> {
    run(cases, (0..7usize, ep_word(), complex(0.03)), |(k, w, lam)| {
        let fam = &families()[k];
        let base = &fam.base;
        let p = FiberPoint::canonical(base, &w).unwrap();
        let f = fam.at(lam).unwrap();
        let h = conjugacy_point_at(fam, &p, lam, DEFAULT_PATH_STEPS).unwrap();
        let hs = conjugacy_point_at(fam, &p.shift(base), lam, DEFAULT_PATH_STEPS).unwrap();
        let image = f.generator(w.symbol(0)).eval(h);
        prop_assert!((hs - image).norm() < 1e-9, "{hs} vs {image}");
        Ok(())
    })
}

pub fn tail_bound_stability(cases: u32) -> Result<(), String> {
    run(cases, (0..7usize, ep_word(), 4..24usize), |(k, w, n)| {
        let fam = &families()[k];
        let p = FiberPoint::canonical(&fam.base, &w).unwrap();
        let a = dh_series_at(fam, &p, n).unwrap();
        let b = dh_series_at(fam, &p, 2 * n).unwrap();
        // rounding slack for the finite partial sums
        let slack = 1e-12 * (1.0 + a.value.norm());
        let moved = (a.value - b.value).norm();
        prop_assert!(moved <= a.tail_bound + slack, "moved {:e}, tail {:e}", moved, a.tail_bound);
        Ok(())
    })
}
