mod support;

use proptest::prelude::*;

use semilab::families::D1D2Params;
use semilab::geometry::{box_dimension, dyadic_counts};
use semilab::julia::backward_orbit;
use semilab::poly::{deriv_norm, spherical_distance};
use semilab::randomdyn::{t_infinity, trap_radius, EscapeConfig};
use semilab::semigroup::{chain_deriv, inverse_branches, ExpandingEstimate};
use semilab::thermo::pressure_approx;
use semilab::{Complex, Metric, MultiMap, Polynomial};

use support::{annulus, c, complex, poly, system, word};

const CASES: u32 = 1000;

#[test]
fn composition_associativity() {
    support::composition_associativity(CASES).unwrap();
}

#[test]
fn chain_rule_multiplicativity() {
    support::chain_rule_multiplicativity(CASES).unwrap();
}

#[test]
fn root_residuals() {
    support::root_residuals(CASES).unwrap();
}

#[test]
fn conjugacy_cocycle() {
    support::conjugacy_cocycle(CASES).unwrap();
}

#[test]
fn tail_bound_stability() {
    support::tail_bound_stability(CASES).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn spherical_derivative_identity(p in poly(5), z in complex(3.0)) {
        let s = deriv_norm(&p, z, Metric::Spherical);
        let e = deriv_norm(&p, z, Metric::Euclidean);
        let expect = e * (1.0 + z.norm_sqr()) / (1.0 + p.eval(z).norm_sqr());
        prop_assert!((s - expect).abs() <= 1e-12 * expect.max(1e-300));
    }

    #[test]
    fn spherical_triangle_inequality(a in complex(5.0), b in complex(5.0), d in complex(5.0)) {
        prop_assert!(spherical_distance(a, d) <= spherical_distance(a, b) + spherical_distance(b, d) + 1e-12);
    }

    #[test]
    fn inverse_branches_map_back(f in system(3, 5), w in complex(3.0), j in 0..3usize) {
        let j = j % f.m();
        let roots = inverse_branches(&f, j, w).unwrap();
        prop_assert_eq!(roots.len(), f.generator(j).degree());
        for r in roots {
            prop_assert!((f.generator(j).eval(r) - w).norm() < 1e-9 * (1.0 + w.norm()));
        }
    }

    #[test]
    fn exact_affine_constants_bound_chain_derivatives(
        maps in prop::collection::vec((1.1f64..4.0, 0.0..std::f64::consts::TAU, complex(1.0)), 1..=4),
        w in word(4, 8),
        z in complex(2.0),
    ) {
        let gens = maps.iter().map(|&(m, arg, b)| Polynomial::affine(Complex::from_polar(m, arg), b).unwrap()).collect();
        let f = MultiMap::new(gens).unwrap();
        let w: Vec<usize> = w.into_iter().map(|j| j % f.m()).collect();
        let k = ExpandingEstimate::exact_affine(&f).unwrap();
        let d = chain_deriv(&f, &w, z, Metric::Euclidean).unwrap().norm;
        prop_assert!(d >= k.c * k.eta.powi(w.len() as i32) * (1.0 - 1e-9));
    }

    #[test]
    fn alpha_congruence(d1 in 2..6usize, d2 in 2..6usize, r in 0.01f64..0.99, arg in 0.0..std::f64::consts::TAU) {
        prop_assume!((d1, d2) != (2, 2));
        let p = D1D2Params::new(d1, d2, Complex::from_polar(r, arg), 0.1).unwrap();
        prop_assert!(p.congruence_residual() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pressure_decreases_in_t(ratios in prop::collection::vec(1.5f64..5.0, 2..=4), t in 0.0f64..3.0, dt in 0.01f64..1.0) {
        let gens = ratios
            .iter()
            .enumerate()
            .map(|(k, &a)| Polynomial::affine(c(a, 0.0), c(k as f64, 0.0)).unwrap())
            .collect();
        let f = MultiMap::new(gens).unwrap();
        let z0 = c(0.0, 0.0);
        let lo = pressure_approx(&f, t, 4, z0, Metric::Euclidean).unwrap().value;
        let hi = pressure_approx(&f, t + dt, 4, z0, Metric::Euclidean).unwrap().value;
        prop_assert!(hi < lo);
    }

    #[test]
    fn escape_probability_is_exact_outside_and_in_the_trap(seed in any::<u64>(), arg in 0.0..std::f64::consts::TAU, r in 0.0f64..1.0) {
        let f = annulus();
        let cfg = EscapeConfig::uniform(&f, 50, seed).unwrap();
        let rho = trap_radius(&f, cfg.escape_radius);
        let inside = Complex::from_polar(r * rho, arg);
        let outside = Complex::from_polar(cfg.escape_radius * (1.0 + r) + 1e-9, arg);
        prop_assert_eq!(t_infinity(&f, &cfg, inside).unwrap().value, 0.0);
        prop_assert_eq!(t_infinity(&f, &cfg, outside).unwrap().value, 1.0);
    }

    #[test]
    fn escape_probability_is_seed_deterministic(seed in any::<u64>(), z in complex(1.0)) {
        let f = annulus();
        let cfg = EscapeConfig::uniform(&f, 64, seed).unwrap();
        prop_assert_eq!(t_infinity(&f, &cfg, z).unwrap(), t_infinity(&f, &cfg, z).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn backward_orbit_is_reproducible_and_bounded_in_dimension(seed in any::<u64>(), k in 0..3usize) {
        let f = match k {
            0 => annulus(),
            1 => semilab::families::make_named(&semilab::families::NamedFamily::default_sierpinski()).unwrap(),
            _ => semilab::families::make_named(&semilab::families::NamedFamily::Pentakun).unwrap(),
        };
        let a = backward_orbit(&f, 20_000, 64, seed).unwrap();
        let b = backward_orbit(&f, 20_000, 64, seed).unwrap();
        prop_assert!(a.points.iter().zip(&b.points).all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()));
        prop_assert!(box_dimension(&a, 6).unwrap().dimension <= 2.02);
    }

    #[test]
    fn doubling_the_cloud_never_lowers_box_counts(seed in any::<u64>()) {
        let f = annulus();
        let big = backward_orbit(&f, 40_000, 64, seed).unwrap();
        let (_, small_counts) = dyadic_counts(&big.points[..20_000], 6).unwrap();
        let (_, big_counts) = dyadic_counts(&big.points, 6).unwrap();
        prop_assert!(small_counts.iter().zip(&big_counts).all(|(s, b)| b >= s), "{small_counts:?} vs {big_counts:?}");
    }
}
