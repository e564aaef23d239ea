use std::sync::{Arc, OnceLock};

use gausstv::calculus::{adjoint_residual, cylindrical_projection, lift};
use gausstv::cli::{read_fields_csv, write_fields_csv};
use gausstv::geometry::{anisotropic_perimeter, extract_level_sets, perimeter_gamma, IndicatorSet};
use gausstv::integrands::{delta_regularize, smooth_approx};
use gausstv::ou::OuSemigroup;
use gausstv::solver::{dual_energy, integrand_energy, primal_energy};
use gausstv::verify::{check_convexity_field, ConvexityTolerance};
use gausstv::{build_grid, solve, GaussianGrid, GridSpec, Integrand, ScalarField, SolverParams, VectorField};
use proptest::prelude::*;

fn cached(cell: &'static OnceLock<Arc<GaussianGrid>>, spec: GridSpec) -> Arc<GaussianGrid> {
    cell.get_or_init(|| build_grid(&spec).unwrap()).clone()
}

fn hermite_square() -> Arc<GaussianGrid> {
    static CELL: OnceLock<Arc<GaussianGrid>> = OnceLock::new();
    cached(&CELL, GridSpec::gauss_hermite(2, 9))
}

fn uniform_square() -> Arc<GaussianGrid> {
    static CELL: OnceLock<Arc<GaussianGrid>> = OnceLock::new();
    cached(&CELL, GridSpec::uniform(2, 9, 3.0))
}

fn uniform_line() -> Arc<GaussianGrid> {
    static CELL: OnceLock<Arc<GaussianGrid>> = OnceLock::new();
    cached(&CELL, GridSpec::uniform(1, 33, 4.0))
}

fn hermite_cube() -> Arc<GaussianGrid> {
    static CELL: OnceLock<Arc<GaussianGrid>> = OnceLock::new();
    cached(&CELL, GridSpec::gauss_hermite(3, 5))
}

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, n)
}

fn integrands_2d() -> Vec<Integrand> {
    let norm = Integrand::EuclideanNorm;
    vec![
        norm.clone(),
        Integrand::power_p(1.5, 1.0).unwrap(),
        Integrand::power_p(3.0, 0.5).unwrap(),
        Integrand::quadratic(2.0).unwrap(),
        Integrand::anisotropic_norm(vec![1.0, 4.0]).unwrap(),
        Integrand::moreau_regularized(norm.clone(), 0.5, 0.1).unwrap(),
        smooth_approx(&norm, 3).unwrap(),
        delta_regularize(&norm, 0.5).unwrap(),
        delta_regularize(&Integrand::quadratic(1.0).unwrap(), 0.25).unwrap(),
    ]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjointness_holds_for_random_pairs(u in values(81), phi in values(162)) {
        for grid in [hermite_square(), uniform_square()] {
            let u = ScalarField::new(grid.clone(), u.clone()).unwrap();
            let phi = VectorField::new(grid.clone(), phi.clone()).unwrap();
            let res = adjoint_residual(&u, &phi).unwrap();
            prop_assert!(res <= 1e-12 * (1.0 + u.norm() * phi.norm()), "{}", res);
        }
    }

    #[test]
    fn fenchel_young_inequality(h in values(2), q in values(2)) {
        for f in integrands_2d() {
            let (fh, fq) = (f.evaluate(&h), f.conjugate(&q));
            prop_assert!(fh + fq >= dot(&h, &q) - 1e-9 * (1.0 + fh.abs() + dot(&h, &q).abs()),
                "{}: F={} F*={} <h,q>={}", f.kind_name(), fh, fq, dot(&h, &q));
        }
    }

    #[test]
    fn integrands_are_midpoint_convex(a in values(2), b in values(2)) {
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        for f in integrands_2d() {
            let excess = f.evaluate(&mid) - 0.5 * (f.evaluate(&a) + f.evaluate(&b));
            prop_assert!(excess <= 1e-10 * (1.0 + f.evaluate(&a).abs() + f.evaluate(&b).abs()),
                "{}: {}", f.kind_name(), excess);
        }
    }

    #[test]
    fn prox_is_nonexpansive(a in values(2), b in values(2), tau in 0.01..5.0f64) {
        for f in integrands_2d().into_iter().filter(Integrand::supports_prox) {
            let (pa, pb) = (f.prox_primal(tau, &a).unwrap(), f.prox_primal(tau, &b).unwrap());
            prop_assert!(dist(&pa, &pb) <= dist(&a, &b) + 1e-9, "{}", f.kind_name());
            let (qa, qb) = (f.prox_conjugate(tau, &a).unwrap(), f.prox_conjugate(tau, &b).unwrap());
            prop_assert!(dist(&qa, &qb) <= dist(&a, &b) + 1e-9, "{} conjugate", f.kind_name());
        }
    }

    #[test]
    fn weak_duality(u in values(81), phi in values(162), g in values(81), scale in 0.0..1.0f64) {
        let grid = hermite_square();
        let u = ScalarField::new(grid.clone(), u).unwrap();
        let g = ScalarField::new(grid.clone(), g).unwrap();
        let phi = VectorField::new(grid.clone(), phi.iter().map(|v| v * scale / 5.0).collect()).unwrap();
        for f in integrands_2d().into_iter().filter(Integrand::supports_prox) {
            let p = primal_energy(&f, &u, &g).unwrap();
            let d = dual_energy(&f, &phi, &g).unwrap();
            prop_assert!(d <= p + 1e-10 * (1.0 + p.abs()), "{}: dual {} > primal {}", f.kind_name(), d, p);
        }
    }

    #[test]
    fn perimeter_is_submodular(a in prop::collection::vec(any::<bool>(), 81), b in prop::collection::vec(any::<bool>(), 81)) {
        let grid = uniform_square();
        let e = IndicatorSet::new(grid.clone(), a).unwrap();
        let f = IndicatorSet::new(grid, b).unwrap();
        let lhs = perimeter_gamma(&e.union(&f).unwrap()) + perimeter_gamma(&e.intersection(&f).unwrap());
        prop_assert!(lhs <= perimeter_gamma(&e) + perimeter_gamma(&f) + 1e-10);
    }

    #[test]
    fn anisotropic_perimeter_between_spherical_bounds(mask in prop::collection::vec(any::<bool>(), 81), a in 0.1..5.0f64, b in 0.1..5.0f64) {
        let set = IndicatorSet::new(uniform_square(), mask).unwrap();
        let f = Integrand::anisotropic_norm(vec![a, b]).unwrap();
        let (lo, hi) = (a.min(b).sqrt(), a.max(b).sqrt());
        let p = perimeter_gamma(&set);
        let pf = anisotropic_perimeter(&f, &set).unwrap();
        prop_assert!(lo * p <= pf + 1e-12 && pf <= hi * p + 1e-12);
    }

    #[test]
    fn level_sets_nested_with_monotone_volume(u in values(81), mut t in prop::collection::vec(-6.0..6.0f64, 1..12)) {
        let u = ScalarField::new(uniform_square(), u).unwrap();
        let family = extract_level_sets(&u, &t).unwrap();
        prop_assert!(family.is_nested());
        prop_assert!(family.volumes.windows(2).all(|p| p[0] <= p[1]));
        t.sort_by(f64::total_cmp);
        t.dedup();
        prop_assert_eq!(family.thresholds, t);
    }

    #[test]
    fn conditional_expectation_contracts(u in values(125), k in 1usize..3) {
        let grid = hermite_cube();
        let u = ScalarField::new(grid.clone(), u).unwrap();
        let eu = lift(&cylindrical_projection(&u, k).unwrap(), &grid).unwrap();
        prop_assert!(eu.norm() <= u.norm() + 1e-12);
        // idempotent
        let again = lift(&cylindrical_projection(&eu, k).unwrap(), &grid).unwrap();
        let diff = again.zip_map(&eu, |a, b| a - b).unwrap();
        prop_assert!(diff.max_abs() <= 1e-12 * (1.0 + eu.max_abs()));
    }

    #[test]
    fn conditional_expectation_keeps_convexity(a in values(3), c in 0.0..2.0f64, b in -1.0..1.0f64) {
        let grid = hermite_cube();
        let u = ScalarField::from_fn(&grid, |x| {
            c * (a[0] * x[0] + a[1] * x[1] + a[2] * x[2] - b).abs() + 0.3 * (x[0] - x[2]).powi(2)
        });
        let tol = ConvexityTolerance::default();
        prop_assert!(check_convexity_field(&u, &tol, 1).passed);
        for k in 1..3 {
            let eu = lift(&cylindrical_projection(&u, k).unwrap(), &grid).unwrap();
            prop_assert!(check_convexity_field(&eu, &tol, 1).passed, "k={}", k);
        }
    }

    #[test]
    fn ou_contracts_convex_energies(phi in values(81), t in 0.01..3.0f64) {
        let grid = hermite_square();
        let ou = OuSemigroup::new(&grid);
        let u = ScalarField::new(grid.clone(), phi).unwrap();
        let tu = ou.apply(&u, t).unwrap();
        for f in integrands_2d().into_iter().filter(Integrand::supports_prox) {
            let before = integrand_energy(&f, &u).unwrap();
            let after = integrand_energy(&f, &tu).unwrap();
            prop_assert!(after <= before + 1e-8, "{}: {} > {}", f.kind_name(), after, before);
        }
    }

    #[test]
    fn fields_csv_round_trips_bit_exactly(g in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 33), u in values(33), phi in values(33)) {
        let grid = uniform_line();
        let g = ScalarField::new(grid.clone(), g).unwrap();
        let u = ScalarField::new(grid.clone(), u).unwrap();
        let phi = VectorField::new(grid.clone(), phi).unwrap();
        let table = read_fields_csv(&write_fields_csv(&g, &u, &phi).unwrap()).unwrap();
        let back_g = table.g_field(&grid).unwrap();
        prop_assert!(back_g.values().iter().zip(g.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert!(table.u_field(&grid).unwrap().values().iter().zip(u.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert!(table.phi_field(&grid).unwrap().values().iter().zip(phi.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert!(table.weight.iter().zip(grid.weights()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Comparison principle: ordered data give ordered minimisers. The data
    /// term makes the energy 1-strongly convex in ℓ²(γ), so each computed
    /// `u` is within `sqrt(2 gap / w_i)` of the exact one at node `i`.
    #[test]
    fn monotone_data_dependence(base in values(3), bump in 0.0..1.0f64, center in -2.0..2.0f64) {
        let grid = uniform_line();
        let g1 = ScalarField::from_fn(&grid, |x| base[0] * x[0] + base[1] * (x[0] - base[2] / 2.0).abs());
        let g2 = ScalarField::from_fn(&grid, |x| {
            g1.interpolate(x) + bump * (1.0 - (x[0] - center).abs()).max(0.0)
        });
        let params = SolverParams { max_iters: 400_000, ..SolverParams::with_tol(1e-14) };
        for f in [Integrand::EuclideanNorm, Integrand::quadratic(1.0).unwrap(), Integrand::power_p(1.5, 1.0).unwrap()] {
            let s1 = solve(&f, &g1, &params).unwrap();
            let s2 = solve(&f, &g2, &params).unwrap();
            let worst = (0..grid.len())
                .map(|i| {
                    let w = grid.weights()[i];
                    let certified = (2.0 * s1.gap.max(0.0) / w).sqrt() + (2.0 * s2.gap.max(0.0) / w).sqrt();
                    s1.u.values()[i] - s2.u.values()[i] - certified
                })
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(worst <= 1e-8, "{}: {}", f.kind_name(), worst);
        }
    }
}
