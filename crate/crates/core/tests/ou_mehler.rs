use gausstv::grid::hermite_eval;
use gausstv::ou::{ou_semigroup, OuSemigroup};
use gausstv::solver::is_interior;
use gausstv::{build_grid, GridSpec, ScalarField};

/// `T_t u(x) = ∫ u(e^{-t}x + √(1 - e^{-2t}) y) dγ(y)` by a composite
/// trapezoid rule on `[-12, 12]`, which tolerates kinks in `u`.
fn mehler(u: impl Fn(f64) -> f64, t: f64, x: f64) -> f64 {
    const STEPS: usize = 12_000;
    let (a, b) = ((-t).exp(), (1.0 - (-2.0 * t).exp()).sqrt());
    let h = 24.0 / STEPS as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    (0..=STEPS)
        .map(|k| {
            let y = -12.0 + k as f64 * h;
            let end = if k == 0 || k == STEPS { 0.5 } else { 1.0 };
            end * h * norm * (-0.5 * y * y).exp() * u(a * x + b * y)
        })
        .sum()
}

type Case = (&'static str, fn(f64) -> f64);

fn interior_error(field: &ScalarField, exact: impl Fn(f64) -> f64) -> f64 {
    let grid = field.grid();
    (0..grid.len())
        .filter(|&i| is_interior(grid, i))
        .map(|i| (field.values()[i] - exact(grid.coordinate(i, 0))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn matches_mehler_formula_on_a_fine_line() {
    let grid = build_grid(&GridSpec::uniform(1, 1601, 8.0)).unwrap();
    let cases: [Case; 4] = [
        ("sin", f64::sin),
        ("abs", f64::abs),
        ("square", |x| x * x),
        ("kink", |x| (x - 0.5).max(0.0)),
    ];
    for (name, u) in cases {
        let field = ScalarField::from_fn(&grid, |x| u(x[0]));
        for t in [0.05, 0.5, 2.0] {
            let tu = ou_semigroup(&field, t).unwrap();
            let err = interior_error(&tu, |x| mehler(u, t, x));
            assert!(err < 2e-3, "{name} t={t}: {err}");
        }
    }
}

#[test]
fn hermite_polynomials_decay_at_their_degree() {
    // exact eigenfunctions of the continuum semigroup: T_t He_k = e^{-kt} He_k
    let grid = build_grid(&GridSpec::uniform(1, 2001, 8.0)).unwrap();
    let ou = OuSemigroup::new(&grid);
    for k in 1..=3 {
        let he = hermite_eval(k, &grid).unwrap();
        let t = 0.7;
        let tu = ou.apply(&he, t).unwrap();
        let decay = (-(k as f64) * t).exp();
        let err = interior_error(&tu, |x| decay * gausstv::grid::hermite(k, x));
        assert!(err < 1e-3, "k={k}: {err}");
    }
}

#[test]
fn semigroup_property_and_small_time_limit() {
    let grid = build_grid(&GridSpec::gauss_hermite(2, 17)).unwrap();
    let ou = OuSemigroup::new(&grid);
    let u = ScalarField::from_fn(&grid, |x| (x[0] - 0.3 * x[1]).sin() + 0.1 * x[1] * x[1]);
    let (s, t) = (0.3, 0.9);
    let two_step = ou.apply(&ou.apply(&u, t).unwrap(), s).unwrap();
    let one_step = ou.apply(&u, s + t).unwrap();
    let diff = two_step.zip_map(&one_step, |a, b| a - b).unwrap();
    assert!(diff.norm() <= 1e-10, "{}", diff.norm());

    let distances: Vec<f64> = (1..=8)
        .map(|k| {
            let tu = ou.apply(&u, 1.0 / k as f64).unwrap();
            tu.zip_map(&u, |a, b| a - b).unwrap().norm()
        })
        .collect();
    assert!(distances.windows(2).all(|p| p[1] < p[0]), "{distances:?}");
}
