use approx::assert_relative_eq;
use gausstv::grid::hermite_normalized;
use gausstv::quadrature::{gauss_hermite, uniform_truncated};
use gausstv::{build_grid, integrate, GridSpec, ScalarField};
use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights from the eigen-decomposition of the Jacobi matrix of
/// the probabilists' Hermite recurrence.
fn golub_welsch(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[test]
fn nodes_and_weights_match_golub_welsch() {
    for n in [2, 5, 16, 40, 64, 100] {
        let (x, w) = gauss_hermite(n);
        let (xo, wo) = golub_welsch(n);
        for k in 0..n {
            assert!((x[k] - xo[k]).abs() <= 1e-10 * (1.0 + xo[k].abs()), "n={n} node {k}");
            // eigenvector entries carry absolute error near machine epsilon
            assert!((w[k] - wo[k]).abs() <= 1e-12 + 1e-8 * wo[k], "n={n} weight {k}: {} vs {}", w[k], wo[k]);
        }
    }
}

fn double_factorial_moment(k: usize) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(|j| j as f64).product()
}

#[test]
fn exact_for_polynomials_up_to_degree_2n_minus_1() {
    for n in [1, 3, 8, 20] {
        let (x, w) = gauss_hermite(n);
        for k in 0..2 * n {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
            let exact = double_factorial_moment(k);
            // odd moments cancel; measure against the absolute moment
            let scale: f64 = x.iter().zip(&w).map(|(x, w)| w * x.abs().powi(k as i32)).sum();
            assert!((got - exact).abs() <= 1e-10 * scale.max(1.0), "n={n} k={k}: {got} vs {exact}");
        }
    }
}

#[test]
fn normalized_hermite_polynomials_are_orthonormal() {
    for n in [10, 33, 65] {
        let (x, w) = gauss_hermite(n);
        let table: Vec<Vec<f64>> = x.iter().map(|&x| hermite_normalized(n - 1, x)).collect();
        for j in 0..n {
            for k in 0..=j {
                let ip: f64 = table.iter().zip(&w).map(|(h, w)| w * h[j] * h[k]).sum();
                let target = if j == k { 1.0 } else { 0.0 };
                assert!((ip - target).abs() <= 1e-8, "n={n} ({j},{k}) = {ip}");
            }
        }
    }
}

#[test]
fn weights_positive_and_mass_normalized() {
    for n in [3, 65, 257] {
        let (_, w) = gauss_hermite(n);
        assert!(w.iter().all(|&w| w > 0.0));
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
        let (_, w) = uniform_truncated(n, 6.0);
        assert!(w.iter().all(|&w| w > 0.0));
        assert!(w.iter().sum::<f64>() <= 1.0 + 1e-15);
    }
    let grid = build_grid(&GridSpec::gauss_hermite(3, 9)).unwrap();
    let one = ScalarField::constant(&grid, 1.0);
    assert_relative_eq!(integrate(&one), 1.0, epsilon = 1e-13);
    let r2 = ScalarField::from_fn(&grid, |x| x.iter().map(|v| v * v).sum());
    assert_relative_eq!(integrate(&r2), 3.0, epsilon = 1e-12);
}
