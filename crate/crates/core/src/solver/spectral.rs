use crate::error::{invalid, Result};
use crate::grid::{hermite_normalized, ScalarField, Scheme};

/// Solves `u + μ L u = g` for the Ornstein–Uhlenbeck generator `L` by a
/// discrete Hermite transform on a Gauss–Hermite grid. Exact for data in
/// the span of `He_k` with `k < n` per axis.
pub fn spectral_solve_quadratic(g: &ScalarField, mu: f64) -> Result<ScalarField> {
    let grid = g.grid();
    if grid.spec().scheme != Scheme::GaussHermite {
        return invalid("the spectral solve needs a Gauss–Hermite grid");
    }
    if !(mu >= 0.0 && mu.is_finite()) {
        return invalid("μ must be nonnegative");
    }
    let m = grid.dimension();
    let n = grid.nodes_per_axis();
    // basis[d][k * n + j] = ψ_k(x_j) on axis d
    let basis: Vec<Vec<f64>> = (0..m)
        .map(|d| {
            let axis = grid.axis(d);
            let mut table = vec![0.0; n * n];
            for (j, &x) in axis.nodes.iter().enumerate() {
                for (k, v) in hermite_normalized(n - 1, x).into_iter().enumerate() {
                    table[k * n + j] = v;
                }
            }
            table
        })
        .collect();

    let mut coeffs = g.values().to_vec();
    for (d, b) in basis.iter().enumerate().take(m) {
        let w = &grid.axis(d).weights;
        apply_axis(grid.stride(d), n, &mut coeffs, |line, out| {
            for (k, o) in out.iter_mut().enumerate().take(n) {
                *o = (0..n).map(|j| w[j] * b[k * n + j] * line[j]).sum();
            }
        });
    }
    for (i, c) in coeffs.iter_mut().enumerate() {
        let degree: usize = grid.multi_index(i).iter().sum();
        *c /= 1.0 + mu * degree as f64;
    }
    for (d, b) in basis.iter().enumerate().take(m) {
        apply_axis(grid.stride(d), n, &mut coeffs, |line, out| {
            for (j, o) in out.iter_mut().enumerate().take(n) {
                *o = (0..n).map(|k| b[k * n + j] * line[k]).sum();
            }
        });
    }
    ScalarField::new(grid.clone(), coeffs)
}

/// Applies a length-`n` linear map to every grid line with the given stride.
fn apply_axis(stride: usize, n: usize, values: &mut [f64], map: impl Fn(&[f64], &mut [f64])) {
    let block = stride * n;
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    for start in (0..values.len()).step_by(block) {
        for offset in 0..stride {
            let base = start + offset;
            for j in 0..n {
                line[j] = values[base + j * stride];
            }
            map(&line, &mut out);
            for j in 0..n {
                values[base + j * stride] = out[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GaussianGrid, GridSpec};

    #[test]
    fn hermite_eigenfunctions() {
        let grid = GaussianGrid::build(&GridSpec::gauss_hermite(1, 33)).unwrap();
        let h1 = ScalarField::coordinate(&grid, 0);
        let u = spectral_solve_quadratic(&h1, 1.0).unwrap();
        // extreme tail nodes carry large basis values and lose a few digits
        for (a, b) in u.values().iter().zip(h1.values()) {
            let tol = if b.abs() <= 6.0 { 1e-10 } else { 1e-7 * b.abs() };
            assert!((a - b / 2.0).abs() < tol, "{a} {b}");
        }
        let h2 = ScalarField::from_fn(&grid, |x| x[0] * x[0] - 1.0);
        let u = spectral_solve_quadratic(&h2, 1.0).unwrap();
        for ((a, b), x) in u.values().iter().zip(h2.values()).zip(&grid.axis(0).nodes) {
            let tol = if x.abs() <= 6.0 { 1e-8 } else { 1e-7 * b.abs() };
            assert!((a - b / 3.0).abs() < tol, "{a} {b}");
        }
    }

    #[test]
    fn two_dimensional_product() {
        let grid = GaussianGrid::build(&GridSpec::gauss_hermite(2, 9)).unwrap();
        let g = ScalarField::from_fn(&grid, |x| x[0] * x[1] + 1.0);
        let u = spectral_solve_quadratic(&g, 1.0).unwrap();
        for i in 0..grid.len() {
            let p = grid.point(i);
            assert!((u.values()[i] - (p[0] * p[1] / 3.0 + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_uniform_grid() {
        let grid = GaussianGrid::build(&GridSpec::uniform(1, 9, 6.0)).unwrap();
        assert!(spectral_solve_quadratic(&ScalarField::constant(&grid, 1.0), 1.0).is_err());
    }
}
