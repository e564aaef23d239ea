//! Gradient, Gaussian divergence and cylindrical projection on a grid.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::grid::{check_same, GaussianGrid, GridSpec, Pairing, ScalarField, VectorField};

/// Nodes joined by the one-sided difference of axis `d` at node `i`.
#[inline]
pub(crate) fn stencil(grid: &GaussianGrid, i: usize, d: usize) -> (usize, usize, f64) {
    let n = grid.nodes_per_axis();
    let j = grid.axis_index(i, d);
    let s = grid.stride(d);
    let axis = grid.axis(d);
    if j + 1 < n {
        (i, i + s, axis.spacing[j])
    } else {
        (i - s, i, axis.spacing[n - 2])
    }
}

/// Forward differences, backward on the last node of each axis.
pub(crate) fn gradient_into(grid: &GaussianGrid, u: &[f64], out: &mut [f64]) {
    let m = grid.dimension();
    for i in 0..grid.len() {
        for d in 0..m {
            let (lo, hi, h) = stencil(grid, i, d);
            out[i * m + d] = (u[hi] - u[lo]) / h;
        }
    }
}

/// Negative adjoint of [`gradient_into`] with respect to the scalar and
/// vector pairings. `scale` multiplies component `(i, d)` first; pass
/// `None` for the plain operator.
pub(crate) fn divergence_into(
    grid: &GaussianGrid,
    phi: &[f64],
    scale: Option<&[f64]>,
    out: &mut [f64],
) {
    let m = grid.dimension();
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..grid.len() {
        for d in 0..m {
            let k = i * m + d;
            let (lo, hi, h) = stencil(grid, i, d);
            let mut a = grid.dual_weight(i, d) * phi[k] / h;
            if let Some(s) = scale {
                a *= s[k];
            }
            out[lo] += a;
            out[hi] -= a;
        }
    }
    for (v, w) in out.iter_mut().zip(grid.weights()) {
        *v /= w;
    }
}

pub fn gradient(u: &ScalarField) -> VectorField {
    let grid = u.grid();
    let mut out = vec![0.0; grid.len() * grid.dimension()];
    gradient_into(grid, u.values(), &mut out);
    VectorField::from_vec(grid.clone(), out)
}

/// Gaussian divergence `div Φ - ⟨x, Φ⟩`, realised as the exact negative
/// adjoint of [`gradient`].
pub fn divergence_gamma(phi: &VectorField) -> ScalarField {
    let grid = phi.grid();
    let mut out = vec![0.0; grid.len()];
    divergence_into(grid, phi.values(), None, &mut out);
    ScalarField::from_vec(grid.clone(), out)
}

/// `|⟨∇u, Φ⟩ + ⟨u, div_γ Φ⟩|`.
pub fn adjoint_residual(u: &ScalarField, phi: &VectorField) -> Result<f64> {
    check_same(u.grid(), phi.grid())?;
    let lhs = gradient(u).pair(phi)?;
    let rhs = u.pair(&divergence_gamma(phi))?;
    Ok((lhs + rhs).abs())
}

/// Conditional expectation onto the first `k` coordinates. The result
/// lives on the `k`-dimensional grid with the same axis rule.
pub fn cylindrical_projection(u: &ScalarField, k: usize) -> Result<ScalarField> {
    let grid = u.grid();
    let m = grid.dimension();
    if k == 0 || k >= m {
        return invalid(format!("projection order {k} must satisfy 1 ≤ k < {m}"));
    }
    let spec = GridSpec {
        dimension: k,
        ..grid.spec().clone()
    };
    let sub = GaussianGrid::build(&spec)?;
    let block = grid.stride(k - 1);
    let trailing: Vec<f64> = (0..block)
        .map(|j| {
            (k..m)
                .map(|d| grid.axis(d).weights[grid.axis_index(j, d)])
                .product()
        })
        .collect();
    let mass: f64 = trailing.iter().sum();
    let values = (0..sub.len())
        .map(|outer| {
            let base = outer * block;
            trailing
                .iter()
                .enumerate()
                .map(|(j, w)| w * u.values()[base + j])
                .sum::<f64>()
                / mass
        })
        .collect();
    Ok(ScalarField::from_vec(sub, values))
}

/// Extends a field on the leading-`k` grid to `target`, constant along
/// the remaining axes.
pub fn lift(u: &ScalarField, target: &Arc<GaussianGrid>) -> Result<ScalarField> {
    let k = u.grid().dimension();
    let m = target.dimension();
    if k > m || u.grid().nodes_per_axis() != target.nodes_per_axis() {
        return invalid("cannot lift onto a grid of lower dimension or different resolution");
    }
    if k == m {
        check_same(u.grid(), target)?;
        return Ok(u.clone());
    }
    let block = target.stride(k - 1);
    let values = (0..target.len()).map(|i| u.values()[i / block]).collect();
    Ok(ScalarField::from_vec(target.clone(), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_of_affine_is_exact() {
        let g = GaussianGrid::build(&GridSpec::gauss_hermite(2, 9)).unwrap();
        let u = ScalarField::from_fn(&g, |x| 2.0 * x[0] - 3.0 * x[1] + 1.0);
        let du = gradient(&u);
        for i in 0..g.len() {
            assert!((du.at(i)[0] - 2.0).abs() < 1e-12);
            assert!((du.at(i)[1] + 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_unit_field_is_minus_x_in_1d() {
        for spec in [GridSpec::gauss_hermite(1, 65), GridSpec::uniform(1, 101, 6.0)] {
            let g = GaussianGrid::build(&spec).unwrap();
            let phi = VectorField::constant(&g, &[1.0]).unwrap();
            let div = divergence_gamma(&phi);
            for i in 0..g.len() {
                let x = g.coordinate(i, 0);
                assert!((div.values()[i] + x).abs() < 1e-9 * (1.0 + x.abs()), "{x}");
            }
        }
    }

    #[test]
    fn two_point_hand_values() {
        let g = GaussianGrid::build(&GridSpec::gauss_hermite(1, 2)).unwrap();
        let u = ScalarField::from_fn(&g, |x| x[0] * x[0]);
        assert_eq!(gradient(&u).values()[0], 0.0);
    }

    #[test]
    fn projection_and_lift() {
        let g = GaussianGrid::build(&GridSpec::gauss_hermite(2, 7)).unwrap();
        let u = ScalarField::from_fn(&g, |x| x[0] + x[1] * x[1]);
        let p = cylindrical_projection(&u, 1).unwrap();
        for i in 0..p.len() {
            let x = p.grid().coordinate(i, 0);
            assert!((p.values()[i] - x - 1.0).abs() < 1e-12);
        }
        let back = lift(&p, &g).unwrap();
        assert_eq!(back.len(), g.len());
        assert!(cylindrical_projection(&u, 2).is_err());
    }
}
