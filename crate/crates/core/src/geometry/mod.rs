//! Sets on uniform grids, Gaussian perimeters, level sets of solutions and
//! the prescribed-curvature and volume-constrained problems built on them.

mod levelsets;
mod problems;

pub use levelsets::{
    extract_level_sets, level_set_optimality_check, LevelSetFamily, LevelSetOptimality, ThresholdCheck,
};
pub(crate) use levelsets::lambda_bar;
pub use problems::{
    classify_minimizer, solve_volume_constrained, solve_volume_constrained_with, wulff_halfspace_check,
    Classification, ClassifyReport, VolumeConstrained, WulffReport, VOLUME_TOL,
};

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::grid::{check_same, GaussianGrid, ScalarField};
use crate::integrands::Integrand;

/// Membership mask on a uniform grid.
#[derive(Debug, Clone)]
pub struct IndicatorSet {
    grid: Arc<GaussianGrid>,
    members: Vec<bool>,
    count: usize,
}

impl IndicatorSet {
    pub fn new(grid: Arc<GaussianGrid>, members: Vec<bool>) -> Result<Self> {
        if !grid.is_uniform() {
            return invalid("sets need a uniform_truncated grid");
        }
        if members.len() != grid.len() {
            return invalid(format!(
                "mask has {} entries for {} nodes",
                members.len(),
                grid.len()
            ));
        }
        let count = members.iter().filter(|&&b| b).count();
        Ok(Self { grid, members, count })
    }

    pub fn from_fn(grid: &Arc<GaussianGrid>, f: impl Fn(&[f64]) -> bool) -> Result<Self> {
        let members = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::new(grid.clone(), members)
    }

    pub fn empty(grid: &Arc<GaussianGrid>) -> Result<Self> {
        Self::new(grid.clone(), vec![false; grid.len()])
    }

    pub fn full(grid: &Arc<GaussianGrid>) -> Result<Self> {
        Self::new(grid.clone(), vec![true; grid.len()])
    }

    /// `{u < λ}`.
    pub fn sublevel(u: &ScalarField, lambda: f64) -> Result<Self> {
        Self::new(u.grid().clone(), u.values().iter().map(|&v| v < lambda).collect())
    }

    pub fn grid(&self) -> &Arc<GaussianGrid> {
        &self.grid
    }

    pub fn members(&self) -> &[bool] {
        &self.members
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_full(&self) -> bool {
        self.count == self.members.len()
    }

    pub fn is_subset_of(&self, other: &IndicatorSet) -> bool {
        self.members.iter().zip(&other.members).all(|(&a, &b)| !a || b)
    }

    fn combine(&self, other: &IndicatorSet, op: impl Fn(bool, bool) -> bool) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        let members = self.members.iter().zip(&other.members).map(|(&a, &b)| op(a, b)).collect();
        Self::new(self.grid.clone(), members)
    }

    pub fn union(&self, other: &IndicatorSet) -> Result<Self> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &IndicatorSet) -> Result<Self> {
        self.combine(other, |a, b| a && b)
    }

    pub fn complement(&self) -> Self {
        let members: Vec<bool> = self.members.iter().map(|b| !b).collect();
        let count = members.len() - self.count;
        Self {
            grid: self.grid.clone(),
            members,
            count,
        }
    }

    pub fn as_field(&self) -> ScalarField {
        ScalarField::from_vec(
            self.grid.clone(),
            self.members.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }
}

/// Visits every grid face `(i, i + stride_d)` with its Gaussian weight:
/// the flux through the axis edge times the transverse node weights.
pub(crate) fn for_each_face(grid: &GaussianGrid, mut visit: impl FnMut(usize, usize, usize, f64)) {
    let n = grid.nodes_per_axis();
    for d in 0..grid.dimension() {
        let axis = grid.axis(d);
        let stride = grid.stride(d);
        for i in 0..grid.len() {
            let j = grid.axis_index(i, d);
            if j + 1 == n {
                continue;
            }
            let transverse = grid.weights()[i] / axis.weights[j];
            visit(d, i, i + stride, axis.flux[j] * transverse);
        }
    }
}

/// `Σ_i w_i` over members.
pub fn volume(set: &IndicatorSet) -> f64 {
    set.members
        .iter()
        .zip(set.grid.weights())
        .filter(|(&b, _)| b)
        .map(|(_, w)| w)
        .sum()
}

/// Face total variation `Σ_faces weight · |jump|`, each face optionally
/// scaled by `F(e_d)`.
pub fn face_total_variation(u: &ScalarField, f: Option<&Integrand>) -> Result<f64> {
    let grid = u.grid();
    let factors = axis_factors(f, grid.dimension())?;
    let v = u.values();
    let mut total = 0.0;
    for_each_face(grid, |d, a, b, w| total += factors[d] * w * (v[b] - v[a]).abs());
    Ok(total)
}

fn axis_factors(f: Option<&Integrand>, dim: usize) -> Result<Vec<f64>> {
    let Some(f) = f else {
        return Ok(vec![1.0; dim]);
    };
    if !f.is_one_homogeneous() {
        return invalid(format!("{} is not one-homogeneous", f.kind_name()));
    }
    f.check_dimension(dim)?;
    Ok((0..dim)
        .map(|d| {
            let mut e = vec![0.0; dim];
            e[d] = 1.0;
            f.evaluate(&e)
        })
        .collect())
}

/// Gaussian perimeter: total variation of the indicator.
pub fn perimeter_gamma(set: &IndicatorSet) -> f64 {
    let mut total = 0.0;
    for_each_face(&set.grid, |_, a, b, w| {
        if set.members[a] != set.members[b] {
            total += w;
        }
    });
    total
}

/// `P_F(E)`: each boundary face weighted by `F` of its normal.
pub fn anisotropic_perimeter(f: &Integrand, set: &IndicatorSet) -> Result<f64> {
    let factors = axis_factors(Some(f), set.grid.dimension())?;
    let mut total = 0.0;
    for_each_face(&set.grid, |d, a, b, w| {
        if set.members[a] != set.members[b] {
            total += factors[d] * w;
        }
    });
    Ok(total)
}

/// `P_γ(E) + Σ_{i∈E} w_i (g_i - λ)`.
pub fn curvature_energy(set: &IndicatorSet, g: &ScalarField, lambda: f64) -> Result<f64> {
    check_same(&set.grid, g.grid())?;
    let bulk: f64 = (0..set.members.len())
        .filter(|&i| set.members[i])
        .map(|i| set.grid.weights()[i] * (g.values()[i] - lambda))
        .sum();
    Ok(perimeter_gamma(set) + bulk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::quadrature::density;

    fn line() -> Arc<GaussianGrid> {
        GaussianGrid::build(&GridSpec::uniform(1, 4001, 6.0)).unwrap()
    }

    #[test]
    fn half_line_perimeters() {
        let grid = line();
        let left = IndicatorSet::from_fn(&grid, |x| x[0] < 0.0).unwrap();
        assert!((perimeter_gamma(&left) - density(0.0)).abs() < 1e-3);
        assert!((volume(&left) - 0.5).abs() < 1e-3);
        let shifted = IndicatorSet::from_fn(&grid, |x| x[0] < 1.0).unwrap();
        assert!((perimeter_gamma(&shifted) - density(1.0)).abs() < 1e-3);
        assert_eq!(perimeter_gamma(&IndicatorSet::full(&grid).unwrap()), 0.0);
    }

    #[test]
    fn energy_of_half_line() {
        let grid = line();
        let left = IndicatorSet::from_fn(&grid, |x| x[0] < 0.0).unwrap();
        let g = ScalarField::constant(&grid, 0.0);
        let e = curvature_energy(&left, &g, 1.0).unwrap();
        assert!((e - (density(0.0) - 0.5)).abs() < 1e-3);
    }

    #[test]
    fn anisotropic_faces() {
        let grid = GaussianGrid::build(&GridSpec::uniform(2, 101, 6.0)).unwrap();
        let set = IndicatorSet::from_fn(&grid, |x| x[0] < 0.0).unwrap();
        let f = Integrand::anisotropic_norm(vec![1.0, 4.0]).unwrap();
        let p = perimeter_gamma(&set);
        assert!((anisotropic_perimeter(&f, &set).unwrap() - p).abs() < 1e-12);
        let rotated = IndicatorSet::from_fn(&grid, |x| x[1] < 0.0).unwrap();
        assert!((anisotropic_perimeter(&f, &rotated).unwrap() - 2.0 * p).abs() < 1e-10);
        assert!(anisotropic_perimeter(&Integrand::quadratic(1.0).unwrap(), &set).is_err());
    }

    #[test]
    fn rejects_gauss_hermite() {
        let grid = GaussianGrid::build(&GridSpec::gauss_hermite(1, 9)).unwrap();
        assert!(IndicatorSet::empty(&grid).is_err());
    }
}
