use serde::Serialize;

use super::{curvature_energy, volume, IndicatorSet};
use crate::error::{invalid, Result};
use crate::grid::{check_same, GaussianGrid, GridSpec, ScalarField};
use crate::verify::brute_force_interval_oracle;

/// Volume below which a sublevel set counts as empty when locating `λ̄`.
pub const EMPTY_VOLUME: f64 = 1e-9;

/// Sublevel sets `E_λ = {u < λ}` for sorted thresholds.
#[derive(Debug, Clone)]
pub struct LevelSetFamily {
    pub source: ScalarField,
    pub thresholds: Vec<f64>,
    pub sets: Vec<IndicatorSet>,
    pub volumes: Vec<f64>,
    /// `inf{λ : γ(E_λ) > 0}`.
    pub lambda_bar: f64,
    /// `γ({u ≤ λ̄})`.
    pub v_bar: f64,
}

impl LevelSetFamily {
    pub fn is_nested(&self) -> bool {
        self.sets.windows(2).all(|p| p[0].is_subset_of(&p[1]))
    }

    /// `w(x) = min{λ_k : u(x) < λ_k}`, `None` above the last threshold.
    pub fn reconstruction(&self) -> Vec<Option<f64>> {
        (0..self.source.len())
            .map(|i| {
                self.sets
                    .iter()
                    .zip(&self.thresholds)
                    .find(|(set, _)| set.contains(i))
                    .map(|(_, &l)| l)
            })
            .collect()
    }
}

/// Resamples onto a uniform grid of the same dimension when needed.
fn on_uniform(u: &ScalarField) -> Result<ScalarField> {
    if u.grid().is_uniform() {
        return Ok(u.clone());
    }
    let spec = GridSpec::uniform(u.grid().dimension(), 2 * u.grid().nodes_per_axis() + 1, 6.0);
    let grid = GaussianGrid::build(&spec)?;
    Ok(ScalarField::from_fn(&grid, |x| u.interpolate(x)))
}

/// `λ̄` and `v̄` of a field: the smallest node value whose closed
/// sublevel set has positive mass.
pub(crate) fn lambda_bar(u: &ScalarField) -> (f64, f64) {
    let w = u.grid().weights();
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u.values()[a].total_cmp(&u.values()[b]));
    let mut mass = 0.0;
    let mut k = 0;
    while k < order.len() {
        let level = u.values()[order[k]];
        while k < order.len() && u.values()[order[k]] == level {
            mass += w[order[k]];
            k += 1;
        }
        if mass > EMPTY_VOLUME {
            return (level, mass);
        }
    }
    (f64::INFINITY, mass)
}

pub fn extract_level_sets(u: &ScalarField, thresholds: &[f64]) -> Result<LevelSetFamily> {
    if thresholds.is_empty() {
        return invalid("at least one threshold is required");
    }
    if thresholds.iter().any(|t| !t.is_finite()) {
        return invalid("thresholds must be finite");
    }
    let u = on_uniform(u)?;
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let sets = sorted
        .iter()
        .map(|&l| IndicatorSet::sublevel(&u, l))
        .collect::<Result<Vec<_>>>()?;
    let volumes = sets.iter().map(volume).collect();
    let (lambda_bar, v_bar) = lambda_bar(&u);
    let family = LevelSetFamily {
        source: u,
        thresholds: sorted,
        sets,
        volumes,
        lambda_bar,
        v_bar,
    };
    assert!(family.is_nested(), "sublevel sets must be nested");
    Ok(family)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdCheck {
    pub lambda: f64,
    pub energy: f64,
    pub oracle_energy: f64,
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSetOptimality {
    pub checks: Vec<ThresholdCheck>,
    pub worst_excess: f64,
    /// `max |w - u|` over nodes below the last threshold.
    pub reconstruction_error: f64,
    pub threshold_spacing: f64,
    pub spacing: f64,
}

/// Compares each `E_λ` with the best interval for problem `(P_λ)`.
pub fn level_set_optimality_check(family: &LevelSetFamily, g: &ScalarField) -> Result<LevelSetOptimality> {
    let grid = family.source.grid();
    if grid.dimension() != 1 {
        return invalid("the interval oracle is only available in one dimension");
    }
    check_same(grid, g.grid())?;
    let mut checks = Vec::with_capacity(family.sets.len());
    let mut worst: f64 = f64::NEG_INFINITY;
    for (set, &lambda) in family.sets.iter().zip(&family.thresholds) {
        let energy = curvature_energy(set, g, lambda)?;
        let (_, oracle_energy) = brute_force_interval_oracle(g, lambda)?;
        let excess = energy - oracle_energy;
        worst = worst.max(excess);
        checks.push(ThresholdCheck {
            lambda,
            energy,
            oracle_energy,
            excess,
        });
    }
    let spacing = family
        .thresholds
        .windows(2)
        .map(|p| p[1] - p[0])
        .fold(0.0, f64::max);
    let first = family.thresholds[0];
    let recon = family
        .reconstruction()
        .iter()
        .zip(family.source.values())
        .filter_map(|(w, &u)| w.filter(|_| u >= first).map(|w| (w - u).abs()))
        .fold(0.0, f64::max);
    Ok(LevelSetOptimality {
        checks,
        worst_excess: worst,
        reconstruction_error: recon,
        threshold_spacing: spacing,
        spacing: grid.max_spacing(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::normal_cdf;

    #[test]
    fn identity_levels() {
        let grid = GaussianGrid::build(&GridSpec::uniform(1, 2001, 6.0)).unwrap();
        let u = ScalarField::coordinate(&grid, 0);
        let fam = extract_level_sets(&u, &[1.0, -1.0, 0.0]).unwrap();
        assert_eq!(fam.thresholds, vec![-1.0, 0.0, 1.0]);
        for (v, t) in fam.volumes.iter().zip(&fam.thresholds) {
            assert!((v - normal_cdf(*t)).abs() < 3e-3);
        }
        assert!(fam.is_nested());
        assert!(fam.lambda_bar > -6.0 && fam.lambda_bar < -5.5 && fam.v_bar > EMPTY_VOLUME);
    }

    #[test]
    fn constant_levels() {
        let grid = GaussianGrid::build(&GridSpec::uniform(1, 51, 6.0)).unwrap();
        let u = ScalarField::constant(&grid, 0.3);
        let fam = extract_level_sets(&u, &[0.3, 0.31]).unwrap();
        assert!(fam.sets[0].is_empty() && fam.sets[1].is_full());
        assert_eq!(fam.lambda_bar, 0.3);
        assert!(extract_level_sets(&u, &[]).is_err());
    }
}
