use serde::Serialize;

use super::levelsets::lambda_bar;
use super::{anisotropic_perimeter, curvature_energy, perimeter_gamma, volume, IndicatorSet};
use crate::error::{invalid, Error, Result};
use crate::grid::{GaussianGrid, ScalarField};
use crate::integrands::Integrand;
use crate::quadrature::{density, normal_quantile};
use crate::solver::{solve, Solution, SolverParams};

/// Default tolerance on the volume of the constrained solution.
pub const VOLUME_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct VolumeConstrained {
    pub set: IndicatorSet,
    pub lambda: f64,
    pub volume: f64,
    pub perimeter: f64,
    pub lambda_bar: f64,
    pub v_bar: f64,
    /// Constant data was tilted by `2x₁` to select a direction.
    pub tilted: bool,
    pub solution: Solution,
}

pub fn solve_volume_constrained(g: &ScalarField, v: f64, params: &SolverParams) -> Result<VolumeConstrained> {
    solve_volume_constrained_with(g, v, &Integrand::EuclideanNorm, params, VOLUME_TOL)
}

/// Solves the scalar problem once and picks the sublevel set `{u < λ}`
/// whose volume is closest to `v`, searching by bisection over the sorted
/// node values.
pub fn solve_volume_constrained_with(
    g: &ScalarField,
    v: f64,
    f: &Integrand,
    params: &SolverParams,
    vol_tol: f64,
) -> Result<VolumeConstrained> {
    let grid = g.grid();
    if !grid.is_uniform() {
        return invalid("the volume-constrained problem needs a uniform_truncated grid");
    }
    if !(v > 0.0 && v < 1.0) {
        return invalid("target volume must lie in (0, 1)");
    }
    let spread = g.max() - g.min();
    let tilted = spread <= 1e-14 * (1.0 + g.max_abs());
    let data = if tilted {
        ScalarField::from_fn(grid, |x| g.values()[0] + 2.0 * x[0])
    } else {
        g.clone()
    };
    let solution = solve(f, &data, params)?;
    let u = &solution.u;
    let (lbar, vbar) = lambda_bar(u);
    if v <= vbar {
        return Err(Error::VolumeOutOfRange {
            requested: v,
            lower: vbar,
        });
    }

    let w = grid.weights();
    let mut order: Vec<usize> = (0..u.len()).collect();
    order.sort_by(|&a, &b| u.values()[a].total_cmp(&u.values()[b]));
    // levels[k]: k-th distinct value; below[k]: mass strictly below it
    let mut levels = Vec::new();
    let mut below = Vec::new();
    let mut mass = 0.0;
    let mut k = 0;
    while k < order.len() {
        let level = u.values()[order[k]];
        levels.push(level);
        below.push(mass);
        while k < order.len() && u.values()[order[k]] == level {
            mass += w[order[k]];
            k += 1;
        }
    }
    levels.push(u.max() + grid.max_spacing());
    below.push(mass);
    if mass < v - vol_tol {
        return Err(Error::TruncationRadius { requested: v });
    }
    let (mut lo, mut hi) = (0, below.len() - 1);
    if below[hi] < v {
        lo = hi;
    } else {
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if below[mid] >= v {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let pick = if (below[lo] - v).abs() <= (below[hi] - v).abs() { lo } else { hi };
    let achieved = below[pick];
    if (achieved - v).abs() > vol_tol {
        return Err(Error::VolumeNotResolved {
            requested: v,
            achieved,
            tol: vol_tol,
        });
    }
    let lambda = levels[pick];
    let set = IndicatorSet::sublevel(u, lambda)?;
    Ok(VolumeConstrained {
        perimeter: perimeter_gamma(&set),
        volume: volume(&set),
        set,
        lambda,
        lambda_bar: lbar,
        v_bar: vbar,
        tilted,
        solution,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    /// `λ̄ < 0`: the minimiser is the nonempty convex set `{u < 0}`.
    A,
    /// `λ̄ ≥ 0`: at most one nonempty minimiser.
    B,
}

#[derive(Debug, Clone)]
pub struct ClassifyReport {
    pub case: Classification,
    pub lambda_bar: f64,
    pub v_bar: f64,
    pub min_value: f64,
    pub minimizer: Option<IndicatorSet>,
    /// Candidates `(name, energy)` within the slack of the minimum.
    pub optimal_candidates: Vec<(String, f64)>,
    pub solution: Solution,
}

/// Minimises `P_γ(E) + ∫_E g dγ` through the sublevel sets of the
/// scalar minimiser.
pub fn classify_minimizer(g: &ScalarField, params: &SolverParams, slack: f64) -> Result<ClassifyReport> {
    let grid = g.grid();
    if !grid.is_uniform() {
        return invalid("classification needs a uniform_truncated grid");
    }
    let solution = solve(&Integrand::EuclideanNorm, g, params)?;
    let u = &solution.u;
    let (lbar, vbar) = lambda_bar(u);
    let candidates = [
        ("empty".to_string(), IndicatorSet::empty(grid)?),
        ("{u < 0}".to_string(), IndicatorSet::sublevel(u, 0.0)?),
        (
            "{u <= 0}".to_string(),
            IndicatorSet::new(grid.clone(), u.values().iter().map(|&x| x <= 0.0).collect())?,
        ),
        ("full".to_string(), IndicatorSet::full(grid)?),
    ];
    let energies = candidates
        .iter()
        .map(|(_, s)| curvature_energy(s, g, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let min_value = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let optimal: Vec<(String, f64)> = candidates
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| e <= min_value + slack)
        .map(|((name, _), &e)| (name.clone(), e))
        .collect();
    let case = if lbar < 0.0 { Classification::A } else { Classification::B };
    // Case A: the strict sublevel set. Case B: the first non-empty optimal candidate.
    let minimizer = match case {
        Classification::A => Some(candidates[1].1.clone()),
        Classification::B => candidates
            .iter()
            .zip(&energies)
            .find(|((_, set), &e)| !set.is_empty() && e <= min_value + slack)
            .map(|((_, set), _)| set.clone()),
    };
    Ok(ClassifyReport {
        case,
        lambda_bar: lbar,
        v_bar: vbar,
        min_value,
        minimizer,
        optimal_candidates: optimal,
        solution,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WulffReport {
    /// `F(ν_min) φ(Φ⁻¹(v))`.
    pub value: f64,
    pub nu_min: Vec<f64>,
    /// Continuum half-space values `F(ν) φ(Φ⁻¹(v))` for sampled `ν`.
    pub direction_values: Vec<(Vec<f64>, f64)>,
    /// Discrete `P_F` of the coordinate half-spaces with volume near `v`.
    pub axis_values: Vec<f64>,
    pub selected_axis: usize,
    /// Smallest `P_F(E) - F(ν_min) φ(Φ⁻¹(γ(E)))` over the perturbation family.
    pub worst_margin: f64,
    pub slack: f64,
    pub passed: bool,
    /// The spherical infimum of `F` is attained, so a half-space minimiser
    /// exists; always true for the built-in kinds.
    pub minimizer_attained: bool,
}

fn axis_halfspace(grid: &std::sync::Arc<GaussianGrid>, d: usize, v: f64) -> Result<IndicatorSet> {
    let axis = grid.axis(d);
    let transverse = grid.mass() / axis.weights.iter().sum::<f64>();
    let mut best = (0, f64::INFINITY);
    let mut acc = 0.0;
    for k in 0..=axis.len() {
        if (acc * transverse - v).abs() < best.1 {
            best = (k, (acc * transverse - v).abs());
        }
        if k < axis.len() {
            acc += axis.weights[k];
        }
    }
    let k = best.0;
    IndicatorSet::new(grid.clone(), (0..grid.len()).map(|i| grid.axis_index(i, d) < k).collect())
}

/// Checks the half-space normal to the minimising direction of `F`
/// against sampled directions and a family of discrete competitors.
pub fn wulff_halfspace_check(f: &Integrand, v: f64, grid: &std::sync::Arc<GaussianGrid>) -> Result<WulffReport> {
    if !(v > 0.0 && v < 1.0) {
        return invalid("target volume must lie in (0, 1)");
    }
    if !grid.is_uniform() {
        return invalid("the Wulff check needs a uniform_truncated grid");
    }
    let m = grid.dimension();
    f.check_dimension(m)?;
    let (fmin, nu_min) = f.spherical_minimum(m)?;
    let level = normal_quantile(v);
    let value = fmin * density(level);

    let mut direction_values = Vec::new();
    let samples = if m == 1 { 2 } else { 64 };
    for s in 0..samples {
        let mut nu = vec![0.0; m];
        if m == 1 {
            nu[0] = if s == 0 { 1.0 } else { -1.0 };
        } else {
            let theta = std::f64::consts::TAU * s as f64 / samples as f64;
            nu[0] = theta.cos();
            nu[1] = theta.sin();
        }
        direction_values.push((nu.clone(), f.evaluate(&nu) * density(level)));
    }

    let axis_sets = (0..m)
        .map(|d| axis_halfspace(grid, d, v))
        .collect::<Result<Vec<_>>>()?;
    let axis_values = axis_sets
        .iter()
        .map(|s| anisotropic_perimeter(f, s))
        .collect::<Result<Vec<_>>>()?;
    let selected_axis = axis_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (d, &p)| if p < acc.1 { (d, p) } else { acc })
        .0;

    let h = grid.max_spacing();
    let mut family: Vec<IndicatorSet> = axis_sets.clone();
    let d = selected_axis;
    let cut = normal_quantile(v);
    for shift in [-5.0, -2.0, 2.0, 5.0] {
        for radius in [0.5, 1.0, 2.0] {
            family.push(IndicatorSet::from_fn(grid, |x| {
                let bump = if m > 1 && x[(d + 1) % m].abs() < radius { shift * h } else { 0.0 };
                let bump = if m == 1 && (x[d] - cut).abs() < radius { shift * h } else { bump };
                x[d] < cut + bump
            })?);
        }
    }
    let slab = normal_quantile(0.5 + 0.5 * v);
    family.push(IndicatorSet::from_fn(grid, |x| x[d].abs() < slab)?);
    if m > 1 {
        for s in 1..16 {
            let theta = std::f64::consts::PI * s as f64 / 16.0;
            let (c, sn) = (theta.cos(), theta.sin());
            family.push(IndicatorSet::from_fn(grid, |x| c * x[0] + sn * x[1] < cut)?);
        }
    }
    let mut worst_margin = f64::INFINITY;
    for set in &family {
        let vol = volume(set);
        if vol <= 0.0 || vol >= grid.mass() {
            continue;
        }
        let bound = fmin * density(normal_quantile(vol.min(1.0 - 1e-15)));
        worst_margin = worst_margin.min(anisotropic_perimeter(f, set)? - bound);
    }
    let slack = h * fmin;
    Ok(WulffReport {
        value,
        nu_min,
        direction_values,
        axis_values,
        selected_axis,
        worst_margin,
        slack,
        passed: worst_margin >= -slack,
        minimizer_attained: true,
    })
}
