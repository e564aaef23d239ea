//! Property checkers and independent oracles.

mod convexity;
mod suite;

pub use convexity::{
    check_convexity_field, check_convexity_set, ConvexityReport, ConvexityTolerance, SetConvexityReport,
};
pub use suite::{run_criterion, verify_all, CriterionResult, SuiteReport, CRITERIA, DEFAULT_SEED};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::calculus::{divergence_into, gradient_into};
use crate::error::{invalid, Result};
use crate::geometry::{face_total_variation, for_each_face, IndicatorSet};
use crate::grid::{GaussianGrid, ScalarField};
use crate::integrands::Integrand;
use crate::ou::OuSemigroup;
use crate::solver::{integrand_energy, primal_energy};

#[derive(Debug, Clone, Serialize)]
pub struct CoareaReport {
    pub total_variation: f64,
    pub level_integral: f64,
    pub relative_residual: f64,
    pub samples: usize,
}

/// Face total variation of `u` against the midpoint rule in `t` for
/// `∫ P({u > t}) dt`, optionally with the anisotropic perimeter.
pub fn coarea_check(u: &ScalarField, t_samples: usize, f: Option<&Integrand>) -> Result<CoareaReport> {
    let grid = u.grid();
    if !grid.is_uniform() {
        return invalid("the coarea check needs a uniform_truncated grid");
    }
    if t_samples == 0 {
        return invalid("at least one t-sample is required");
    }
    let tv = face_total_variation(u, f)?;
    let factors: Vec<f64> = (0..grid.dimension())
        .map(|d| {
            let mut e = vec![0.0; grid.dimension()];
            e[d] = 1.0;
            f.map_or(1.0, |f| f.evaluate(&e))
        })
        .collect();
    let (lo, hi) = (u.min(), u.max());
    let dt = (hi - lo) / t_samples as f64;
    let mut integral = 0.0;
    if dt > 0.0 {
        let v = u.values();
        let mut faces = Vec::new();
        for_each_face(grid, |d, a, b, w| {
            if v[a] != v[b] {
                faces.push((v[a].min(v[b]), v[a].max(v[b]), factors[d] * w));
            }
        });
        for k in 0..t_samples {
            let t = lo + (k as f64 + 0.5) * dt;
            let perimeter: f64 = faces
                .iter()
                .filter(|(a, b, _)| *a <= t && t < *b)
                .map(|(_, _, w)| w)
                .sum();
            integral += perimeter * dt;
        }
    }
    let relative_residual = if tv == 0.0 && integral == 0.0 {
        0.0
    } else {
        (tv - integral).abs() / tv.max(integral)
    };
    Ok(CoareaReport {
        total_variation: tv,
        level_integral: integral,
        relative_residual,
        samples: t_samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RepresentationReport {
    pub energy: f64,
    /// Best `⟨Φ, ∇u⟩ - Σ F*(Φ)` over the random step fields.
    pub best_random_bound: f64,
    pub violations: usize,
    pub worst_excess: f64,
    pub trials: usize,
    /// Value reached by dual ascent in `Φ` alone.
    pub ascent_value: f64,
    pub ascent_gap: f64,
    pub seed: u64,
}

/// Pairing `Σ ω Φ ∇u` and the weights it uses for `F*`, matching the
/// solver's discrete energy.
struct DualPairing {
    omega: Vec<f64>,
    scale: Vec<f64>,
    separable: bool,
}

impl DualPairing {
    fn new(grid: &GaussianGrid, f: &Integrand) -> Self {
        let m = grid.dimension();
        let separable = f.is_separable() || m == 1;
        let mut omega = vec![0.0; grid.len() * m];
        let mut scale = vec![1.0; grid.len() * m];
        for i in 0..grid.len() {
            for d in 0..m {
                omega[i * m + d] = grid.dual_weight(i, d);
                if !separable {
                    scale[i * m + d] = omega[i * m + d] / grid.weights()[i];
                }
            }
        }
        Self { omega, scale, separable }
    }

    /// `Σ F*(Φ)` with the weights matching the energy.
    fn conj_sum(&self, grid: &GaussianGrid, f: &Integrand, phi: &[f64]) -> f64 {
        let m = grid.dimension();
        (0..grid.len())
            .map(|i| {
                if self.separable {
                    (0..m)
                        .map(|d| self.omega[i * m + d] * f.conjugate(&[phi[i * m + d]]))
                        .sum()
                } else {
                    grid.weights()[i] * f.conjugate(&phi[i * m..(i + 1) * m])
                }
            })
            .sum()
    }

    /// `⟨Φ, ∇u⟩_ω - Σ F*(Φ)`.
    fn lower_bound(&self, grid: &GaussianGrid, f: &Integrand, phi: &[f64], grad: &[f64]) -> f64 {
        let pairing: f64 = (0..phi.len()).map(|k| self.omega[k] * phi[k] * grad[k]).sum();
        pairing - self.conj_sum(grid, f, phi)
    }

    /// In-place `prox_{σF*}` blockwise.
    fn prox(&self, f: &Integrand, m: usize, sigma: f64, phi: &mut [f64]) {
        if self.separable {
            for v in phi.iter_mut() {
                *v = f.prox_conjugate_vec(sigma, &[*v])[0];
            }
        } else {
            for block in phi.chunks_mut(m) {
                f.prox_conjugate_in_place(sigma, block);
            }
        }
    }
}

/// Random piecewise-constant dual fields never beat `Σ F(∇u)`, and dual
/// ascent in `Φ` alone closes the gap.
pub fn representation_lower_bound_check(
    f: &Integrand,
    u: &ScalarField,
    trials: usize,
    seed: u64,
    gap_tol: f64,
) -> Result<RepresentationReport> {
    let grid = u.grid();
    let m = grid.dimension();
    f.check_dimension(m)?;
    if !f.supports_prox() {
        return invalid(format!("{} has no proximal map", f.kind_name()));
    }
    let energy = integrand_energy(f, u)?;
    let pairing = DualPairing::new(grid, f);
    let mut grad = vec![0.0; grid.len() * m];
    gradient_into(grid, u.values(), &mut grad);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.nodes_per_axis();
    let mut best = f64::NEG_INFINITY;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut phi = vec![0.0; grid.len() * m];
    for _ in 0..trials {
        // random cells: each axis cut at a few random positions
        let pieces = rng.random_range(1..=4usize);
        let cuts: Vec<Vec<usize>> = (0..m)
            .map(|_| {
                let mut c: Vec<usize> = (0..pieces - 1).map(|_| rng.random_range(1..n)).collect();
                c.sort_unstable();
                c
            })
            .collect();
        let cells = pieces.pow(m as u32);
        let scale: f64 = rng.random_range(0.1..3.0);
        let values: Vec<Vec<f64>> = (0..cells)
            .map(|_| {
                let raw: Vec<f64> = (0..m).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
                f.prox_conjugate_vec(1.0, &raw)
            })
            .collect();
        for i in 0..grid.len() {
            let mut cell = 0;
            for (d, c) in cuts.iter().enumerate() {
                let j = grid.axis_index(i, d);
                cell = cell * pieces + c.iter().filter(|&&x| x <= j).count();
            }
            let value = &values[cell];
            for d in 0..m {
                phi[i * m + d] = if pairing.separable && m > 1 {
                    f.prox_conjugate_vec(1.0, &[value[d]])[0]
                } else {
                    value[d]
                };
            }
        }
        let bound = pairing.lower_bound(grid, f, &phi, &grad);
        best = best.max(bound);
        let excess = bound - energy;
        worst_excess = worst_excess.max(excess);
        if excess > 1e-10 * (1.0 + energy.abs()) {
            violations += 1;
        }
    }

    // ascent on Φ ↦ ⟨Φ, ∇u⟩ - F*(Φ) with growing steps
    let mut ascent = vec![0.0; grid.len() * m];
    let mut ascent_value = pairing.lower_bound(grid, f, &ascent, &grad);
    let mut sigma = 1.0;
    for _ in 0..200 {
        for k in 0..ascent.len() {
            ascent[k] += sigma * pairing.scale[k] * grad[k];
        }
        pairing.prox(f, m, sigma, &mut ascent);
        ascent_value = pairing.lower_bound(grid, f, &ascent, &grad);
        if energy - ascent_value <= gap_tol * (1.0 + energy.abs()) {
            break;
        }
        sigma = (sigma * 2.0).min(1e12);
    }
    Ok(RepresentationReport {
        energy,
        best_random_bound: best,
        violations,
        worst_excess,
        trials,
        ascent_value,
        ascent_gap: energy - ascent_value,
        seed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxationEntry {
    pub t: f64,
    pub energy: f64,
    pub ratio: f64,
    pub exp_minus_t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxationReport {
    pub initial_energy: f64,
    pub entries: Vec<RelaxationEntry>,
    /// Every `Σ F(∇T_t u)` stays below the initial energy plus `tol`.
    pub bounded: bool,
    /// Energies are nonincreasing in `t` up to `tol`.
    pub monotone: bool,
    /// The sharp `e^{-t}` contraction held at every `t`; informational.
    pub sharp: bool,
    pub tol: f64,
}

pub fn relaxation_monotonicity_check(
    f: &Integrand,
    u: &ScalarField,
    t_list: &[f64],
    tol: f64,
) -> Result<RelaxationReport> {
    let zero = vec![0.0; u.grid().dimension()];
    if f.evaluate(&zero).abs() > 1e-12 {
        return invalid("the contraction check assumes F(0) = 0");
    }
    let semigroup = OuSemigroup::new(u.grid());
    let initial = integrand_energy(f, u)?;
    let mut ts = t_list.to_vec();
    ts.sort_by(f64::total_cmp);
    let mut entries = Vec::with_capacity(ts.len());
    for &t in &ts {
        let moved = semigroup.apply(u, t)?;
        let energy = integrand_energy(f, &moved)?;
        entries.push(RelaxationEntry {
            t,
            energy,
            ratio: if initial > 0.0 { energy / initial } else { 0.0 },
            exp_minus_t: (-t).exp(),
        });
    }
    let bounded = entries.iter().all(|e| e.energy <= initial + tol);
    let monotone = entries.windows(2).all(|p| p[1].energy <= p[0].energy + tol);
    let sharp = entries
        .iter()
        .all(|e| e.energy <= e.exp_minus_t * initial + tol);
    Ok(RelaxationReport {
        initial_energy: initial,
        entries,
        bounded,
        monotone,
        sharp,
        tol,
    })
}

/// Exhaustive minimum of `P_γ(E) + ∫_E (g - λ)` over the empty set, the
/// line, half-lines and node intervals of a one-dimensional uniform grid.
pub fn brute_force_interval_oracle(g: &ScalarField, lambda: f64) -> Result<(IndicatorSet, f64)> {
    let grid = g.grid();
    if grid.dimension() != 1 || !grid.is_uniform() {
        return invalid("the interval oracle needs a one-dimensional uniform grid");
    }
    let n = grid.len();
    let w = grid.weights();
    let flux = &grid.axis(0).flux;
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + w[i] * (g.values()[i] - lambda);
    }
    // nodes a..=b; a boundary face is paid unless the run touches the end
    let mut best = (None, 0.0);
    for a in 0..n {
        let left = if a > 0 { flux[a - 1] } else { 0.0 };
        for b in a..n {
            let right = if b + 1 < n { flux[b] } else { 0.0 };
            let e = left + right + prefix[b + 1] - prefix[a];
            if e < best.1 {
                best = (Some((a, b)), e);
            }
        }
    }
    let members = match best.0 {
        Some((a, b)) => (0..n).map(|i| i >= a && i <= b).collect(),
        None => vec![false; n],
    };
    Ok((IndicatorSet::new(grid.clone(), members)?, best.1))
}

#[derive(Debug, Clone, Serialize)]
pub struct RofOracle {
    #[serde(skip)]
    pub u: ScalarField,
    pub objective: f64,
    pub starts: usize,
    pub iterations: usize,
    pub gap: f64,
}

/// Independent minimiser of the discrete energy by constant-step projected
/// (proximal) gradient ascent on the dual, from several random starts.
pub fn brute_force_rof_oracle(f: &Integrand, g: &ScalarField, seed: u64, max_iters: usize) -> Result<RofOracle> {
    let grid = g.grid();
    if grid.len() > 4096 {
        return invalid("the brute-force oracle is meant for small grids");
    }
    let m = grid.dimension();
    f.check_dimension(m)?;
    if !f.supports_prox() {
        return invalid(format!("{} has no proximal map", f.kind_name()));
    }
    let pairing = DualPairing::new(grid, f);
    let len = grid.len() * m;
    let gv = g.values();
    let weights = grid.weights();

    // ‖K‖² by power iteration on -div(s ⊙ ∇·)
    let mut v: Vec<f64> = (0..grid.len()).map(|i| ((i * 7919) % 101) as f64 - 50.0).collect();
    let mut grad = vec![0.0; len];
    let mut back = vec![0.0; grid.len()];
    let mut norm_sq = 0.0;
    for _ in 0..200 {
        gradient_into(grid, &v, &mut grad);
        divergence_into(grid, &grad, Some(&pairing.scale), &mut back);
        let num: f64 = back.iter().zip(&v).zip(weights).map(|((a, b), w)| -a * b * w).sum();
        let den: f64 = v.iter().zip(weights).map(|(a, w)| a * a * w).sum();
        norm_sq = num / den;
        let scale = back.iter().zip(weights).map(|(a, w)| a * a * w).sum::<f64>().sqrt();
        v.iter_mut().zip(&back).for_each(|(x, a)| *x = -a / scale);
    }
    let step = 0.99 / (norm_sq * 1.01);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = 5;
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut total_iters = 0;
    let mut div = vec![0.0; grid.len()];
    let mut ug = vec![0.0; grid.len()];
    for _ in 0..starts {
        let mut psi: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        pairing.prox(f, m, 1.0, &mut psi);
        let mut gap = f64::INFINITY;
        let mut objective = f64::INFINITY;
        for it in 1..=max_iters {
            total_iters += 1;
            divergence_into(grid, &psi, None, &mut div);
            for i in 0..grid.len() {
                ug[i] = gv[i] + div[i];
            }
            gradient_into(grid, &ug, &mut grad);
            for k in 0..len {
                psi[k] += step * pairing.scale[k] * grad[k];
            }
            pairing.prox(f, m, step, &mut psi);
            if it % 500 == 0 || it == max_iters {
                divergence_into(grid, &psi, None, &mut div);
                let u = ScalarField::new(grid.clone(), gv.iter().zip(&div).map(|(a, b)| a + b).collect())?;
                objective = primal_energy(f, &u, g)?;
                let lin: f64 = (0..grid.len()).map(|i| weights[i] * div[i] * gv[i]).sum();
                let quad: f64 = (0..grid.len()).map(|i| weights[i] * div[i] * div[i]).sum();
                let conj = pairing.conj_sum(grid, f, &psi);
                let dual = -conj - lin - 0.5 * quad;
                gap = objective - dual;
                if gap <= 1e-12 * (1.0 + objective.abs()) {
                    break;
                }
            }
        }
        divergence_into(grid, &psi, None, &mut div);
        let u: Vec<f64> = gv.iter().zip(&div).map(|(a, b)| a + b).collect();
        if best.as_ref().is_none_or(|b| objective < b.0) {
            best = Some((objective, u, gap));
        }
    }
    let (objective, u, gap) = best.expect("at least one start");
    Ok(RofOracle {
        u: ScalarField::new(grid.clone(), u)?,
        objective,
        starts,
        iterations: total_iters,
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::quadrature::density;

    fn line(n: usize) -> std::sync::Arc<GaussianGrid> {
        GaussianGrid::build(&GridSpec::uniform(1, n, 6.0)).unwrap()
    }

    #[test]
    fn coarea_indicator_exact() {
        let grid = line(401);
        let u = ScalarField::from_fn(&grid, |x| if x[0] < 0.0 { 1.0 } else { 0.0 });
        let r = coarea_check(&u, 512, None).unwrap();
        assert!(r.relative_residual < 1e-10);
        assert!((r.total_variation - density(0.0)).abs() < 1e-3);
    }

    #[test]
    fn coarea_identity() {
        let grid = line(401);
        let r = coarea_check(&ScalarField::coordinate(&grid, 0), 512, None).unwrap();
        assert!(r.relative_residual < 0.01, "{r:?}");
        assert!((r.total_variation - 1.0).abs() < 1e-3);
    }

    #[test]
    fn interval_oracle_cases() {
        let grid = line(201);
        let zero = ScalarField::constant(&grid, 0.0);
        let (set, e) = brute_force_interval_oracle(&zero, 0.0).unwrap();
        assert!(set.is_empty() && e == 0.0);
        let (set, e) = brute_force_interval_oracle(&zero, 1.0).unwrap();
        assert!(set.is_full() && (e + 1.0).abs() < 1e-6);
    }

    #[test]
    fn representation_identity_field() {
        let grid = line(129);
        let u = ScalarField::coordinate(&grid, 0);
        let r = representation_lower_bound_check(&Integrand::EuclideanNorm, &u, 200, 5, 1e-9).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.ascent_gap.abs() < 1e-9);
        assert!((r.energy - 1.0).abs() < 1e-3);
    }
}
