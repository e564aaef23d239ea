//! Primal-dual solver for `min_u Σ F(∇u) + α/2 ‖u - g‖²_γ`.
//!
//! Discrete energy: component `d` of a gradient at node `i` is a one-sided
//! difference carrying the measure `ω^d_i` (difference measure of axis
//! `d` times the node weights of the other axes). Separable integrands
//! use `Σ_i Σ_d ω^d_i f((∇u)^d_i)`; the others use
//! `Σ_i w_i F(s_i ⊙ (∇u)_i)` with `s^d_i = ω^d_i / w_i`. One-dimensional
//! grids always use the first form; the two agree on axis-aligned
//! gradients of one-homogeneous integrands.

mod flow;
mod spectral;

pub use flow::{dimension_sweep, gradient_flow, SweepEntry, SweepReport};
pub use spectral::spectral_solve_quadratic;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::calculus::stencil;
use crate::error::{invalid, Error, Result};
use crate::grid::{check_same, GaussianGrid, ScalarField, VectorField};
use crate::integrands::Integrand;

/// How primal and dual steps are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// Per-node steps from row and column sums of the weighted difference
    /// operator; `ratio` trades primal against dual step length.
    Diagonal { ratio: f64 },
    /// Scalar steps `τ = σ = 0.99/L` from the power-iteration estimate.
    ScalarAuto,
    /// Explicit scalar steps; must satisfy `τσL² ≤ 1`.
    Scalar { tau: f64, sigma: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverParams {
    pub steps: StepRule,
    pub max_iters: usize,
    /// Relative duality-gap tolerance: stop when `P - D ≤ tol (1 + |P|)`.
    pub gap_tol: f64,
    pub check_every: usize,
    /// Weight `α` of the data term.
    pub data_weight: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            steps: StepRule::Diagonal { ratio: 10.0 },
            max_iters: 200_000,
            gap_tol: 1e-6,
            check_every: 10,
            data_weight: 1.0,
        }
    }
}

impl SolverParams {
    pub fn with_tol(gap_tol: f64) -> Self {
        Self {
            gap_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0) {
            return invalid("gap tolerance must be positive");
        }
        if self.max_iters == 0 || self.check_every == 0 {
            return invalid("iteration limits must be positive");
        }
        if !(self.data_weight > 0.0 && self.data_weight.is_finite()) {
            return invalid("data weight must be positive");
        }
        match self.steps {
            StepRule::Diagonal { ratio } if !(ratio > 0.0 && ratio.is_finite()) => {
                invalid("step ratio must be positive")
            }
            StepRule::Scalar { tau, sigma } if !(tau > 0.0 && sigma > 0.0) => {
                invalid("steps must be positive")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: ScalarField,
    pub phi: VectorField,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖u - g - div_γΦ/α‖_γ`.
    pub kkt_residual: f64,
    pub operator_norm: f64,
    pub seconds: f64,
}

impl Solution {
    pub fn relative_gap(&self) -> f64 {
        self.gap / (1.0 + self.primal_value.abs())
    }
}

/// Precomputed stencils and weights for one grid and integrand.
pub(crate) struct Operators {
    pub grid: Arc<GaussianGrid>,
    pub m: usize,
    lo: Vec<usize>,
    hi: Vec<usize>,
    inv_h: Vec<f64>,
    /// `ω^d_i`, component-major per node.
    omega: Vec<f64>,
    /// `s^d_i`: `ω/w` for node-coupled integrands, `1` for separable ones.
    scale: Vec<f64>,
    inv_w: Vec<f64>,
    separable: bool,
}

impl Operators {
    pub fn new(grid: &Arc<GaussianGrid>, f: &Integrand) -> Self {
        let m = grid.dimension();
        let len = grid.len() * m;
        let separable = f.is_separable() || m == 1;
        let mut lo = vec![0; len];
        let mut hi = vec![0; len];
        let mut inv_h = vec![0.0; len];
        let mut omega = vec![0.0; len];
        let mut scale = vec![1.0; len];
        for i in 0..grid.len() {
            for d in 0..m {
                let k = i * m + d;
                let (a, b, hk) = stencil(grid, i, d);
                lo[k] = a;
                hi[k] = b;
                inv_h[k] = 1.0 / hk;
                omega[k] = grid.dual_weight(i, d);
                if !separable {
                    scale[k] = omega[k] / grid.weights()[i];
                }
            }
        }
        let inv_w = grid.weights().iter().map(|w| 1.0 / w).collect();
        Self {
            grid: grid.clone(),
            m,
            lo,
            hi,
            inv_h,
            omega,
            scale,
            inv_w,
            separable,
        }
    }

    pub fn gradient(&self, u: &[f64], out: &mut [f64]) {
        for k in 0..out.len() {
            out[k] = (u[self.hi[k]] - u[self.lo[k]]) * self.inv_h[k];
        }
    }

    /// `s ⊙ ∇u`.
    pub fn scaled_gradient(&self, u: &[f64], out: &mut [f64]) {
        for k in 0..out.len() {
            out[k] = self.scale[k] * (u[self.hi[k]] - u[self.lo[k]]) * self.inv_h[k];
        }
    }

    pub fn divergence(&self, phi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..phi.len() {
            let a = self.omega[k] * phi[k] * self.inv_h[k];
            out[self.lo[k]] += a;
            out[self.hi[k]] -= a;
        }
        for (v, iw) in out.iter_mut().zip(&self.inv_w) {
            *v *= iw;
        }
    }

    /// `div(s ⊙ Φ)`.
    fn scaled_divergence(&self, phi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..phi.len() {
            let a = self.omega[k] * self.scale[k] * phi[k] * self.inv_h[k];
            out[self.lo[k]] += a;
            out[self.hi[k]] -= a;
        }
        for (v, iw) in out.iter_mut().zip(&self.inv_w) {
            *v *= iw;
        }
    }

    /// Integrand part of the energy, evaluated on a plain gradient.
    pub fn f_energy(&self, f: &Integrand, grad: &[f64]) -> f64 {
        let m = self.m;
        let w = self.grid.weights();
        let mut total = 0.0;
        let mut buf = vec![0.0; m];
        for i in 0..self.grid.len() {
            if self.separable {
                for d in 0..m {
                    let k = i * m + d;
                    total += self.omega[k] * f.evaluate(&[grad[k]]);
                }
            } else {
                for d in 0..m {
                    buf[d] = self.scale[i * m + d] * grad[i * m + d];
                }
                total += w[i] * f.evaluate(&buf);
            }
        }
        total
    }

    /// Conjugate part of the dual energy.
    pub fn conj_energy(&self, f: &Integrand, phi: &[f64]) -> f64 {
        let m = self.m;
        let w = self.grid.weights();
        let mut total = 0.0;
        for i in 0..self.grid.len() {
            if self.separable {
                for d in 0..m {
                    let k = i * m + d;
                    total += self.omega[k] * f.conjugate(&[phi[k]]);
                }
            } else {
                total += w[i] * f.conjugate(&phi[i * m..(i + 1) * m]);
            }
            if total == f64::INFINITY {
                return total;
            }
        }
        total
    }

    /// Dual field attaining the integrand energy at `u`: `∇F(s ⊙ ∇u)`.
    pub fn flux(&self, f: &Integrand, u: &[f64]) -> Result<Vec<f64>> {
        let m = self.m;
        let mut g = vec![0.0; u.len() * m];
        self.scaled_gradient(u, &mut g);
        let mut out = vec![0.0; g.len()];
        for i in 0..self.grid.len() {
            let gi = f.gradient(&g[i * m..(i + 1) * m])?;
            out[i * m..(i + 1) * m].copy_from_slice(&gi);
        }
        Ok(out)
    }

    /// Largest eigenvalue of `u ↦ -div(s ⊙ ∇u)`, square-rooted.
    pub fn operator_norm(&self) -> f64 {
        let n = self.grid.len();
        let w = self.grid.weights();
        let mut v: Vec<f64> = (0..n)
            .map(|i| ((i as f64 * 0.618_033_988_75).fract() - 0.5) + 1e-3)
            .collect();
        let mut g = vec![0.0; n * self.m];
        let mut av = vec![0.0; n];
        let wnorm = |x: &[f64]| x.iter().zip(w).map(|(a, b)| b * a * a).sum::<f64>().sqrt();
        let nv = wnorm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut lambda = 0.0;
        for _ in 0..50 {
            self.gradient(&v, &mut g);
            self.scaled_divergence(&g, &mut av);
            av.iter_mut().for_each(|x| *x = -*x);
            lambda = av.iter().zip(&v).zip(w).map(|((a, b), c)| a * b * c).sum::<f64>();
            let na = wnorm(&av);
            if na == 0.0 {
                break;
            }
            v.iter_mut().zip(&av).for_each(|(x, a)| *x = a / na);
        }
        lambda.max(0.0).sqrt()
    }
}

/// `Σ F(∇u) + ½‖u - g‖²_γ` in the discrete form described above.
pub fn primal_energy(f: &Integrand, u: &ScalarField, g: &ScalarField) -> Result<f64> {
    primal_energy_weighted(f, u, g, 1.0)
}

pub fn primal_energy_weighted(f: &Integrand, u: &ScalarField, g: &ScalarField, alpha: f64) -> Result<f64> {
    check_same(u.grid(), g.grid())?;
    f.check_dimension(u.grid().dimension())?;
    let ops = Operators::new(u.grid(), f);
    Ok(primal_with(&ops, f, u.values(), g.values(), alpha))
}

/// `Σ F(∇u)` alone, in the solver's discretisation.
pub fn integrand_energy(f: &Integrand, u: &ScalarField) -> Result<f64> {
    f.check_dimension(u.grid().dimension())?;
    let ops = Operators::new(u.grid(), f);
    let mut grad = vec![0.0; u.len() * ops.m];
    ops.gradient(u.values(), &mut grad);
    Ok(ops.f_energy(f, &grad))
}

fn primal_with(ops: &Operators, f: &Integrand, u: &[f64], g: &[f64], alpha: f64) -> f64 {
    let mut grad = vec![0.0; u.len() * ops.m];
    ops.gradient(u, &mut grad);
    let data: f64 = u
        .iter()
        .zip(g)
        .zip(ops.grid.weights())
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum();
    ops.f_energy(f, &grad) + 0.5 * alpha * data
}

/// Fenchel dual `-Σ F*(Φ) - ⟨div_γΦ, g⟩_γ - ‖div_γΦ‖²_γ/2`; `-∞` when
/// `Φ` leaves the domain of `F*`.
pub fn dual_energy(f: &Integrand, phi: &VectorField, g: &ScalarField) -> Result<f64> {
    dual_energy_weighted(f, phi, g, 1.0)
}

pub fn dual_energy_weighted(f: &Integrand, phi: &VectorField, g: &ScalarField, alpha: f64) -> Result<f64> {
    check_same(phi.grid(), g.grid())?;
    f.check_dimension(g.grid().dimension())?;
    let ops = Operators::new(g.grid(), f);
    let mut div = vec![0.0; g.len()];
    Ok(dual_with(&ops, f, phi.values(), g.values(), alpha, &mut div))
}

fn dual_with(ops: &Operators, f: &Integrand, phi: &[f64], g: &[f64], alpha: f64, div: &mut [f64]) -> f64 {
    let conj = ops.conj_energy(f, phi);
    if conj == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    ops.divergence(phi, div);
    let w = ops.grid.weights();
    let mut lin = 0.0;
    let mut quad = 0.0;
    for i in 0..g.len() {
        lin += w[i] * div[i] * g[i];
        quad += w[i] * div[i] * div[i];
    }
    -conj - lin - quad / (2.0 * alpha)
}

/// Best iterate seen so far: gap, u, phi, primal, dual.
type Snapshot = (f64, Vec<f64>, Vec<f64>, f64, f64);

/// Minimises the discrete energy for data `g`.
pub fn solve(f: &Integrand, g: &ScalarField, params: &SolverParams) -> Result<Solution> {
    params.validate()?;
    let grid = g.grid().clone();
    f.check_dimension(grid.dimension())?;
    if !f.supports_prox() {
        return Err(Error::Unsupported(format!(
            "{} has no proximal map on this grid",
            f.kind_name()
        )));
    }
    let started = Instant::now();
    let ops = Operators::new(&grid, f);
    let m = ops.m;
    let n = grid.len();
    let alpha = params.data_weight;
    let lnorm = ops.operator_norm();

    let w = grid.weights();
    let (tau, sigma): (Vec<f64>, Vec<f64>) = match params.steps {
        StepRule::Diagonal { ratio } => {
            // Pock–Chambolle steps for the operator in orthonormal
            // coordinates, |B_kj| = sqrt(ν_k / w_j) s_k / h_k with ν_k the
            // weight pairing the dual component k
            let mut col = vec![0.0; n];
            let mut row = vec![0.0; n * m];
            for k in 0..n * m {
                let nu = if ops.separable { ops.omega[k] } else { w[k / m] };
                let c = ops.scale[k] * ops.inv_h[k] * nu.sqrt();
                let (a, b) = (c / w[ops.lo[k]].sqrt(), c / w[ops.hi[k]].sqrt());
                col[ops.lo[k]] += a;
                col[ops.hi[k]] += b;
                row[k] = a + b;
            }
            let tau = col
                .iter()
                .map(|&c| if c > 0.0 { 1.0 / (ratio * c) } else { 1e300 })
                .collect();
            let sigma = (0..n)
                .map(|i| {
                    row[i * m..(i + 1) * m]
                        .iter()
                        .map(|&r| 0.99 * ratio / r)
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            (tau, sigma)
        }
        StepRule::ScalarAuto => {
            let s = 0.99 / lnorm.max(1e-300);
            (vec![s; n], vec![s; n])
        }
        StepRule::Scalar { tau, sigma } => {
            if tau * sigma * lnorm * lnorm > 1.0 + 1e-12 {
                return invalid(format!(
                    "steps violate τσL² ≤ 1 (L = {lnorm:.6e})"
                ));
            }
            (vec![tau; n], vec![sigma; n])
        }
    };

    let gv = g.values();
    let mut u = gv.to_vec();
    let mut u_bar = u.clone();
    let mut phi = vec![0.0; n * m];
    let mut grad = vec![0.0; n * m];
    let mut div = vec![0.0; n];
    let mut primal = primal_with(&ops, f, &u, gv, alpha);
    let mut dual = dual_with(&ops, f, &phi, gv, alpha, &mut div);
    let mut iterations = 0;
    let mut converged = primal - dual <= params.gap_tol * (1.0 + primal.abs());
    let mut best: Option<Snapshot> = None;

    while !converged && iterations < params.max_iters {
        iterations += 1;
        ops.scaled_gradient(&u_bar, &mut grad);
        for i in 0..n {
            let s = sigma[i];
            let block = &mut phi[i * m..(i + 1) * m];
            for d in 0..m {
                block[d] += s * grad[i * m + d];
            }
            f.prox_conjugate_in_place(s, block);
        }
        ops.divergence(&phi, &mut div);
        for i in 0..n {
            let t = tau[i];
            let old = u[i];
            let new = (old + t * div[i] + t * alpha * gv[i]) / (1.0 + t * alpha);
            u[i] = new;
            u_bar[i] = 2.0 * new - old;
        }
        if iterations % params.check_every == 0 {
            primal = primal_with(&ops, f, &u, gv, alpha);
            dual = dual_with(&ops, f, &phi, gv, alpha, &mut div);
            let gap = primal - dual;
            converged = gap <= params.gap_tol * (1.0 + primal.abs());
            if !converged {
                let better = best.as_ref().is_none_or(|b| gap < b.0);
                if better {
                    best = Some((gap, u.clone(), phi.clone(), primal, dual));
                }
            }
        }
    }
    if !converged {
        primal = primal_with(&ops, f, &u, gv, alpha);
        dual = dual_with(&ops, f, &phi, gv, alpha, &mut div);
        if let Some((gap, bu, bp, bpv, bdv)) = best {
            if gap < primal - dual {
                u = bu;
                phi = bp;
                primal = bpv;
                dual = bdv;
            }
        }
    }
    ops.divergence(&phi, &mut div);
    let kkt = u
        .iter()
        .zip(gv)
        .zip(&div)
        .zip(w)
        .map(|(((a, b), c), wi)| {
            let r = a - b - c / alpha;
            wi * r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(Solution {
        u: ScalarField::from_vec(grid.clone(), u),
        phi: VectorField::from_vec(grid, phi),
        primal_value: primal,
        dual_value: dual,
        gap: primal - dual,
        iterations,
        converged,
        kkt_residual: kkt,
        operator_norm: lnorm,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Euler–Lagrange residual `-div_γ(∇F(∇u)) + α(u - g)` with its interior
/// ℓ²(γ) norm (nodes with every `|x_d| ≤ 3`).
#[derive(Debug, Clone)]
pub struct ElResidual {
    pub residual: ScalarField,
    pub interior_norm: f64,
}

pub fn el_residual(f: &Integrand, u: &ScalarField, g: &ScalarField) -> Result<ElResidual> {
    el_residual_weighted(f, u, g, 1.0)
}

pub fn el_residual_weighted(f: &Integrand, u: &ScalarField, g: &ScalarField, alpha: f64) -> Result<ElResidual> {
    check_same(u.grid(), g.grid())?;
    if !f.is_smooth() {
        return invalid(format!("{} is not differentiable", f.kind_name()));
    }
    f.check_dimension(u.grid().dimension())?;
    let grid = u.grid();
    let ops = Operators::new(grid, f);
    let flux = ops.flux(f, u.values())?;
    let mut div = vec![0.0; grid.len()];
    ops.divergence(&flux, &mut div);
    let res: Vec<f64> = (0..grid.len())
        .map(|i| -div[i] + alpha * (u.values()[i] - g.values()[i]))
        .collect();
    let mut norm = 0.0;
    for (i, r) in res.iter().enumerate() {
        if is_interior(grid, i) {
            norm += grid.weights()[i] * r * r;
        }
    }
    Ok(ElResidual {
        residual: ScalarField::from_vec(grid.clone(), res),
        interior_norm: norm.sqrt(),
    })
}

/// Radius of the box whose nodes count as interior.
pub const INTERIOR_RADIUS: f64 = 3.0;

pub fn is_interior(grid: &GaussianGrid, i: usize) -> bool {
    (0..grid.dimension()).all(|d| grid.coordinate(i, d).abs() <= INTERIOR_RADIUS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn uniform(n: usize) -> Arc<GaussianGrid> {
        GaussianGrid::build(&GridSpec::uniform(1, n, 6.0)).unwrap()
    }

    #[test]
    fn energy_examples() {
        let g = GaussianGrid::build(&GridSpec::gauss_hermite(1, 33)).unwrap();
        let zero = ScalarField::constant(&g, 0.0);
        let x = ScalarField::coordinate(&g, 0);
        let q = Integrand::quadratic(1.0).unwrap();
        assert!((primal_energy(&q, &x, &zero).unwrap() - 1.0).abs() < 1e-8);
        let n = Integrand::EuclideanNorm;
        assert!((primal_energy(&n, &zero, &x).unwrap() - 0.5).abs() < 1e-12);
        let c = 0.6;
        let phi = VectorField::constant(&g, &[c]).unwrap();
        let gx = x.map(|v| c * v);
        assert!((dual_energy(&n, &phi, &gx).unwrap() - 0.5 * c * c).abs() < 1e-8);
    }

    #[test]
    fn soft_threshold_small_slope() {
        let grid = uniform(129);
        let g = ScalarField::from_fn(&grid, |x| 0.5 * x[0]);
        let sol = solve(&Integrand::EuclideanNorm, &g, &SolverParams::with_tol(1e-10)).unwrap();
        assert!(sol.converged);
        assert!(sol.u.max_abs() < 1e-4);
    }

    #[test]
    fn constant_data_is_fixed() {
        let grid = uniform(65);
        let g = ScalarField::constant(&grid, 2.5);
        let sol = solve(&Integrand::EuclideanNorm, &g, &SolverParams::default()).unwrap();
        assert!(sol.converged && sol.iterations == 0);
        assert!(sol.u.values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn scalar_steps_checked() {
        let grid = uniform(33);
        let g = ScalarField::coordinate(&grid, 0);
        let params = SolverParams {
            steps: StepRule::Scalar { tau: 10.0, sigma: 10.0 },
            ..SolverParams::default()
        };
        assert!(solve(&Integrand::EuclideanNorm, &g, &params).is_err());
    }
}
