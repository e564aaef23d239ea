use serde::Serialize;

use super::{primal_energy_weighted, solve, Solution, SolverParams};
use crate::calculus::{cylindrical_projection, lift};
use crate::error::{invalid, Result};
use crate::grid::ScalarField;
use crate::integrands::Integrand;
use crate::verify::{check_convexity_field, ConvexityTolerance};

/// Implicit Euler steps `u_{k+1} = argmin Σ F(∇u) + ‖u - u_k‖²/(2 dt)`.
/// The trajectory starts with `u0`; each later entry is one solve.
pub fn gradient_flow(
    f: &Integrand,
    u0: &ScalarField,
    dt: f64,
    steps: usize,
    params: &SolverParams,
) -> Result<Vec<Solution>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid("time step must be positive");
    }
    let step_params = SolverParams {
        data_weight: 1.0 / dt,
        ..params.clone()
    };
    let mut out: Vec<Solution> = Vec::with_capacity(steps);
    let mut current = u0.clone();
    for _ in 0..steps {
        let sol = solve(f, &current, &step_params)?;
        current = sol.u.clone();
        out.push(sol);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub k: usize,
    /// `‖u_k - u_full‖_γ`.
    pub distance: f64,
    /// `J_k(u_k)`, the energy with projected data.
    pub energy: f64,
    pub gap: f64,
    pub converged: bool,
    pub convex: bool,
    pub worst_convexity_violation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub dimension: usize,
    pub full_energy: f64,
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn distances_nonincreasing(&self, slack: f64) -> bool {
        self.entries
            .windows(2)
            .all(|pair| pair[1].distance <= pair[0].distance + slack)
    }
}

/// Solves the cylindrical problems with data `E_k g` lifted back to the
/// full grid, for every `k` in `dims`.
pub fn dimension_sweep(
    f: &Integrand,
    g: &ScalarField,
    dims: &[usize],
    params: &SolverParams,
    seed: u64,
) -> Result<SweepReport> {
    let grid = g.grid();
    let m = grid.dimension();
    if dims.is_empty() || dims.windows(2).any(|p| p[0] >= p[1]) {
        return invalid("sweep dimensions must be strictly increasing");
    }
    if dims[0] == 0 || *dims.last().unwrap() > m {
        return invalid(format!("sweep dimensions must lie in 1..={m}"));
    }
    let full = solve(f, g, params)?;
    let mut entries = Vec::with_capacity(dims.len());
    for &k in dims {
        let (sol, gk) = if k == m {
            (full.clone(), g.clone())
        } else {
            let gk = lift(&cylindrical_projection(g, k)?, grid)?;
            (solve(f, &gk, params)?, gk)
        };
        let diff = sol.u.zip_map(&full.u, |a, b| a - b)?;
        let report = check_convexity_field(&sol.u, &ConvexityTolerance::default(), seed);
        entries.push(SweepEntry {
            k,
            distance: diff.norm(),
            energy: primal_energy_weighted(f, &sol.u, &gk, params.data_weight)?,
            gap: sol.relative_gap(),
            converged: sol.converged,
            convex: report.passed,
            worst_convexity_violation: report.worst_violation,
        });
    }
    Ok(SweepReport {
        dimension: m,
        full_energy: full.primal_value,
        entries,
    })
}
