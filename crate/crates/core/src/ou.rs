//! Ornstein–Uhlenbeck semigroup on a tensor grid.
//!
//! Each axis carries the discrete generator `L = -div_γ ∇`, which is
//! self-adjoint in the node weights, annihilates constants and satisfies
//! `L x = x` exactly. `T_t = exp(-tL)` is applied axis by axis with a
//! Chebyshev expansion whose coefficients are scaled Bessel functions.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::grid::{GaussianGrid, ScalarField, VectorField};

/// Coefficient cut-off for the Chebyshev tail.
const COEFF_EPS: f64 = 1e-18;

#[derive(Debug, Clone)]
struct AxisGenerator {
    /// Edge conductances `q_e / h_e`.
    conductance: Vec<f64>,
    weights: Vec<f64>,
    /// Gershgorin bound on the spectrum.
    spectral_bound: f64,
}

impl AxisGenerator {
    fn new(grid: &GaussianGrid, d: usize) -> Self {
        let axis = grid.axis(d);
        let conductance: Vec<f64> = axis
            .flux
            .iter()
            .zip(&axis.spacing)
            .map(|(q, h)| q / h)
            .collect();
        let n = axis.len();
        let mut bound: f64 = 0.0;
        for j in 0..n {
            let left = if j > 0 { conductance[j - 1] } else { 0.0 };
            let right = if j + 1 < n { conductance[j] } else { 0.0 };
            bound = bound.max(2.0 * (left + right) / axis.weights[j]);
        }
        Self {
            conductance,
            weights: axis.weights.clone(),
            spectral_bound: bound,
        }
    }

    /// `out = L v` on one line.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = v.len();
        for j in 0..n {
            let mut s = 0.0;
            if j > 0 {
                s += self.conductance[j - 1] * (v[j] - v[j - 1]);
            }
            if j + 1 < n {
                s += self.conductance[j] * (v[j] - v[j + 1]);
            }
            out[j] = s / self.weights[j];
        }
    }
}

/// Reusable semigroup for one grid.
#[derive(Debug, Clone)]
pub struct OuSemigroup {
    grid: Arc<GaussianGrid>,
    axes: Vec<AxisGenerator>,
}

impl OuSemigroup {
    pub fn new(grid: &Arc<GaussianGrid>) -> Self {
        let axes = (0..grid.dimension())
            .map(|d| AxisGenerator::new(grid, d))
            .collect();
        Self {
            grid: grid.clone(),
            axes,
        }
    }

    pub fn grid(&self) -> &Arc<GaussianGrid> {
        &self.grid
    }

    /// Applies the discrete generator `L` (sum over axes).
    pub fn generator(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        let n = self.grid.nodes_per_axis();
        let mut line = vec![0.0; n];
        let mut res = vec![0.0; n];
        for (d, gen) in self.axes.iter().enumerate() {
            for start in line_starts(&self.grid, d) {
                let s = self.grid.stride(d);
                for j in 0..n {
                    line[j] = u[start + j * s];
                }
                gen.apply(&line, &mut res);
                for j in 0..n {
                    out[start + j * s] += res[j];
                }
            }
        }
        out
    }

    /// `T_t` on raw node values.
    pub fn apply_values(&self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) || !t.is_finite() {
            return invalid("semigroup time must be finite and non-negative");
        }
        let mut v = u.to_vec();
        if t == 0.0 {
            return Ok(v);
        }
        let n = self.grid.nodes_per_axis();
        let mut line = vec![0.0; n];
        for (d, gen) in self.axes.iter().enumerate() {
            let lam = gen.spectral_bound;
            let a = 0.5 * t * lam;
            let coeffs = chebyshev_exp_coeffs(a);
            let s = self.grid.stride(d);
            let mut work = ChebWork::new(n);
            for start in line_starts(&self.grid, d) {
                for j in 0..n {
                    line[j] = v[start + j * s];
                }
                work.run(gen, lam, &coeffs, &mut line);
                for j in 0..n {
                    v[start + j * s] = line[j];
                }
            }
        }
        Ok(v)
    }

    pub fn apply(&self, u: &ScalarField, t: f64) -> Result<ScalarField> {
        crate::grid::check_same(&self.grid, u.grid())?;
        Ok(ScalarField::from_vec(
            self.grid.clone(),
            self.apply_values(u.values(), t)?,
        ))
    }

    /// Componentwise action on a vector field.
    pub fn apply_vector(&self, phi: &VectorField, t: f64) -> Result<VectorField> {
        crate::grid::check_same(&self.grid, phi.grid())?;
        let m = self.grid.dimension();
        let len = self.grid.len();
        let mut out = vec![0.0; len * m];
        for d in 0..m {
            let comp: Vec<f64> = (0..len).map(|i| phi.values()[i * m + d]).collect();
            let moved = self.apply_values(&comp, t)?;
            for i in 0..len {
                out[i * m + d] = moved[i];
            }
        }
        Ok(VectorField::from_vec(self.grid.clone(), out))
    }
}

/// `T_t u`. Builds the per-axis generators on every call; use
/// [`OuSemigroup`] for repeated application.
pub fn ou_semigroup(u: &ScalarField, t: f64) -> Result<ScalarField> {
    OuSemigroup::new(u.grid()).apply(u, t)
}

/// Flat indices of the first node of every grid line along axis `d`.
fn line_starts(grid: &GaussianGrid, d: usize) -> impl Iterator<Item = usize> + '_ {
    let s = grid.stride(d);
    (0..grid.len()).filter(move |i| (i / s).is_multiple_of(grid.nodes_per_axis()))
}

struct ChebWork {
    prev: Vec<f64>,
    cur: Vec<f64>,
    next: Vec<f64>,
    acc: Vec<f64>,
    tmp: Vec<f64>,
}

impl ChebWork {
    fn new(n: usize) -> Self {
        Self {
            prev: vec![0.0; n],
            cur: vec![0.0; n],
            next: vec![0.0; n],
            acc: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// `line ← Σ c_k T_k(X) line` with `X = (2/Λ)L - I`.
    fn run(&mut self, gen: &AxisGenerator, lam: f64, coeffs: &[f64], line: &mut [f64]) {
        let scale = 2.0 / lam;
        self.prev.copy_from_slice(line);
        for (a, p) in self.acc.iter_mut().zip(&self.prev) {
            *a = coeffs[0] * p;
        }
        if coeffs.len() > 1 {
            gen.apply(&self.prev, &mut self.tmp);
            for j in 0..line.len() {
                self.cur[j] = scale * self.tmp[j] - self.prev[j];
                self.acc[j] += coeffs[1] * self.cur[j];
            }
        }
        for &c in coeffs.iter().skip(2) {
            gen.apply(&self.cur, &mut self.tmp);
            for j in 0..line.len() {
                self.next[j] = 2.0 * (scale * self.tmp[j] - self.cur[j]) - self.prev[j];
                self.acc[j] += c * self.next[j];
            }
            std::mem::swap(&mut self.prev, &mut self.cur);
            std::mem::swap(&mut self.cur, &mut self.next);
        }
        line.copy_from_slice(&self.acc);
    }
}

/// Chebyshev coefficients of `exp(-a(1+y))` on `[-1, 1]`:
/// `c_0 = e^{-a}I_0(a)`, `c_k = 2(-1)^k e^{-a}I_k(a)`.
///
/// Bessel ratios come from Miller's backward recurrence, normalised with
/// `I_0 + 2ΣI_k = e^a`.
pub(crate) fn chebyshev_exp_coeffs(a: f64) -> Vec<f64> {
    if a == 0.0 {
        return vec![1.0];
    }
    let keep = (9.5 * a.sqrt() + 30.0).ceil() as usize;
    let start = keep + 40 + (a.sqrt() as usize);
    let mut r = vec![0.0; start + 2];
    r[start] = 1e-280;
    for k in (1..=start).rev() {
        r[k - 1] = (2.0 * k as f64 / a) * r[k] + r[k + 1];
        if r[k - 1] > 1e250 {
            for v in r.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let total: f64 = r[0] + 2.0 * r[1..].iter().sum::<f64>();
    let mut coeffs: Vec<f64> = Vec::with_capacity(keep);
    for (k, rk) in r.iter().enumerate().take(start) {
        let scaled = rk / total;
        let c = if k == 0 {
            scaled
        } else if k % 2 == 0 {
            2.0 * scaled
        } else {
            -2.0 * scaled
        };
        if k > 2 && scaled.abs() < COEFF_EPS && (k as f64) > a.min(1.0) {
            break;
        }
        coeffs.push(c);
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn bessel_coefficients_sum() {
        for a in [1e-3, 0.5, 3.0, 40.0, 2500.0] {
            let c = chebyshev_exp_coeffs(a);
            // at y = 1: Σ c_k = e^{-2a}; at y = -1: Σ |c_k| = 1
            let at_one: f64 = c.iter().sum();
            let at_minus: f64 = c.iter().map(|v| v.abs()).sum();
            assert!((at_minus - 1.0).abs() < 1e-13, "a={a}");
            assert!((at_one - (-2.0 * a).exp()).abs() < 1e-13, "a={a}");
        }
    }

    #[test]
    fn linear_eigenfunction() {
        let g = GaussianGrid::build(&GridSpec::gauss_hermite(1, 65)).unwrap();
        let ou = OuSemigroup::new(&g);
        let x = ScalarField::coordinate(&g, 0);
        let lx = ou.generator(x.values());
        for (a, b) in lx.iter().zip(x.values()) {
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        let t = std::f64::consts::LN_2;
        let tx = ou.apply(&x, t).unwrap();
        for (a, b) in tx.values().iter().zip(x.values()) {
            assert!((a - 0.5 * b).abs() < 1e-9 * (1.0 + b.abs()));
        }
    }
}
