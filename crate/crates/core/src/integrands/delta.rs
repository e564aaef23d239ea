//! Sampled inf-convolution `F_δ(p) = δ|p| + inf_q(|p - q|/δ + F(q))`.

use super::{norm, project_ball, project_ellipse, Integrand, DOMAIN_TOL};
use crate::optim::{golden_section, lattice_then_golden};

/// Lattice points per axis.
const LATTICE: usize = 201;
/// Lattice half-width in units of `1/δ`.
const LATTICE_SPAN: f64 = 20.0;

fn along_first(base: &Integrand, r: f64) -> Vec<f64> {
    let mut v = vec![0.0; base.dimension().unwrap_or(1)];
    v[0] = r;
    v
}

/// Radial part `inf_{s∈[0,r]} (r - s)/δ + f(s)`; the minimiser of the
/// full problem lies on the segment `[0, p]` for radial `F`.
fn radial_infconv(base: &Integrand, delta: f64, r: f64) -> f64 {
    if r == 0.0 {
        return base.evaluate(&along_first(base, 0.0));
    }
    let cands: Vec<f64> = (0..LATTICE)
        .map(|k| r * k as f64 / (LATTICE - 1) as f64)
        .collect();
    let obj = |s: f64| (r - s) / delta + base.evaluate(&along_first(base, s));
    lattice_then_golden(obj, &cands).1
}

pub(super) fn value(base: &Integrand, delta: f64, p: &[f64]) -> f64 {
    let r = norm(p);
    if base.is_radial() {
        return delta * r + radial_infconv(base, delta, r);
    }
    delta * r + general_infconv(base, delta, p)
}

/// Lattice over a box (at least `[-20/δ, 20/δ]`, widened to contain `p`),
/// then nested golden-section refinement around the best sample.
fn general_infconv(base: &Integrand, delta: f64, p: &[f64]) -> f64 {
    let obj = |q: &[f64]| {
        let d: f64 = p
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        d / delta + base.evaluate(q)
    };
    let half = (LATTICE_SPAN / delta).max(1.5 * norm(p));
    let step = 2.0 * half / (LATTICE - 1) as f64;
    let coord = |k: usize| -half + step * k as f64;
    let dim = p.len();
    let mut best = p.to_vec();
    let mut best_val = obj(p);
    let zero = vec![0.0; dim];
    let z = obj(&zero);
    if z < best_val {
        best_val = z;
        best = zero;
    }
    match dim {
        1 => {
            for k in 0..LATTICE {
                let q = [coord(k)];
                let v = obj(&q);
                if v < best_val {
                    best_val = v;
                    best = q.to_vec();
                }
            }
        }
        2 => {
            for k in 0..LATTICE {
                for l in 0..LATTICE {
                    let q = [coord(k), coord(l)];
                    let v = obj(&q);
                    if v < best_val {
                        best_val = v;
                        best = q.to_vec();
                    }
                }
            }
        }
        _ => return f64::NAN,
    }
    // refine inside a box of one lattice step, recentring while the
    // minimiser sits on the box boundary
    let mut width = step;
    for _ in 0..40 {
        let (cand, val) = match dim {
            1 => {
                let (x, v) = golden_section(|t| obj(&[t]), best[0] - width, best[0] + width, 200);
                (vec![x], v)
            }
            _ => {
                let inner = |x: f64| {
                    golden_section(|y| obj(&[x, y]), best[1] - width, best[1] + width, 120)
                };
                let (x, v) = golden_section(|x| inner(x).1, best[0] - width, best[0] + width, 120);
                (vec![x, inner(x).0], v)
            }
        };
        let on_edge = cand
            .iter()
            .zip(&best)
            .any(|(c, b)| (c - b).abs() > 0.999 * width);
        if val < best_val {
            best_val = val;
            best = cand;
        }
        if !on_edge {
            break;
        }
        width *= 2.0;
    }
    best_val
}

/// `F_δ*(q) = inf{F*(p) : |p| ≤ 1/δ, |p - q| ≤ δ}`, `+∞` if empty.
pub(super) fn conjugate(base: &Integrand, delta: f64, q: &[f64]) -> f64 {
    let r = norm(q);
    if base.is_radial() {
        // F* is radial and nondecreasing in |p|: the best feasible p is
        // the point of the small ball closest to the origin.
        let rho = (r - delta).max(0.0);
        if rho > (1.0 / delta) * (1.0 + DOMAIN_TOL) {
            return f64::INFINITY;
        }
        return base.conjugate(&along_first(base, rho));
    }
    if let Integrand::AnisotropicNorm { weights } = base {
        return if feasible_three_sets(weights, delta, q) {
            0.0
        } else {
            f64::INFINITY
        };
    }
    sampled_constrained_min(base, delta, q)
}

/// Whether ellipse ∩ B(0, 1/δ) ∩ B(q, δ) is nonempty (Dykstra's
/// alternating projections).
fn feasible_three_sets(weights: &[f64], delta: f64, q: &[f64]) -> bool {
    let dim = q.len();
    let mut x = q.to_vec();
    let mut incr = vec![vec![0.0; dim]; 3];
    let project = |k: usize, v: &mut [f64]| match k {
        0 => project_ellipse(weights, v),
        1 => project_ball(1.0 / delta, v),
        _ => {
            let mut d: Vec<f64> = v.iter().zip(q).map(|(a, b)| a - b).collect();
            project_ball(delta, &mut d);
            for ((vi, di), qi) in v.iter_mut().zip(&d).zip(q) {
                *vi = qi + di;
            }
        }
    };
    for _ in 0..20000 {
        for (k, inc) in incr.iter_mut().enumerate() {
            let mut y: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
            let before = y.clone();
            project(k, &mut y);
            for j in 0..dim {
                inc[j] = before[j] - y[j];
            }
            x = y;
        }
        let mut worst: f64 = 0.0;
        for k in 0..3 {
            let mut y = x.clone();
            project(k, &mut y);
            let d: f64 = y.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            worst = worst.max(d.sqrt());
        }
        if worst <= 1e-10 {
            return true;
        }
    }
    false
}

/// Lattice minimum of `F*` over the feasible lens (general bases).
fn sampled_constrained_min(base: &Integrand, delta: f64, q: &[f64]) -> f64 {
    let dim = q.len();
    let step = 2.0 * delta / (LATTICE - 1) as f64;
    let mut best = f64::INFINITY;
    let mut visit = |p: &[f64]| {
        if norm(p) <= 1.0 / delta {
            best = best.min(base.conjugate(p));
        }
    };
    match dim {
        1 => {
            for k in 0..LATTICE {
                visit(&[q[0] - delta + step * k as f64]);
            }
        }
        2 => {
            for k in 0..LATTICE {
                for l in 0..LATTICE {
                    let p = [q[0] - delta + step * k as f64, q[1] - delta + step * l as f64];
                    let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                    if d <= delta {
                        visit(&p);
                    }
                }
            }
        }
        _ => return f64::NAN,
    }
    best
}

/// Radial proximal map: the prox moves along `h`, so a 1-D search on
/// `[0, |h|]` suffices.
pub(super) fn prox_radial(base: &Integrand, delta: f64, tau: f64, h: &mut [f64]) {
    let r = norm(h);
    if r == 0.0 {
        return;
    }
    let profile = |rho: f64| delta * rho + radial_infconv_fast(base, delta, rho);
    let (rho, _) = golden_section(|rho| 0.5 * (rho - r) * (rho - r) + tau * profile(rho), 0.0, r, 200);
    h.iter_mut().for_each(|v| *v *= rho / r);
}

/// Same quantity as [`radial_infconv`] by golden section alone.
fn radial_infconv_fast(base: &Integrand, delta: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    golden_section(
        |s| (r - s) / delta + base.evaluate(&along_first(base, s)),
        0.0,
        r,
        200,
    )
    .1
}

#[cfg(test)]
mod tests {
    use super::super::*;

    #[test]
    fn quadratic_at_origin_and_bound() {
        let q = Integrand::quadratic(1.0).unwrap();
        let fd = delta_regularize(&q, 0.5).unwrap();
        assert!(fd.evaluate(&[0.0, 0.0]).abs() < 1e-14);
        for p in [[0.3, 0.1], [3.0, -4.0], [10.0, 2.0]] {
            assert!(fd.evaluate(&p) <= 0.5 * norm(&p) + q.evaluate(&p) + 1e-12);
        }
    }

    #[test]
    fn quadratic_closed_form() {
        // inf_q |p-q|/δ + |q|²/2 is Huber-like with kink at 1/δ
        let q = Integrand::quadratic(1.0).unwrap();
        let delta = 0.5;
        let fd = delta_regularize(&q, delta).unwrap();
        for r in [0.5, 1.9, 2.0, 3.5, 40.0] {
            let inf = if r <= 1.0 / delta {
                0.5 * r * r
            } else {
                r / delta - 0.5 / (delta * delta)
            };
            let want = delta * r + inf;
            assert!((fd.evaluate(&[r, 0.0]) - want).abs() < 1e-9, "r={r}");
        }
    }

    #[test]
    fn anisotropic_lattice_matches_radial_case() {
        let iso = Integrand::anisotropic_norm(vec![2.0, 2.0]).unwrap();
        let aniso = Integrand::anisotropic_norm(vec![2.0, 2.0 + 1e-12]).unwrap();
        let a = delta_regularize(&iso, 0.5).unwrap();
        let b = delta_regularize(&aniso, 0.5).unwrap();
        for p in [[0.4, -0.3], [3.0, 1.0]] {
            assert!((a.evaluate(&p) - b.evaluate(&p)).abs() < 1e-7);
        }
    }
}
