//! One-dimensional rules for the standard normal density.

use statrs::distribution::{ContinuousCDF, Normal};

/// Gauss–Hermite rule for the probabilists' weight `exp(-x²/2)/√(2π)`.
///
/// Nodes are found by Newton iteration on the orthonormal Hermite
/// recurrence; weights are renormalised so they sum to one.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    // Physicists' rule first (weight e^{-z²}), then z = x/√2.
    let mut z: Vec<f64> = vec![0.0; n];
    let mut wz = vec![0.0; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let half = n.div_ceil(2);
    // Largest root first, then deflated Newton downwards: with the found
    // roots divided out, a start above every remaining root converges
    // monotonically to the next one.
    let mut guess = (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0);
    for i in 0..half {
        if i > 0 {
            guess = z[i - 1] - 1e-6 * (1.0 + z[i - 1].abs());
        }
        for _ in 0..500 {
            let (p, dp) = phys_orthonormal(n, guess, pim4);
            let deflation: f64 = z[..i].iter().map(|r| 1.0 / (guess - r)).sum();
            let step = p / (dp - p * deflation);
            guess -= step;
            if step.abs() <= 1e-15 * guess.abs().max(1.0) {
                break;
            }
        }
        // polish on the undeflated polynomial
        for _ in 0..3 {
            let (p, dp) = phys_orthonormal(n, guess, pim4);
            guess -= p / dp;
        }
        let (_, deriv) = phys_orthonormal(n, guess, pim4);
        z[i] = guess;
        wz[i] = 2.0 / (deriv * deriv);
        z[n - 1 - i] = -guess;
        wz[n - 1 - i] = wz[i];
    }
    if n % 2 == 1 {
        z[n / 2] = 0.0;
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut nodes: Vec<f64> = z.iter().map(|v| v * sqrt2).collect();
    let mut weights = wz;
    // z was filled from the largest root downwards
    nodes.reverse();
    weights.reverse();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    (nodes, weights)
}

/// Orthonormal physicists' Hermite function value and derivative at `z`
/// (without the Gaussian factor).
fn phys_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Equispaced nodes on `[-r, r]` with trapezoid weights times the density.
///
/// The weights are rescaled so that their sum equals the exact mass of
/// `[-r, r]`; for coarse grids the raw trapezoid sum can exceed one.
pub fn uniform_truncated(n: usize, r: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2 && r > 0.0);
    let h = 2.0 * r / (n as f64 - 1.0);
    let nodes: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                r
            } else {
                -r + h * i as f64
            }
        })
        .collect();
    let mut weights: Vec<f64> = nodes.iter().map(|&x| h * density(x)).collect();
    weights[0] *= 0.5;
    weights[n - 1] *= 0.5;
    let target = 1.0 - 2.0 * normal_cdf(-r);
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= target / total;
    }
    (nodes, weights)
}

pub fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    standard_normal().cdf(x)
}

pub fn normal_quantile(p: f64) -> f64 {
    standard_normal().inverse_cdf(p)
}

fn standard_normal() -> Normal {
    Normal::standard()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let (x, w) = gauss_hermite(2);
        assert!((x[0] + 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        assert!((w[0] - 0.5).abs() < 1e-14 && (w[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn moments_exact() {
        for n in [3usize, 8, 33, 129, 257] {
            let (x, w) = gauss_hermite(n);
            let m0: f64 = w.iter().sum();
            let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
            let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
            assert!((m0 - 1.0).abs() < 1e-13);
            assert!((m2 - 1.0).abs() < 1e-12, "n={n} m2={m2}");
            assert!((m4 - 3.0).abs() < 1e-11, "n={n} m4={m4}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            assert!(w.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn uniform_mass() {
        let (_, w) = uniform_truncated(257, 6.0);
        let s: f64 = w.iter().sum();
        assert!(s <= 1.0 && s > 1.0 - 2e-9);
        let (_, w) = uniform_truncated(5, 6.0);
        assert!(w.iter().sum::<f64>() <= 1.0);
    }
}
