//! Small scalar minimisers shared by the integrand code and the oracles.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a convex (or unimodal) `f` on `[lo, hi]`.
/// Returns `(argmin, min)`; the endpoints are compared too.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimises a convex function sampled on a sorted candidate list, then
/// refines between the neighbours of the best sample.
pub fn lattice_then_golden(f: impl Fn(f64) -> f64, candidates: &[f64]) -> (f64, f64) {
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (k, &s) in candidates.iter().enumerate() {
        let v = f(s);
        if v < best_val {
            best_val = v;
            best = k;
        }
    }
    let lo = candidates[best.saturating_sub(1)];
    let hi = candidates[(best + 1).min(candidates.len() - 1)];
    let (x, v) = golden_section(&f, lo, hi, 200);
    if v < best_val {
        (x, v)
    } else {
        (candidates[best], best_val)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_minimum() {
        let (x, v) = golden_section(|x| (x - 0.3) * (x - 0.3) + 1.0, -2.0, 5.0, 200);
        assert!((x - 0.3).abs() < 1e-7 && (v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kink_minimum() {
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let (x, _) = lattice_then_golden(|x| (x - 1.234).abs(), &grid);
        assert!((x - 1.234).abs() < 1e-9);
    }
}
