use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::IndicatorSet;
use crate::grid::{GaussianGrid, ScalarField};

/// Allowed violation `absolute + curvature_factor · h² · max|u|`, with `h`
/// the local spacing.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvexityTolerance {
    pub absolute: f64,
    pub curvature_factor: f64,
    pub pairs: usize,
}

impl Default for ConvexityTolerance {
    fn default() -> Self {
        Self {
            absolute: 1e-6,
            curvature_factor: 4.0,
            pairs: 10_000,
        }
    }
}

impl ConvexityTolerance {
    pub fn absolute(tol: f64) -> Self {
        Self {
            absolute: tol,
            curvature_factor: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub passed: bool,
    /// Largest raw violation (negative second difference or midpoint
    /// excess), before tolerances.
    pub worst_violation: f64,
    /// Largest violation minus its allowance; positive means failure.
    pub worst_excess: f64,
    pub worst_point: Option<Vec<f64>>,
    pub lines_checked: usize,
    pub pairs_checked: usize,
    pub seed: u64,
}

/// Second difference along axis `d` at every node: twice the gap between
/// the chord through the two neighbours and `u`. Line ends get zero.
fn second_differences(u: &ScalarField, d: usize) -> Vec<f64> {
    let grid = u.grid();
    let n = grid.nodes_per_axis();
    let nodes = &grid.axis(d).nodes;
    let stride = grid.stride(d);
    let v = u.values();
    let mut out = vec![0.0; grid.len()];
    for i in 0..grid.len() {
        let j = grid.axis_index(i, d);
        if j == 0 || j == n - 1 {
            continue;
        }
        let (a, b) = (v[i - stride], v[i + stride]);
        let t = (nodes[j] - nodes[j - 1]) / (nodes[j + 1] - nodes[j - 1]);
        out[i] = 2.0 * (a + t * (b - a) - v[i]);
    }
    out
}

fn local_spacing(grid: &GaussianGrid, i: usize, d: usize) -> f64 {
    let axis = grid.axis(d);
    let j = grid.axis_index(i, d);
    let left = if j > 0 { axis.spacing[j - 1] } else { 0.0 };
    let right = axis.spacing.get(j).copied().unwrap_or(0.0);
    left.max(right)
}

/// Axis-line second differences plus a seeded random midpoint test.
pub fn check_convexity_field(u: &ScalarField, tol: &ConvexityTolerance, seed: u64) -> ConvexityReport {
    let grid = u.grid();
    let m = grid.dimension();
    let scale = u.max_abs();
    let allowance = |i: usize| {
        let h = (0..m).map(|d| local_spacing(grid, i, d)).fold(0.0, f64::max);
        tol.absolute + tol.curvature_factor * h * h * scale
    };
    let mut worst_violation: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_point = None;
    let mut record = |violation: f64, allowed: f64, at: Vec<f64>| {
        worst_violation = worst_violation.max(violation);
        if violation - allowed > worst_excess {
            worst_excess = violation - allowed;
            worst_point = Some(at);
        }
    };

    let curvature: Vec<Vec<f64>> = (0..m).map(|d| second_differences(u, d)).collect();
    for sd in &curvature {
        for (i, second) in sd.iter().enumerate() {
            record(-second, allowance(i), grid.point(i));
        }
    }
    let lines_checked = m * grid.len() / grid.nodes_per_axis();

    let v = u.values();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = if grid.len() > 1 { tol.pairs } else { 0 };
    for _ in 0..pairs {
        let a = rng.random_range(0..grid.len());
        let b = rng.random_range(0..grid.len());
        let (pa, pb) = (grid.point(a), grid.point(b));
        let mid: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| 0.5 * (x + y)).collect();
        let excess = u.interpolate(&mid) - 0.5 * (v[a] + v[b]);
        // interpolation overshoots a convex function by at most about a
        // quarter of the nearby second differences per axis
        let near = nearest_node(grid, &mid);
        let slack: f64 = curvature
            .iter()
            .map(|sd| 0.25 * neighbourhood_max(grid, sd, near))
            .sum();
        record(excess, allowance(near) + slack, mid);
    }
    ConvexityReport {
        passed: worst_excess <= 0.0,
        worst_violation,
        worst_excess,
        worst_point,
        lines_checked,
        pairs_checked: pairs,
        seed,
    }
}

fn nearest_node(grid: &GaussianGrid, x: &[f64]) -> usize {
    let mut idx = Vec::with_capacity(x.len());
    for (d, &xd) in x.iter().enumerate() {
        let nodes = &grid.axis(d).nodes;
        let j = nodes.partition_point(|&v| v < xd);
        let j = if j == 0 {
            0
        } else if j == nodes.len() || (xd - nodes[j - 1]) <= (nodes[j] - xd) {
            j - 1
        } else {
            j
        };
        idx.push(j);
    }
    grid.flat_index(&idx)
}

/// Largest `|values|` over the node and its axis neighbours.
fn neighbourhood_max(grid: &GaussianGrid, values: &[f64], i: usize) -> f64 {
    let n = grid.nodes_per_axis();
    let mut best = values[i].abs();
    for d in 0..grid.dimension() {
        let j = grid.axis_index(i, d);
        let s = grid.stride(d);
        if j > 0 {
            best = best.max(values[i - s].abs());
        }
        if j + 1 < n {
            best = best.max(values[i + s].abs());
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct SetConvexityReport {
    pub passed: bool,
    pub broken_lines: usize,
    pub lines_checked: usize,
    pub midpoint_failures: usize,
    pub pairs_checked: usize,
    pub seed: u64,
}

/// Every axis and diagonal grid line must meet `E` in one run, and
/// rounded midpoints of random member pairs must lie in `E` or next to it.
pub fn check_convexity_set(set: &IndicatorSet, pairs: usize, seed: u64) -> SetConvexityReport {
    let grid = set.grid();
    let m = grid.dimension();
    let n = grid.nodes_per_axis() as isize;
    let mut directions: Vec<Vec<isize>> = Vec::new();
    for d in 0..m {
        let mut e = vec![0; m];
        e[d] = 1;
        directions.push(e);
        for d2 in d + 1..m {
            for sign in [1, -1] {
                let mut e = vec![0; m];
                e[d] = 1;
                e[d2] = sign;
                directions.push(e);
            }
        }
    }
    let inside = |idx: &[isize]| idx.iter().all(|&c| c >= 0 && c < n);
    let flat = |idx: &[isize]| {
        let u: Vec<usize> = idx.iter().map(|&c| c as usize).collect();
        grid.flat_index(&u)
    };
    let mut broken = 0;
    let mut lines = 0;
    for dir in &directions {
        for i in 0..grid.len() {
            let idx: Vec<isize> = grid.multi_index(i).iter().map(|&c| c as isize).collect();
            // start only at nodes whose predecessor is off the grid
            let prev: Vec<isize> = idx.iter().zip(dir).map(|(a, b)| a - b).collect();
            if inside(&prev) {
                continue;
            }
            lines += 1;
            let mut runs = 0;
            let mut was_in = false;
            let mut cur = idx;
            while inside(&cur) {
                let now = set.contains(flat(&cur));
                if now && !was_in {
                    runs += 1;
                }
                was_in = now;
                cur.iter_mut().zip(dir).for_each(|(a, b)| *a += b);
            }
            if runs > 1 {
                broken += 1;
            }
        }
    }

    let members: Vec<usize> = (0..grid.len()).filter(|&i| set.contains(i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let checked = if members.is_empty() { 0 } else { pairs };
    for _ in 0..checked {
        let a = grid.multi_index(members[rng.random_range(0..members.len())]);
        let b = grid.multi_index(members[rng.random_range(0..members.len())]);
        let mid: Vec<isize> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| ((*x + *y) as f64 / 2.0).round() as isize)
            .collect();
        if set.contains(flat(&mid)) {
            continue;
        }
        let near_boundary = (0..3isize.pow(m as u32)).any(|code| {
            let mut c = code;
            let nb: Vec<isize> = mid
                .iter()
                .map(|&v| {
                    let off = c % 3 - 1;
                    c /= 3;
                    v + off
                })
                .collect();
            inside(&nb) && set.contains(flat(&nb))
        });
        if !near_boundary {
            failures += 1;
        }
    }
    SetConvexityReport {
        passed: broken == 0 && failures == 0,
        broken_lines: broken,
        lines_checked: lines,
        midpoint_failures: failures,
        pairs_checked: checked,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn line(n: usize) -> std::sync::Arc<GaussianGrid> {
        GaussianGrid::build(&GridSpec::uniform(1, n, 6.0)).unwrap()
    }

    #[test]
    fn parabola_passes_and_cap_fails() {
        let grid = line(121);
        let up = ScalarField::from_fn(&grid, |x| x[0] * x[0]);
        assert!(check_convexity_field(&up, &ConvexityTolerance::absolute(1e-10), 1).passed);
        let down = up.map(|v| -v);
        let report = check_convexity_field(&down, &ConvexityTolerance::absolute(1e-10), 1);
        assert!(!report.passed);
        let h = 12.0 / 120.0;
        assert!((report.worst_violation - 2.0 * h * h).abs() < 1e-9 || report.worst_violation > 2.0 * h * h);
    }

    #[test]
    fn kink_passes() {
        let grid = line(101);
        let u = ScalarField::from_fn(&grid, |x| x[0].abs());
        assert!(check_convexity_field(&u, &ConvexityTolerance::absolute(1e-10), 3).passed);
    }

    #[test]
    fn set_lines() {
        let grid = line(101);
        let half = IndicatorSet::from_fn(&grid, |x| x[0] < 0.7).unwrap();
        assert!(check_convexity_set(&half, 1000, 1).passed);
        let two = IndicatorSet::from_fn(&grid, |x| x[0].abs() > 1.0 && x[0].abs() < 2.0).unwrap();
        assert!(!check_convexity_set(&two, 1000, 1).passed);
        let plane = GaussianGrid::build(&GridSpec::uniform(2, 41, 3.0)).unwrap();
        let ball = IndicatorSet::from_fn(&plane, |x| x[0] * x[0] + x[1] * x[1] < 1.0).unwrap();
        assert!(check_convexity_set(&ball, 1000, 1).passed);
    }
}
