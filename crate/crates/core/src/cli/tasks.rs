use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::{json, Value};

use super::config::{DataSpec, ExperimentConfig, Task};
use super::fields::{read_tabulated, SetRecord};
use super::svg::{field_map, line_plot, Series};
use crate::error::{Error, Result};
use crate::geometry::{
    anisotropic_perimeter, classify_minimizer, extract_level_sets, lambda_bar, level_set_optimality_check,
    solve_volume_constrained_with, wulff_halfspace_check, Classification, IndicatorSet,
};
use crate::grid::{hermite_eval_axis, GaussianGrid, ScalarField, Scheme, VectorField};
use crate::integrands::Integrand;
use crate::quadrature::{density, normal_quantile};
use crate::solver::{
    dimension_sweep, el_residual, gradient_flow, integrand_energy, is_interior, solve, spectral_solve_quadratic,
    Solution,
};
use crate::verify::{check_convexity_field, check_convexity_set, verify_all, ConvexityReport, ConvexityTolerance};

/// What a task produced, before anything is written.
pub(crate) struct TaskOutput {
    pub results: Value,
    pub properties: BTreeMap<String, bool>,
    pub fields: Option<(ScalarField, ScalarField, VectorField)>,
    pub plots: Vec<(String, String)>,
}

impl TaskOutput {
    fn new(results: Value) -> Self {
        Self {
            results,
            properties: BTreeMap::new(),
            fields: None,
            plots: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, ok: bool) {
        self.properties.insert(name.to_string(), ok);
    }
}

/// Grid and data of a config; everything that can fail on bad input
/// happens here, before the output directory is touched.
pub(crate) struct Prepared {
    pub grid: Arc<GaussianGrid>,
    pub g: ScalarField,
}

pub(crate) fn prepare(config: &ExperimentConfig) -> Result<Option<Prepared>> {
    if config.task == Task::VerifyAll {
        return Ok(None);
    }
    let grid = GaussianGrid::build(&config.grid)?;
    let g = match &config.data {
        DataSpec::Hermite { degree, axis } => hermite_eval_axis(*degree, &grid, *axis)?,
        DataSpec::Affine { coefficients, offset } => ScalarField::from_fn(&grid, |x| {
            offset + coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
        }),
        DataSpec::QuadraticShift { scale, shift } => {
            ScalarField::from_fn(&grid, |x| scale * x.iter().map(|v| v * v).sum::<f64>() + shift)
        }
        DataSpec::Tabulated { file } => {
            let text = std::fs::read_to_string(file).map_err(|source| Error::Io {
                path: file.display().to_string(),
                source,
            })?;
            read_tabulated(&text, &grid)?
        }
    };
    let needs_uniform = matches!(config.task, Task::Isoperimetric | Task::Classify);
    if needs_uniform && !grid.is_uniform() {
        return Err(Error::Validation(format!(
            "task `{}` needs a uniform_truncated grid",
            config.task.name()
        )));
    }
    if config.task == Task::Sweep {
        if let Some(dims) = &config.sweep.dims {
            let m = grid.dimension();
            if dims.is_empty() || dims.windows(2).any(|p| p[0] >= p[1]) || dims[0] == 0 || dims[dims.len() - 1] > m {
                return Err(Error::Validation(format!(
                    "sweep.dims must be strictly increasing within 1..={m}"
                )));
            }
        }
    }
    Ok(Some(Prepared { grid, g }))
}

pub(crate) fn execute(config: &ExperimentConfig, prepared: Option<Prepared>) -> Result<TaskOutput> {
    let Some(Prepared { grid, g }) = prepared else {
        let report = verify_all(config.seed);
        let mut out = TaskOutput::new(serde_json::to_value(&report).expect("report serializes"));
        out.check("all_criteria", report.passed);
        return Ok(out);
    };
    match config.task {
        Task::Solve => run_solve(config, &grid, &g),
        Task::Levelsets => run_levelsets(config, &grid, &g),
        Task::Isoperimetric => run_isoperimetric(config, &grid, &g),
        Task::Classify => run_classify(config, &grid, &g),
        Task::Flow => run_flow(config, &g),
        Task::Sweep => run_sweep(config, &g),
        Task::VerifyAll => unreachable!("verify has no grid"),
    }
}

fn summary(sol: &Solution) -> Value {
    json!({
        "primal_value": sol.primal_value,
        "dual_value": sol.dual_value,
        "gap": sol.relative_gap(),
        "absolute_gap": sol.gap,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "kkt_residual": sol.kkt_residual,
        "operator_norm": sol.operator_norm,
        "seconds": sol.seconds,
    })
}

fn convexity(u: &ScalarField, seed: u64) -> ConvexityReport {
    check_convexity_field(u, &ConvexityTolerance::default(), seed)
}

fn interior_max(u: &ScalarField) -> f64 {
    let grid = u.grid();
    (0..grid.len())
        .filter(|&i| is_interior(grid, i))
        .map(|i| u.values()[i])
        .fold(f64::NEG_INFINITY, f64::max)
}

fn plot_field(title: &str, series: &[(&str, &ScalarField)], sets: &[&IndicatorSet], levels: &[f64]) -> String {
    let u = series[series.len() - 1].1;
    if u.grid().dimension() == 1 {
        let lines: Vec<Series> = series.iter().map(|(name, f)| Series::from_field(*name, f)).collect();
        let shaded: Vec<(f64, f64)> = sets.iter().flat_map(|s| intervals(s)).collect();
        line_plot(title, &lines, levels, &shaded)
    } else {
        field_map(title, u, sets)
    }
}

/// Runs of a 1D set as closed coordinate intervals.
fn intervals(set: &IndicatorSet) -> Vec<(f64, f64)> {
    let nodes = &set.grid().axis(0).nodes;
    let mut out = Vec::new();
    let mut start = None;
    for (j, &x) in nodes.iter().enumerate() {
        match (set.contains(j), start) {
            (true, None) => start = Some(x),
            (false, Some(a)) => {
                out.push((a, nodes[j - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        out.push((a, nodes[nodes.len() - 1]));
    }
    out
}

fn run_solve(config: &ExperimentConfig, grid: &Arc<GaussianGrid>, g: &ScalarField) -> Result<TaskOutput> {
    let f = &config.integrand;
    let sol = solve(f, g, &config.solver)?;
    let data_report = convexity(g, config.seed);
    let u_report = convexity(&sol.u, config.seed);
    let (lbar, vbar) = lambda_bar(&sol.u);
    let mut oracles = serde_json::Map::new();
    if f.is_smooth() {
        let el = el_residual(f, &sol.u, g)?;
        oracles.insert("euler_lagrange_interior".into(), json!(el.interior_norm));
    }
    if let (Integrand::Quadratic { mu }, Scheme::GaussHermite) = (f, grid.spec().scheme) {
        if config.solver.data_weight == 1.0 {
            let exact = spectral_solve_quadratic(g, *mu)?;
            let diff = sol.u.zip_map(&exact, |a, b| (a - b).abs())?;
            oracles.insert("spectral_max_interior_difference".into(), json!(interior_max(&diff)));
        }
    }
    let mut results = summary(&sol);
    let extra = json!({
        "lambda_bar": lbar,
        "v_bar": vbar,
        "norm_u": sol.u.norm(),
        "norm_g": g.norm(),
        "convexity": { "data": data_report, "solution": u_report },
        "oracles": oracles,
    });
    merge(&mut results, extra);
    let mut out = TaskOutput::new(results);
    out.check("converged", sol.converged);
    out.check("energy_bound", sol.u.norm() <= 2.0 * g.norm() + 1e-8);
    out.check("convex_if_data_convex", !data_report.passed || u_report.passed);
    out.plots.push(("u.svg".into(), plot_field("solution", &[("g", g), ("u", &sol.u)], &[], &[])));
    out.fields = Some((g.clone(), sol.u, sol.phi));
    Ok(out)
}

fn merge(target: &mut Value, extra: Value) {
    if let (Value::Object(a), Value::Object(b)) = (target, extra) {
        a.extend(b);
    }
}

fn run_levelsets(config: &ExperimentConfig, grid: &Arc<GaussianGrid>, g: &ScalarField) -> Result<TaskOutput> {
    let sol = solve(&config.integrand, g, &config.solver)?;
    let u = &sol.u;
    let thresholds = match &config.levelsets.thresholds {
        Some(t) => t.clone(),
        None => {
            let bottom = extract_level_sets(u, &[0.0])?.lambda_bar.max(u.min());
            let top = interior_max(u);
            let n = config.levelsets.count;
            (1..=n).map(|k| bottom + (top - bottom) * k as f64 / n as f64).collect()
        }
    };
    let family = extract_level_sets(u, &thresholds)?;
    let source_grid = family.source.grid().clone();
    let mut results = json!({
        "solve": summary(&sol),
        "thresholds": family.thresholds,
        "volumes": family.volumes,
        "lambda_bar": family.lambda_bar,
        "v_bar": family.v_bar,
        "nested": family.is_nested(),
        "resampled": !Arc::ptr_eq(&source_grid, grid),
        "sets": family.sets.iter().map(SetRecord::encode).collect::<Vec<_>>(),
    });
    let mut out_props = vec![("converged", sol.converged), ("nested", family.is_nested())];
    if grid.dimension() == 1 && config.integrand == Integrand::EuclideanNorm {
        let data = if Arc::ptr_eq(&source_grid, grid) {
            g.clone()
        } else {
            ScalarField::from_fn(&source_grid, |x| g.interpolate(x))
        };
        let check = level_set_optimality_check(&family, &data)?;
        let h = source_grid.max_spacing();
        out_props.push(("level_set_optimality", check.worst_excess <= 5.0 * h));
        out_props.push(("reconstruction", check.reconstruction_error <= check.threshold_spacing.max(h)));
        merge(&mut results, json!({ "optimality": check }));
    }
    let mut out = TaskOutput::new(results);
    for (name, ok) in out_props {
        out.check(name, ok);
    }
    let sets: Vec<&IndicatorSet> = family.sets.iter().collect();
    let plot = if source_grid.dimension() == 1 {
        plot_field("level sets", &[("u", &family.source)], &[], &family.thresholds)
    } else {
        plot_field("level sets", &[("u", &family.source)], &sets, &[])
    };
    out.plots.push(("levelsets.svg".into(), plot));
    out.fields = Some((g.clone(), sol.u.clone(), sol.phi.clone()));
    Ok(out)
}

fn run_isoperimetric(config: &ExperimentConfig, grid: &Arc<GaussianGrid>, g: &ScalarField) -> Result<TaskOutput> {
    let f = &config.integrand;
    let iso = &config.isoperimetric;
    let vc = solve_volume_constrained_with(g, iso.volume, f, &config.solver, iso.volume_tol)?;
    let set_report = check_convexity_set(&vc.set, 10_000, config.seed);
    let (fmin, _) = f.spherical_minimum(grid.dimension())?;
    let perimeter_f = anisotropic_perimeter(f, &vc.set)?;
    let profile = fmin * density(normal_quantile(vc.volume));
    let slack = fmin * grid.max_spacing();
    let mut results = json!({
        "solve": summary(&vc.solution),
        "perimeter": vc.perimeter,
        "perimeter_f": perimeter_f,
        "volume": vc.volume,
        "target_volume": iso.volume,
        "lambda": vc.lambda,
        "lambda_bar": vc.lambda_bar,
        "v_bar": vc.v_bar,
        "tilted": vc.tilted,
        "isoperimetric_profile": profile,
        "set_convexity": set_report,
        "set": SetRecord::encode(&vc.set),
    });
    let mut props = vec![
        ("converged", vc.solution.converged),
        ("set_convex", set_report.passed),
        ("isoperimetric_bound", perimeter_f >= profile - slack),
    ];
    if iso.wulff {
        let wulff = wulff_halfspace_check(f, iso.volume, grid)?;
        props.push(("wulff", wulff.passed));
        merge(&mut results, json!({ "wulff": wulff }));
    }
    let mut out = TaskOutput::new(results);
    for (name, ok) in props {
        out.check(name, ok);
    }
    // the data actually solved, including the tilt for constant g
    let data = if vc.tilted {
        ScalarField::from_fn(grid, |x| g.values()[0] + 2.0 * x[0])
    } else {
        g.clone()
    };
    out.plots.push((
        "set.svg".into(),
        plot_field("volume-constrained set", &[("u", &vc.solution.u)], &[&vc.set], &[]),
    ));
    out.fields = Some((data, vc.solution.u.clone(), vc.solution.phi.clone()));
    Ok(out)
}

fn run_classify(config: &ExperimentConfig, grid: &Arc<GaussianGrid>, g: &ScalarField) -> Result<TaskOutput> {
    let slack = config.classify.slack.unwrap_or(5.0 * grid.max_spacing());
    let report = classify_minimizer(g, &config.solver, slack)?;
    let set_report = report
        .minimizer
        .as_ref()
        .map(|s| check_convexity_set(s, 10_000, config.seed));
    let results = json!({
        "solve": summary(&report.solution),
        "case": report.case,
        "lambda_bar": report.lambda_bar,
        "v_bar": report.v_bar,
        "min_value": report.min_value,
        "slack": slack,
        "optimal_candidates": report.optimal_candidates,
        "minimizer": report.minimizer.as_ref().map(SetRecord::encode),
        "minimizer_convexity": set_report,
    });
    let mut out = TaskOutput::new(results);
    out.check("converged", report.solution.converged);
    out.check("minimizer_convex", set_report.as_ref().is_none_or(|r| r.passed));
    out.check(
        "case_a_has_minimizer",
        report.case != Classification::A || report.minimizer.as_ref().is_some_and(|s| !s.is_empty()),
    );
    let sets: Vec<&IndicatorSet> = report.minimizer.iter().collect();
    out.plots.push((
        "set.svg".into(),
        plot_field("minimiser", &[("g", g), ("u", &report.solution.u)], &sets, &[]),
    ));
    out.fields = Some((g.clone(), report.solution.u.clone(), report.solution.phi.clone()));
    Ok(out)
}

fn run_flow(config: &ExperimentConfig, g: &ScalarField) -> Result<TaskOutput> {
    let f = &config.integrand;
    let flow = &config.flow;
    let trajectory = gradient_flow(f, g, flow.dt, flow.steps, &config.solver)?;
    let start_convex = convexity(g, config.seed).passed;
    let mut energies = vec![integrand_energy(f, g)?];
    let mut steps = Vec::with_capacity(trajectory.len());
    let mut all_convex = true;
    for (k, sol) in trajectory.iter().enumerate() {
        let energy = integrand_energy(f, &sol.u)?;
        let report = convexity(&sol.u, config.seed.wrapping_add(k as u64));
        all_convex &= report.passed;
        energies.push(energy);
        steps.push(json!({
            "step": k + 1,
            "time": flow.dt * (k + 1) as f64,
            "energy": energy,
            "gap": sol.relative_gap(),
            "iterations": sol.iterations,
            "converged": sol.converged,
            "convex": report.passed,
            "worst_convexity_excess": report.worst_excess,
        }));
    }
    let slack = 1e-6 * (1.0 + energies[0].abs());
    let monotone = energies.windows(2).all(|p| p[1] <= p[0] + slack);
    let mut out = TaskOutput::new(json!({
        "dt": flow.dt,
        "initial_energy": energies[0],
        "initial_convex": start_convex,
        "steps": steps,
    }));
    out.check("converged", trajectory.iter().all(|s| s.converged));
    out.check("energy_nonincreasing", monotone);
    out.check("convexity_preserved", !start_convex || all_convex);
    let last = trajectory.last().expect("at least one step");
    let picks: Vec<usize> = if trajectory.len() <= 5 {
        (0..trajectory.len()).collect()
    } else {
        (1..=5).map(|k| k * trajectory.len() / 5 - 1).collect()
    };
    let labels: Vec<String> = picks.iter().map(|k| format!("t={:.3}", flow.dt * (*k + 1) as f64)).collect();
    let mut series: Vec<(&str, &ScalarField)> = vec![("u0", g)];
    series.extend(picks.iter().zip(&labels).map(|(&k, l)| (l.as_str(), &trajectory[k].u)));
    out.plots.push(("flow.svg".into(), plot_field("gradient flow", &series, &[], &[])));
    out.fields = Some((g.clone(), last.u.clone(), last.phi.clone()));
    Ok(out)
}

fn run_sweep(config: &ExperimentConfig, g: &ScalarField) -> Result<TaskOutput> {
    let m = g.grid().dimension();
    let dims = config.sweep.dims.clone().unwrap_or_else(|| (1..=m).collect());
    let report = dimension_sweep(&config.integrand, g, &dims, &config.solver, config.seed)?;
    let data_convex = convexity(g, config.seed).passed;
    let mut out = TaskOutput::new(serde_json::to_value(&report).expect("report serializes"));
    out.check("converged", report.entries.iter().all(|e| e.converged));
    out.check("distances_nonincreasing", report.distances_nonincreasing(1e-6));
    out.check("convex_if_data_convex", !data_convex || report.entries.iter().all(|e| e.convex));
    let series = Series {
        label: "distance".into(),
        xs: report.entries.iter().map(|e| e.k as f64).collect(),
        ys: report.entries.iter().map(|e| e.distance).collect(),
    };
    out.plots.push((
        "sweep.svg".into(),
        line_plot("distance to the full solution against k", &[series], &[], &[]),
    ));
    Ok(out)
}
