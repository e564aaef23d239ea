use std::fs;
use std::path::Path;
use std::process::Command;

use gausstv::cli::{load_fields, main_with_args, ExperimentConfig, Task, SCHEMA_VERSION};
use gausstv::{build_grid, solve, GridSpec, Integrand, ScalarField, SolverParams};
use serde_json::Value;

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn results(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("results.json")).unwrap()).unwrap()
}

const QUADRATIC_SOLVE: &str = "\
integrand.kind = quadratic
data.kind = hermite
data.degree = 1
solver.gap_tol = 1e-12
";

#[test]
fn quadratic_solve_reproduces_half_x() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "solve.cfg", QUADRATIC_SOLVE);
    let out = tmp.path().join("out");
    let code = main_with_args(["gausstv", "solve", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "csv,json,svg"]);
    assert_eq!(code, 0);
    let r = results(&out);
    assert_eq!(r["schema_version"], SCHEMA_VERSION);
    assert_eq!(r["passed"], true);
    assert!(r["results"]["gap"].as_f64().unwrap() <= 1e-6);
    let table = load_fields(&out.join("fields.csv")).unwrap();
    let worst = table
        .points
        .iter()
        .zip(&table.u)
        .filter(|(x, _)| x[0].abs() <= 3.0)
        .map(|(x, u)| (u - x[0] / 2.0).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "{worst}");
    let svg = fs::read_to_string(out.join("u.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn fields_file_matches_in_memory_solution_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "solve.cfg", QUADRATIC_SOLVE);
    let out = tmp.path().join("out");
    assert_eq!(main_with_args(["gausstv", "solve", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);

    let config = ExperimentConfig::from_file(Path::new(&cfg), Task::Solve).unwrap();
    let grid = build_grid(&config.grid).unwrap();
    let g = ScalarField::coordinate(&grid, 0);
    let sol = solve(&config.integrand, &g, &config.solver).unwrap();
    let table = load_fields(&out.join("fields.csv")).unwrap();
    let u = table.u_field(&grid).unwrap();
    assert!(u.values().iter().zip(sol.u.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    let phi = table.phi_field(&grid).unwrap();
    assert!(phi.values().iter().zip(sol.phi.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn isoperimetric_half_volume_perimeter() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("iso");
    let cfg = write_config(tmp.path(), "iso.cfg", "isoperimetric.volume = 0.5\n");
    assert_eq!(main_with_args(["gausstv", "isoperimetric", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let r = results(&out);
    let perimeter = r["results"]["perimeter"].as_f64().unwrap();
    assert!((perimeter - 0.39894).abs() <= 1e-3, "{perimeter}");
    assert_eq!(r["results"]["tilted"], true);
}

#[test]
fn malformed_config_exits_one_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    for text in ["grid.nodes = 3\nbogus.key = 1\n", "grid.nodes 3\n", "integrand.kind = quadratic\nintegrand.p = 2\n"] {
        let cfg = write_config(tmp.path(), "bad.cfg", text);
        let code = main_with_args(["gausstv", "solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 1, "{text}");
        assert!(!out.exists());
    }
    // runtime validation after parsing: GH grids are rejected by classify
    let cfg = write_config(tmp.path(), "gh.cfg", "grid.scheme = gauss_hermite\ngrid.nodes = 17\n");
    assert_eq!(main_with_args(["gausstv", "classify", "--config", &cfg, "--out", out.to_str().unwrap()]), 1);
    assert!(!out.exists());
    assert_eq!(main_with_args(["gausstv", "solve", "--format", "pdf", "--out", out.to_str().unwrap()]), 1);
    assert_eq!(main_with_args(["gausstv", "nonsense"]), 1);
}

#[test]
fn unknown_keys_are_listed_in_the_error() {
    let err = ExperimentConfig::parse("grid.nodes = 9\nsolver.tolerance = 1\nplot.colour = red\n", Task::Solve).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("solver.tolerance") && msg.contains("plot.colour"), "{msg}");
}

#[test]
fn property_failure_exits_two_and_keeps_artifacts() {
    // the norm flow of g = x reaches u ≡ 0 at t = 1; at the default gap the
    // last iterates are not convex to the absolute tolerance
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("flow");
    let cfg = write_config(tmp.path(), "flow.cfg", "integrand.kind = euclidean_norm\nflow.dt = 0.1\nflow.steps = 10\n");
    assert_eq!(main_with_args(["gausstv", "flow", "--config", &cfg, "--out", out.to_str().unwrap()]), 2);
    let r = results(&out);
    assert_eq!(r["passed"], false);
    assert_eq!(r["properties"]["convexity_preserved"], false);
    assert!(out.join("fields.csv").exists());
}

#[test]
fn every_task_runs_with_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    for (task, plot) in [
        ("solve", "u.svg"),
        ("levelsets", "levelsets.svg"),
        ("classify", "set.svg"),
        ("flow", "flow.svg"),
        ("sweep", "sweep.svg"),
    ] {
        let out = tmp.path().join(task);
        let code = main_with_args(["gausstv", task, "--out", out.to_str().unwrap(), "--format", "json,svg", "--seed", "7"]);
        assert_eq!(code, 0, "{task}");
        let r = results(&out);
        assert_eq!(r["seed"], 7);
        assert_eq!(r["task"], task);
        assert!(out.join(plot).exists(), "{task}");
        assert!(!out.join("fields.csv").exists());
    }
}

#[test]
fn tabulated_data_and_two_dimensional_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = build_grid(&GridSpec::gauss_hermite(2, 17)).unwrap();
    let mut table = String::from("x1,x2,g\n");
    for i in 0..grid.len() {
        let x = grid.point(i);
        table.push_str(&format!("{:.17e},{:.17e},{}\n", x[0], x[1], (x[0] - 0.5).abs() + 0.3 * (x[0] + x[1]).powi(2)));
    }
    fs::write(tmp.path().join("g.csv"), table).unwrap();
    let cfg = write_config(
        tmp.path(),
        "tab.cfg",
        "grid.scheme = gauss_hermite\ngrid.dimension = 2\ngrid.nodes = 17\nintegrand.kind = anisotropic_norm\nintegrand.weights = 1, 4\ndata.kind = tabulated\ndata.file = g.csv\n",
    );
    for task in ["solve", "sweep", "levelsets"] {
        let out = tmp.path().join(task);
        let code = main_with_args(["gausstv", task, "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "csv,json,svg"]);
        assert_eq!(code, 0, "{task}");
    }
    let r = results(&tmp.path().join("solve"));
    assert_eq!(r["properties"]["convex_if_data_convex"], true);
    assert_eq!(r["results"]["convexity"]["data"]["passed"], true);
}

#[test]
fn binary_reports_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_gausstv");
    let cfg = write_config(tmp.path(), "solve.cfg", QUADRATIC_SOLVE);
    let ok = Command::new(bin)
        .args(["solve", "--config", &cfg, "--out"])
        .arg(tmp.path().join("ok"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("results.json"));
    let bad = Command::new(bin)
        .args(["solve", "--config", "/nonexistent/config", "--out"])
        .arg(tmp.path().join("bad"))
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error"));
}

#[test]
fn solver_defaults_match_library() {
    let c = ExperimentConfig::defaults(Task::Solve);
    assert_eq!(c.integrand, Integrand::Quadratic { mu: 1.0 });
    assert_eq!(c.solver.gap_tol, SolverParams::default().gap_tol);
}
