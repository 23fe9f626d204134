use levy_rg::stable::{self, StableParams};
use levy_rg::transform::{apply_spatial, ScaleParam};
use levy_rg::{GridDensity, GridSpec, C64};
use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levy-rg"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = run(dir, args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap()
}

fn read_csv(p: &Path) -> Vec<Vec<f64>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap_or(f64::NAN)).collect()).collect()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(d, &["--grid-n", "1000", "transform"]), 2);
    assert_eq!(code(d, &["transform", "--dist", "weibull"]), 2);
    assert_eq!(code(d, &["transform", "--dist", "gaussian", "--nu", "1"]), 2);
    assert_eq!(code(d, &["stable", "--alpha", "0.5", "--A", "0+1i"]), 2);
    assert_eq!(code(d, &["stable", "--alpha", "2.5"]), 2);
    assert_eq!(code(d, &["flow", "--a", "1"]), 2);
    assert_eq!(code(d, &["selftest", "--only", "99"]), 2);
    assert_eq!(code(d, &["walk", "--lambdas", "4,x"]), 2);
    assert_eq!(code(d, &["--no-such-flag"]), 2);

    let bad = d.join("bad.csv");
    std::fs::write(&bad, "x,value\n0,1\n0.1,oops\n").unwrap();
    assert_eq!(code(d, &["transform", "--input", bad.to_str().unwrap()]), 2);
    let uneven = d.join("uneven.csv");
    std::fs::write(&uneven, "x,value\n0,0.1\n0.1,0.2\n0.5,0.1\n").unwrap();
    assert_eq!(code(d, &["transform", "--input", uneven.to_str().unwrap()]), 2);

    let cfg = d.join("c.toml");
    std::fs::write(&cfg, "grid_n = 1024\n[transform]\nsigmaa = 2\n").unwrap();
    let o = run(d, &["--config", cfg.to_str().unwrap(), "transform"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key 'sigmaa'"));
}

#[test]
fn point_mass_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["stable", "--alpha", "1", "--A", "0+1i"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("point mass"));
}

#[test]
fn cauchy_survives_transform_at_a_two() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--grid-n", "8192", "transform", "--dist", "cauchy", "--a", "2"]);
    let rows = read_csv(&dir.path().join("transform_density.csv"));
    assert_eq!(rows.len(), 8192);
    let worst = rows
        .iter()
        .map(|r| (r[1] - 1.0 / (std::f64::consts::PI * (1.0 + r[0] * r[0]))).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-4, "{worst}");
}

#[test]
fn gaussian_flow_collapses() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--format", "json", "flow", "--dist", "gaussian", "--a", "2", "--steps", "20"]);
    let j = read_json(&dir.path().join("flow.json"));
    assert_eq!(j["report"]["verdict"]["kind"], "delta_limit");
    assert_eq!(j["report"]["confirmed"], true);
    assert_eq!(j["tables"]["flow_trajectory"]["rows"].as_array().unwrap().len(), 21);
}

#[test]
fn negative_scale_gives_two_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let a = format!("{}", -(2f64.powf(1.0 / 1.5)));
    ok(dir.path(), &["--format", "json", "flow", "--dist", "stable", "--alpha", "1.5", "--A", "1+0.5i", "--a", &a]);
    let j = read_json(&dir.path().join("flow.json"));
    assert_eq!(j["report"]["verdict"]["kind"], "two_cycle");
    let second = &j["report"]["two_cycle"]["second"];
    assert!((second["im_A"].as_f64().unwrap() - 0.5).abs() < 1e-3);
}

#[test]
fn stable_alpha_one_is_cauchy() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--grid-n", "4096", "stable", "--alpha", "1", "--A", "1"]);
    let rows = read_csv(&dir.path().join("stable_density.csv"));
    let worst = rows
        .iter()
        .map(|r| (r[1] - 1.0 / (std::f64::consts::PI * (1.0 + r[0] * r[0]))).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn spectrum_reports_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["--format", "json", "spectrum", "--alpha", "1", "--A", "1", "--s", "2"]);
    let j = read_json(&dir.path().join("spectrum.json"));
    let t = &j["tables"]["spectrum_eigen"];
    let cols: Vec<&str> = t["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    let row = &t["rows"][0];
    let get = |name: &str| row[cols.iter().position(|c| *c == name).unwrap()].as_f64().unwrap();
    assert!((get("lambda_expected_re") - 0.5).abs() < 1e-15);
    assert!((get("lambda_measured_re") - 0.5).abs() < 1e-6);
    assert!(get("residual") < 1e-5);
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["--grid-n", "2048", "--format", "json", "--svg", "--seed", "7", "walk", "--lambdas", "4,16"];
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    ok(a.path(), &args);
    ok(b.path(), &args);
    for name in ["walk.json", "walk_error.svg"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        // the out-dir differs between the runs and is echoed in the config
        let strip = |v: Vec<u8>, d: &Path| String::from_utf8(v).unwrap().replace(d.to_str().unwrap(), "OUT");
        assert_eq!(strip(x, a.path()), strip(y, b.path()), "{name}");
    }
    let again = tempfile::tempdir().unwrap();
    for _ in 0..2 {
        ok(again.path(), &["--grid-n", "1024", "stable", "--alpha", "0.7"]);
    }
    let first = std::fs::read(again.path().join("stable_density.csv")).unwrap();
    ok(again.path(), &["--grid-n", "1024", "stable", "--alpha", "0.7"]);
    assert_eq!(first, std::fs::read(again.path().join("stable_density.csv")).unwrap());
}

#[test]
fn flags_beat_file_beat_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "grid_n = 1024\nformat = \"json\"\n[transform]\na = 3.0\nsteps = 2\ndist = \"laplace\"\n").unwrap();
    ok(dir.path(), &["--config", cfg.to_str().unwrap(), "transform", "--a", "2"]);
    let j = read_json(&dir.path().join("transform.json"));
    let c = &j["config"];
    assert_eq!(c["command"], "transform");
    assert_eq!(c["global"]["grid_n"], 1024);
    assert_eq!(c["global"]["format"], "json");
    assert_eq!(c["params"]["a"], 2.0);
    assert_eq!(c["params"]["steps"], 2);
    assert_eq!(c["params"]["dist"]["name"], "laplace");
    assert_eq!(c["global"]["seed"], levy_rg::acceptance::DEFAULT_SEED);
    assert_eq!(j["tables"]["transform_density"]["rows"].as_array().unwrap().len(), 1024);
}

#[test]
fn every_json_output_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["stable", "--alpha", "1.2"],
        &["spectrum", "--delta"],
        &["walk", "--lambdas", "4"],
        &["selftest", "--only", "6"],
    ];
    for args in runs {
        let mut full = vec!["--grid-n", "1024", "--format", "json"];
        full.extend_from_slice(args);
        ok(dir.path(), &full);
        let j = read_json(&dir.path().join(format!("{}.json", args[0])));
        assert_eq!(j["config"]["command"], args[0]);
        assert_eq!(j["config"]["global"]["grid_n"], 1024);
        assert!(j["config"]["params"].is_object());
    }
    ok(dir.path(), &["--grid-n", "1024", "stable", "--alpha", "1.2"]);
    let j = read_json(&dir.path().join("stable_report.json"));
    assert_eq!(j["config"]["global"]["format"], "csv");
}

#[test]
fn svg_plots_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(dir.path(), &["--grid-n", "1024", "--svg", "flow", "--dist", "cauchy", "--steps", "5"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("flow_distance.svg"));
    let s = std::fs::read_to_string(dir.path().join("flow_distance.svg")).unwrap();
    assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    assert!(s.contains("<polyline"));
}

#[test]
fn stable_output_is_the_library_density() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.csv");
    ok(dir.path(), &["--grid-n", "2048", "stable", "--alpha", "1.3", "--A", "1-0.2i", "--density", out.to_str().unwrap()]);
    let p = StableParams::new(1.3, C64::new(1.0, -0.2));
    let d = stable::density(&p, stable::default_grid(&p, 2048).unwrap()).unwrap();
    let rows = read_csv(&out);
    assert_eq!(rows.len(), d.len());
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], d.x(i));
        assert_eq!(r[1], d.values[i]);
    }
}

#[test]
fn csv_input_matches_the_library_map() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GridSpec::symmetric(1024, 15.0).unwrap();
    let d = GridDensity::from_fn(spec, |x| 0.5 * (-x.abs()).exp()).unwrap();
    let input = dir.path().join("in.csv");
    levy_rg::io::write_density_csv(&d, std::fs::File::create(&input).unwrap()).unwrap();
    ok(dir.path(), &["transform", "--input", input.to_str().unwrap(), "--a", "1.5", "--steps", "2"]);
    let expected = apply_spatial(&apply_spatial(&d, ScaleParam::new(1.5).unwrap()).unwrap(), ScaleParam::new(1.5).unwrap()).unwrap();
    let rows = read_csv(&dir.path().join("transform_density.csv"));
    for (i, r) in rows.iter().enumerate() {
        assert!((r[1] - expected.values[i]).abs() <= 1e-15 * expected.max_value(), "{i}");
    }
}

#[test]
fn selftest_subset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(dir.path(), &["selftest", "--only", "1,4,6"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches("[PASS]").count(), 3, "{stdout}");
    let rows = std::fs::read_to_string(dir.path().join("selftest.csv")).unwrap();
    assert_eq!(rows.lines().count(), 4);
}
