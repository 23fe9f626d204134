//! One function per subcommand: resolve options, call the library, hand
//! tables and reports to [`Output`].

use crate::config::{
    parse_complex, parse_f64, parse_list, positive, DistArgs, FlowArgs, SelftestArgs, Settings, SpectrumArgs,
    StableArgs, TransformArgs, WalkArgs,
};
use crate::output::{Cell, Output, Table};
use crate::svg::{Plot, Series};
use crate::CliError;
use levy_rg::density::{from_spectral, l1_distance, to_spectral, GridSpec};
use levy_rg::flow::{classify_regime_full, detect_two_cycle, reflection_defect, FlowOptions};
use levy_rg::io::read_density_csv;
use levy_rg::spectrum::{delta_eigenvector_check, eigen_perturbation, tail_asymptote, verify_eigen_report};
use levy_rg::stable::{self, phase_bound, StableParams, TestDensityParams};
use levy_rg::transform::{apply_spatial, apply_spectral, ScaleParam};
use levy_rg::walk::{fluid_limit_spec, scaling_route_error, StepLaw};
use levy_rg::{acceptance, ClosedForm, GridDensity, SpectralFunction, C64};
use serde::Serialize;
use serde_json::json;
use std::path::PathBuf;

/// A builtin start or step law.
#[derive(Debug, Clone, Serialize)]
pub struct Dist {
    pub name: String,
    pub cf: ClosedForm,
    /// Typical width, used for default grids and wavenumber windows.
    pub width: f64,
    pub heavy: bool,
}

const DIST_KEYS: &[(&str, &[&str])] = &[
    ("gaussian", &["sigma"]),
    ("cauchy", &["scale"]),
    ("laplace", &["scale"]),
    ("uniform", &["lo", "hi"]),
    ("pareto", &["nu", "x0"]),
    ("stable", &["alpha", "a_coef", "modulus", "phi"]),
    ("test-density", &["alpha", "c1", "c2"]),
];

fn given(d: &DistArgs) -> Vec<&'static str> {
    let mut v = Vec::new();
    macro_rules! check {
        ($($f:ident),*) => { $(if d.$f.is_some() { v.push(stringify!($f)); })* };
    }
    check!(sigma, scale, lo, hi, nu, x0, alpha, a_coef, modulus, phi, c1, c2);
    v
}

fn stable_from(alpha: Option<f64>, a: Option<&str>, modulus: Option<f64>, phi: Option<f64>) -> Result<StableParams, CliError> {
    let alpha = alpha.unwrap_or(1.0);
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(CliError::Config(format!("--alpha {alpha} must lie in (0, 2]")));
    }
    let coef = match (a, modulus, phi) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(CliError::Config("give either --A or --modulus/--phi, not both".into()))
        }
        (Some(t), None, None) => parse_complex(t, "--A")?,
        (None, m, p) => C64::from_polar(positive("--modulus", m.unwrap_or(1.0))?, p.unwrap_or(0.0)),
    };
    let p = StableParams::new(alpha, coef);
    if !p.admissible {
        return Err(CliError::Config(format!(
            "A = {coef} is inadmissible for alpha = {alpha}: need |arg A| <= {:.6}",
            phase_bound(alpha)
        )));
    }
    Ok(p)
}

pub fn build_dist(d: &DistArgs, default: &str) -> Result<Dist, CliError> {
    let name = d.dist.clone().unwrap_or_else(|| default.to_string());
    let allowed = DIST_KEYS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, k)| *k)
        .ok_or_else(|| {
            let names: Vec<&str> = DIST_KEYS.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!("unknown --dist '{name}'; expected one of {}", names.join(", ")))
        })?;
    for k in given(d) {
        if !allowed.contains(&k) {
            let flag = if k == "a_coef" { "A".to_string() } else { k.replace('_', "-") };
            return Err(CliError::Config(format!("--{flag} does not apply to --dist {name}")));
        }
    }
    let (cf, width, heavy) = match name.as_str() {
        "gaussian" => {
            let s = positive("--sigma", d.sigma.unwrap_or(1.0))?;
            (ClosedForm::Gaussian { sigma: s }, s, false)
        }
        "cauchy" => {
            let s = positive("--scale", d.scale.unwrap_or(1.0))?;
            (ClosedForm::Cauchy { scale: s }, s, true)
        }
        "laplace" => {
            let s = positive("--scale", d.scale.unwrap_or(1.0))?;
            (ClosedForm::Laplace { scale: s }, s, false)
        }
        "uniform" => {
            let (lo, hi) = (d.lo.unwrap_or(0.0), d.hi.unwrap_or(1.0));
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(CliError::Config(format!("uniform needs --lo < --hi, got [{lo}, {hi}]")));
            }
            (ClosedForm::Uniform { lo, hi }, lo.abs().max(hi.abs()), false)
        }
        "pareto" => {
            let nu = d.nu.unwrap_or(1.0);
            if !(nu > 0.0 && nu < 2.0) {
                return Err(CliError::Config(format!("--nu {nu} must lie in (0, 2)")));
            }
            let x0 = positive("--x0", d.x0.unwrap_or(1.0))?;
            (ClosedForm::Pareto { nu, x0 }, x0, true)
        }
        "stable" => {
            let p = stable_from(d.alpha, d.a_coef.as_deref(), d.modulus, d.phi)?;
            if let Some(shift) = p.delta_shift() {
                return Err(CliError::Config(format!("alpha = 1 with Re A = 0 is a point mass at {shift}")));
            }
            let w = p.a.norm().powf(1.0 / p.alpha);
            (ClosedForm::Stable(p), w, p.alpha < 2.0)
        }
        "test-density" => {
            let tp = TestDensityParams::new(d.c1.unwrap_or(1.0), d.c2.unwrap_or(1.0), d.alpha.unwrap_or(0.5))
                .map_err(CliError::from)?;
            let w = tp.predicted_modulus().powf(1.0 / tp.alpha);
            (tp.closed_form(), w, true)
        }
        _ => unreachable!(),
    };
    Ok(Dist { name, cf, width, heavy })
}

fn default_half_width(dist: &Dist) -> f64 {
    match &dist.cf {
        ClosedForm::Uniform { .. } => 4.0 * dist.width,
        ClosedForm::Stable(p) => 50.0 * p.scale().max(dist.width),
        _ if dist.heavy => 200.0 * dist.width,
        _ => 20.0 * dist.width,
    }
}

fn position_grid(settings: &Settings, dist: Option<&Dist>) -> Result<GridSpec, CliError> {
    let l = settings.grid_l.unwrap_or_else(|| dist.map_or(20.0, default_half_width));
    GridSpec::symmetric(settings.grid_n, l).map_err(CliError::from)
}

fn sample(dist: &Dist, spec: GridSpec) -> Result<GridDensity, CliError> {
    match &dist.cf {
        ClosedForm::Stable(p) if p.pdf_closed_form(0.0).is_none() => Ok(stable::density(p, spec)?),
        cf => Ok(GridDensity::from_fn(spec, |x| cf.pdf(x).unwrap_or(0.0))?),
    }
}

fn density_table(name: &str, d: &GridDensity, path: Option<PathBuf>) -> Table {
    let mut t = Table::new(name, &["x", "value"]);
    for (i, &v) in d.values.iter().enumerate() {
        t.push(vec![d.x(i).into(), v.into()]);
    }
    t.path = path;
    t
}

fn spectrum_table(name: &str, s: &SpectralFunction) -> Table {
    let mut t = Table::new(name, &["k", "re", "im"]);
    for (j, v) in s.values.iter().enumerate() {
        t.push(vec![s.k(j).into(), v.re.into(), v.im.into()]);
    }
    t
}

fn line_plot(title: &str, x_label: &str, y_label: &str, series: Vec<(&str, Vec<f64>, Vec<f64>)>, log_x: bool, log_y: bool) -> Plot {
    Plot {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        log_x,
        log_y,
        series: series
            .into_iter()
            .map(|(label, xs, ys)| Series { label: label.into(), points: xs.into_iter().zip(ys).collect() })
            .collect(),
    }
}

fn plot_columns(t: &Table, x: &str, ys: &[&str], title: &str, log_x: bool, log_y: bool) -> Plot {
    let xs = t.column(x).unwrap_or_default();
    let series = ys.iter().map(|y| (*y, xs.clone(), t.column(y).unwrap_or_default())).collect();
    line_plot(title, x, &ys.join(", "), series, log_x, log_y)
}

pub fn transform(settings: &Settings, args: TransformArgs, dist_args: DistArgs) -> Result<Output, CliError> {
    let a = args.a.unwrap_or(2.0);
    let steps = args.steps.unwrap_or(1);
    let single = args.single.unwrap_or(false);
    let spectral = args.spectral.unwrap_or(false);
    if steps == 0 {
        return Err(CliError::Config("--steps must be at least 1".into()));
    }
    let scale = if single {
        if steps != 1 {
            return Err(CliError::Config("--single applies the map once; drop --steps".into()));
        }
        ScaleParam::new(a)?
    } else {
        ScaleParam::for_flow(a).map_err(|e| CliError::Config(format!("{e}; pass --single to apply the map once with |a| <= 1")))?
    };

    let (input, dist) = match &args.input {
        Some(path) => {
            if dist_args.dist.is_some() || !given(&dist_args).is_empty() {
                return Err(CliError::Config("--input replaces --dist and its parameters".into()));
            }
            let file = std::fs::File::open(path).map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?;
            let d = read_density_csv(file).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            (d, None)
        }
        None => {
            let dist = build_dist(&dist_args, "gaussian")?;
            let spec = position_grid(settings, Some(&dist))?;
            (sample(&dist, spec)?, Some(dist))
        }
    };
    let mut d = input.clone();
    for _ in 0..steps {
        d = apply_spatial(&d, scale)?;
    }

    let params = json!({
        "a": a,
        "steps": steps,
        "single": single,
        "spectral": spectral,
        "input": args.input,
        "dist": dist,
        "grid": { "n": input.len(), "x_min": input.x_min, "dx": input.dx },
        "out": args.out,
    });
    let mut out = Output::new("transform", settings, &params);
    let l1 = l1_distance(&d, &input)?;
    out.report(&json!({
        "input_mass": input.mass(),
        "input_truncated_mass": input.truncated_mass,
        "output_mass": d.mass(),
        "output_truncated_mass": d.truncated_mass,
        "output_min": d.min_value(),
        "output_max": d.max_value(),
        "l1_distance_to_input": l1,
    }))?;
    let mut both = Table::new("transform_compare", &["x", "input", "output"]);
    for i in 0..d.len() {
        both.push(vec![d.x(i).into(), input.values[i].into(), d.values[i].into()]);
    }
    out.plots.push(("transform".into(), plot_columns(&both, "x", &["input", "output"], "T_a density", false, false)));
    out.tables.push(density_table("transform_density", &d, args.out.clone()));
    if spectral {
        let kmax = settings.kmax.unwrap_or(20.0 / dist.as_ref().map_or(1.0, |d| d.width));
        let n_k = settings.grid_n;
        let s0 = match &dist {
            Some(dist) => SpectralFunction::from_closed_form(dist.cf.clone(), kmax, n_k)?,
            None => to_spectral(&input, kmax, n_k)?,
        };
        let mut s = s0;
        for _ in 0..steps {
            s = apply_spectral(&s, scale)?;
        }
        out.tables.push(spectrum_table("transform_spectrum", &s));
    }
    Ok(out)
}

pub fn flow(settings: &Settings, args: FlowArgs, dist_args: DistArgs) -> Result<Output, CliError> {
    let a = args.a.unwrap_or(2.0);
    let steps = args.steps.unwrap_or(25);
    let every = args.checkpoint_every.unwrap_or(5);
    if steps == 0 {
        return Err(CliError::Config("--steps must be at least 1".into()));
    }
    ScaleParam::for_flow(a)?;
    let dist = build_dist(&dist_args, "gaussian")?;
    let mut opts = FlowOptions::rescaled(dist.width);
    if let Some(k) = settings.kmax {
        opts.k_max = k;
    }
    let spec = position_grid(settings, Some(&dist))?;
    let s0 = SpectralFunction::from_closed_form(dist.cf.clone(), opts.k_max, opts.n_k)?;
    let (report, traj) = classify_regime_full(&s0, a, steps, &opts)?;
    let cycle = detect_two_cycle(&traj, opts.tol_cycle);
    let defect = reflection_defect(&traj);

    let mut t = Table::new(
        "flow_trajectory",
        &["n", "delta_distance", "fit_window_delta", "stable_distance", "modulus_at_k0", "nu", "re_b", "im_b", "min_density"],
    );
    for (diag, snap) in traj.diagnostics.iter().zip(&traj.snapshots) {
        let checkpoint = diag.n == steps || (every > 0 && diag.n % every == 0);
        let min_density = if checkpoint { checkpoint_min(snap, spec) } else { None };
        t.push(vec![
            diag.n.into(),
            diag.delta_distance.into(),
            diag.fit_window_delta.into(),
            diag.stable_distance.into(),
            diag.modulus_at_k0.into(),
            diag.fit.map(|f| f.nu).into(),
            diag.fit.map(|f| f.b_plus.re).into(),
            diag.fit.map(|f| f.b_plus.im).into(),
            min_density.into(),
        ]);
    }
    let params = json!({ "a": a, "steps": steps, "checkpoint_every": every, "dist": dist, "options": opts,
        "checkpoint_grid": { "n": spec.n, "x_min": spec.x_min, "dx": spec.dx } });
    let mut out = Output::new("flow", settings, &params);
    out.report(&json!({
        "verdict": report.verdict,
        "confirmed": report.confirmed,
        "evidence": report.evidence,
        "two_cycle": cycle.map(|(p, q)| json!({ "first": p, "second": q })),
        "reflection_defect": defect,
    }))?;
    out.plots.push((
        "flow_distance".into(),
        plot_columns(&t, "n", &["delta_distance", "stable_distance", "modulus_at_k0"], "flow distances", false, true),
    ));
    out.tables.push(t);
    Ok(out)
}

/// Minimum of the inverted snapshot, when the grid resolves its band.
fn checkpoint_min(s: &SpectralFunction, spec: GridSpec) -> Option<f64> {
    let cf = s.closed_form.as_ref()?;
    if cf.eval(std::f64::consts::PI / spec.dx).norm() > 1e-8 {
        return None;
    }
    from_spectral(s, spec).ok().map(|d| d.min_value())
}

pub fn stable_cmd(settings: &Settings, args: StableArgs) -> Result<Output, CliError> {
    let p = stable_from(args.alpha, args.a_coef.as_deref(), args.modulus, args.phi)?;
    if let Some(shift) = p.delta_shift() {
        return Err(CliError::Numeric(format!("alpha = 1 with Re A = 0 is a point mass at x = {shift}; no density")));
    }
    let spec = match settings.grid_l {
        Some(l) => GridSpec::symmetric(settings.grid_n, l)?,
        None => stable::default_grid(&p, settings.grid_n)?,
    };
    let (d, check) = stable::density_with_check(&p, spec)?;
    let with_cf = args.cf.unwrap_or(false);
    let params = json!({ "params": p, "grid": { "n": spec.n, "x_min": spec.x_min, "dx": spec.dx }, "density": args.density, "cf": with_cf });
    let mut out = Output::new("stable", settings, &params);
    out.report(&json!({
        "params": p,
        "admissible": p.admissible,
        "phase_bound": phase_bound(p.alpha),
        "mass": d.mass(),
        "truncated_mass": d.truncated_mass,
        "refinement_difference": check,
        "closed_form_pdf": p.pdf_closed_form(0.0).is_some(),
    }))?;
    let t = density_table("stable_density", &d, args.density.clone());
    out.plots.push(("stable_density".into(), plot_columns(&t, "x", &["value"], "stable density", false, false)));
    out.tables.push(t);
    if with_cf {
        let kmax = settings.kmax.unwrap_or(p.band_limit());
        let s = SpectralFunction::from_closed_form(ClosedForm::Stable(p), kmax, settings.grid_n)?;
        out.tables.push(spectrum_table("stable_cf", &s));
    }
    Ok(out)
}

pub fn spectrum(settings: &Settings, args: SpectrumArgs) -> Result<Output, CliError> {
    let p = stable_from(args.alpha, args.a_coef.as_deref(), None, None)?;
    if !(p.a.re > 0.0) {
        return Err(CliError::Config("the base law needs Re A > 0".into()));
    }
    let a = args.a.unwrap_or(2f64.powf(1.0 / p.alpha));
    let s_list = match &args.s {
        Some(text) => parse_list(text, "--s", |t| parse_complex(t, "--s"))?,
        None => [0.5, 1.0, 2.0].iter().map(|f| C64::new(f * p.alpha, 0.0)).collect(),
    };
    let b_plus = parse_complex(args.b_plus.as_deref().unwrap_or("1"), "--b-plus")?;
    let b_minus = parse_complex(args.b_minus.as_deref().unwrap_or("1"), "--b-minus")?;
    let probe_units = parse_list(args.probes.as_deref().unwrap_or("100,200,500,1000"), "--probes", |t| parse_f64(t, "--probes"))?;
    let base_scale = p.scale().max(p.a.norm().powf(1.0 / p.alpha));
    let probes: Vec<f64> = probe_units.iter().map(|u| u * base_scale).collect();
    let delta = args.delta.unwrap_or(false);

    let mut t = Table::new(
        "spectrum_eigen",
        &[
            "s_re", "s_im", "alpha", "a", "lambda_expected_re", "lambda_expected_im", "lambda_measured_re",
            "lambda_measured_im", "residual", "tail_limit_expected_re", "tail_limit_expected_im",
            "tail_limit_fitted_re", "tail_limit_fitted_im", "tail_relative_error",
        ],
    );
    let mut rows = Vec::new();
    for &s in &s_list {
        let e = eigen_perturbation(p, s, b_plus, b_minus)?;
        let check = verify_eigen_report(&e, a)?;
        let tail = if s.re > 0.0 { tail_asymptote(&e, &probes).ok() } else { None };
        t.push(vec![
            s.re.into(),
            s.im.into(),
            p.alpha.into(),
            a.into(),
            check.lambda_expected.re.into(),
            check.lambda_expected.im.into(),
            check.lambda_measured.re.into(),
            check.lambda_measured.im.into(),
            check.residual.into(),
            tail.as_ref().map(|r| r.expected_limit.re).into(),
            tail.as_ref().map(|r| r.expected_limit.im).into(),
            tail.as_ref().map(|r| r.fitted_limit.re).into(),
            tail.as_ref().map(|r| r.fitted_limit.im).into(),
            tail.as_ref().map(|r| r.relative_error).into(),
        ]);
        rows.push(json!({
            "s": s,
            "alpha": p.alpha,
            "lambda_expected": check.lambda_expected,
            "lambda_measured": check.lambda_measured,
            "residual": check.residual,
            "tail_limit_expected": tail.as_ref().map(|r| r.expected_limit),
            "tail_limit_fitted": tail.as_ref().map(|r| r.fitted_limit),
        }));
    }
    let params = json!({ "base": p, "a": a, "s": s_list, "b_plus": b_plus, "b_minus": b_minus, "probes": probes, "delta": delta });
    let mut out = Output::new("spectrum", settings, &params);
    let mut report = json!({ "eigen": rows });
    if delta {
        let r = delta_eigenvector_check(a)?;
        let mut dt = Table::new("spectrum_delta", &["name", "mu_re", "mu_im", "residual"]);
        for pr in &r.probes {
            dt.push(vec![pr.name.clone().into(), pr.mu.re.into(), pr.mu.im.into(), pr.residual.into()]);
        }
        report["delta"] = json!({ "a": r.a, "delta_residual": r.delta_residual, "min_probe_residual": r.min_probe_residual });
        out.tables.push(dt);
    }
    out.report(&report)?;
    let mut series = Vec::new();
    let lam: Vec<f64> = s_list.iter().map(|s| s.re).collect();
    series.push(("residual", lam.clone(), t.column("residual").unwrap_or_default()));
    out.plots.push(("spectrum_residual".into(), line_plot("eigen relation residual", "Re s", "residual", series, false, true)));
    out.tables.push(t);
    Ok(out)
}

pub fn walk(settings: &Settings, args: WalkArgs) -> Result<Output, CliError> {
    let name = args.steps_dist.clone().unwrap_or_else(|| "gaussian".into());
    if !["gaussian", "laplace", "uniform", "cauchy"].contains(&name.as_str()) {
        return Err(CliError::Config(format!("unknown --steps-dist '{name}'; expected gaussian, laplace, uniform or cauchy")));
    }
    let dist_args = DistArgs {
        dist: Some(name.clone()),
        lo: (name == "uniform").then_some(-1.0),
        hi: (name == "uniform").then_some(1.0),
        ..Default::default()
    };
    let dist = build_dist(&dist_args, &name)?;
    let lambdas = parse_list(args.lambdas.as_deref().unwrap_or("4,16,64"), "--lambdas", |t| {
        positive("--lambdas", parse_f64(t, "--lambdas")?)
    })?;
    let t = positive("--t", args.t.unwrap_or(1.0))?;
    let tau = positive("--tau", args.tau.unwrap_or(1.0))?;
    let closed = args.closed.unwrap_or(false);
    let (step, grid) = if closed {
        (StepLaw::Closed(dist.cf.clone()), None)
    } else {
        let spec = position_grid(settings, Some(&dist))?;
        (StepLaw::Grid(sample(&dist, spec)?), Some(spec))
    };
    let spec = fluid_limit_spec(&step, tau, lambdas[lambdas.len() - 1])?;
    let points = scaling_route_error(&step, &spec, &lambdas, t)?;

    let mut table = Table::new("walk_sweep", &["lambda", "steps", "remainder", "error"]);
    for p in &points {
        table.push(vec![p.lambda.into(), p.steps.into(), p.remainder.into(), p.error.into()]);
    }
    let params = json!({
        "steps_dist": name, "lambdas": lambdas, "t": t, "tau": tau, "closed": closed,
        "grid": grid.map(|g| json!({ "n": g.n, "x_min": g.x_min, "dx": g.dx })),
    });
    let mut out = Output::new("walk", settings, &params);
    out.report(&json!({
        "fluid_limit": { "alpha": spec.alpha, "c": spec.c, "tau": spec.tau },
        "points": points.iter().map(|p| json!({ "lambda": p.lambda, "error": p.error })).collect::<Vec<_>>(),
    }))?;
    out.plots.push(("walk_error".into(), plot_columns(&table, "lambda", &["error"], "fluid-limit error", true, true)));
    out.tables.push(table);
    Ok(out)
}

pub fn selftest(settings: &Settings, args: SelftestArgs) -> Result<(Output, usize), CliError> {
    let n = acceptance::names().len();
    let ids = match &args.only {
        Some(text) => parse_list(text, "--only", |t| {
            let id: usize = t.parse().map_err(|_| CliError::Config(format!("--only: '{t}' is not an id")))?;
            if id == 0 || id > n {
                return Err(CliError::Config(format!("--only: id {id} outside 1..={n}")));
            }
            Ok(id)
        })?,
        None => (1..=n).collect(),
    };
    let mut table = Table::new("selftest", &["id", "name", "passed", "checks", "failed_checks", "error"]);
    let mut results = Vec::new();
    let mut failed = 0;
    for &id in &ids {
        let r = acceptance::run(id, settings.seed);
        println!("{}", r.line());
        if !r.passed {
            failed += 1;
            for m in r.measurements.iter().filter(|m| !m.ok) {
                println!("        {} = {:.3e} ({})", m.label, m.value, m.bound);
            }
        }
        let bad = r.measurements.iter().filter(|m| !m.ok).count();
        table.push(vec![
            id.into(),
            r.name.into(),
            r.passed.into(),
            r.measurements.len().into(),
            bad.into(),
            r.error.clone().map_or(Cell::Empty, Cell::Text),
        ]);
        // timings stay out of the files so that reruns are byte-identical
        results.push(json!({ "id": r.id, "name": r.name, "passed": r.passed, "measurements": r.measurements, "error": r.error }));
    }
    let mut out = Output::new("selftest", settings, &json!({ "ids": ids }));
    out.report(&json!({ "passed": ids.len() - failed, "failed": failed, "criteria": results }))?;
    out.tables.push(table);
    Ok((out, failed))
}
