//! Iterated RG maps in spectral space: trajectories, regime verdicts,
//! two-cycles for negative scales and the positivity experiment.

use crate::cf::ClosedForm;
use crate::density::{cf_sup_distance, cf_sup_distance_to, invert_closed_form_periodic, GridSpec, InversionOptions, SpectralFunction};
use crate::error::{Error, Result};
use crate::numerics::{linear_fit, logspace};
use crate::par;
use crate::quad;
use crate::special::C64;
use crate::stable::{alpha_from_scale, subtract_images, StableParams, TestDensityParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub k_max: f64,
    pub n_k: usize,
    /// `lo <= |k| <= hi` for distances to candidate limits.
    pub dist_window: (f64, f64),
    /// Starting window of the small-k fit.
    pub fit_window: (f64, f64),
    /// Reference wavenumber of the divergence test.
    pub k0: f64,
    pub tol_final: f64,
    /// `|nu - alpha|` below which a start is tuned.
    pub nu_tol: f64,
    pub tol_cycle: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            k_max: 20.0,
            n_k: 4096,
            dist_window: (1e-2, 10.0),
            fit_window: (1e-4, 1e-2),
            k0: 1.0,
            tol_final: 1e-3,
            nu_tol: 0.02,
            tol_cycle: 1e-6,
        }
    }
}

impl FlowOptions {
    /// Options with every wavenumber divided by `scale`.
    pub fn rescaled(scale: f64) -> Self {
        let d = Self::default();
        Self {
            k_max: d.k_max / scale,
            dist_window: (d.dist_window.0 / scale, d.dist_window.1 / scale),
            fit_window: (d.fit_window.0 / scale, d.fit_window.1 / scale),
            k0: d.k0 / scale,
            ..d
        }
    }
}

/// Small-k fit `-ln cf(k) = B+ k^nu` (k > 0), `B- |k|^nu` (k < 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallKFit {
    pub nu: f64,
    pub nu_minus: f64,
    pub b_plus: C64,
    pub b_minus: C64,
    /// Upper edge of the window actually used.
    pub k_hi: f64,
}

/// Per-step record of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub n: usize,
    /// `sup |cf_n - 1|` over the distance window.
    pub delta_distance: f64,
    /// `sup |cf_n - 1|` over the starting fit window.
    pub fit_window_delta: f64,
    /// Distance to the tuned stable law, when there is one.
    pub stable_distance: Option<f64>,
    /// `|cf_n(k0)|`.
    pub modulus_at_k0: f64,
    pub fit: Option<SmallKFit>,
    /// `2 Re B` when the fitted exponent is 2.
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub a: f64,
    pub snapshots: Vec<SpectralFunction>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Stable law used for `stable_distance`.
    pub reference: Option<StableParams>,
}

/// `-ln cf` at `k`, exact for closed forms and from the samples otherwise.
fn neg_log_at(s: &SpectralFunction, k: f64) -> Option<C64> {
    match &s.closed_form {
        Some(cf) => Some(cf.neg_log(k)),
        None => s.try_eval(k).filter(|v| v.norm() > 0.0).map(|v| -v.ln()),
    }
}

fn fit_side(s: &SpectralFunction, sign: f64, lo: f64, hi: f64) -> Option<(f64, C64)> {
    let ks = logspace(lo, hi, 24);
    let mut lx = Vec::with_capacity(ks.len());
    let mut ly = Vec::with_capacity(ks.len());
    let mut vals = Vec::with_capacity(ks.len());
    for &k in &ks {
        let v = neg_log_at(s, sign * k)?;
        let m = v.norm();
        if !(m > 0.0 && m.is_finite()) {
            return None;
        }
        lx.push(k.ln());
        ly.push(m.ln());
        vals.push((k, v));
    }
    let (nu, _, _) = linear_fit(&lx, &ly)?;
    if !(nu > 0.0 && nu.is_finite()) {
        return None;
    }
    let b = vals.iter().map(|&(k, v)| v / k.powf(nu)).sum::<C64>() / vals.len() as f64;
    Some((nu, b))
}

/// Fits the small-k expansion on `window`, sliding the window down by
/// decades until `|-ln cf| <= 1e-3` at its top so that higher orders are
/// negligible.
pub fn fit_small_k(s: &SpectralFunction, window: (f64, f64)) -> Result<SmallKFit> {
    let (mut lo, mut hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Window(format!("fit window ({lo}, {hi}) must satisfy 0 < lo < hi")));
    }
    for _ in 0..40 {
        let top = [hi, -hi]
            .iter()
            .map(|&k| neg_log_at(s, k).map_or(f64::INFINITY, |v| v.norm()))
            .fold(0.0, f64::max);
        if top <= 1e-3 {
            break;
        }
        lo /= 10.0;
        hi /= 10.0;
    }
    if s.closed_form.is_none() && (hi - lo) < 4.0 * s.dk {
        return Err(Error::Fit(format!("k-grid spacing {} cannot resolve the fit window", s.dk)));
    }
    let plus = fit_side(s, 1.0, lo, hi);
    let minus = fit_side(s, -1.0, lo, hi);
    match (plus, minus) {
        (Some((nu, b_plus)), Some((nu_minus, b_minus))) => Ok(SmallKFit { nu, nu_minus, b_plus, b_minus, k_hi: hi }),
        _ => Err(Error::Fit("no power-law small-k expansion on the fit window".into())),
    }
}

fn diagnose(n: usize, s: &SpectralFunction, reference: Option<&StableParams>, opts: &FlowOptions) -> Result<StepDiagnostics> {
    let one = ClosedForm::One;
    let delta_distance = cf_sup_distance_to(s, &one, opts.dist_window)?;
    let fit_window_delta = window_delta(s, opts.fit_window);
    let stable_distance = match reference {
        Some(p) => Some(cf_sup_distance_to(s, &ClosedForm::Stable(*p), opts.dist_window)?),
        None => None,
    };
    let modulus_at_k0 = s.try_eval(opts.k0).map_or(f64::NAN, |v| v.norm());
    let fit = fit_small_k(s, opts.fit_window).ok();
    let variance = fit.filter(|f| (f.nu - 2.0).abs() < 1e-3).map(|f| 2.0 * f.b_plus.re);
    Ok(StepDiagnostics { n, delta_distance, fit_window_delta, stable_distance, modulus_at_k0, fit, variance })
}

/// `sup |cf - 1|` over `lo <= |k| <= hi`, from the closed form when present.
fn window_delta(s: &SpectralFunction, (lo, hi): (f64, f64)) -> f64 {
    let ks = logspace(lo, hi, 48);
    ks.iter()
        .flat_map(|&k| [k, -k])
        .filter_map(|k| match &s.closed_form {
            Some(cf) => Some(cf.one_minus(k).norm()),
            None => s.try_eval(k).map(|v| (v - 1.0).norm()),
        })
        .fold(0.0, f64::max)
}

fn check_modulus(s: &SpectralFunction, step: usize) -> Result<()> {
    let m = s.max_modulus();
    if m > 1.0 + 1e-6 || !m.is_finite() {
        return Err(Error::Stability { step, modulus: m });
    }
    Ok(())
}

/// `snapshot[n] = cf_0(k / a^n)^{2^n}`, always rebuilt from the start: the
/// closed form is composed exactly, samples are interpolated once per step
/// and squared `n` times.
pub fn iterate(s0: &SpectralFunction, a: f64, steps: usize) -> Result<FlowTrajectory> {
    iterate_with(s0, a, steps, None, &FlowOptions::default())
}

pub fn iterate_with(
    s0: &SpectralFunction,
    a: f64,
    steps: usize,
    reference: Option<StableParams>,
    opts: &FlowOptions,
) -> Result<FlowTrajectory> {
    if steps < 1 {
        return Err(Error::Param("need at least one step".into()));
    }
    if !(a.abs() > 1.0 && a.is_finite()) {
        return Err(Error::Domain(format!("flows need |a| > 1, got {a}")));
    }
    check_modulus(s0, 0)?;
    let mut snapshots = vec![s0.clone()];
    let mut cf = s0.closed_form.clone();
    for n in 1..=steps {
        let next = match cf.as_mut() {
            Some(c) => {
                *c = c.apply_scale(a);
                SpectralFunction::from_closed_form(c.clone(), s0.k_max, s0.n_k())?
            }
            None => {
                let div = a.powi(n as i32);
                let values = par::map_range(s0.n_k(), |j| {
                    let mut v = s0.try_eval(s0.k(j) / div).unwrap_or(C64::new(0.0, 0.0));
                    for _ in 0..n {
                        v = v * v;
                    }
                    v
                });
                SpectralFunction::new(s0.k_max, values, None)?
            }
        };
        check_modulus(&next, n)?;
        snapshots.push(next);
    }
    let diagnostics = par::map_range(snapshots.len(), |n| diagnose(n, &snapshots[n], reference.as_ref(), opts))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(FlowTrajectory { a, snapshots, diagnostics, reference })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    DeltaLimit,
    StableLimit { params: StableParams },
    TwoCycle { first: StableParams, second: StableParams },
    Divergent,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::DeltaLimit => "delta",
            Verdict::StableLimit { .. } => "stable",
            Verdict::TwoCycle { .. } => "two-cycle",
            Verdict::Divergent => "divergent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub alpha: f64,
    /// Fit of the start.
    pub fit: SmallKFit,
    /// Exponent and coefficient used for the tuned limit.
    pub nu: f64,
    pub b: C64,
    pub final_delta_distance: f64,
    pub final_fit_window_delta: f64,
    pub final_stable_distance: Option<f64>,
    pub final_modulus_at_k0: f64,
    /// `fit_window_delta` non-increasing over the second half of the flow.
    pub monotone_delta: bool,
    /// `stable_distance` non-increasing over the second half of the flow.
    pub monotone_stable: bool,
    /// Largest relative change of the fitted exponent and coefficient along
    /// the flow.
    pub nu_drift: f64,
    pub b_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    /// Predicted from `nu` against `alpha` and the sign of `a`.
    pub verdict: Verdict,
    /// Whether the flow met the thresholds of the prediction.
    pub confirmed: bool,
    pub evidence: Evidence,
}

/// Predicts the limit from the small-k expansion and checks it on a flow.
pub fn classify_regime(s0: &SpectralFunction, a: f64, steps: usize, opts: &FlowOptions) -> Result<RegimeReport> {
    classify_regime_full(s0, a, steps, opts).map(|r| r.0)
}

/// As [`classify_regime`], also returning the trajectory.
pub fn classify_regime_full(
    s0: &SpectralFunction,
    a: f64,
    steps: usize,
    opts: &FlowOptions,
) -> Result<(RegimeReport, FlowTrajectory)> {
    let alpha = alpha_from_scale(a)?;
    let fit = fit_small_k(s0, opts.fit_window)?;
    if !(fit.nu > 0.0 && fit.nu <= 2.0 + opts.nu_tol) {
        return Err(Error::Fit(format!("fitted exponent {} outside (0, 2]", fit.nu)));
    }
    // analytic data where the closed form has it
    let (nu, b) = s0
        .closed_form
        .as_ref()
        .and_then(|c| c.small_k_expansion())
        .filter(|(nu, _)| (nu - fit.nu).abs() <= opts.nu_tol)
        .unwrap_or((fit.nu, fit.b_plus));
    let tuned = (nu - alpha).abs() <= opts.nu_tol;
    let reference = tuned.then(|| StableParams::new_unchecked(alpha, b));
    let traj = iterate_with(s0, a, steps, reference, opts)?;
    let last = traj.diagnostics.last().expect("nonempty trajectory");
    let half = traj.diagnostics.len() / 2;
    let tail = &traj.diagnostics[half..];
    let monotone_delta = tail.windows(2).all(|w| w[1].fit_window_delta <= w[0].fit_window_delta * (1.0 + 1e-9));
    let monotone_stable = tail
        .windows(2)
        .all(|w| match (w[0].stable_distance, w[1].stable_distance) {
            (Some(d0), Some(d1)) => d1 <= d0 * (1.0 + 1e-9) + 1e-14,
            _ => true,
        });
    let fits: Vec<SmallKFit> = traj.diagnostics.iter().filter_map(|d| d.fit).collect();
    let nu_drift = fits.iter().map(|f| (f.nu - fit.nu).abs() / fit.nu).fold(0.0, f64::max);
    let b_drift = fits.iter().map(|f| (f.b_plus - fit.b_plus).norm() / fit.b_plus.norm()).fold(0.0, f64::max);

    let (verdict, confirmed) = if nu > alpha + opts.nu_tol {
        (Verdict::DeltaLimit, last.fit_window_delta < opts.tol_final && monotone_delta)
    } else if nu < alpha - opts.nu_tol {
        (Verdict::Divergent, last.modulus_at_k0 < opts.tol_final)
    } else if a < 0.0 {
        match detect_two_cycle(&traj, opts.tol_cycle) {
            Some((p, q)) => (Verdict::TwoCycle { first: p, second: q }, true),
            None => {
                let p = StableParams::new_unchecked(alpha, b);
                let q = StableParams::new_unchecked(alpha, b.conj());
                (Verdict::TwoCycle { first: p, second: q }, false)
            }
        }
    } else {
        let p = StableParams::new_unchecked(alpha, b);
        let ok = last.stable_distance.is_some_and(|d| d < opts.tol_final);
        (Verdict::StableLimit { params: p }, ok)
    };
    let evidence = Evidence {
        alpha,
        fit,
        nu,
        b,
        final_delta_distance: last.delta_distance,
        final_fit_window_delta: last.fit_window_delta,
        final_stable_distance: last.stable_distance,
        final_modulus_at_k0: last.modulus_at_k0,
        monotone_delta,
        monotone_stable,
        nu_drift,
        b_drift,
    };
    Ok((RegimeReport { verdict, confirmed, evidence }, traj))
}

/// Least-squares `A` from `-ln cf(k) = A k^alpha` at `|A| k^alpha` between
/// 0.01 and 1.
fn fit_stable_a(s: &SpectralFunction, alpha: f64, guess: f64) -> Option<C64> {
    let lo = (0.01 / guess).powf(1.0 / alpha);
    let hi = (1.0 / guess).powf(1.0 / alpha).min(s.k_max);
    if !(hi > lo) {
        return None;
    }
    let ks = logspace(lo, hi, 32);
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for &k in &ks {
        let v = neg_log_at(s, k)?;
        let w = k.powf(alpha);
        num += v * w;
        den += w * w;
    }
    Some(num / den)
}

/// `Some((S_{alpha,A}, S_{alpha,conj A}))` once the last snapshots repeat
/// with period two and consecutive snapshots are reflections of each other.
pub fn detect_two_cycle(t: &FlowTrajectory, tol_cycle: f64) -> Option<(StableParams, StableParams)> {
    if !(t.a < -1.0) || t.snapshots.len() < 3 {
        return None;
    }
    let m = t.snapshots.len();
    let (s0, s1, s2) = (&t.snapshots[m - 3], &t.snapshots[m - 2], &t.snapshots[m - 1]);
    let window = (FlowOptions::default().dist_window.0 / 1e3, s0.k_max);
    let period2 = cf_sup_distance(s2, s0, window).ok()?;
    let reflection = (0..s1.n_k())
        .filter(|&j| j > 0)
        .map(|j| {
            let k = s1.k(j);
            let mirror = s2.try_eval(-k).unwrap_or(C64::new(f64::NAN, 0.0));
            (s1.values[j] - mirror).norm()
        })
        .fold(0.0, f64::max);
    if !(period2 <= tol_cycle && reflection <= tol_cycle) {
        return None;
    }
    let alpha = alpha_from_scale(t.a).ok()?;
    let guess = neg_log_at(s2, 1.0).map_or(1.0, |v| v.norm().max(1e-300));
    let a = fit_stable_a(s2, alpha, guess)?;
    Some((StableParams::new_unchecked(alpha, a), StableParams::new_unchecked(alpha, a.conj())))
}

/// Distance between two consecutive snapshots under reflection `k -> -k`.
pub fn reflection_defect(t: &FlowTrajectory) -> Option<f64> {
    let m = t.snapshots.len();
    if m < 2 {
        return None;
    }
    let (s1, s2) = (&t.snapshots[m - 2], &t.snapshots[m - 1]);
    Some(
        (1..s1.n_k())
            .map(|j| (s1.values[j] - s2.try_eval(-s1.k(j)).unwrap_or(C64::new(f64::NAN, 0.0))).norm())
            .fold(0.0, f64::max),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub min_density: f64,
    pub max_density: f64,
    /// Mass on the grid plus the analytic mass of the power tails beyond it.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub params: TestDensityParams,
    pub a: f64,
    pub steps: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub predicted: StableParams,
    pub fitted: StableParams,
    /// `sup |cf_n - S_{alpha, A_predicted}|` on the rescaled distance window.
    pub final_distance: f64,
    pub modulus_rel_error: f64,
    /// Fitted and formula phase `arctan(((c2-c1)/(c1+c2)) tan(pi alpha/2))`.
    pub fitted_phase: f64,
    pub formula_phase: f64,
    /// `P(X < 0)` of the final iterate.
    pub mass_below_zero: f64,
}

impl PositivityReport {
    /// `min / max` over all checkpoints.
    pub fn worst_negativity(&self) -> f64 {
        self.checkpoints.iter().map(|c| c.min_density / c.max_density).fold(f64::INFINITY, f64::min)
    }

    /// Phase agreement within 2% relative or `1e-8` absolute.
    pub fn phase_ok(&self) -> bool {
        let d = (self.fitted_phase - self.formula_phase).abs();
        d <= 0.02 * self.formula_phase.abs() || d <= 1e-8
    }
}

/// Inverts `cf` on a grid reaching `half_width` with spacing set by the
/// point where `|cf| < 1e-12`. Periodic images are removed with the tail
/// series of `tails`.
fn checkpoint_density(cf: &ClosedForm, tails: &StableParams, half_width: f64, k_scale: f64) -> Result<(GridSpec, Vec<f64>)> {
    let mut kb = k_scale;
    while cf.eval(kb).norm() > 1e-12 || cf.eval(1.5 * kb).norm() > 1e-12 {
        kb *= 1.25;
        if kb > 1e12 * k_scale {
            return Err(Error::Numeric("characteristic function does not decay".into()));
        }
    }
    let n = ((2.0 * half_width * kb / PI).ceil() as usize).next_power_of_two().clamp(1 << 12, 1 << 20);
    let spec = GridSpec::symmetric(n, half_width)?;
    let opts = InversionOptions { oversample: 2, band_tol: 1e-12, max_len: 1 << 22 };
    let (mut values, period) = invert_closed_form_periodic(cf, spec, &opts);
    subtract_images(tails, spec, period, &mut values);
    Ok((spec, values))
}

/// `P(X < 0) = 1/2 - (1/pi) int_0^inf Im cf(k) / k dk`.
pub fn mass_below_zero(cf: &ClosedForm, k_scale: f64) -> f64 {
    let mut k_end = k_scale;
    while cf.eval(k_end).norm() > 1e-16 && k_end < 1e12 * k_scale {
        k_end *= 2.0;
    }
    // factor-two panels down to the origin follow the k^alpha structure
    let f = |k: f64| if k > 0.0 { cf.eval(k).im / k } else { 0.0 };
    0.5 - quad::graded(0.0, k_end, 200, f) / PI
}

/// Iterates the test density with `a = 2^{1/alpha}`, inverting to position
/// space every four steps, and compares the end point with the predicted
/// stable law.
pub fn positivity_experiment(tp: &TestDensityParams, steps: usize) -> Result<PositivityReport> {
    let tp = TestDensityParams::new(tp.c1, tp.c2, tp.alpha)?;
    if steps < 1 {
        return Err(Error::Param("need at least one step".into()));
    }
    let alpha = tp.alpha;
    let a = 2f64.powf(1.0 / alpha);
    let predicted = tp.predicted_params();
    let scale = predicted.a.norm().powf(1.0 / alpha);
    let opts = FlowOptions::rescaled(scale);
    let s0 = SpectralFunction::from_closed_form(tp.closed_form(), opts.k_max, opts.n_k)?;
    let traj = iterate_with(&s0, a, steps, Some(predicted), &opts)?;

    let mut schedule: Vec<usize> = (4..=steps).step_by(4).collect();
    if schedule.last() != Some(&steps) {
        schedule.push(steps);
    }
    let half_width = 20.0 * scale;
    let k_scale = 1.0 / scale;
    let tail_mass: f64 = [true, false]
        .iter()
        .flat_map(|&side| predicted.tail_terms(side, 12))
        .map(|(c, g)| c * half_width.powf(1.0 - g) / (g - 1.0))
        .sum();
    let mut checkpoints = Vec::with_capacity(schedule.len() + 1);
    {
        // the start is known pointwise
        let spec = GridSpec::symmetric(1 << 14, half_width)?;
        let v: Vec<f64> = spec.xs().into_iter().map(|x| tp.pdf(x)).collect();
        checkpoints.push(summarize(0, &v, spec.dx, tail_mass));
    }
    for &n in &schedule {
        let cf = traj.snapshots[n].closed_form.clone().expect("closed-form flow");
        let (spec, v) = checkpoint_density(&cf, &predicted, half_width, k_scale)?;
        checkpoints.push(summarize(n, &v, spec.dx, tail_mass));
    }

    let last = traj.snapshots.last().expect("nonempty");
    let fitted_a = fit_stable_a(last, alpha, predicted.a.norm()).ok_or_else(|| Error::Fit("final stable fit".into()))?;
    let fitted = StableParams::new_unchecked(alpha, fitted_a);
    let final_distance = traj.diagnostics.last().and_then(|d| d.stable_distance).unwrap_or(f64::NAN);
    let modulus_rel_error = (fitted_a.norm() - tp.predicted_modulus()).abs() / tp.predicted_modulus();
    let final_cf = last.closed_form.clone().expect("closed-form flow");
    Ok(PositivityReport {
        params: tp,
        a,
        steps,
        checkpoints,
        predicted,
        fitted,
        final_distance,
        modulus_rel_error,
        // the tan formula counts mass on the right as positive phase
        fitted_phase: -fitted_a.arg(),
        formula_phase: tp.tan_formula_phase(),
        mass_below_zero: mass_below_zero(&final_cf, k_scale),
    })
}

fn summarize(step: usize, v: &[f64], dx: f64, tail_mass: f64) -> Checkpoint {
    Checkpoint {
        step,
        min_density: v.iter().copied().fold(f64::INFINITY, f64::min),
        max_density: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mass: dx * v.iter().sum::<f64>() + tail_mass,
    }
}
