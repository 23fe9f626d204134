//! Discrete-time random walk of a walker density and its two routes to the
//! fluid limit: rescaled steps, and iteration of the RG map.

use crate::cf::ClosedForm;
use crate::density::{from_spectral, GridDensity, GridSpec, SpectralFunction};
use crate::error::{Error, Result};
use crate::flow::{classify_regime_full, fit_small_k, FlowOptions, RegimeReport, Verdict};
use crate::numerics::direct_convolve;
use crate::numerics::fft_convolve_real;
use crate::special::C64;
use serde::{Deserialize, Serialize};

/// Walker density `n(x, t)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerField {
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    pub t: f64,
    pub tau: f64,
}

impl WalkerField {
    pub fn new(d: &GridDensity, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Param(format!("step interval tau = {tau} must be positive")));
        }
        Ok(Self { x_min: d.x_min, dx: d.dx, values: d.values.clone(), t: 0.0, tau })
    }

    pub fn mass(&self) -> f64 {
        self.dx * self.values.iter().sum::<f64>()
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { n: self.values.len(), x_min: self.x_min, dx: self.dx }
    }

    pub fn to_density(&self) -> Result<GridDensity> {
        GridDensity::new(self.x_min, self.dx, self.values.clone(), 0.0)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mass();
        let xs = self.spec().xs();
        let mean = self.dx * xs.iter().zip(&self.values).map(|(x, v)| x * v).sum::<f64>() / m;
        self.dx * xs.iter().zip(&self.values).map(|(x, v)| (x - mean).powi(2) * v).sum::<f64>() / m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidLimitSpec {
    pub alpha: f64,
    /// Coefficient in `cf(k) = 1 - c |k|^alpha + o(|k|^alpha)`.
    pub c: f64,
    pub tau: f64,
    /// Scaling dimension `1/alpha`.
    pub delta: f64,
    pub lambda: f64,
}

impl FluidLimitSpec {
    pub fn new(alpha: f64, c: f64, tau: f64, lambda: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::Domain(format!("alpha = {alpha} outside (0, 2]")));
        }
        if !(c > 0.0 && tau > 0.0 && lambda > 0.0) {
            return Err(Error::Param(format!("need c, tau, lambda > 0, got ({c}, {tau}, {lambda})")));
        }
        Ok(Self { alpha, c, tau, delta: 1.0 / alpha, lambda })
    }
}

/// Largest `|rho(x) - rho(-x)|` over mirrored grid points; `None` when the
/// grid is not symmetric about the origin.
fn asymmetry(d: &GridDensity) -> Option<f64> {
    let n = d.len();
    if ((d.x_min + (n / 2) as f64 * d.dx) / d.dx).abs() > 1e-9 {
        return None;
    }
    Some((1..n).map(|i| (d.values[i] - d.values[n - i]).abs()).fold(0.0, f64::max))
}

/// Averages a density with its reflection when the asymmetry exceeds
/// `1e-12`, logging a warning.
pub fn symmetrize(d: &GridDensity) -> Result<GridDensity> {
    let defect = asymmetry(d).ok_or_else(|| Error::Grid("step density grid must be centered at the origin".into()))?;
    if defect <= 1e-12 {
        return Ok(d.clone());
    }
    log::warn!("step density is asymmetric (defect {defect:.3e}); symmetrizing");
    let n = d.len();
    let mut v = d.values.clone();
    for i in 1..n {
        v[i] = 0.5 * (d.values[i] + d.values[n - i]);
    }
    GridDensity::new(d.x_min, d.dx, v, d.truncated_mass)
}

/// `n(x, t + tau) = int rho(x - y) n(y, t) dy`.
pub fn walk_step(f: &WalkerField, step_density: &GridDensity) -> Result<WalkerField> {
    walk_step_by(f, step_density, |a, b| fft_convolve_real(a, b))
}

/// [`walk_step`] with an `O(N^2)` direct sum.
pub fn walk_step_direct(f: &WalkerField, step_density: &GridDensity) -> Result<WalkerField> {
    walk_step_by(f, step_density, |a, b| direct_convolve(a, b))
}

fn walk_step_by<C>(f: &WalkerField, step_density: &GridDensity, conv: C) -> Result<WalkerField>
where
    C: Fn(&[f64], &[f64]) -> Vec<f64>,
{
    if (step_density.dx - f.dx).abs() > 1e-12 * f.dx {
        return Err(Error::Grid(format!("spacings differ: {} vs {}", step_density.dx, f.dx)));
    }
    let rho = symmetrize(step_density)?;
    // out[i] = dx sum_j n_j rho_{i - j + s}, with rho_m at x_min_rho + m dx
    let s = (-rho.x_min / f.dx).round() as usize;
    let c = conv(&f.values, &rho.values);
    let values = (0..f.values.len()).map(|i| f.dx * c.get(i + s).copied().unwrap_or(0.0)).collect();
    Ok(WalkerField { x_min: f.x_min, dx: f.dx, values, t: f.t + f.tau, tau: f.tau })
}

fn check_windows(a: &SpectralFunction, b: &SpectralFunction) -> Result<()> {
    if a.n_k() != b.n_k() || (a.k_max - b.k_max).abs() > 1e-12 * a.k_max {
        return Err(Error::Window(format!(
            "k-windows differ: ({}, {}) vs ({}, {})",
            a.k_max,
            a.n_k(),
            b.k_max,
            b.n_k()
        )));
    }
    Ok(())
}

/// `n_hat(k) cf(k)^steps`, one multiplication per step.
pub fn spectral_evolve(n0_hat: &SpectralFunction, step_cf: &SpectralFunction, steps: usize) -> Result<SpectralFunction> {
    check_windows(n0_hat, step_cf)?;
    let mut values = n0_hat.values.clone();
    for _ in 0..steps {
        for (v, c) in values.iter_mut().zip(&step_cf.values) {
            *v *= c;
        }
    }
    let cf = if steps == 0 { n0_hat.closed_form.clone() } else { None };
    SpectralFunction::new(n0_hat.k_max, values, cf)
}

/// `n_hat_0(k) exp(-(c/tau) |k|^alpha t)`.
pub fn fluid_limit_reference(spec: &FluidLimitSpec, n0_hat: &SpectralFunction, t: f64) -> Result<SpectralFunction> {
    if t < 0.0 {
        return Err(Error::Param(format!("time t = {t} must be nonnegative")));
    }
    let values = (0..n0_hat.n_k())
        .map(|j| {
            let k = n0_hat.k(j);
            n0_hat.values[j] * (-(spec.c / spec.tau) * k.abs().powf(spec.alpha) * t).exp()
        })
        .collect();
    SpectralFunction::new(n0_hat.k_max, values, None)
}

/// A step law given by samples or in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepLaw {
    Grid(GridDensity),
    Closed(ClosedForm),
}

impl StepLaw {
    /// Exact cf: the closed form, or the lattice measure of the symmetrized
    /// samples.
    pub fn cf(&self) -> Result<ClosedForm> {
        match self {
            StepLaw::Grid(d) => ClosedForm::lattice(&symmetrize(d)?),
            StepLaw::Closed(c) => Ok(c.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub lambda: f64,
    /// `round(lambda t / tau)`.
    pub steps: usize,
    /// `lambda t / tau - steps`.
    pub remainder: f64,
    pub error: f64,
}

/// Default fluid-limit window: `n_hat_0 = 1` on `|k| <= 10`.
pub fn default_fluid_window() -> Result<SpectralFunction> {
    SpectralFunction::from_closed_form(ClosedForm::One, 10.0, 1024)
}

/// For each `lambda`, evolves a point source by `cf(lambda^{-1/alpha} k)`
/// over `round(lambda t / tau)` steps and measures the sup distance to the
/// fractional kernel at time `t`.
pub fn scaling_route_error(step: &StepLaw, spec: &FluidLimitSpec, lambda_list: &[f64], t: f64) -> Result<Vec<ScalingPoint>> {
    scaling_route_error_on(step, spec, lambda_list, t, &default_fluid_window()?)
}

pub fn scaling_route_error_on(
    step: &StepLaw,
    spec: &FluidLimitSpec,
    lambda_list: &[f64],
    t: f64,
    n0_hat: &SpectralFunction,
) -> Result<Vec<ScalingPoint>> {
    if lambda_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Param("lambda list must be strictly ascending".into()));
    }
    let cf = step.cf()?;
    check_expansion(&cf, spec)?;
    let reference = fluid_limit_reference(spec, n0_hat, t)?;
    let mut out = Vec::with_capacity(lambda_list.len());
    for &lambda in lambda_list {
        let exact = lambda * t / spec.tau;
        let steps = exact.round() as usize;
        let shrink = lambda.powf(-spec.delta);
        let step_cf = SpectralFunction::from_closed_form(
            ClosedForm::Iterated { base: Box::new(cf.clone()), divisor: 1.0 / shrink, power: 1.0 },
            n0_hat.k_max,
            n0_hat.n_k(),
        )?;
        let evolved = spectral_evolve(n0_hat, &step_cf, steps)?;
        let error = (0..evolved.n_k())
            .map(|j| (evolved.values[j] - reference.values[j]).norm())
            .fold(0.0, f64::max);
        out.push(ScalingPoint { lambda, steps, remainder: exact - steps as f64, error });
    }
    Ok(out)
}

/// `(alpha, c)` of a symmetric step law, `cf(k) = 1 - c |k|^alpha + ...`,
/// from the analytic expansion when the closed form has one and from the
/// small-k fit otherwise; wrapped with `tau` and `lambda`.
pub fn fluid_limit_spec(step: &StepLaw, tau: f64, lambda: f64) -> Result<FluidLimitSpec> {
    let cf = step.cf()?;
    let (alpha, b) = match cf.small_k_expansion() {
        Some(e) => e,
        None => {
            let probe = SpectralFunction::from_closed_form(cf.clone(), 1.0, 4)?;
            let fit = fit_small_k(&probe, (1e-4, 1e-2))?;
            match &cf {
                // a lattice measure has finite variance, so the exponent is exactly 2
                ClosedForm::Lattice { x_min, dx, weights } if (fit.nu - 2.0).abs() < 0.02 => {
                    let m2: f64 = weights.iter().enumerate().map(|(i, w)| w * (x_min + i as f64 * dx).powi(2)).sum();
                    (2.0, C64::new(0.5 * m2, 0.0))
                }
                _ => (fit.nu, fit.b_plus),
            }
        }
    };
    if b.im.abs() > 1e-6 * b.norm() {
        return Err(Error::Param(format!("step law is not symmetric (B = {b})")));
    }
    FluidLimitSpec::new(alpha, b.re, tau, lambda)
}

/// Fits the small-k expansion of a step cf and checks it against `spec`.
fn check_expansion(cf: &ClosedForm, spec: &FluidLimitSpec) -> Result<()> {
    let probe = SpectralFunction::from_closed_form(cf.clone(), 1.0, 4)?;
    let fit = fit_small_k(&probe, (1e-4, 1e-2))?;
    if (fit.nu - spec.alpha).abs() > 0.02 || (fit.b_plus - spec.c).norm() > 0.02 * spec.c {
        return Err(Error::Fit(format!(
            "step expansion (nu {:.4}, c {:.4}) does not match (alpha {}, c {})",
            fit.nu, fit.b_plus, spec.alpha, spec.c
        )));
    }
    Ok(())
}

/// Outcome of iterating the RG map on a step law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgRoute {
    pub report: RegimeReport,
    /// Distance to the tuned stable law after each step.
    pub distances: Vec<f64>,
    /// `T_a^m rho` back on the step grid, for tuned scales and gridded steps.
    pub density: Option<GridDensity>,
}

/// `T_a^m rho` computed through the spectral flow.
pub fn rg_route(step: &StepLaw, a: f64, m: usize) -> Result<RgRoute> {
    let cf = step.cf()?;
    let opts = FlowOptions { n_k: 1024, ..FlowOptions::default() };
    let s0 = SpectralFunction::from_closed_form(cf, opts.k_max, opts.n_k)?;
    let (report, traj) = classify_regime_full(&s0, a, m, &opts)?;
    let distances = traj.diagnostics.iter().filter_map(|d| d.stable_distance).collect();
    let density = match (&report.verdict, step) {
        (Verdict::StableLimit { .. }, StepLaw::Grid(d)) => {
            let last = traj.snapshots.last().expect("nonempty");
            Some(from_spectral(last, d.spec())?)
        }
        _ => None,
    };
    Ok(RgRoute { report, distances, density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(spec: GridSpec, sigma: f64) -> GridDensity {
        GridDensity::from_fn(spec, |x| (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())).unwrap()
    }

    #[test]
    fn variance_grows_per_step() {
        let spec = GridSpec::symmetric(1 << 12, 40.0).unwrap();
        let n0 = WalkerField::new(&gaussian(spec, 0.2), 1.0).unwrap();
        let rho = gaussian(spec, 1.0);
        let mut f = n0.clone();
        for s in 1..=4 {
            f = walk_step(&f, &rho).unwrap();
            assert!((f.variance() - (0.04 + s as f64)).abs() < 1e-9, "{}", f.variance());
            assert!((f.mass() - 1.0).abs() < 1e-12);
            assert_eq!(f.t, s as f64);
        }
    }

    #[test]
    fn uniform_field_interior_unchanged() {
        let spec = GridSpec::symmetric(1 << 11, 100.0).unwrap();
        let flat = GridDensity::new(spec.x_min, spec.dx, vec![1.0; spec.n], 0.0).unwrap();
        let f = WalkerField::new(&flat, 1.0).unwrap();
        let out = walk_step(&f, &gaussian(spec, 1.0)).unwrap();
        for i in spec.n / 4..3 * spec.n / 4 {
            assert!((out.values[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn voigt_step_matches_direct_sum() {
        let spec = GridSpec::symmetric(1 << 11, 50.0).unwrap();
        let f = WalkerField::new(&gaussian(spec, 1.0), 1.0).unwrap();
        let cauchy = GridDensity::from_fn(spec, |x| 1.0 / (PI * (1.0 + x * x))).unwrap();
        let a = walk_step(&f, &cauchy).unwrap();
        let b = walk_step_direct(&f, &cauchy).unwrap();
        let d = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-12, "{d}");
        // the Voigt profile at the origin: e^{1/2} erfc(1/sqrt 2) / sqrt(2 pi), less tail loss
        let v0 = a.values[spec.n / 2];
        assert!((v0 - 0.2087092777).abs() < 1e-3, "{v0}");
    }

    #[test]
    fn asymmetric_steps_are_symmetrized() {
        let spec = GridSpec::symmetric(256, 10.0).unwrap();
        let skew = GridDensity::from_fn(spec, |x| if x > 0.0 { (-x).exp() } else { 0.0 }).unwrap();
        let s = symmetrize(&skew).unwrap();
        assert!(asymmetry(&s).unwrap() < 1e-15);
    }

    #[test]
    fn spectral_evolution() {
        let one = default_fluid_window().unwrap();
        let g = SpectralFunction::from_closed_form(ClosedForm::Gaussian { sigma: 0.5 }, 10.0, 1024).unwrap();
        assert_eq!(spectral_evolve(&one, &g, 0).unwrap().values, one.values);
        let e = spectral_evolve(&one, &g, 7).unwrap();
        for j in 0..e.n_k() {
            let k = e.k(j);
            assert!((e.values[j].re - (-7.0 * 0.125 * k * k).exp()).abs() < 1e-14);
        }
        let p = spectral_evolve(&spectral_evolve(&one, &g, 3).unwrap(), &g, 4).unwrap();
        assert_eq!(p.values, e.values);
        let bad = SpectralFunction::from_closed_form(ClosedForm::One, 5.0, 1024).unwrap();
        assert!(matches!(spectral_evolve(&one, &bad, 1), Err(Error::Window(_))));
    }

    #[test]
    fn spectral_and_spatial_walks_agree() {
        let spec = GridSpec::symmetric(1 << 12, 40.0).unwrap();
        let n0 = gaussian(spec, 1.0);
        let rho = gaussian(spec, 0.7);
        let mut f = WalkerField::new(&n0, 1.0).unwrap();
        for _ in 0..5 {
            f = walk_step(&f, &rho).unwrap();
        }
        let k_max = PI / spec.dx;
        let n_hat = SpectralFunction::from_closed_form(ClosedForm::Gaussian { sigma: 1.0 }, k_max, spec.n).unwrap();
        let r_hat = SpectralFunction::from_closed_form(ClosedForm::Gaussian { sigma: 0.7 }, k_max, spec.n).unwrap();
        let e = spectral_evolve(&n_hat, &r_hat, 5).unwrap().without_closed_form();
        let back = from_spectral(&e, spec).unwrap();
        let d = back.values.iter().zip(&f.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-5, "{d}");
    }

    #[test]
    fn fluid_reference_examples() {
        let one = default_fluid_window().unwrap();
        let heat = FluidLimitSpec::new(2.0, 0.5 * 0.09, 2.0, 1.0).unwrap();
        let r = fluid_limit_reference(&heat, &one, 3.0).unwrap();
        let k = r.k(700);
        assert!((r.values[700].re - (-0.09 * k * k * 3.0 / 4.0).exp()).abs() < 1e-15);
        assert_eq!(fluid_limit_reference(&heat, &one, 0.0).unwrap().values, one.values);
        let c = FluidLimitSpec::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let r = fluid_limit_reference(&c, &one, 1.0).unwrap();
        assert!((r.values[700].re - (-r.k(700).abs()).exp()).abs() < 1e-15);
        assert!((c.delta * c.alpha - 1.0).abs() < 1e-14);
    }

    #[test]
    fn scaling_routes() {
        let c = StepLaw::Closed(ClosedForm::Cauchy { scale: 1.0 });
        let spec = FluidLimitSpec::new(1.0, 1.0, 1.0, 1.0).unwrap();
        for p in scaling_route_error(&c, &spec, &[4.0, 16.0, 64.0], 1.0).unwrap() {
            assert!(p.error < 1e-10, "{p:?}");
        }
        let lap = StepLaw::Closed(ClosedForm::Laplace { scale: 0.5f64.sqrt() });
        let spec = FluidLimitSpec::new(2.0, 0.5, 1.0, 1.0).unwrap();
        let e = scaling_route_error(&lap, &spec, &[4.0, 16.0, 64.0], 1.0).unwrap();
        assert!(e[0].error > e[1].error && e[1].error > e[2].error && e[2].error < 1e-2, "{e:?}");
        let bad = FluidLimitSpec::new(1.0, 0.5, 1.0, 1.0).unwrap();
        assert!(matches!(scaling_route_error(&lap, &bad, &[4.0], 1.0), Err(Error::Fit(_))));
    }

    #[test]
    fn pareto_steps_approach_fractional_kernel() {
        let nu = 0.5;
        let p = ClosedForm::Pareto { nu, x0: 1.0 };
        let (_, b) = p.small_k_expansion().unwrap();
        let spec = FluidLimitSpec::new(nu, b.re, 1.0, 1.0).unwrap();
        let e = scaling_route_error(&StepLaw::Closed(p), &spec, &[4.0, 16.0, 64.0, 256.0], 1.0).unwrap();
        assert!(e.windows(2).all(|w| w[1].error < w[0].error), "{e:?}");
    }

    #[test]
    fn rg_routes() {
        let r = rg_route(&StepLaw::Closed(ClosedForm::Cauchy { scale: 1.0 }), 2.0, 10).unwrap();
        assert!(matches!(r.report.verdict, Verdict::StableLimit { .. }));
        assert!(r.distances.iter().all(|&d| d < 1e-8));
        let spec = GridSpec::symmetric(1 << 12, 20.0).unwrap();
        let g = StepLaw::Grid(gaussian(spec, 1.0));
        let r = rg_route(&g, 2f64.sqrt(), 10).unwrap();
        assert!(matches!(r.report.verdict, Verdict::StableLimit { .. }) && r.report.confirmed);
        let back = r.density.unwrap();
        let StepLaw::Grid(d0) = &g else { unreachable!() };
        assert!(crate::density::l1_distance(&back, d0).unwrap() < 1e-6);
        let r = rg_route(&g, 2.0, 20).unwrap();
        assert_eq!(r.report.verdict, Verdict::DeltaLimit);
    }
}
