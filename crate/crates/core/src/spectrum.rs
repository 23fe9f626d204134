//! Eigen-perturbations of the linearized map at stable fixed points, their
//! position-space tails, and approximate eigenvectors at the point mass.

use crate::cf::ClosedForm;
use crate::density::SpectralFunction;
use crate::error::{Error, Result};
use crate::numerics::{cubic_at, linear_fit};
use crate::par;
use crate::quad;
use crate::special::{gamma_complex, C64, I};
use crate::stable::{alpha_from_scale, StableParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `zeta_s(k) = S(k) (B+ theta(k) + B- theta(-k)) |k|^s` with eigenvalue
/// `2^{1 - s/alpha}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPerturbation {
    pub s: C64,
    pub b_plus: C64,
    pub b_minus: C64,
    pub base: StableParams,
    pub spectral: SpectralFunction,
    pub eigenvalue: C64,
}

/// `2^{1 - s/alpha}`.
pub fn eigenvalue(s: C64, alpha: f64) -> C64 {
    ((C64::new(1.0, 0.0) - s / alpha) * 2f64.ln()).exp()
}

pub fn eigen_perturbation(base: StableParams, s: C64, b_plus: C64, b_minus: C64) -> Result<EigenPerturbation> {
    let k_max = base.band_limit().min(40.0);
    eigen_perturbation_on(base, s, b_plus, b_minus, k_max, 8192)
}

/// As [`eigen_perturbation`] with an explicit k-window.
pub fn eigen_perturbation_on(
    base: StableParams,
    s: C64,
    b_plus: C64,
    b_minus: C64,
    k_max: f64,
    n_k: usize,
) -> Result<EigenPerturbation> {
    if s.re < 0.0 {
        return Err(Error::Domain(format!("Re s = {} must be nonnegative", s.re)));
    }
    base.require_admissible()?;
    if !(base.a.re > 0.0) {
        return Err(Error::Param("base law needs Re A > 0".into()));
    }
    let cf = ClosedForm::Eigen { base, s, b_plus, b_minus };
    let spectral = SpectralFunction::from_closed_form(cf, k_max, n_k)?;
    Ok(EigenPerturbation { s, b_plus, b_minus, base, spectral, eigenvalue: eigenvalue(s, base.alpha) })
}

fn check_scale(e: &EigenPerturbation, a: f64) -> Result<()> {
    let alpha = alpha_from_scale(a)?;
    if a < 0.0 || (alpha - e.base.alpha).abs() > 1e-12 * e.base.alpha {
        return Err(Error::Domain(format!(
            "scale a = {a} does not match base index {} (need a = 2^(1/alpha) > 0)",
            e.base.alpha
        )));
    }
    Ok(())
}

/// Residual and eigenvalue fit of `2 S(k/a) zeta(k/a) = lambda zeta(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenCheck {
    pub residual: f64,
    pub lambda_expected: C64,
    /// Least-squares `lambda` from the two sides of the relation.
    pub lambda_measured: C64,
}

/// `sup_k |2 S(k/a) zeta(k/a) - lambda zeta(k)| / sup_k |zeta(k)|` on the
/// k-grid, evaluated from the closed forms.
pub fn verify_eigen(e: &EigenPerturbation, a: f64) -> Result<f64> {
    verify_eigen_report(e, a).map(|r| r.residual)
}

pub fn verify_eigen_report(e: &EigenPerturbation, a: f64) -> Result<EigenCheck> {
    check_scale(e, a)?;
    let zeta = ClosedForm::Eigen { base: e.base, s: e.s, b_plus: e.b_plus, b_minus: e.b_minus };
    let lhs = |k: f64| e.base.cf_unchecked(k / a) * zeta.eval(k / a) * 2.0;
    eigen_residual(&e.spectral, e.eigenvalue, lhs, |k| zeta.eval(k))
}

/// The same relation with `zeta(k/a)` interpolated from the stored samples.
/// Stencils never straddle `k = 0`, where `|k|^s` is not smooth.
pub fn verify_eigen_grid(e: &EigenPerturbation, a: f64) -> Result<EigenCheck> {
    check_scale(e, a)?;
    let s = &e.spectral;
    let half = s.n_k() / 2;
    let pos: Vec<C64> = s.values[half..].to_vec();
    let neg: Vec<C64> = s.values[..=half].iter().rev().copied().collect();
    let interp = |k: f64| {
        let t = k.abs() / s.dk;
        if k >= 0.0 {
            cubic_at(&pos, t)
        } else {
            cubic_at(&neg, t)
        }
    };
    let lhs = |k: f64| e.base.cf_unchecked(k / a) * interp(k / a) * 2.0;
    let samples = s.values.clone();
    eigen_residual(s, e.eigenvalue, lhs, move |k| samples[((k / s.dk).round() as isize + half as isize) as usize])
}

fn eigen_residual<L, R>(grid: &SpectralFunction, lambda: C64, lhs: L, rhs: R) -> Result<EigenCheck>
where
    L: Fn(f64) -> C64,
    R: Fn(f64) -> C64,
{
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let (mut num, mut den) = (C64::new(0.0, 0.0), 0.0);
    for j in 0..grid.n_k() {
        let k = grid.k(j);
        if j == 0 || k == 0.0 {
            continue;
        }
        let l = lhs(k);
        let r = rhs(k);
        worst = worst.max((l - lambda * r).norm());
        scale = scale.max(r.norm());
        num += r.conj() * l;
        den += r.norm_sqr();
    }
    if scale == 0.0 {
        return Err(Error::Window("perturbation vanishes on the k-window".into()));
    }
    Ok(EigenCheck { residual: worst / scale, lambda_expected: lambda, lambda_measured: num / den })
}

/// Result of the large-x analysis of `zeta_+(x) x^{s+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub x_probe: Vec<f64>,
    /// `zeta_+(x) x^{s+1}` at each probe.
    pub scaled: Vec<C64>,
    pub fitted_limit: C64,
    /// `B+ Gamma(s+1) e^{-i pi (s+1)/2} / (2 pi)`.
    pub expected_limit: C64,
    pub relative_error: f64,
}

/// `B+ Gamma(s+1) e^{-i pi (s+1)/2} / (2 pi)`.
pub fn tail_constant(s: C64, b_plus: C64) -> C64 {
    let sp1 = s + 1.0;
    b_plus * gamma_complex(sp1) * (-I * PI * sp1 / 2.0).exp() / (2.0 * PI)
}

/// `zeta_+(x) = (1/2 pi) int_0^inf zeta(k) e^{-ikx} dk`.
pub fn half_inversion(e: &EigenPerturbation, x: f64) -> C64 {
    let z = ClosedForm::Eigen { base: e.base, s: e.s, b_plus: e.b_plus, b_minus: e.b_minus };
    let f = |k: f64| z.eval(k) * C64::from_polar(1.0, -k * x);
    // integrand falls below 1e-18 beyond the band edge
    let k_end = (42.0 / e.base.a.re).powf(1.0 / e.base.alpha) * (1.0 + e.s.norm());
    let period = 2.0 * PI / x.abs().max(1e-12);
    let first = period.min(k_end);
    let mut acc = quad::graded_c(0.0, first, 60, f);
    let panels = ((k_end - first) / period).ceil().max(1.0) as usize;
    acc += quad::panels_c(first, k_end, panels, f);
    acc / (2.0 * PI)
}

/// Fits `zeta_+(x) x^{s+1} = L + c x^{-alpha}` over ascending probes.
pub fn tail_asymptote(e: &EigenPerturbation, x_probe: &[f64]) -> Result<TailReport> {
    if !(e.s.re > 0.0) {
        return Err(Error::Domain(format!("tail analysis needs Re s > 0, got {}", e.s.re)));
    }
    if !(e.base.a.re > 0.0) {
        return Err(Error::Param("base law needs Re A > 0".into()));
    }
    if x_probe.len() < 2 || x_probe.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Probe("need at least two strictly ascending probes".into()));
    }
    let core = 10.0 * e.base.scale().max(e.base.a.norm().powf(1.0 / e.base.alpha));
    if x_probe[0] < core {
        return Err(Error::Probe(format!("smallest probe {} is inside the core |x| < {core}", x_probe[0])));
    }
    let scaled = par::map_slice(x_probe, |&x| half_inversion(e, x) * (C64::new(x, 0.0)).powc(e.s + 1.0));
    // linear least squares in u = x^{-alpha}, separately for re and im parts
    let u: Vec<f64> = x_probe.iter().map(|x| x.powf(-e.base.alpha)).collect();
    let re: Vec<f64> = scaled.iter().map(|v| v.re).collect();
    let im: Vec<f64> = scaled.iter().map(|v| v.im).collect();
    let fit = |y: &[f64]| linear_fit(&u, y).map(|(_, icpt, _)| icpt).ok_or_else(|| Error::Fit("tail fit".into()));
    let fitted_limit = C64::new(fit(&re)?, fit(&im)?);
    let expected_limit = tail_constant(e.s, e.b_plus);
    let relative_error = (fitted_limit - expected_limit).norm() / expected_limit.norm();
    Ok(TailReport { x_probe: x_probe.to_vec(), scaled, fitted_limit, expected_limit, relative_error })
}

/// A field `G(t) = zeta(e^t) e^t` on the half-line `x > 0` in the variable
/// `t = ln x`, sampled as cell averages on cells of width `dt`; the field is
/// even in x. The dilation `x -> a x` is an exact shift by `ln a / dt` cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRadialField {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<C64>,
}

impl LogRadialField {
    /// L1 norm over the whole real line (both signs of x).
    pub fn norm(&self) -> f64 {
        2.0 * self.dt * self.values.iter().map(|v| v.norm()).sum::<f64>()
    }
}

/// `zeta_mu^{(K)}` and its dilation data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSpectrumProbe {
    pub theta: f64,
    pub k_cut: f64,
    pub a: f64,
    pub field: LogRadialField,
}

/// Cells per `ln a` in the log-radial grid.
const PROBE_CELLS: usize = 64;

/// Builds `zeta(x) = e^{i theta ln|x| / ln a} / (4 ln K |x|)` on
/// `1/K < |x| < K` and returns it with `|| U zeta - e^{i theta} zeta ||`,
/// where `U zeta(x) = |a| zeta(a x)`.
pub fn delta_probe(theta: f64, k_cut: f64, a: f64) -> Result<(DeltaSpectrumProbe, f64)> {
    if !(a > 1.0) {
        return Err(Error::Domain(format!("need a > 1, got {a}")));
    }
    if !(k_cut > a) {
        return Err(Error::Domain(format!("need K > a, got K = {k_cut}, a = {a}")));
    }
    let ln_a = a.ln();
    let ln_k = k_cut.ln();
    let dt = ln_a / PROBE_CELLS as f64;
    // one spare ln a on each side
    let t0 = -ln_k - 2.0 * ln_a;
    let cells = ((2.0 * ln_k + 4.0 * ln_a) / dt).ceil() as usize;
    let amp = 1.0 / (4.0 * ln_k);
    let values: Vec<C64> = (0..cells)
        .map(|j| {
            let lo = t0 + j as f64 * dt;
            let hi = lo + dt;
            let occ = ((hi.min(ln_k) - lo.max(-ln_k)) / dt).clamp(0.0, 1.0);
            let mid = lo + 0.5 * dt;
            C64::from_polar(amp * occ, theta * mid / ln_a)
        })
        .collect();
    let field = LogRadialField { t0, dt, values };
    let residual = dilation_residual(&field, PROBE_CELLS, C64::from_polar(1.0, theta));
    Ok((DeltaSpectrumProbe { theta, k_cut, a, field }, residual))
}

/// `|| U f - mu f ||` for a shift of `m` cells.
fn dilation_residual(f: &LogRadialField, m: usize, mu: C64) -> f64 {
    let n = f.values.len();
    let get = |j: usize| if j < n { f.values[j] } else { C64::new(0.0, 0.0) };
    let sum: f64 = (0..n).map(|j| (get(j + m) - mu * f.values[j]).norm()).sum();
    2.0 * f.dt * sum
}

/// One entry of the eigenvector search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub name: String,
    pub mu: C64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEigenReport {
    pub a: f64,
    /// `|cf(k/a) - cf(k)|` for `zeta = delta`, identically zero.
    pub delta_residual: f64,
    pub probes: Vec<ProbeResult>,
    pub min_probe_residual: f64,
}

/// `U delta = delta` symbolically, and no unit-norm field in a probe family
/// of Gaussians and grid-representable log-radial probes is an eigenvector.
pub fn delta_eigenvector_check(a: f64) -> Result<DeltaEigenReport> {
    if !(a.abs() > 1.0) {
        return Err(Error::Domain(format!("need |a| > 1, got {a}")));
    }
    let one = ClosedForm::One;
    let delta_residual = [0.1, 1.0, 10.0]
        .iter()
        .map(|&k| (one.eval(k / a) - one.eval(k)).norm())
        .fold(0.0, f64::max);
    let mut probes = Vec::new();
    for &sigma in &[0.1, 0.5, 1.0, 2.0, 5.0] {
        for &theta in &[0.0, 0.5 * PI, PI] {
            let mu = C64::from_polar(1.0, theta);
            let g = move |x: f64| (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt());
            let lim = 40.0 * sigma;
            let r = quad::panels(-lim, lim, 400, |x| (C64::new(a.abs() * g(a * x), 0.0) - mu * g(x)).norm());
            probes.push(ProbeResult { name: format!("gaussian(sigma={sigma})"), mu, residual: r });
        }
    }
    if a > 1.0 {
        // log-radial probes that fit a uniform grid of 2^14 points: K^2 <= 2^13
        let k_limit = (8192f64).sqrt();
        let mut p = 2;
        while a.powi(p) <= k_limit {
            let k_cut = a.powi(p);
            for &theta in &[0.0, PI / 3.0, PI] {
                let (_, r) = delta_probe(theta, k_cut, a)?;
                probes.push(ProbeResult {
                    name: format!("log-radial(K=a^{p})"),
                    mu: C64::from_polar(1.0, theta),
                    residual: r,
                });
            }
            p += 1;
        }
    }
    let min_probe_residual = probes.iter().map(|p| p.residual).fold(f64::INFINITY, f64::min);
    Ok(DeltaEigenReport { a, delta_residual, probes, min_probe_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_base() -> StableParams {
        StableParams::new(2.0, C64::new(0.5, 0.0))
    }

    fn cauchy_base() -> StableParams {
        StableParams::new(1.0, C64::new(1.0, 0.0))
    }

    #[test]
    fn eigenvalue_examples() {
        let one = C64::new(1.0, 0.0);
        let e = eigen_perturbation(cauchy_base(), C64::new(0.0, 0.0), one, one).unwrap();
        assert!((e.eigenvalue - 2.0).norm() < 1e-15);
        assert!((eigenvalue(C64::new(0.5, 0.0), 0.5) - 1.0).norm() < 1e-15);
        assert!((eigenvalue(C64::new(1.0, 0.0), 0.5) - 0.5).norm() < 1e-15);
        assert!(matches!(
            eigen_perturbation(cauchy_base(), C64::new(-0.1, 0.0), one, one),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn verify_examples() {
        let one = C64::new(1.0, 0.0);
        let g = eigen_perturbation(gaussian_base(), C64::new(1.0, 0.0), one, one).unwrap();
        let r = verify_eigen_report(&g, 2f64.sqrt()).unwrap();
        assert!(r.residual < 1e-8);
        assert!((r.lambda_measured - 2f64.sqrt()).norm() < 1e-8);
        let c = eigen_perturbation(cauchy_base(), C64::new(2.0, 0.0), one, one).unwrap();
        let r = verify_eigen_report(&c, 2.0).unwrap();
        assert!(r.residual < 1e-8 && (r.lambda_measured - 0.5).norm() < 1e-8);
        let z = eigen_perturbation(cauchy_base(), C64::new(0.0, 0.0), one, one).unwrap();
        assert!(verify_eigen(&z, 2.0).unwrap() < 1e-12);
        assert!(matches!(verify_eigen(&z, 3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn grid_route_on_smooth_perturbations() {
        let one = C64::new(1.0, 0.0);
        let g = eigen_perturbation(gaussian_base(), C64::new(2.0, 0.0), one, one).unwrap();
        assert!(verify_eigen_grid(&g, 2f64.sqrt()).unwrap().residual < 1e-5);
        let c = eigen_perturbation(cauchy_base(), C64::new(2.0, 0.0), one, one).unwrap();
        assert!(verify_eigen_grid(&c, 2.0).unwrap().residual < 1e-5);
    }

    #[test]
    fn tail_constants() {
        let one = C64::new(1.0, 0.0);
        assert!((tail_constant(C64::new(1.0, 0.0), one) - C64::new(-1.0 / (2.0 * PI), 0.0)).norm() < 1e-14);
        assert!((tail_constant(C64::new(2.0, 0.0), one) - C64::new(0.0, 1.0 / PI)).norm() < 1e-14);
    }

    #[test]
    fn half_inversion_matches_cauchy_closed_form() {
        // int_0^inf k^s e^{-k} e^{-ikx} dk = Gamma(s+1) / (1 + i x)^{s+1}
        let one = C64::new(1.0, 0.0);
        for &s in &[1.0, 2.0, 0.5] {
            let e = eigen_perturbation(cauchy_base(), C64::new(s, 0.0), one, one).unwrap();
            for &x in &[0.5, 20.0, 300.0] {
                let exact = gamma_complex(C64::new(s + 1.0, 0.0)) / C64::new(1.0, x).powf(s + 1.0) / (2.0 * PI);
                let got = half_inversion(&e, x);
                assert!((got - exact).norm() < 1e-9 * exact.norm() + 1e-13, "s {s} x {x}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn tail_fit_on_cauchy_base() {
        let one = C64::new(1.0, 0.0);
        for &s in &[1.0, 2.0] {
            let e = eigen_perturbation(cauchy_base(), C64::new(s, 0.0), one, one).unwrap();
            let r = tail_asymptote(&e, &[100.0, 200.0, 500.0, 1000.0]).unwrap();
            assert!(r.relative_error < 1e-3, "{s}: {}", r.relative_error);
        }
        let e = eigen_perturbation(cauchy_base(), C64::new(1.0, 0.0), one, one).unwrap();
        assert!(matches!(tail_asymptote(&e, &[1.0, 100.0]), Err(Error::Probe(_))));
    }

    #[test]
    fn delta_probe_examples() {
        for &(k, target) in &[(2f64.powi(10), 0.1), (2f64.powi(20), 0.05)] {
            let (p, r) = delta_probe(0.7, k, 2.0).unwrap();
            assert!((r - target).abs() < 1e-12, "{r}");
            assert!((p.field.norm() - 1.0).abs() < 1e-12);
        }
        // cutoffs off the ln a lattice
        let (p, r) = delta_probe(1.1, 1000.0, 1.5).unwrap();
        assert!((r - 1.5f64.ln() / 1000f64.ln()).abs() < 1e-12);
        assert!((p.field.norm() - 1.0).abs() < 1e-12);
        assert!(matches!(delta_probe(0.0, 2.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn delta_eigen_report() {
        let r = delta_eigenvector_check(2.0).unwrap();
        assert_eq!(r.delta_residual, 0.0);
        assert!(r.min_probe_residual > 0.01);
        let g = r.probes.iter().find(|p| p.name == "gaussian(sigma=1)" && p.mu.re == 1.0).unwrap();
        assert!(g.residual > 0.3);
    }
}
