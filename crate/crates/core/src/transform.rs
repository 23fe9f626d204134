//! The map `T_a`, its differential, moment pushforward and the norm
//! inequalities that accompany them.

use crate::density::{GridDensity, GridSpec, MomentVector, SpectralFunction, Tolerances};
use crate::error::{Error, Result};
use crate::numerics::{cubic_at, fft_convolve_real};
use crate::par;
use serde::{Deserialize, Serialize};

/// Scale parameter `a` of the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParam {
    pub a: f64,
}

impl ScaleParam {
    /// Any nonzero finite `a` for single applications.
    pub fn new(a: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return Err(Error::Domain(format!("scale a = {a} must be finite and nonzero")));
        }
        Ok(Self { a })
    }

    /// `|a| > 1`, as required for flows.
    pub fn for_flow(a: f64) -> Result<Self> {
        let s = Self::new(a)?;
        if a.abs() <= 1.0 {
            return Err(Error::Domain(format!("flows need |a| > 1, got a = {a}")));
        }
        Ok(s)
    }

    /// `ln 2 / ln|a|`; infinite at `|a| = 1`.
    pub fn alpha(&self) -> f64 {
        2f64.ln() / self.a.abs().ln()
    }

    pub fn sign(&self) -> f64 {
        self.a.signum()
    }
}

/// Signed field on a density grid, without normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationField {
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl PerturbationField {
    pub fn new(x_min: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        GridSpec::new(values.len(), x_min, dx)?;
        Ok(Self { x_min, dx, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64 + Sync + Send>(spec: GridSpec, f: F) -> Self {
        Self { x_min: spec.x_min, dx: spec.dx, values: par::map_range(spec.n, |i| f(spec.x(i))) }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self { x_min: spec.x_min, dx: spec.dx, values: vec![0.0; spec.n] }
    }

    pub fn from_density(d: &GridDensity) -> Self {
        Self { x_min: d.x_min, dx: d.dx, values: d.values.clone() }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { n: self.values.len(), x_min: self.x_min, dx: self.dx }
    }

    /// L1 norm `dx sum |v|`.
    pub fn norm(&self) -> f64 {
        self.dx * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| c * v).collect(), ..self.clone() }
    }

    /// `self + c other` on a common grid.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        check_same(self.spec(), other.spec())?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(Self { values, ..self.clone() })
    }

    /// Rescaled to unit L1 norm.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            self.scaled(1.0 / n)
        } else {
            self.clone()
        }
    }
}

fn check_same(a: GridSpec, b: GridSpec) -> Result<()> {
    if a.n != b.n || (a.dx - b.dx).abs() > 1e-12 * a.dx || (a.x_min - b.x_min).abs() > 1e-9 * a.dx {
        return Err(Error::Grid(format!(
            "grids differ: ({}, {}, {}) vs ({}, {}, {})",
            a.n, a.x_min, a.dx, b.n, b.x_min, b.dx
        )));
    }
    Ok(())
}

/// `|a| dx (f * g)(a x_i)` on the grid of `f`, where both inputs start at
/// `x0` with spacing `dx` (the convolution lattice starts at `2 x0`).
fn dilated_convolution(f: &[f64], g: &[f64], x0: f64, dx: f64, out: GridSpec, a: f64) -> Vec<f64> {
    let c = fft_convolve_real(f, g);
    let origin = 2.0 * x0;
    par::map_range(out.n, |i| {
        let t = (a * out.x(i) - origin) / dx;
        a.abs() * dx * cubic_at(&c, t)
    })
}

/// Samples padded with the fitted power-law tails out to four times the
/// half-width on each heavy side. Returns the new origin and samples.
fn extend_tails(d: &GridDensity) -> (f64, Vec<f64>) {
    let n = d.len();
    let (left, right) = d.tail_fits();
    let pad = 3 * n / 2;
    let lp = if left.is_some() { pad } else { 0 };
    let rp = if right.is_some() { pad } else { 0 };
    let mut v = Vec::with_capacity(n + lp + rp);
    let x0 = d.x_min - lp as f64 * d.dx;
    for i in 0..lp {
        let x = x0 + i as f64 * d.dx;
        v.push(left.map_or(0.0, |t| t.eval(x.abs())));
    }
    v.extend_from_slice(&d.values);
    for i in 0..rp {
        let x = d.x(n + i);
        v.push(right.map_or(0.0, |t| t.eval(x.abs())));
    }
    (x0, v)
}

/// `T_a rho(x) = |a| (rho * rho)(a x)` on the input grid.
pub fn apply_spatial(d: &GridDensity, a: ScaleParam) -> Result<GridDensity> {
    apply_spatial_with(d, a, &Tolerances::default())
}

pub fn apply_spatial_with(d: &GridDensity, a: ScaleParam, tol: &Tolerances) -> Result<GridDensity> {
    let (x0, ext) = extend_tails(d);
    let values = dilated_convolution(&ext, &ext, x0, d.dx, d.spec(), a.a);
    let mass = d.dx * values.iter().sum::<f64>();
    let truncated = (1.0 - mass).max(0.0);
    if truncated > tol.truncation_cap {
        return Err(Error::Truncation { mass: truncated, cap: tol.truncation_cap });
    }
    GridDensity::new(d.x_min, d.dx, values, truncated.min(1.0 - 1e-15))
}

/// `cf(k) -> cf(k/a)^2`: exact on closed forms, cubic interpolation on
/// samples.
pub fn apply_spectral(s: &SpectralFunction, a: ScaleParam) -> Result<SpectralFunction> {
    if let Some(cf) = &s.closed_form {
        return SpectralFunction::from_closed_form(cf.apply_scale(a.a), s.k_max, s.n_k());
    }
    let mut values = Vec::with_capacity(s.n_k());
    for j in 0..s.n_k() {
        let k = s.k(j) / a.a;
        let v = s
            .try_eval(k)
            .ok_or_else(|| Error::Window(format!("k/a = {k} leaves the stored window +-{}", s.k_max)))?;
        values.push(v * v);
    }
    SpectralFunction::new(s.k_max, values, None)
}

/// `(DT_a)_rho zeta = 2 |a| (rho * zeta)(a x)`.
pub fn differential_apply(d: &GridDensity, z: &PerturbationField, a: ScaleParam) -> Result<PerturbationField> {
    check_same(d.spec(), z.spec())?;
    let values = dilated_convolution(&d.values, &z.values, d.x_min, d.dx, d.spec(), a.a);
    Ok(PerturbationField { x_min: d.x_min, dx: d.dx, values: values.into_iter().map(|v| 2.0 * v).collect() })
}

/// `(|| 2h + h * h ||, ||h||)`. The dilation is an L1 isometry, so the
/// norm is computed on the undilated convolution lattice.
pub fn strong_instability_margin(h: &PerturbationField, a: ScaleParam) -> Result<(f64, f64)> {
    let _ = a;
    let nh = h.norm();
    if !(nh > 0.0 && nh < 1.0) {
        return Err(Error::Domain(format!("need 0 < ||h|| < 1, got {nh}")));
    }
    let shift = -h.x_min / h.dx;
    if (shift - shift.round()).abs() > 1e-9 || shift.round() < 0.0 {
        return Err(Error::Grid("grid origin must be a nonpositive multiple of dx".into()));
    }
    let shift = shift.round() as usize;
    let mut c: Vec<f64> = fft_convolve_real(&h.values, &h.values).into_iter().map(|v| v * h.dx).collect();
    // h sits at x_min + i dx = 2 x_min + (i + shift) dx on the lattice
    if c.len() < shift + h.values.len() {
        c.resize(shift + h.values.len(), 0.0);
    }
    for (i, &v) in h.values.iter().enumerate() {
        c[i + shift] += 2.0 * v;
    }
    let lhs = h.dx * c.iter().map(|v| v.abs()).sum::<f64>();
    Ok((lhs, nh))
}

/// Margins of the continuity and differential bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorNormReport {
    /// `|| T d1 - T d2 ||`.
    pub continuity_lhs: f64,
    /// `|| d1 + d2 || || d1 - d2 ||`.
    pub continuity_rhs: f64,
    /// Largest `|| (DT)_{d1} z - (DT)_{d2} z ||` over unit probes.
    pub differential_lhs: f64,
    /// `2 || d1 - d2 ||`.
    pub differential_rhs: f64,
    pub probes: usize,
}

impl OperatorNormReport {
    pub fn continuity_margin(&self) -> f64 {
        self.continuity_rhs - self.continuity_lhs
    }

    pub fn differential_margin(&self) -> f64 {
        self.differential_rhs - self.differential_lhs
    }
}

fn lattice_l1(v: &[f64], dx: f64) -> f64 {
    dx * v.iter().map(|x| x.abs()).sum::<f64>()
}

/// Checks `||T d1 - T d2|| <= ||d1 + d2|| ||d1 - d2||` and the differential
/// bound on a fixed probe set. Norms of dilated fields are taken on the
/// convolution lattice.
pub fn operator_norm_checks(d1: &GridDensity, d2: &GridDensity, a: ScaleParam) -> Result<OperatorNormReport> {
    let _ = a;
    check_same(d1.spec(), d2.spec())?;
    let dx = d1.dx;
    let sum: Vec<f64> = d1.values.iter().zip(&d2.values).map(|(x, y)| x + y).collect();
    let diff: Vec<f64> = d1.values.iter().zip(&d2.values).map(|(x, y)| x - y).collect();
    let c1 = fft_convolve_real(&d1.values, &d1.values);
    let c2 = fft_convolve_real(&d2.values, &d2.values);
    let t_diff: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| dx * (x - y)).collect();
    let continuity_lhs = lattice_l1(&t_diff, dx);
    let continuity_rhs = lattice_l1(&sum, dx) * lattice_l1(&diff, dx);

    let spec = d1.spec();
    let width = spec.n as f64 * dx;
    let centre = spec.x_min + 0.5 * width;
    let probes: Vec<PerturbationField> = [0.01, 0.03, 0.1]
        .iter()
        .flat_map(|&w| {
            let s = w * width;
            [
                PerturbationField::from_fn(spec, move |x| (-0.5 * ((x - centre) / s).powi(2)).exp()),
                PerturbationField::from_fn(spec, move |x| {
                    let u = (x - centre) / s;
                    u * (-0.5 * u * u).exp()
                }),
                PerturbationField::from_fn(spec, move |x| ((x - centre) / s).cos() * (-((x - centre) / (3.0 * s)).powi(2)).exp()),
            ]
        })
        .map(|p| p.normalized())
        .collect();
    let diffs = par::map_slice(&probes, |z| {
        let c = fft_convolve_real(&diff, &z.values);
        2.0 * dx * lattice_l1(&c, dx)
    });
    let differential_lhs = diffs.into_iter().fold(0.0, f64::max);
    Ok(OperatorNormReport {
        continuity_lhs,
        continuity_rhs,
        differential_lhs,
        differential_rhs: 2.0 * lattice_l1(&diff, dx),
        probes: probes.len(),
    })
}

/// `<x^n>' = a^{-n} sum_i C(n, i) <x^i> <x^{n-i}>`, applied to every stored
/// order. The trusted range carries over unchanged.
pub fn moment_pushforward(m: &MomentVector, a: ScaleParam) -> Result<MomentVector> {
    if m.values.is_empty() {
        return Err(Error::Domain("empty moment vector".into()));
    }
    let n_max = m.n_max();
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut binom = 1.0;
        let mut acc = 0.0;
        for i in 0..=n {
            acc += binom * m.values[i] * m.values[n - i];
            binom = binom * (n - i) as f64 / (i + 1) as f64;
        }
        out.push(acc * a.a.powi(-(n as i32)));
    }
    Ok(MomentVector { values: out, finite_up_to: m.finite_up_to })
}

/// Pushforward restricted to trusted orders.
pub fn moment_pushforward_checked(m: &MomentVector, a: ScaleParam, n_max: usize) -> Result<MomentVector> {
    if n_max > m.finite_up_to {
        return Err(Error::DivergentMoment { order: m.finite_up_to + 1, tail_index: f64::NAN });
    }
    let truncated = MomentVector { values: m.values[..=n_max].to_vec(), finite_up_to: n_max };
    moment_pushforward(&truncated, a)
}

/// Fate of the variance under iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceRegime {
    /// `|a| > sqrt 2`: variance tends to zero.
    Contracting,
    /// `|a| = sqrt 2`: variance preserved.
    Critical,
    /// `|a| < sqrt 2`: variance grows without bound.
    Expanding,
}

pub fn variance_regime(a: ScaleParam) -> VarianceRegime {
    let d = a.a * a.a - 2.0;
    if d.abs() <= 1e-12 {
        VarianceRegime::Critical
    } else if d > 0.0 {
        VarianceRegime::Contracting
    } else {
        VarianceRegime::Expanding
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::ClosedForm;
    use crate::density::l1_distance;
    use crate::numerics::direct_convolve;
    use std::f64::consts::{PI, SQRT_2};

    fn gauss(spec: GridSpec, sigma: f64) -> GridDensity {
        GridDensity::from_fn(spec, move |x| (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())).unwrap()
    }

    #[test]
    fn gaussian_fixed_point() {
        let g = gauss(GridSpec::symmetric(1 << 14, 20.0).unwrap(), 1.0);
        let t = apply_spatial(&g, ScaleParam::new(SQRT_2).unwrap()).unwrap();
        assert!(l1_distance(&g, &t).unwrap() < 1e-6);
    }

    #[test]
    fn cauchy_fixed_point() {
        let spec = GridSpec::symmetric(1 << 14, 200.0).unwrap();
        let c = GridDensity::from_fn(spec, |x| 1.0 / (PI * (1.0 + x * x))).unwrap();
        let t = apply_spatial(&c, ScaleParam::new(2.0).unwrap()).unwrap();
        let r = l1_distance(&c, &t).unwrap();
        assert!(r < 1e-4, "{r}");
    }

    #[test]
    fn uniform_self_convolution_is_triangle() {
        let spec = GridSpec::new(1 << 12, -1.0, 4.0 / 4096.0).unwrap();
        let u = GridDensity::from_fn(spec, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        let t = apply_spatial(&u, ScaleParam::new(1.0).unwrap()).unwrap();
        let tri = GridDensity::from_fn(spec, |x| (1.0 - (x - 1.0).abs()).max(0.0)).unwrap();
        assert!(l1_distance(&t, &tri).unwrap() < 2e-3);
    }

    #[test]
    fn spectral_examples() {
        let c = SpectralFunction::from_closed_form(ClosedForm::Cauchy { scale: 1.0 }, 10.0, 256).unwrap();
        let t = apply_spectral(&c, ScaleParam::new(2.0).unwrap()).unwrap();
        for (x, y) in t.values.iter().zip(&c.values) {
            assert!((x - y).norm() < 1e-15);
        }
        let g = SpectralFunction::from_closed_form(ClosedForm::Gaussian { sigma: 1.0 }, 10.0, 2048).unwrap().without_closed_form();
        let t = apply_spectral(&g, ScaleParam::new(2.0).unwrap()).unwrap();
        for j in 0..t.n_k() {
            let k = t.k(j);
            assert!((t.values[j].re - (-k * k / 4.0).exp()).abs() < 1e-6);
        }
        assert!(matches!(apply_spectral(&g, ScaleParam::new(0.5).unwrap()), Err(Error::Window(_))));
    }

    #[test]
    fn moment_examples() {
        let m = MomentVector::exact(vec![1.0, 0.0, 1.0]);
        assert!((moment_pushforward(&m, ScaleParam::new(SQRT_2).unwrap()).unwrap().values[2] - 1.0).abs() < 1e-15);
        assert!((moment_pushforward(&m, ScaleParam::new(2.0).unwrap()).unwrap().values[2] - 0.5).abs() < 1e-15);
        let m = MomentVector::exact(vec![1.0, 1.0]);
        assert!((moment_pushforward(&m, ScaleParam::new(2.0).unwrap()).unwrap().values[1] - 1.0).abs() < 1e-15);
        let short = MomentVector { values: vec![1.0, 0.0, 1.0], finite_up_to: 1 };
        assert!(matches!(moment_pushforward_checked(&short, ScaleParam::new(2.0).unwrap(), 2), Err(Error::DivergentMoment { .. })));
    }

    #[test]
    fn regimes() {
        let r = |a: f64| variance_regime(ScaleParam::new(a).unwrap());
        assert_eq!(r(1.5), VarianceRegime::Contracting);
        assert_eq!(r(SQRT_2), VarianceRegime::Critical);
        assert_eq!(r(-SQRT_2), VarianceRegime::Critical);
        assert_eq!(r(1.2), VarianceRegime::Expanding);
    }

    #[test]
    fn differential_at_rho_is_twice_the_map() {
        let spec = GridSpec::symmetric(1 << 10, 10.0).unwrap();
        let g = gauss(spec, 1.0);
        let a = ScaleParam::new(1.7).unwrap();
        let dz = differential_apply(&g, &PerturbationField::from_density(&g), a).unwrap();
        let t = apply_spatial(&g, a).unwrap();
        for (x, y) in dz.values.iter().zip(&t.values) {
            assert!((x - 2.0 * y).abs() < 1e-12);
        }
        let zero = differential_apply(&g, &PerturbationField::zeros(spec), a).unwrap();
        assert!(zero.norm() == 0.0);
    }

    #[test]
    fn instability_examples() {
        let spec = GridSpec::symmetric(1 << 10, 10.0).unwrap();
        let g = gauss(spec, 1.0);
        let h = PerturbationField::from_density(&g).scaled(0.3);
        let (lhs, rhs) = strong_instability_margin(&h, ScaleParam::new(2.0).unwrap()).unwrap();
        assert!((rhs - 0.3).abs() < 1e-9);
        // all terms positive: equality 2(0.3) + 0.09
        assert!((lhs - 0.69).abs() < 1e-9, "{lhs}");
        let big = PerturbationField::from_density(&g);
        assert!(matches!(strong_instability_margin(&big, ScaleParam::new(2.0).unwrap()), Err(Error::Domain(_))));
    }

    #[test]
    fn lattice_convolution_matches_direct() {
        let spec = GridSpec::symmetric(128, 4.0).unwrap();
        let h = PerturbationField::from_fn(spec, |x| (x * 1.3).sin() * (-x * x).exp()).normalized().scaled(0.4);
        let (lhs, _) = strong_instability_margin(&h, ScaleParam::new(2.0).unwrap()).unwrap();
        let mut c: Vec<f64> = direct_convolve(&h.values, &h.values).iter().map(|v| v * h.dx).collect();
        for (i, v) in h.values.iter().enumerate() {
            c[i + 64] += 2.0 * v;
        }
        let direct = h.dx * c.iter().map(|v| v.abs()).sum::<f64>();
        assert!((lhs - direct).abs() < 1e-12);
    }
}
