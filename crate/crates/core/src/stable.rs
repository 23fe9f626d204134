//! Strictly stable laws `S_{alpha,A}` and the heavy-tailed test-density
//! family used to probe their positivity.

use crate::cf::ClosedForm;
use crate::density::{invert_closed_form_periodic, GridDensity, GridSpec, InversionOptions};
use crate::error::{Error, Result};
use crate::numerics::cubic_at;
use crate::par;
use crate::special::{gamma, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Slack allowed when comparing `|arg A|` with the admissibility bound.
const PHASE_SLACK: f64 = 1e-12;

/// `(alpha, A)` of a strictly stable law with its admissibility state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "StableJson", from = "StableJson")]
pub struct StableParams {
    pub alpha: f64,
    pub a: C64,
    pub admissible: bool,
}

#[derive(Serialize, Deserialize)]
struct StableJson {
    alpha: f64,
    #[serde(rename = "re_A")]
    re_a: f64,
    #[serde(rename = "im_A")]
    im_a: f64,
    #[serde(default, skip_serializing, rename = "admissible")]
    _admissible: Option<bool>,
}

impl From<StableParams> for StableJson {
    fn from(p: StableParams) -> Self {
        Self { alpha: p.alpha, re_a: p.a.re, im_a: p.a.im, _admissible: None }
    }
}

impl From<StableJson> for StableParams {
    fn from(j: StableJson) -> Self {
        validate_params(j.alpha, C64::new(j.re_a, j.im_a))
    }
}

/// `(pi/2)(1 - |alpha - 1|)`, the largest admissible `|arg A|`.
pub fn phase_bound(alpha: f64) -> f64 {
    0.5 * PI * (1.0 - (alpha - 1.0).abs())
}

/// Classifies `(alpha, A)`. `A = 0` is always admissible (the point mass).
pub fn validate_params(alpha: f64, a: C64) -> StableParams {
    let admissible = if a.norm() == 0.0 {
        alpha > 0.0
    } else {
        alpha > 0.0 && alpha <= 2.0 && a.arg().abs() <= phase_bound(alpha) + PHASE_SLACK
    };
    StableParams { alpha, a, admissible }
}

/// `ln 2 / ln|a|`.
pub fn alpha_from_scale(a: f64) -> Result<f64> {
    if !(a.abs() > 1.0) {
        return Err(Error::Domain(format!("|a| = {} must exceed 1", a.abs())));
    }
    Ok(2f64.ln() / a.abs().ln())
}

/// `2^{1/alpha}`, the positive scale whose fixed points have index alpha.
pub fn scale_from_alpha(alpha: f64) -> f64 {
    2f64.powf(1.0 / alpha)
}

impl StableParams {
    /// Builds params with the admissibility flag computed.
    pub fn new(alpha: f64, a: C64) -> Self {
        validate_params(alpha, a)
    }

    /// `A = modulus e^{i phi}`.
    pub fn from_polar(alpha: f64, modulus: f64, phi: f64) -> Self {
        validate_params(alpha, C64::from_polar(modulus, phi))
    }

    /// Same as [`StableParams::new`]; used where admissibility is not
    /// required by the caller, e.g. deliberate counterexamples.
    pub fn new_unchecked(alpha: f64, a: C64) -> Self {
        validate_params(alpha, a)
    }

    pub fn phi(&self) -> f64 {
        self.a.arg()
    }

    pub fn require_admissible(&self) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(Error::Param(format!(
                "alpha = {}, arg A = {:.6} (bound {:.6})",
                self.alpha,
                self.phi(),
                phase_bound(self.alpha)
            )))
        }
    }

    /// `A |k|^alpha` for `k > 0`, `conj(A) |k|^alpha` for `k < 0`.
    pub fn exponent(&self, k: f64) -> C64 {
        if k == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let m = k.abs().powf(self.alpha);
        if k > 0.0 {
            self.a * m
        } else {
            self.a.conj() * m
        }
    }

    /// cf without the admissibility check.
    pub fn cf_unchecked(&self, k: f64) -> C64 {
        (-self.exponent(k)).exp()
    }

    /// `Some(e)` when the law is `delta(x + e)`: `A = 0`, or `alpha = 1`
    /// with `Re A = 0`.
    pub fn delta_shift(&self) -> Option<f64> {
        let n = self.a.norm();
        if n == 0.0 {
            return Some(0.0);
        }
        if (self.alpha - 1.0).abs() < 1e-14 && self.a.re.abs() <= 1e-14 * n {
            return Some(self.a.im);
        }
        None
    }

    pub fn closed_form(&self) -> ClosedForm {
        ClosedForm::Stable(*self)
    }

    /// Gaussian, Cauchy and one-sided index-1/2 laws.
    pub fn pdf_closed_form(&self, x: f64) -> Option<f64> {
        let (m, phi) = (self.a.norm(), self.phi());
        if m == 0.0 {
            return None;
        }
        if self.alpha == 2.0 && phi.abs() < 1e-15 {
            let var = 2.0 * self.a.re;
            return Some((-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt());
        }
        if self.alpha == 1.0 && self.a.re > 0.0 {
            // shifted Cauchy: cf exp(-g|k| - i e k) has centre -e
            let (g, e) = (self.a.re, self.a.im);
            let y = x + e;
            return Some(g / (PI * (g * g + y * y)));
        }
        if self.alpha == 0.5 && (phi.abs() - PI / 4.0).abs() < 1e-14 {
            // A = sqrt(2c) e^{-i pi/4} is supported on x > 0
            let c = 0.5 * m * m;
            let y = if phi < 0.0 { x } else { -x };
            return Some(if y > 0.0 {
                (c / (2.0 * PI)).sqrt() * y.powf(-1.5) * (-c / (2.0 * y)).exp()
            } else {
                0.0
            });
        }
        None
    }

    /// Wavenumber beyond which `|cf| < e^{-35}`.
    pub fn band_limit(&self) -> f64 {
        (35.0 / self.a.re.max(1e-300)).powf(1.0 / self.alpha)
    }

    /// Scale of the law, `(Re A)^{1/alpha}`.
    pub fn scale(&self) -> f64 {
        self.a.re.max(0.0).powf(1.0 / self.alpha)
    }

    /// Large-|x| expansion `sum_{j <= terms}` of the density. Convergent
    /// for `alpha < 1`, asymptotic otherwise.
    pub fn tail_series(&self, x: f64, terms: usize) -> f64 {
        if x == 0.0 {
            return f64::INFINITY;
        }
        let ax = x.abs();
        self.tail_terms(x > 0.0, terms).iter().map(|&(c, g)| c * ax.powf(-g)).sum()
    }

    /// Pairs `(c_j, gamma_j)` with `rho(x) ~ sum_j c_j |x|^{-gamma_j}` on the
    /// chosen side.
    pub fn tail_terms(&self, positive_side: bool, terms: usize) -> Vec<(f64, f64)> {
        let a = if positive_side { self.a } else { self.a.conj() };
        let mut pw = C64::new(1.0, 0.0);
        let mut fact = 1.0;
        (1..=terms)
            .map(|j| {
                pw *= -a;
                fact *= j as f64;
                let g = j as f64 * self.alpha + 1.0;
                ((pw / fact * gamma(g) * C64::from_polar(1.0, -PI * g / 2.0)).re / PI, g)
            })
            .collect()
    }
}

/// `S_{alpha,A}(k)`.
pub fn cf_eval(p: &StableParams, k: f64) -> Result<C64> {
    p.require_admissible()?;
    Ok(p.cf_unchecked(k))
}

/// A grid with spacing fine enough to resolve the band limit and domain as
/// wide as the tails allow, given `n` points and at most 16-fold
/// sub-sampling inside the inversion.
pub fn default_grid(p: &StableParams, n: usize) -> Result<GridSpec> {
    let dx_band = PI / p.band_limit();
    let wide = 50.0 * p.scale().max(1e-12);
    let l = wide.min(0.5 * n as f64 * dx_band * 16.0);
    GridSpec::symmetric(n, l)
}

/// Stable density on the grid plus a Richardson-style consistency estimate
/// (sup difference against inversion at half the k-spacing).
pub fn density_with_check(p: &StableParams, spec: GridSpec) -> Result<(GridDensity, f64)> {
    p.require_admissible()?;
    if let Some(shift) = p.delta_shift() {
        return Err(Error::DeltaLike { shift });
    }
    let opts = InversionOptions::default();
    let fine = density_unchecked(p, spec, &opts)?;
    let half = InversionOptions { oversample: 2 * opts.oversample, max_len: 2 * opts.max_len, ..opts };
    let check = density_unchecked(p, spec, &half)?;
    let diff = fine
        .values
        .iter()
        .zip(&check.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok((fine, diff))
}

/// Numerical density of `S_{alpha,A}`.
pub fn density(p: &StableParams, spec: GridSpec) -> Result<GridDensity> {
    density_with_check(p, spec).map(|r| r.0)
}

/// Inversion without the admissibility gate. Periodic images of the power
/// tails are removed with the tail series.
pub fn density_unchecked(p: &StableParams, spec: GridSpec, opts: &InversionOptions) -> Result<GridDensity> {
    let spec = GridSpec::new(spec.n, spec.x_min, spec.dx)?;
    let (mut values, period) = invert_closed_form_periodic(&ClosedForm::Stable(*p), spec, opts);
    if p.alpha < 2.0 {
        subtract_images(p, spec, period, &mut values);
    }
    let mass = spec.dx * values.iter().sum::<f64>();
    let truncated = (1.0 - mass).clamp(0.0, 1.0 - 1e-15);
    GridDensity::new(spec.x_min, spec.dx, values, truncated)
}

const IMAGE_TERMS: usize = 6;
const EXPLICIT_IMAGES: usize = 8;

/// Removes `sum_{m != 0} rho(x + m P)` from a periodized inversion, with
/// `rho` replaced by the tail series of `p`. The image sum is smooth on the
/// grid, so it is evaluated on at most 1025 nodes and interpolated.
pub fn subtract_images(p: &StableParams, spec: GridSpec, period: f64, values: &mut [f64]) {
    let right = p.tail_terms(true, IMAGE_TERMS);
    let left = p.tail_terms(false, IMAGE_TERMS);
    let n = values.len();
    let coarse = n.min(1025);
    let span = (n - 1) as f64 * spec.dx;
    let step = if coarse > 1 { span / (coarse - 1) as f64 } else { 0.0 };
    let nodes = par::map_range(coarse, |i| image_sum(&right, &left, spec.x_min + i as f64 * step, period));
    let ratio = if n > 1 { (coarse - 1) as f64 / (n - 1) as f64 } else { 0.0 };
    for (i, v) in values.iter_mut().enumerate() {
        *v -= if coarse == n { nodes[i] } else { cubic_at(&nodes, i as f64 * ratio) };
    }
}

fn image_sum(right: &[(f64, f64)], left: &[(f64, f64)], x: f64, period: f64) -> f64 {
    let mut acc = 0.0;
    for m in 1..=EXPLICIT_IMAGES {
        let mf = m as f64 * period;
        let (yr, yl) = (x + mf, mf - x);
        acc += right.iter().map(|&(c, g)| c * yr.powf(-g)).sum::<f64>();
        acc += left.iter().map(|&(c, g)| c * yl.powf(-g)).sum::<f64>();
    }
    // far images: midpoint Euler-Maclaurin through the third derivative
    let m0 = EXPLICIT_IMAGES as f64 + 0.5;
    for (terms, y0) in [(right, x + m0 * period), (left, m0 * period - x)] {
        for &(c, g) in terms {
            let u = period / y0;
            let corr = 1.0 - g * (g - 1.0) * u * u / 24.0 + 7.0 * (g - 1.0) * g * (g + 1.0) * (g + 2.0) * u.powi(4) / 5760.0;
            acc += c * y0.powf(1.0 - g) / ((g - 1.0) * period) * corr;
        }
    }
    acc
}

/// `sup |cf(k/a)^2 - cf(k)|` over `lo <= |k| <= hi`.
pub fn fixed_point_residual(p: &StableParams, a: f64, k_window: (f64, f64)) -> f64 {
    let (lo, hi) = k_window;
    let f = |k: f64| {
        let v = p.cf_unchecked(k / a);
        (v * v - p.cf_unchecked(k)).norm()
    };
    let n = 4096;
    let mut best = (0.0, lo);
    for sign in [1.0, -1.0] {
        for j in 0..=n {
            let k = sign * (lo + (hi - lo) * j as f64 / n as f64);
            let v = f(k);
            if v > best.0 {
                best = (v, k);
            }
        }
    }
    // refine around the best sample by golden-section search
    let h = (hi - lo) / n as f64;
    let sgn = best.1.signum();
    let (mut x0, mut x1) = ((best.1.abs() - h).max(lo), (best.1.abs() + h).min(hi));
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = x1 - gr * (x1 - x0);
        let d = x0 + gr * (x1 - x0);
        if f(sgn * c) > f(sgn * d) {
            x1 = d;
        } else {
            x0 = c;
        }
    }
    best.0.max(f(sgn * 0.5 * (x0 + x1)))
}

/// `c1 / (n^{alpha+1} + |x|^{alpha+1})` for `x < 0`, `c2 / (...)` for `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestDensityParams {
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    /// The normalizing scale `n`.
    pub x_scale: f64,
}

impl TestDensityParams {
    /// Solves the scale for unit mass: `n^alpha = (c1 + c2) (pi/b) / sin(pi/b)`
    /// with `b = alpha + 1`.
    pub fn new(c1: f64, c2: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("test density needs 0 < alpha < 1, got {alpha}")));
        }
        if !(c1 >= 0.0 && c2 >= 0.0 && c1 + c2 > 0.0) {
            return Err(Error::Domain(format!("need c1, c2 >= 0 with c1 + c2 > 0, got ({c1}, {c2})")));
        }
        let b = alpha + 1.0;
        let x_scale = ((c1 + c2) * (PI / b) / (PI / b).sin()).powf(1.0 / alpha);
        if !(x_scale.is_finite() && x_scale > 0.0) {
            return Err(Error::Numeric(format!("normalization failed (scale {x_scale})")));
        }
        Ok(Self { c1, c2, alpha, x_scale })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let b = self.alpha + 1.0;
        let c = if x < 0.0 { self.c1 } else { self.c2 };
        c / (self.x_scale.powf(b) + x.abs().powf(b))
    }

    /// Leading small-k coefficient under the `e^{+ikx}` convention:
    /// `(Gamma(1-alpha)/alpha) (c2 e^{-i pi alpha/2} + c1 e^{i pi alpha/2})`.
    pub fn predicted_a(&self) -> C64 {
        let g = gamma(1.0 - self.alpha) / self.alpha;
        let w = C64::from_polar(1.0, PI * self.alpha / 2.0);
        (w.conj() * self.c2 + w * self.c1) * g
    }

    /// `(c1^2 + c2^2 + 2 c1 c2 cos(pi alpha))^{1/2} Gamma(1-alpha)/alpha`.
    pub fn predicted_modulus(&self) -> f64 {
        let (c1, c2) = (self.c1, self.c2);
        (c1 * c1 + c2 * c2 + 2.0 * c1 * c2 * (PI * self.alpha).cos()).sqrt() * gamma(1.0 - self.alpha)
            / self.alpha
    }

    /// `arctan(((c2 - c1)/(c1 + c2)) tan(pi alpha / 2))`, the phase with the
    /// mass-on-the-right side counted positive. Under the `e^{+ikx}`
    /// convention `arg A` equals minus this.
    pub fn tan_formula_phase(&self) -> f64 {
        ((self.c2 - self.c1) / (self.c1 + self.c2) * (PI * self.alpha / 2.0).tan()).atan()
    }

    pub fn predicted_params(&self) -> StableParams {
        StableParams::new(self.alpha, self.predicted_a())
    }

    pub fn closed_form(&self) -> ClosedForm {
        ClosedForm::TestDensity(*self)
    }
}

/// Samples the test density on a grid and returns the predicted limit law.
pub fn test_density(tp: &TestDensityParams, spec: GridSpec) -> Result<(GridDensity, StableParams)> {
    let tp = TestDensityParams::new(tp.c1, tp.c2, tp.alpha)?;
    let d = GridDensity::from_fn(spec, |x| tp.pdf(x))?;
    Ok((d, tp.predicted_params()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    #[test]
    fn admissibility_examples() {
        assert!(!StableParams::from_polar(0.5, 1.0, PI / 3.0).admissible);
        assert!(StableParams::from_polar(0.5, 1.0, PI / 4.0).admissible);
        assert!(StableParams::new(2.0, C64::new(1.0, 0.0)).admissible);
        assert!(!StableParams::from_polar(2.0, 1.0, 0.1).admissible);
        assert!(!StableParams::new(2.5, C64::new(1.0, 0.0)).admissible);
        for &al in &[0.1, 1.0, 3.0] {
            assert!(StableParams::new(al, C64::new(0.0, 0.0)).admissible);
        }
    }

    #[test]
    fn scale_relations() {
        assert!((alpha_from_scale(2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((alpha_from_scale(2f64.sqrt()).unwrap() - 2.0).abs() < 1e-14);
        assert!((alpha_from_scale(4.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(alpha_from_scale(1.0), Err(Error::Domain(_))));
        assert!(matches!(alpha_from_scale(-0.5), Err(Error::Domain(_))));
        let al = alpha_from_scale(-3.0).unwrap();
        assert!((scale_from_alpha(al) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn cf_values() {
        let g = StableParams::new(2.0, C64::new(0.5, 0.0));
        assert!((cf_eval(&g, 1.3).unwrap().re - (-0.5 * 1.69f64).exp()).abs() < 1e-15);
        let c = StableParams::new(1.0, C64::new(1.0, 0.0));
        assert!((cf_eval(&c, -2.0).unwrap().re - (-2.0f64).exp()).abs() < 1e-15);
        let b = StableParams::from_polar(0.5, 1.0, PI / 4.0);
        let v = cf_eval(&b, 1.0).unwrap();
        assert!((v - (-C64::from_polar(1.0, PI / 4.0)).exp()).norm() < 1e-15);
        assert!((cf_eval(&b, -1.0).unwrap() - v.conj()).norm() < 1e-15);
        let bad = StableParams::from_polar(0.5, 1.0, PI / 3.0);
        assert!(matches!(cf_eval(&bad, 1.0), Err(Error::Param(_))));
    }

    #[test]
    fn fixed_point_residual_examples() {
        let c = StableParams::new(1.0, C64::new(1.0, 0.0));
        assert!(fixed_point_residual(&c, 2.0, (1e-3, 20.0)) < 1e-12);
        let r = fixed_point_residual(&c, 3.0, (1e-3, 20.0));
        assert!((r - 4.0 / 27.0).abs() < 1e-12, "{r}");
        let cx = StableParams::from_polar(1.0, 1.0, PI / 4.0);
        assert!(fixed_point_residual(&cx, -2.0, (1e-3, 20.0)) > 0.1);
        let real = StableParams::new(1.0, C64::new(1.0, 0.0));
        assert!(fixed_point_residual(&real, -2.0, (1e-3, 20.0)) < 1e-12);
    }

    #[test]
    fn cauchy_density_matches_closed_form() {
        let p = StableParams::new(1.0, C64::new(1.0, 0.0));
        let spec = GridSpec::symmetric(1 << 14, 200.0).unwrap();
        let (d, check) = density_with_check(&p, spec).unwrap();
        let err = (0..spec.n)
            .map(|i| (d.values[i] - 1.0 / (PI * (1.0 + spec.x(i).powi(2)))).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!(check < 1e-6);
    }

    #[test]
    fn one_sided_half_index_law() {
        // A on the boundary phi = pi/4 gives a law on x < 0
        let p = StableParams::from_polar(0.5, 1.0, PI / 4.0);
        let spec = GridSpec::symmetric(1 << 14, 100.0).unwrap();
        let d = density(&p, spec).unwrap();
        let wrong_side: f64 = (0..spec.n).filter(|&i| spec.x(i) > 0.0).map(|i| d.values[i]).sum::<f64>() * spec.dx;
        assert!(wrong_side.abs() < 1e-6, "{wrong_side}");
        let peak = d.max_value();
        assert!(d.min_value() > -1e-6 * peak);
        let err = (0..spec.n)
            .map(|i| (d.values[i] - p.pdf_closed_form(spec.x(i)).unwrap()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5 * peak, "{err}");
    }

    #[test]
    fn test_density_normalization_and_predictions() {
        for &(c1, c2, al) in &[(1.0, 1.0, 0.5), (0.0, 1.0, 0.5), (2.0, 1.0, 0.3)] {
            let tp = TestDensityParams::new(c1, c2, al).unwrap();
            let n = tp.x_scale;
            // mass by quadrature in u = x / n with the analytic power tail beyond 1e6
            let b = al + 1.0;
            let core = quad::panels(0.0, 1.0, 8, |u| 1.0 / (1.0 + u.powf(b)))
                + quad::graded(0.0, 1.0, 160, |t| {
                    // u = 1/t maps [1, inf) to (0, 1]
                    t.powf(b - 2.0) / (t.powf(b) + 1.0)
                });
            let mass = (c1 + c2) * n.powf(1.0 - b) * core;
            assert!((mass - 1.0).abs() < 1e-9, "{mass}");
            let pa = tp.predicted_a();
            assert!((pa.norm() - tp.predicted_modulus()).abs() < 1e-12);
            assert!((pa.arg() + tp.tan_formula_phase()).abs() < 1e-12);
            assert!(tp.predicted_params().admissible);
        }
        let one_sided = TestDensityParams::new(0.0, 1.0, 0.5).unwrap();
        assert!((one_sided.predicted_a().arg().abs() - PI / 4.0).abs() < 1e-12);
    }
}
