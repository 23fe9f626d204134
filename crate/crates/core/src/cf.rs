//! Characteristic functions known in closed form.

use crate::density::GridDensity;
use crate::error::{Error, Result};
use crate::quad;
use crate::special::{abs_pow, exp_m1, gamma, ln_1p, C64, I};
use crate::stable::{StableParams, TestDensityParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Tagged characteristic-function formulas. Every variant except `Eigen`
/// is the cf of a probability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedForm {
    /// Point mass at the origin.
    One,
    Gaussian { sigma: f64 },
    Cauchy { scale: f64 },
    Stable(StableParams),
    Uniform { lo: f64, hi: f64 },
    Laplace { scale: f64 },
    /// `(nu/2) x0^nu |x|^{-nu-1}` on `|x| >= x0`, `0 < nu < 2`.
    Pareto { nu: f64, x0: f64 },
    TestDensity(TestDensityParams),
    /// `S(k) (B+ theta(k) + B- theta(-k)) |k|^s`; not a cf.
    Eigen { base: StableParams, s: C64, b_plus: C64, b_minus: C64 },
    /// `S(k) (1 + eps eta_s(k))`.
    Perturbed { base: StableParams, s: C64, b_plus: C64, b_minus: C64, eps: f64 },
    /// `base(k / divisor)^power`, the closed form of iterated maps.
    Iterated { base: Box<ClosedForm>, divisor: f64, power: f64 },
    /// Unit-mass point masses `weights[i]` at `x_min + i dx`; the exact cf
    /// of a gridded density.
    Lattice { x_min: f64, dx: f64, weights: Vec<f64> },
}

fn eta(k: f64, s: C64, b_plus: C64, b_minus: C64) -> C64 {
    let b = if k >= 0.0 { b_plus } else { b_minus };
    b * abs_pow(k, s)
}

impl ClosedForm {
    pub fn eval(&self, k: f64) -> C64 {
        match self {
            ClosedForm::One => C64::new(1.0, 0.0),
            ClosedForm::Gaussian { sigma } => C64::new((-0.5 * sigma * sigma * k * k).exp(), 0.0),
            ClosedForm::Cauchy { scale } => C64::new((-scale * k.abs()).exp(), 0.0),
            ClosedForm::Laplace { scale } => C64::new(1.0 / (1.0 + scale * scale * k * k), 0.0),
            ClosedForm::Uniform { lo, hi } => {
                let w = 0.5 * (hi - lo);
                C64::from_polar(sinc(w * k), 0.5 * (hi + lo) * k)
            }
            ClosedForm::Pareto { .. } | ClosedForm::TestDensity(_) | ClosedForm::Lattice { .. } => {
                C64::new(1.0, 0.0) - self.one_minus(k)
            }
            ClosedForm::Eigen { base, s, b_plus, b_minus } => {
                base.cf_unchecked(k) * eta(k, *s, *b_plus, *b_minus)
            }
            _ => (-self.neg_log(k)).exp(),
        }
    }

    /// `-ln cf(k)` on the principal branch, accurate when `cf` is near 1.
    pub fn neg_log(&self, k: f64) -> C64 {
        match self {
            ClosedForm::One => C64::new(0.0, 0.0),
            ClosedForm::Gaussian { sigma } => C64::new(0.5 * sigma * sigma * k * k, 0.0),
            ClosedForm::Cauchy { scale } => C64::new(scale * k.abs(), 0.0),
            ClosedForm::Stable(p) => p.exponent(k),
            ClosedForm::Laplace { scale } => C64::new((scale * scale * k * k).ln_1p(), 0.0),
            ClosedForm::Uniform { lo, hi } => {
                let w = 0.5 * (hi - lo);
                -ln_1p(C64::new(sinc_m1(w * k), 0.0)) - I * (0.5 * (hi + lo) * k)
            }
            ClosedForm::Pareto { .. } | ClosedForm::TestDensity(_) | ClosedForm::Lattice { .. } => {
                -ln_1p(-self.one_minus(k))
            }
            ClosedForm::Eigen { .. } => -self.eval(k).ln(),
            ClosedForm::Perturbed { base, s, b_plus, b_minus, eps } => {
                base.exponent(k) - ln_1p(eta(k, *s, *b_plus, *b_minus) * *eps)
            }
            ClosedForm::Iterated { base, divisor, power } => base.neg_log(k / divisor) * *power,
        }
    }

    /// `1 - cf(k)`, accurate near `k = 0`.
    pub fn one_minus(&self, k: f64) -> C64 {
        match self {
            ClosedForm::Pareto { nu, x0 } => C64::new(pareto_one_minus(*nu, *x0, k), 0.0),
            ClosedForm::TestDensity(tp) => test_density_one_minus(tp, k),
            ClosedForm::Eigen { .. } => C64::new(1.0, 0.0) - self.eval(k),
            ClosedForm::Lattice { x_min, dx, weights } => lattice_one_minus(*x_min, *dx, weights, k),
            _ => -exp_m1(-self.neg_log(k)),
        }
    }

    /// Whether `cf(-k) = conj cf(k)`, i.e. the underlying measure is real.
    pub fn is_hermitian(&self) -> bool {
        match self {
            ClosedForm::Eigen { s, b_plus, b_minus, .. }
            | ClosedForm::Perturbed { s, b_plus, b_minus, .. } => {
                s.im == 0.0 && (*b_minus - b_plus.conj()).norm() <= 1e-15 * b_plus.norm().max(1.0)
            }
            ClosedForm::Iterated { base, .. } => base.is_hermitian(),
            _ => true,
        }
    }

    /// Whether this is the cf of a probability measure.
    pub fn is_cf(&self) -> bool {
        match self {
            ClosedForm::Eigen { .. } => false,
            ClosedForm::Iterated { base, .. } => base.is_cf(),
            _ => true,
        }
    }

    /// `Some(e)` when the measure is the point mass `delta(x + e)`.
    pub fn delta_shift(&self) -> Option<f64> {
        match self {
            ClosedForm::One => Some(0.0),
            ClosedForm::Stable(p) => p.delta_shift(),
            ClosedForm::Iterated { base, divisor, power } => {
                base.delta_shift().map(|e| e * power / divisor)
            }
            _ => None,
        }
    }

    /// Leading small-k data `(nu, B)` with `1 - cf(k) = B k^nu + o(k^nu)` for
    /// `k > 0`.
    pub fn small_k_expansion(&self) -> Option<(f64, C64)> {
        let r = |x: f64| C64::new(x, 0.0);
        match self {
            ClosedForm::One => None,
            ClosedForm::Gaussian { sigma } => Some((2.0, r(0.5 * sigma * sigma))),
            ClosedForm::Cauchy { scale } => Some((1.0, r(*scale))),
            ClosedForm::Stable(p) if p.a.norm() > 0.0 => Some((p.alpha, p.a)),
            ClosedForm::Stable(_) => None,
            ClosedForm::Laplace { scale } => Some((2.0, r(scale * scale))),
            ClosedForm::Uniform { lo, hi } => {
                let c = 0.5 * (lo + hi);
                if c.abs() > 0.0 {
                    return Some((1.0, -I * c));
                }
                Some((2.0, r((hi - lo).powi(2) / 24.0)))
            }
            ClosedForm::Pareto { nu, x0 } => Some((*nu, r(nu * pareto_c(*nu) * x0.powf(*nu)))),
            ClosedForm::TestDensity(tp) => Some((tp.alpha, tp.predicted_a())),
            ClosedForm::Eigen { .. } | ClosedForm::Lattice { .. } => None,
            ClosedForm::Perturbed { base, s, b_plus, eps, .. } => {
                let lead = base.a - b_plus * *eps;
                if (s.re - base.alpha).abs() < 1e-12 {
                    Some((base.alpha, lead))
                } else if s.re < base.alpha {
                    Some((s.re, -b_plus * *eps))
                } else {
                    Some((base.alpha, base.a))
                }
            }
            ClosedForm::Iterated { base, divisor, power } => {
                let (nu, b) = base.small_k_expansion()?;
                let b = if *divisor < 0.0 { b.conj() } else { b };
                Some((nu, b * (*power / divisor.abs().powf(nu))))
            }
        }
    }

    /// Probability density, where one is available in closed form.
    pub fn pdf(&self, x: f64) -> Option<f64> {
        match self {
            ClosedForm::Gaussian { sigma } => {
                Some((-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt()))
            }
            ClosedForm::Cauchy { scale } => Some(scale / (PI * (scale * scale + x * x))),
            ClosedForm::Laplace { scale } => Some((-x.abs() / scale).exp() / (2.0 * scale)),
            ClosedForm::Uniform { lo, hi } => {
                Some(if x >= *lo && x <= *hi { 1.0 / (hi - lo) } else { 0.0 })
            }
            ClosedForm::Pareto { nu, x0 } => Some(if x.abs() >= *x0 {
                0.5 * nu * x0.powf(*nu) * x.abs().powf(-nu - 1.0)
            } else {
                0.0
            }),
            ClosedForm::TestDensity(tp) => Some(tp.pdf(x)),
            ClosedForm::Stable(p) => p.pdf_closed_form(x),
            _ => None,
        }
    }

    /// The cf after one application of the map with scale `a`.
    pub fn apply_scale(&self, a: f64) -> ClosedForm {
        match self {
            ClosedForm::One => ClosedForm::One,
            ClosedForm::Iterated { base, divisor, power } => ClosedForm::Iterated {
                base: base.clone(),
                divisor: divisor * a,
                power: power * 2.0,
            },
            other => ClosedForm::Iterated { base: Box::new(other.clone()), divisor: a, power: 2.0 },
        }
    }

    /// Short human-readable tag.
    pub fn name(&self) -> &'static str {
        match self {
            ClosedForm::One => "delta",
            ClosedForm::Gaussian { .. } => "gaussian",
            ClosedForm::Cauchy { .. } => "cauchy",
            ClosedForm::Stable(_) => "stable",
            ClosedForm::Uniform { .. } => "uniform",
            ClosedForm::Laplace { .. } => "laplace",
            ClosedForm::Pareto { .. } => "pareto",
            ClosedForm::TestDensity(_) => "test-density",
            ClosedForm::Eigen { .. } => "eigen",
            ClosedForm::Perturbed { .. } => "perturbed",
            ClosedForm::Iterated { .. } => "iterated",
            ClosedForm::Lattice { .. } => "lattice",
        }
    }

    /// The lattice measure of a gridded density, rescaled to unit mass.
    pub fn lattice(d: &GridDensity) -> Result<ClosedForm> {
        let mass = d.mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Numeric(format!("cannot normalize a density of mass {mass}")));
        }
        let weights = d.values.iter().map(|v| v * d.dx / mass).collect();
        Ok(ClosedForm::Lattice { x_min: d.x_min, dx: d.dx, weights })
    }
}

/// `sum w (1 - e^{ikx})` with `1 - cos` written as `2 sin^2` for accuracy.
fn lattice_one_minus(x_min: f64, dx: f64, w: &[f64], k: f64) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (i, &wi) in w.iter().enumerate() {
        let t = k * (x_min + i as f64 * dx);
        let h = (0.5 * t).sin();
        re += wi * 2.0 * h * h;
        im -= wi * t.sin();
    }
    C64::new(re, im)
}

fn sinc(x: f64) -> f64 {
    1.0 + sinc_m1(x)
}

/// `sin(x)/x - 1`.
fn sinc_m1(x: f64) -> f64 {
    if x.abs() < 0.5 {
        let x2 = x * x;
        -x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0))))
    } else {
        x.sin() / x - 1.0
    }
}

/// `int_0^inf (1 - cos t) t^{-nu-1} dt`.
pub fn pareto_c(nu: f64) -> f64 {
    if (nu - 1.0).abs() < 1e-14 {
        PI / 2.0
    } else {
        gamma(1.0 - nu) * (PI * nu / 2.0).cos() / nu
    }
}

fn pareto_one_minus(nu: f64, x0: f64, k: f64) -> f64 {
    let q = k.abs() * x0;
    if q == 0.0 {
        return 0.0;
    }
    if q <= 4.0 {
        // C - int_0^q (1 - cos t) t^{-nu-1} dt by its power series
        let mut partial = 0.0;
        let mut fact = 1.0;
        let q2 = q * q;
        let mut qp = q.powf(2.0 - nu);
        for m in 1..200 {
            let two_m = 2 * m;
            fact *= ((two_m - 1) * two_m) as f64;
            let term = qp / (fact * (two_m as f64 - nu));
            partial += if m % 2 == 1 { term } else { -term };
            if term < 1e-18 * partial.abs() {
                break;
            }
            qp *= q2;
        }
        nu * q.powf(nu) * (pareto_c(nu) - partial)
    } else {
        // int_q^inf cos(t) t^{-nu-1} dt along t = q + i y
        let j = quad::panels_c(0.0, 60.0, 16, |y| (-y).exp() * C64::new(q, y).powf(-nu - 1.0));
        let j = (I * C64::from_polar(1.0, q) * j).re;
        1.0 - nu * q.powf(nu) * j
    }
}

/// `F(kappa) = int_0^inf (1 - e^{i kappa u}) / (1 + u^beta) du` for
/// `kappa > 0`, `1 < beta < 2`, evaluated along the imaginary axis
/// `u = i y` by the trapezoid rule in `ln y`.
pub fn test_density_f(beta: f64, kappa: f64) -> C64 {
    let table = contour_table(beta);
    table.eval(kappa).unwrap_or_else(|| test_density_f_direct(beta, kappa))
}

fn contour_step(beta: f64) -> f64 {
    PI * (1.0 / beta - 0.5) / 5.5
}

fn test_density_f_direct(beta: f64, kappa: f64) -> C64 {
    let alpha = beta - 1.0;
    let omega = C64::from_polar(1.0, PI * beta / 2.0);
    let h = contour_step(beta);
    let centre = -kappa.ln();
    let s_lo = (centre - 40.0).min(-60.0);
    let s_hi = centre.max(0.0) + 33.0 / alpha;
    let n = ((s_hi - s_lo) / h).ceil() as usize;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..=n {
        let s = s_lo + j as f64 * h;
        let num = -(-kappa * s.exp()).exp_m1();
        acc += num / ((-s).exp() + omega * (alpha * s).exp());
    }
    I * acc * h
}

const SERIES_TERMS: usize = 6;
const LEFT_CUT: f64 = 5.0;
const RIGHT_CUT: f64 = 3.8;

/// Contour nodes on a fixed grid `s_j = s_min + j h`. Below `-ln kappa - 5`
/// the factor `1 - e^{-kappa y}` is summed through its power series
/// (prefix sums scaled by `y_j^{-p}` to stay finite), above
/// `-ln kappa + 3.8` it is 1 and a suffix sum applies.
struct ContourTable {
    s_min: f64,
    h: f64,
    right_reach: f64,
    y: Vec<f64>,
    w: Vec<C64>,
    prefix: Vec<[C64; SERIES_TERMS]>,
    suffix: Vec<C64>,
}

impl ContourTable {
    fn new(beta: f64) -> Self {
        let alpha = beta - 1.0;
        let omega = C64::from_polar(1.0, PI * beta / 2.0);
        let h = contour_step(beta);
        let s_min = -60.0;
        let right_reach = 40.0 / alpha;
        let s_max = 250.0 + right_reach;
        let n = ((s_max - s_min) / h).ceil() as usize + 1;
        let y: Vec<f64> = (0..n).map(|j| (s_min + j as f64 * h).exp()).collect();
        let w: Vec<C64> = (0..n)
            .map(|j| {
                let s = s_min + j as f64 * h;
                1.0 / ((-s).exp() + omega * (alpha * s).exp())
            })
            .collect();
        let mut prefix = vec![[C64::new(0.0, 0.0); SERIES_TERMS]; n];
        for j in 1..n {
            for p in 0..SERIES_TERMS {
                let decay = (-((p + 1) as f64) * h).exp();
                prefix[j][p] = (prefix[j - 1][p] + w[j - 1]) * decay;
            }
        }
        let mut suffix = vec![C64::new(0.0, 0.0); n + 1];
        for j in (0..n).rev() {
            suffix[j] = suffix[j + 1] + w[j];
        }
        Self { s_min, h, right_reach, y, w, prefix, suffix }
    }

    fn eval(&self, kappa: f64) -> Option<C64> {
        let centre = -kappa.ln();
        let n = self.y.len();
        let s_max = self.s_min + (n - 1) as f64 * self.h;
        if !centre.is_finite() || centre - LEFT_CUT < self.s_min + self.h || centre + self.right_reach > s_max {
            return None;
        }
        let j1 = ((centre - LEFT_CUT - self.s_min) / self.h).ceil() as usize;
        let j2 = ((centre + RIGHT_CUT - self.s_min) / self.h).ceil() as usize;
        let mut acc = self.suffix[j2];
        for j in j1..j2 {
            acc += -(-kappa * self.y[j]).exp_m1() * self.w[j];
        }
        // sum_{i<j1} w_i (1 - e^{-kappa y_i}) = -sum_p (-kappa y_{j1})^p / p! * prefix
        let ky = kappa * self.y[j1];
        let mut coef = 1.0;
        for p in 0..SERIES_TERMS {
            coef *= -ky / (p + 1) as f64;
            acc -= coef * self.prefix[j1][p];
        }
        Some(I * acc * self.h)
    }
}

fn contour_table(beta: f64) -> Arc<ContourTable> {
    static CACHE: OnceLock<Mutex<Vec<(u64, Arc<ContourTable>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(Vec::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    if let Some((_, t)) = guard.iter().find(|(b, _)| *b == beta.to_bits()) {
        return t.clone();
    }
    let t = Arc::new(ContourTable::new(beta));
    guard.push((beta.to_bits(), t.clone()));
    t
}

fn test_density_one_minus(tp: &TestDensityParams, k: f64) -> C64 {
    if k == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let beta = tp.alpha + 1.0;
    let f = test_density_f(beta, k.abs() * tp.x_scale);
    let v = (f * tp.c2 + f.conj() * tp.c1) * tp.x_scale.powf(-tp.alpha);
    if k > 0.0 {
        v
    } else {
        v.conj()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct_cf(pdf: impl Fn(f64) -> f64, k: f64, lim: f64, breaks: &[f64]) -> C64 {
        let mut pts = vec![-lim];
        pts.extend_from_slice(breaks);
        pts.push(lim);
        let mut acc = C64::new(0.0, 0.0);
        for w in pts.windows(2) {
            acc += quad::panels_c(w[0], w[1], 4000, |x| C64::from_polar(pdf(x), k * x));
        }
        acc
    }

    #[test]
    fn contour_table_matches_direct_sum() {
        for &beta in &[1.1, 1.3, 1.5, 1.9] {
            for e in -60..=15 {
                let kappa = 10f64.powf(e as f64 * 0.37);
                let a = test_density_f(beta, kappa);
                let b = test_density_f_direct(beta, kappa);
                assert!((a - b).norm() <= 1e-12 * b.norm(), "beta {beta} kappa {kappa}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn pareto_branches_agree_with_quadrature() {
        for &nu in &[0.5, 1.0, 1.5] {
            let cf = ClosedForm::Pareto { nu, x0: 1.0 };
            for &k in &[0.3, 2.0, 3.99, 4.01, 20.0] {
                // cf = nu int_1^inf cos(kx) x^{-nu-1} dx; split off the tail via the series branch
                let head = 2.0 * quad::panels(1.0, 400.0, 20000, |x| {
                    0.5 * nu * x.powf(-nu - 1.0) * (k * x).cos()
                });
                let tail_bound = 400f64.powf(-nu) * 2.0;
                let v = cf.eval(k).re;
                assert!((v - head).abs() < tail_bound / (k * 400.0) * 4.0 + 1e-9, "nu {nu} k {k}: {v} vs {head}");
            }
        }
        // continuity across the branch switch
        let cf = ClosedForm::Pareto { nu: 0.5, x0: 1.0 };
        let jump = (cf.eval(4.0 - 1e-13) - cf.eval(4.0 + 1e-13)).norm();
        assert!(jump < 1e-12, "{jump}");
    }

    #[test]
    fn test_density_cf_matches_direct_quadrature() {
        let tp = TestDensityParams::new(2.0, 1.0, 0.5).unwrap();
        let cf = ClosedForm::TestDensity(tp);
        for &k in &[0.5, 1.0, 3.0] {
            let direct = direct_cf(|x| tp.pdf(x), k, 2e4, &[-tp.x_scale, 0.0, tp.x_scale]);
            // tails beyond 2e4 carry about c 2e4^{-1/2} / alpha of mass with oscillation
            let v = cf.eval(k);
            assert!((v - direct).norm() < 2e-3, "k {k}: {v} vs {direct}");
        }
        // small-k behaviour approaches the predicted modulus
        let k = 1e-8;
        let b = cf.one_minus(k) / k.powf(0.5);
        assert!((b - tp.predicted_a()).norm() < 1e-3 * tp.predicted_a().norm());
    }

    #[test]
    fn iterated_form_composes() {
        let g = ClosedForm::Gaussian { sigma: 1.0 };
        let it = g.apply_scale(2.0).apply_scale(2.0);
        let k = 0.7;
        let exact = g.eval(k / 4.0).powf(4.0);
        assert!((it.eval(k) - exact).norm() < 1e-15);
        let (nu, b) = it.small_k_expansion().unwrap();
        assert_eq!(nu, 2.0);
        assert!((b.re - 0.5 * 4.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn uniform_neg_log_is_accurate() {
        let u = ClosedForm::Uniform { lo: 0.0, hi: 1.0 };
        let k: f64 = 1e-6;
        let direct = C64::from_polar((0.5 * k).sin() / (0.5 * k), 0.5 * k);
        assert!((u.eval(k) - direct).norm() < 1e-15);
        let om = u.one_minus(k);
        assert!((om.im + 0.5 * k).abs() < 1e-18);
    }
}
