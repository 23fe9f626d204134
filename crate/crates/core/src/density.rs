//! Position-space and spectral representations of densities, the transforms
//! between them, moments and distances.

use crate::cf::ClosedForm;
use crate::error::{Error, Result};
use crate::numerics::{cubic_at, is_pow2, linear_fit};
use crate::par;
use crate::special::C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Numerical tolerances shared by the density routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed negativity of density samples.
    pub eps_neg: f64,
    /// Mass bookkeeping tolerance.
    pub tol_norm: f64,
    /// Hermitian-symmetry tolerance for spectra.
    pub tol_sym: f64,
    /// Largest truncated mass accepted by the transforms.
    pub truncation_cap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eps_neg: 1e-12,
            tol_norm: 1e-6,
            tol_sym: 1e-9,
            truncation_cap: 1e-2,
        }
    }
}

/// Uniform position grid `x_i = x_min + i dx`, `i < n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub x_min: f64,
    pub dx: f64,
}

impl GridSpec {
    pub fn new(n: usize, x_min: f64, dx: f64) -> Result<Self> {
        if !is_pow2(n) || n < 4 {
            return Err(Error::Grid(format!("grid length {n} is not a power of two >= 4")));
        }
        if !(dx > 0.0 && dx.is_finite() && x_min.is_finite()) {
            return Err(Error::Grid(format!("invalid spacing dx = {dx} or origin {x_min}")));
        }
        Ok(Self { n, x_min, dx })
    }

    /// `n` points covering `[-l, l)`.
    pub fn symmetric(n: usize, l: f64) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::Grid(format!("half-width {l} must be positive")));
        }
        Self::new(n, -l, 2.0 * l / n as f64)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// The k-grid dual to this grid under the discrete transform.
    pub fn dual_k(&self) -> (f64, usize) {
        (PI / self.dx, self.n)
    }

    fn same_as(&self, other: &GridSpec) -> bool {
        self.n == other.n
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
            && (self.x_min - other.x_min).abs() <= 1e-9 * self.dx
    }
}

/// Power-law fit `rho ~ c |x|^{-gamma}` on one side of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub coeff: f64,
    pub gamma: f64,
    /// Largest |x| on the fitted side.
    pub edge: f64,
}

impl TailFit {
    /// Mass beyond the edge predicted by the power law.
    pub fn mass_beyond(&self) -> f64 {
        if self.gamma <= 1.0 {
            return f64::INFINITY;
        }
        self.coeff * self.edge.powf(1.0 - self.gamma) / (self.gamma - 1.0)
    }

    pub fn eval(&self, ax: f64) -> f64 {
        self.coeff * ax.powf(-self.gamma)
    }
}

/// Tails steeper than this are treated as light.
const LIGHT_TAIL: f64 = 60.0;

/// Real density samples on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub x_min: f64,
    pub dx: f64,
    pub values: Vec<f64>,
    pub truncated_mass: f64,
}

impl GridDensity {
    /// Structural checks only; see [`GridDensity::validate`] for the density
    /// invariants.
    pub fn new(x_min: f64, dx: f64, values: Vec<f64>, truncated_mass: f64) -> Result<Self> {
        GridSpec::new(values.len(), x_min, dx)?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite density sample {v}")));
        }
        if !(0.0..1.0).contains(&truncated_mass) {
            return Err(Error::Domain(format!("truncated mass {truncated_mass} outside [0, 1)")));
        }
        Ok(Self { x_min, dx, values, truncated_mass })
    }

    /// Samples `f` on the grid and estimates the truncated mass from the tails.
    pub fn from_fn<F: Fn(f64) -> f64 + Sync + Send>(spec: GridSpec, f: F) -> Result<Self> {
        let values = par::map_range(spec.n, |i| f(spec.x(i)));
        let mut d = Self::new(spec.x_min, spec.dx, values, 0.0)?;
        d.truncated_mass = d.estimate_truncated_mass().min(1.0 - 1e-15);
        Ok(d)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { n: self.values.len(), x_min: self.x_min, dx: self.dx }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn mass(&self) -> f64 {
        self.dx * self.values.iter().sum::<f64>()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Checks nonnegativity and mass bookkeeping.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let min = self.min_value();
        if min < -tol.eps_neg {
            return Err(Error::Numeric(format!("density sample {min:.3e} below -{:.1e}", tol.eps_neg)));
        }
        let defect = (self.mass() - (1.0 - self.truncated_mass)).abs();
        if defect > tol.tol_norm {
            return Err(Error::Numeric(format!(
                "mass {:.12} inconsistent with truncated mass {:.3e}",
                self.mass(),
                self.truncated_mass
            )));
        }
        Ok(())
    }

    /// Power-law fits on the outer 5% of each side; `None` for a side that
    /// is negligible, light-tailed, or not a far tail.
    pub fn tail_fits(&self) -> (Option<TailFit>, Option<TailFit>) {
        let n = self.len();
        let w = (n / 20).max(4);
        let left: Vec<usize> = (0..w).collect();
        let right: Vec<usize> = (n - w..n).collect();
        (self.fit_side(&left), self.fit_side(&right))
    }

    fn fit_side(&self, idx: &[usize]) -> Option<TailFit> {
        let xs: Vec<f64> = idx.iter().map(|&i| self.x(i)).collect();
        let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), x| {
            (lo.min(x.abs()), hi.max(x.abs()))
        });
        let same_sign = xs.iter().all(|&x| x > 0.0) || xs.iter().all(|&x| x < 0.0);
        if !same_sign || hi > 2.0 * lo {
            return None;
        }
        let peak = self.max_value().max(f64::MIN_POSITIVE);
        let mut lx = Vec::with_capacity(idx.len());
        let mut ly = Vec::with_capacity(idx.len());
        for (&i, &x) in idx.iter().zip(&xs) {
            let v = self.values[i];
            if v > 1e-300 && v > 1e-13 * peak {
                lx.push(x.abs().ln());
                ly.push(v.ln());
            }
        }
        if 10 * lx.len() < 9 * idx.len() || lx.len() < 3 {
            return None;
        }
        let (slope, intercept, _) = linear_fit(&lx, &ly)?;
        let gamma = -slope;
        if !(gamma > 0.0) || gamma > LIGHT_TAIL {
            return None;
        }
        Some(TailFit { coeff: intercept.exp(), gamma, edge: hi })
    }

    /// Smallest fitted tail exponent, `None` when both tails are light.
    pub fn tail_index(&self) -> Option<f64> {
        match self.tail_fits() {
            (Some(l), Some(r)) => Some(l.gamma.min(r.gamma)),
            (Some(t), None) | (None, Some(t)) => Some(t.gamma),
            (None, None) => None,
        }
    }

    /// Mass outside the grid extrapolated from the tail fits.
    pub fn estimate_truncated_mass(&self) -> f64 {
        let (l, r) = self.tail_fits();
        let m = l.map_or(0.0, |t| t.mass_beyond()) + r.map_or(0.0, |t| t.mass_beyond());
        if m.is_finite() {
            m.max(0.0)
        } else {
            1.0 - 1e-15
        }
    }

    /// `dx sum x^n rho`, refusing orders the fitted tails cannot support.
    pub fn moment(&self, n: usize) -> Result<f64> {
        self.moment_checked(n).map(|m| m.0)
    }

    /// Moment plus a trust flag (false when the tail decays slower than
    /// `|x|^{-(n+2)}`).
    pub fn moment_checked(&self, n: usize) -> Result<(f64, bool)> {
        let gamma = self.tail_index();
        if let Some(g) = gamma {
            if n > 0 && g <= n as f64 + 1.0 {
                return Err(Error::DivergentMoment { order: n, tail_index: g });
            }
        }
        let trusted = gamma.map_or(true, |g| g >= n as f64 + 2.0);
        let v = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &r)| self.x(i).powi(n as i32) * r)
            .sum::<f64>()
            * self.dx;
        Ok((v, trusted))
    }

    /// Moments of orders `0..=n_max`, stopping at the first divergent order.
    pub fn moments(&self, n_max: usize) -> MomentVector {
        let mut values = Vec::with_capacity(n_max + 1);
        let mut finite_up_to = 0;
        for n in 0..=n_max {
            match self.moment_checked(n) {
                Ok((v, trusted)) => {
                    values.push(v);
                    if trusted {
                        finite_up_to = n;
                    }
                }
                Err(_) => break,
            }
        }
        MomentVector { values, finite_up_to }
    }

    pub fn variance(&self) -> Result<f64> {
        let m0 = self.moment(0)?;
        let m1 = self.moment(1)? / m0;
        Ok(self.moment(2)? / m0 - m1 * m1)
    }

    /// Linear interpolation of the samples; zero off the grid.
    pub fn eval(&self, x: f64) -> f64 {
        cubic_at(&self.values, (x - self.x_min) / self.dx)
    }
}

/// Moments `<x^n>` for `n = 0..values.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub values: Vec<f64>,
    /// Largest order whose value is trusted given the tail index.
    pub finite_up_to: usize,
}

impl MomentVector {
    /// Moments of a distribution with all moments finite.
    pub fn exact(values: Vec<f64>) -> Self {
        let finite_up_to = values.len().saturating_sub(1);
        Self { values, finite_up_to }
    }

    pub fn n_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn get(&self, n: usize) -> Option<f64> {
        self.values.get(n).copied()
    }

    pub fn variance(&self) -> Option<f64> {
        let m1 = self.get(1)?;
        Some(self.get(2)? - m1 * m1)
    }
}

/// Characteristic-function samples on `k_j = (j - n_k/2) dk`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFunction {
    pub k_max: f64,
    pub dk: f64,
    pub values: Vec<C64>,
    pub closed_form: Option<ClosedForm>,
}

impl SpectralFunction {
    pub fn new(k_max: f64, values: Vec<C64>, closed_form: Option<ClosedForm>) -> Result<Self> {
        let n_k = values.len();
        if !is_pow2(n_k) || n_k < 4 {
            return Err(Error::Window(format!("k-grid length {n_k} is not a power of two >= 4")));
        }
        if !(k_max > 0.0 && k_max.is_finite()) {
            return Err(Error::Window(format!("k_max = {k_max} must be positive")));
        }
        Ok(Self { k_max, dk: 2.0 * k_max / n_k as f64, values, closed_form })
    }

    /// Samples a closed form on the k-grid.
    pub fn from_closed_form(cf: ClosedForm, k_max: f64, n_k: usize) -> Result<Self> {
        let dk = 2.0 * k_max / n_k as f64;
        let half = n_k / 2;
        if !cf.is_hermitian() {
            let values = par::map_range(n_k, |j| cf.eval((j as f64 - half as f64) * dk));
            return Self::new(k_max, values, Some(cf));
        }
        // evaluate k >= 0 and mirror, which makes the samples exactly Hermitian
        let pos = par::map_range(half + 1, |j| cf.eval(j as f64 * dk));
        let mut values = vec![C64::new(0.0, 0.0); n_k];
        for j in 0..n_k {
            let m = j as isize - half as isize;
            values[j] = if m >= 0 { pos[m as usize] } else { pos[(-m) as usize].conj() };
        }
        Self::new(k_max, values, Some(cf))
    }

    pub fn n_k(&self) -> usize {
        self.values.len()
    }

    pub fn k(&self, j: usize) -> f64 {
        (j as f64 - (self.n_k() / 2) as f64) * self.dk
    }

    pub fn ks(&self) -> Vec<f64> {
        (0..self.n_k()).map(|j| self.k(j)).collect()
    }

    /// Value at the k = 0 node.
    pub fn at_zero(&self) -> C64 {
        self.values[self.n_k() / 2]
    }

    /// Closed form when present, otherwise interpolated samples; `None`
    /// outside the stored window.
    pub fn try_eval(&self, k: f64) -> Option<C64> {
        if let Some(cf) = &self.closed_form {
            return Some(cf.eval(k));
        }
        let t = (k + self.k_max) / self.dk;
        if t < 0.0 || t > (self.n_k() - 1) as f64 {
            return None;
        }
        Some(cubic_at(&self.values, t))
    }

    pub fn eval(&self, k: f64) -> C64 {
        self.try_eval(k).unwrap_or(C64::new(0.0, 0.0))
    }

    /// `max_j |v(-k_j) - conj v(k_j)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n_k();
        (1..n)
            .map(|j| (self.values[j] - self.values[n - j].conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Hermitian symmetry, `|v| <= 1` and normalization at the origin.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let defect = self.hermitian_defect();
        if defect > tol.tol_sym {
            return Err(Error::Symmetry { defect, tol: tol.tol_sym });
        }
        let m = self.max_modulus();
        if m > 1.0 + tol.tol_norm {
            return Err(Error::Numeric(format!("|cf| = {m} exceeds 1")));
        }
        Ok(())
    }

    /// Drops the closed form, keeping only the samples.
    pub fn without_closed_form(mut self) -> Self {
        self.closed_form = None;
        self
    }

    /// Same samples re-expressed on another window by evaluation.
    pub fn resample(&self, k_max: f64, n_k: usize) -> Result<Self> {
        let dk = 2.0 * k_max / n_k as f64;
        let half = n_k as f64 / 2.0;
        let mut bad = None;
        let values: Vec<C64> = (0..n_k)
            .map(|j| {
                let k = (j as f64 - half) * dk;
                self.try_eval(k).unwrap_or_else(|| {
                    bad = Some(k);
                    C64::new(0.0, 0.0)
                })
            })
            .collect();
        if let Some(k) = bad {
            return Err(Error::Window(format!("k = {k} outside stored window +-{}", self.k_max)));
        }
        Self::new(k_max, values, self.closed_form.clone())
    }
}

/// Quadrature approximation of `int rho(x) e^{+ikx} dx` on `n_k` points of
/// `[-k_max, k_max)`.
pub fn to_spectral(d: &GridDensity, k_max: f64, n_k: usize) -> Result<SpectralFunction> {
    to_spectral_with(d, k_max, n_k, &Tolerances::default())
}

pub fn to_spectral_with(
    d: &GridDensity,
    k_max: f64,
    n_k: usize,
    tol: &Tolerances,
) -> Result<SpectralFunction> {
    if !is_pow2(n_k) || n_k < 4 {
        return Err(Error::Window(format!("k-grid length {n_k} is not a power of two >= 4")));
    }
    if !(k_max > 0.0) {
        return Err(Error::Window(format!("k_max = {k_max} must be positive")));
    }
    if d.truncated_mass > tol.truncation_cap {
        return Err(Error::Truncation { mass: d.truncated_mass, cap: tol.truncation_cap });
    }
    let dk = 2.0 * k_max / n_k as f64;
    let values = forward_sum(&d.values, d.x_min, d.dx, dk, n_k);
    SpectralFunction::new(k_max, values, None)
}

/// `dx sum_i v_i e^{i k_j x_i}` on `k_j = (j - n_k/2) dk`.
fn forward_sum(v: &[f64], x_min: f64, dx: f64, dk: f64, n_k: usize) -> Vec<C64> {
    let n = v.len();
    let half = (n_k / 2) as isize;
    if let Some(m) = fft_length(dx, dk, n) {
        let mut buf = vec![C64::new(0.0, 0.0); m];
        for (b, &x) in buf.iter_mut().zip(v) {
            *b = C64::new(x, 0.0);
        }
        FftPlanner::<f64>::new().plan_fft_inverse(m).process(&mut buf);
        return (0..n_k)
            .map(|j| {
                let q = j as isize - half;
                let k = q as f64 * dk;
                buf[q.rem_euclid(m as isize) as usize] * C64::from_polar(dx, k * x_min)
            })
            .collect();
    }
    par::map_range(n_k, |j| {
        let k = (j as isize - half) as f64 * dk;
        phased_sum(v.iter().map(|&x| C64::new(x, 0.0)), k, x_min, dx) * dx
    })
}

/// `sum_i w_i e^{i k (x0 + i dx)}` with the phase rebuilt exactly every 64
/// terms to bound recurrence drift.
fn phased_sum<It: Iterator<Item = C64>>(w: It, k: f64, x0: f64, dx: f64) -> C64 {
    let step = C64::from_polar(1.0, k * dx);
    let mut acc = C64::new(0.0, 0.0);
    let mut ph = C64::new(1.0, 0.0);
    for (i, wi) in w.enumerate() {
        if i % 64 == 0 {
            ph = C64::from_polar(1.0, k * (x0 + i as f64 * dx));
        }
        acc += wi * ph;
        ph *= step;
    }
    acc
}

/// FFT length `m` with `dk dx = 2 pi / m`, if it is a power of two >= `n`.
fn fft_length(dx: f64, dk: f64, n: usize) -> Option<usize> {
    let m = 2.0 * PI / (dk * dx);
    let mr = m.round();
    if (m - mr).abs() > 1e-9 * m || mr < n as f64 || mr > (1u64 << 26) as f64 {
        return None;
    }
    let m = mr as usize;
    is_pow2(m).then_some(m)
}

/// Options for sampling a closed-form spectrum onto a position grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    /// Period of the discrete inversion in units of the output window.
    pub oversample: usize,
    /// Spectral magnitude treated as negligible when choosing the band limit.
    pub band_tol: f64,
    /// Cap on the FFT length.
    pub max_len: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self { oversample: 4, band_tol: 1e-16, max_len: 1 << 22 }
    }
}

/// Inverts a spectrum with the `e^{-ikx}/(2 pi)` kernel onto a position grid.
pub fn from_spectral(s: &SpectralFunction, spec: GridSpec) -> Result<GridDensity> {
    from_spectral_with(s, spec, &Tolerances::default(), &InversionOptions::default())
}

pub fn from_spectral_with(
    s: &SpectralFunction,
    spec: GridSpec,
    tol: &Tolerances,
    opts: &InversionOptions,
) -> Result<GridDensity> {
    let spec = GridSpec::new(spec.n, spec.x_min, spec.dx)?;
    let values = match &s.closed_form {
        Some(cf) => {
            if let Some(shift) = cf.delta_shift() {
                return Err(Error::DeltaLike { shift });
            }
            invert_closed_form(cf, spec, opts)
        }
        None => {
            let defect = s.hermitian_defect();
            if defect > tol.tol_sym {
                return Err(Error::Symmetry { defect, tol: tol.tol_sym });
            }
            invert_samples(s, spec)
        }
    };
    let mass = spec.dx * values.iter().sum::<f64>();
    let truncated = (1.0 - mass).clamp(0.0, 1.0 - 1e-15);
    GridDensity::new(spec.x_min, spec.dx, values, truncated)
}

/// Periodized trapezoid inversion of a closed form. The output samples are
/// `sum_m rho(x + m P)` with period `P = oversample * n * dx`, up to the
/// band-limit error at `q pi / dx`.
pub fn invert_closed_form(cf: &ClosedForm, spec: GridSpec, opts: &InversionOptions) -> Vec<f64> {
    invert_closed_form_periodic(cf, spec, opts).0
}

/// As [`invert_closed_form`], also returning the period of the images.
pub fn invert_closed_form_periodic(
    cf: &ClosedForm,
    spec: GridSpec,
    opts: &InversionOptions,
) -> (Vec<f64>, f64) {
    let n = spec.n;
    let r = opts.oversample.max(1).next_power_of_two();
    let mut q = 1usize;
    while r * q * n < opts.max_len {
        let kb = q as f64 * PI / spec.dx;
        let tail = [1.0, 0.75, 0.5]
            .iter()
            .map(|f| cf.eval(f * kb).norm())
            .fold(0.0, f64::max);
        if tail <= opts.band_tol {
            break;
        }
        q *= 2;
    }
    let m = (r * q * n).min(opts.max_len.max(n));
    let q = (m / (r * n)).max(1);
    let dxf = spec.dx / q as f64;
    let dk = 2.0 * PI / (m as f64 * dxf);
    let half = m / 2;
    let pos = par::map_range(half + 1, |j| {
        let k = j as f64 * dk;
        cf.eval(k) * C64::from_polar(1.0, -k * spec.x_min)
    });
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for j in 0..half {
        buf[j] = pos[j];
        if j > 0 {
            buf[m - j] = pos[j].conj();
        }
    }
    buf[half] = C64::new(pos[half].re, 0.0);
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    let scale = dk / (2.0 * PI);
    ((0..n).map(|i| buf[i * q].re * scale).collect(), m as f64 * dxf)
}

fn invert_samples(s: &SpectralFunction, spec: GridSpec) -> Vec<f64> {
    let n_k = s.n_k();
    let half = (n_k / 2) as isize;
    let scale = s.dk / (2.0 * PI);
    if let Some(m) = fft_length(spec.dx, s.dk, n_k.max(spec.n)) {
        let mut buf = vec![C64::new(0.0, 0.0); m];
        for (j, &v) in s.values.iter().enumerate() {
            let q = j as isize - half;
            let k = q as f64 * s.dk;
            buf[q.rem_euclid(m as isize) as usize] += v * C64::from_polar(1.0, -k * spec.x_min);
        }
        FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
        return (0..spec.n).map(|i| buf[i].re * scale).collect();
    }
    par::map_range(spec.n, |i| {
        let x = spec.x(i);
        let acc = phased_sum(s.values.iter().copied(), -x, -s.k_max, s.dk);
        acc.re * scale
    })
}

/// `dx sum |d1 - d2|` on identical grids.
pub fn l1_distance(d1: &GridDensity, d2: &GridDensity) -> Result<f64> {
    if !d1.spec().same_as(&d2.spec()) {
        return Err(Error::Grid(format!(
            "grids differ: ({}, {}, {}) vs ({}, {}, {})",
            d1.len(),
            d1.x_min,
            d1.dx,
            d2.len(),
            d2.x_min,
            d2.dx
        )));
    }
    Ok(d1.dx * d1.values.iter().zip(&d2.values).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `sup |s1 - s2|` over the grid points of `s1` with `k_lo <= |k| <= k_hi`.
pub fn cf_sup_distance(s1: &SpectralFunction, s2: &SpectralFunction, k_window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = k_window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Window(format!("window ({lo}, {hi}) must satisfy 0 < lo < hi")));
    }
    let mut worst: Option<f64> = None;
    for j in 0..s1.n_k() {
        let k = s1.k(j);
        if k.abs() < lo || k.abs() > hi {
            continue;
        }
        let v1 = s1.values[j];
        let v2 = s2
            .try_eval(k)
            .ok_or_else(|| Error::Window(format!("k = {k} outside the second spectrum's window")))?;
        let d = (v1 - v2).norm();
        worst = Some(worst.map_or(d, |w: f64| w.max(d)));
    }
    worst.ok_or_else(|| Error::Window(format!("no k-grid points with {lo} <= |k| <= {hi}")))
}

/// `sup |s(k) - cf(k)|` over grid points of `s` in the window.
pub fn cf_sup_distance_to(s: &SpectralFunction, cf: &ClosedForm, k_window: (f64, f64)) -> Result<f64> {
    let reference = SpectralFunction { k_max: s.k_max, dk: s.dk, values: Vec::new(), closed_form: Some(cf.clone()) };
    cf_sup_distance(s, &reference, k_window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable::StableParams;

    fn gaussian(spec: GridSpec) -> GridDensity {
        GridDensity::from_fn(spec, |x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt()).unwrap()
    }

    #[test]
    fn grid_rejects_bad_length() {
        assert!(matches!(GridSpec::new(1000, 0.0, 1.0), Err(Error::Grid(_))));
        assert!(GridSpec::symmetric(1024, 5.0).is_ok());
    }

    #[test]
    fn gaussian_spectrum_and_moments() {
        let d = gaussian(GridSpec::symmetric(1 << 12, 20.0).unwrap());
        assert_eq!(d.truncated_mass, 0.0);
        let s = to_spectral(&d, 8.0, 512).unwrap();
        for j in 0..s.n_k() {
            let k = s.k(j);
            assert!((s.values[j] - C64::new((-0.5 * k * k).exp(), 0.0)).norm() < 1e-12);
        }
        assert!(s.values.iter().all(|v| v.im.abs() < 1e-12));
        assert!((d.moment(2).unwrap() - 1.0).abs() < 1e-8);
        assert!((d.moment(4).unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn fft_and_direct_paths_agree() {
        let d = gaussian(GridSpec::symmetric(256, 10.0).unwrap());
        let (k_max, n_k) = d.spec().dual_k();
        let fast = to_spectral(&d, k_max, n_k).unwrap();
        let direct = forward_sum_direct(&d, k_max, n_k);
        for (a, b) in fast.values.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    fn forward_sum_direct(d: &GridDensity, k_max: f64, n_k: usize) -> Vec<C64> {
        let dk = 2.0 * k_max / n_k as f64;
        (0..n_k)
            .map(|j| {
                let k = (j as f64 - (n_k / 2) as f64) * dk;
                d.values
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| C64::from_polar(r * d.dx, k * d.x(i)))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn cauchy_moment_diverges() {
        let d = GridDensity::from_fn(GridSpec::symmetric(1 << 14, 200.0).unwrap(), |x| {
            1.0 / (PI * (1.0 + x * x))
        })
        .unwrap();
        let g = d.tail_index().unwrap();
        assert!((g - 2.0).abs() < 0.01, "{g}");
        assert!(matches!(d.moment(2), Err(Error::DivergentMoment { order: 2, .. })));
        // tail mass beyond |x| = 200 is 2 atan(1/200)/pi
        let exact = 2.0 * (1.0f64 / 200.0).atan() / PI;
        assert!((d.truncated_mass - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn inversion_of_closed_forms() {
        let spec = GridSpec::symmetric(1 << 12, 20.0).unwrap();
        let s = SpectralFunction::from_closed_form(ClosedForm::Gaussian { sigma: 1.0 }, 10.0, 64).unwrap();
        let d = from_spectral(&s, spec).unwrap();
        let err = (0..spec.n)
            .map(|i| (d.values[i] - (-0.5 * spec.x(i).powi(2)).exp() / (2.0 * PI).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        let one = SpectralFunction::from_closed_form(ClosedForm::One, 10.0, 64).unwrap();
        assert!(matches!(from_spectral(&one, spec), Err(Error::DeltaLike { shift }) if shift == 0.0));
        let shifted = ClosedForm::Stable(StableParams::new_unchecked(1.0, C64::new(0.0, 0.7)));
        let s = SpectralFunction::from_closed_form(shifted, 10.0, 64).unwrap();
        assert!(matches!(from_spectral(&s, spec), Err(Error::DeltaLike { shift }) if (shift - 0.7).abs() < 1e-15));
    }

    #[test]
    fn non_hermitian_samples_rejected() {
        let mut s = SpectralFunction::from_closed_form(ClosedForm::Gaussian { sigma: 1.0 }, 10.0, 64)
            .unwrap()
            .without_closed_form();
        s.values[40] += C64::new(0.0, 1e-3);
        let spec = GridSpec::symmetric(64, 5.0).unwrap();
        assert!(matches!(from_spectral(&s, spec), Err(Error::Symmetry { .. })));
    }

    #[test]
    fn distances() {
        let spec = GridSpec::symmetric(1024, 4.0).unwrap();
        let a = GridDensity::from_fn(spec, |x| if (-2.0..-1.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        let b = GridDensity::from_fn(spec, |x| if (1.0..2.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(l1_distance(&a, &a).unwrap(), 0.0);
        assert!((l1_distance(&a, &b).unwrap() - 2.0).abs() < 1e-12);
        let other = gaussian(GridSpec::symmetric(512, 4.0).unwrap());
        assert!(matches!(l1_distance(&a, &other), Err(Error::Grid(_))));

        let c = SpectralFunction::from_closed_form(ClosedForm::Cauchy { scale: 1.0 }, 8.0, 1024).unwrap();
        let one = SpectralFunction::from_closed_form(ClosedForm::One, 8.0, 1024).unwrap();
        // |1 - e^{-|k|}| grows with |k|, so the sup sits at the outer edge
        let d = cf_sup_distance(&c, &one, (0.5, 5.0)).unwrap();
        assert!((d - (1.0 - (-5.0f64).exp())).abs() < 1e-12);
        assert!(matches!(cf_sup_distance(&c, &one, (0.501, 0.502)), Err(Error::Window(_))));
    }
}
