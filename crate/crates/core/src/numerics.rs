//! FFT convolution, lattice interpolation and small regression helpers.

use crate::special::C64;
use rustfft::FftPlanner;
use std::ops::{Add, Mul};

/// Linear convolution `c[m] = sum_j a[j] b[m - j]`, length `a.len() + b.len() - 1`,
/// computed with zero padding to a power of two (no circular wrap-around).
pub fn fft_convolve(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa = vec![C64::new(0.0, 0.0); n];
    let mut fb = vec![C64::new(0.0, 0.0); n];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa.truncate(out_len);
    for x in fa.iter_mut() {
        *x *= scale;
    }
    fa
}

/// Real-input convenience wrapper around [`fft_convolve`].
pub fn fft_convolve_real(a: &[f64], b: &[f64]) -> Vec<f64> {
    let ca: Vec<C64> = a.iter().map(|&x| C64::new(x, 0.0)).collect();
    let cb: Vec<C64> = b.iter().map(|&x| C64::new(x, 0.0)).collect();
    fft_convolve(&ca, &cb).into_iter().map(|z| z.re).collect()
}

/// Direct O(N*M) convolution; reference for small grids.
pub fn direct_convolve<T>(a: &[T], b: &[T]) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Mul<Output = T>,
{
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::default(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = out[i + j] + x * y;
        }
    }
    out
}

/// Four-point Lagrange interpolation of lattice samples at fractional index
/// `t`. Returns zero outside `[0, len - 1]`; near the ends the stencil is
/// shifted inwards.
pub fn cubic_at<T>(values: &[T], t: f64) -> T
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = values.len();
    if n == 0 || !t.is_finite() || t < 0.0 || t > (n - 1) as f64 {
        return T::default();
    }
    if n < 4 {
        let i = (t.floor() as usize).min(n.saturating_sub(2));
        if n == 1 {
            return values[0];
        }
        let f = t - i as f64;
        return values[i] * (1.0 - f) + values[i + 1] * f;
    }
    let base = (t.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let u = t - base as f64;
    // nodes at 0,1,2,3
    let w0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    let w1 = u * (u - 2.0) * (u - 3.0) / 2.0;
    let w2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
    let w3 = u * (u - 1.0) * (u - 2.0) / 6.0;
    values[base] * w0 + values[base + 1] * w1 + values[base + 2] * w2 + values[base + 3] * w3
}

/// Ordinary least squares `y = intercept + slope * x`; returns
/// `(slope, intercept, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Some((slope, intercept, rms))
}

/// `true` when `n` is a nonzero power of two.
pub fn is_pow2(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// Log-spaced points between `lo` and `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fft_matches_direct_convolution() {
        let a: Vec<f64> = (0..37).map(|i| ((i * 7 % 11) as f64).sin()).collect();
        let b: Vec<f64> = (0..20).map(|i| (i as f64 * 0.3).cos()).collect();
        let f = fft_convolve_real(&a, &b);
        let d = direct_convolve(&a, &b);
        assert_eq!(f.len(), d.len());
        for (x, y) in f.iter().zip(&d) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_is_exact_on_cubics() {
        let v: Vec<f64> = (0..10).map(|i| {
            let x = i as f64;
            x * x * x - 2.0 * x + 1.0
        }).collect();
        for &t in &[0.0, 0.3, 4.5, 8.99, 9.0] {
            let exact = t * t * t - 2.0 * t + 1.0;
            assert!((cubic_at(&v, t) - exact).abs() < 1e-10);
        }
        assert_eq!(cubic_at(&v, -0.1), 0.0);
        assert_eq!(cubic_at(&v, 9.1), 0.0);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let (s, i, r) = linear_fit(&x, &y).unwrap();
        assert!((s + 0.5).abs() < 1e-14 && (i - 3.0).abs() < 1e-14 && r < 1e-14);
    }
}
