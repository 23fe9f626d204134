//! Complex elementary helpers that keep relative accuracy near zero, and a
//! complex gamma function.

use num_complex::Complex64;
use std::f64::consts::PI;

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `ln(1 + z)` accurate for small `|z|`.
pub fn ln_1p(z: C64) -> C64 {
    if z.norm() < 0.5 {
        let s = 2.0 * z.re + z.re * z.re + z.im * z.im;
        C64::new(0.5 * s.ln_1p(), z.im.atan2(1.0 + z.re))
    } else {
        (C64::new(1.0, 0.0) + z).ln()
    }
}

/// `exp(z) - 1` accurate for small `|z|`.
pub fn exp_m1(z: C64) -> C64 {
    let half = (0.5 * z.im).sin();
    C64::new(
        z.re.exp_m1() * z.im.cos() - 2.0 * half * half,
        z.re.exp() * z.im.sin(),
    )
}

/// `|k|^p` with the sign of `k` ignored; zero at the origin for `Re p > 0`.
pub fn abs_pow(k: f64, p: C64) -> C64 {
    let ak = k.abs();
    if ak == 0.0 {
        return if p.re > 0.0 { C64::new(0.0, 0.0) } else { C64::new(1.0, 0.0) };
    }
    if p.im == 0.0 {
        return C64::new(ak.powf(p.re), 0.0);
    }
    (p * ak.ln()).exp()
}

/// Real gamma function.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Complex gamma function (Lanczos, g = 7), about 1e-13 relative accuracy.
pub fn gamma_complex(z: C64) -> C64 {
    if z.im == 0.0 && z.re > 0.0 {
        return C64::new(gamma(z.re), 0.0);
    }
    if z.re < 0.5 {
        // reflection
        let s = (z * PI).sin();
        return C64::new(PI, 0.0) / (s * gamma_complex(C64::new(1.0, 0.0) - z));
    }
    let z = z - 1.0;
    let mut acc = C64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_1p_small_argument() {
        let z = C64::new(1e-12, -3e-13);
        let w = ln_1p(z);
        assert!((w - z).norm() < 1e-24);
    }

    #[test]
    fn exp_m1_inverts_ln_1p() {
        for &z in &[C64::new(1e-9, 2e-9), C64::new(0.3, -0.2), C64::new(-2.0, 4.0)] {
            let back = exp_m1(ln_1p(z));
            assert!((back - z).norm() <= 1e-14 * z.norm().max(1e-300) + 1e-16 * z.norm());
        }
    }

    #[test]
    fn complex_gamma_matches_real_and_known_values() {
        for &x in &[0.3, 1.0, 2.5, 7.2] {
            let g = gamma_complex(C64::new(x, 1e-300));
            assert!((g.re - gamma(x)).abs() < 1e-12 * gamma(x));
        }
        // |Gamma(1/2 + i y)|^2 = pi / cosh(pi y)
        let y = 1.3;
        let g = gamma_complex(C64::new(0.5, y));
        assert!((g.norm_sqr() - PI / (PI * y).cosh()).abs() < 1e-12);
    }
}
