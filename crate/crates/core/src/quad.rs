//! Fixed-order Gauss-Legendre panel quadrature.

use crate::special::C64;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Shared 20-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(20))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = 0.5 * (b - a);
        let m = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(m + h * x))
            .sum::<f64>()
            * h
    }

    pub fn integrate_c<F: FnMut(f64) -> C64>(&self, a: f64, b: f64, mut f: F) -> C64 {
        let h = 0.5 * (b - a);
        let m = 0.5 * (b + a);
        let mut acc = C64::new(0.0, 0.0);
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += f(m + h * x) * w;
        }
        acc * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integrates over `[a, b]` using `panels` equal panels.
pub fn panels<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    let rule = GaussLegendre::standard();
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| rule.integrate(a + i as f64 * h, a + (i + 1) as f64 * h, &mut f))
        .sum()
}

/// Complex-valued version of [`panels`].
pub fn panels_c<F: FnMut(f64) -> C64>(a: f64, b: f64, panels: usize, mut f: F) -> C64 {
    let rule = GaussLegendre::standard();
    let h = (b - a) / panels as f64;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..panels {
        acc += rule.integrate_c(a + i as f64 * h, a + (i + 1) as f64 * h, &mut f);
    }
    acc
}

/// Integrates over `[a, b]` with panels graded geometrically towards `a`,
/// which resolves integrable algebraic singularities at the left endpoint.
pub fn graded_c<F: FnMut(f64) -> C64>(a: f64, b: f64, levels: usize, mut f: F) -> C64 {
    let rule = GaussLegendre::standard();
    let mut acc = C64::new(0.0, 0.0);
    let mut hi = b;
    for _ in 0..levels {
        let lo = a + 0.5 * (hi - a);
        acc += rule.integrate_c(lo, hi, &mut f);
        hi = lo;
    }
    acc + rule.integrate_c(a, hi, &mut f)
}

/// Real version of [`graded_c`].
pub fn graded<F: FnMut(f64) -> f64>(a: f64, b: f64, levels: usize, mut f: F) -> f64 {
    graded_c(a, b, levels, |x| C64::new(f(x), 0.0)).re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(10);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(19));
        assert!((v - 2f64.powi(20) / 20.0).abs() < 1e-9);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn graded_handles_sqrt_singularity() {
        let v = graded(0.0, 1.0, 90, |x| 1.0 / x.sqrt());
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }
}
