//! Gauss-Legendre nodes and the composite three-point Lobatto rule.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| half * wi).collect(),
    )
}

/// Three-point Lobatto (Simpson) weights on a unit step: left end,
/// midpoint, right end.
pub const SIMPSON_WEIGHTS: [f64; 3] = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];

/// Weights of the composite three-point Lobatto (Simpson) rule over `steps`
/// uniform steps of width `h`.
///
/// Node `2s` is the grid point `t_s` and node `2s + 1` the midpoint of step
/// `s + 1`, giving `2·steps + 1` nodes. Per step the weights are
/// `h·(1/6, 2/3, 1/6)`, so interior grid points carry `h/3`.
pub fn composite_lobatto_weights(steps: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; 2 * steps + 1];
    for s in 0..steps {
        for (j, sw) in SIMPSON_WEIGHTS.iter().enumerate() {
            w[2 * s + j] += h * sw;
        }
    }
    w
}

/// `∫_a^b f` by the composite three-point Lobatto rule.
pub fn composite_lobatto(f: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
    let h = (b - a) / steps as f64;
    composite_lobatto_weights(steps, h)
        .iter()
        .enumerate()
        .map(|(i, w)| w * f(a + 0.5 * h * i as f64))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 64] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..(2 * n).min(40) {
                let q: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(xi, wi)| wi * xi.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn gauss_legendre_two_point_nodes() {
        let (x, w) = gauss_legendre(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] + r).abs() < 1e-15 && (x[1] - r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_large_order() {
        let (x, w) = gauss_legendre_on(400, 0.0, 3.0);
        let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * (5.0 * xi).cos()).sum();
        assert!((q - (15f64).sin() / 5.0).abs() < 1e-13);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn lobatto_exact_through_cubics() {
        let cases: [(fn(f64) -> f64, f64); 4] = [
            (|_| 1.0, 3.0),
            (|t| t, 4.5),
            (|t| t * t, 9.0),
            (|t| 2.0 * t * t * t - t + 0.5, 40.5 - 4.5 + 1.5),
        ];
        for (f, exact) in cases {
            for steps in [1, 3, 10] {
                assert!((composite_lobatto(f, 0.0, 3.0, steps) - exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn lobatto_weights_layout() {
        let w = composite_lobatto_weights(3, 0.6);
        assert_eq!(w.len(), 7);
        assert!((w[0] - 0.1).abs() < 1e-15);
        assert!((w[2] - 0.2).abs() < 1e-15);
        assert!((w[1] - 0.4).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.8).abs() < 1e-14);
    }
}
