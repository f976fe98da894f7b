//! Gauss-Legendre quadrature, used to integrate order-statistic tails that
//! are polynomials between knots.

use std::sync::OnceLock;

const MAX_POINTS: usize = 64;

/// Nodes and weights on `[-1, 1]` for `n` points, computed by Newton
/// iteration on the Legendre recurrence.
fn rule(n: usize) -> &'static (Vec<f64>, Vec<f64>) {
    static RULES: OnceLock<Vec<(Vec<f64>, Vec<f64>)>> = OnceLock::new();
    let rules = RULES.get_or_init(|| (0..=MAX_POINTS).map(compute_rule).collect());
    &rules[n.clamp(1, MAX_POINTS)]
}

fn compute_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `∫_a^b f` with an `points`-point rule; exact for polynomials of degree
/// below `2 * points`.
pub(crate) fn integrate(a: f64, b: f64, points: usize, f: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (nodes, weights) = rule(points);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut sum = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_polynomials() {
        for n in 1..12usize {
            for deg in 0..2 * n {
                let got = integrate(0.0, 2.0, n, |x| x.powi(deg as i32));
                let want = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-12 * want.max(1.0), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in 1..=MAX_POINTS {
            let s: f64 = rule(n).1.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}");
        }
    }
}
