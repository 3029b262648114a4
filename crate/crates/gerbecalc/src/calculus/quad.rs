//! Gauss-Legendre quadrature on [0, 1].
//!
//! Nodes are roots of the Legendre polynomial P_n, found by Newton iteration
//! from the Chebyshev initial guess; weights are 2 / ((1 - x^2) P'_n(x)^2).
//! A degree-n rule integrates polynomials of degree 2n - 1 exactly, and
//! converges superexponentially on the analytic integrands used here.

/// Legendre P_n and its derivative at `x` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
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
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [0, 1].
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 - x) / 2.0, w / 2.0)); // map to [0, 1]
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_monomials_exactly() {
        let rule = gauss_legendre_unit(8);
        for p in 0..=15u32 {
            let s: f64 = rule.iter().map(|(x, w)| w * x.powi(p as i32)).sum();
            let exact = 1.0 / (p as f64 + 1.0);
            assert!((s - exact).abs() < 1e-13, "x^{p}: {s} vs {exact}");
        }
    }

    #[test]
    fn full_period_sine_vanishes() {
        let rule = gauss_legendre_unit(16);
        let s: f64 = rule
            .iter()
            .map(|(x, w)| w * (2.0 * std::f64::consts::PI * x).sin())
            .sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn weights_sum_to_one() {
        for n in [1, 2, 4, 16, 32] {
            let s: f64 = gauss_legendre_unit(n).iter().map(|(_, w)| w).sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }
}
