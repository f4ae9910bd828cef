//! Gauss–Legendre rules.

use std::f64::consts::PI;

/// Nodes and weights of the `k`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Roots of `P_k` are found by Newton iteration from the Chebyshev-like
/// initial guesses `cos(π(i − ¼)/(k + ½))`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1, "quadrature needs at least one point");
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let kf = k as f64;
    for i in 0..k.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_k(x) and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=k {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            let pk = if k == 1 { x } else { p1 };
            let pkm1 = if k == 1 { 1.0 } else { p0 };
            dp = kf * (x * pk - pkm1) / (x * x - 1.0);
            let dx = pk / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[k - 1 - i] = x;
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    if k % 2 == 1 {
        nodes[k / 2] = 0.0;
    }
    (nodes, weights)
}

/// The `k`-point rule mapped to `[0, 1]`; weights sum to one.
pub fn gauss_legendre_unit(k: usize) -> (Vec<f64>, Vec<f64>) {
    let (nodes, weights) = gauss_legendre(k);
    (
        nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights.iter().map(|w| 0.5 * w).collect(),
    )
}
