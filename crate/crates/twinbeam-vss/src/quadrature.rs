//! Gregory end-corrected trapezoid rule.
//!
//! The oracle integrates smooth but non-periodic integrands over a truncated
//! interval; plain trapezoid is only second order there, so the end points get
//! finite-difference corrections.

/// Magnitudes of the Gregory coefficients |G_2|, |G_3|, ... (1/12, 1/24, 19/720, ...).
pub fn gregory_coefficients(order: usize) -> Vec<f64> {
    // x / ln(1 + x) = Σ G_n x^n, G_0 = 1
    let mut g = vec![1.0f64];
    for n in 1..=order + 1 {
        let mut s = 0.0;
        for m in 1..=n {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            s -= sign / (m as f64 + 1.0) * g[n - m];
        }
        g.push(s);
    }
    g[2..].iter().map(|x| x.abs()).collect()
}

/// Weights for `n` equally spaced nodes with spacing `h`. The correction order
/// is clipped to what the node count supports.
pub fn gregory_weights(n: usize, h: f64, order: usize) -> Vec<f64> {
    match n {
        0 => return Vec::new(),
        1 => return vec![0.0],
        _ => {}
    }
    let mut w = crate::grid::trapezoid_weights(n, h);
    let p = order.min(n - 1);
    let c = gregory_coefficients(p);
    for k in 1..=p {
        let ck = c[k - 1];
        // backward difference ∇^k f at the right end and forward Δ^k f at the left
        for j in 0..=k {
            let binom = binomial(k, j);
            let alt = if j % 2 == 0 { 1.0 } else { -1.0 };
            // ∇^k f_{n-1} = Σ_j (-1)^j C(k,j) f_{n-1-j}
            w[n - 1 - j] -= h * ck * alt * binom;
            // (-1)^k Δ^k f_0 = Σ_j (-1)^k (-1)^{k-j} C(k,j) f_j = Σ_j (-1)^j C(k,j) f_j
            w[j] -= h * ck * alt * binom;
        }
    }
    w
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
