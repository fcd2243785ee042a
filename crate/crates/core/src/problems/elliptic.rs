//! Jacobi elliptic functions by the descending Landen (AGM) recursion.
//!
//! The second argument is the parameter `m = k^2`.

use std::f64::consts::FRAC_PI_2;

struct Agm {
    a: Vec<f64>,
    c: Vec<f64>,
}

fn agm(m: f64) -> Agm {
    let mut a = vec![1.0];
    let mut b = (1.0 - m).sqrt();
    let mut c = vec![m.sqrt()];
    while c.last().copied().unwrap_or(0.0).abs() > f64::EPSILON && a.len() < 64 {
        let an = a[a.len() - 1];
        a.push(0.5 * (an + b));
        c.push(0.5 * (an - b));
        b = (an * b).sqrt();
    }
    Agm { a, c }
}

/// Complete elliptic integral of the first kind `K(m)`, `0 <= m < 1`.
pub fn complete_k(m: f64) -> f64 {
    let g = agm(m);
    FRAC_PI_2 / g.a[g.a.len() - 1]
}

/// `(sn, cn, dn)` of `u` with parameter `m`, `0 <= m < 1`.
pub fn jacobi_sn_cn_dn(u: f64, m: f64) -> (f64, f64, f64) {
    assert!((0.0..1.0).contains(&m), "parameter must lie in [0, 1)");
    if m == 0.0 {
        return (u.sin(), u.cos(), 1.0);
    }
    let g = agm(m);
    let n = g.a.len() - 1;
    // Reduce to one period so the amplified phase stays small.
    let period = 4.0 * FRAC_PI_2 / g.a[n];
    let u = u - period * (u / period).round();

    let mut phi = (1u64 << n) as f64 * g.a[n] * u;
    for k in (1..=n).rev() {
        phi = 0.5 * (phi + (g.c[k] * phi.sin() / g.a[k]).asin());
    }
    let (sn, cn) = phi.sin_cos();
    // dn > 0 for m < 1; this form avoids the 0/0 of cos φ0 / cos(φ1 - φ0) at odd multiples of K.
    (sn, cn, (1.0 - m * sn * sn).sqrt())
}
