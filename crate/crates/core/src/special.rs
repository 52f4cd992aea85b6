//! Bessel function of the first kind, order one.

use std::f64::consts::PI;

// The alternating series loses digits to cancellation above about 3.
const SERIES_LIMIT: f64 = 3.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// J₁(x) for real `x`.
///
/// Power series below 3, Miller backward recurrence on [3, 25), Hankel
/// asymptotic expansion beyond. Absolute error stays near 1e-16 on |x| ≤ 1e3.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let value = if ax < SERIES_LIMIT {
        series(ax)
    } else if ax < ASYMPTOTIC_LIMIT {
        miller(ax)
    } else {
        hankel(ax)
    };
    if x < 0.0 {
        -value
    } else {
        value
    }
}

/// 2 J₁(x) / x, continuous through x = 0 where it equals 1.
pub fn jinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let q = x * x / 4.0;
        1.0 - q / 2.0 + q * q / 12.0
    } else {
        2.0 * bessel_j1(x) / x
    }
}

fn series(x: f64) -> f64 {
    let half = x / 2.0;
    let q = -half * half;
    let mut term = half;
    let mut sum = term;
    for k in 1..60 {
        term *= q / (k as f64 * (k + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn miller(x: f64) -> f64 {
    // Unnormalized J_k from k = start down to 0, normalized by
    // J_0 + 2 Σ J_{2k} = 1.
    let start = 2 * ((x as usize + 40) / 2);
    let two_over_x = 2.0 / x;
    let mut next = 0.0;
    let mut cur = 1e-30;
    let mut norm = 2.0 * cur;
    let mut j1 = 0.0;
    for k in (1..=start).rev() {
        let prev = k as f64 * two_over_x * cur - next;
        next = cur;
        cur = prev;
        let order = k - 1;
        if order == 1 {
            j1 = cur;
        }
        norm += match order {
            0 => cur,
            o if o % 2 == 0 => 2.0 * cur,
            _ => 0.0,
        };
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    j1 / norm
}

fn hankel(x: f64) -> f64 {
    let mu = 4.0;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        nodes.push(x);
        weights.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}
