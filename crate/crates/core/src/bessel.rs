//! Logarithm of the modified Bessel function of the first kind, `ln I_ν(x)`.
//!
//! Three regimes are stitched together so the result stays finite far past
//! where `I_ν(x)` itself overflows:
//!
//! * ascending power series, for moderate `x` (`x < 600`) unless the large-
//!   argument expansion applies;
//! * Hankel large-argument expansion, for `x >= max(30, ν²)`;
//! * Debye uniform expansion in `ν`, for what remains (`x >= 600`, `ν > 24`).

use std::f64::consts::PI;
use std::sync::OnceLock;

const SERIES_LIMIT: f64 = 600.0;
const HANKEL_MIN_X: f64 = 30.0;
const DEBYE_TERMS: usize = 10;

/// `ln I_ν(x)` for `ν >= 0` and `x > 0`. Returns `-inf` at `x == 0` for
/// `ν > 0` and `0` for `ν == 0`; `NaN` for invalid inputs.
pub fn log_bessel_i(order: f64, x: f64) -> f64 {
    if !(order >= 0.0) || !(x >= 0.0) || !order.is_finite() {
        return f64::NAN;
    }
    if x == 0.0 {
        return if order == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    if x >= HANKEL_MIN_X.max(order * order) {
        log_hankel(order, x)
    } else if x < SERIES_LIMIT {
        log_series(order, x)
    } else {
        log_debye(order, x)
    }
}

/// `ln Γ(ν + 1)`, exact products for the integer and half-integer orders that
/// vMF densities need.
fn ln_gamma_order_plus_one(order: f64) -> f64 {
    let twice = order * 2.0;
    if twice == twice.round() && twice < 1e7 {
        let n = twice as u64;
        if n % 2 == 0 {
            (2..=n / 2).map(|j| (j as f64).ln()).sum()
        } else {
            // Γ(3/2) = √π / 2, then Γ(k + 3/2) = (k + 1/2) Γ(k + 1/2)
            let base = 0.5 * PI.ln() - std::f64::consts::LN_2;
            base + (1..=n / 2).map(|j| (j as f64 + 0.5).ln()).sum::<f64>()
        }
    } else {
        statrs::function::gamma::ln_gamma(order + 1.0)
    }
}

fn log_series(order: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 0.0f64;
    for _ in 0..20_000 {
        k += 1.0;
        term *= q / (k * (k + order));
        sum += term;
        if term < 1e-17 * sum && k * (k + order) > q {
            break;
        }
    }
    order * (0.5 * x).ln() - ln_gamma_order_plus_one(order) + sum.ln()
}

fn log_hankel(order: f64, x: f64) -> f64 {
    let mu = 4.0 * order * order;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (8.0 * k as f64 * x);
        let mag = term.abs();
        // asymptotic: stop at the smallest term
        if mag > prev {
            break;
        }
        sum += term;
        if mag <= 1e-17 * sum.abs() {
            break;
        }
        prev = mag;
    }
    x - 0.5 * (2.0 * PI * x).ln() + sum.ln()
}

/// Coefficients of the Debye polynomials `u_k(t)`, `k = 0..DEBYE_TERMS`,
/// built from `u_{k+1} = t²(1−t²)u_k'/2 + (1/8)∫₀ᵗ (1−5s²) u_k(s) ds`.
fn debye_polynomials() -> &'static [Vec<f64>] {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![1.0]];
        for k in 0..DEBYE_TERMS {
            let u = &polys[k];
            let mut next = vec![0.0; u.len() + 3];
            for (j, &c) in u.iter().enumerate().skip(1) {
                // derivative term: j c t^{j-1} * (t² - t⁴) / 2
                next[j + 1] += 0.5 * j as f64 * c;
                next[j + 3] -= 0.5 * j as f64 * c;
            }
            for (j, &c) in u.iter().enumerate() {
                next[j + 1] += c / (8.0 * (j + 1) as f64);
                next[j + 3] -= 5.0 * c / (8.0 * (j + 3) as f64);
            }
            polys.push(next);
        }
        polys
    })
}

fn log_debye(order: f64, x: f64) -> f64 {
    let z = x / order;
    let root = (1.0 + z * z).sqrt();
    let t = 1.0 / root;
    let eta = root + (z / (1.0 + root)).ln();
    let mut sum = 0.0;
    let mut scale = 1.0;
    for poly in debye_polynomials() {
        let value = poly.iter().rev().fold(0.0, |acc, &c| acc * t + c);
        sum += value * scale;
        scale /= order;
    }
    order * eta - 0.5 * (2.0 * PI * order).ln() - 0.5 * root.ln() + sum.ln()
}
