//! Special functions used by the severity algebra and the interval code.
//!
//! Log-gamma and the regularized incomplete gamma/beta functions come from
//! `statrs`; this module adds the pieces it does not provide: the
//! growing-exponential incomplete integral needed by the capped Gamma MGF
//! beyond the uncapped domain, and a bracketed monotone root finder.

use statrs::function::{beta, gamma};

pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Regularized lower incomplete gamma P(a, x) = γ(a, x) / Γ(a).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma::gamma_lr(a, x)
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma::gamma_ur(a, x)
}

/// Regularized incomplete beta I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    beta::beta_reg(a, b, x)
}

/// Natural log of `∫₀^u x^(a-1) e^(c x) dx` for `a > 0`, `u > 0`.
///
/// Uses the expansion `u^a Σ (cu)^n / (n! (n+a))`. For `c >= 0` every term is
/// positive and the sum runs outward from its largest term so nothing
/// overflows. Negative `c` is accepted only while `|c u| <= 1`, where the
/// alternating series has no harmful cancellation.
pub fn ln_growth_integral(a: f64, c: f64, u: f64) -> f64 {
    debug_assert!(a > 0.0 && u > 0.0);
    let ln_u = u.ln();
    let cu = c * u;
    if cu == 0.0 {
        return a * ln_u - a.ln();
    }
    if cu < 0.0 {
        debug_assert!(cu >= -1.0);
        let mut sum = 1.0 / a;
        let mut pow = 1.0;
        let mut n = 0.0;
        loop {
            n += 1.0;
            pow *= cu / n;
            let term = pow / (n + a);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return a * ln_u + sum.ln();
    }

    let ln_cu = cu.ln();
    let peak = cu.floor();
    let ln_peak = peak * ln_cu - ln_gamma(peak + 1.0) - (peak + a).ln();

    // ratio t_n / t_{n-1} = cu/n * (n-1+a)/(n+a)
    let mut sum = 1.0;
    let mut rel = 1.0;
    let mut n = peak;
    loop {
        n += 1.0;
        rel *= cu / n * (n - 1.0 + a) / (n + a);
        sum += rel;
        if rel < 1e-18 * sum {
            break;
        }
    }
    let mut rel = 1.0;
    let mut n = peak;
    while n >= 1.0 {
        rel /= cu / n * (n - 1.0 + a) / (n + a);
        sum += rel;
        if rel < 1e-18 * sum {
            break;
        }
        n -= 1.0;
    }
    a * ln_u + ln_peak + sum.ln()
}

/// Find `x` in `[lo, hi]` with `f(x) ≈ target` for a non-decreasing `f`.
///
/// Returns the smallest bracket point satisfying `f(x) >= target` once the
/// bracket is narrower than `x_tol` (relative to its magnitude) or the
/// function value is within `f_tol` of the target.
pub fn bisect_nondecreasing<F>(f: F, target: f64, mut lo: f64, mut hi: f64, f_tol: f64, x_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if (fm - target).abs() <= f_tol && fm >= target {
            return mid;
        }
        if fm >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= x_tol * hi.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    hi
}
