//! Exact integer evaluation of the c-dependent step bounds, where
//! c = 1/log2(phi) and phi is the golden ratio.
//!
//! Every ceiling the schedule and the active windows need reduces to
//! comparisons of the form 2^A >= phi^B. Since phi^B = (L_B + F_B*sqrt5)/2
//! with Fibonacci/Lucas numbers, those compare exactly in integers:
//! 2^(A+1) - L_B >= F_B*sqrt5  <=>  lhs >= 0 and lhs^2 >= 5*F_B^2
//! (sqrt5 is irrational, so ties cannot occur for B >= 1). Floating point
//! seeds the search; the exact comparison settles the boundary.

use num_bigint::BigUint;
use std::cell::RefCell;

/// c = 1/log2((sqrt(5)+1)/2), for display and estimator output only.
pub const C_APPROX: f64 = 1.440420090412556_f64;

thread_local! {
    static FIBS: RefCell<Vec<BigUint>> = RefCell::new(vec![BigUint::from(0u32), BigUint::from(1u32)]);
}

fn fib_big(i: usize) -> BigUint {
    FIBS.with(|f| {
        let mut f = f.borrow_mut();
        while f.len() <= i + 1 {
            let next = &f[f.len() - 1] + &f[f.len() - 2];
            f.push(next);
        }
        f[i].clone()
    })
}

/// Exact test of 2^a >= phi^b for a >= 0, b >= 0.
pub fn pow2_ge_phi_pow(a: u64, b: u64) -> bool {
    if b == 0 {
        return true; // phi^0 = 1 <= 2^a
    }
    let b = b as usize;
    let fb = fib_big(b);
    let fb1 = fib_big(b - 1);
    // Lucas: L_b = F_{b-1} + F_{b+1} = 2*F_{b-1} + F_b.
    let lucas = (&fb1 << 1) + &fb;
    let two_a1 = BigUint::from(1u32) << (a + 1);
    if two_a1 <= lucas {
        return false;
    }
    let lhs = two_a1 - lucas;
    &lhs * &lhs >= BigUint::from(5u32) * &fb * &fb
}

/// ceil(c * n): smallest m with m >= c*n, i.e. m*log2(phi) >= n,
/// i.e. phi^m >= 2^n, i.e. not (2^n > phi^m) -- evaluated exactly as the
/// smallest m with 2^n <= phi^m.
pub fn ceil_c_times(n: u32) -> u32 {
    if n == 0 {
        return 0;
    }
    let mut m = (C_APPROX * n as f64).ceil() as u64;
    m = m.saturating_sub(2);
    // phi^m >= 2^n <=> !(2^n - eps ...): use pow2_ge_phi_pow(n, m) which
    // tests 2^n >= phi^m; we need the reverse with equality impossible.
    while pow2_ge_phi_pow(n as u64, m) {
        // 2^n >= phi^m means m too small (phi^m <= 2^n => m*log2phi <= n => m <= c*n).
        m += 1;
    }
    // Now phi^m > 2^n, so m > c*n; check m-1 <= c*n held (loop invariant).
    m as u32
}

/// ceil(T / (4c)) = ceil(T * log2(phi) / 4) for T >= 1: smallest m with
/// 4m >= T*log2(phi), i.e. 2^(4m) >= phi^T.
pub fn ceil_t_over_4c(t: u32) -> u32 {
    if t == 0 {
        return 0;
    }
    let mut m = ((t as f64) / (4.0 * C_APPROX)).ceil() as u64;
    m = m.saturating_sub(2);
    while !pow2_ge_phi_pow(4 * m, t as u64) {
        m += 1;
    }
    m as u32
}

/// ceil(j / (4c - r)) for r in {1, 3, 4} and any integer j.
/// For j <= 0 the result is <= 0 and callers clamp with max{.., 1}; we
/// return 0 in that case. For j >= 1: smallest m >= 1 with m(4c - r) >= j,
/// i.e. 4mc >= j + mr, i.e. 4m >= (j + mr) log2(phi),
/// i.e. 2^(4m) >= phi^(j + mr).
pub fn ceil_div_4c_minus(j: i64, r: u32) -> i64 {
    if j <= 0 {
        return 0;
    }
    let denom = 4.0 * C_APPROX - r as f64;
    let mut m = ((j as f64) / denom).ceil() as u64;
    m = m.saturating_sub(2);
    if m == 0 {
        m = 1;
    }
    loop {
        let b = j as u64 + m * r as u64;
        if pow2_ge_phi_pow(4 * m, b) {
            // m satisfies; check minimality by walking down.
            while m > 1 {
                let b = j as u64 + (m - 1) * r as u64;
                if pow2_ge_phi_pow(4 * (m - 1), b) {
                    m -= 1;
                } else {
                    break;
                }
            }
            return m as i64;
        }
        m += 1;
    }
}

/// c2 = 2/log2(1 + sqrt 2): the step-growth constant of sustained
/// quotient-2 runs (the silver ratio), which is the true worst case the
/// golden-ratio bounds miss. Used for the synthesized window lower bounds.
pub const C2_APPROX: f64 = 1.5728794027147899_f64;

thread_local! {
    static PELLS: RefCell<Vec<(BigUint, BigUint)>> =
        RefCell::new(vec![(BigUint::from(0u32), BigUint::from(1u32))]);
}

/// Pell pair (P_b, Q_b) with (1+sqrt2)^b = Q_b + P_b*sqrt2,
/// P_0 = 0, Q_0 = 1, and (P, Q) -> (P + Q, 2P + Q).
fn pell(b: usize) -> (BigUint, BigUint) {
    PELLS.with(|f| {
        let mut f = f.borrow_mut();
        while f.len() <= b {
            let (p, q) = f[f.len() - 1].clone();
            f.push((&p + &q, (&p << 1) + &q));
        }
        f[b].clone()
    })
}

/// Exact test of 2^a >= (1 + sqrt 2)^b.
pub fn pow2_ge_silver_pow(a: u64, b: u64) -> bool {
    if b == 0 {
        return true;
    }
    let (p, q) = pell(b as usize);
    let two_a = BigUint::from(1u32) << a;
    if two_a < q {
        return false;
    }
    let lhs = two_a - q;
    // lhs >= P*sqrt2  <=>  lhs^2 >= 2 P^2 (sqrt2 irrational, no ties).
    &lhs * &lhs >= (&p * &p) << 1
}

/// ceil(T / (4 c2)) = smallest m with 8m >= T log2(1+sqrt2),
/// i.e. 2^(8m) >= (1+sqrt2)^T.
pub fn ceil_t_over_4c2(t: u32) -> u32 {
    if t == 0 {
        return 0;
    }
    let mut m = ((t as f64) / (4.0 * C2_APPROX)).ceil() as u64;
    m = m.saturating_sub(2);
    while !pow2_ge_silver_pow(8 * m, t as u64) {
        m += 1;
    }
    m as u32
}

/// ceil(j / (4 c2 - r)): smallest m >= 1 with m(4 c2 - r) >= j, i.e.
/// 2^(8m) >= (1+sqrt2)^(j + mr). Returns 0 for j <= 0.
pub fn ceil_div_4c2_minus(j: i64, r: u32) -> i64 {
    if j <= 0 {
        return 0;
    }
    let denom = 4.0 * C2_APPROX - r as f64;
    let mut m = ((j as f64) / denom).ceil() as u64;
    m = m.saturating_sub(2);
    if m == 0 {
        m = 1;
    }
    loop {
        let b = j as u64 + m * r as u64;
        if pow2_ge_silver_pow(8 * m, b) {
            while m > 1 {
                let b = j as u64 + (m - 1) * r as u64;
                if pow2_ge_silver_pow(8 * (m - 1), b) {
                    m -= 1;
                } else {
                    break;
                }
            }
            return m as i64;
        }
        m += 1;
    }
}
