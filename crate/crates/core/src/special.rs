//! Integer-order Bessel functions and generalized Laguerre polynomials.
//!
//! `J_n` uses its power series for small arguments and the periodic integral
//! `J_n(x) = (1/2π) ∫ cos(nτ − x sin τ) dτ` otherwise; the trapezoid rule is
//! spectrally accurate for that integrand once the node count exceeds
//! `x + n`. `K_n` uses `K_n(x) = ∫₀^∞ exp(−x cosh t) cosh(nt) dt` with a
//! fixed-step trapezoid rule, which converges like `exp(−π²/h)`.

use crate::Scalar;

const SERIES_CUTOFF: f64 = 8.0;
const K_STEP: f64 = 0.2;

/// Bessel function of the first kind, integer order.
pub fn bessel_j<T: Scalar>(order: i32, x: T) -> T {
    let n = order.unsigned_abs();
    // J_{-n} = (-1)^n J_n and J_n(-x) = (-1)^n J_n(x)
    let mut sign = if order < 0 && n % 2 == 1 { -T::one() } else { T::one() };
    if x < T::zero() && n % 2 == 1 {
        sign = -sign;
    }
    let ax = x.abs();
    let v = if ax <= T::lit(SERIES_CUTOFF) {
        j_series(n, ax)
    } else {
        j_trapezoid(n, ax)
    };
    sign * v
}

fn j_series<T: Scalar>(n: u32, x: T) -> T {
    let half = x / T::lit(2.0);
    let mut term = T::one();
    for k in 1..=n {
        term = term * half / T::from_u32(k).unwrap();
    }
    if term == T::zero() {
        return T::zero();
    }
    let q = -(half * half);
    let mut sum = term;
    for k in 1..200u32 {
        term = term * q / (T::from_u32(k).unwrap() * T::from_u32(k + n).unwrap());
        sum += term;
        if term.abs() <= T::epsilon() * sum.abs() * T::lit(0.25) {
            break;
        }
    }
    sum
}

fn j_trapezoid<T: Scalar>(n: u32, x: T) -> T {
    let nodes = 2 * (x.ceil().to_usize().unwrap_or(0) + n as usize) + 64;
    let step = T::TAU() / T::from_usize_lossy(nodes);
    let nf = T::from_u32(n).unwrap();
    let sum: T = (0..nodes)
        .map(|j| {
            let tau = step * T::from_usize_lossy(j);
            (nf * tau - x * tau.sin()).cos()
        })
        .sum();
    sum / T::from_usize_lossy(nodes)
}

/// Exponentially scaled modified Bessel function of the second kind,
/// `exp(x)·K_n(x)`, for `x > 0`.
pub fn bessel_k_scaled<T: Scalar>(order: i32, x: T) -> T {
    assert!(x > T::zero(), "K_n requires a positive argument");
    let nu = T::from_u32(order.unsigned_abs()).unwrap();
    let h = T::lit(K_STEP);
    let mut sum = T::lit(0.5);
    let tiny = T::epsilon() * T::lit(1e-3);
    for j in 1..100_000u32 {
        let t = h * T::from_u32(j).unwrap();
        let term = (-x * (t.cosh() - T::one())).exp() * (nu * t).cosh();
        sum += term;
        if term <= tiny * sum {
            break;
        }
    }
    sum * h
}

/// Modified Bessel function of the second kind, integer order, `x > 0`.
pub fn bessel_k<T: Scalar>(order: i32, x: T) -> T {
    bessel_k_scaled(order, x) * (-x).exp()
}

/// Generalized Laguerre polynomial `L_p^α(x)` by three-term recurrence.
pub fn laguerre<T: Scalar>(p: u32, alpha: T, x: T) -> T {
    let mut prev = T::one();
    if p == 0 {
        return prev;
    }
    let mut cur = T::one() + alpha - x;
    for k in 1..p {
        let kf = T::from_u32(k).unwrap();
        let next = ((T::lit(2.0) * kf + T::one() + alpha - x) * cur - (kf + alpha) * prev)
            / (kf + T::one());
        prev = cur;
        cur = next;
    }
    cur
}

/// `n!` as a scalar.
pub(crate) fn factorial<T: Scalar>(n: u32) -> T {
    (1..=n).fold(T::one(), |acc, k| acc * T::from_u32(k).unwrap())
}
