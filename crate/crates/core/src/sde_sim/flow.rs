//! Closed form of the deterministic cubic flow `y' = a y - b y^3`.
//!
//! With `u = y^{-2}` the equation becomes linear, `u' = -2a u + 2b`, so
//!
//! ```text
//! y(t) = x / sqrt( e^{-2at} + (b/a) x^2 (1 - e^{-2at}) )
//! ```
//!
//! which is valid for every real `x` (including 0) and all `t >= 0`.

use crate::error::{domain, Result};
use crate::scalar::Scalar;

/// Relative margin added to entry times so the strict inequality holds.
pub const ENTRY_TIME_MARGIN: f64 = 0.01;

pub fn equilibrium<T: Scalar>(a: T, b: T) -> T {
    (a / b).sqrt()
}

/// Exact solution of `y' = a y - b y^3`, `y(0) = x`, at time `t`.
pub fn exact_cubic_flow<T: Scalar>(x: T, t: T, a: T, b: T) -> T {
    let s = equilibrium(a, b);
    if x == T::zero() || x == s || x == -s || t == T::zero() {
        return x;
    }
    let k = b / a;
    let decay = (-(a + a) * t).exp();
    let grown = -(-(a + a) * t).exp_m1();
    if x.abs() > T::one() {
        x.signum() / (decay / (x * x) + k * grown).sqrt()
    } else {
        x / (decay + k * x * x * grown).sqrt()
    }
}

/// Time at which the flow started at `x` reaches `y`, if it ever does.
/// `y` must lie on the same side of zero as `x`, between `x` and the
/// equilibrium of that basin.
pub fn flow_time_to_reach<T: Scalar>(x: T, y: T, a: T, b: T) -> Option<T> {
    if x == y {
        return Some(T::zero());
    }
    if x == T::zero() || y == T::zero() || x.signum() != y.signum() {
        return None;
    }
    let s = equilibrium(a, b) * x.signum();
    let between = if x.abs() < s.abs() {
        y.abs() > x.abs() && y.abs() < s.abs()
    } else {
        y.abs() < x.abs() && y.abs() > s.abs()
    };
    if !between {
        return None;
    }
    let k = b / a;
    let kx2 = k * x * x;
    let e = (x * x / (y * y) - kx2) / (T::one() - kx2);
    if !(e > T::zero() && e <= T::one()) {
        return None;
    }
    Some(-e.ln() / (a + a))
}

/// Smallest time after which the flow from every point of `[x_lo, x_hi]`
/// stays within `eps` of the basin equilibrium `z`, inflated by
/// [`ENTRY_TIME_MARGIN`]. The flow is monotone in its initial condition, so
/// only the endpoints matter.
pub fn flow_entry_time<T: Scalar>(x_lo: T, x_hi: T, z: T, eps: T, a: T, b: T) -> Result<T> {
    if !(eps > T::zero()) {
        return domain("entry radius must be positive");
    }
    if !(a > T::zero() && b > T::zero()) {
        return domain("flow coefficients must be positive");
    }
    if !(x_lo <= x_hi) {
        return domain(format!("empty interval [{x_lo}, {x_hi}]"));
    }
    if x_lo <= T::zero() && x_hi >= T::zero() {
        return domain(format!("interval [{x_lo}, {x_hi}] contains the unstable equilibrium 0"));
    }
    let s = equilibrium(a, b) * x_lo.signum();
    if (z - s).abs() > T::lit(1e-9) * s.abs() {
        return domain(format!("target {z} is not the equilibrium {s} of the interval's basin"));
    }
    let mut worst = T::zero();
    for x in [x_lo, x_hi] {
        if (x - s).abs() < eps {
            continue;
        }
        let target = s + eps * (x - s).signum();
        let t = flow_time_to_reach(x, target, a, b)
            .ok_or_else(|| crate::error::Error::Domain(format!("flow from {x} never reaches {target}")))?;
        worst = worst.max(t);
    }
    Ok(worst * (T::one() + T::lit(ENTRY_TIME_MARGIN)))
}
