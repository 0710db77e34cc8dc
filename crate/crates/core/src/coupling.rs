//! Feedback coupling for the Poisson-driven cubic model.
//!
//! Three processes share one Poisson clock: `X^x` and `X^y` solve the model
//! equation, while the auxiliary process
//!
//! ```text
//! dX~ = (a X~ - b X~^3) dt + lambda (X^x - X~) dt + sigma(X~_-) dN_t,   X~_0 = y
//! ```
//!
//! is pulled towards `X^x`. With `Z = X^x - X~` and `Z~ = X~ - X^y` the
//! defect `|E f(X^x_t) - E f(X^y_t)|` is bounded by `L_f (E|Z_t| + E|Z~_t|)`,
//! and both moments admit closed-form bounds evaluated here.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;
use crate::sde_sim::poisson::{draw_jump_times, PoissonCubicModel};
use crate::sde_sim::rng::PathRng;
use crate::stats::Moments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CouplingParams<T> {
    /// Feedback gain.
    pub lambda: T,
}

impl<T: Scalar> CouplingParams<T> {
    /// Rejects gains at or below [`lambda_threshold`], where the bounds are
    /// vacuous.
    pub fn admissible(lambda: T, model: &PoissonCubicModel<T>) -> Result<Self> {
        let thr = lambda_threshold(model.a, model.lip_sigma);
        if !(lambda > thr) {
            return Err(Error::Precondition(format!(
                "feedback gain lambda = {lambda} must exceed (a + L_sigma) + L_sigma^2 / 2 = {thr}"
            )));
        }
        Ok(Self { lambda })
    }
}

/// `(a + L) + L^2 / 2`.
pub fn lambda_threshold<T: Scalar>(a: T, lip_sigma: T) -> T {
    a + lip_sigma + lip_sigma * lip_sigma / T::lit(2.0)
}

/// Growth exponent `2a - 2 lambda + 2L + L^2`; negative iff lambda is admissible.
pub fn decay_exponent<T: Scalar>(lambda: T, a: T, lip_sigma: T) -> T {
    let two = T::lit(2.0);
    two * a - two * lambda + two * lip_sigma + lip_sigma * lip_sigma
}

/// `E|Z_t|^2 <= |x - y|^2 exp((2a - 2 lambda + 2L + L^2) t)`.
///
/// For `lambda <= lambda_threshold` the exponent is nonnegative and the
/// value, though still returned, is not a decay bound.
pub fn z_squared_bound<T: Scalar>(x: T, y: T, lambda: T, a: T, lip_sigma: T, t: T) -> T {
    let d = x - y;
    if d == T::zero() {
        return T::zero();
    }
    d * d * (decay_exponent(lambda, a, lip_sigma) * t).exp()
}

/// Unique real root `p > 0` of `(a - lambda) p - b p^3 + c = 0`,
/// `c = (a + L + L^2/2) sqrt(a / (2b))`, by bisection.
pub fn stable_equilibrium_p<T: Scalar>(a: T, b: T, lambda: T, lip_sigma: T) -> Result<T> {
    if !(lambda > a) {
        return Err(Error::Precondition(format!(
            "need lambda > a for a unique stable equilibrium (lambda = {lambda}, a = {a})"
        )));
    }
    if !(b > T::zero()) {
        return domain("b must be positive");
    }
    let c = lambda_threshold(a, lip_sigma) * (a / (T::lit(2.0) * b)).sqrt();
    let g = |p: T| (a - lambda) * p - b * p * p * p + c;
    let mut lo = T::zero();
    let mut hi = c / (lambda - a) + T::one();
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid == lo || mid == hi || hi - lo <= T::lit(1e-15) {
            break;
        }
        if g(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

/// Closed-form bound on `E|Z~_t|`:
///
/// ```text
/// 2 lambda |x-y| (1 - e^{kappa t / 2}) / (-kappa) + 2 M t e^{-b q^2 t}
/// ```
///
/// with `kappa = 2a - 2 lambda + 2L + L^2` and `q = min(p, sqrt(a/b))`.
/// Only proven for `x >= sqrt(a/(2b))` and `y >= sqrt(a/b)`; other
/// arguments are rejected.
#[allow(clippy::too_many_arguments)]
pub fn ztilde_bound<T: Scalar>(x: T, y: T, lambda: T, a: T, b: T, lip_sigma: T, big_m: T, t: T) -> Result<T> {
    let thr = lambda_threshold(a, lip_sigma);
    if !(lambda > thr) {
        return Err(Error::Precondition(format!(
            "lambda = {lambda} must exceed (a + L_sigma) + L_sigma^2 / 2 = {thr}"
        )));
    }
    let x_min = (a / (T::lit(2.0) * b)).sqrt();
    let y_min = (a / b).sqrt();
    if x < x_min {
        return domain(format!("bound requires x >= sqrt(a/(2b)) = {x_min}, got x = {x}"));
    }
    if y < y_min {
        return domain(format!("bound requires y >= sqrt(a/b) = {y_min}, got y = {y}"));
    }
    if t < T::zero() {
        return domain("time must be nonnegative");
    }
    let q = q_value(a, b, lambda, lip_sigma)?;
    let kappa = decay_exponent(lambda, a, lip_sigma);
    let two = T::lit(2.0);
    let first = two * lambda * (x - y).abs() * (-(kappa * t / two).exp_m1()) / (-kappa);
    let second = two * big_m * t * (-(b * q * q * t)).exp();
    Ok(first + second)
}

/// `q = min(p, sqrt(a/b))`.
pub fn q_value<T: Scalar>(a: T, b: T, lambda: T, lip_sigma: T) -> Result<T> {
    Ok(stable_equilibrium_p(a, b, lambda, lip_sigma)?.min((a / b).sqrt()))
}

/// `L_f (E|Z| + E|Z~|)`.
pub fn defect_upper_bound<T: Scalar>(lip_f: T, e_abs_z: T, e_abs_ztilde: T) -> Result<T> {
    if lip_f < T::zero() || e_abs_z < T::zero() || e_abs_ztilde < T::zero() {
        return domain("defect bound inputs must be nonnegative");
    }
    Ok(lip_f * (e_abs_z + e_abs_ztilde))
}

/// One coupled realisation observed at the record times.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath<T> {
    pub times: Vec<T>,
    /// `X^x`.
    pub from_x: Vec<T>,
    /// The auxiliary process `X~^y`.
    pub auxiliary: Vec<T>,
    /// `X^y`.
    pub from_y: Vec<T>,
    /// Shared by all three processes.
    pub jump_times: Vec<T>,
}

/// Segment of an exactly solvable component: value right after the last
/// jump and the time of that jump.
#[derive(Clone, Copy)]
struct Segment<T> {
    start: T,
    t0: T,
}

impl<T: Scalar> Segment<T> {
    fn at(&self, model: &PoissonCubicModel<T>, t: T) -> T {
        model.flow(self.start, t - self.t0)
    }
}

/// Simulates the coupled triple with the jump clock of stream
/// `(master_seed, path_index)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_feedback_coupling<T: Scalar>(
    model: &PoissonCubicModel<T>,
    x: T,
    y: T,
    params: CouplingParams<T>,
    record_times: &[T],
    ode_tolerance: T,
    master_seed: u64,
    path_index: u64,
) -> Result<CoupledPath<T>> {
    let horizon = record_times.last().copied().unwrap_or(T::zero());
    let mut rng = PathRng::new(master_seed, path_index);
    let jumps: Vec<T> = draw_jump_times(&mut rng, horizon);
    coupled_path_with_jumps(model, x, y, params, record_times, &jumps, ode_tolerance)
}

/// Deterministic core of [`simulate_feedback_coupling`] for given jump times.
pub fn coupled_path_with_jumps<T: Scalar>(
    model: &PoissonCubicModel<T>,
    x: T,
    y: T,
    params: CouplingParams<T>,
    record_times: &[T],
    jump_times: &[T],
    ode_tolerance: T,
) -> Result<CoupledPath<T>> {
    if record_times.windows(2).any(|w| !(w[1] > w[0])) || record_times.first().is_some_and(|t| *t < T::zero()) {
        return domain("record times must be nonnegative and strictly increasing");
    }
    let identical = x == y;
    let mut sx = Segment { start: x, t0: T::zero() };
    let mut sy = Segment { start: y, t0: T::zero() };
    let mut aux = y;
    let mut t_aux = T::zero();
    let mut jumps = jump_times.iter().copied().peekable();
    let n = record_times.len();
    let (mut from_x, mut auxiliary, mut from_y) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));

    let advance_aux = |aux: T, t_from: T, t_to: T, sx: Segment<T>| -> Result<T> {
        if identical {
            Ok(sx.at(model, t_to))
        } else {
            integrate_feedback(model, params.lambda, sx, aux, t_from, t_to, ode_tolerance)
        }
    };

    for &r in record_times {
        while let Some(tau) = jumps.peek().copied() {
            if tau > r {
                break;
            }
            let aux_minus = advance_aux(aux, t_aux, tau, sx)?;
            let x_minus = sx.at(model, tau);
            let y_minus = sy.at(model, tau);
            sx = Segment { start: model.jump(x_minus), t0: tau };
            sy = Segment { start: model.jump(y_minus), t0: tau };
            aux = if identical { sx.start } else { model.jump(aux_minus) };
            t_aux = tau;
            jumps.next();
        }
        aux = advance_aux(aux, t_aux, r, sx)?;
        t_aux = r;
        from_x.push(sx.at(model, r));
        auxiliary.push(aux);
        from_y.push(sy.at(model, r));
    }
    Ok(CoupledPath {
        times: record_times.to_vec(),
        from_x,
        auxiliary,
        from_y,
        jump_times: jump_times.iter().copied().take_while(|t| Some(t) <= record_times.last()).collect(),
    })
}

/// Adaptive classical RK4 with step doubling for the auxiliary ODE between
/// jumps. `X^x` enters through its exact flow.
fn integrate_feedback<T: Scalar>(
    model: &PoissonCubicModel<T>,
    lambda: T,
    driver: Segment<T>,
    y0: T,
    t_from: T,
    t_to: T,
    tol: T,
) -> Result<T> {
    let span = t_to - t_from;
    if span <= T::zero() {
        return Ok(y0);
    }
    let (a, b) = (model.a, model.b);
    let rhs = |t: T, y: T| a * y - b * y * y * y + lambda * (driver.at(model, t) - y);
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let rk4 = |t: T, y: T, h: T| {
        let k1 = rhs(t, y);
        let k2 = rhs(t + half * h, y + half * h * k1);
        let k3 = rhs(t + half * h, y + half * h * k2);
        let k4 = rhs(t + h, y + h * k3);
        y + h * sixth * (k1 + T::lit(2.0) * (k2 + k3) + k4)
    };
    let min_step = T::lit(1e-12) * span.max(T::one());
    let mut t = t_from;
    let mut y = y0;
    let mut h = span.min(T::lit(0.05));
    while t < t_to {
        h = h.min(t_to - t);
        let coarse = rk4(t, y, h);
        let mid = rk4(t, y, half * h);
        let fine = rk4(t + half * h, mid, half * h);
        let err = (fine - coarse).abs() / T::lit(15.0);
        let scale = tol * (T::one() + fine.abs());
        if err <= scale && fine.is_finite() {
            y = fine + (fine - coarse) / T::lit(15.0);
            t = if t_to - t <= h { t_to } else { t + h };
            let grow = if err > T::zero() {
                T::lit(0.9) * (scale / err).powf(T::lit(0.2))
            } else {
                T::lit(4.0)
            };
            h = h * grow.min(T::lit(4.0));
        } else {
            let shrink = if err.is_finite() && err > T::zero() {
                T::lit(0.9) * (scale / err).powf(T::lit(0.2))
            } else {
                T::lit(0.1)
            };
            h = h * shrink.max(T::lit(0.1));
            if h < min_step {
                return Err(Error::OdeTolerance {
                    t: t.to_f64_lossy(),
                    step: h.to_f64_lossy(),
                    error: err.to_f64_lossy(),
                    tolerance: tol.to_f64_lossy(),
                });
            }
        }
    }
    Ok(y)
}

/// Constants entering the closed-form bounds.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConstants {
    pub lambda: f64,
    pub lambda_threshold: f64,
    pub exponent: f64,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub x: f64,
    pub y: f64,
    /// Whether `(x, y)` lies where the `E|Z~|` bound is proven.
    pub ztilde_regime: bool,
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub t: f64,
    pub e_z2: f64,
    pub se_z2: f64,
    pub bound_z2: f64,
    pub e_abs_z: f64,
    pub se_abs_z: f64,
    pub e_ztilde: f64,
    pub se_ztilde: f64,
    /// `None` outside the proven regime.
    pub bound_ztilde: Option<f64>,
}

/// Empirical coupling moments next to their closed-form bounds.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingDiagnostics {
    pub constants: CouplingConstants,
    pub n_paths: usize,
    pub master_seed: u64,
    pub rows: Vec<CouplingRow>,
}

impl CouplingDiagnostics {
    /// Jensen: `E|Z|^2 >= (E|Z|)^2` for every row.
    pub fn jensen_holds(&self) -> bool {
        self.rows.iter().all(|r| r.e_z2 + 1e-15 >= r.e_abs_z * r.e_abs_z * (1.0 - 1e-12))
    }

    /// Table `t,e_z2,se_z2,bound_z2,e_ztilde,se_ztilde,bound_ztilde`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "e_z2", "se_z2", "bound_z2", "e_ztilde", "se_ztilde", "bound_ztilde"])?;
        for r in &self.rows {
            wtr.write_record(
                [r.t, r.e_z2, r.se_z2, r.bound_z2, r.e_ztilde, r.se_ztilde, r.bound_ztilde.unwrap_or(f64::NAN)].map(|v| {
                    if v.is_finite() {
                        format!("{v:.16e}")
                    } else {
                        format!("{v}")
                    }
                }),
            )?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs `n` coupled paths and aggregates `E|Z_t|^2` and `E|Z~_t|` on the
/// time grid. The bounds are compared on the same coupled paths.
#[allow(clippy::too_many_arguments)]
pub fn coupling_diagnostics(
    model: &PoissonCubicModel<f64>,
    x: f64,
    y: f64,
    params: CouplingParams<f64>,
    times: &[f64],
    n: usize,
    ode_tolerance: f64,
    master_seed: u64,
) -> Result<CouplingDiagnostics> {
    if n == 0 || times.is_empty() {
        return domain("need at least one path and one time");
    }
    let paths = (0..n as u64)
        .into_par_iter()
        .map(|i| simulate_feedback_coupling(model, x, y, params, times, ode_tolerance, master_seed, i))
        .collect::<Result<Vec<_>>>()?;

    let (a, b, l, big_m) = (model.a, model.b, model.lip_sigma, model.big_m);
    let lambda = params.lambda;
    let in_regime = x >= (a / (2.0 * b)).sqrt() && y >= (a / b).sqrt();
    let admissible = lambda > lambda_threshold(a, l);
    let p = if lambda > a { stable_equilibrium_p(a, b, lambda, l).ok() } else { None };
    let constants = CouplingConstants {
        lambda,
        lambda_threshold: lambda_threshold(a, l),
        exponent: decay_exponent(lambda, a, l),
        p,
        q: p.map(|p| p.min((a / b).sqrt())),
        x,
        y,
        ztilde_regime: in_regime && admissible,
    };
    let rows = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let z: Vec<f64> = paths.iter().map(|p| p.from_x[k] - p.auxiliary[k]).collect();
            let zt: Vec<f64> = paths.iter().map(|p| (p.auxiliary[k] - p.from_y[k]).abs()).collect();
            let z2 = Moments::from_slice(&z.iter().map(|v| v * v).collect::<Vec<_>>());
            let za = Moments::from_slice(&z.iter().map(|v| v.abs()).collect::<Vec<_>>());
            let ztm = Moments::from_slice(&zt);
            CouplingRow {
                t,
                e_z2: z2.mean(),
                se_z2: z2.std_error(),
                bound_z2: z_squared_bound(x, y, lambda, a, l, t),
                e_abs_z: za.mean(),
                se_abs_z: za.std_error(),
                e_ztilde: ztm.mean(),
                se_ztilde: ztm.std_error(),
                bound_ztilde: if constants.ztilde_regime {
                    ztilde_bound(x, y, lambda, a, b, l, big_m, t).ok()
                } else {
                    None
                },
            }
        })
        .collect();
    Ok(CouplingDiagnostics {
        constants,
        n_paths: n,
        master_seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_sim::poisson::SigmaSpec;
    use approx::assert_abs_diff_eq;

    fn model() -> PoissonCubicModel<f64> {
        PoissonCubicModel::new(1.0, 1.0, SigmaSpec::Sinusoidal { c0: 1.0, c1: 0.25 }, 0.75, 1.25, 0.25).unwrap()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(lambda_threshold(1.0, 0.0), 1.0);
        assert_eq!(lambda_threshold(1.0, 0.25), 1.28125);
        assert_eq!(lambda_threshold(1.0, 0.5), 1.625);
    }

    #[test]
    fn z_squared_examples() {
        assert_eq!(z_squared_bound(1.3, 1.3, 2.0, 1.0, 0.25, 5.0), 0.0);
        assert_eq!(z_squared_bound(2.0, 1.0, 2.0, 1.0, 0.25, 0.0), 1.0);
        assert_abs_diff_eq!(z_squared_bound(2.0, 1.0, 2.0, 1.0, 0.25, 2.0), (-2.875f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(z_squared_bound(2.0, 1.0, 2.0, 1.0, 0.25, 2.0), 0.05642, epsilon = 1e-5);
    }

    #[test]
    fn p_root() {
        let p: f64 = stable_equilibrium_p(1.0, 1.0, 2.0, 0.25).unwrap();
        let c = 1.28125 * 0.5f64.sqrt();
        assert!((-p - p.powi(3) + c).abs() < 1e-10);
        assert_abs_diff_eq!(p, 0.6416, epsilon = 1e-3);
        let p3 = stable_equilibrium_p(1.0, 1.0, 3.0, 0.25).unwrap();
        let p4 = stable_equilibrium_p(1.0, 1.0, 4.0, 0.25).unwrap();
        assert!(p > p3 && p3 > p4);
        assert!(stable_equilibrium_p(1.0, 1.0, 1.0, 0.25).is_err());
    }

    #[test]
    fn ztilde_examples() {
        assert_eq!(ztilde_bound(1.0, 1.0, 2.0, 1.0, 1.0, 0.25, 1.25, 0.0).unwrap(), 0.0);
        assert!(ztilde_bound(1.0, 1.0, 2.0, 1.0, 1.0, 0.25, 1.25, 1e3).unwrap() < 1e-100);
        // Term-by-term re-derivation at |x - y| = 0.5, t = 1.
        let p: f64 = stable_equilibrium_p(1.0, 1.0, 2.0, 0.25).unwrap();
        let q = p.min(1.0);
        let first = 2.0 * 2.0 * 0.5 * (1.0 - (-0.71875f64).exp()) / 1.4375;
        let second = 2.0 * 1.25 * 1.0 * (-q * q).exp();
        let got = ztilde_bound(1.5, 1.0, 2.0, 1.0, 1.0, 0.25, 1.25, 1.0).unwrap();
        assert_abs_diff_eq!(got, first + second, epsilon = 1e-12);
        assert_abs_diff_eq!(second, 1.655, epsilon = 2e-3);
    }

    #[test]
    fn ztilde_regime_is_enforced() {
        let e = ztilde_bound(0.5, 1.0, 2.0, 1.0, 1.0, 0.25, 1.25, 1.0).unwrap_err().to_string();
        assert!(e.contains("sqrt(a/(2b))"), "{e}");
        let e = ztilde_bound(1.0, 0.9, 2.0, 1.0, 1.0, 0.25, 1.25, 1.0).unwrap_err().to_string();
        assert!(e.contains("sqrt(a/b)"), "{e}");
        assert!(matches!(
            ztilde_bound(1.0, 1.0, 1.2, 1.0, 1.0, 0.25, 1.25, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn defect_bound_examples() {
        assert_eq!(defect_upper_bound(0.0, 0.3, 0.2).unwrap(), 0.0);
        assert_eq!(defect_upper_bound(2.0, 0.0, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(defect_upper_bound(2.0, 0.1, 0.05).unwrap(), 0.3, epsilon = 1e-15);
        assert!(defect_upper_bound(-1.0, 0.1, 0.1).is_err());
    }

    #[test]
    fn identical_starts_never_separate() {
        let m = model();
        let params = CouplingParams { lambda: 2.0 };
        let p = simulate_feedback_coupling(&m, 1.3, 1.3, params, &[0.5, 1.0, 3.0], 1e-9, 4, 0).unwrap();
        for k in 0..3 {
            assert_eq!(p.from_x[k], p.auxiliary[k]);
            assert_eq!(p.from_x[k], p.from_y[k]);
        }
    }

    #[test]
    fn zero_jump_path_matches_exact_flow() {
        let m = model();
        let params = CouplingParams { lambda: 2.0 };
        let p = coupled_path_with_jumps(&m, 1.5, 1.0, params, &[0.5, 2.0], &[], 1e-10).unwrap();
        assert_eq!(p.from_x[1], m.flow(1.5, 2.0));
        assert_eq!(p.from_y[1], 1.0);
        // Auxiliary is squeezed between the two exact flows.
        assert!(p.auxiliary[1] > 1.0 && p.auxiliary[1] < p.from_x[1]);
    }

    #[test]
    fn auxiliary_ode_matches_fine_reference() {
        // Independent fixed-step RK4 with a very small step on the same ODE.
        let m = model();
        let (x, y, lambda, t_end) = (2.0, 1.0, 3.0, 1.5);
        let f = |t: f64, v: f64| v - v.powi(3) + lambda * (m.flow(x, t) - v);
        let n = 200_000;
        let h = t_end / n as f64;
        let mut v = y;
        for i in 0..n {
            let t = i as f64 * h;
            let k1 = f(t, v);
            let k2 = f(t + h / 2.0, v + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, v + h / 2.0 * k2);
            let k4 = f(t + h, v + h * k3);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        let p = coupled_path_with_jumps(&m, x, y, CouplingParams { lambda }, &[t_end], &[], 1e-10).unwrap();
        assert_abs_diff_eq!(p.auxiliary[0], v, epsilon = 1e-8);
    }

    #[test]
    fn shared_clock() {
        let m = model();
        let p = simulate_feedback_coupling(&m, 1.5, 1.0, CouplingParams { lambda: 2.0 }, &[4.0], 1e-9, 9, 2).unwrap();
        let mut rng = PathRng::new(9, 2);
        let expected: Vec<f64> = draw_jump_times(&mut rng, 4.0);
        assert_eq!(p.jump_times, expected);
    }

    #[test]
    fn admissibility() {
        let m = model();
        assert!(CouplingParams::admissible(1.2, &m).is_err());
        assert!(CouplingParams::admissible(2.0, &m).is_ok());
    }
}
