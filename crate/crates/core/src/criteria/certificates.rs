//! Closed-form lower bounds from Lyapunov-type moment certificates.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Nonincreasing rate function vanishing at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rate {
    /// `c e^{-gamma t}`.
    Exponential { c: f64, gamma: f64 },
    /// `c t^{-beta}`, only for `t > 0`.
    Power { c: f64, beta: f64 },
}

impl Rate {
    pub fn validate(&self) -> Result<()> {
        let (c, k) = match *self {
            Rate::Exponential { c, gamma } => (c, gamma),
            Rate::Power { c, beta } => (c, beta),
        };
        if !(c >= 0.0 && c.is_finite()) {
            return domain("rate scale must be finite and nonnegative");
        }
        if !(k > 0.0 && k.is_finite()) {
            return domain("rate exponent must be positive so that the rate vanishes");
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match *self {
            Rate::Exponential { c, gamma } => Ok(c * (-gamma * t).exp()),
            Rate::Power { c, beta } => {
                if !(t > 0.0) {
                    return domain("power rate needs t > 0");
                }
                Ok(c * t.powf(-beta))
            }
        }
    }
}

/// Moment certificate `E d(X_t^x, z)^p <= rho_x(t) + b` with
/// `rho_x(t) = |x - z|^p rate(t)` when `start_distance` is set and
/// `rate(t)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovCertificate {
    pub z: f64,
    pub p: f64,
    pub offset: f64,
    pub kappa: f64,
    pub rate: Rate,
    #[serde(default)]
    pub start_distance: Option<f64>,
}

impl LyapunovCertificate {
    pub fn new(z: f64, p: f64, offset: f64, kappa: f64, rate: Rate, start_distance: Option<f64>) -> Result<Self> {
        let c = Self {
            z,
            p,
            offset,
            kappa,
            rate,
            start_distance,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0) || !(self.kappa > 0.0) {
            return domain("certificate needs p > 0 and kappa > 0");
        }
        if !(self.offset >= 0.0) {
            return domain("certificate offset must be nonnegative");
        }
        if self.start_distance.is_some_and(|d| !(d >= 0.0)) {
            return domain("start distance must be nonnegative");
        }
        self.rate.validate()
    }

    pub fn rho(&self, t: f64) -> Result<f64> {
        let base = self.rate.eval(t)?;
        Ok(match self.start_distance {
            Some(d) => d.powf(self.p) * base,
            None => base,
        })
    }
}

/// `max(0, 1 - rho(t)/r^p - b/r^p)`, a lower bound on `P_t(x, B(z, r))`
/// by Chebyshev's inequality.
pub fn chebyshev_lower_bound(cert: &LyapunovCertificate, r: f64, t: f64) -> Result<f64> {
    cert.validate()?;
    if !(r > 0.0) {
        return domain("radius must be positive");
    }
    let rp = r.powf(cert.p);
    Ok((1.0 - cert.rho(t)? / rp - cert.offset / rp).max(0.0))
}

/// Composition bound `p_stay * p_reach` for
/// `liminf P_{t+T}(x, B(z, eps)) >= liminf P_t(x, B(z, r)) * inf_{B(z, r)} P_T(., B(z, eps))`.
pub fn chain_lower_bound(p_stay: f64, p_reach: f64) -> Result<f64> {
    let unit = |v: f64| (0.0..=1.0).contains(&v);
    if !unit(p_stay) || !unit(p_reach) {
        return domain("probabilities must lie in [0, 1]");
    }
    Ok(p_stay * p_reach)
}
