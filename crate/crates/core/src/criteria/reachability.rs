//! Explicit reachability schedule for the Poisson cubic model: a time `T`
//! and a positive lower bound on `P_T(x, B(sqrt(a/b), eps))` uniformly over
//! `x` in `[sqrt(a/b) - r, sqrt(a/b) + r]`.
//!
//! Starting points split into three intervals. From `[d, s + r]` the flow
//! alone enters the target if no jump occurs. From `[-d, d]` one early jump
//! lifts the path into the positive basin. From `[s - r, -d]` the path first
//! settles near `-s`, then climbs out with `n` quick jumps.

use serde::{Deserialize, Serialize};

use super::moments::{doeblin_radius, moment_constant};
use crate::error::{domain, Result};
use crate::sde_sim::flow::{equilibrium, flow_entry_time, flow_time_to_reach, ENTRY_TIME_MARGIN};

/// Fallback duration for intervals the flow never leaves.
const UNBOUNDED_STAY: f64 = 1.0;

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachabilityParams {
    pub a: f64,
    pub b: f64,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    /// Half-width of the interval around 0.
    pub delta: f64,
    pub eps: f64,
    /// Requested radius; raised to the constraints if smaller.
    pub r: f64,
    /// Largest `|x - sqrt(a/b)|` entering the moment radius.
    #[serde(default)]
    pub start_distance: f64,
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusConstraint {
    Requested,
    SingleJump,
    Ladder,
    Moment,
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseBounds {
    pub case1: f64,
    /// `None` when the interval `[s - r, -delta]` is empty.
    pub case3: Option<f64>,
    pub case2: f64,
}

impl CaseBounds {
    pub fn min(&self) -> f64 {
        self.case1.min(self.case2).min(self.case3.unwrap_or(1.0))
    }
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilitySchedule {
    pub params: ReachabilityParams,
    pub equilibrium: f64,
    pub n: usize,
    pub delta0: f64,
    pub r0: f64,
    pub r: f64,
    pub binding: RadiusConstraint,
    /// Flow entry time from `[delta, s + r]` into `B(s, eps)`.
    pub t1_entry: f64,
    /// Time the flow from `[-delta, delta]` stays inside `(-2 delta, 2 delta)`.
    pub t_delta: f64,
    /// Flow entry time from `[s - r, -delta]` into `B(-s, delta0)`.
    pub t2_entry: f64,
    /// Ladder stay times `t_1 .. t_{n-1}`.
    pub ladder: Vec<f64>,
    pub total_time: f64,
    pub bounds: CaseBounds,
    pub lower_bound: f64,
    pub notes: Vec<String>,
}

impl ReachabilitySchedule {
    /// `e^{-t}`: no jump before `t`.
    pub fn case1(&self, t: f64) -> f64 {
        (-t).exp()
    }

    /// `e^{-t} (1 - e^{-t_delta})`.
    pub fn case2(&self, t: f64) -> f64 {
        (-t).exp() * -(-self.t_delta).exp_m1()
    }

    /// `(e^{-T_2} - e^{-T_2 - t_1}) prod_i (1 - e^{-t_i}) e^{-t - T_1 - T_2 - 2t_1 - t_2 - ... - t_{n-1}}`.
    pub fn case3(&self, t: f64) -> Option<f64> {
        if !self.case3_nonempty() {
            return None;
        }
        let t_1 = self.ladder.first().copied().unwrap_or(0.0);
        let first = (-self.t2_entry).exp() * -(-t_1).exp_m1();
        let product: f64 = self.ladder.iter().map(|ti| -(-ti).exp_m1()).product();
        let tail = t + self.t1_entry + self.t2_entry + t_1 + self.ladder.iter().sum::<f64>();
        Some(first * product * (-tail).exp())
    }

    pub fn case3_nonempty(&self) -> bool {
        self.equilibrium - self.r < -self.params.delta
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Time before the flow started in the closed band `[lo, hi]` leaves
/// `(lo - w, hi + w)`, shrunk by the safety margin; [`UNBOUNDED_STAY`] if it
/// never does. The flow is order preserving, so the endpoints decide.
fn stay_time(lo: f64, hi: f64, w: f64, a: f64, b: f64) -> f64 {
    let exit = [flow_time_to_reach(lo, lo - w, a, b), flow_time_to_reach(hi, hi + w, a, b)]
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    if exit.is_finite() {
        exit / (1.0 + ENTRY_TIME_MARGIN)
    } else {
        UNBOUNDED_STAY
    }
}

pub fn reachability_schedule(p: ReachabilityParams) -> Result<ReachabilitySchedule> {
    let ReachabilityParams {
        a,
        b,
        m,
        big_m,
        delta,
        eps,
        r: r_request,
        start_distance,
    } = p;
    if !(a > 0.0 && b > 0.0) {
        return domain("need a > 0 and b > 0");
    }
    if !(m > 0.0 && big_m > m) {
        return domain("need 0 < m < M");
    }
    if !(eps > 0.0) {
        return domain("target radius eps must be positive");
    }
    if !(start_distance >= 0.0) {
        return domain("start distance must be nonnegative");
    }
    let s = equilibrium(a, b);
    let cap = (m / 3.0).min((s - m).abs()).min(s);
    if !(delta > 0.0 && delta < cap) {
        return domain(format!(
            "delta = {delta} violates 0 < delta < min(m/3, |sqrt(a/b) - m|, sqrt(a/b)) = {cap}"
        ));
    }
    let n = ((4.0 * a / b).sqrt() / m).floor() as usize + 1;
    let delta0 = 0.5 * (s - delta) / (n as f64 + 1.0);
    let r0 = doeblin_radius(moment_constant(a, b, big_m), start_distance);

    let candidates = [
        (RadiusConstraint::SingleJump, big_m + 2.0 * delta),
        (RadiusConstraint::Ladder, -s + n as f64 * (big_m + delta0)),
        (RadiusConstraint::Moment, r0),
    ];
    let (binding_c, bound) = candidates
        .iter()
        .copied()
        .fold((RadiusConstraint::SingleJump, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
    let strict = bound + 1e-9 * bound.abs().max(1.0);
    let (r, binding) = if r_request > strict {
        (r_request, RadiusConstraint::Requested)
    } else {
        (strict, binding_c)
    };

    let t1_entry = flow_entry_time(delta, s + r, s, eps, a, b)?;
    let t_delta = stay_time(-delta, delta, delta, a, b);
    let mut notes = vec![format!("radius set by {binding:?} constraint")];
    let nonempty3 = s - r < -delta;
    let (t2_entry, ladder) = if nonempty3 {
        let t2 = flow_entry_time(s - r, -delta, -s, delta0, a, b)?;
        let ladder: Vec<f64> = (1..n)
            .map(|i| {
                let fi = i as f64;
                stay_time(-s + fi * m - fi * delta0, -s + fi * big_m + fi * delta0, delta0, a, b)
            })
            .collect();
        (t2, ladder)
    } else {
        notes.push("interval [sqrt(a/b) - r, -delta] is empty; case 3 skipped".into());
        (0.0, Vec::new())
    };
    if (-s + n as f64 * (m - delta0)) <= delta {
        notes.push("last ladder landing band reaches below delta; case 3 hand-off to case 1 not guaranteed".into());
    }
    let total_time = t1_entry + t_delta + t2_entry + ladder.first().copied().unwrap_or(0.0) + ladder.iter().sum::<f64>();

    let mut sched = ReachabilitySchedule {
        params: ReachabilityParams { r, ..p },
        equilibrium: s,
        n,
        delta0,
        r0,
        r,
        binding,
        t1_entry,
        t_delta,
        t2_entry,
        ladder,
        total_time,
        bounds: CaseBounds {
            case1: 0.0,
            case2: 0.0,
            case3: None,
        },
        lower_bound: 0.0,
        notes,
    };
    sched.bounds = CaseBounds {
        case1: sched.case1(total_time),
        case2: sched.case2(total_time),
        case3: sched.case3(total_time),
    };
    sched.lower_bound = sched.bounds.min();
    Ok(sched)
}
