//! Structured verdicts for the stability conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Caveat attached to every Monte Carlo report.
pub const GRID_CAVEAT: &str = "liminf/limsup over t are replaced by min/max over a finite time grid \
beyond the burn-in; these are numerical diagnostics, not proofs";

/// Caveat attached to reports computed exactly on a finite chain.
pub const EXACT_CAVEAT: &str = "exact limits of a finite discrete-time chain computed from its cyclic \
limit matrices; continuous-time statements are only sampled at integer steps";

/// Caveat for total variation estimated from binned samples.
pub const BINNED_TV_CAVEAT: &str = "total variation is estimated by the binned distance, a lower bound \
of the supremum over all bounded test functions";

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    /// Eventual continuity for bounded Lipschitz test functions.
    #[serde(rename = "EC")]
    Ec,
    /// Eventual continuity in total variation.
    #[serde(rename = "TV-EC")]
    TvEc,
    /// `limsup_t Q_t(x, B(z, eps)) > 0`.
    C1,
    /// `liminf_t P_t(z, B(z, eps)) > 0`.
    C2,
    /// `inf_x liminf_t P_t(x, B(z, eps)) > 0`.
    C4,
}

impl ConditionId {
    /// Defects must be small; the other conditions are positive lower bounds.
    pub fn is_defect(self) -> bool {
        matches!(self, ConditionId::Ec | ConditionId::TvEc)
    }
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Supported,
    NotSupported,
    Inconclusive,
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridEstimate {
    pub x: f64,
    pub t: f64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Per-x reduction over the time grid (the liminf/limsup proxy).
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailValue {
    pub x: f64,
    /// Time at which the min (or max) over the tail was attained; `None`
    /// for exact limits.
    pub t: Option<f64>,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub schema_version: u32,
    pub condition: ConditionId,
    pub z: f64,
    pub eps: Option<f64>,
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub burn_in: Option<f64>,
    pub points: Vec<GridEstimate>,
    pub tails: Vec<TailValue>,
    pub summary: Summary,
    pub verdict: Verdict,
    /// Tolerance a defect must fall below to count as supported.
    pub tolerance: Option<f64>,
    pub exact: bool,
    pub caveat: String,
    pub notes: Vec<String>,
    pub diverged_paths: u64,
}

impl CriterionReport {
    /// Schema-level checks: caveat present, summary reproducible from the
    /// per-x tail values, verdict consistent with the summary.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(format!("malformed {:?} report: {m}", self.condition)));
        if self.caveat.trim().is_empty() {
            return bad("missing caveat".into());
        }
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return bad(format!("schema version {}", self.schema_version));
        }
        if !self.tails.is_empty() {
            let expected = if self.condition.is_defect() {
                // limsup over x -> z: the tail value closest to z.
                self.tails
                    .iter()
                    .min_by(|a, b| (a.x - self.z).abs().total_cmp(&(b.x - self.z).abs()))
                    .map(|t| t.value)
            } else {
                self.tails.iter().map(|t| t.value).min_by(f64::total_cmp)
            };
            if let Some(v) = expected {
                if (v - self.summary.value).abs() > 1e-12 {
                    return bad(format!("summary {} disagrees with tail values ({v})", self.summary.value));
                }
            }
        }
        let expected_verdict = if self.condition.is_defect() {
            defect_verdict(self.summary, self.tolerance.unwrap_or(0.0))
        } else if self.exact {
            exact_verdict(self.summary.value)
        } else {
            lower_bound_verdict(self.summary)
        };
        if expected_verdict != self.verdict {
            return bad(format!("verdict {:?} inconsistent with summary", self.verdict));
        }
        Ok(())
    }
}

/// Lower-bound conditions: supported iff the interval excludes zero,
/// not supported when nothing at all was observed.
pub fn lower_bound_verdict(s: Summary) -> Verdict {
    if s.ci_low > 0.0 {
        Verdict::Supported
    } else if s.value <= 0.0 {
        Verdict::NotSupported
    } else {
        Verdict::Inconclusive
    }
}

pub fn defect_verdict(s: Summary, tolerance: f64) -> Verdict {
    if s.ci_high < tolerance {
        Verdict::Supported
    } else if s.ci_low > tolerance {
        Verdict::NotSupported
    } else {
        Verdict::Inconclusive
    }
}

pub(crate) const EXACT_ZERO: f64 = 1e-12;

pub fn exact_verdict(value: f64) -> Verdict {
    if value > EXACT_ZERO {
        Verdict::Supported
    } else {
        Verdict::NotSupported
    }
}
