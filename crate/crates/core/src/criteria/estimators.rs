//! Monte Carlo estimators of the eventual-continuity defects and of the
//! positive lower-bound conditions.

use rayon::prelude::*;

use super::report::{
    defect_verdict, lower_bound_verdict, ConditionId, CriterionReport, GridEstimate, Summary, TailValue,
    BINNED_TV_CAVEAT, GRID_CAVEAT, REPORT_SCHEMA_VERSION,
};
use crate::chain_oracle::burn_in_index;
use crate::error::{domain, Result};
use crate::measures::{tv_binned, BinEdges, EmpiricalMeasure, TestFunction};
use crate::sde_sim::rng::derive_seed;
use crate::sde_sim::sampling::{sample_cesaro_law, sample_paths, MarkovModel, ModelPath, StepControl};
use crate::stats::{normal_quantile, wilson_interval, Moments, DEFAULT_CONFIDENCE};

/// Defects at or below this level count as "supported" unless configured.
pub const DEFAULT_DEFECT_TOLERANCE: f64 = 0.05;

const C2_SALT: u64 = 0x00c2;
const C4_SALT: u64 = 0x00c4;
const C1_SALT: u64 = 0x00c1;

/// Grids and sampling controls shared by every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorGrid {
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub n_paths: usize,
    pub master_seed: u64,
    pub control: StepControl,
    pub confidence: f64,
}

impl EstimatorGrid {
    pub fn new(x_grid: Vec<f64>, t_grid: Vec<f64>, n_paths: usize, master_seed: u64) -> Self {
        Self {
            x_grid,
            t_grid,
            n_paths,
            master_seed,
            control: StepControl::default(),
            confidence: DEFAULT_CONFIDENCE,
        }
    }

    pub fn with_control(mut self, control: StepControl) -> Self {
        self.control = control;
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_grid.is_empty() || self.t_grid.is_empty() {
            return domain("x and t grids must be nonempty");
        }
        if self.x_grid.iter().any(|x| !x.is_finite()) {
            return domain("x grid must be finite");
        }
        if self.t_grid[0] <= 0.0 || self.t_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("t grid must be positive and strictly increasing");
        }
        if self.n_paths == 0 {
            return domain("need at least one path");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return domain("confidence must lie in (0, 1)");
        }
        Ok(())
    }

    /// First time of the tail used for liminf/limsup proxies.
    pub fn burn_in(&self) -> f64 {
        self.t_grid[burn_in_index(self.t_grid.len())]
    }

    fn tail_range(&self) -> std::ops::Range<usize> {
        burn_in_index(self.t_grid.len())..self.t_grid.len()
    }
}

#[allow(clippy::too_many_arguments)]
fn report(
    condition: ConditionId,
    z: f64,
    eps: Option<f64>,
    grid: &EstimatorGrid,
    points: Vec<GridEstimate>,
    tails: Vec<TailValue>,
    summary: Summary,
    tolerance: Option<f64>,
    caveat: String,
    notes: Vec<String>,
    diverged: u64,
) -> CriterionReport {
    let verdict = match tolerance {
        Some(tol) => defect_verdict(summary, tol),
        None => lower_bound_verdict(summary),
    };
    CriterionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        condition,
        z,
        eps,
        x_grid: grid.x_grid.clone(),
        t_grid: grid.t_grid.clone(),
        burn_in: Some(grid.burn_in()),
        points,
        tails,
        summary,
        verdict,
        tolerance,
        exact: false,
        caveat,
        notes,
        diverged_paths: diverged,
    }
}

/// Tail reduction: `pick` chooses between the current best and a candidate.
fn reduce_tail(x: f64, cells: &[GridEstimate], larger: bool) -> TailValue {
    let best = cells
        .iter()
        .copied()
        .reduce(|acc, c| {
            let better = if larger { c.estimate > acc.estimate } else { c.estimate < acc.estimate };
            if better {
                c
            } else {
                acc
            }
        })
        .expect("nonempty tail");
    TailValue {
        x,
        t: Some(best.t),
        value: best.estimate,
        ci_low: best.ci_low,
        ci_high: best.ci_high,
    }
}

/// Minimum over x with the most conservative interval.
fn min_summary(tails: &[TailValue]) -> Summary {
    let value = tails.iter().map(|t| t.value).fold(f64::INFINITY, f64::min);
    Summary {
        value,
        ci_low: tails.iter().map(|t| t.ci_low).fold(f64::INFINITY, f64::min),
        ci_high: tails.iter().map(|t| t.ci_high).fold(f64::INFINITY, f64::min),
    }
}

/// Tail value of the grid point closest to z (the `x -> z` end of the trend).
fn nearest_summary(tails: &[TailValue], z: f64) -> Summary {
    let t = tails
        .iter()
        .min_by(|a, b| (a.x - z).abs().total_cmp(&(b.x - z).abs()))
        .expect("nonempty tails");
    Summary {
        value: t.value,
        ci_low: t.ci_low,
        ci_high: t.ci_high,
    }
}

/// Describes how the per-x defect behaves as x approaches z.
fn trend_note(tails: &[TailValue], z: f64) -> String {
    let mut by_dist: Vec<&TailValue> = tails.iter().collect();
    by_dist.sort_by(|a, b| (a.x - z).abs().total_cmp(&(b.x - z).abs()));
    let monotone = by_dist.windows(2).all(|w| w[0].value <= w[1].value || w[0].ci_low <= w[1].ci_high);
    let listing: Vec<String> = by_dist.iter().map(|t| format!("{}:{:.4}", t.x, t.value)).collect();
    format!(
        "defect by x (nearest z first): {}; {}",
        listing.join(", "),
        if monotone {
            "nonincreasing as x -> z up to CI overlap"
        } else {
            "not monotone as x -> z"
        }
    )
}

fn hit_cell(x: f64, t: f64, hits: usize, n: usize, conf: f64) -> GridEstimate {
    let p = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
    let (lo, hi) = wilson_interval(p, n as f64, conf);
    GridEstimate {
        x,
        t,
        estimate: p,
        ci_low: lo,
        ci_high: hi,
    }
}

/// `|E f(X_t^x) - E f(X_t^z)|` on the grid with common random numbers: path
/// `i` from `x` and from `z` share stream `(master_seed, i)`. Pairs in which
/// either path diverged are dropped and counted. The per-x defect is the
/// maximum over the tail of the time grid; the summary is the value at the
/// grid point nearest `z`.
pub fn eventual_continuity_defect<M: MarkovModel + ?Sized>(
    model: &M,
    z: f64,
    f: &TestFunction<f64>,
    grid: &EstimatorGrid,
    tolerance: f64,
) -> Result<CriterionReport> {
    grid.validate()?;
    let ctl = &grid.control;
    let from_z = sample_paths(model, z, &grid.t_grid, grid.n_paths, grid.master_seed, ctl)?;
    let q = normal_quantile(grid.confidence);
    let mut points = Vec::new();
    let mut tails = Vec::new();
    let mut diverged = 0u64;
    for &x in &grid.x_grid {
        let from_x = if x == z {
            from_z.clone()
        } else {
            sample_paths(model, x, &grid.t_grid, grid.n_paths, grid.master_seed, ctl)?
        };
        let kept: Vec<(&ModelPath, &ModelPath)> =
            from_x.iter().zip(&from_z).filter(|(a, b)| !a.diverged && !b.diverged).collect();
        diverged += (grid.n_paths - kept.len()) as u64;
        if kept.is_empty() {
            return Err(crate::Error::Precondition(format!("every path pair from x = {x} diverged")));
        }
        let cells: Vec<GridEstimate> = grid
            .t_grid
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let diffs: Vec<f64> = kept.iter().map(|(a, b)| f.eval(a.values[k]) - f.eval(b.values[k])).collect();
                let m = Moments::from_slice(&diffs);
                let (lo, hi) = (m.mean() - q * m.std_error(), m.mean() + q * m.std_error());
                let (ci_low, ci_high) = if lo <= 0.0 && hi >= 0.0 {
                    (0.0, lo.abs().max(hi.abs()))
                } else {
                    (lo.abs().min(hi.abs()), lo.abs().max(hi.abs()))
                };
                GridEstimate {
                    x,
                    t,
                    estimate: m.mean().abs(),
                    ci_low,
                    ci_high,
                }
            })
            .collect();
        tails.push(reduce_tail(x, &cells[grid.tail_range()], true));
        points.extend(cells);
    }
    let summary = nearest_summary(&tails, z);
    let notes = vec![trend_note(&tails, z)];
    Ok(report(
        ConditionId::Ec,
        z,
        None,
        grid,
        points,
        tails,
        summary,
        Some(tolerance),
        GRID_CAVEAT.to_string(),
        notes,
        diverged,
    ))
}

/// Binned total-variation distance between the sampled laws from `x` and
/// from `z` at each grid time. The interval is a normal-approximation
/// envelope summed over bins, so it is wide when bins are many.
pub fn tv_defect<M: MarkovModel + ?Sized>(
    model: &M,
    z: f64,
    bins: &BinEdges<f64>,
    grid: &EstimatorGrid,
    tolerance: f64,
) -> Result<CriterionReport> {
    grid.validate()?;
    let edges = bins.edges()?;
    let ctl = &grid.control;
    let q = normal_quantile(grid.confidence);
    let from_z = sample_paths(model, z, &grid.t_grid, grid.n_paths, grid.master_seed, ctl)?;
    let column = |paths: &[ModelPath], k: usize| -> Result<EmpiricalMeasure<f64>> {
        let v: Vec<f64> = paths.iter().filter(|p| !p.diverged).map(|p| p.values[k]).collect();
        if v.is_empty() {
            return Err(crate::Error::Precondition("every sampled path diverged".into()));
        }
        EmpiricalMeasure::new(v)
    };
    let mut diverged = from_z.iter().filter(|p| p.diverged).count() as u64;
    let mut points = Vec::new();
    let mut tails = Vec::new();
    for &x in &grid.x_grid {
        let from_x = sample_paths(model, x, &grid.t_grid, grid.n_paths, grid.master_seed, ctl)?;
        diverged += from_x.iter().filter(|p| p.diverged).count() as u64;
        let mut cells = Vec::with_capacity(grid.t_grid.len());
        for (k, &t) in grid.t_grid.iter().enumerate() {
            let (mx, mz) = (column(&from_x, k)?, column(&from_z, k)?);
            let d = tv_binned(&mx, &mz, bins)?;
            let half = 0.5 * q * bin_noise(&mx, &mz, &edges);
            cells.push(GridEstimate {
                x,
                t,
                estimate: d,
                ci_low: (d - half).max(0.0),
                ci_high: (d + half).min(1.0),
            });
        }
        tails.push(reduce_tail(x, &cells[grid.tail_range()], true));
        points.extend(cells);
    }
    let summary = nearest_summary(&tails, z);
    let notes = vec![trend_note(&tails, z)];
    Ok(report(
        ConditionId::TvEc,
        z,
        None,
        grid,
        points,
        tails,
        summary,
        Some(tolerance),
        format!("{GRID_CAVEAT}; {BINNED_TV_CAVEAT}"),
        notes,
        diverged,
    ))
}

/// `sum_i sqrt(p_i (1 - p_i) / n_x + q_i (1 - q_i) / n_z)` over the bins
/// including both overflow bins.
fn bin_noise(mx: &EmpiricalMeasure<f64>, mz: &EmpiricalMeasure<f64>, edges: &[f64]) -> f64 {
    let freqs = |m: &EmpiricalMeasure<f64>| -> Vec<f64> {
        let mut c = vec![0.0; edges.len() + 1];
        for &s in m.samples() {
            let i = edges.partition_point(|e| *e <= s);
            let i = if s == edges[edges.len() - 1] { edges.len() - 1 } else { i };
            c[i] += 1.0;
        }
        let n = m.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    };
    let (px, pz) = (freqs(mx), freqs(mz));
    let (nx, nz) = (mx.len() as f64, mz.len() as f64);
    px.iter()
        .zip(&pz)
        .map(|(a, b)| (a * (1.0 - a) / nx + b * (1.0 - b) / nz).sqrt())
        .sum()
}

fn in_ball<M: MarkovModel + ?Sized>(model: &M, v: f64, z: f64, eps: f64) -> bool {
    v.is_finite() && model.distance(v, z) < eps
}

/// `inf_x liminf_t P_t(x, B(z, eps))` by the minimum over the grid tail of
/// the hit fraction. Stream `x_index` of the `C4` seed is used for each x.
pub fn estimate_c4<M: MarkovModel + ?Sized>(
    model: &M,
    z: f64,
    eps: f64,
    grid: &EstimatorGrid,
) -> Result<CriterionReport> {
    grid.validate()?;
    if !(eps > 0.0) {
        return domain("ball radius must be positive");
    }
    let cells_by_x = grid
        .x_grid
        .par_iter()
        .enumerate()
        .map(|(xi, &x)| {
            let seed = derive_seed(grid.master_seed, &[C4_SALT, xi as u64]);
            let paths = sample_paths(model, x, &grid.t_grid, grid.n_paths, seed, &grid.control)?;
            let div = paths.iter().filter(|p| p.diverged).count();
            let cells: Vec<GridEstimate> = (0..grid.t_grid.len())
                .map(|k| {
                    let hits = paths.iter().filter(|p| !p.diverged && in_ball(model, p.values[k], z, eps)).count();
                    hit_cell(x, grid.t_grid[k], hits, paths.len(), grid.confidence)
                })
                .collect();
            Ok((cells, div))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::new();
    let mut tails = Vec::new();
    let mut diverged = 0u64;
    for ((cells, div), &x) in cells_by_x.into_iter().zip(&grid.x_grid) {
        diverged += div as u64;
        tails.push(reduce_tail(x, &cells[grid.tail_range()], false));
        points.extend(cells);
    }
    let summary = min_summary(&tails);
    Ok(report(
        ConditionId::C4,
        z,
        Some(eps),
        grid,
        points,
        tails,
        summary,
        None,
        GRID_CAVEAT.to_string(),
        vec!["diverged paths count as misses".into()],
        diverged,
    ))
}

/// `limsup_t Q_t(x, B(z, eps))` (Cesàro law, maximum over the grid tail,
/// then minimum over x) and `liminf_t P_t(z, B(z, eps))` (minimum over the
/// grid tail). Cesàro cells use seeds derived from `(x_index, t_index)`.
pub fn estimate_c1_c2<M: MarkovModel + ?Sized>(
    model: &M,
    z: f64,
    eps: f64,
    grid: &EstimatorGrid,
) -> Result<(CriterionReport, CriterionReport)> {
    grid.validate()?;
    if !(eps > 0.0) {
        return domain("ball radius must be positive");
    }
    let nt = grid.t_grid.len();
    let cells = (0..grid.x_grid.len() * nt)
        .into_par_iter()
        .map(|c| {
            let (xi, ti) = (c / nt, c % nt);
            let (x, t) = (grid.x_grid[xi], grid.t_grid[ti]);
            let seed = derive_seed(grid.master_seed, &[C1_SALT, xi as u64, ti as u64]);
            let law = sample_cesaro_law(model, x, t, grid.n_paths, seed, &grid.control)?;
            let hits = law.measure.samples().iter().filter(|v| in_ball(model, **v, z, eps)).count();
            Ok((hit_cell(x, t, hits, grid.n_paths, grid.confidence), law.diverged))
        })
        .collect::<Result<Vec<_>>>()?;
    let c1_diverged: u64 = cells.iter().map(|c| c.1 as u64).sum();
    let c1_points: Vec<GridEstimate> = cells.into_iter().map(|c| c.0).collect();
    let c1_tails: Vec<TailValue> = grid
        .x_grid
        .iter()
        .enumerate()
        .map(|(xi, &x)| {
            let row = &c1_points[xi * nt..(xi + 1) * nt];
            reduce_tail(x, &row[grid.tail_range()], true)
        })
        .collect();
    let c1 = report(
        ConditionId::C1,
        z,
        Some(eps),
        grid,
        c1_points,
        c1_tails.clone(),
        min_summary(&c1_tails),
        None,
        GRID_CAVEAT.to_string(),
        vec!["Cesàro law sampled at independent uniform times in (0, t)".into()],
        c1_diverged,
    );

    let seed = derive_seed(grid.master_seed, &[C2_SALT]);
    let paths = sample_paths(model, z, &grid.t_grid, grid.n_paths, seed, &grid.control)?;
    let c2_points: Vec<GridEstimate> = (0..nt)
        .map(|k| {
            let hits = paths.iter().filter(|p| !p.diverged && in_ball(model, p.values[k], z, eps)).count();
            hit_cell(z, grid.t_grid[k], hits, paths.len(), grid.confidence)
        })
        .collect();
    let c2_tails = vec![reduce_tail(z, &c2_points[grid.tail_range()], false)];
    let mut c2_grid = grid.clone();
    c2_grid.x_grid = vec![z];
    let c2 = report(
        ConditionId::C2,
        z,
        Some(eps),
        &c2_grid,
        c2_points,
        c2_tails.clone(),
        min_summary(&c2_tails),
        None,
        GRID_CAVEAT.to_string(),
        Vec::new(),
        paths.iter().filter(|p| p.diverged).count() as u64,
    );
    Ok((c1, c2))
}
