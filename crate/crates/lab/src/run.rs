//! Executes configured experiments and writes their reports.

use std::path::Path;
use std::time::Instant;

use feller_core::chain_oracle::{ExactConditionReport, FiniteChain};
use feller_core::coupling::{coupling_diagnostics, CouplingDiagnostics, CouplingParams};
use feller_core::criteria::{
    estimate_c1_c2, estimate_c4, eventual_continuity_defect, moment_decay_fit, reachability_schedule, tv_defect,
    CriterionReport, EstimatorGrid, ReachabilityParams, ReachabilitySchedule, Verdict,
};
use feller_core::measures::{hat_function, BinEdges};
use feller_core::sde_sim::{
    derive_seed, sample_law, ChainModel, LangevinCubicModel, MarkovModel, PoissonCubicModel, StepControl,
};
use feller_core::stats::wilson_interval;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentSpec, Format};
use crate::emit::{num, sha256_hex, write_atomic, Emitter, FileRecord};
use crate::error::LabError;

pub const RESOLVED_CONFIG_FILE: &str = "config.resolved.json";
pub const MANIFEST_FILE: &str = "manifest.json";

enum Model {
    Poisson(PoissonCubicModel<f64>),
    Langevin(LangevinCubicModel<f64>),
    Chain(FiniteChain<f64>, ChainModel),
}

impl Model {
    fn from_config(cfg: &ExperimentConfig) -> Result<Self, LabError> {
        let invalid = |e: String| LabError::Config(vec![e]);
        if let Some(m) = cfg.poisson_model() {
            return Ok(Model::Poisson(m.map_err(invalid)?));
        }
        if let Some(m) = cfg.langevin_model() {
            return Ok(Model::Langevin(m.map_err(invalid)?));
        }
        let chain = cfg.chain().expect("model kind is exhaustive").map_err(invalid)?;
        Ok(Model::Chain(chain.clone(), ChainModel::new(chain)))
    }

    fn markov(&self) -> &dyn MarkovModel {
        match self {
            Model::Poisson(m) => m,
            Model::Langevin(m) => m,
            Model::Chain(_, m) => m,
        }
    }

    fn poisson(&self) -> Result<&PoissonCubicModel<f64>, LabError> {
        match self {
            Model::Poisson(m) => Ok(m),
            _ => Err(LabError::Config(vec!["experiment needs a poisson_cubic model".into()])),
        }
    }

    fn chain(&self) -> Result<&FiniteChain<f64>, LabError> {
        match self {
            Model::Chain(c, _) => Ok(c),
            _ => Err(LabError::Config(vec!["experiment needs a chain model".into()])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct VerdictRecord {
    pub condition: String,
    pub verdict: Verdict,
    pub summary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ExperimentRecord {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub status: Status,
    pub error: Option<String>,
    pub files: Vec<FileRecord>,
    pub verdicts: Vec<VerdictRecord>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    /// SHA-256 of the bytes of the resolved config file.
    pub config_sha256: String,
    pub config_file: String,
    pub master_seed: u64,
    pub started_unix_seconds: f64,
    pub wall_clock_seconds: f64,
    pub experiments: Vec<ExperimentRecord>,
    pub caveats: Vec<String>,
}

impl RunManifest {
    pub fn succeeded(&self) -> bool {
        self.experiments.iter().all(|e| e.status == Status::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct OracleOutput {
    pub n_states: usize,
    pub period: usize,
    pub recurrent_classes: Vec<Vec<usize>>,
    /// `None` when the chain has several recurrent classes.
    pub invariant: Option<Vec<f64>>,
    pub invariant_error: Option<String>,
    pub ball: Vec<usize>,
    /// `min_x P^t(x, ball)` for each `t` of the grid.
    pub doeblin_alpha: Vec<f64>,
    pub exact: ExactConditionReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CrosscheckRow {
    pub x: usize,
    pub t: usize,
    pub exact: f64,
    pub estimate: f64,
    /// Wilson interval around the exact value for `n` draws.
    pub ci_low: f64,
    pub ci_high: f64,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CrosscheckOutput {
    pub z: usize,
    pub ball: Vec<usize>,
    pub n_paths: usize,
    pub confidence: f64,
    pub rows: Vec<CrosscheckRow>,
    pub all_within: bool,
    pub stationary_t: usize,
    pub invariant_exact: Option<Vec<f64>>,
    pub invariant_estimate: Vec<f64>,
    pub invariant_max_error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CaseCheck {
    pub case: u8,
    pub x: f64,
    pub t: f64,
    pub estimate: f64,
    pub se: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ReachabilityOutput {
    pub schedule: ReachabilitySchedule,
    pub empirical: Vec<CaseCheck>,
}

/// Runs every experiment of an already validated config. Operational errors
/// are recorded per experiment; verdicts never count as failures.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest, LabError> {
    let started = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or_default();
    let clock = Instant::now();
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;
    let mut cfg_bytes = serde_json::to_vec_pretty(cfg)?;
    cfg_bytes.push(b'\n');
    write_atomic(&out.join(RESOLVED_CONFIG_FILE), &cfg_bytes)?;

    let model = Model::from_config(cfg)?;
    let mut records = Vec::with_capacity(cfg.experiments.len());
    for (i, e) in cfg.experiments.iter().enumerate() {
        let name = cfg.experiment_name(i);
        let seed = derive_seed(cfg.seed(), &[i as u64]);
        let t0 = Instant::now();
        let mut files = Vec::new();
        let result = Emitter::new(&out, &name, &cfg.formats).and_then(|mut em| {
            let r = run_one(cfg, &model, &e.spec, seed, &mut em);
            files = em.files;
            r
        });
        let (status, error, verdicts) = match result {
            Ok(v) => (Status::Ok, None, v),
            Err(err) => (Status::Error, Some(err.to_string()), Vec::new()),
        };
        records.push(ExperimentRecord {
            name,
            kind: e.spec.kind().to_string(),
            seed,
            status,
            error,
            files,
            verdicts,
            seconds: t0.elapsed().as_secs_f64(),
        });
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(&cfg_bytes),
        config_file: RESOLVED_CONFIG_FILE.to_string(),
        master_seed: cfg.seed(),
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        experiments: records,
        caveats: vec![feller_core::criteria::GRID_CAVEAT.to_string()],
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_atomic(&out.join(MANIFEST_FILE), &bytes)?;
    Ok(manifest)
}

fn verdict(r: &CriterionReport) -> VerdictRecord {
    VerdictRecord {
        condition: serde_json::to_value(r.condition)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default(),
        verdict: r.verdict,
        summary: r.summary.value,
    }
}

fn grid_rows(r: &CriterionReport) -> Vec<Vec<String>> {
    r.points
        .iter()
        .map(|p| vec![num(p.x), num(p.t), num(p.estimate), num(p.ci_low), num(p.ci_high)])
        .collect()
}

/// Report JSON, grid CSV and one plot curve per x.
fn emit_criterion(em: &mut Emitter, stem: &str, value_col: &str, r: &CriterionReport) -> Result<(), LabError> {
    em.json(&format!("{stem}.json"), r)?;
    em.table(&format!("{stem}.csv"), &["x", "t", value_col, "ci_low", "ci_high"], &grid_rows(r))?;
    if em.wants(Format::Plot) {
        for (i, &x) in r.x_grid.iter().enumerate() {
            let rows: Vec<Vec<String>> = r
                .points
                .iter()
                .filter(|p| p.x == x)
                .map(|p| vec![num(p.t), num(p.estimate), num(p.ci_low), num(p.ci_high)])
                .collect();
            em.plot(&format!("{stem}_curve_{i:02}.csv"), &["t", "value", "ci_low", "ci_high"], &rows)?;
        }
    }
    Ok(())
}

fn grid(cfg: &ExperimentConfig, x_grid: &[f64], t_grid: &[f64], n: Option<usize>, seed: u64) -> EstimatorGrid {
    EstimatorGrid::new(x_grid.to_vec(), t_grid.to_vec(), n.unwrap_or(cfg.sim.n_paths), seed)
        .with_control(StepControl {
            dt: cfg.sim.dt,
            ode_tolerance: cfg.sim.ode_tolerance,
        })
        .with_confidence(cfg.sim.confidence)
}

fn run_one(
    cfg: &ExperimentConfig,
    model: &Model,
    spec: &ExperimentSpec,
    seed: u64,
    em: &mut Emitter,
) -> Result<Vec<VerdictRecord>, LabError> {
    match spec {
        ExperimentSpec::Defect {
            z,
            test,
            x_grid,
            t_grid,
            n_paths,
            tolerance,
        } => {
            let f = hat_function(test.center.unwrap_or(*z), test.eps)?;
            let g = grid(cfg, x_grid, t_grid, *n_paths, seed);
            let tol = tolerance.unwrap_or(feller_core::criteria::DEFAULT_DEFECT_TOLERANCE);
            let r = eventual_continuity_defect(model.markov(), *z, &f, &g, tol)?;
            emit_criterion(em, "defect", "defect", &r)?;
            Ok(vec![verdict(&r)])
        }
        ExperimentSpec::TvDefect {
            z,
            x_grid,
            t_grid,
            bins,
            n_paths,
            tolerance,
        } => {
            let tol = tolerance.unwrap_or(feller_core::criteria::DEFAULT_DEFECT_TOLERANCE);
            let r = match model {
                Model::Chain(c, _) => {
                    let xs: Vec<usize> = x_grid.iter().map(|x| *x as usize).collect();
                    let ts: Vec<usize> = t_grid.iter().map(|t| *t as usize).collect();
                    c.tv_defect(*z as usize, &xs, &ts, tol)?
                }
                _ => {
                    let bins = bins
                        .as_ref()
                        .ok_or_else(|| LabError::Config(vec!["bins are required for sampled models".into()]))?;
                    let g = grid(cfg, x_grid, t_grid, *n_paths, seed);
                    tv_defect(model.markov(), *z, &BinEdges::from(bins), &g, tol)?
                }
            };
            emit_criterion(em, "tv_defect", "defect", &r)?;
            Ok(vec![verdict(&r)])
        }
        ExperimentSpec::C4 {
            z,
            eps,
            x_grid,
            t_grid,
            n_paths,
        } => {
            let r = estimate_c4(model.markov(), *z, *eps, &grid(cfg, x_grid, t_grid, *n_paths, seed))?;
            emit_criterion(em, "c4", "estimate", &r)?;
            Ok(vec![verdict(&r)])
        }
        ExperimentSpec::C1c2 {
            z,
            eps,
            x_grid,
            t_grid,
            n_paths,
        } => {
            let (c1, c2) = estimate_c1_c2(model.markov(), *z, *eps, &grid(cfg, x_grid, t_grid, *n_paths, seed))?;
            emit_criterion(em, "c1", "estimate", &c1)?;
            emit_criterion(em, "c2", "estimate", &c2)?;
            Ok(vec![verdict(&c1), verdict(&c2)])
        }
        ExperimentSpec::CouplingBounds {
            x,
            y,
            lambda,
            t_grid,
            n_paths,
        } => {
            let m = model.poisson()?;
            let params = CouplingParams::admissible(*lambda, m)?;
            let n = n_paths.unwrap_or(cfg.sim.n_paths);
            let d = coupling_diagnostics(m, *x, *y, params, t_grid, n, cfg.sim.ode_tolerance, seed)?;
            emit_coupling(em, &d)?;
            Ok(Vec::new())
        }
        ExperimentSpec::Reachability {
            delta,
            eps,
            r,
            start_distance,
            n_paths,
        } => {
            let m = model.poisson()?;
            let schedule = reachability_schedule(ReachabilityParams {
                a: m.a,
                b: m.b,
                m: m.m,
                big_m: m.big_m,
                delta: *delta,
                eps: *eps,
                r: *r,
                start_distance: *start_distance,
            })?;
            let empirical = match n_paths.unwrap_or(0) {
                0 => Vec::new(),
                n => reachability_check(m, &schedule, n, seed)?,
            };
            let out = ReachabilityOutput { schedule, empirical };
            em.json("schedule.json", &out)?;
            let s = &out.schedule;
            let rows: Vec<Vec<String>> = (0..=50)
                .map(|k| {
                    let t = 2.0 * s.total_time * k as f64 / 50.0;
                    vec![
                        num(t),
                        num(s.case1(t)),
                        num(s.case2(t)),
                        num(s.case3(t).unwrap_or(f64::NAN)),
                    ]
                })
                .collect();
            em.plot("case_bounds.csv", &["t", "case1", "case2", "case3"], &rows)?;
            if !out.empirical.is_empty() {
                let rows: Vec<Vec<String>> = out
                    .empirical
                    .iter()
                    .map(|c| {
                        vec![
                            c.case.to_string(),
                            num(c.x),
                            num(c.t),
                            num(c.estimate),
                            num(c.se),
                            num(c.bound),
                            c.ok.to_string(),
                        ]
                    })
                    .collect();
                em.table("empirical.csv", &["case", "x", "t", "estimate", "se", "bound", "ok"], &rows)?;
            }
            Ok(Vec::new())
        }
        ExperimentSpec::MomentDecay { z, x, t_grid, n_paths } => {
            let m = model.poisson()?;
            let z = z.unwrap_or_else(|| m.equilibrium());
            let fit = moment_decay_fit(m, z, *x, t_grid, n_paths.unwrap_or(cfg.sim.n_paths), seed)?;
            em.json("moment.json", &fit)?;
            let rows: Vec<Vec<String>> = fit
                .rows
                .iter()
                .map(|r| vec![num(r.t), num(r.e_sq), num(r.se_sq), num(r.bound), num(r.fitted)])
                .collect();
            em.table("moment.csv", &["t", "e_sq", "se_sq", "bound", "fitted"], &rows)?;
            let plot: Vec<Vec<String>> = fit
                .rows
                .iter()
                .map(|r| vec![num(r.t), num(r.e_sq), num(r.bound), num(r.fitted)])
                .collect();
            em.plot("moment_plot.csv", &["t", "value", "bound", "fitted"], &plot)?;
            Ok(Vec::new())
        }
        ExperimentSpec::ChainOracle { z, eps, t_grid } => {
            let c = model.chain()?;
            let exact = c.exact_condition_report(*z, *eps)?;
            let ball = c.ball(*z, *eps);
            let (invariant, invariant_error) = match c.invariant_measure() {
                Ok(m) => (Some(m.probs().to_vec()), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let doeblin_alpha = t_grid
                .iter()
                .map(|&t| if t == 0 { Ok(0.0) } else { c.doeblin_alpha(&ball, t) })
                .collect::<feller_core::Result<Vec<_>>>()?;
            let verdicts = vec![verdict(&exact.c1), verdict(&exact.c2), verdict(&exact.c4)];
            let out = OracleOutput {
                n_states: c.n_states(),
                period: exact.period,
                recurrent_classes: exact.recurrent_classes.clone(),
                invariant,
                invariant_error,
                ball,
                doeblin_alpha,
                exact,
            };
            em.json("oracle.json", &out)?;
            let mut rows = Vec::new();
            for x in 0..c.n_states() {
                for &t in t_grid {
                    let d = c.power_distribution(x, t)?;
                    for y in 0..c.n_states() {
                        rows.push(vec![x.to_string(), t.to_string(), y.to_string(), num(d.prob_of(y))]);
                    }
                }
            }
            em.table("powers.csv", &["x", "t", "state", "prob"], &rows)?;
            Ok(verdicts)
        }
        ExperimentSpec::OracleCrosscheck {
            z,
            eps,
            t_grid,
            n_paths,
            confidence,
        } => {
            let c = model.chain()?;
            let out = crosscheck(c, *z, *eps, t_grid, n_paths.unwrap_or(cfg.sim.n_paths), *confidence, seed)?;
            em.json("crosscheck.json", &out)?;
            let rows: Vec<Vec<String>> = out
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.x.to_string(),
                        r.t.to_string(),
                        num(r.exact),
                        num(r.estimate),
                        num(r.ci_low),
                        num(r.ci_high),
                        r.within.to_string(),
                    ]
                })
                .collect();
            em.table("crosscheck.csv", &["x", "t", "exact", "estimate", "ci_low", "ci_high", "within"], &rows)?;
            Ok(Vec::new())
        }
    }
}

fn emit_coupling(em: &mut Emitter, d: &CouplingDiagnostics) -> Result<(), LabError> {
    em.json("coupling.json", d)?;
    if em.wants(Format::Csv) {
        let mut buf = Vec::new();
        d.write_csv(&mut buf)?;
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        em.table("coupling.csv", &h, &rows)?;
    }
    let z2: Vec<Vec<String>> = d
        .rows
        .iter()
        .map(|r| vec![num(r.t), num(r.e_z2), num(r.se_z2), num(r.bound_z2)])
        .collect();
    em.plot("coupling_z2.csv", &["t", "value", "se", "bound"], &z2)?;
    let zt: Vec<Vec<String>> = d
        .rows
        .iter()
        .map(|r| vec![num(r.t), num(r.e_ztilde), num(r.se_ztilde), num(r.bound_ztilde.unwrap_or(f64::NAN))])
        .collect();
    em.plot("coupling_ztilde.csv", &["t", "value", "se", "bound"], &zt)?;
    Ok(())
}

/// Hit frequency of `B(s, eps)` at the schedule's time from the endpoints
/// and midpoint of each case interval, against that case's bound.
fn reachability_check(
    m: &PoissonCubicModel<f64>,
    s: &ReachabilitySchedule,
    n: usize,
    seed: u64,
) -> Result<Vec<CaseCheck>, LabError> {
    let (eq, d, r, t) = (s.equilibrium, s.params.delta, s.r, s.total_time);
    let mut cases = vec![(1u8, d, eq + r, s.bounds.case1), (2, -d, d, s.bounds.case2)];
    if let Some(b3) = s.bounds.case3 {
        cases.push((3, eq - r, -d, b3));
    }
    let ctl = StepControl::default();
    let mut out = Vec::new();
    for (k, (case, lo, hi, bound)) in cases.into_iter().enumerate() {
        for (j, x) in [lo, 0.5 * (lo + hi), hi].into_iter().enumerate() {
            let law = sample_law(m, x, t, n, derive_seed(seed, &[k as u64, j as u64]), &ctl)?;
            let hits = law.measure.samples().iter().filter(|v| (**v - eq).abs() < s.params.eps).count();
            let p = hits as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            out.push(CaseCheck {
                case,
                x,
                t,
                estimate: p,
                se,
                bound,
                ok: p >= bound - 3.0 * se,
            });
        }
    }
    Ok(out)
}

/// Compares Monte Carlo transition frequencies of the chain with exact
/// matrix powers.
pub fn crosscheck(
    c: &FiniteChain<f64>,
    z: usize,
    eps: f64,
    t_grid: &[usize],
    n: usize,
    confidence: f64,
    seed: u64,
) -> Result<CrosscheckOutput, LabError> {
    let model = ChainModel::new(c.clone());
    let ball = c.ball(z, eps);
    let ctl = StepControl::default();
    let mut rows = Vec::new();
    for x in 0..c.n_states() {
        for (ti, &t) in t_grid.iter().enumerate() {
            let exact = c.power_distribution(x, t)?.mass(&ball);
            let law = sample_law(&model, x as f64, t as f64, n, derive_seed(seed, &[x as u64, ti as u64]), &ctl)?;
            let hits = law.measure.samples().iter().filter(|v| ball.contains(&(**v as usize))).count();
            let estimate = hits as f64 / n as f64;
            let (lo, hi) = wilson_interval(exact, n as f64, confidence);
            rows.push(CrosscheckRow {
                x,
                t,
                exact,
                estimate,
                ci_low: lo,
                ci_high: hi,
                within: estimate >= lo && estimate <= hi,
            });
        }
    }
    let stationary_t = 100;
    let law = sample_law(&model, z as f64, stationary_t as f64, n, derive_seed(seed, &[u64::MAX]), &ctl)?;
    let mut counts = vec![0usize; c.n_states()];
    for v in law.measure.samples() {
        counts[*v as usize] += 1;
    }
    let invariant_estimate: Vec<f64> = counts.iter().map(|k| *k as f64 / n as f64).collect();
    let invariant_exact = c.invariant_measure().ok().map(|m| m.probs().to_vec());
    let invariant_max_error = invariant_exact.as_ref().map(|pi| {
        pi.iter()
            .zip(&invariant_estimate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    Ok(CrosscheckOutput {
        z,
        ball,
        n_paths: n,
        confidence,
        all_within: rows.iter().all(|r| r.within),
        rows,
        stationary_t,
        invariant_exact,
        invariant_estimate,
        invariant_max_error,
    })
}

/// Hashes of every file a run produced except the manifest, which carries
/// wall-clock fields.
pub fn output_hashes(dir: &Path, manifest: &RunManifest) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = manifest
        .experiments
        .iter()
        .flat_map(|e| e.files.iter().map(|f| (f.path.clone(), f.sha256.clone())))
        .collect();
    if let Ok(bytes) = std::fs::read(dir.join(RESOLVED_CONFIG_FILE)) {
        v.push((RESOLVED_CONFIG_FILE.to_string(), sha256_hex(&bytes)));
    }
    v.sort();
    v
}
