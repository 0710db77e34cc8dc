//! Experiment configuration: parsing, unknown-key detection and aggregated
//! validation.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use feller_core::chain_oracle::FiniteChain;
use feller_core::coupling::lambda_threshold;
use feller_core::criteria::{reachability_schedule, ReachabilityParams};
use feller_core::measures::BinEdges;
use feller_core::sde_sim::{LangevinCubicModel, PoissonCubicModel, ProbeGrid, SigmaSpec};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::LabError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const OUT_DIR_ENV: &str = "FELLER_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "feller-out";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub master_seed: Option<u64>,
    /// Falls back to the `FELLER_OUT_DIR` environment variable, then `feller-out`.
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
    pub model: ModelSpec,
    #[serde(default)]
    pub sim: SimSettings,
    pub experiments: Vec<Experiment>,
}

fn schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv, Format::Plot]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Plot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    PoissonCubic {
        a: f64,
        b: f64,
        sigma: SigmaConfig,
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
        /// Defaults to the natural constant of the sigma family.
        #[serde(default)]
        lip_sigma: Option<f64>,
        #[serde(default)]
        probe: Option<ProbeConfig>,
    },
    LangevinCubic {
        c1: f64,
        c3: f64,
        s: f64,
    },
    Chain {
        rows: Vec<Vec<f64>>,
        #[serde(default)]
        labels: Option<Vec<String>>,
        #[serde(default)]
        metric: Option<Vec<Vec<f64>>>,
    },
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::PoissonCubic { .. } => "poisson_cubic",
            ModelSpec::LangevinCubic { .. } => "langevin_cubic",
            ModelSpec::Chain { .. } => "chain",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaConfig {
    Constant { c: f64 },
    Sinusoidal { c0: f64, c1: f64 },
}

impl From<SigmaConfig> for SigmaSpec<f64> {
    fn from(s: SigmaConfig) -> Self {
        match s {
            SigmaConfig::Constant { c } => SigmaSpec::Constant { c },
            SigmaConfig::Sinusoidal { c0, c1 } => SigmaSpec::Sinusoidal { c0, c1 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ProbeConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SimSettings {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_ode_tolerance")]
    pub ode_tolerance: f64,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_ode_tolerance() -> f64 {
    1e-9
}
fn default_n_paths() -> usize {
    10_000
}
fn default_confidence() -> f64 {
    0.95
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            ode_tolerance: default_ode_tolerance(),
            n_paths: default_n_paths(),
            confidence: default_confidence(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Experiment {
    /// Output subdirectory; defaults to `<index>_<kind>`.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: ExperimentSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct HatConfig {
    /// Defaults to the probe point `z`.
    #[serde(default)]
    pub center: Option<f64>,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum BinsConfig {
    Explicit(Vec<f64>),
    Uniform { min: f64, max: f64, count: usize },
}

impl From<&BinsConfig> for BinEdges<f64> {
    fn from(b: &BinsConfig) -> Self {
        match b {
            BinsConfig::Explicit(v) => BinEdges::Explicit(v.clone()),
            BinsConfig::Uniform { min, max, count } => BinEdges::Uniform {
                min: *min,
                max: *max,
                count: *count,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    /// Eventual-continuity defect for a hat test function.
    Defect {
        z: f64,
        test: HatConfig,
        x_grid: Vec<f64>,
        t_grid: Vec<f64>,
        #[serde(default)]
        n_paths: Option<usize>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    /// Total-variation defect; exact on chains, binned otherwise.
    TvDefect {
        z: f64,
        x_grid: Vec<f64>,
        t_grid: Vec<f64>,
        #[serde(default)]
        bins: Option<BinsConfig>,
        #[serde(default)]
        n_paths: Option<usize>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    C4 {
        z: f64,
        eps: f64,
        x_grid: Vec<f64>,
        t_grid: Vec<f64>,
        #[serde(default)]
        n_paths: Option<usize>,
    },
    C1c2 {
        z: f64,
        eps: f64,
        x_grid: Vec<f64>,
        t_grid: Vec<f64>,
        #[serde(default)]
        n_paths: Option<usize>,
    },
    CouplingBounds {
        x: f64,
        y: f64,
        lambda: f64,
        t_grid: Vec<f64>,
        #[serde(default)]
        n_paths: Option<usize>,
    },
    Reachability {
        delta: f64,
        eps: f64,
        r: f64,
        #[serde(default)]
        start_distance: f64,
        /// Paths per case interval for the empirical check; 0 disables it.
        #[serde(default)]
        n_paths: Option<usize>,
    },
    MomentDecay {
        /// Defaults to the stable equilibrium.
        #[serde(default)]
        z: Option<f64>,
        x: f64,
        t_grid: Vec<f64>,
        #[serde(default)]
        n_paths: Option<usize>,
    },
    ChainOracle {
        z: usize,
        eps: f64,
        t_grid: Vec<usize>,
    },
    OracleCrosscheck {
        z: usize,
        eps: f64,
        t_grid: Vec<usize>,
        #[serde(default)]
        n_paths: Option<usize>,
        #[serde(default = "crosscheck_confidence")]
        confidence: f64,
    },
}

fn crosscheck_confidence() -> f64 {
    0.99
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::Defect { .. } => "defect",
            ExperimentSpec::TvDefect { .. } => "tv_defect",
            ExperimentSpec::C4 { .. } => "c4",
            ExperimentSpec::C1c2 { .. } => "c1c2",
            ExperimentSpec::CouplingBounds { .. } => "coupling_bounds",
            ExperimentSpec::Reachability { .. } => "reachability",
            ExperimentSpec::MomentDecay { .. } => "moment_decay",
            ExperimentSpec::ChainOracle { .. } => "chain_oracle",
            ExperimentSpec::OracleCrosscheck { .. } => "oracle_crosscheck",
        }
    }
}

/// Overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn experiment_name(&self, index: usize) -> String {
        let e = &self.experiments[index];
        e.name.clone().unwrap_or_else(|| format!("{index:02}_{}", e.spec.kind()))
    }

    pub fn seed(&self) -> u64 {
        self.master_seed.unwrap_or_default()
    }

    /// Applies CLI overrides and fills every defaulted field so that the
    /// serialized form is self-contained.
    pub fn resolve(mut self, o: &Overrides) -> Self {
        if let Some(s) = o.seed {
            self.master_seed = Some(s);
        }
        if let Some(out) = &o.out {
            self.output_dir = Some(out.to_string_lossy().into_owned());
        }
        if self.output_dir.is_none() {
            self.output_dir = Some(std::env::var(OUT_DIR_ENV).unwrap_or_else(|_| DEFAULT_OUT_DIR.to_string()));
        }
        self.formats = self.formats.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        let n_default = self.sim.n_paths;
        for e in &mut self.experiments {
            match &mut e.spec {
                ExperimentSpec::Defect { n_paths, tolerance, test, z, .. } => {
                    n_paths.get_or_insert(n_default);
                    tolerance.get_or_insert(feller_core::criteria::DEFAULT_DEFECT_TOLERANCE);
                    test.center.get_or_insert(*z);
                }
                ExperimentSpec::TvDefect { n_paths, tolerance, .. } => {
                    n_paths.get_or_insert(n_default);
                    tolerance.get_or_insert(feller_core::criteria::DEFAULT_DEFECT_TOLERANCE);
                }
                ExperimentSpec::C4 { n_paths, .. }
                | ExperimentSpec::C1c2 { n_paths, .. }
                | ExperimentSpec::CouplingBounds { n_paths, .. }
                | ExperimentSpec::OracleCrosscheck { n_paths, .. } => {
                    n_paths.get_or_insert(n_default);
                }
                ExperimentSpec::Reachability { n_paths, .. } => {
                    n_paths.get_or_insert(0);
                }
                ExperimentSpec::MomentDecay { n_paths, z, .. } => {
                    n_paths.get_or_insert(n_default);
                    if z.is_none() {
                        if let ModelSpec::PoissonCubic { a, b, .. } = self.model {
                            *z = Some((a / b).sqrt());
                        }
                    }
                }
                ExperimentSpec::ChainOracle { .. } => {}
            }
        }
        if let ModelSpec::PoissonCubic { sigma, lip_sigma, probe, .. } = &mut self.model {
            lip_sigma.get_or_insert(SigmaSpec::from(*sigma).natural_lipschitz());
            let p = ProbeGrid::default();
            probe.get_or_insert(ProbeConfig {
                min: p.min,
                max: p.max,
                count: p.count,
            });
        }
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.output_dir.clone().unwrap_or_else(|| DEFAULT_OUT_DIR.to_string()))
    }

    pub fn poisson_model(&self) -> Option<Result<PoissonCubicModel<f64>, String>> {
        match &self.model {
            ModelSpec::PoissonCubic {
                a,
                b,
                sigma,
                m,
                big_m,
                lip_sigma,
                probe,
            } => {
                let sigma = SigmaSpec::from(*sigma);
                let lip = lip_sigma.unwrap_or_else(|| sigma.natural_lipschitz());
                let probe = probe
                    .map(|p| ProbeGrid {
                        min: p.min,
                        max: p.max,
                        count: p.count,
                    })
                    .unwrap_or_default();
                Some(PoissonCubicModel::with_probe(*a, *b, sigma, *m, *big_m, lip, probe).map_err(|e| e.to_string()))
            }
            _ => None,
        }
    }

    pub fn langevin_model(&self) -> Option<Result<LangevinCubicModel<f64>, String>> {
        match self.model {
            ModelSpec::LangevinCubic { c1, c3, s } => Some(LangevinCubicModel::new(c1, c3, s).map_err(|e| e.to_string())),
            _ => None,
        }
    }

    pub fn chain(&self) -> Option<Result<FiniteChain<f64>, String>> {
        match &self.model {
            ModelSpec::Chain { rows, labels, metric } => {
                let build = || -> feller_core::Result<FiniteChain<f64>> {
                    let mut c = FiniteChain::new(rows.clone())?;
                    if let Some(l) = labels {
                        c = c.with_labels(l.clone())?;
                    }
                    if let Some(m) = metric {
                        c = c.with_metric(m.clone())?;
                    }
                    Ok(c)
                };
                Some(build().map_err(|e| e.to_string()))
            }
            _ => None,
        }
    }

    /// Every invariant violation in the configuration.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            out.push(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.master_seed.is_none() {
            out.push("master_seed is required".into());
        }
        if self.formats.is_empty() {
            out.push("formats must list at least one of json, csv, plot".into());
        }
        let s = self.sim;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            out.push(format!("sim.dt must be positive (got {})", s.dt));
        }
        if !(s.ode_tolerance > 0.0) {
            out.push(format!("sim.ode_tolerance must be positive (got {})", s.ode_tolerance));
        }
        if s.n_paths == 0 {
            out.push("sim.n_paths must be positive".into());
        }
        if !(s.confidence > 0.0 && s.confidence < 1.0) {
            out.push(format!("sim.confidence must lie in (0, 1) (got {})", s.confidence));
        }

        let model_ok = match (self.poisson_model(), self.langevin_model(), self.chain()) {
            (Some(Err(e)), _, _) | (_, Some(Err(e)), _) | (_, _, Some(Err(e))) => {
                out.extend(e.split("; ").map(|m| format!("model: {m}")));
                false
            }
            _ => true,
        };
        if let (true, Some(Ok(m))) = (model_ok, self.langevin_model()) {
            if let Err(e) = m.check_step(s.dt) {
                out.push(format!("model: {e}"));
            }
        }

        if self.experiments.is_empty() {
            out.push("experiments must not be empty".into());
        }
        let mut names = BTreeSet::new();
        for i in 0..self.experiments.len() {
            let name = self.experiment_name(i);
            if !names.insert(name.clone()) {
                out.push(format!("duplicate experiment name {name}"));
            }
            if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
                out.push(format!("experiment name {name:?} is not a plain directory name"));
            }
            for v in self.experiment_violations(&self.experiments[i].spec, model_ok) {
                out.push(format!("experiments[{i}] ({name}): {v}"));
            }
        }
        out
    }

    fn experiment_violations(&self, spec: &ExperimentSpec, model_ok: bool) -> Vec<String> {
        let mut v = Vec::new();
        let kind = self.model.kind();
        let need = |v: &mut Vec<String>, allowed: &[&str]| {
            if !allowed.contains(&kind) {
                v.push(format!("{} needs a {} model, got {kind}", spec.kind(), allowed.join(" or ")));
            }
        };
        let times = |v: &mut Vec<String>, t: &[f64]| {
            if t.is_empty() || t[0] <= 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
                v.push("t_grid must be nonempty, positive and strictly increasing".into());
            }
        };
        let xs = |v: &mut Vec<String>, x: &[f64]| {
            if x.is_empty() || x.iter().any(|x| !x.is_finite()) {
                v.push("x_grid must be nonempty and finite".into());
            }
        };
        let positive = |v: &mut Vec<String>, name: &str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be positive (got {x})"));
            }
        };
        let paths = |v: &mut Vec<String>, n: &Option<usize>| {
            if *n == Some(0) {
                v.push("n_paths must be positive".into());
            }
        };
        let n_states = match &self.model {
            ModelSpec::Chain { rows, .. } => Some(rows.len()),
            _ => None,
        };
        let chain_grid = |v: &mut Vec<String>, x: &[f64]| {
            if let Some(n) = n_states {
                if x.iter().any(|x| !(x.fract() == 0.0 && *x >= 0.0 && (*x as usize) < n)) {
                    v.push(format!("chain grid points must be state indices in 0..{n}"));
                }
            }
        };
        match spec {
            ExperimentSpec::Defect {
                z,
                test,
                x_grid,
                t_grid,
                n_paths,
                tolerance,
            } => {
                xs(&mut v, x_grid);
                times(&mut v, t_grid);
                positive(&mut v, "test.eps", test.eps);
                paths(&mut v, n_paths);
                if let Some(t) = tolerance {
                    positive(&mut v, "tolerance", *t);
                }
                chain_grid(&mut v, &[*z]);
                chain_grid(&mut v, x_grid);
            }
            ExperimentSpec::TvDefect {
                z,
                x_grid,
                t_grid,
                bins,
                n_paths,
                tolerance,
            } => {
                xs(&mut v, x_grid);
                times(&mut v, t_grid);
                paths(&mut v, n_paths);
                if let Some(t) = tolerance {
                    positive(&mut v, "tolerance", *t);
                }
                match (n_states, bins) {
                    (Some(_), _) => {
                        chain_grid(&mut v, &[*z]);
                        chain_grid(&mut v, x_grid);
                        if t_grid.iter().any(|t| t.fract() != 0.0) {
                            v.push("chain t_grid must hold whole step counts".into());
                        }
                    }
                    (None, None) => v.push("bins are required for sampled models".into()),
                    (None, Some(b)) => {
                        if let Err(e) = BinEdges::from(b).edges() {
                            v.push(format!("bins: {e}"));
                        }
                    }
                }
            }
            ExperimentSpec::C4 {
                z,
                eps,
                x_grid,
                t_grid,
                n_paths,
            }
            | ExperimentSpec::C1c2 {
                z,
                eps,
                x_grid,
                t_grid,
                n_paths,
            } => {
                xs(&mut v, x_grid);
                times(&mut v, t_grid);
                positive(&mut v, "eps", *eps);
                paths(&mut v, n_paths);
                chain_grid(&mut v, &[*z]);
                chain_grid(&mut v, x_grid);
            }
            ExperimentSpec::CouplingBounds {
                lambda, t_grid, n_paths, ..
            } => {
                need(&mut v, &["poisson_cubic"]);
                times(&mut v, t_grid);
                paths(&mut v, n_paths);
                if let (true, Some(Ok(m))) = (model_ok, self.poisson_model()) {
                    let thr = lambda_threshold(m.a, m.lip_sigma);
                    if !(*lambda > thr) {
                        v.push(format!(
                            "lambda = {lambda} violates the admissibility condition lambda > (a + L_sigma) + L_sigma^2/2 = {thr}"
                        ));
                    }
                }
            }
            ExperimentSpec::Reachability {
                delta,
                eps,
                r,
                start_distance,
                n_paths: _,
            } => {
                need(&mut v, &["poisson_cubic"]);
                if let (true, Some(Ok(m))) = (model_ok, self.poisson_model()) {
                    let p = ReachabilityParams {
                        a: m.a,
                        b: m.b,
                        m: m.m,
                        big_m: m.big_m,
                        delta: *delta,
                        eps: *eps,
                        r: *r,
                        start_distance: *start_distance,
                    };
                    if let Err(e) = reachability_schedule(p) {
                        v.push(e.to_string());
                    }
                }
            }
            ExperimentSpec::MomentDecay { t_grid, n_paths, .. } => {
                need(&mut v, &["poisson_cubic"]);
                times(&mut v, t_grid);
                paths(&mut v, n_paths);
                if !t_grid.is_empty() && t_grid[t_grid.len() - 1] < 10.0 * t_grid[0] {
                    v.push("t_grid must span at least one decade".into());
                }
            }
            ExperimentSpec::ChainOracle { z, eps, t_grid } => {
                need(&mut v, &["chain"]);
                positive(&mut v, "eps", *eps);
                if let Some(n) = n_states {
                    if *z >= n {
                        v.push(format!("z = {z} is not a state in 0..{n}"));
                    }
                }
                if t_grid.is_empty() {
                    v.push("t_grid must be nonempty".into());
                }
            }
            ExperimentSpec::OracleCrosscheck {
                z,
                eps,
                t_grid,
                n_paths,
                confidence,
            } => {
                need(&mut v, &["chain"]);
                positive(&mut v, "eps", *eps);
                paths(&mut v, n_paths);
                if let Some(n) = n_states {
                    if *z >= n {
                        v.push(format!("z = {z} is not a state in 0..{n}"));
                    }
                }
                if t_grid.is_empty() || t_grid.contains(&0) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
                    v.push("t_grid must be positive and strictly increasing".into());
                }
                if !(*confidence > 0.0 && *confidence < 1.0) {
                    v.push(format!("confidence must lie in (0, 1) (got {confidence})"));
                }
            }
        }
        v
    }
}

/// Keys present in `raw` but absent from `known`, as JSON paths.
fn unknown_keys(raw: &Value, known: &Value, path: &str, out: &mut Vec<String>) {
    match (raw, known) {
        (Value::Object(r), Value::Object(k)) => {
            for (key, val) in r {
                let p = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                match k.get(key) {
                    Some(kv) => unknown_keys(val, kv, &p, out),
                    None => out.push(p),
                }
            }
        }
        (Value::Array(r), Value::Array(k)) => {
            for (i, (rv, kv)) in r.iter().zip(k).enumerate() {
                unknown_keys(rv, kv, &format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

/// Parses config text, rejecting unknown keys at any depth and reporting
/// every invariant violation at once.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, LabError> {
    parse_config_str_with(text, None)
}

/// As [`parse_config_str`], with a seed override applied before validation.
pub fn parse_config_str_with(text: &str, seed: Option<u64>) -> Result<ExperimentConfig, LabError> {
    let raw: Value = serde_json::from_str(text).map_err(|e| LabError::Config(vec![format!("malformed JSON: {e}")]))?;
    let mut cfg: ExperimentConfig =
        serde_json::from_value(raw.clone()).map_err(|e| LabError::Config(vec![format!("invalid config: {e}")]))?;
    // Every field serializes, so keys that do not survive a round trip were ignored.
    let known = serde_json::to_value(&cfg).map_err(|e| LabError::Config(vec![e.to_string()]))?;
    let mut unknown = Vec::new();
    unknown_keys(&raw, &known, "", &mut unknown);
    if !unknown.is_empty() {
        return Err(LabError::UnknownKeys(unknown));
    }
    if seed.is_some() {
        cfg.master_seed = seed;
    }
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(LabError::Config(problems));
    }
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, LabError> {
    parse_config_with(path, None)
}

pub fn parse_config_with(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, LabError> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str_with(&text, seed)
}
