//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measurements and wall time; the process fails if any does.

use std::path::Path;
use std::time::{Duration, Instant};

use feller_core::chain_oracle::FiniteChain;
use feller_core::coupling::{
    coupling_diagnostics, decay_exponent, defect_upper_bound, stable_equilibrium_p, z_squared_bound, ztilde_bound,
    CouplingParams,
};
use feller_core::criteria::{eventual_continuity_defect, estimate_c4, moment_constant, EstimatorGrid, Verdict};
use feller_core::measures::{ball_hit_fraction, hat_function, tv_finite, w1_bootstrap_se, w1_empirical_1d};
use feller_core::sde_sim::{
    exact_cubic_flow, flow_entry_time, sample_law, sample_paths, simulate_langevin, LangevinCubicModel, PathRng,
    PoissonCubicModel, SigmaSpec, SimConfig, StepControl,
};
use feller_core::stats::Moments;
use feller_lab::config::{parse_config_str, Overrides};
use feller_lab::run::{crosscheck, run_experiment, MANIFEST_FILE};

type Outcome = Result<String, String>;

/// Name, check and runtime budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn poisson() -> PoissonCubicModel<f64> {
    PoissonCubicModel::new(1.0, 1.0, SigmaSpec::Sinusoidal { c0: 1.0, c1: 0.25 }, 0.75, 1.25, 0.25).unwrap()
}

fn c1_oracle_equivalence() -> Outcome {
    let chain = FiniteChain::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).map_err(|e| e.to_string())?;
    let out = crosscheck(&chain, 0, 0.5, &[1, 2, 5, 10], 100_000, 0.99, 101).map_err(|e| e.to_string())?;
    let rows: Vec<_> = out.rows.iter().filter(|r| r.x == 0).collect();
    let inside = rows.iter().all(|r| r.within);
    let pi = out.invariant_estimate.clone();
    let pi_err = (pi[0] - 2.0 / 3.0).abs().max((pi[1] - 1.0 / 3.0).abs());
    let cells: Vec<String> = rows
        .iter()
        .map(|r| format!("t={} {:.4} in [{:.4},{:.4}]", r.t, r.estimate, r.ci_low, r.ci_high))
        .collect();
    check(
        inside && pi_err < 0.01 && rows.len() == 4,
        format!("{}; pi=({:.4},{:.4}) err {:.4}", cells.join(", "), pi[0], pi[1], pi_err),
    )
}

fn random_chain(seed: u64) -> FiniteChain<f64> {
    let mut rng = PathRng::new(seed, 0);
    let rows: Vec<Vec<f64>> = (0..5)
        .map(|_| {
            let w: Vec<f64> = (0..5).map(|_| 0.01 + rng.uniform()).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|v| v / s).collect()
        })
        .collect();
    FiniteChain::new(rows).unwrap()
}

fn c2_doeblin_bound() -> Outcome {
    let mut worst_ratio = 0.0f64;
    let mut worst_identity = 0.0f64;
    for c in 0..100 {
        let chain = random_chain(2000 + c);
        // Minorization by the best single state: P(x, .) >= alpha delta_z.
        let (z, alpha) = (0..5)
            .map(|z| (z, chain.doeblin_alpha(&[z], 1).unwrap()))
            .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        for x in 0..5 {
            for y in x + 1..5 {
                for k in 1..=50 {
                    let tv = tv_finite(
                        &chain.power_distribution(x, k).unwrap(),
                        &chain.power_distribution(y, k).unwrap(),
                    )
                    .unwrap();
                    let bound = (1.0 - alpha).powi(k as i32);
                    if tv > 1e-14 {
                        worst_ratio = worst_ratio.max(tv / bound);
                    }
                }
                let trace = chain.alpha_splitting_decomposition(x, y, &[z], 1, 50).unwrap();
                worst_identity = worst_identity.max(trace.reconstruction_error(&chain));
            }
        }
    }
    check(
        worst_ratio <= 1.0 + 1e-9 && worst_identity <= 1e-10,
        format!("max TV/(1-alpha)^k = {worst_ratio:.4}, max mixture residual = {worst_identity:.2e}"),
    )
}

fn c3_exact_flow() -> Outcome {
    let model = LangevinCubicModel::new(1.5, 1.0, 0.0).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    for x0 in [0.5, 2.0] {
        let exact: f64 = exact_cubic_flow(x0, 2.0, 1.5, 1.0);
        let err = |dt: f64| {
            let p = simulate_langevin(&model, x0, &SimConfig::new(2.0, dt, 1, 0), 0).unwrap();
            (p.values[0] - exact).abs()
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        let ratio = e1 / e2;
        // Error constant: |error| <= C dt with C = 1.
        ok &= e1 <= 1e-3 && e2 <= 5e-4 && (1.6..=2.4).contains(&ratio);
        lines.push(format!("x0={x0}: err {e1:.3e}, {e2:.3e}, ratio {ratio:.3}"));
    }
    check(ok, lines.join("; "))
}

fn c4_comparison_bound() -> Outcome {
    let m = poisson();
    let ts = [0.5, 1.0, 2.0, 4.0];
    let d = coupling_diagnostics(&m, 1.5, 1.0, CouplingParams { lambda: 2.0 }, &ts, 20_000, 1e-9, 104)
        .map_err(|e| e.to_string())?;
    let k: f64 = decay_exponent(2.0, 1.0, 0.25);
    let mut ok = (k + 1.4375).abs() < 1e-12;
    let mut cells = Vec::new();
    for r in &d.rows {
        let bound = 0.25 * (-1.4375 * r.t).exp();
        ok &= (bound - z_squared_bound(1.5, 1.0, 2.0, 1.0, 0.25, r.t)).abs() < 1e-12;
        ok &= r.e_z2 <= bound + 3.0 * r.se_z2;
        cells.push(format!("t={} {:.3e}<={:.3e}", r.t, r.e_z2, bound));
    }
    check(ok, cells.join(", "))
}

fn c5_ztilde_bound() -> Outcome {
    let m = poisson();
    let x = 0.5f64.sqrt() + 0.1;
    let p: f64 = stable_equilibrium_p(1.0, 1.0, 2.0, 0.25).map_err(|e| e.to_string())?;
    let c = (1.0 + 0.25 + 0.03125) * 0.5f64.sqrt();
    let residual = ((1.0 - 2.0) * p - p.powi(3) + c).abs();
    let d = coupling_diagnostics(&m, x, 1.0, CouplingParams { lambda: 2.0 }, &[1.0, 2.0, 5.0], 20_000, 1e-9, 105)
        .map_err(|e| e.to_string())?;
    let mut ok = residual < 1e-10 && d.constants.ztilde_regime;
    let mut cells = Vec::new();
    for r in &d.rows {
        let bound = ztilde_bound(x, 1.0, 2.0, 1.0, 1.0, 0.25, 1.25, r.t).map_err(|e| e.to_string())?;
        ok &= r.e_ztilde <= bound + 3.0 * r.se_ztilde;
        cells.push(format!("t={} {:.3e}<={:.3}", r.t, r.e_ztilde, bound));
    }
    check(ok, format!("p={p:.6} residual {residual:.1e}; {}", cells.join(", ")))
}

fn c6_moment_bound() -> Outcome {
    let m = poisson();
    let c = moment_constant(1.0, 1.0, 1.25);
    let ts = [0.5, 1.0, 2.0, 5.0, 10.0];
    let paths = sample_paths(&m, 5.0, &ts, 20_000, 106, &StepControl::default()).map_err(|e| e.to_string())?;
    let mut ok = (c - 20.9375).abs() < 1e-12;
    let mut cells = Vec::new();
    for (k, t) in ts.iter().enumerate() {
        let mo = Moments::from_slice(&paths.iter().map(|p| (p.values[k] - 1.0).powi(2)).collect::<Vec<_>>());
        let bound = 16.0 * (-t).exp() + c;
        ok &= mo.mean() <= bound + 3.0 * mo.std_error();
        cells.push(format!("t={t} {:.3}<={:.3}", mo.mean(), bound));
    }
    let law = sample_law(&m, 5.0, 10.0, 20_000, 1106, &StepControl::default()).map_err(|e| e.to_string())?;
    let hit = ball_hit_fraction(&law.measure, 1.0, 7.0, 0.95).map_err(|e| e.to_string())?;
    ok &= hit.estimate >= 0.5;
    check(ok, format!("{}; P(B(1,7)) at t=10 = {:.4}", cells.join(", "), hit.estimate))
}

fn c7_case1_reachability() -> Outcome {
    let m = poisson();
    let t1 = flow_entry_time(1.5, 1.5, 1.0, 0.1, 1.0, 1.0).map_err(|e| e.to_string())?;
    let t = t1 + 1.0;
    let law = sample_law(&m, 1.5, t, 100_000, 107, &StepControl::default()).map_err(|e| e.to_string())?;
    let hit = ball_hit_fraction(&law.measure, 1.0, 0.1, 0.95).map_err(|e| e.to_string())?;
    let n = law.measure.len() as f64;
    let se = (hit.estimate * (1.0 - hit.estimate) / n).sqrt();
    let bound = (-t).exp();
    check(
        hit.estimate >= bound - 3.0 * se,
        format!("T1={t1:.4}, P={:.4} (se {se:.4}) >= e^-(T1+1)={bound:.4}", hit.estimate),
    )
}

fn c8_defect_regime() -> Outcome {
    let m = poisson();
    let f = hat_function(1.0, 0.5).map_err(|e| e.to_string())?;
    let xs = vec![1.1, 1.3, 1.7];
    let g = EstimatorGrid::new(xs.clone(), vec![6.0], 20_000, 108);
    let r = eventual_continuity_defect(&m, 1.0, &f, &g, 0.05).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut cells = Vec::new();
    for tail in &r.tails {
        let ez = z_squared_bound(tail.x, 1.0, 2.0, 1.0, 0.25, 6.0).sqrt();
        let ezt = ztilde_bound(tail.x, 1.0, 2.0, 1.0, 1.0, 0.25, 1.25, 6.0).map_err(|e| e.to_string())?;
        let bound = defect_upper_bound(f.lip_const(), ez, ezt).map_err(|e| e.to_string())?;
        // The report interval is mean +- q se at 95%; its half width covers 3 se after scaling.
        let se = (tail.ci_high - tail.ci_low) / (2.0 * 1.959963984540054);
        ok &= tail.value <= bound + 3.0 * se;
        cells.push(format!("x={} {:.4}<={:.3}", tail.x, tail.value, bound));
    }
    // Closer to z never has a clearly larger defect.
    for w in r.tails.windows(2) {
        ok &= w[0].ci_low <= w[1].ci_high;
    }
    check(ok, cells.join(", "))
}

fn c9_langevin_negative() -> Outcome {
    let m = LangevinCubicModel::<f64>::default();
    let f = hat_function(0.0, 0.5).map_err(|e| e.to_string())?;
    let g = EstimatorGrid::new(vec![0.05], vec![20.0], 20_000, 109);
    let r = eventual_continuity_defect(&m, 0.0, &f, &g, 0.05).map_err(|e| e.to_string())?;
    check(
        r.summary.value >= 0.5,
        format!("defect {:.4} (ci {:.4}..{:.4}), diverged {}", r.summary.value, r.summary.ci_low, r.summary.ci_high, r.diverged_paths),
    )
}

fn c10_poisson_stability() -> Outcome {
    let m = poisson();
    let ctl = StepControl::default();
    let mut w = Vec::new();
    for (k, t) in [5.0, 10.0, 20.0, 40.0].into_iter().enumerate() {
        let a = sample_law(&m, -2.0, t, 10_000, 1100 + 2 * k as u64, &ctl).map_err(|e| e.to_string())?;
        let b = sample_law(&m, 3.0, t, 10_000, 1101 + 2 * k as u64, &ctl).map_err(|e| e.to_string())?;
        let d = w1_empirical_1d(&a.measure, &b.measure).map_err(|e| e.to_string())?;
        let se = w1_bootstrap_se(&a.measure, &b.measure, 200, 110 + k as u64).map_err(|e| e.to_string())?;
        w.push((t, d, se));
    }
    let mut ok = w[3].1 <= 0.15;
    for p in w.windows(2) {
        ok &= p[1].1 <= p[0].1 + 2.0 * (p[0].2.powi(2) + p[1].2.powi(2)).sqrt();
    }
    let g = EstimatorGrid::new(vec![-3.0, -1.0, 0.0, 0.5, 1.0, 2.0, 4.0], vec![10.0, 20.0, 30.0, 40.0], 10_000, 111);
    let c4 = estimate_c4(&m, 1.0, 0.5, &g).map_err(|e| e.to_string())?;
    ok &= c4.verdict == Verdict::Supported;
    let cells: Vec<String> = w.iter().map(|(t, d, se)| format!("T={t} {d:.4}+-{se:.4}")).collect();
    check(ok, format!("W1 {}; C4 {:.3} {:?}", cells.join(", "), c4.summary.value, c4.verdict))
}

const DETERMINISM_CONFIG: &str = r#"{
    "master_seed": 2024,
    "model": {"kind": "poisson_cubic", "a": 1, "b": 1,
              "sigma": {"kind": "sinusoidal", "c0": 1, "c1": 0.25}, "m": 0.75, "M": 1.25},
    "sim": {"n_paths": 20000},
    "experiments": [
        {"kind": "coupling_bounds", "x": 1.5, "y": 1.0, "lambda": 2, "t_grid": [0.5, 1, 2, 4]},
        {"kind": "coupling_bounds", "x": 0.8071067811865476, "y": 1.0, "lambda": 2, "t_grid": [1, 2, 5]},
        {"kind": "moment_decay", "z": 1, "x": 5, "t_grid": [0.5, 1, 2, 5, 10]},
        {"kind": "defect", "z": 1, "test": {"eps": 0.5}, "x_grid": [1.1, 1.3, 1.7], "t_grid": [6]},
        {"kind": "c4", "z": 1, "eps": 0.5, "x_grid": [-3, -1, 0, 0.5, 1, 2, 4], "t_grid": [10, 20, 30, 40],
         "n_paths": 2000},
        {"kind": "reachability", "delta": 0.1, "eps": 0.5, "r": 3, "n_paths": 2000}
    ]
}"#;

const DETERMINISM_CHAIN: &str = r#"{
    "master_seed": 2024,
    "model": {"kind": "chain", "rows": [[0.9, 0.1], [0.2, 0.8]]},
    "experiments": [
        {"kind": "oracle_crosscheck", "z": 0, "eps": 0.5, "t_grid": [1, 2, 5, 10], "n_paths": 100000},
        {"kind": "chain_oracle", "z": 0, "eps": 0.5, "t_grid": [1, 2, 5, 10]}
    ]
}"#;

/// Every output file except the manifest, which carries wall-clock fields.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != MANIFEST_FILE {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for (i, text) in [DETERMINISM_CONFIG, DETERMINISM_CHAIN].into_iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let cfg = parse_config_str(text).map_err(|e| e.to_string())?.resolve(&Overrides {
            seed: None,
            out: Some(out.clone()),
        });
        let first = run_experiment(&cfg).map_err(|e| e.to_string())?;
        let a = snapshot(&out);
        std::fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
        let second = run_experiment(&cfg).map_err(|e| e.to_string())?;
        let b = snapshot(&out);
        if !(first.succeeded() && second.succeeded()) {
            return Err("a run reported an error".into());
        }
        if a != b {
            let diff: Vec<&String> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| &x.0).collect();
            return Err(format!("outputs differ: {diff:?}"));
        }
        if first.config_sha256 != second.config_sha256 {
            return Err("config hash differs".into());
        }
        let strip = |m: &feller_lab::RunManifest| {
            let mut v = serde_json::to_value(m).unwrap();
            v["started_unix_seconds"] = 0.into();
            v["wall_clock_seconds"] = 0.into();
            for e in v["experiments"].as_array_mut().unwrap() {
                e["seconds"] = 0.into();
            }
            v
        };
        if strip(&first) != strip(&second) {
            return Err("manifests differ outside wall-clock fields".into());
        }
        files += a.len();
    }
    Ok(format!("{files} report files byte-identical across reruns"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 oracle equivalence (2-state chain)", c1_oracle_equivalence, 10),
        ("2 Doeblin bound and splitting identities", c2_doeblin_bound, 30),
        ("3 exact-flow oracle, first-order error", c3_exact_flow, 10),
        ("4 E|Z|^2 comparison bound", c4_comparison_bound, 60),
        ("5 E|Z~| bound in its regime", c5_ztilde_bound, 60),
        ("6 second-moment bound and r = 7 ball", c6_moment_bound, 60),
        ("7 case-1 reachability", c7_case1_reachability, 60),
        ("8 defect in the proven regime", c8_defect_regime, 120),
        ("9 Langevin defect at 0", c9_langevin_negative, 60),
        ("10 Poisson W1 decay and C4", c10_poisson_stability, 300),
        ("11 determinism of report files", c11_determinism, 600),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = f();
        let secs = t0.elapsed();
        let in_time = secs <= Duration::from_secs(limit);
        let (pass, detail) = match outcome {
            Ok(d) => (in_time, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} [{:.1}s of {limit}s] {detail}",
            if pass { "PASS" } else { "FAIL" },
            secs.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
