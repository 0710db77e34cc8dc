//! Exact computations on finite discrete-time Markov chains.
//!
//! Everything here is deterministic linear algebra on small dense matrices
//! and serves as ground truth for the Monte Carlo estimators: transition
//! rows `P^t(x, .)`, the invariant measure, Cesàro averages, the Doeblin
//! constant `alpha = min_x P^t1(x, A)` and the alpha-splitting of
//! pushforwards into a part concentrated on `A` and a remainder.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::criteria::report::{
    defect_verdict, exact_verdict, ConditionId, CriterionReport, GridEstimate, Summary, TailValue,
    EXACT_CAVEAT, REPORT_SCHEMA_VERSION,
};
use crate::error::{domain, Error, Result};
use crate::measures::{tv_finite, FiniteMeasure};
use crate::scalar::{compensated_sum, Scalar};

/// Row-stochastic kernel over labelled states with an optional metric.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteChain<T> {
    n: usize,
    kernel: Vec<T>,
    labels: Option<Vec<String>>,
    metric: Option<Vec<T>>,
}

/// JSON form of a chain: `{n, rows, labels?, metric?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ChainSpec<T> {
    pub n: usize,
    pub rows: Vec<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<T>>>,
}

impl<T: Scalar> FiniteChain<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return domain("chain needs at least one state");
        }
        let mut kernel = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return domain(format!("row {i} has {} entries, expected {n}", row.len()));
            }
            if let Some(p) = row.iter().find(|p| !(**p >= T::zero() && **p <= T::one())) {
                return domain(format!("row {i} has entry {p} outside [0, 1]"));
            }
            let s = compensated_sum(row.iter().copied());
            if (s - T::one()).abs() > T::norm_tol() {
                return domain(format!("row {i} sums to {s}, not 1"));
            }
            kernel.extend_from_slice(row);
        }
        Ok(Self {
            n,
            kernel,
            labels: None,
            metric: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return domain(format!("{} labels for {} states", labels.len(), self.n));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Attaches a metric; it must be symmetric, nonnegative, zero on the
    /// diagonal and satisfy the triangle inequality.
    pub fn with_metric(mut self, metric: Vec<Vec<T>>) -> Result<Self> {
        let n = self.n;
        if metric.len() != n || metric.iter().any(|r| r.len() != n) {
            return domain("metric must be n x n");
        }
        let tol = T::lit(1e-12);
        for i in 0..n {
            if metric[i][i] != T::zero() {
                return domain(format!("metric diagonal entry ({i},{i}) is nonzero"));
            }
            for j in 0..n {
                let d = metric[i][j];
                if !(d >= T::zero()) || !d.is_finite() {
                    return domain(format!("metric entry ({i},{j}) = {d} is not a finite nonnegative number"));
                }
                if (d - metric[j][i]).abs() > tol {
                    return domain(format!("metric is not symmetric at ({i},{j})"));
                }
                for k in 0..n {
                    if d > metric[i][k] + metric[k][j] + tol {
                        return domain(format!("metric violates the triangle inequality at ({i},{k},{j})"));
                    }
                }
            }
        }
        self.metric = Some(metric.into_iter().flatten().collect());
        Ok(self)
    }

    pub fn from_spec(spec: ChainSpec<T>) -> Result<Self> {
        if spec.rows.len() != spec.n {
            return domain(format!("n = {} but {} rows given", spec.n, spec.rows.len()));
        }
        let mut chain = Self::new(spec.rows)?;
        if let Some(l) = spec.labels {
            chain = chain.with_labels(l)?;
        }
        if let Some(m) = spec.metric {
            chain = chain.with_metric(m)?;
        }
        Ok(chain)
    }

    pub fn to_spec(&self) -> ChainSpec<T> {
        ChainSpec {
            n: self.n,
            rows: self.kernel.chunks(self.n).map(<[T]>::to_vec).collect(),
            labels: self.labels.clone(),
            metric: self
                .metric
                .as_ref()
                .map(|m| m.chunks(self.n).map(<[T]>::to_vec).collect()),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_spec(serde_json::from_str(s)?)
    }

    /// Reads a headerless CSV matrix, one row per line.
    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map(T::lit)
                        .map_err(|e| Error::Domain(format!("bad matrix entry {f:?}: {e}")))
                })
                .collect::<Result<Vec<T>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.kernel[x * self.n..(x + 1) * self.n]
    }

    pub fn entry(&self, x: usize, y: usize) -> T {
        self.kernel[x * self.n + y]
    }

    /// Metric distance; the discrete metric when none was supplied.
    pub fn distance(&self, x: usize, y: usize) -> T {
        match &self.metric {
            Some(m) => m[x * self.n + y],
            None if x == y => T::zero(),
            None => T::one(),
        }
    }

    /// States within open distance `eps` of `z`.
    pub fn ball(&self, z: usize, eps: T) -> Vec<usize> {
        (0..self.n).filter(|&y| self.distance(z, y) < eps).collect()
    }

    fn check_state(&self, x: usize) -> Result<()> {
        if x >= self.n {
            return domain(format!("state {x} outside 0..{}", self.n));
        }
        Ok(())
    }

    fn check_set(&self, set: &[usize]) -> Result<()> {
        if set.is_empty() {
            return domain("target set must be nonempty");
        }
        set.iter().try_for_each(|&s| self.check_state(s))
    }

    /// Row vector times kernel.
    pub fn step(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n];
        for (x, &vx) in v.iter().enumerate() {
            if vx == T::zero() {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(x)) {
                *o = *o + vx * p;
            }
        }
        out
    }

    fn step_n(&self, v: &[T], t: usize) -> Vec<T> {
        (0..t).fold(v.to_vec(), |acc, _| self.step(&acc))
    }

    /// Exact `P^t(x, .)`; `t = 0` gives the point mass at `x`.
    pub fn power_distribution(&self, x: usize, t: usize) -> Result<FiniteMeasure<T>> {
        self.check_state(x)?;
        let delta = FiniteMeasure::dirac(self.n, x)?;
        Ok(FiniteMeasure::from_raw(self.step_n(delta.probs(), t)))
    }

    /// Pushes an arbitrary measure forward `t` steps.
    pub fn propagate(&self, mu: &FiniteMeasure<T>, t: usize) -> Result<FiniteMeasure<T>> {
        if mu.support() != (0..self.n).collect::<Vec<_>>().as_slice() {
            return domain("measure must live on the chain's state universe");
        }
        Ok(FiniteMeasure::from_raw(self.step_n(mu.probs(), t)))
    }

    /// Dense `P^t`, row-major.
    pub fn power_matrix(&self, t: usize) -> Vec<T> {
        let mut m = identity(self.n);
        for _ in 0..t {
            m = matmul(&m, &self.kernel, self.n);
        }
        m
    }

    /// Cesàro average `(1/t) sum_{s=1..t} P^s(x, .)`.
    pub fn cesaro_distribution(&self, x: usize, t: usize) -> Result<FiniteMeasure<T>> {
        self.check_state(x)?;
        if t == 0 {
            return domain("Cesàro average needs t >= 1");
        }
        let mut v = FiniteMeasure::<T>::dirac(self.n, x)?.probs().to_vec();
        let mut acc = vec![T::zero(); self.n];
        for _ in 0..t {
            v = self.step(&v);
            acc.iter_mut().zip(&v).for_each(|(a, p)| *a = *a + *p);
        }
        let tt = T::from_usize(t).unwrap();
        Ok(FiniteMeasure::from_raw(acc.into_iter().map(|a| a / tt).collect()))
    }

    /// Communicating classes that are closed (the recurrent classes), each
    /// sorted, ordered by smallest member.
    pub fn recurrent_classes(&self) -> Vec<Vec<usize>> {
        let reach = self.reachability();
        let n = self.n;
        let mut classes = Vec::new();
        let mut assigned = vec![false; n];
        for i in 0..n {
            if assigned[i] {
                continue;
            }
            let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
            class.iter().for_each(|&j| assigned[j] = true);
            let closed = (0..n).all(|j| !reach[i][j] || class.contains(&j));
            if closed {
                classes.push(class);
            }
        }
        classes
    }

    /// `reach[i][j]`: j reachable from i in zero or more steps.
    fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.n;
        (0..n)
            .map(|s| {
                let mut seen = vec![false; n];
                let mut stack = vec![s];
                seen[s] = true;
                while let Some(u) = stack.pop() {
                    for v in 0..n {
                        if !seen[v] && self.entry(u, v) > T::zero() {
                            seen[v] = true;
                            stack.push(v);
                        }
                    }
                }
                seen
            })
            .collect()
    }

    /// Period of a communicating class (gcd of cycle lengths).
    pub fn class_period(&self, class: &[usize]) -> usize {
        let n = self.n;
        let mut level = vec![usize::MAX; n];
        level[class[0]] = 0;
        let mut queue = std::collections::VecDeque::from([class[0]]);
        let mut g = 0usize;
        while let Some(u) = queue.pop_front() {
            for &v in class {
                if self.entry(u, v) > T::zero() {
                    if level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    } else {
                        g = gcd(g, (level[u] + 1).abs_diff(level[v]));
                    }
                }
            }
        }
        g.max(1)
    }

    /// Least common multiple of the periods of the recurrent classes.
    pub fn period(&self) -> usize {
        self.recurrent_classes()
            .iter()
            .map(|c| self.class_period(c))
            .fold(1, lcm)
    }

    /// Stationary distribution from the linear system `pi (P - I) = 0`,
    /// `sum pi = 1`, solved directly.
    pub fn invariant_measure(&self) -> Result<FiniteMeasure<T>> {
        let classes = self.recurrent_classes();
        if classes.len() != 1 {
            return Err(Error::NonUniqueInvariant { classes });
        }
        let n = self.n;
        // Row i of the system is column i of (P - I); last row is normalisation.
        let mut a = vec![T::zero(); n * n];
        let mut rhs = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n {
                let pij = self.entry(j, i) - if i == j { T::one() } else { T::zero() };
                a[i * n + j] = pij;
            }
        }
        for j in 0..n {
            a[(n - 1) * n + j] = T::one();
        }
        rhs[n - 1] = T::one();
        let pi = solve_dense(a, rhs, n)?;
        let pi = FiniteMeasure::from_raw(pi);
        let residual = self
            .step(pi.probs())
            .iter()
            .zip(pi.probs())
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max);
        if residual > T::lit(1e-10).max(T::norm_tol() * T::lit(10.0)) {
            return Err(Error::Precondition(format!(
                "invariant measure residual {residual} exceeds tolerance"
            )));
        }
        Ok(pi)
    }

    /// `min_x P^t1(x, A)`.
    pub fn doeblin_alpha(&self, target: &[usize], t1: usize) -> Result<T> {
        self.check_set(target)?;
        if t1 == 0 {
            return domain("doeblin horizon must be positive");
        }
        let pt = self.power_matrix(t1);
        let n = self.n;
        Ok((0..n)
            .map(|x| compensated_sum(target.iter().map(|&y| pt[x * n + y])))
            .fold(T::infinity(), T::min)
            .min(T::one()))
    }

    /// Runs `k` rounds of the splitting `P^t1 mu_{i-1} = alpha nu_i + (1 - alpha) mu_i`
    /// for the two starting states, where `nu_i` is the pushforward conditioned
    /// on `target`.
    pub fn alpha_splitting_decomposition(
        &self,
        x1: usize,
        x2: usize,
        target: &[usize],
        t1: usize,
        k: usize,
    ) -> Result<SplittingTrace<T>> {
        self.check_state(x1)?;
        self.check_state(x2)?;
        if k == 0 {
            return domain("splitting needs at least one round");
        }
        let alpha = self.doeblin_alpha(target, t1)?;
        if alpha <= T::zero() {
            return Err(Error::Precondition(format!(
                "doeblin alpha is zero for target {target:?} at horizon {t1}"
            )));
        }
        let n = self.n;
        let mut current = [
            FiniteMeasure::dirac(n, x1)?.probs().to_vec(),
            FiniteMeasure::dirac(n, x2)?.probs().to_vec(),
        ];
        let mut rounds = Vec::with_capacity(k);
        for _ in 0..k {
            let mut pushforward = Vec::with_capacity(2);
            let mut nu = Vec::with_capacity(2);
            let mut mu = Vec::with_capacity(2);
            let mut target_mass = [T::zero(); 2];
            for j in 0..2 {
                let push = self.step_n(&current[j], t1);
                let mass = compensated_sum(target.iter().map(|&y| push[y]));
                target_mass[j] = mass;
                let nu_j: Vec<T> = (0..n)
                    .map(|y| if target.contains(&y) { push[y] / mass } else { T::zero() })
                    .collect();
                let mu_j: Vec<T> = if alpha >= T::one() {
                    nu_j.clone()
                } else {
                    push.iter()
                        .zip(&nu_j)
                        .map(|(p, v)| (*p - alpha * *v) / (T::one() - alpha))
                        .collect()
                };
                current[j] = mu_j.iter().map(|p| p.max(T::zero())).collect();
                pushforward.push(FiniteMeasure::from_raw(push));
                nu.push(FiniteMeasure::from_raw(nu_j));
                mu.push(FiniteMeasure::from_raw(mu_j));
            }
            rounds.push(SplittingRound {
                t: t1,
                target_mass,
                pushforward: pair(pushforward),
                nu: pair(nu),
                mu: pair(mu),
            });
        }
        let residual_bound = T::lit(2.0) * (T::one() - alpha).powi(k as i32);
        Ok(SplittingTrace {
            alpha,
            starts: [x1, x2],
            target: target.to_vec(),
            rounds,
            residual_bound,
        })
    }

    /// Limits of `P^{mL + r}` as `m -> infinity` for `r = 0..L`, `L` the
    /// period. Each is row-major dense.
    pub fn cyclic_limits(&self) -> Vec<Vec<T>> {
        let n = self.n;
        let period = self.period();
        let mut q = self.power_matrix(period);
        let tol = T::lit(1e-15).max(T::epsilon() * T::lit(4.0));
        let mut last = T::infinity();
        for _ in 0..64 {
            let mut q2 = matmul(&q, &q, n);
            for row in q2.chunks_mut(n) {
                let s = compensated_sum(row.iter().copied());
                row.iter_mut().for_each(|v| *v = *v / s);
            }
            let diff = q2
                .iter()
                .zip(&q)
                .map(|(a, b)| (*a - *b).abs())
                .fold(T::zero(), T::max);
            q = q2;
            if diff <= tol || (diff >= last && diff <= T::lit(1e3) * tol) {
                break;
            }
            last = diff;
        }
        let mut limits = Vec::with_capacity(period);
        let mut shifted = q;
        for _ in 0..period {
            limits.push(shifted.clone());
            shifted = matmul(&shifted, &self.kernel, n);
        }
        limits
    }

    /// Exact values of the lower-bound conditions for the ball `B(z, eps)`
    /// under the chain's metric.
    pub fn exact_condition_report(&self, z: usize, eps: T) -> Result<ExactConditionReport> {
        self.check_state(z)?;
        if !(eps > T::zero()) {
            return domain("ball radius must be positive");
        }
        let n = self.n;
        let ball = self.ball(z, eps);
        let limits = self.cyclic_limits();
        let period = limits.len();
        let mass = |m: &[T], x: usize| -> f64 {
            compensated_sum(ball.iter().map(|&y| m[x * n + y])).to_f64_lossy()
        };
        let profile = |x: usize| -> (f64, f64, f64) {
            let vals: Vec<f64> = limits.iter().map(|m| mass(m, x)).collect();
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let avg = vals.iter().sum::<f64>() / vals.len() as f64;
            (lo, hi, avg)
        };
        let xs: Vec<f64> = (0..n).map(|x| x as f64).collect();
        let zf = z as f64;
        let epsf = eps.to_f64_lossy();

        let mk = |condition: ConditionId, tails: Vec<TailValue>, x_grid: Vec<f64>| {
            let value = tails.iter().map(|t| t.value).fold(f64::INFINITY, f64::min);
            let summary = Summary {
                value,
                ci_low: value,
                ci_high: value,
            };
            let mut notes = vec![format!("ball = states {ball:?}")];
            if period > 1 {
                notes.push(format!(
                    "chain is periodic with period {period}; liminf/limsup taken over the {period} cyclic limits"
                ));
            }
            CriterionReport {
                schema_version: REPORT_SCHEMA_VERSION,
                condition,
                z: zf,
                eps: Some(epsf),
                x_grid,
                t_grid: Vec::new(),
                burn_in: None,
                points: Vec::new(),
                tails,
                summary,
                verdict: exact_verdict(value),
                tolerance: None,
                exact: true,
                caveat: EXACT_CAVEAT.to_string(),
                notes,
                diverged_paths: 0,
            }
        };
        let tail = |x: usize, v: f64| TailValue {
            x: x as f64,
            t: None,
            value: v,
            ci_low: v,
            ci_high: v,
        };
        let c4 = mk(ConditionId::C4, (0..n).map(|x| tail(x, profile(x).0)).collect(), xs.clone());
        let c1 = mk(ConditionId::C1, (0..n).map(|x| tail(x, profile(x).2)).collect(), xs);
        let c2 = mk(ConditionId::C2, vec![tail(z, profile(z).0)], vec![zf]);
        Ok(ExactConditionReport {
            period,
            recurrent_classes: self.recurrent_classes(),
            c1,
            c2,
            c4,
        })
    }

    /// Exact total-variation defect `TV(P^t(x, .), P^t(z, .))` on a grid.
    pub fn tv_defect(&self, z: usize, x_grid: &[usize], t_grid: &[usize], tolerance: f64) -> Result<CriterionReport> {
        self.check_state(z)?;
        x_grid.iter().try_for_each(|&x| self.check_state(x))?;
        if t_grid.is_empty() || x_grid.is_empty() {
            return domain("grids must be nonempty");
        }
        let burn = burn_in_index(t_grid.len());
        let mut points = Vec::new();
        let mut tails = Vec::new();
        for &x in x_grid {
            let mut best: Option<TailValue> = None;
            for (ti, &t) in t_grid.iter().enumerate() {
                let d = tv_finite(&self.power_distribution(x, t)?, &self.power_distribution(z, t)?)?.to_f64_lossy();
                points.push(GridEstimate {
                    x: x as f64,
                    t: t as f64,
                    estimate: d,
                    ci_low: d,
                    ci_high: d,
                });
                if ti >= burn && best.is_none_or(|b| d > b.value) {
                    best = Some(TailValue {
                        x: x as f64,
                        t: Some(t as f64),
                        value: d,
                        ci_low: d,
                        ci_high: d,
                    });
                }
            }
            tails.push(best.expect("nonempty tail"));
        }
        let nearest = tails
            .iter()
            .min_by(|a, b| (a.x - z as f64).abs().total_cmp(&(b.x - z as f64).abs()))
            .copied()
            .unwrap();
        let summary = Summary {
            value: nearest.value,
            ci_low: nearest.value,
            ci_high: nearest.value,
        };
        Ok(CriterionReport {
            schema_version: REPORT_SCHEMA_VERSION,
            condition: ConditionId::TvEc,
            z: z as f64,
            eps: None,
            x_grid: x_grid.iter().map(|&x| x as f64).collect(),
            t_grid: t_grid.iter().map(|&t| t as f64).collect(),
            burn_in: Some(t_grid[burn] as f64),
            points,
            tails,
            summary,
            verdict: defect_verdict(summary, tolerance),
            tolerance: Some(tolerance),
            exact: true,
            caveat: EXACT_CAVEAT.to_string(),
            notes: vec!["defect is the exact total variation distance between rows of P^t".into()],
            diverged_paths: 0,
        })
    }
}

/// Index of the first time in the tail: the second half of the grid.
pub(crate) fn burn_in_index(len: usize) -> usize {
    len / 2
}

fn pair<T>(v: Vec<T>) -> [T; 2] {
    v.try_into().ok().expect("two entries")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SplittingRound<T> {
    pub t: usize,
    /// `P^t mu_{i-1}(A)` for each start; at least alpha.
    pub target_mass: [T; 2],
    pub pushforward: [FiniteMeasure<T>; 2],
    pub nu: [FiniteMeasure<T>; 2],
    pub mu: [FiniteMeasure<T>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SplittingTrace<T> {
    pub alpha: T,
    pub starts: [usize; 2],
    pub target: Vec<usize>,
    pub rounds: Vec<SplittingRound<T>>,
    /// `2 (1 - alpha)^k`.
    pub residual_bound: T,
}

impl<T: Scalar> SplittingTrace<T> {
    /// Largest entrywise violation of the mixture identity over all rounds,
    /// recomputing each pushforward from the chain.
    pub fn reconstruction_error(&self, chain: &FiniteChain<T>) -> T {
        let n = chain.n_states();
        let mut worst = T::zero();
        for (i, round) in self.rounds.iter().enumerate() {
            for j in 0..2 {
                let prev: Vec<T> = if i == 0 {
                    let mut d = vec![T::zero(); n];
                    d[self.starts[j]] = T::one();
                    d
                } else {
                    self.rounds[i - 1].mu[j].probs().to_vec()
                };
                let push = chain.step_n(&prev, round.t);
                for y in 0..n {
                    let mix = self.alpha * round.nu[j].probs()[y] + (T::one() - self.alpha) * round.mu[j].probs()[y];
                    worst = worst.max((mix - push[y]).abs());
                }
            }
        }
        worst
    }

    pub fn horizon(&self) -> usize {
        self.rounds.iter().map(|r| r.t).sum()
    }

    /// Exact `TV(P^h(x1, .), P^h(x2, .))` at the total horizon `h`.
    pub fn horizon_tv(&self, chain: &FiniteChain<T>) -> Result<T> {
        let h = self.horizon();
        tv_finite(
            &chain.power_distribution(self.starts[0], h)?,
            &chain.power_distribution(self.starts[1], h)?,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Exact reports for C1, C2 and C4 on a finite chain.
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactConditionReport {
    pub period: usize,
    pub recurrent_classes: Vec<Vec<usize>>,
    pub c1: CriterionReport,
    pub c2: CriterionReport,
    pub c4: CriterionReport,
}

fn identity<T: Scalar>(n: usize) -> Vec<T> {
    let mut m = vec![T::zero(); n * n];
    (0..n).for_each(|i| m[i * n + i] = T::one());
    m
}

fn matmul<T: Scalar>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == T::zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] = out[i * n + j] + aik * b[k * n + j];
            }
        }
    }
    out
}

/// Gaussian elimination with partial pivoting.
fn solve_dense<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>, n: usize) -> Result<Vec<T>> {
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap())
            .unwrap();
        if a[piv * n + col].abs() <= T::epsilon() {
            return Err(Error::Precondition("singular stationary system".into()));
        }
        if piv != col {
            for j in 0..n {
                a.swap(piv * n + j, col * n + j);
            }
            b.swap(piv, col);
        }
        let d = a[col * n + col];
        for i in col + 1..n {
            let f = a[i * n + col] / d;
            if f == T::zero() {
                continue;
            }
            for j in col..n {
                a[i * n + j] = a[i * n + j] - f * a[col * n + j];
            }
            b[i] = b[i] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let s = compensated_sum((i + 1..n).map(|j| a[i * n + j] * x[j]));
        x[i] = (b[i] - s) / a[i * n + i];
    }
    Ok(x)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_state() -> FiniteChain<f64> {
        FiniteChain::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()
    }

    fn identity2() -> FiniteChain<f64> {
        FiniteChain::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()
    }

    fn cycle2() -> FiniteChain<f64> {
        FiniteChain::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn rejects_bad_kernels() {
        assert!(FiniteChain::new(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(FiniteChain::new(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(FiniteChain::new(vec![vec![1.0]; 2]).is_err());
        assert!(FiniteChain::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn metric_validation() {
        let c = two_state();
        assert!(c.clone().with_metric(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(c.clone().with_metric(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(c.clone().with_metric(vec![vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        let c3 = FiniteChain::new(vec![vec![1.0 / 3.0; 3]; 3]).unwrap();
        let bad = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(c3.with_metric(bad).is_err());
    }

    #[test]
    fn power_distribution_examples() {
        let c = two_state();
        assert_eq!(c.power_distribution(1, 0).unwrap().probs(), &[0.0, 1.0]);
        assert_eq!(c.power_distribution(0, 1).unwrap().probs(), &[0.9, 0.1]);
        let p2 = c.power_distribution(0, 2).unwrap();
        assert_abs_diff_eq!(p2.probs()[0], 0.83, epsilon = 1e-15);
        assert_abs_diff_eq!(p2.probs()[1], 0.17, epsilon = 1e-15);
        assert!(c.power_distribution(2, 1).is_err());
    }

    #[test]
    fn invariant_measure_examples() {
        let pi = two_state().invariant_measure().unwrap();
        assert_abs_diff_eq!(pi.probs()[0], 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pi.probs()[1], 1.0 / 3.0, epsilon = 1e-14);

        match identity2().invariant_measure() {
            Err(Error::NonUniqueInvariant { classes }) => assert_eq!(classes, vec![vec![0], vec![1]]),
            other => panic!("expected non-uniqueness, got {other:?}"),
        }

        let ds = FiniteChain::new(vec![
            vec![0.2, 0.3, 0.5],
            vec![0.5, 0.2, 0.3],
            vec![0.3, 0.5, 0.2],
        ])
        .unwrap();
        for p in ds.invariant_measure().unwrap().probs() {
            assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn invariant_measure_with_transient_state() {
        // State 2 is transient and feeds the ergodic pair.
        let c = FiniteChain::new(vec![vec![0.9, 0.1, 0.0], vec![0.2, 0.8, 0.0], vec![0.5, 0.0, 0.5]]).unwrap();
        let pi = c.invariant_measure().unwrap();
        assert_abs_diff_eq!(pi.probs()[2], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pi.probs()[0], 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn cesaro_examples() {
        let c = two_state();
        assert_eq!(c.cesaro_distribution(0, 1).unwrap(), c.power_distribution(0, 1).unwrap());
        let q2 = c.cesaro_distribution(0, 2).unwrap();
        assert_abs_diff_eq!(q2.probs()[0], 0.865, epsilon = 1e-15);
        assert_abs_diff_eq!(q2.probs()[1], 0.135, epsilon = 1e-15);
        assert!(c.cesaro_distribution(0, 0).is_err());
        // Averaging from the invariant law leaves it unchanged.
        let pi = c.invariant_measure().unwrap();
        let moved = c.propagate(&pi, 7).unwrap();
        assert_abs_diff_eq!(moved.probs()[0], pi.probs()[0], epsilon = 1e-14);
    }

    #[test]
    fn doeblin_alpha_examples() {
        let c = two_state();
        assert_abs_diff_eq!(c.doeblin_alpha(&[0, 1], 1).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.doeblin_alpha(&[0], 1).unwrap(), 0.2);
        assert_eq!(identity2().doeblin_alpha(&[0], 1).unwrap(), 0.0);
        assert!(c.doeblin_alpha(&[], 1).is_err());
    }

    #[test]
    fn splitting_examples() {
        let c = two_state();
        let tr = c.alpha_splitting_decomposition(0, 1, &[0], 1, 5).unwrap();
        assert_abs_diff_eq!(tr.alpha, 0.2);
        assert_abs_diff_eq!(tr.residual_bound, 0.65536, epsilon = 1e-12);
        assert!(tr.reconstruction_error(&c) < 1e-10);
        assert!(tr.horizon_tv(&c).unwrap() <= tr.residual_bound);

        let same = c.alpha_splitting_decomposition(1, 1, &[0], 1, 4).unwrap();
        for r in &same.rounds {
            assert_eq!(r.nu[0], r.nu[1]);
            assert_eq!(r.mu[0], r.mu[1]);
        }
        assert_eq!(same.horizon_tv(&c).unwrap(), 0.0);

        assert!(matches!(
            identity2().alpha_splitting_decomposition(0, 1, &[0], 1, 3),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn two_state_rows_contract_at_rate_point_seven() {
        // Eigenvalues 1 and 0.7: the row difference of P^k is 0.7^k.
        let c = two_state();
        for k in 0..=50 {
            let tv = tv_finite(&c.power_distribution(0, k).unwrap(), &c.power_distribution(1, k).unwrap()).unwrap();
            assert_abs_diff_eq!(tv, 0.7f64.powi(k as i32), epsilon = 1e-12);
            assert!(tv <= 0.8f64.powi(k as i32) + 1e-15);
        }
    }

    #[test]
    fn periods_and_classes() {
        assert_eq!(cycle2().period(), 2);
        assert_eq!(two_state().period(), 1);
        assert_eq!(identity2().recurrent_classes().len(), 2);
    }

    #[test]
    fn exact_report_ergodic() {
        let r = two_state().exact_condition_report(0, 0.5).unwrap();
        for rep in [&r.c1, &r.c2, &r.c4] {
            assert_abs_diff_eq!(rep.summary.value, 2.0 / 3.0, epsilon = 1e-12);
            assert_eq!(rep.verdict, crate::criteria::report::Verdict::Supported);
            rep.validate().unwrap();
        }
    }

    #[test]
    fn exact_report_identity_and_transient() {
        let r = identity2().exact_condition_report(0, 0.5).unwrap();
        assert_eq!(r.c4.summary.value, 0.0);
        assert_eq!(r.c4.verdict, crate::criteria::report::Verdict::NotSupported);

        let c = FiniteChain::new(vec![vec![0.9, 0.1, 0.0], vec![0.2, 0.8, 0.0], vec![0.5, 0.0, 0.5]]).unwrap();
        let r = c.exact_condition_report(2, 0.5).unwrap();
        assert_abs_diff_eq!(r.c2.summary.value, 0.0, epsilon = 1e-12);
        assert_eq!(r.c2.verdict, crate::criteria::report::Verdict::NotSupported);
    }

    #[test]
    fn exact_report_periodic() {
        let r = cycle2().exact_condition_report(0, 0.5).unwrap();
        assert_eq!(r.period, 2);
        assert_abs_diff_eq!(r.c1.summary.value, 0.5, epsilon = 1e-12);
        assert_eq!(r.c2.summary.value, 0.0);
        assert_eq!(r.c4.summary.value, 0.0);
    }

    #[test]
    fn exact_tv_defect() {
        let r = two_state().tv_defect(0, &[1], &[1, 10, 40, 80], 1e-6).unwrap();
        assert!(r.summary.value < 1e-6);
        r.validate().unwrap();
        let r = identity2().tv_defect(0, &[1], &[1, 5, 10], 1e-6).unwrap();
        assert_eq!(r.summary.value, 1.0);
        assert!(r.points.iter().all(|p| p.estimate == 1.0));
    }

    #[test]
    fn json_and_csv_inputs() {
        let c = FiniteChain::<f64>::from_json(r#"{"n":2,"rows":[[0.9,0.1],[0.2,0.8]],"labels":["a","b"]}"#).unwrap();
        assert_eq!(c.labels().unwrap()[1], "b");
        assert!(FiniteChain::<f64>::from_json(r#"{"n":2,"rows":[[1]]}"#).is_err());
        assert!(FiniteChain::<f64>::from_json(r#"{"n":1,"rows":[[1]],"extra":1}"#).is_err());
        let d = FiniteChain::<f64>::from_csv("0.9, 0.1\n0.2, 0.8\n".as_bytes()).unwrap();
        assert_eq!(d, two_state());
        let back = FiniteChain::from_spec(c.to_spec()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn splitting_trace_serializes() {
        let tr = two_state().alpha_splitting_decomposition(0, 1, &[0], 1, 2).unwrap();
        let s = tr.to_json().unwrap();
        let back: SplittingTrace<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, tr);
    }
}
