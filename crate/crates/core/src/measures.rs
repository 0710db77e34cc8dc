//! Probability measures on finite state sets and on the real line, the
//! distances used between them, and Lipschitz test functions.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::scalar::{compensated_sum, Scalar};
use crate::stats::wilson_interval;

/// A probability vector over an ordered set of state indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FiniteMeasure<T> {
    support: Vec<usize>,
    probs: Vec<T>,
}

impl<T: Scalar> FiniteMeasure<T> {
    pub fn new(support: Vec<usize>, probs: Vec<T>) -> Result<Self> {
        if support.len() != probs.len() {
            return domain(format!(
                "support has {} states but {} probabilities",
                support.len(),
                probs.len()
            ));
        }
        if support.is_empty() {
            return domain("finite measure needs at least one state");
        }
        let mut seen = support.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return domain("support indices must be distinct");
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= T::zero())) {
            return domain(format!("negative or non-finite probability {p}"));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - T::one()).abs() > T::norm_tol() {
            return domain(format!("probabilities sum to {total}, not 1"));
        }
        Ok(Self { support, probs })
    }

    /// Measure on the states `0..probs.len()`.
    pub fn on_states(probs: Vec<T>) -> Result<Self> {
        Self::new((0..probs.len()).collect(), probs)
    }

    /// Point mass at `x` within the universe `0..n`.
    pub fn dirac(n: usize, x: usize) -> Result<Self> {
        if x >= n {
            return domain(format!("state {x} outside 0..{n}"));
        }
        let mut probs = vec![T::zero(); n];
        probs[x] = T::one();
        Ok(Self {
            support: (0..n).collect(),
            probs,
        })
    }

    /// Builds from a vector that is only approximately normalised, e.g. the
    /// product of a row vector with a stochastic matrix. Entries are clamped
    /// at zero; no renormalisation is applied.
    pub(crate) fn from_raw(probs: Vec<T>) -> Self {
        Self {
            support: (0..probs.len()).collect(),
            probs: probs.into_iter().map(|p| p.max(T::zero())).collect(),
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob_of(&self, state: usize) -> T {
        self.support
            .iter()
            .position(|&s| s == state)
            .map_or(T::zero(), |i| self.probs[i])
    }

    /// Mass of a set of states.
    pub fn mass(&self, set: &[usize]) -> T {
        compensated_sum(
            self.support
                .iter()
                .zip(&self.probs)
                .filter(|(s, _)| set.contains(s))
                .map(|(_, p)| *p),
        )
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["state", "prob"])?;
        for (s, p) in self.support.iter().zip(&self.probs) {
            wtr.write_record([s.to_string(), format!("{p:.16e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut support = Vec::new();
        let mut probs = Vec::new();
        for rec in rdr.deserialize::<(usize, f64)>() {
            let (s, p) = rec?;
            support.push(s);
            probs.push(T::lit(p));
        }
        Self::new(support, probs)
    }
}

/// Total variation distance `(1/2) sum |mu_i - nu_i|` between two measures on
/// the same state universe.
pub fn tv_finite<T: Scalar>(mu: &FiniteMeasure<T>, nu: &FiniteMeasure<T>) -> Result<T> {
    if mu.support != nu.support {
        return domain("total variation needs measures on the same state universe");
    }
    let l1 = compensated_sum(mu.probs.iter().zip(&nu.probs).map(|(a, b)| (*a - *b).abs()));
    Ok((T::lit(0.5) * l1).min(T::one()))
}

/// Weighted sample cloud on the real line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EmpiricalMeasure<T> {
    samples: Vec<T>,
    weights: Option<Vec<T>>,
}

impl<T: Scalar> EmpiricalMeasure<T> {
    pub fn new(samples: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return domain("empirical measure needs at least one sample");
        }
        Ok(Self {
            samples,
            weights: None,
        })
    }

    pub fn with_weights(samples: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return domain("empirical measure needs at least one sample");
        }
        if weights.len() != samples.len() {
            return domain("one weight per sample required");
        }
        if weights.iter().any(|w| !(*w >= T::zero())) {
            return domain("weights must be nonnegative");
        }
        let total = compensated_sum(weights.iter().copied());
        if (total - T::one()).abs() > T::norm_tol() {
            return domain(format!("weights sum to {total}, not 1"));
        }
        Ok(Self {
            samples,
            weights: Some(weights),
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn weights(&self) -> Option<&[T]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.is_none()
    }

    pub fn weight(&self, i: usize) -> T {
        match &self.weights {
            Some(w) => w[i],
            None => T::one() / T::from_usize(self.samples.len()).unwrap(),
        }
    }

    /// Kish effective sample size; equals the sample count for uniform weights.
    pub fn effective_size(&self) -> f64 {
        match &self.weights {
            None => self.samples.len() as f64,
            Some(w) => {
                let s2: f64 = w.iter().map(|x| x.to_f64_lossy().powi(2)).sum();
                if s2 > 0.0 {
                    1.0 / s2
                } else {
                    0.0
                }
            }
        }
    }

    /// Pushforward under `s -> s + c`.
    pub fn translate(&self, c: T) -> Self {
        Self {
            samples: self.samples.iter().map(|s| *s + c).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Weighted mass of samples satisfying `pred`.
    pub fn mass_where(&self, pred: impl Fn(T) -> bool) -> T {
        compensated_sum(
            self.samples
                .iter()
                .enumerate()
                .filter(|(_, s)| pred(**s))
                .map(|(i, _)| self.weight(i)),
        )
    }

    fn sorted_atoms(&self) -> Vec<(T, T)> {
        let mut atoms: Vec<(T, T)> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, self.weight(i)))
            .collect();
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        atoms
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["sample", "weight"])?;
        for (i, s) in self.samples.iter().enumerate() {
            wtr.write_record([format!("{s:.16e}"), format!("{:.16e}", self.weight(i))])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut samples = Vec::new();
        let mut weights = Vec::new();
        for rec in rdr.deserialize::<(f64, f64)>() {
            let (s, w) = rec?;
            samples.push(T::lit(s));
            weights.push(T::lit(w));
        }
        Self::with_weights(samples, weights)
    }
}

/// 1-Wasserstein distance between two measures on the line, computed as the
/// L1 distance between their quantile functions. For uniform weights and
/// equal sample counts this is the mean absolute difference of order
/// statistics.
pub fn w1_empirical_1d<T: Scalar>(mu: &EmpiricalMeasure<T>, nu: &EmpiricalMeasure<T>) -> Result<T> {
    if mu.is_empty() || nu.is_empty() {
        return domain("W1 needs nonempty measures");
    }
    if mu.samples.iter().chain(&nu.samples).any(|s| !s.is_finite()) {
        return domain("W1 needs finite samples");
    }
    if mu.is_uniform() && nu.is_uniform() && mu.len() == nu.len() {
        let mut a = mu.samples.clone();
        let mut b = nu.samples.clone();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let n = T::from_usize(a.len()).unwrap();
        return Ok(compensated_sum(a.iter().zip(&b).map(|(x, y)| (*x - *y).abs())) / n);
    }
    // Merge the two cumulative mass sequences.
    let a = mu.sorted_atoms();
    let b = nu.sorted_atoms();
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut acc = Vec::with_capacity(a.len() + b.len());
    while i < a.len() && j < b.len() {
        let step = ra.min(rb);
        acc.push(step * (a[i].0 - b[j].0).abs());
        ra = ra - step;
        rb = rb - step;
        if ra <= T::zero() {
            i += 1;
            if i < a.len() {
                ra = a[i].1;
            }
        }
        if rb <= T::zero() {
            j += 1;
            if j < b.len() {
                rb = b[j].1;
            }
        }
    }
    Ok(compensated_sum(acc))
}

/// Bootstrap standard error of [`w1_empirical_1d`] for two uniform samples:
/// both samples are resampled with replacement `reps` times from a seeded
/// stream and the spread of the recomputed distances is returned.
pub fn w1_bootstrap_se(mu: &EmpiricalMeasure<f64>, nu: &EmpiricalMeasure<f64>, reps: usize, seed: u64) -> Result<f64> {
    use rand::{Rng, SeedableRng};
    if reps < 2 {
        return domain("bootstrap needs at least two replicates");
    }
    if !(mu.is_uniform() && nu.is_uniform()) {
        return domain("bootstrap needs unweighted samples");
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut resample = |m: &EmpiricalMeasure<f64>| {
        let n = m.len();
        let v: Vec<f64> = (0..n).map(|_| m.samples[rng.random_range(0..n)]).collect();
        EmpiricalMeasure::new(v)
    };
    let mut stats = crate::stats::Moments::default();
    for _ in 0..reps {
        let a = resample(mu)?;
        let b = resample(nu)?;
        stats.push(w1_empirical_1d(&a, &b)?);
    }
    Ok(stats.variance().sqrt())
}

/// Bin edges, given explicitly or as a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, bound = "T: Scalar")]
pub enum BinEdges<T> {
    Explicit(Vec<T>),
    Uniform { min: T, max: T, count: usize },
}

impl<T: Scalar> BinEdges<T> {
    pub fn edges(&self) -> Result<Vec<T>> {
        let edges = match self {
            BinEdges::Explicit(e) => e.clone(),
            BinEdges::Uniform { min, max, count } => {
                if *count == 0 || !(max > min) {
                    return domain("uniform bins need count >= 1 and max > min");
                }
                let n = T::from_usize(*count).unwrap();
                (0..=*count)
                    .map(|i| *min + (*max - *min) * T::from_usize(i).unwrap() / n)
                    .collect()
            }
        };
        if edges.len() < 2 {
            return domain("at least two bin edges required");
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("bin edges must be strictly increasing");
        }
        Ok(edges)
    }
}

/// Bin masses with one overflow bin on each side: index 0 collects samples
/// below the first edge, the last index samples above the last edge. Inner
/// bins are `[e_i, e_{i+1})`, with the top edge included in the last one.
fn bin_masses<T: Scalar>(mu: &EmpiricalMeasure<T>, edges: &[T]) -> Result<Vec<T>> {
    let k = edges.len() - 1;
    let mut mass = vec![T::zero(); k + 2];
    let last = edges[k];
    for (i, s) in mu.samples.iter().enumerate() {
        if s.is_nan() {
            return domain("cannot bin a NaN sample");
        }
        let idx = if *s < edges[0] {
            0
        } else if *s > last {
            k + 1
        } else if *s == last {
            k
        } else {
            edges.partition_point(|e| e <= s)
        };
        mass[idx] = mass[idx] + mu.weight(i);
    }
    Ok(mass)
}

/// Half L1 distance between the bin-mass vectors of two sample clouds.
/// A lower bound of their total variation distance that tightens as the bins
/// refine.
pub fn tv_binned<T: Scalar>(
    mu: &EmpiricalMeasure<T>,
    nu: &EmpiricalMeasure<T>,
    bins: &BinEdges<T>,
) -> Result<T> {
    let edges = bins.edges()?;
    let a = bin_masses(mu, &edges)?;
    let b = bin_masses(nu, &edges)?;
    let l1 = compensated_sum(a.iter().zip(&b).map(|(x, y)| (*x - *y).abs()));
    Ok((T::lit(0.5) * l1).min(T::one()))
}

#[derive(Clone)]
pub enum TestKind<T> {
    Hat { z: T, eps: T },
    Custom(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: fmt::Debug> fmt::Debug for TestKind<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestKind::Hat { z, eps } => f.debug_struct("Hat").field("z", z).field("eps", eps).finish(),
            TestKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Bounded Lipschitz test function.
#[derive(Debug, Clone)]
pub struct TestFunction<T> {
    kind: TestKind<T>,
    sup_norm: T,
    lip_const: T,
}

impl<T: Scalar> TestFunction<T> {
    /// A user function with declared bounds. Evaluations are clamped to
    /// `[-sup_norm, sup_norm]`.
    pub fn custom(f: impl Fn(T) -> T + Send + Sync + 'static, sup_norm: T, lip_const: T) -> Result<Self> {
        if !(sup_norm > T::zero()) || !(lip_const >= T::zero()) {
            return domain("custom test function needs sup_norm > 0 and lip_const >= 0");
        }
        Ok(Self {
            kind: TestKind::Custom(Arc::new(f)),
            sup_norm,
            lip_const,
        })
    }

    pub fn kind(&self) -> &TestKind<T> {
        &self.kind
    }

    pub fn sup_norm(&self) -> T {
        self.sup_norm
    }

    pub fn lip_const(&self) -> T {
        self.lip_const
    }

    pub fn eval(&self, x: T) -> T {
        match &self.kind {
            TestKind::Hat { z, eps } => (T::one() - (x - *z).abs() / *eps).max(T::zero()),
            TestKind::Custom(f) => f(x).max(-self.sup_norm).min(self.sup_norm),
        }
    }
}

/// `f(x) = max(0, 1 - |x - z| / eps)`, sandwiched between
/// `1/2 * 1_{B(z, eps/2)}` and `1_{B(z, eps)}`.
pub fn hat_function<T: Scalar>(z: T, eps: T) -> Result<TestFunction<T>> {
    if !(eps > T::zero()) {
        return domain(format!("hat radius must be positive, got {eps}"));
    }
    Ok(TestFunction {
        kind: TestKind::Hat { z, eps },
        sup_norm: T::one(),
        lip_const: T::one() / eps,
    })
}

/// Estimate of a ball probability with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitEstimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Weighted fraction of samples with `|s - z| < eps`, with a Wilson interval
/// at `confidence`.
pub fn ball_hit_fraction<T: Scalar>(
    mu: &EmpiricalMeasure<T>,
    z: T,
    eps: T,
    confidence: f64,
) -> Result<HitEstimate> {
    if !(eps > T::zero()) {
        return domain("ball radius must be positive");
    }
    ball_hit_fraction_by(mu, |s| (s - z).abs() < eps, confidence)
}

/// As [`ball_hit_fraction`] with an arbitrary membership predicate, for
/// state spaces with a non-Euclidean metric.
pub fn ball_hit_fraction_by<T: Scalar>(
    mu: &EmpiricalMeasure<T>,
    inside: impl Fn(T) -> bool,
    confidence: f64,
) -> Result<HitEstimate> {
    if mu.is_empty() {
        return domain("ball hit fraction of an empty measure");
    }
    let p = mu.mass_where(inside).to_f64_lossy().clamp(0.0, 1.0);
    let (ci_low, ci_high) = wilson_interval(p, mu.effective_size(), confidence);
    Ok(HitEstimate {
        estimate: p,
        ci_low,
        ci_high,
    })
}

/// Integration of a test function against a measure. Finite measures place
/// state `i` at the real point `i`.
pub trait Expectation<T: Scalar> {
    fn expectation(&self, f: &TestFunction<T>) -> T;
}

impl<T: Scalar> Expectation<T> for EmpiricalMeasure<T> {
    fn expectation(&self, f: &TestFunction<T>) -> T {
        compensated_sum(
            self.samples
                .iter()
                .enumerate()
                .map(|(i, s)| self.weight(i) * f.eval(*s)),
        )
    }
}

impl<T: Scalar> Expectation<T> for FiniteMeasure<T> {
    fn expectation(&self, f: &TestFunction<T>) -> T {
        compensated_sum(
            self.support
                .iter()
                .zip(&self.probs)
                .map(|(s, p)| *p * f.eval(T::from_usize(*s).unwrap())),
        )
    }
}

impl From<csv::IntoInnerError<csv::Writer<Vec<u8>>>> for Error {
    fn from(e: csv::IntoInnerError<csv::Writer<Vec<u8>>>) -> Self {
        Error::Io(std::io::Error::other(e.to_string()))
    }
}
