//! Second-moment decay around the stable equilibrium of the Poisson cubic
//! model.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::sde_sim::poisson::PoissonCubicModel;
use crate::sde_sim::sampling::{sample_paths, StepControl};
use crate::stats::Moments;

/// `(3a + 4)^2 / (4b) + 3M^2 + 3a/b + a^3/b`.
pub fn moment_constant(a: f64, b: f64, big_m: f64) -> f64 {
    (3.0 * a + 4.0).powi(2) / (4.0 * b) + 3.0 * big_m * big_m + 3.0 * a / b + a.powi(3) / b
}

/// `|x - z|^2 e^{-t} + C`, the Gronwall bound on `E|X_t^x - z|^2`.
pub fn second_moment_bound(x: f64, z: f64, t: f64, constant: f64) -> f64 {
    (x - z).powi(2) * (-t).exp() + constant
}

/// Smallest `r` with `C (1 + d^2) / r^2 <= 1/2`, where `d` bounds `|x - z|`
/// over the starting points of interest.
pub fn doeblin_radius(constant: f64, max_start_distance: f64) -> f64 {
    (2.0 * constant * (1.0 + max_start_distance * max_start_distance)).sqrt()
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub e_sq: f64,
    pub se_sq: f64,
    pub bound: f64,
    pub fitted: f64,
}

#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentDecayFit {
    pub x: f64,
    pub z: f64,
    pub constant: f64,
    pub c_fit: f64,
    pub gamma_fit: f64,
    pub rows: Vec<MomentRow>,
    /// Every empirical moment is at most the bound plus three standard errors.
    pub dominated: bool,
    pub diverged_paths: u64,
}

/// Least-squares fit of `c (v0 e^{-gamma t} + 1)`; for fixed `gamma` the best
/// `c` is closed form, `gamma` is searched on a log grid then refined by
/// golden section.
pub fn fit_decay(ts: &[f64], ys: &[f64], v0: f64) -> (f64, f64) {
    let best_c = |g: f64| {
        let basis: Vec<f64> = ts.iter().map(|t| v0 * (-g * t).exp() + 1.0).collect();
        let num: f64 = basis.iter().zip(ys).map(|(b, y)| b * y).sum();
        let den: f64 = basis.iter().map(|b| b * b).sum();
        let c = num / den;
        let sse: f64 = basis.iter().zip(ys).map(|(b, y)| (c * b - y).powi(2)).sum();
        (c, sse)
    };
    let grid: Vec<f64> = (0..=400).map(|i| 10f64.powf(-3.0 + 5.0 * i as f64 / 400.0)).collect();
    let k = (0..grid.len())
        .min_by(|&i, &j| best_c(grid[i]).1.total_cmp(&best_c(grid[j]).1))
        .unwrap_or(0);
    let (mut lo, mut hi) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if best_c(m1).1 <= best_c(m2).1 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let g = 0.5 * (lo + hi);
    (best_c(g).0, g)
}

/// Estimates `E|X_t^x - z|^2` on `t_grid`, compares it with
/// [`second_moment_bound`] and fits `(c, gamma)` for reporting.
pub fn moment_decay_fit(
    model: &PoissonCubicModel<f64>,
    z: f64,
    x: f64,
    t_grid: &[f64],
    n: usize,
    master_seed: u64,
) -> Result<MomentDecayFit> {
    if t_grid.len() < 2 || t_grid[0] <= 0.0 || t_grid[t_grid.len() - 1] < 10.0 * t_grid[0] {
        return domain("time grid must be positive and span at least one decade");
    }
    let paths = sample_paths(model, x, t_grid, n, master_seed, &StepControl::default())?;
    let constant = moment_constant(model.a, model.b, model.big_m);
    let stats: Vec<Moments> = (0..t_grid.len())
        .map(|k| Moments::from_slice(&paths.iter().map(|p| (p.values[k] - z).powi(2)).collect::<Vec<_>>()))
        .collect();
    let ys: Vec<f64> = stats.iter().map(|m| m.mean()).collect();
    let v0 = (x - z).powi(2);
    let (c_fit, gamma_fit) = fit_decay(t_grid, &ys, v0);
    let rows: Vec<MomentRow> = t_grid
        .iter()
        .zip(&stats)
        .map(|(&t, m)| MomentRow {
            t,
            e_sq: m.mean(),
            se_sq: m.std_error(),
            bound: second_moment_bound(x, z, t, constant),
            fitted: c_fit * (v0 * (-gamma_fit * t).exp() + 1.0),
        })
        .collect();
    let dominated = rows.iter().all(|r| r.e_sq <= r.bound + 3.0 * r.se_sq);
    Ok(MomentDecayFit {
        x,
        z,
        constant,
        c_fit,
        gamma_fit,
        rows,
        dominated,
        diverged_paths: paths.iter().filter(|p| p.diverged).count() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_example() {
        assert_abs_diff_eq!(moment_constant(1.0, 1.0, 1.25), 20.9375, epsilon = 1e-12);
        assert_abs_diff_eq!(second_moment_bound(5.0, 1.0, 0.0, 20.9375), 36.9375, epsilon = 1e-12);
        assert_eq!(second_moment_bound(1.0, 1.0, 3.0, 20.9375), 20.9375);
    }

    #[test]
    fn doeblin_radius_half_mass() {
        let r = doeblin_radius(20.9375, 0.0);
        assert_abs_diff_eq!(20.9375 / (r * r), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn fit_recovers_synthetic_curve() {
        let ts: Vec<f64> = vec![0.1, 0.3, 1.0, 2.0, 5.0, 10.0];
        let ys: Vec<f64> = ts.iter().map(|t| 0.4 * (9.0 * (-0.7 * t).exp() + 1.0)).collect();
        let (c, g) = fit_decay(&ts, &ys, 9.0);
        assert_abs_diff_eq!(c, 0.4, epsilon = 1e-6);
        assert_abs_diff_eq!(g, 0.7, epsilon = 1e-5);
    }

    #[test]
    fn grid_must_span_a_decade() {
        let m = PoissonCubicModel::new(
            1.0,
            1.0,
            crate::sde_sim::poisson::SigmaSpec::Constant { c: 1.0 },
            0.5,
            1.5,
            0.0,
        )
        .unwrap();
        assert!(moment_decay_fit(&m, 1.0, 2.0, &[1.0, 5.0], 10, 0).is_err());
        let r = moment_decay_fit(&m, 1.0, 1.0, &[0.5, 5.0], 200, 0).unwrap();
        assert!(r.dominated);
        assert!(r.rows.iter().all(|row| row.bound == moment_constant(1.0, 1.0, 1.5)));
    }
}
