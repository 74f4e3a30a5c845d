//! Ensemble statistics with standard errors, and the empirical
//! validation layer tying simulation to analytics.
//!
//! Estimators never interpolate: requested times must lie on the
//! ensemble grid. Reductions over paths are plain associative sums, so
//! parallel and serial runs agree; the determinism contract is inherited
//! from the sampling layer.
//!
//! Power-law tails are validated against quadrature series, not against
//! Monte-Carlo runs: the variance of a lag-covariance estimator does not
//! decay with the lag, so at large lags the noise swamps a `t^{2H-2}`
//! signal. The Monte-Carlo layer checks fixed moderate lags only.

use crate::analytics::{self, OuSpec};
use crate::quadrature::QuadConfig;
use crate::simulate::{self, EnsembleProcess, Grid, PathEnsemble};
use crate::{Error, Result};

/// A Monte-Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CovEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
}

impl CovEstimate {
    /// Whether `target` lies within `k` standard errors.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

pub(crate) fn mean_and_se(values: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1).max(1) as f64;
    (mean, (var / n as f64).sqrt(), n)
}

fn require_paths(e: &PathEnsemble) -> Result<()> {
    if e.n_paths < 30 {
        return Err(Error::InsufficientData(format!(
            "need at least 30 paths for standard errors, got {}",
            e.n_paths
        )));
    }
    Ok(())
}

/// Sample covariance `E(X_s X_t)` across paths, with the standard error
/// of the per-path products.
pub fn estimate_cov(e: &PathEnsemble, s: f64, t: f64) -> Result<CovEstimate> {
    require_paths(e)?;
    let i = e.grid.index_of(s)?;
    let j = e.grid.index_of(t)?;
    let (value, std_error, n_paths) =
        mean_and_se((0..e.n_paths).map(|p| e.path(p)[i] * e.path(p)[j]));
    Ok(CovEstimate { value, std_error, n_paths })
}

/// Sample `p`-th moment at time `t` with standard error.
pub fn estimate_moment(e: &PathEnsemble, t: f64, p: u32) -> Result<CovEstimate> {
    require_paths(e)?;
    let i = e.grid.index_of(t)?;
    let (value, std_error, n_paths) =
        mean_and_se((0..e.n_paths).map(|k| e.path(k)[i].powi(p as i32)));
    Ok(CovEstimate { value, std_error, n_paths })
}

/// Functional applied along paths in the ergodic time average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeAverage {
    Identity,
    Square,
}

/// Outcome of the empirical ergodicity check.
#[derive(Debug, Clone, Copy)]
pub struct ErgodicityCheck {
    /// Mean over paths of the per-path time averages.
    pub time_avg_mean: f64,
    /// The ensemble expectation the averages must approach.
    pub expected: f64,
    pub z_score: f64,
    /// Set when the paths carry no variation (constant paths).
    pub degenerate: bool,
}

/// Compare per-path trapezoidal time averages of `f(Z)` against the
/// ensemble expectation. Needs a stationary ensemble spanning at least
/// `50/θ`.
pub fn ergodicity_check(
    e: &PathEnsemble,
    f: TimeAverage,
    q: &QuadConfig,
) -> Result<ErgodicityCheck> {
    require_paths(e)?;
    let EnsembleProcess::StationaryOu { ou, .. } = &e.process else {
        return Err(Error::Domain(
            "ergodicity check needs a stationary ensemble (burned-in paths)".into(),
        ));
    };
    let span = e.grid.t1 - e.grid.t0;
    if span * ou.theta < 50.0 {
        return Err(Error::Domain(format!(
            "horizon {span} too short; ergodic averages need T ≥ 50/θ"
        )));
    }
    let expected = match f {
        TimeAverage::Identity => 0.0,
        TimeAverage::Square => analytics::stationary_variance(ou, q)?,
    };
    let n = e.grid.n;
    let steps: Vec<f64> = e.grid.points.windows(2).map(|w| w[1] - w[0]).collect();
    let averages = (0..e.n_paths).map(|i| {
        let path = e.path(i);
        let g = |v: f64| match f {
            TimeAverage::Identity => v,
            TimeAverage::Square => v * v,
        };
        let mut acc = 0.0;
        for k in 1..n {
            acc += 0.5 * steps[k - 1] * (g(path[k - 1]) + g(path[k]));
        }
        acc / span
    });
    let (time_avg_mean, se, _) = mean_and_se(averages);
    if se < 1e-150 {
        return Ok(ErgodicityCheck { time_avg_mean, expected, z_score: 0.0, degenerate: true });
    }
    Ok(ErgodicityCheck {
        time_avg_mean,
        expected,
        z_score: (time_avg_mean - expected) / se,
        degenerate: false,
    })
}

/// One row of a decay study.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DecayRow {
    /// The lag actually used (snapped onto the simulation grid).
    pub lag: f64,
    pub value: f64,
    pub std_error: f64,
    /// Quadrature value of the stationary auto-covariance at `lag`.
    pub analytic: f64,
}

/// Simulation budget of a [`decay_study`].
#[derive(Debug, Clone, Copy)]
pub struct DecayStudyConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Grid points across `[0, max lag]`.
    pub grid_points: usize,
    /// Burn-in; `None` means the `20/θ` default.
    pub burn_in: Option<f64>,
}

/// Estimate lag covariances of the stationary solution and pair them
/// with their quadrature values. Lags are snapped to the nearest grid
/// point (reported in the row); the estimator never interpolates.
pub fn decay_study(
    ou: &OuSpec,
    lags: &[f64],
    cfg: &DecayStudyConfig,
    q: &QuadConfig,
) -> Result<Vec<DecayRow>> {
    if lags.is_empty() {
        return Err(Error::Domain("decay study needs at least one lag".into()));
    }
    let max_lag = lags.iter().cloned().fold(0.0f64, f64::max);
    if max_lag <= 0.0 {
        return Err(Error::Domain("lags must contain a positive entry".into()));
    }
    let grid = Grid::uniform(0.0, max_lag, cfg.grid_points)?;
    let ens = simulate::stationary_path(ou, &grid, cfg.n_paths, cfg.seed, cfg.burn_in, q)?;
    let mut rows = Vec::with_capacity(lags.len());
    for &lag in lags {
        let idx = ((lag / grid.dt()).round() as usize).min(grid.n - 1);
        let snapped = grid.points[idx];
        let est = estimate_cov(&ens, grid.points[0], snapped)?;
        let analytic = analytics::stationary_autocov(ou, snapped, q)?;
        rows.push(DecayRow {
            lag: snapped,
            value: est.value,
            std_error: est.std_error,
            analytic,
        });
    }
    Ok(rows)
}
