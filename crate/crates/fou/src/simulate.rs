//! Exact-in-law Gaussian path generation and OU path construction.
//!
//! Drivers are sampled exactly at the grid points: fBm on uniform grids
//! from 0 through circulant embedding of the increment covariance,
//! everything else (subfBm, bifBm, the second-kind noise, non-uniform
//! grids) through dense factorization of the covariance matrix with an
//! escalating-jitter Cholesky. OU paths are then built pathwise from the
//! integration-by-parts representation
//!
//! ```text
//! X_t = G_t - θ e^{-θt} ∫_0^t e^{θr} G_r dr,
//! ```
//!
//! with the integral accumulated by the trapezoidal rule in a rescaled
//! recurrence that never exponentiates `θt` (stable for arbitrarily long
//! horizons).
//!
//! Reproducibility contract: ensembles are a pure function of
//! `(seed, grid, n_paths)`. Each path draws from its own counter-based
//! ChaCha substream, so path `i` does not depend on `n_paths` or on the
//! number of worker threads.

use crate::analytics::OuSpec;
use crate::kernels::ProcessSpec;
use crate::quadrature::QuadConfig;
use crate::{Error, Result};
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use std::io::{Read, Write};

/// Time grid; uniform by default, strictly increasing always.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub t1: f64,
    pub n: usize,
    pub points: Vec<f64>,
    pub uniform: bool,
}

impl Grid {
    /// Uniform grid of `n ≥ 2` points spanning `[t0, t1]`.
    pub fn uniform(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain("grid needs at least 2 points".into()));
        }
        if !(t0 >= 0.0 && t1 > t0) {
            return Err(Error::Domain(format!("grid needs 0 ≤ t0 < t1, got [{t0}, {t1}]")));
        }
        let dt = (t1 - t0) / (n - 1) as f64;
        let points = (0..n).map(|i| t0 + i as f64 * dt).collect();
        Ok(Grid { t0, t1, n, points, uniform: true })
    }

    /// Grid from explicit, strictly increasing points.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("grid needs at least 2 points".into()));
        }
        if points[0] < 0.0 || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "grid points must be nonnegative and strictly increasing".into(),
            ));
        }
        let uniform = {
            let dt = points[1] - points[0];
            points.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12 * dt.max(1.0))
        };
        Ok(Grid {
            t0: points[0],
            t1: *points.last().unwrap(),
            n: points.len(),
            points,
            uniform,
        })
    }

    /// Spacing of a uniform grid.
    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / (self.n - 1) as f64
    }

    /// Index of a grid point, never interpolating.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        match self.points.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => Ok(i),
            Err(i) => {
                if i < self.n && (self.points[i] - t).abs() <= tol {
                    Ok(i)
                } else if i > 0 && (self.points[i - 1] - t).abs() <= tol {
                    Ok(i - 1)
                } else {
                    Err(Error::OffGrid(t))
                }
            }
        }
    }
}

/// What an ensemble contains.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "process_kind", rename_all = "snake_case")]
pub enum EnsembleProcess {
    /// Raw Gaussian driver paths.
    Gaussian { process: ProcessSpec },
    /// Second-kind noise `Y_t = ∫_0^t e^{-s} dU_{a_s}`.
    SecondKindNoise { base: ProcessSpec },
    /// OU solution started at 0.
    Ou { ou: OuSpec },
    /// Stationary OU approximation (burn-in applied).
    StationaryOu { ou: OuSpec, burn_in: f64 },
}

/// How the Gaussian vector was factorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    CirculantEmbedding,
    Dense,
    /// Dense factorization after the circulant spectrum failed the
    /// negative-mass tolerance.
    DenseFallback,
}

/// A seeded collection of sampled trajectories on a grid, row-major
/// (`n_paths × grid.n`).
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub grid: Grid,
    pub n_paths: usize,
    pub seed: u64,
    pub process: EnsembleProcess,
    pub method: SampleMethod,
    pub paths: Vec<f64>,
}

impl PathEnsemble {
    pub fn path(&self, i: usize) -> &[f64] {
        &self.paths[i * self.grid.n..(i + 1) * self.grid.n]
    }

    /// Values of every path at one grid index.
    pub fn column(&self, idx: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.grid.n;
        self.paths.iter().skip(idx).step_by(n).copied()
    }
}

const NEG_SPECTRUM_TOLERANCE: f64 = 1e-8;

/// Exact-in-law Gaussian driver sample.
///
/// fBm on a uniform grid starting at 0 uses circulant embedding of the
/// stationary increment sequence; if the embedding spectrum carries more
/// than a 1e-8 fraction of negative mass the sampler falls back to dense
/// factorization (recorded in the returned `method`). SubfBm/bifBm and
/// non-uniform grids always use the dense route.
pub fn sample_gaussian(
    p: &ProcessSpec,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if matches!(p, ProcessSpec::Hermite { .. }) {
        return Err(Error::Domain(
            "sample_gaussian covers the Gaussian families only; Hermite paths are out of scope \
             (order 1 is fBm: sample that directly)"
                .into(),
        ));
    }
    if n_paths == 0 {
        return Err(Error::Domain("n_paths must be positive".into()));
    }
    let circulant_ok = matches!(p, ProcessSpec::Fbm { .. }) && grid.uniform && grid.t0 == 0.0;
    if circulant_ok {
        match sample_fbm_circulant(p, grid, n_paths, seed) {
            Ok(paths) => {
                return Ok(PathEnsemble {
                    grid: grid.clone(),
                    n_paths,
                    seed,
                    process: EnsembleProcess::Gaussian { process: *p },
                    method: SampleMethod::CirculantEmbedding,
                    paths,
                })
            }
            Err(Error::NotPositiveSemidefinite(_)) => {
                let paths = sample_dense(&cov_matrix_times(p, &grid.points)?, grid, n_paths, seed)?;
                return Ok(PathEnsemble {
                    grid: grid.clone(),
                    n_paths,
                    seed,
                    process: EnsembleProcess::Gaussian { process: *p },
                    method: SampleMethod::DenseFallback,
                    paths,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let paths = sample_dense(&cov_matrix_times(p, &grid.points)?, grid, n_paths, seed)?;
    Ok(PathEnsemble {
        grid: grid.clone(),
        n_paths,
        seed,
        process: EnsembleProcess::Gaussian { process: *p },
        method: SampleMethod::Dense,
        paths,
    })
}

fn cov_matrix_times(p: &ProcessSpec, times: &[f64]) -> Result<DMatrix<f64>> {
    let n = times.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = p.cov(times[i], times[j])?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Circulant embedding of fractional Gaussian noise; returns row-major
/// paths, each starting at exactly 0.
fn sample_fbm_circulant(
    p: &ProcessSpec,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let ProcessSpec::Fbm { hurst } = *p else { unreachable!() };
    let n = grid.n;
    let n_inc = n - 1;
    let dt = grid.dt();
    let m = (2 * n_inc).next_power_of_two();

    // Increment autocovariance c(k) = dt^{2H}/2 (|k+1|^{2H} - 2k^{2H} + |k-1|^{2H}).
    let two_h = 2.0 * hurst;
    let scale = dt.powf(two_h) / 2.0;
    let c = |k: usize| -> f64 {
        let k = k as f64;
        scale * ((k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h))
    };
    let mut row: Vec<Complex<f64>> = (0..m).map(|j| Complex::new(c(j.min(m - j)), 0.0)).collect();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    fwd.process(&mut row);
    let mut eig: Vec<f64> = row.iter().map(|z| z.re).collect();
    let total: f64 = eig.iter().map(|l| l.abs()).sum();
    let neg: f64 = eig.iter().filter(|l| **l < 0.0).map(|l| -*l).sum();
    if neg > NEG_SPECTRUM_TOLERANCE * total {
        return Err(Error::NotPositiveSemidefinite(format!(
            "circulant spectrum carries negative mass fraction {:.3e}",
            neg / total
        )));
    }
    let sqrt_eig: Vec<f64> = eig
        .iter_mut()
        .map(|l| if *l < 0.0 { 0.0 } else { l.sqrt() })
        .collect();
    let inv = planner.plan_fft_inverse(m);
    let norm = 1.0 / (m as f64).sqrt();

    let mut paths = vec![0.0f64; n_paths * n];
    // One FFT yields two independent fGn vectors (real and imaginary
    // parts): path pair (2j, 2j+1) shares substream j, so path i never
    // depends on n_paths.
    let chunks: Vec<(usize, &mut [f64])> = paths.chunks_mut(2 * n).enumerate().collect();
    chunks.into_par_iter().for_each_init(
        || {
            (
                vec![Complex::new(0.0, 0.0); m],
                vec![Complex::new(0.0, 0.0); inv.get_inplace_scratch_len()],
            )
        },
        |(buf, scratch), (j, out)| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            for k in 0..m {
                let u: f64 = rng.sample(StandardNormal);
                let v: f64 = rng.sample(StandardNormal);
                buf[k] = Complex::new(u, v) * sqrt_eig[k];
            }
            inv.process_with_scratch(buf, scratch);
            // Cumulative sums of the fGn give the fBm path from 0.
            let first = &mut out[..n];
            first[0] = 0.0;
            for i in 0..n_inc {
                first[i + 1] = first[i] + buf[i].re * norm;
            }
            if out.len() > n {
                let second = &mut out[n..];
                second[0] = 0.0;
                for i in 0..n_inc {
                    second[i + 1] = second[i] + buf[i].im * norm;
                }
            }
        },
    );
    Ok(paths)
}

/// Dense factorization sampling. Zero-variance grid points (time 0) are
/// held at exactly 0 and excluded from the factorization.
fn sample_dense(cov: &DMatrix<f64>, grid: &Grid, n_paths: usize, seed: u64) -> Result<Vec<f64>> {
    let n = grid.n;
    let keep: Vec<usize> = (0..n).filter(|&i| cov[(i, i)] > 0.0).collect();
    let m = keep.len();
    let mut sub = DMatrix::zeros(m, m);
    for (a, &i) in keep.iter().enumerate() {
        for (b, &j) in keep.iter().enumerate() {
            sub[(a, b)] = cov[(i, j)];
        }
    }
    let lower = cholesky_with_jitter(sub)?;
    // Row-major lower triangle for the cache-friendly per-path matvec.
    let mut l = vec![0.0f64; m * m];
    for r in 0..m {
        for cidx in 0..=r {
            l[r * m + cidx] = lower[(r, cidx)];
        }
    }

    let mut paths = vec![0.0f64; n_paths * n];
    paths.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let z: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        for (r, &gi) in keep.iter().enumerate() {
            let row = &l[r * m..r * m + r + 1];
            let mut acc = 0.0;
            for (lv, zv) in row.iter().zip(&z[..=r]) {
                acc += lv * zv;
            }
            out[gi] = acc;
        }
    });
    Ok(paths)
}

/// Cholesky with the jitter escalation 0 → 1e-14 → 1e-12 → 1e-10
/// (relative to the mean diagonal).
fn cholesky_with_jitter(mat: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = mat.nrows();
    let mean_diag = (0..m).map(|i| mat[(i, i)]).sum::<f64>() / m as f64;
    for &eps in &[0.0, 1e-14, 1e-12, 1e-10] {
        let mut attempt = mat.clone();
        if eps > 0.0 {
            for i in 0..m {
                attempt[(i, i)] += eps * mean_diag;
            }
        }
        if let Some(ch) = nalgebra::Cholesky::new(attempt) {
            return Ok(ch.unpack());
        }
    }
    Err(Error::NotPositiveSemidefinite(format!(
        "Cholesky failed for a {m}×{m} covariance matrix even with 1e-10 relative jitter"
    )))
}

/// Lamperti time change `a_t = γ e^{t/γ}`; strictly increasing,
/// `a_0 = γ`.
pub fn time_change(gamma: f64, t: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!(
            "time change exponent must lie in (0,1), got {gamma}"
        )));
    }
    Ok(gamma * (t / gamma).exp())
}

/// OU paths from driver paths via the integration-by-parts
/// representation, trapezoidal in the Riemann integral. Consumes the
/// driver ensemble; the result starts at exactly 0.
pub fn ou_first_kind(driver: PathEnsemble, theta: f64) -> Result<PathEnsemble> {
    let EnsembleProcess::Gaussian { process } = driver.process else {
        return Err(Error::Domain(
            "ou_first_kind expects a raw Gaussian driver ensemble".into(),
        ));
    };
    let ou = OuSpec::first_kind(process, theta)?;
    ou_transform(driver, theta, EnsembleProcess::Ou { ou })
}

/// The same construction driven by second-kind noise paths.
pub fn ou_second_kind(noise: PathEnsemble, theta: f64) -> Result<PathEnsemble> {
    let EnsembleProcess::SecondKindNoise { base } = noise.process else {
        return Err(Error::Domain(
            "ou_second_kind expects a second-kind noise ensemble".into(),
        ));
    };
    let ou = OuSpec::second_kind(base, theta)?;
    ou_transform(noise, theta, EnsembleProcess::Ou { ou })
}

fn ou_transform(
    mut driver: PathEnsemble,
    theta: f64,
    tag: EnsembleProcess,
) -> Result<PathEnsemble> {
    let n = driver.grid.n;
    if n < 2 {
        return Err(Error::Domain("grid too coarse for the OU construction".into()));
    }
    for i in 0..driver.n_paths.min(4) {
        if driver.path(i)[0] != 0.0 {
            return Err(Error::Domain("driver paths must start at 0".into()));
        }
    }
    let steps: Vec<f64> = driver.grid.points.windows(2).map(|w| w[1] - w[0]).collect();
    let decays: Vec<f64> = steps.iter().map(|dt| (-theta * dt).exp()).collect();
    driver.paths.par_chunks_mut(n).for_each(|path| {
        // j_i = e^{-θ t_i} ∫_0^{t_i} e^{θr} G_r dr, accumulated without
        // ever forming e^{θt}.
        let mut j = 0.0;
        let mut prev = path[0];
        for i in 1..n {
            let dt = steps[i - 1];
            let d = decays[i - 1];
            let cur = path[i];
            j = d * j + 0.5 * dt * (d * prev + cur);
            prev = cur;
            path[i] = cur - theta * j;
        }
        path[0] = 0.0;
    });
    driver.process = tag;
    Ok(driver)
}

/// Second-kind noise `Y` sampled as a centered Gaussian vector with
/// covariance
/// `R_Y(s,t) = f(|t-s|) - f(t) - f(s) + f(0) + h(s) + h(t) - h(|t-s|)`
/// (dense factorization).
pub fn second_kind_noise(
    base: &ProcessSpec,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
    q: &QuadConfig,
) -> Result<PathEnsemble> {
    base.lamperti_cov(0.0)?; // rejects Hermite bases
    if n_paths == 0 {
        return Err(Error::Domain("n_paths must be positive".into()));
    }
    let cov = second_kind_cov_matrix(base, &grid.points, q)?;
    let paths = sample_dense(&cov, grid, n_paths, seed)?;
    Ok(PathEnsemble {
        grid: grid.clone(),
        n_paths,
        seed,
        process: EnsembleProcess::SecondKindNoise { base: *base },
        method: SampleMethod::Dense,
        paths,
    })
}

/// Increment-variance function of the second-kind noise on a sorted lag
/// grid: `ρ_Y(t) = 2f(0) - 2f(t) + 2h(t)`, with the iterated integral
/// `h(t) = t∫_0^t f - ∫_0^t xf(x)dx` accumulated cumulatively.
fn second_kind_rho_on_lags(base: &ProcessSpec, lags: &[f64], q: &QuadConfig) -> Result<Vec<f64>> {
    let f0 = base.lamperti_cov(0.0)?;
    let mut rho = Vec::with_capacity(lags.len());
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    let mut prev = 0.0;
    for &t in lags {
        if t < prev {
            return Err(Error::Domain("lag grid must be nondecreasing".into()));
        }
        if t > prev {
            f1 += segment_integral(|x| base.lamperti_cov(x).unwrap_or(f64::NAN), prev, t, q)?;
            f2 += segment_integral(|x| x * base.lamperti_cov(x).unwrap_or(f64::NAN), prev, t, q)?;
            prev = t;
        }
        let h = t * f1 - f2;
        let f = base.lamperti_cov(t)?;
        rho.push(2.0 * (f0 - f + h));
    }
    Ok(rho)
}

fn segment_integral<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, q: &QuadConfig) -> Result<f64> {
    crate::quadrature::integrate_1d(f, a, b, crate::quadrature::EndpointSingularity::None, q)?
        .require_converged(q)
}

fn second_kind_cov_matrix(
    base: &ProcessSpec,
    times: &[f64],
    q: &QuadConfig,
) -> Result<DMatrix<f64>> {
    let n = times.len();
    let dt = times[1] - times[0];
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12 * dt.max(1.0));
    if uniform && times[0] == 0.0 {
        // Index arithmetic: every pairwise gap is a multiple of dt.
        let lags: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let rho = second_kind_rho_on_lags(base, &lags, q)?;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = 0.5 * (rho[i] + rho[j] - rho[i - j]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        return Ok(m);
    }

    // General grids: all pairwise gaps plus the times themselves,
    // deduplicated so the cumulative ρ pass runs once over a sorted set.
    let mut lags: Vec<f64> = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        lags.push(times[i]);
        for j in 0..i {
            lags.push(times[i] - times[j]);
        }
    }
    lags.sort_by(f64::total_cmp);
    lags.dedup();
    let rho = second_kind_rho_on_lags(base, &lags, q)?;
    let lookup = |t: f64| -> f64 {
        let idx = lags
            .binary_search_by(|p| p.total_cmp(&t))
            .expect("lag grid contains every pairwise gap by construction");
        rho[idx]
    };
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5 * (lookup(times[i]) + lookup(times[j]) - lookup(times[i] - times[j]));
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Pathwise second-kind noise: the base is sampled at the time-changed
/// points `a_{t_i}`, then `Y = L + η` with `L_t = e^{-t} U_{a_t} - U_{a_0}`
/// and `η` the trapezoidal integral of `e^{-s} U_{a_s}`. Grid must start
/// at 0. The covariance route and this construction are mutual oracles.
pub fn second_kind_noise_pathwise(
    base: &ProcessSpec,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if grid.t0 != 0.0 {
        return Err(Error::Domain("pathwise second-kind construction needs t0 = 0".into()));
    }
    base.lamperti_cov(0.0)?; // rejects Hermite bases
    let gamma = base.holder_exponent().value();
    let changed: Vec<f64> = grid
        .points
        .iter()
        .map(|&t| time_change(gamma, t))
        .collect::<Result<_>>()?;
    let base_paths = {
        let cov = cov_matrix_times(base, &changed)?;
        let pseudo = Grid::from_points(changed.clone())?;
        sample_dense(&cov, &pseudo, n_paths, seed)?
    };
    let n = grid.n;
    let mut paths = vec![0.0f64; n_paths * n];
    paths
        .par_chunks_mut(n)
        .zip(base_paths.par_chunks(n))
        .for_each(|(out, u)| {
            let mut eta = 0.0;
            let u0 = u[0];
            out[0] = 0.0;
            for i in 1..n {
                let (ta, tb) = (grid.points[i - 1], grid.points[i]);
                let dt = tb - ta;
                eta += 0.5 * dt * ((-ta).exp() * u[i - 1] + (-tb).exp() * u[i]);
                let l = (-tb).exp() * u[i] - u0;
                out[i] = l + eta;
            }
        });
    Ok(PathEnsemble {
        grid: grid.clone(),
        n_paths,
        seed,
        process: EnsembleProcess::SecondKindNoise { base: *base },
        method: SampleMethod::Dense,
        paths,
    })
}

/// Approximate stationary OU paths: run the zero-start solution from
/// `-burn_in` and discard the transient. The second-moment bias is
/// `O(e^{-θ·burn_in})`; the default burn-in is `20/θ`.
pub fn stationary_path(
    ou: &OuSpec,
    grid: &Grid,
    n_paths: usize,
    seed: u64,
    burn_in: Option<f64>,
    q: &QuadConfig,
) -> Result<PathEnsemble> {
    if ou.theta <= 0.0 {
        return Err(Error::Domain("stationary paths require theta > 0".into()));
    }
    if !ou.has_stationary_version() {
        return Err(Error::NonStationaryDriver(
            "no stationary version exists for this driver".into(),
        ));
    }
    if !grid.uniform {
        return Err(Error::Domain("stationary_path requires a uniform grid".into()));
    }
    let burn = burn_in.unwrap_or(20.0 / ou.theta);
    if burn <= 0.0 {
        return Err(Error::Domain("burn_in must be positive".into()));
    }
    let dt = grid.dt();
    let extra = (burn / dt).ceil() as usize;
    let total = grid.n + extra;
    let horizon = (total - 1) as f64 * dt;
    let ext = Grid::uniform(0.0, horizon, total)?;

    let driven = match &ou.noise {
        crate::analytics::NoiseKind::FirstKind { process } => {
            let ens = sample_gaussian(process, &ext, n_paths, seed)?;
            ou_first_kind(ens, ou.theta)?
        }
        crate::analytics::NoiseKind::SecondKind { base } => {
            let ens = second_kind_noise(base, &ext, n_paths, seed, q)?;
            ou_second_kind(ens, ou.theta)?
        }
    };
    // Keep the last grid.n samples and relabel to the requested grid.
    let mut paths = vec![0.0f64; n_paths * grid.n];
    for i in 0..n_paths {
        let src = &driven.path(i)[extra..];
        paths[i * grid.n..(i + 1) * grid.n].copy_from_slice(src);
    }
    Ok(PathEnsemble {
        grid: grid.clone(),
        n_paths,
        seed,
        process: EnsembleProcess::StationaryOu { ou: *ou, burn_in: extra as f64 * dt },
        method: driven.method,
        paths,
    })
}

const ENSEMBLE_MAGIC: &[u8; 8] = b"FOUENS01";

#[derive(serde::Serialize, serde::Deserialize)]
struct EnsembleHeader {
    seed: u64,
    n_paths: usize,
    process: EnsembleProcess,
    method: SampleMethod,
    grid: Grid,
}

impl PathEnsemble {
    /// Columnar binary layout: magic, JSON header (seed, grid spec,
    /// process spec), body of row-major little-endian doubles.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&EnsembleHeader {
            seed: self.seed,
            n_paths: self.n_paths,
            process: self.process.clone(),
            method: self.method,
            grid: self.grid.clone(),
        })
        .map_err(|e| Error::Io(e.to_string()))?;
        w.write_all(ENSEMBLE_MAGIC)?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for v in &self.paths {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != ENSEMBLE_MAGIC {
            return Err(Error::Io("not an ensemble file (bad magic)".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut header = vec![0u8; len];
        r.read_exact(&mut header)?;
        let header: EnsembleHeader =
            serde_json::from_slice(&header).map_err(|e| Error::Io(e.to_string()))?;
        let count = header.n_paths * header.grid.n;
        let mut paths = vec![0.0f64; count];
        let mut buf = [0u8; 8];
        for v in &mut paths {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(PathEnsemble {
            grid: header.grid,
            n_paths: header.n_paths,
            seed: header.seed,
            process: header.process,
            method: header.method,
            paths,
        })
    }

    /// CSV for small runs: one row per grid point, one column per path.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "t")?;
        for i in 0..self.n_paths {
            write!(w, ",path_{i}")?;
        }
        writeln!(w)?;
        for (idx, t) in self.grid.points.iter().enumerate() {
            write!(w, "{t:.16e}")?;
            for i in 0..self.n_paths {
                write!(w, ",{:.16e}", self.path(i)[idx])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics;

    fn q() -> QuadConfig {
        QuadConfig::default()
    }

    fn mean_and_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
        let v: Vec<f64> = xs.collect();
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, (var / n as f64).sqrt())
    }

    #[test]
    fn grid_construction_and_indexing() {
        let g = Grid::uniform(0.0, 10.0, 5).unwrap();
        assert_eq!(g.points, vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert!(g.uniform);
        assert_eq!(g.index_of(7.5).unwrap(), 3);
        assert!(matches!(g.index_of(7.51), Err(Error::OffGrid(_))));
        assert!(Grid::uniform(1.0, 1.0, 4).is_err());
        assert!(Grid::from_points(vec![0.0, 1.0, 0.5]).is_err());
        let ng = Grid::from_points(vec![0.0, 0.5, 2.0]).unwrap();
        assert!(!ng.uniform);
    }

    #[test]
    fn time_change_values() {
        assert!((time_change(0.5, 0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((time_change(0.5, 0.5 * (2.0f64).ln()).unwrap() - 1.0).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..100 {
            let t = -3.0 + 0.07 * i as f64;
            let a = time_change(0.7, t).unwrap();
            assert!(a > prev);
            prev = a;
        }
        assert!(time_change(1.2, 0.0).is_err());
    }

    #[test]
    fn brownian_increments_have_the_right_variance() {
        let grid = Grid::uniform(0.0, 1.0, 257).unwrap();
        let e = sample_gaussian(&ProcessSpec::fbm(0.5).unwrap(), &grid, 4000, 11).unwrap();
        assert_eq!(e.method, SampleMethod::CirculantEmbedding);
        let dt = grid.dt();
        let (mean, se) = mean_and_se((0..e.n_paths).map(|i| {
            let p = e.path(i);
            (p[100] - p[99]).powi(2)
        }));
        assert!((mean - dt).abs() < 3.0 * se, "increment variance {mean} vs {dt} (se {se})");
    }

    #[test]
    fn circulant_fbm_matches_the_analytic_kernel() {
        let p = ProcessSpec::fbm(0.7).unwrap();
        let grid = Grid::uniform(0.0, 2.0, 65).unwrap();
        let e = sample_gaussian(&p, &grid, 10_000, 42).unwrap();
        let (i5, i10) = (5, 10);
        let expect = p.cov(grid.points[i5], grid.points[i10]).unwrap();
        let (mean, se) = mean_and_se((0..e.n_paths).map(|i| e.path(i)[i5] * e.path(i)[i10]));
        assert!((mean - expect).abs() < 3.0 * se, "cov {mean} vs {expect} (se {se})");
    }

    #[test]
    fn dense_subfbm_matches_variance() {
        let p = ProcessSpec::subfbm(0.7).unwrap();
        let grid = Grid::uniform(0.0, 2.0, 33).unwrap();
        let e = sample_gaussian(&p, &grid, 10_000, 7).unwrap();
        assert_eq!(e.method, SampleMethod::Dense);
        let idx = 20;
        let t = grid.points[idx];
        let expect = p.variance(t).unwrap();
        let (mean, se) = mean_and_se((0..e.n_paths).map(|i| e.path(i)[idx].powi(2)));
        assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect} ± {se}");
        // Paths start at 0 exactly.
        assert!(e.column(0).all(|v| v == 0.0));
    }

    #[test]
    fn determinism_is_thread_count_invariant() {
        let p = ProcessSpec::fbm(0.65).unwrap();
        let grid = Grid::uniform(0.0, 1.0, 64).unwrap();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = pool1.install(|| sample_gaussian(&p, &grid, 33, 99).unwrap());
        let b = pool4.install(|| sample_gaussian(&p, &grid, 33, 99).unwrap());
        assert_eq!(a.paths, b.paths);
        // Path i does not depend on n_paths.
        let c = sample_gaussian(&p, &grid, 8, 99).unwrap();
        assert_eq!(&a.paths[..8 * 64], &c.paths[..]);
    }

    #[test]
    fn gaussian_marginals_pass_moment_checks() {
        let p = ProcessSpec::fbm(0.3).unwrap();
        let grid = Grid::uniform(0.0, 1.0, 33).unwrap();
        let e = sample_gaussian(&p, &grid, 8000, 5).unwrap();
        let idx = 32;
        let sd = p.variance(grid.points[idx]).unwrap().sqrt();
        let vals: Vec<f64> = e.column(idx).map(|v| v / sd).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let m2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = vals.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let m4 = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let skew = m3 / m2.powf(1.5);
        let kurt = m4 / (m2 * m2) - 3.0;
        assert!(skew.abs() < 4.0 * (6.0 / n).sqrt(), "skewness {skew}");
        assert!(kurt.abs() < 4.0 * (24.0 / n).sqrt(), "kurtosis {kurt}");
    }

    #[test]
    fn ou_construction_degenerate_cases() {
        let grid = Grid::uniform(0.0, 2.0, 33).unwrap();
        let p = ProcessSpec::fbm(0.7).unwrap();
        // Zero driver paths give zero OU paths.
        let mut zeros = sample_gaussian(&p, &grid, 3, 1).unwrap();
        zeros.paths.iter_mut().for_each(|v| *v = 0.0);
        let x = ou_first_kind(zeros, 1.3).unwrap();
        assert!(x.paths.iter().all(|v| *v == 0.0));
        // θ = 0 returns the driver unchanged.
        let drv = sample_gaussian(&p, &grid, 5, 2).unwrap();
        let copy = drv.paths.clone();
        let x = ou_first_kind(drv, 0.0).unwrap();
        assert_eq!(x.paths, copy);
    }

    #[test]
    fn ou_variance_matches_quadrature() {
        let p = ProcessSpec::fbm(0.7).unwrap();
        let ou = OuSpec::first_kind(p, 1.0).unwrap();
        let grid = Grid::uniform(0.0, 5.0, 1025).unwrap();
        let drv = sample_gaussian(&p, &grid, 10_000, 3).unwrap();
        let x = ou_first_kind(drv, 1.0).unwrap();
        let expect = analytics::ou_variance(&ou, 5.0, &q()).unwrap();
        let (mean, se) = mean_and_se((0..x.n_paths).map(|i| x.path(i)[1024].powi(2)));
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "E[X_T²] {mean} vs quadrature {expect} (se {se})"
        );
    }

    #[test]
    fn ibp_discretization_error_shrinks_under_refinement() {
        // Deterministic order check: feed G_r = sin r through the
        // transform; X_T has the closed form
        // sin T - θe^{-θT}[e^{θr}(θ sin r - cos r)/(1+θ²)]_0^T.
        let theta: f64 = 1.0;
        let horizon: f64 = 3.0;
        let exact = horizon.sin()
            - theta * (-theta * horizon).exp()
                * (((theta * horizon).exp() * (theta * horizon.sin() - horizon.cos()) + 1.0)
                    / (1.0 + theta * theta));
        let mut errors = Vec::new();
        for n in [97usize, 193, 385] {
            let grid = Grid::uniform(0.0, horizon, n).unwrap();
            let paths: Vec<f64> = grid.points.iter().map(|r| r.sin()).collect();
            let ens = PathEnsemble {
                grid: grid.clone(),
                n_paths: 1,
                seed: 0,
                process: EnsembleProcess::Gaussian { process: ProcessSpec::fbm(0.5).unwrap() },
                method: SampleMethod::Dense,
                paths,
            };
            let x = ou_transform(ens, theta, EnsembleProcess::Gaussian {
                process: ProcessSpec::fbm(0.5).unwrap(),
            })
            .unwrap();
            errors.push((x.path(0)[n - 1] - exact).abs());
        }
        assert!(
            errors[0] > errors[1] && errors[1] > errors[2],
            "deterministic IBP error not monotone: {errors:?}"
        );
        // Trapezoid order: each halving should cut the error by ≈ 4.
        assert!(errors[0] / errors[1] > 3.0 && errors[1] / errors[2] > 3.0, "{errors:?}");

        // Stochastic study on shared driver paths: the L² discretization
        // error against the finest level shrinks monotonically, and the
        // finest level sits on the quadrature value.
        let p = ProcessSpec::fbm(0.3).unwrap();
        let fine = Grid::uniform(0.0, 3.0, 769).unwrap();
        let drv = sample_gaussian(&p, &fine, 6000, 17).unwrap();
        let mut finals: Vec<Vec<f64>> = Vec::new();
        for stride in [16usize, 4, 1] {
            let pts: Vec<f64> = fine.points.iter().copied().step_by(stride).collect();
            let sub = Grid::from_points(pts).unwrap();
            let mut paths = Vec::with_capacity(drv.n_paths * sub.n);
            for i in 0..drv.n_paths {
                paths.extend(drv.path(i).iter().copied().step_by(stride));
            }
            let ens = PathEnsemble {
                grid: sub.clone(),
                n_paths: drv.n_paths,
                seed: drv.seed,
                process: drv.process.clone(),
                method: drv.method,
                paths,
            };
            let x = ou_first_kind(ens, theta).unwrap();
            finals.push((0..x.n_paths).map(|i| {
                let p = x.path(i);
                p[p.len() - 1]
            }).collect());
        }
        let l2 = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
        };
        let e_coarse = l2(&finals[0], &finals[2]);
        let e_mid = l2(&finals[1], &finals[2]);
        assert!(
            e_coarse > e_mid && e_mid > 0.0,
            "L² refinement errors not monotone: {e_coarse} vs {e_mid}"
        );
        let ou = OuSpec::first_kind(p, theta).unwrap();
        let expect = analytics::ou_variance(&ou, 3.0, &q()).unwrap();
        let (mean, se) = mean_and_se(finals[2].iter().map(|v| v * v));
        assert!((mean - expect).abs() < 4.0 * se, "finest level {mean} vs {expect} (se {se})");
    }

    #[test]
    fn second_kind_noise_obeys_the_increment_law() {
        let base = ProcessSpec::fbm(0.7).unwrap();
        let grid = Grid::uniform(0.0, 2.0, 65).unwrap();
        let e = second_kind_noise(&base, &grid, 8000, 23, &q()).unwrap();
        let f0 = base.lamperti_cov(0.0).unwrap();
        // var(Y_t - Y_s) = 2f(0) - 2f(τ) + 2h(τ), independent of s.
        let pairs = [(8usize, 40usize), (16, 48), (24, 56)];
        for &(i, j) in &pairs {
            let tau = grid.points[j] - grid.points[i];
            let expect = 2.0
                * (f0 - base.lamperti_cov(tau).unwrap()
                    + base.lamperti_cov_iint(tau, &q()).unwrap());
            let (mean, se) =
                mean_and_se((0..e.n_paths).map(|p| (e.path(p)[j] - e.path(p)[i]).powi(2)));
            assert!(
                (mean - expect).abs() < 3.0 * se,
                "increment var at ({i},{j}): {mean} vs {expect} (se {se})"
            );
        }
    }

    #[test]
    fn pathwise_and_covariance_constructions_agree() {
        let base = ProcessSpec::fbm(0.7).unwrap();
        let grid = Grid::uniform(0.0, 2.0, 257).unwrap();
        let cov_route = second_kind_noise(&base, &grid, 6000, 31, &q()).unwrap();
        let path_route = second_kind_noise_pathwise(&base, &grid, 6000, 32).unwrap();
        for &idx in &[64usize, 192, 256] {
            let (m1, s1) =
                mean_and_se((0..cov_route.n_paths).map(|i| cov_route.path(i)[idx].powi(2)));
            let (m2, s2) =
                mean_and_se((0..path_route.n_paths).map(|i| path_route.path(i)[idx].powi(2)));
            // 3 combined SE plus a small trapezoid-bias budget.
            let tol = 3.0 * (s1 * s1 + s2 * s2).sqrt() + 5e-3 * m1.abs();
            assert!(
                (m1 - m2).abs() < tol,
                "second moments at {idx}: {m1} vs {m2} (tol {tol})"
            );
        }
    }

    #[test]
    fn stationary_path_reaches_the_stationary_law() {
        let ou = OuSpec::first_kind(ProcessSpec::fbm(0.5).unwrap(), 1.0).unwrap();
        let grid = Grid::uniform(0.0, 4.0, 257).unwrap();
        let e = stationary_path(&ou, &grid, 6000, 77, None, &q()).unwrap();
        let (mean, se) = mean_and_se((0..e.n_paths).map(|i| e.path(i)[0].powi(2)));
        assert!((mean - 0.5).abs() < 3.0 * se, "stationary variance {mean} (se {se})");
        // Lag covariance at lag 2 matches the stationary autocovariance.
        let lag_idx = e.grid.index_of(2.0).unwrap();
        let ou7 = OuSpec::first_kind(ProcessSpec::fbm(0.7).unwrap(), 1.0).unwrap();
        let e7 = stationary_path(&ou7, &grid, 6000, 78, None, &q()).unwrap();
        let expect = analytics::stationary_autocov(&ou7, 2.0, &q()).unwrap();
        let (mean, se) =
            mean_and_se((0..e7.n_paths).map(|i| e7.path(i)[0] * e7.path(i)[lag_idx]));
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "lag-2 covariance {mean} vs {expect} (se {se})"
        );
        // Doubling the burn-in moves the variance by less than one SE.
        let short = stationary_path(&ou, &grid, 4000, 79, Some(10.0), &q()).unwrap();
        let long = stationary_path(&ou, &grid, 4000, 79, Some(20.0), &q()).unwrap();
        let (m1, s1) = mean_and_se((0..short.n_paths).map(|i| short.path(i)[0].powi(2)));
        let (m2, _) = mean_and_se((0..long.n_paths).map(|i| long.path(i)[0].powi(2)));
        assert!((m1 - m2).abs() < s1, "burn-in sensitivity {m1} vs {m2} (se {s1})");
    }

    #[test]
    fn second_kind_brownian_base_matches_the_standard_ou_law() {
        // Lamperti time change of a Brownian base reproduces the
        // standard OU finite-dimensional law after burn-in.
        let ou2 = OuSpec::second_kind(ProcessSpec::fbm(0.5).unwrap(), 1.0).unwrap();
        let grid = Grid::uniform(0.0, 3.0, 151).unwrap();
        let e = stationary_path(&ou2, &grid, 5000, 303, None, &q()).unwrap();
        let lag_idx = e.grid.index_of(1.0).unwrap();
        let expect = (-1.0f64).exp() / 2.0;
        let (mean, se) = mean_and_se((0..e.n_paths).map(|i| e.path(i)[0] * e.path(i)[lag_idx]));
        assert!((mean - expect).abs() < 3.0 * se, "lag-1 cov {mean} vs {expect} (se {se})");
        let (var, vse) = mean_and_se((0..e.n_paths).map(|i| e.path(i)[0].powi(2)));
        assert!((var - 0.5).abs() < 3.0 * vse, "variance {var} (se {vse})");
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let p = ProcessSpec::bifbm(0.6, 0.5).unwrap();
        let grid = Grid::uniform(0.0, 1.0, 17).unwrap();
        let e = sample_gaussian(&p, &grid, 9, 123).unwrap();
        let mut buf = Vec::new();
        e.write_binary(&mut buf).unwrap();
        let back = PathEnsemble::read_binary(&buf[..]).unwrap();
        assert_eq!(e.paths, back.paths);
        assert_eq!(e.grid, back.grid);
        assert_eq!(e.seed, back.seed);
        assert_eq!(e.process, back.process);
        let mut csv = Vec::new();
        e.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,path_0"));
        assert_eq!(text.lines().count(), 18);
    }
}
