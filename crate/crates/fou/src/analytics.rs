//! Stationary moments, auto-covariances, the asymptotic regime catalog
//! and decay-rate fitting.
//!
//! For a driver with stationary increments and `θ > 0` the Langevin
//! equation has a stationary version `Z` with
//!
//! ```text
//! E(Z_0²)    = (θ/2) ∫_0^∞ e^{-θt} ρ(t) dt,
//! E(Z_t Z_0) = e^{-θt} E(Z_0²) + ½ e^{-θt} ∫_0^t ∫_{-∞}^0 e^{θu+θv} ρ''(v-u) du dv,
//! ```
//!
//! where `ρ(t) = E(G_t²)`. The finite-horizon solution started at 0 is
//! linked to `Z` by `X_t = Z_t - e^{-θt} Z_0`, which turns every
//! finite-`t` second moment into combinations of the stationary
//! auto-covariance. First-kind fBm/Hermite drivers give the closed
//! stationary variance `H Γ(2H) θ^{-2H}` and a power-law covariance
//! tail; second-kind constructions always decay exponentially, with the
//! rate capped by the tail rate of `ρ''` of the time-changed noise.
//!
//! Drivers with non-stationary increments (subfBm, bifBm, first kind)
//! have no stationary version; their variance still converges to an
//! explicit limit at a power rate, computed here from the fBm part plus
//! the gap-kernel identity.

use crate::kernels::ProcessSpec;
use crate::quadrature::{self, QuadConfig};
use crate::{Error, Result};
use statrs::function::gamma::gamma;

/// How the driving noise enters the Langevin equation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// The process itself drives: `dX = -θX dt + dG`.
    FirstKind { process: ProcessSpec },
    /// The Lamperti-time-changed integral of a self-similar Gaussian
    /// base drives: `dX = -θX dt + dY`, `Y_t = ∫_0^t e^{-s} dU_{a_s}`.
    SecondKind { base: ProcessSpec },
}

/// An Ornstein-Uhlenbeck model: noise kind plus mean-reversion speed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OuSpec {
    pub noise: NoiseKind,
    pub theta: f64,
}

impl OuSpec {
    pub fn first_kind(process: ProcessSpec, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::Domain("theta must be finite".into()));
        }
        Ok(OuSpec { noise: NoiseKind::FirstKind { process }, theta })
    }

    pub fn second_kind(base: ProcessSpec, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::Domain("theta must be finite".into()));
        }
        if matches!(base, ProcessSpec::Hermite { .. }) {
            return Err(Error::Domain(
                "second-kind constructions require a Gaussian base (fBm, subfBm or bifBm)".into(),
            ));
        }
        Ok(OuSpec { noise: NoiseKind::SecondKind { base }, theta })
    }

    /// The driving process (first kind) or base process (second kind).
    pub fn process(&self) -> &ProcessSpec {
        match &self.noise {
            NoiseKind::FirstKind { process } => process,
            NoiseKind::SecondKind { base } => base,
        }
    }

    fn require_positive_theta(&self) -> Result<f64> {
        if self.theta > 0.0 {
            Ok(self.theta)
        } else {
            Err(Error::Domain(format!(
                "stationary and asymptotic quantities require theta > 0, got {}",
                self.theta
            )))
        }
    }

    /// Hermite drivers share every second-order quantity with fBm of the
    /// same Hurst index; one code path serves both.
    fn effective_first_kind(p: &ProcessSpec) -> ProcessSpec {
        match *p {
            ProcessSpec::Hermite { hurst, .. } => ProcessSpec::Fbm { hurst },
            other => other,
        }
    }

    /// Whether a stationary version of the solution exists.
    pub fn has_stationary_version(&self) -> bool {
        match &self.noise {
            NoiseKind::FirstKind { process } => process.has_stationary_increments(),
            NoiseKind::SecondKind { .. } => true,
        }
    }

    fn require_stationary(&self) -> Result<()> {
        if self.has_stationary_version() {
            Ok(())
        } else {
            Err(Error::NonStationaryDriver(format!(
                "first-kind {} has non-stationary increments; no stationary version exists",
                self.process().tag()
            )))
        }
    }
}

/// The driver's covariance mixed partial `∂²R/∂u∂v` as a function of
/// the lag (equal to `½ρ''` of the increment-variance function), with
/// its power exponent at 0. This is the kernel of the stationary
/// covariance double integral.
#[allow(clippy::type_complexity)]
fn mixed_partial_kernel(ou: &OuSpec) -> Result<(Box<dyn Fn(f64) -> f64 + Send + Sync>, f64)> {
    match &ou.noise {
        NoiseKind::FirstKind { process } => {
            let p = OuSpec::effective_first_kind(process);
            match p {
                ProcessSpec::Fbm { hurst } => {
                    let c = hurst * (2.0 * hurst - 1.0);
                    Ok((Box::new(move |u: f64| c * u.powf(2.0 * hurst - 2.0)), 2.0 * hurst - 2.0))
                }
                _ => Err(Error::NonStationaryDriver(
                    "the covariance kernel requires stationary increments".into(),
                )),
            }
        }
        NoiseKind::SecondKind { base } => {
            // f - f'' is already the mixed partial of R_Y (half of ρ''_Y).
            let b = *base;
            let beta = b.second_kind_cov_dd_zero_exponent()?;
            Ok((
                Box::new(move |u: f64| b.second_kind_cov_dd(u).unwrap_or(f64::NAN)),
                beta,
            ))
        }
    }
}

/// Stationary variance `E(Z_0²)`.
///
/// First-kind fBm/Hermite: closed form `H Γ(2H)/θ^{2H}`. Second kind:
/// `f(0) + (1/θ - θ) ∫_0^∞ f(t) e^{-θt} dt` with `f` the Lamperti
/// covariance of the base. First-kind subfBm/bifBm have no stationary
/// version and error out.
pub fn stationary_variance(ou: &OuSpec, q: &QuadConfig) -> Result<f64> {
    let theta = ou.require_positive_theta()?;
    ou.require_stationary()?;
    match &ou.noise {
        NoiseKind::FirstKind { process } => {
            let p = OuSpec::effective_first_kind(process);
            match p {
                ProcessSpec::Fbm { hurst } => {
                    Ok(hurst * gamma(2.0 * hurst) / theta.powf(2.0 * hurst))
                }
                _ => unreachable!("stationarity already checked"),
            }
        }
        NoiseKind::SecondKind { base } => {
            let f0 = base.lamperti_cov(0.0)?;
            let tail = quadrature::integrate_to_inf(
                |t| {
                    let w = (-theta * t).exp();
                    if w == 0.0 {
                        0.0
                    } else {
                        base.lamperti_cov(t).unwrap_or(f64::NAN) * w
                    }
                },
                0.0,
                q,
            )?
            .require_converged(q)?;
            Ok(f0 + (1.0 / theta - theta) * tail)
        }
    }
}

/// The generic stationary-increment route
/// `E(Z_0²) = (θ/2) ∫_0^∞ e^{-θt} ρ(t) dt`, kept as an independent
/// cross-check of [`stationary_variance`].
pub fn stationary_variance_from_rho(ou: &OuSpec, q: &QuadConfig) -> Result<f64> {
    let theta = ou.require_positive_theta()?;
    ou.require_stationary()?;
    let rho: Box<dyn Fn(f64) -> f64> = match &ou.noise {
        NoiseKind::FirstKind { process } => {
            let p = OuSpec::effective_first_kind(process);
            Box::new(move |t: f64| p.variance(t).unwrap_or(f64::NAN))
        }
        NoiseKind::SecondKind { base } => {
            let b = *base;
            let f0 = b.lamperti_cov(0.0)?;
            let hq = *q;
            Box::new(move |t: f64| {
                let f = b.lamperti_cov(t).unwrap_or(f64::NAN);
                let h = b.lamperti_cov_iint(t, &hq).unwrap_or(f64::NAN);
                2.0 * (f0 - f + h)
            })
        }
    };
    let integral = quadrature::integrate_to_inf(
        |t| {
            let w = (-theta * t).exp();
            if w == 0.0 {
                0.0
            } else {
                w * rho(t)
            }
        },
        0.0,
        q,
    )?
    .require_converged(q)?;
    Ok(0.5 * theta * integral)
}

/// `p`-th stationary moment of the first-kind fractional OU process:
/// zero for odd `p`, `(p-1)!! σ^p` for even `p`.
pub fn stationary_moment(ou: &OuSpec, p: u32) -> Result<f64> {
    let theta = ou.require_positive_theta()?;
    let hurst = match &ou.noise {
        NoiseKind::FirstKind { process } => match OuSpec::effective_first_kind(process) {
            ProcessSpec::Fbm { hurst } => hurst,
            _ => {
                return Err(Error::Domain(
                    "stationary moments are provided for first-kind fBm drivers".into(),
                ))
            }
        },
        NoiseKind::SecondKind { .. } => {
            return Err(Error::Domain(
                "stationary moments are provided for first-kind fBm drivers".into(),
            ))
        }
    };
    if p == 0 {
        return Ok(1.0);
    }
    if p % 2 == 1 {
        return Ok(0.0);
    }
    let sigma2 = hurst * gamma(2.0 * hurst) / theta.powf(2.0 * hurst);
    let mut double_factorial = 1.0;
    let mut k = p as i64 - 1;
    while k > 1 {
        double_factorial *= k as f64;
        k -= 2;
    }
    Ok(double_factorial * sigma2.powf(p as f64 / 2.0))
}

/// Exact `e^{-θt}/(2θ)` paths: the Brownian driver (and any base whose
/// `ρ''` vanishes identically) reproduces the standard OU law.
fn brownian_closed_form(ou: &OuSpec, t: f64) -> Option<f64> {
    let theta = ou.theta;
    let is_standard = match &ou.noise {
        NoiseKind::FirstKind { process } => {
            matches!(OuSpec::effective_first_kind(process), ProcessSpec::Fbm { hurst } if hurst == 0.5)
        }
        NoiseKind::SecondKind { .. } => false,
    };
    is_standard.then(|| (-theta * t).exp() / (2.0 * theta))
}

/// Stationary auto-covariance `E(Z_t Z_0)` at lag `t ≥ 0`.
///
/// Brownian drivers short-circuit to the exact `e^{-θt}/(2θ)`; everything
/// else evaluates `e^{-θt} E(Z_0²) + stationary_double(½ρ'', θ, t)`.
pub fn stationary_autocov(ou: &OuSpec, t: f64, q: &QuadConfig) -> Result<f64> {
    let theta = ou.require_positive_theta()?;
    ou.require_stationary()?;
    if t < 0.0 {
        return Err(Error::Domain("lag must be nonnegative".into()));
    }
    if let Some(v) = brownian_closed_form(ou, t) {
        return Ok(v);
    }
    let sigma2 = stationary_variance(ou, q)?;
    if t == 0.0 {
        return Ok(sigma2);
    }
    let transient = (-theta * t).exp() * sigma2;
    // Deep in the tail the value sits far below the default absolute
    // floor; scale the inner absolute tolerance to the transient term.
    let mut qq = *q;
    qq.abs_tol = q.abs_tol.min((transient.abs() * q.rel_tol).max(1e-290));
    qq.tail_cut = qq.abs_tol;
    let (kernel, beta) = mixed_partial_kernel(ou)?;
    let correction = quadrature::stationary_double(&*kernel, beta, theta, t, &qq)?
        .require_converged(&qq)?;
    Ok(transient + correction)
}

/// Finite-horizon second moment `E(X_t²)` of the solution started at 0.
///
/// Stationary-increment drivers use the link `X_t = Z_t - e^{-θt}Z_0`:
/// `E(X_t²) = σ²(1 + e^{-2θt}) - 2e^{-θt} r(t)`. SubfBm/bifBm first-kind
/// drivers add the gap-kernel correction to their scaled fBm part.
pub fn ou_variance(ou: &OuSpec, t: f64, q: &QuadConfig) -> Result<f64> {
    ou.require_positive_theta()?;
    if t < 0.0 {
        return Err(Error::Domain("time must be nonnegative".into()));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let theta = ou.theta;
    if ou.has_stationary_version() {
        let sigma2 = stationary_variance(ou, q)?;
        let r = stationary_autocov(ou, t, q)?;
        return Ok(sigma2 * (1.0 + (-2.0 * theta * t).exp()) - 2.0 * (-theta * t).exp() * r);
    }
    let NoiseKind::FirstKind { process } = &ou.noise else {
        unreachable!("second kind always has a stationary version");
    };
    let (scale, fbm) = process
        .fbm_component()
        .expect("non-stationary first-kind drivers decompose over fBm");
    let fbm_ou = OuSpec::first_kind(fbm, theta)?;
    let fbm_part = scale * ou_variance(&fbm_ou, t, q)?;
    let p = *process;
    let gap = quadrature::delta_g_two_term(
        |_| 0.0,
        |s, r| p.gap_mixed_partial(s, r).unwrap_or(f64::NAN),
        theta,
        t,
        q,
    )?
    .require_converged(q)?;
    Ok(fbm_part + gap)
}

/// Finite-horizon covariance `E(X_s X_t)`, `0 ≤ s ≤ t`, via the link to
/// the stationary solution. Stationary-increment drivers only.
pub fn ou_autocov(ou: &OuSpec, s: f64, t: f64, q: &QuadConfig) -> Result<f64> {
    ou.require_positive_theta()?;
    ou.require_stationary()?;
    let (s, t) = if s <= t { (s, t) } else { (t, s) };
    if s < 0.0 {
        return Err(Error::Domain("times must be nonnegative".into()));
    }
    let theta = ou.theta;
    let sigma2 = stationary_variance(ou, q)?;
    let r_lag = stationary_autocov(ou, t - s, q)?;
    let r_t = stationary_autocov(ou, t, q)?;
    let r_s = stationary_autocov(ou, s, q)?;
    Ok(r_lag - (-theta * s).exp() * r_t - (-theta * t).exp() * r_s
        + (-theta * (s + t)).exp() * sigma2)
}

/// The same covariance through the cross-covariance decomposition
/// `E(X_s X_t) = e^{-θ(t-s)} E(X_s²) + e^{-θ(s+t)} ∫_s^t ∫_0^s e^{θu+θv} ∂²R/∂u∂v`,
/// evaluated with 2-D quadrature. Kept as an independent route for
/// validation; supports every first-kind driver and the second kind.
pub fn ou_autocov_via_cross_cov(ou: &OuSpec, s: f64, t: f64, q: &QuadConfig) -> Result<f64> {
    ou.require_positive_theta()?;
    if !(0.0 < s && s < t) {
        return Err(Error::Domain("requires 0 < s < t".into()));
    }
    let theta = ou.theta;
    let var_s = ou_variance(ou, s, q)?;
    let kernel: Box<dyn Fn(f64, f64) -> f64> = match &ou.noise {
        NoiseKind::FirstKind { process } => {
            let p = OuSpec::effective_first_kind(process);
            Box::new(move |x: f64, y: f64| p.mixed_partial(x, y).unwrap_or(f64::NAN))
        }
        NoiseKind::SecondKind { base } => {
            // f - f'' is exactly ∂²R_Y/∂u∂v for the noise Y.
            let b = *base;
            Box::new(move |x: f64, y: f64| {
                b.second_kind_cov_dd((y - x).abs()).unwrap_or(f64::NAN)
            })
        }
    };
    let cross = quadrature::cross_cov(&*kernel, theta, 0.0, s, s, t, q)?;
    Ok((-theta * (t - s)).exp() * var_s + (-theta * (s + t)).exp() * cross.value)
}

/// `(e^{θu} - e^{-θu}) · k` without forming `∞ · 0`: the growing factor
/// is combined with `k` in log space (a zero `k` short-circuits).
pub fn sinh_weighted(theta: f64, u: f64, k: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let big = k.signum() * (theta * u + k.abs().ln()).exp();
    big - (-theta * u).exp() * k
}

/// `(e^{θu} + e^{-θu}) · k`, same overflow discipline.
pub fn cosh_weighted(theta: f64, u: f64, k: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    let big = k.signum() * (theta * u + k.abs().ln()).exp();
    big + (-theta * u).exp() * k
}

/// Identifier of an exactly known auto-covariance law.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ClosedFormId {
    /// `E(Z_t Z_0) = e^{-θt}/(2θ)`: the standard OU law.
    StandardOuAutocov { theta: f64 },
}

/// Leading constant of an asymptotic law; either closed or an integral
/// evaluated lazily under a quadrature budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeadingConstant {
    Closed(f64),
    /// `E(Z_0²) + (1/2θ) ∫_0^∞ (e^{θu} - e^{-θu}) k(u) du` with `k` the
    /// covariance mixed-partial kernel: the slow regime `θ < r`, where
    /// the transient and the noise tail decay at the same rate and no
    /// closed form exists.
    SlowRegimeIntegral { ou: OuSpec },
}

impl LeadingConstant {
    pub fn value(&self, q: &QuadConfig) -> Result<f64> {
        match self {
            LeadingConstant::Closed(c) => Ok(*c),
            LeadingConstant::SlowRegimeIntegral { ou } => {
                let theta = ou.theta;
                let NoiseKind::SecondKind { base } = &ou.noise else {
                    return Err(Error::Domain(
                        "slow-regime constants arise for second-kind models only".into(),
                    ));
                };
                // Integrating the defining combination by parts folds the
                // transient E(Z_0²) into a single f-integral,
                //   c = ((1-θ²)/2θ) ∫_0^∞ (e^{θu} + e^{-θu}) f(u) du,
                // valid whenever θ is below f's own tail rate; this form
                // has no cancellation and vanishes exactly at θ = 1.
                if theta < base.lamperti_cov_tail_rate()? {
                    if theta == 1.0 {
                        return Ok(0.0);
                    }
                    let integral = quadrature::integrate_to_inf(
                        |u| cosh_weighted(theta, u, base.lamperti_cov(u).unwrap_or(f64::NAN)),
                        0.0,
                        q,
                    )?
                    .require_converged(q)?;
                    return Ok((1.0 - theta * theta) / (2.0 * theta) * integral);
                }
                // θ at or above f's rate (but below the kernel rate):
                // evaluate E(Z_0²) + (1/2θ)∫(e^{θu}-e^{-θu})(f-f'') directly.
                let sigma2 = stationary_variance(ou, q)?;
                let (kernel, beta) = mixed_partial_kernel(ou)?;
                if beta <= -2.0 {
                    return Err(Error::Domain("kernel too singular at zero".into()));
                }
                let integral = quadrature::integrate_to_inf(
                    |u| sinh_weighted(theta, u, kernel(u)),
                    0.0,
                    q,
                )?
                .require_converged(q)?;
                Ok(sigma2 + integral / (2.0 * theta))
            }
        }
    }
}

/// The classified decay law of the stationary auto-covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AsymptoticRegime {
    /// `E(Z_t Z_0) ~ constant · t^exponent`.
    PowerLaw { exponent: f64, constant: LeadingConstant },
    /// `E(Z_t Z_0) ~ constant · t^poly_degree · e^{-rate t}`. `boundary`
    /// marks `θ` sitting exactly on the critical value.
    Exponential { rate: f64, poly_degree: u8, constant: LeadingConstant, boundary: bool },
    /// Exactly known law.
    Closed { form: ClosedFormId },
}

impl AsymptoticRegime {
    /// Evaluate the asymptote at lag `t`.
    pub fn eval(&self, t: f64, q: &QuadConfig) -> Result<f64> {
        match self {
            AsymptoticRegime::PowerLaw { exponent, constant } => {
                Ok(constant.value(q)? * t.powf(*exponent))
            }
            AsymptoticRegime::Exponential { rate, poly_degree, constant, .. } => {
                Ok(constant.value(q)? * t.powi(*poly_degree as i32) * (-rate * t).exp())
            }
            AsymptoticRegime::Closed { form: ClosedFormId::StandardOuAutocov { theta } } => {
                Ok((-theta * t).exp() / (2.0 * theta))
            }
        }
    }

    /// The exponential rate (`None` for power laws).
    pub fn rate(&self) -> Option<f64> {
        match self {
            AsymptoticRegime::Exponential { rate, .. } => Some(*rate),
            AsymptoticRegime::Closed { form: ClosedFormId::StandardOuAutocov { theta } } => {
                Some(*theta)
            }
            AsymptoticRegime::PowerLaw { .. } => None,
        }
    }
}

/// Classify the large-lag law of `E(Z_t Z_0)`.
///
/// First-kind fBm/Hermite (`H ≠ ½`): power law `t^{2H-2}` with constant
/// `H(2H-1)/θ²`. `H = ½`: the exact standard OU law. Second-kind
/// constructions: exponential with rate `min(θ, r)` where `r` is the
/// tail rate of `ρ''` of the time-changed noise; at `θ = r` the law
/// picks up a factor `t` and the regime carries a boundary flag.
pub fn classify_regime(ou: &OuSpec) -> Result<AsymptoticRegime> {
    let theta = ou.require_positive_theta()?;
    match &ou.noise {
        NoiseKind::FirstKind { process } => {
            let p = OuSpec::effective_first_kind(process);
            match p {
                ProcessSpec::Fbm { hurst } => {
                    if hurst == 0.5 {
                        return Ok(AsymptoticRegime::Closed {
                            form: ClosedFormId::StandardOuAutocov { theta },
                        });
                    }
                    Ok(AsymptoticRegime::PowerLaw {
                        exponent: 2.0 * hurst - 2.0,
                        constant: LeadingConstant::Closed(
                            hurst * (2.0 * hurst - 1.0) / (theta * theta),
                        ),
                    })
                }
                _ => Err(Error::NonStationaryDriver(
                    "no stationary regime for first-kind subfBm/bifBm".into(),
                )),
            }
        }
        NoiseKind::SecondKind { base } => {
            if let ProcessSpec::BiFbm { hurst, k } = *base {
                if k != 1.0 {
                    if hurst == 0.5 {
                        return Err(Error::Domain(
                            "bifBm second kind with H = 1/2 is outside the classified regimes"
                                .into(),
                        ));
                    }
                    if hurst * k == 0.5 {
                        return Err(Error::Domain("bifBm second kind requires HK ≠ 1/2".into()));
                    }
                }
            }
            let (kappa, r) = base.second_kind_cov_dd_tail()?;
            if kappa == 0.0 {
                // Brownian-type base: ρ'' vanishes, standard OU law.
                return Ok(AsymptoticRegime::Closed {
                    form: ClosedFormId::StandardOuAutocov { theta },
                });
            }
            let rel = (theta - r) / r;
            if rel.abs() < 1e-12 {
                Ok(AsymptoticRegime::Exponential {
                    rate: r,
                    poly_degree: 1,
                    constant: LeadingConstant::Closed(kappa / (2.0 * theta)),
                    boundary: true,
                })
            } else if theta < r {
                // At θ = 1 (below f's tail rate) the e^{-θt} coefficient
                // vanishes identically and the kernel rate takes over.
                if theta == 1.0 && base.lamperti_cov_tail_rate()? > 1.0 {
                    return Ok(AsymptoticRegime::Exponential {
                        rate: r,
                        poly_degree: 0,
                        constant: LeadingConstant::Closed(kappa / (theta * theta - r * r)),
                        boundary: false,
                    });
                }
                Ok(AsymptoticRegime::Exponential {
                    rate: theta,
                    poly_degree: 0,
                    constant: LeadingConstant::SlowRegimeIntegral { ou: *ou },
                    boundary: false,
                })
            } else {
                Ok(AsymptoticRegime::Exponential {
                    rate: r,
                    poly_degree: 0,
                    constant: LeadingConstant::Closed(kappa / (theta * theta - r * r)),
                    boundary: false,
                })
            }
        }
    }
}

/// Variance limit and approach rate of the non-stationary first-kind
/// processes: `(H Γ(2H)/θ^{2H}, 2H-2)` for subfBm,
/// `(HK Γ(2HK)/(2^{K-1} θ^{2HK}), 2HK-2)` for bifBm.
pub fn nonstationary_variance_limit(ou: &OuSpec) -> Result<(f64, f64)> {
    let theta = ou.require_positive_theta()?;
    let NoiseKind::FirstKind { process } = &ou.noise else {
        return Err(Error::Domain(
            "nonstationary_variance_limit applies to first-kind subfBm/bifBm".into(),
        ));
    };
    match *process {
        ProcessSpec::SubFbm { hurst } => {
            if hurst == 0.5 {
                return Err(Error::Domain("subfBm limit requires H ≠ 1/2".into()));
            }
            Ok((hurst * gamma(2.0 * hurst) / theta.powf(2.0 * hurst), 2.0 * hurst - 2.0))
        }
        ProcessSpec::BiFbm { hurst, k } => {
            let hk = hurst * k;
            if hk == 0.5 {
                return Err(Error::Domain("bifBm limit requires HK ≠ 1/2".into()));
            }
            Ok((
                hk * gamma(2.0 * hk) / ((2.0f64).powf(k - 1.0) * theta.powf(2.0 * hk)),
                2.0 * hk - 2.0,
            ))
        }
        _ => Err(Error::Domain(
            "nonstationary_variance_limit applies to first-kind subfBm/bifBm".into(),
        )),
    }
}

/// Exponent of the covariance bound `E(X_s X_t) ≤ C|t-s|^e` for the
/// non-stationary first-kind processes.
pub fn nonstationary_cov_bound_exponent(ou: &OuSpec) -> Result<f64> {
    ou.require_positive_theta()?;
    let NoiseKind::FirstKind { process } = &ou.noise else {
        return Err(Error::Domain(
            "covariance bound exponents apply to first-kind subfBm/bifBm".into(),
        ));
    };
    match *process {
        ProcessSpec::SubFbm { hurst } => Ok(2.0 * hurst - 2.0),
        ProcessSpec::BiFbm { hurst, k } => Ok(if hurst < 0.5 {
            2.0 * hurst * k - 2.0 * hurst - 1.0
        } else {
            2.0 * hurst * k - 2.0
        }),
        _ => Err(Error::Domain(
            "covariance bound exponents apply to first-kind subfBm/bifBm".into(),
        )),
    }
}

/// Model family for [`fit_decay`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayModel {
    /// `v = c t^e`: fit `log v` against `log t`, report the exponent `e`.
    Power,
    /// `v = c e^{-rt}`: fit `log v` against `t`, report the rate `r > 0`.
    Exponential,
}

/// Result of a decay fit.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// Power exponent (negative) or exponential rate (positive).
    pub value: f64,
    pub r_squared: f64,
    /// Points dropped because the value was not positive.
    pub dropped: usize,
}

/// Least-squares decay fit on a `(t, value)` series with increasing `t`.
/// Nonpositive values are dropped (counted); fewer than 5 usable points
/// is an error.
pub fn fit_decay(series: &[(f64, f64)], model: DecayModel) -> Result<DecayFit> {
    if series.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Domain("fit_decay needs strictly increasing t".into()));
    }
    let usable: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, v)| *v > 0.0 && *t > 0.0)
        .map(|&(t, v)| {
            let x = match model {
                DecayModel::Power => t.ln(),
                DecayModel::Exponential => t,
            };
            (x, v.ln())
        })
        .collect();
    let dropped = series.len() - usable.len();
    if usable.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} usable points after dropping {dropped}; need at least 5",
            usable.len()
        )));
    }
    let (slope, r_squared) = linear_fit(&usable);
    let value = match model {
        DecayModel::Power => slope,
        DecayModel::Exponential => -slope,
    };
    Ok(DecayFit { value, r_squared, dropped })
}

/// Exponential fit with polynomial-prefactor detection: compares
/// `log v = a - rt` against `log v = a - rt + log t` and keeps the model
/// with the smaller residual. Returns `(rate, poly_degree, r²)`.
pub fn fit_decay_poly(series: &[(f64, f64)]) -> Result<(f64, u8, f64)> {
    let usable: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, v)| *v > 0.0 && *t > 0.0)
        .map(|&(t, v)| (t, v.ln()))
        .collect();
    if usable.len() < 5 {
        return Err(Error::InsufficientData("need at least 5 positive points".into()));
    }
    let deflated: Vec<(f64, f64)> = usable.iter().map(|&(t, lv)| (t, lv - t.ln())).collect();
    let (s0, _, sse0) = linear_fit_sse(&usable);
    let (s1, _, sse1) = linear_fit_sse(&deflated);
    if sse1 < sse0 {
        let (_, r2) = linear_fit(&deflated);
        Ok((-s1, 1, r2))
    } else {
        let (_, r2) = linear_fit(&usable);
        Ok((-s0, 0, r2))
    }
}

fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let (slope, _, sse) = linear_fit_sse(points);
    let n = points.len() as f64;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - sse / ss_tot } else { 1.0 };
    (slope, r2)
}

fn linear_fit_sse(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    (slope, intercept, sse)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QuadConfig {
        QuadConfig::default()
    }

    fn fbm_first(h: f64, theta: f64) -> OuSpec {
        OuSpec::first_kind(ProcessSpec::fbm(h).unwrap(), theta).unwrap()
    }

    fn fbm_second(h: f64, theta: f64) -> OuSpec {
        OuSpec::second_kind(ProcessSpec::fbm(h).unwrap(), theta).unwrap()
    }

    #[test]
    fn stationary_variance_closed_forms() {
        // Standard OU: 1/(2θ).
        let ou = fbm_first(0.5, 2.0);
        assert!((stationary_variance(&ou, &q()).unwrap() - 0.25).abs() < 1e-14);
        // Closed form equals the ρ-quadrature for general H.
        for &h in &[0.3, 0.7] {
            for &theta in &[0.5, 1.0, 2.0] {
                let ou = fbm_first(h, theta);
                let closed = stationary_variance(&ou, &q()).unwrap();
                let via_rho = stationary_variance_from_rho(&ou, &q()).unwrap();
                let rel = ((closed - via_rho) / closed).abs();
                assert!(rel < 1e-8, "H={h} θ={theta}: {closed} vs {via_rho} (rel {rel})");
            }
        }
    }

    #[test]
    fn stationary_variance_rejects_nonstationary_drivers() {
        let ou = OuSpec::first_kind(ProcessSpec::subfbm(0.7).unwrap(), 1.0).unwrap();
        assert!(matches!(
            stationary_variance(&ou, &q()),
            Err(Error::NonStationaryDriver(_))
        ));
    }

    #[test]
    fn second_kind_brownian_base_is_standard_ou() {
        // θ = 1 kills the integral term; f(0) = (1/2)^1 = 1/2.
        let ou = fbm_second(0.5, 1.0);
        assert!((stationary_variance(&ou, &q()).unwrap() - 0.5).abs() < 1e-12);
        // General θ still reproduces 1/(2θ).
        for &theta in &[0.3, 2.5] {
            let ou = fbm_second(0.5, theta);
            let got = stationary_variance(&ou, &q()).unwrap();
            let expect = 0.5 / theta;
            assert!((got - expect).abs() < 1e-10 * expect, "θ={theta}: {got}");
        }
    }

    #[test]
    fn second_kind_variance_routes_agree() {
        for spec in [
            ProcessSpec::fbm(0.7).unwrap(),
            ProcessSpec::subfbm(0.65).unwrap(),
            ProcessSpec::bifbm(0.6, 0.5).unwrap(),
        ] {
            let ou = OuSpec::second_kind(spec, 0.8).unwrap();
            let a = stationary_variance(&ou, &q()).unwrap();
            let b = stationary_variance_from_rho(&ou, &q()).unwrap();
            let rel = ((a - b) / a).abs();
            assert!(rel < 1e-6, "{}: {a} vs {b} (rel {rel})", spec.tag());
        }
    }

    #[test]
    fn moments_match_gaussian_formula() {
        let ou = fbm_first(0.5, 1.0);
        assert_eq!(stationary_moment(&ou, 3).unwrap(), 0.0);
        assert!((stationary_moment(&ou, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!((stationary_moment(&ou, 4).unwrap() - 0.75).abs() < 1e-15);
        for &h in &[0.3, 0.7] {
            let ou = fbm_first(h, 1.3);
            let sigma2 = stationary_variance(&ou, &q()).unwrap();
            for &p in &[2u32, 4, 6] {
                let expect = match p {
                    2 => sigma2,
                    4 => 3.0 * sigma2 * sigma2,
                    6 => 15.0 * sigma2.powi(3),
                    _ => unreachable!(),
                };
                let got = stationary_moment(&ou, p).unwrap();
                assert!((got - expect).abs() < 1e-13 * expect);
            }
        }
    }

    #[test]
    fn brownian_autocovariance_is_exact() {
        let ou = fbm_first(0.5, 1.0);
        let got = stationary_autocov(&ou, 2.0, &q()).unwrap();
        let expect = (-2.0f64).exp() / 2.0;
        assert!((got - expect).abs() < 1e-14);
        // Lag 0 equals the variance for every stationary model.
        for ou in [fbm_first(0.7, 1.0), fbm_second(0.7, 1.0)] {
            let v = stationary_variance(&ou, &q()).unwrap();
            assert_eq!(stationary_autocov(&ou, 0.0, &q()).unwrap(), v);
        }
    }

    #[test]
    fn first_kind_power_law_constant() {
        // r(t)·θ²/(H(2H-1)t^{2H-2}) -> 1; the t^{2H-2}/θ² law carries the
        // kernel constant H(2H-1).
        let h: f64 = 0.7;
        let ou = fbm_first(h, 1.0);
        let t: f64 = 30.0;
        let r = stationary_autocov(&ou, t, &q()).unwrap();
        let ratio = r / (h * (2.0 * h - 1.0) * t.powf(2.0 * h - 2.0));
        assert!((0.9..=1.1).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn link_formula_controls_finite_horizon_variance() {
        // |E(X_t²) - σ²| ≤ C e^{-θt}: check the decay through two points.
        let ou = fbm_first(0.7, 1.0);
        let sigma2 = stationary_variance(&ou, &q()).unwrap();
        let d5 = (ou_variance(&ou, 5.0, &q()).unwrap() - sigma2).abs();
        let d10 = (ou_variance(&ou, 10.0, &q()).unwrap() - sigma2).abs();
        let c5 = d5 / (-5.0f64).exp();
        let c10 = d10 / (-10.0f64).exp();
        assert!(c5 < 10.0 && c10 < 10.0, "constants {c5} {c10}");
        // Brownian case is exact.
        let bm = fbm_first(0.5, 1.0);
        let got = ou_variance(&bm, 3.0, &q()).unwrap();
        let expect = (1.0 - (-6.0f64).exp()) / 2.0;
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn autocov_routes_agree_first_and_second_kind() {
        for ou in [fbm_first(0.7, 1.0), fbm_first(0.35, 1.0), fbm_second(0.7, 1.0)] {
            let a = ou_autocov(&ou, 2.0, 3.5, &q()).unwrap();
            let b = ou_autocov_via_cross_cov(&ou, 2.0, 3.5, &q()).unwrap();
            let scale = a.abs().max(1e-6);
            assert!(
                ((a - b) / scale).abs() < 1e-6,
                "{:?}: link {a} vs cross-cov {b}",
                ou.noise
            );
        }
    }

    #[test]
    fn regime_catalog_matches_the_case_split() {
        // First kind, H ≠ 1/2: power law with constant H(2H-1)/θ².
        let ou = fbm_first(0.7, 1.0);
        match classify_regime(&ou).unwrap() {
            AsymptoticRegime::PowerLaw { exponent, constant } => {
                assert!((exponent + 0.6).abs() < 1e-14);
                let c = constant.value(&q()).unwrap();
                assert!((c - 0.28).abs() < 1e-14);
            }
            other => panic!("unexpected regime {other:?}"),
        }
        // H = 1/2: closed standard OU law.
        assert!(matches!(
            classify_regime(&fbm_first(0.5, 2.0)).unwrap(),
            AsymptoticRegime::Closed { .. }
        ));
        // Second kind fBm H = 0.8: r = 0.25.
        match classify_regime(&fbm_second(0.8, 3.0)).unwrap() {
            AsymptoticRegime::Exponential { rate, poly_degree, boundary, .. } => {
                assert!((rate - 0.25).abs() < 1e-14);
                assert_eq!(poly_degree, 0);
                assert!(!boundary);
            }
            other => panic!("unexpected {other:?}"),
        }
        let slow = classify_regime(&fbm_second(0.8, 0.1)).unwrap();
        assert_eq!(slow.rate(), Some(0.1));
        match classify_regime(&fbm_second(0.8, 0.25)).unwrap() {
            AsymptoticRegime::Exponential { poly_degree, boundary, .. } => {
                assert_eq!(poly_degree, 1);
                assert!(boundary);
            }
            other => panic!("unexpected {other:?}"),
        }
        // Second-kind rates for the other bases.
        let sub = classify_regime(
            &OuSpec::second_kind(ProcessSpec::subfbm(0.7).unwrap(), 5.0).unwrap(),
        )
        .unwrap();
        assert!((sub.rate().unwrap() - (2.0 / 0.7 - 1.0)).abs() < 1e-12);
        let bi_low = classify_regime(
            &OuSpec::second_kind(ProcessSpec::bifbm(0.4, 0.6).unwrap(), 9.0).unwrap(),
        )
        .unwrap();
        assert!((bi_low.rate().unwrap() - (2.0 / 0.6 - 1.0)).abs() < 1e-12);
        let bi_high = classify_regime(
            &OuSpec::second_kind(ProcessSpec::bifbm(0.7, 0.6).unwrap(), 9.0).unwrap(),
        )
        .unwrap();
        assert!((bi_high.rate().unwrap() - (1.0 / 0.42 - 1.0)).abs() < 1e-10);
        // Excluded bifBm parameters.
        assert!(classify_regime(
            &OuSpec::second_kind(ProcessSpec::bifbm(0.5, 0.6).unwrap(), 1.0).unwrap()
        )
        .is_err());
        assert!(classify_regime(
            &OuSpec::second_kind(ProcessSpec::bifbm(0.625, 0.8).unwrap(), 1.0).unwrap()
        )
        .is_err());
    }

    #[test]
    fn nonstationary_limits_and_bound_exponents() {
        let sub = OuSpec::first_kind(ProcessSpec::subfbm(0.7).unwrap(), 1.0).unwrap();
        let (limit, rate) = nonstationary_variance_limit(&sub).unwrap();
        assert!((limit - 0.7 * gamma(1.4)).abs() < 1e-12);
        assert!((rate + 0.6).abs() < 1e-14);
        assert!((nonstationary_cov_bound_exponent(&sub).unwrap() + 0.6).abs() < 1e-14);

        // K = 1 collapse: same limit as the plain fBm case.
        let bi1 = OuSpec::first_kind(ProcessSpec::bifbm(0.7, 1.0).unwrap(), 1.0).unwrap();
        let (limit1, _) = nonstationary_variance_limit(&bi1).unwrap();
        assert!((limit1 - 0.7 * gamma(1.4)).abs() < 1e-12);

        let bi = OuSpec::first_kind(ProcessSpec::bifbm(0.6, 0.5).unwrap(), 1.0).unwrap();
        let (limit, rate) = nonstationary_variance_limit(&bi).unwrap();
        let expect = 0.3 * gamma(0.6) / (2.0f64).powf(-0.5);
        assert!((limit - expect).abs() < 1e-12 * expect);
        assert!((rate + 1.4).abs() < 1e-14);

        let bi_low = OuSpec::first_kind(ProcessSpec::bifbm(0.4, 0.6).unwrap(), 1.0).unwrap();
        assert!((nonstationary_cov_bound_exponent(&bi_low).unwrap() + 1.32).abs() < 1e-12);
        let bi_mid = OuSpec::first_kind(ProcessSpec::bifbm(0.6, 0.6).unwrap(), 1.0).unwrap();
        assert!((nonstationary_cov_bound_exponent(&bi_mid).unwrap() + 1.28).abs() < 1e-12);
    }

    #[test]
    fn decay_fit_recovers_exact_laws() {
        let power: Vec<(f64, f64)> = (1..=20)
            .map(|i| {
                let t = i as f64;
                (t, t.powf(-0.6))
            })
            .collect();
        let fit = fit_decay(&power, DecayModel::Power).unwrap();
        assert!((fit.value + 0.6).abs() < 1e-10);
        assert!(fit.r_squared > 1.0 - 1e-12);

        let exp: Vec<(f64, f64)> = (1..=20)
            .map(|i| {
                let t = 0.5 * i as f64;
                (t, 3.0 * (-2.0 * t).exp())
            })
            .collect();
        let fit = fit_decay(&exp, DecayModel::Exponential).unwrap();
        assert!((fit.value - 2.0).abs() < 1e-10);

        // Dropping nonpositive values, then failing below 5 points.
        let mut with_bad = power.clone();
        with_bad[3].1 = -1.0;
        let fit = fit_decay(&with_bad, DecayModel::Power).unwrap();
        assert_eq!(fit.dropped, 1);
        let short: Vec<(f64, f64)> = power.iter().take(4).cloned().collect();
        assert!(matches!(
            fit_decay(&short, DecayModel::Power),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn poly_detection_distinguishes_prefactors() {
        let plain: Vec<(f64, f64)> = (4..=24)
            .map(|i| {
                let t = i as f64;
                (t, 1.7 * (-0.8 * t).exp())
            })
            .collect();
        let (rate, deg, _) = fit_decay_poly(&plain).unwrap();
        assert_eq!(deg, 0);
        assert!((rate - 0.8).abs() < 1e-8);

        let poly: Vec<(f64, f64)> = (4..=24)
            .map(|i| {
                let t = i as f64;
                (t, 0.4 * t * (-0.8 * t).exp())
            })
            .collect();
        let (rate, deg, _) = fit_decay_poly(&poly).unwrap();
        assert_eq!(deg, 1);
        assert!((rate - 0.8).abs() < 1e-8);
    }

    #[test]
    fn hermite_shares_the_fbm_code_path() {
        let h = 0.75;
        let theta = 1.3;
        let fbm = fbm_first(h, theta);
        let herm = OuSpec::first_kind(ProcessSpec::hermite(3, h).unwrap(), theta).unwrap();
        assert_eq!(
            stationary_variance(&fbm, &q()).unwrap(),
            stationary_variance(&herm, &q()).unwrap()
        );
        assert_eq!(
            stationary_autocov(&fbm, 2.5, &q()).unwrap(),
            stationary_autocov(&herm, 2.5, &q()).unwrap()
        );
        let a = classify_regime(&fbm).unwrap();
        let b = classify_regime(&herm).unwrap();
        assert_eq!(a, b);
    }
}
