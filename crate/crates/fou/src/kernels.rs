//! Closed-form covariance kernels and their derived functions.
//!
//! Supported noise families, all centered:
//!
//! | family | covariance `R(s,t)` | Hölder/self-similarity exponent γ |
//! |---|---|---|
//! | fBm `B^H` | `½(|s|^{2H} + |t|^{2H} - |t-s|^{2H})` | `H` |
//! | subfBm `S^H` | `s^{2H} + t^{2H} - ½((s+t)^{2H} + |t-s|^{2H})` | `H` |
//! | bifBm `B^{H,K}` | `2^{-K}((s^{2H} + t^{2H})^K - |t-s|^{2HK})` | `HK` |
//! | Hermite of order q | same as fBm (`H > ½`) | `H` |
//!
//! Beyond the kernels themselves the module carries the machinery for
//! OU processes of the second kind: the hyperbolic power functions
//! [`sinh_pow`]/[`cosh_pow`], the Lamperti covariance `f(x)` of the
//! stationarized base with its iterated integral `h(t)`, and the second
//! derivative of the increment-variance function of the time-changed
//! noise `Y`.
//!
//! Everything here is a pure function of its arguments; the numerically
//! delicate combinations (`e^x + e^{-x} - sinh_pow`, covariances at
//! strongly separated arguments) are evaluated through `expm1`/`ln_1p`
//! forms so that relative accuracy survives cancellation.

use crate::quadrature::{self, EndpointSingularity, QuadConfig};
use crate::{Error, Result};

/// Identifies the driving-noise family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProcessSpec {
    /// Fractional Brownian motion, `H ∈ (0,1)`.
    Fbm { hurst: f64 },
    /// Subfractional Brownian motion, `H ∈ (0,1)`.
    SubFbm { hurst: f64 },
    /// Bifractional Brownian motion, `H ∈ (0,1)`, `K ∈ (0,1]`. `K = 1`
    /// collapses to fBm and is routed to the fBm code paths exactly.
    BiFbm { hurst: f64, k: f64 },
    /// Hermite process of order `q ≥ 1`, `H ∈ (½,1)`. Shares the fBm
    /// covariance for every order; non-Gaussian for `q ≥ 2`.
    Hermite { order: u32, hurst: f64 },
}

/// Hölder / self-similarity exponent of a supported process.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HolderExponent(f64);

impl HolderExponent {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0,1), got {v}")))
    }
}

impl ProcessSpec {
    pub fn fbm(hurst: f64) -> Result<Self> {
        check_unit_open("Hurst parameter", hurst)?;
        Ok(ProcessSpec::Fbm { hurst })
    }

    pub fn subfbm(hurst: f64) -> Result<Self> {
        check_unit_open("Hurst parameter", hurst)?;
        Ok(ProcessSpec::SubFbm { hurst })
    }

    pub fn bifbm(hurst: f64, k: f64) -> Result<Self> {
        check_unit_open("Hurst parameter", hurst)?;
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::Domain(format!("bifBm K must lie in (0,1], got {k}")));
        }
        Ok(ProcessSpec::BiFbm { hurst, k })
    }

    pub fn hermite(order: u32, hurst: f64) -> Result<Self> {
        if order < 1 {
            return Err(Error::Domain("Hermite order must be ≥ 1".into()));
        }
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(Error::Domain(format!(
                "Hermite processes require H ∈ (1/2,1), got {hurst}"
            )));
        }
        Ok(ProcessSpec::Hermite { order, hurst })
    }

    /// The exponent γ with `E(G_t - G_s)² ≤ C|t-s|^{2γ}`: `H` for
    /// fBm/subfBm/Hermite, `H·K` for bifBm.
    pub fn holder_exponent(&self) -> HolderExponent {
        HolderExponent(match *self {
            ProcessSpec::Fbm { hurst } | ProcessSpec::SubFbm { hurst } => hurst,
            ProcessSpec::Hermite { hurst, .. } => hurst,
            ProcessSpec::BiFbm { hurst, k } => hurst * k,
        })
    }

    /// Gaussian families only; Hermite processes of order ≥ 2 are not.
    pub fn is_gaussian(&self) -> bool {
        match *self {
            ProcessSpec::Hermite { order, .. } => order == 1,
            _ => true,
        }
    }

    /// Whether the increments are stationary (fBm/Hermite yes,
    /// subfBm/bifBm no).
    pub fn has_stationary_increments(&self) -> bool {
        matches!(self, ProcessSpec::Fbm { .. } | ProcessSpec::Hermite { .. })
    }

    /// Short lowercase tag used in output tables and manifests.
    pub fn tag(&self) -> &'static str {
        match self {
            ProcessSpec::Fbm { .. } => "fbm",
            ProcessSpec::SubFbm { .. } => "subfbm",
            ProcessSpec::BiFbm { .. } => "bifbm",
            ProcessSpec::Hermite { .. } => "hermite",
        }
    }

    fn require_nonnegative_times(&self, s: f64, t: f64) -> Result<()> {
        if matches!(self, ProcessSpec::Fbm { .. }) || (s >= 0.0 && t >= 0.0) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{} covariance is defined for nonnegative times (got {s}, {t})",
                self.tag()
            )))
        }
    }

    /// Covariance `R(s, t)`. Symmetric; `R(t,t) ≥ 0`. fBm accepts any
    /// real arguments, the other families nonnegative ones.
    pub fn cov(&self, s: f64, t: f64) -> Result<f64> {
        self.require_nonnegative_times(s, t)?;
        Ok(match *self {
            ProcessSpec::Fbm { hurst } | ProcessSpec::Hermite { hurst, .. } => fbm_cov(hurst, s, t),
            ProcessSpec::SubFbm { hurst } => subfbm_cov(hurst, s, t),
            ProcessSpec::BiFbm { hurst, k } => {
                if k == 1.0 {
                    fbm_cov(hurst, s, t)
                } else {
                    bifbm_cov(hurst, k, s, t)
                }
            }
        })
    }

    /// Variance function `E(G_t²) = R(t,t)`.
    pub fn variance(&self, t: f64) -> Result<f64> {
        self.require_nonnegative_times(t, t)?;
        Ok(match *self {
            ProcessSpec::Fbm { hurst } | ProcessSpec::Hermite { hurst, .. } => {
                t.abs().powf(2.0 * hurst)
            }
            ProcessSpec::SubFbm { hurst } => {
                (2.0 - (2.0f64).powf(2.0 * hurst - 1.0)) * t.powf(2.0 * hurst)
            }
            ProcessSpec::BiFbm { hurst, k } => t.powf(2.0 * hurst * k),
        })
    }

    /// Mixed partial `∂²R/∂u∂v` off the diagonal.
    ///
    /// fBm/Hermite: `H(2H-1)|v-u|^{2H-2}`; subfBm adds the reflected term
    /// `-(v+u)^{2H-2}`; bifBm carries an extra smooth component from the
    /// `(u^{2H}+v^{2H})^K` factor. `u = v` is a singularity error: the
    /// integral reductions only ever touch the diagonal at domain corners.
    pub fn mixed_partial(&self, u: f64, v: f64) -> Result<f64> {
        if u == v {
            return Err(Error::Singularity(
                "mixed_partial is singular on the diagonal u = v".into(),
            ));
        }
        match *self {
            ProcessSpec::Fbm { hurst } | ProcessSpec::Hermite { hurst, .. } => {
                if !matches!(self, ProcessSpec::Fbm { .. }) && (u < 0.0 || v < 0.0) {
                    return Err(Error::Domain(
                        "hermite mixed_partial is defined for nonnegative times".into(),
                    ));
                }
                // Degenerate at H = 1/2: Brownian motion has no off-diagonal mass.
                Ok(hurst * (2.0 * hurst - 1.0) * (v - u).abs().powf(2.0 * hurst - 2.0))
            }
            ProcessSpec::SubFbm { hurst } => {
                if u <= 0.0 || v <= 0.0 {
                    return Err(Error::Domain(
                        "subfbm mixed_partial requires u, v > 0".into(),
                    ));
                }
                let h = hurst;
                Ok(h * (2.0 * h - 1.0)
                    * ((v - u).abs().powf(2.0 * h - 2.0) - (v + u).powf(2.0 * h - 2.0)))
            }
            ProcessSpec::BiFbm { hurst, k } => {
                if u <= 0.0 || v <= 0.0 {
                    return Err(Error::Domain("bifbm mixed_partial requires u, v > 0".into()));
                }
                let h = hurst;
                let hk = h * k;
                let rough = (2.0f64).powf(1.0 - k)
                    * hk
                    * (2.0 * hk - 1.0)
                    * (v - u).abs().powf(2.0 * hk - 2.0);
                let smooth = (2.0f64).powf(-k)
                    * (2.0 * h).powi(2)
                    * k
                    * (k - 1.0)
                    * (u.powf(2.0 * h) + v.powf(2.0 * h)).powf(k - 2.0)
                    * (u * v).powf(2.0 * h - 1.0);
                Ok(rough + smooth)
            }
        }
    }

    /// Lamperti covariance of the second-kind construction:
    /// `f(x) = γ^{2γ} R(e^{x/2γ}, e^{-x/2γ})`, an even function.
    ///
    /// Closed forms (γ the Hölder exponent):
    ///
    /// * fBm: `(H^{2H}/2)(e^x + e^{-x} - sinh_pow_H(x))`
    /// * subfBm: `H^{2H}(e^x + e^{-x} - ½(cosh_pow_H(x) + sinh_pow_H(x)))`
    /// * bifBm: `(HK)^{2HK} 2^{-K}(cosh_pow_{K/2}(x) - sinh_pow_{HK}(x))`
    ///
    /// Hermite bases are rejected: the second kind is defined here only
    /// for Gaussian bases.
    pub fn lamperti_cov(&self, x: f64) -> Result<f64> {
        let x = x.abs();
        match *self {
            ProcessSpec::Hermite { .. } => Err(Error::Domain(
                "second-kind construction is unsupported for Hermite bases".into(),
            )),
            ProcessSpec::Fbm { hurst } => {
                let h = hurst;
                // e^x + e^{-x} - sinh_pow = e^{-x} + e^x·(1 - (1-ε)^{2H}),
                // the product kept in log space so huge x cannot overflow.
                let eps = (-x / h).exp();
                let d = -((2.0 * h) * (-eps).ln_1p()).exp_m1();
                Ok(0.5 * h.powf(2.0 * h) * ((-x).exp() + exp_times(x, d)))
            }
            ProcessSpec::SubFbm { hurst } => {
                let h = hurst;
                let eps = (-x / h).exp();
                let sym = ((2.0 * h) * eps.ln_1p()).exp_m1() + ((2.0 * h) * (-eps).ln_1p()).exp_m1();
                Ok(h.powf(2.0 * h) * ((-x).exp() - 0.5 * exp_times(x, sym)))
            }
            ProcessSpec::BiFbm { hurst, k } => {
                if k == 1.0 {
                    return ProcessSpec::Fbm { hurst }.lamperti_cov(x);
                }
                let hk = hurst * k;
                let delta = (-2.0 * x / k).exp();
                let eps = (-x / hk).exp();
                let d = (k * delta.ln_1p()).exp_m1() - ((2.0 * hk) * (-eps).ln_1p()).exp_m1();
                Ok(hk.powf(2.0 * hk) * (2.0f64).powf(-k) * exp_times(x, d))
            }
        }
    }

    /// Iterated integral `h(t) = ∫_0^{|t|} (|t| - x) f(x) dx` of the
    /// Lamperti covariance; even, `h(0) = 0`, `h'' = f`.
    pub fn lamperti_cov_iint(&self, t: f64, q: &QuadConfig) -> Result<f64> {
        let t = t.abs();
        if t == 0.0 {
            return Ok(0.0);
        }
        let r = quadrature::integrate_1d(
            |x| (t - x) * self.lamperti_cov(x).unwrap_or(f64::NAN),
            0.0,
            t,
            EndpointSingularity::None,
            q,
        )?;
        r.require_converged(q)
    }

    /// Mixed partial `∂²R_Y/∂u∂v` of the second-kind noise covariance at
    /// lag `x = |v-u| > 0`, equal to `f(x) - f''(x)`.
    ///
    /// Since `ρ_Y(t) = 2f(0) - 2f(t) + 2h(t)` and `h'' = f`, this is
    /// exactly *half* the second derivative of the increment-variance
    /// function: `ρ''_Y = 2(f - f'')`.
    ///
    /// Closed forms:
    ///
    /// * fBm: `(2H-1) H^{2H-1} sinh_pow_shape_H(x)` where the shape is
    ///   `(e^{x/2H} - e^{-x/2H})^{2H-2}`
    /// * subfBm: `(2H-1) H^{2H-1} [(e^{x/2H}-e^{-x/2H})^{2H-2} - (e^{x/2H}+e^{-x/2H})^{2H-2}]`
    /// * bifBm: `(HK)^{2HK}(K-1)/(2^{K-2}K) · (e^{x/K}+e^{-x/K})^{K-2}`
    ///   `+ (HK)^{2HK-1}(2HK-1)/2^{K-1} · (e^{x/2HK}-e^{-x/2HK})^{2HK-2}`
    pub fn second_kind_cov_dd(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Err(Error::Singularity(
                "second_kind_cov_dd requires x > 0 (singular exponents at 0)".into(),
            ));
        }
        match *self {
            ProcessSpec::Hermite { .. } => Err(Error::Domain(
                "second-kind construction is unsupported for Hermite bases".into(),
            )),
            ProcessSpec::Fbm { hurst } => {
                let h = hurst;
                Ok((2.0 * h - 1.0) * h.powf(2.0 * h - 1.0) * sinh_shape(h, x))
            }
            ProcessSpec::SubFbm { hurst } => {
                // The two shapes share the leading order e^{-(1/H-1)x};
                // the expm1 form keeps the e^{-(2/H-1)x} difference
                // accurate at large x.
                let h = hurst;
                let eps = (-x / h).exp();
                let bracket = ((2.0 * h - 2.0) * (-eps).ln_1p()).exp_m1()
                    - ((2.0 * h - 2.0) * eps.ln_1p()).exp_m1();
                Ok((2.0 * h - 1.0)
                    * h.powf(2.0 * h - 1.0)
                    * ((h - 1.0) / h * x).exp()
                    * bracket)
            }
            ProcessSpec::BiFbm { hurst, k } => {
                if k == 1.0 {
                    return ProcessSpec::Fbm { hurst }.second_kind_cov_dd(x);
                }
                let hk = hurst * k;
                let smooth = hk.powf(2.0 * hk) * (k - 1.0) / ((2.0f64).powf(k - 2.0) * k)
                    * cosh_shape(0.5 * k, x);
                let rough = hk.powf(2.0 * hk - 1.0) * (2.0 * hk - 1.0) / (2.0f64).powf(k - 1.0)
                    * sinh_shape(hk, x);
                Ok(smooth + rough)
            }
        }
    }
}

impl ProcessSpec {
    /// Tail shape of [`ProcessSpec::second_kind_cov_dd`]:
    /// `(f - f'')(u) ~ κ e^{-r u}` as `u → ∞`. Returns `(κ, r)`.
    ///
    /// fBm: `κ = (2H-1)H^{2H-1}`, `r = 1/H - 1`. subfBm: the leading
    /// orders of the two shapes cancel, leaving
    /// `κ = 4(2H-1)(1-H)H^{2H-1}`, `r = 2/H - 1`. bifBm: the slower of
    /// the smooth component (`r = 2/K - 1`) and the rough component
    /// (`r = 1/HK - 1`); the smooth one wins exactly when `H < ½`.
    pub fn second_kind_cov_dd_tail(&self) -> Result<(f64, f64)> {
        match *self {
            ProcessSpec::Hermite { .. } => Err(Error::Domain(
                "second-kind construction is unsupported for Hermite bases".into(),
            )),
            ProcessSpec::Fbm { hurst } => {
                let h = hurst;
                Ok(((2.0 * h - 1.0) * h.powf(2.0 * h - 1.0), 1.0 / h - 1.0))
            }
            ProcessSpec::SubFbm { hurst } => {
                let h = hurst;
                Ok((
                    4.0 * (2.0 * h - 1.0) * (1.0 - h) * h.powf(2.0 * h - 1.0),
                    2.0 / h - 1.0,
                ))
            }
            ProcessSpec::BiFbm { hurst, k } => {
                if k == 1.0 {
                    return ProcessSpec::Fbm { hurst }.second_kind_cov_dd_tail();
                }
                let hk = hurst * k;
                let smooth = (
                    hk.powf(2.0 * hk) * (k - 1.0) / ((2.0f64).powf(k - 2.0) * k),
                    2.0 / k - 1.0,
                );
                let rough = (
                    hk.powf(2.0 * hk - 1.0) * (2.0 * hk - 1.0) / (2.0f64).powf(k - 1.0),
                    1.0 / hk - 1.0,
                );
                Ok(if hurst < 0.5 {
                    smooth
                } else if hurst > 0.5 {
                    if rough.0 == 0.0 {
                        // HK = 1/2 kills the rough coefficient; the smooth
                        // component carries the tail.
                        smooth
                    } else {
                        rough
                    }
                } else {
                    // H = 1/2: both rates coincide, coefficients add.
                    ((smooth.0 + rough.0), smooth.1)
                })
            }
        }
    }

    /// Exponential tail rate of the Lamperti covariance itself:
    /// `f(u) ~ C e^{-ρ u}`. The `e^{-x}` component of the fBm and
    /// subfBm forms caps the rate at 1; bifBm has no such component,
    /// so its `f` decays at the full mixed-partial rate.
    pub fn lamperti_cov_tail_rate(&self) -> Result<f64> {
        match *self {
            ProcessSpec::Hermite { .. } => Err(Error::Domain(
                "second-kind construction is unsupported for Hermite bases".into(),
            )),
            ProcessSpec::Fbm { hurst } => Ok((1.0f64).min(1.0 / hurst - 1.0)),
            ProcessSpec::SubFbm { .. } => Ok(1.0),
            ProcessSpec::BiFbm { hurst, k } => {
                if k == 1.0 {
                    return ProcessSpec::Fbm { hurst }.lamperti_cov_tail_rate();
                }
                Ok((2.0 / k - 1.0).min(1.0 / (hurst * k) - 1.0))
            }
        }
    }

    /// Power exponent `β` with `(f - f'')(u) ~ c·u^β` as `u → 0+`
    /// (the rough component always dominates at the origin).
    pub fn second_kind_cov_dd_zero_exponent(&self) -> Result<f64> {
        match *self {
            ProcessSpec::Hermite { .. } => Err(Error::Domain(
                "second-kind construction is unsupported for Hermite bases".into(),
            )),
            ProcessSpec::Fbm { hurst } | ProcessSpec::SubFbm { hurst } => Ok(2.0 * hurst - 2.0),
            ProcessSpec::BiFbm { hurst, k } => Ok(2.0 * hurst * k - 2.0),
        }
    }

    /// Decomposition of a non-stationary kernel into a scaled fBm part
    /// plus a smooth gap: `R = scale · R_fbm + g`. Returns
    /// `(scale, fbm spec)`; subfBm gives `(1, B^H)`, bifBm
    /// `(2^{1-K}, B^{HK})`. `None` for the stationary families.
    pub fn fbm_component(&self) -> Option<(f64, ProcessSpec)> {
        match *self {
            ProcessSpec::SubFbm { hurst } => Some((1.0, ProcessSpec::Fbm { hurst })),
            ProcessSpec::BiFbm { hurst, k } => {
                Some(((2.0f64).powf(1.0 - k), ProcessSpec::Fbm { hurst: hurst * k }))
            }
            _ => None,
        }
    }

    /// The gap kernel `g(s,t) = R(s,t) - scale · R_fbm(s,t)`:
    /// `½(t^{2H} + s^{2H} - (t+s)^{2H})` for subfBm,
    /// `2^{-K}((t^{2H}+s^{2H})^K - t^{2HK} - s^{2HK})` for bifBm.
    /// `∂g/∂s(s, 0) = 0` for both.
    pub fn gap_cov(&self, s: f64, t: f64) -> Result<f64> {
        match *self {
            ProcessSpec::SubFbm { hurst } => {
                let two_h = 2.0 * hurst;
                Ok(0.5 * (t.powf(two_h) + s.powf(two_h) - (t + s).powf(two_h)))
            }
            ProcessSpec::BiFbm { hurst, k } => {
                let two_h = 2.0 * hurst;
                let hk2 = 2.0 * hurst * k;
                Ok((2.0f64).powf(-k)
                    * ((t.powf(two_h) + s.powf(two_h)).powf(k) - t.powf(hk2) - s.powf(hk2)))
            }
            _ => Err(Error::Domain(
                "gap kernel exists only for subfBm/bifBm".into(),
            )),
        }
    }

    /// Mixed partial `∂²g/∂s∂r` of the gap kernel, `s, r > 0`:
    /// `-H(2H-1)(r+s)^{2H-2}` for subfBm,
    /// `(2H)²K(K-1) 2^{-K} (r^{2H}+s^{2H})^{K-2} (rs)^{2H-1}` for bifBm.
    pub fn gap_mixed_partial(&self, s: f64, r: f64) -> Result<f64> {
        if s <= 0.0 || r <= 0.0 {
            return Err(Error::Domain("gap_mixed_partial requires s, r > 0".into()));
        }
        match *self {
            ProcessSpec::SubFbm { hurst } => {
                let h = hurst;
                Ok(-h * (2.0 * h - 1.0) * (r + s).powf(2.0 * h - 2.0))
            }
            ProcessSpec::BiFbm { hurst, k } => {
                let h = hurst;
                Ok((2.0 * h).powi(2) * k * (k - 1.0) * (2.0f64).powf(-k)
                    * (r.powf(2.0 * h) + s.powf(2.0 * h)).powf(k - 2.0)
                    * (r * s).powf(2.0 * h - 1.0))
            }
            _ => Err(Error::Domain(
                "gap kernel exists only for subfBm/bifBm".into(),
            )),
        }
    }
}

/// `e^x · c` evaluated as `sign(c) e^{x + ln|c|}`, so an underflowed `c`
/// gives 0 instead of `∞ · 0 = NaN` at large `x`.
fn exp_times(x: f64, c: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c.signum() * (x + c.abs().ln()).exp()
    }
}

/// `(e^{x/2γ} - e^{-x/2γ})^{2γ} = (2 sinh(x/2γ))^{2γ}`, extended evenly to
/// `x < 0` (the raw expression has a negative base there).
pub fn sinh_pow(gamma: f64, x: f64) -> f64 {
    let x = x.abs();
    // e^x (1 - e^{-x/γ})^{2γ}, stable for every magnitude of x.
    let eps = (-x / gamma).exp();
    (x + 2.0 * gamma * (-eps).ln_1p()).exp()
}

/// `(e^{x/2γ} + e^{-x/2γ})^{2γ} = (2 cosh(x/2γ))^{2γ}`, even.
pub fn cosh_pow(gamma: f64, x: f64) -> f64 {
    let x = x.abs();
    let eps = (-x / gamma).exp();
    (x + 2.0 * gamma * eps.ln_1p()).exp()
}

/// `(e^{x/2γ} - e^{-x/2γ})^{2γ-2}` for `x > 0`.
fn sinh_shape(gamma: f64, x: f64) -> f64 {
    let eps = (-x / gamma).exp();
    ((gamma - 1.0) / gamma * x + (2.0 * gamma - 2.0) * (-eps).ln_1p()).exp()
}

/// `(e^{x/2γ} + e^{-x/2γ})^{2γ-2}` for `x ≥ 0`.
fn cosh_shape(gamma: f64, x: f64) -> f64 {
    let eps = (-x / gamma).exp();
    ((gamma - 1.0) / gamma * x + (2.0 * gamma - 2.0) * eps.ln_1p()).exp()
}

/// fBm covariance, any real arguments.
fn fbm_cov(h: f64, s: f64, t: f64) -> f64 {
    if s == 0.0 || t == 0.0 {
        return 0.0;
    }
    let two_h = 2.0 * h;
    if s.signum() != t.signum() {
        // Opposite signs: the three magnitudes stay comparable, the
        // direct expression is stable.
        return 0.5 * (s.abs().powf(two_h) + t.abs().powf(two_h) - (t - s).abs().powf(two_h));
    }
    let (big, small) = if s.abs() >= t.abs() { (s.abs(), t.abs()) } else { (t.abs(), s.abs()) };
    let w = small / big;
    // ½ s^{2H} [w^{2H} - expm1(2H ln(1-w))]: both terms positive, no
    // cancellation as w -> 0.
    0.5 * big.powf(two_h) * (w.powf(two_h) - (two_h * (-w).ln_1p()).exp_m1())
}

/// subfBm covariance, `s, t ≥ 0`.
fn subfbm_cov(h: f64, s: f64, t: f64) -> f64 {
    if s == 0.0 || t == 0.0 {
        return 0.0;
    }
    let two_h = 2.0 * h;
    let (big, small) = if s >= t { (s, t) } else { (t, s) };
    let w = small / big;
    let sym = (two_h * w.ln_1p()).exp_m1() + (two_h * (-w).ln_1p()).exp_m1();
    big.powf(two_h) * (w.powf(two_h) - 0.5 * sym)
}

/// bifBm covariance, `s, t ≥ 0`, `K < 1` (K = 1 is routed to fBm).
fn bifbm_cov(h: f64, k: f64, s: f64, t: f64) -> f64 {
    if s == 0.0 || t == 0.0 {
        return 0.0;
    }
    let two_h = 2.0 * h;
    let (big, small) = if s >= t { (s, t) } else { (t, s) };
    let w = small / big;
    let bracket = (k * w.powf(two_h).ln_1p()).exp_m1() - (2.0 * h * k * (-w).ln_1p()).exp_m1();
    (2.0f64).powf(-k) * big.powf(2.0 * h * k) * bracket
}

/// Increment variance `E(G_t - G_s)² = R(t,t) + R(s,s) - 2R(s,t)`.
pub fn increment_variance(p: &ProcessSpec, s: f64, t: f64) -> Result<f64> {
    match *p {
        // Exact stationary increments for fBm/Hermite.
        ProcessSpec::Fbm { hurst } | ProcessSpec::Hermite { hurst, .. } => {
            p.require_nonnegative_times(s, t)?;
            Ok((t - s).abs().powf(2.0 * hurst))
        }
        _ => Ok(p.variance(t)? + p.variance(s)? - 2.0 * p.cov(s, t)?),
    }
}
