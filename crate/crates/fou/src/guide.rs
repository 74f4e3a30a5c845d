//! Runnable companions to the book chapters in `book/` at the
//! repository root.
//!
//! mdBook cannot execute Rust snippets against this crate on its own,
//! so every code listing in the book lives here too, inside doc
//! comments, where `cargo test --doc` keeps it compiling and correct.
//! One submodule per chapter; the snippet names in the book match the
//! submodule names below.

/// Chapter 2: covariance kernels.
///
/// The covariance of fractional Brownian motion, and the collapse of
/// bifractional Brownian motion onto it at `K = 1`:
///
/// ```
/// use fou::ProcessSpec;
///
/// let fbm = ProcessSpec::fbm(0.7)?;
/// // R(t, t) = |t|^{2H}
/// assert!((fbm.cov(2.0, 2.0)? - 2.0f64.powf(1.4)).abs() < 1e-14);
///
/// let bifbm = ProcessSpec::bifbm(0.7, 1.0)?;
/// assert_eq!(bifbm.cov(0.3, 1.9)?, fbm.cov(0.3, 1.9)?);
/// # Ok::<(), fou::Error>(())
/// ```
///
/// Mixed partials against a central finite difference of the kernel:
///
/// ```
/// use fou::ProcessSpec;
///
/// let p = ProcessSpec::subfbm(0.65)?;
/// let (u, v, h) = (0.8, 1.7, 1e-4);
/// let fd = (p.cov(u + h, v + h)? - p.cov(u - h, v + h)?
///     - p.cov(u + h, v - h)? + p.cov(u - h, v - h)?) / (4.0 * h * h);
/// let exact = p.mixed_partial(u, v)?;
/// assert!(((fd - exact) / exact).abs() < 1e-4);
/// # Ok::<(), fou::Error>(())
/// ```
pub mod kernels_chapter {}

/// Chapter 3: the second-kind construction.
///
/// The Lamperti covariance must agree with its definition
/// `γ^{2γ} R(e^{x/2γ}, e^{-x/2γ})`: that equality is what pins the
/// sign conventions of the closed forms:
///
/// ```
/// use fou::ProcessSpec;
///
/// let base = ProcessSpec::bifbm(0.6, 0.5)?;
/// let g = base.holder_exponent().value();
/// for x in [0.1, 1.0, 5.0] {
///     let definitional = g.powf(2.0 * g)
///         * base.cov((x / (2.0 * g)).exp(), (-x / (2.0 * g)).exp())?;
///     let closed = base.lamperti_cov(x)?;
///     assert!(((closed - definitional) / definitional).abs() < 1e-10);
/// }
/// # Ok::<(), fou::Error>(())
/// ```
///
/// A Brownian base makes the second-kind noise an ordinary OU driver;
/// its Lamperti covariance is `e^{-x}/2` and the iterated integral has
/// the closed form `(t - 1 + e^{-t})/2`:
///
/// ```
/// use fou::{ProcessSpec, QuadConfig};
///
/// let bm = ProcessSpec::fbm(0.5)?;
/// assert!((bm.lamperti_cov(0.7)? - 0.5 * (-0.7f64).exp()).abs() < 1e-14);
/// let h = bm.lamperti_cov_iint(2.0, &QuadConfig::default())?;
/// assert!((h - 0.5 * (2.0 - 1.0 + (-2.0f64).exp())).abs() < 1e-10);
/// # Ok::<(), fou::Error>(())
/// ```
pub mod second_kind_chapter {}

/// Chapter 4: adaptive quadrature.
///
/// Integrable endpoint singularities are announced and pre-graded:
///
/// ```
/// use fou::quadrature::{integrate_1d, EndpointSingularity};
/// use fou::QuadConfig;
///
/// let q = QuadConfig::default();
/// let r = integrate_1d(|x| x.powf(-0.5), 0.0, 1.0, EndpointSingularity::Left, &q)?;
/// assert!(r.converged);
/// assert!((r.value - 2.0).abs() < 1e-8);
/// # Ok::<(), fou::Error>(())
/// ```
///
/// The stationary double integral collapses to two 1-D integrals; the
/// brute 2-D evaluation stays available as an oracle:
///
/// ```
/// use fou::quadrature::{stationary_double, stationary_double_brute};
/// use fou::QuadConfig;
///
/// let q = QuadConfig::default();
/// let gamma = 0.7;
/// let k = |u: f64| u.powf(2.0 * gamma - 2.0);
/// let fast = stationary_double(k, 2.0 * gamma - 2.0, 1.0, 2.0, &q)?;
/// let brute = stationary_double_brute(k, 1.0, 2.0, 40.0, &q)?;
/// assert!(((fast.value - brute.value) / fast.value).abs() < 1e-6);
/// # Ok::<(), fou::Error>(())
/// ```
pub mod quadrature_chapter {}

/// Chapter 5: stationary laws and decay regimes.
///
/// The Brownian case is exact; the long-memory case decays as a power
/// law with the kernel constant `H(2H-1)/θ²`:
///
/// ```
/// use fou::analytics::{classify_regime, stationary_autocov, stationary_variance};
/// use fou::{AsymptoticRegime, OuSpec, ProcessSpec, QuadConfig};
///
/// let q = QuadConfig::default();
/// let bm = OuSpec::first_kind(ProcessSpec::fbm(0.5)?, 2.0)?;
/// assert!((stationary_variance(&bm, &q)? - 0.25).abs() < 1e-14);
///
/// let ou = OuSpec::first_kind(ProcessSpec::fbm(0.7)?, 1.0)?;
/// match classify_regime(&ou)? {
///     AsymptoticRegime::PowerLaw { exponent, .. } => {
///         assert!((exponent + 0.6).abs() < 1e-12)
///     }
///     other => panic!("unexpected regime {other:?}"),
/// }
/// // The quadrature series approaches the asymptote.
/// let t = 30.0;
/// let r = stationary_autocov(&ou, t, &q)?;
/// let ratio = r / (0.28 * t.powf(-0.6));
/// assert!((0.9..1.1).contains(&ratio));
/// # Ok::<(), fou::Error>(())
/// ```
///
/// Second-kind models always decay exponentially, with the rate capped
/// by the tail rate of the noise kernel:
///
/// ```
/// use fou::analytics::classify_regime;
/// use fou::{AsymptoticRegime, OuSpec, ProcessSpec};
///
/// let ou = OuSpec::second_kind(ProcessSpec::fbm(0.8)?, 3.0)?;
/// let regime = classify_regime(&ou)?;
/// assert_eq!(regime.rate(), Some(0.25)); // 1/H - 1 despite θ = 3
/// let boundary = OuSpec::second_kind(ProcessSpec::fbm(0.8)?, 0.25)?;
/// assert!(matches!(
///     classify_regime(&boundary)?,
///     AsymptoticRegime::Exponential { poly_degree: 1, boundary: true, .. }
/// ));
/// # Ok::<(), fou::Error>(())
/// ```
pub mod asymptotics_chapter {}

/// Chapter 6: simulation.
///
/// Ensembles are a pure function of `(seed, grid, n_paths)`; Brownian
/// increments come out with the right variance:
///
/// ```
/// use fou::simulate::{ou_first_kind, sample_gaussian};
/// use fou::{Grid, ProcessSpec};
///
/// let grid = Grid::uniform(0.0, 1.0, 129)?;
/// let p = ProcessSpec::fbm(0.5)?;
/// let e = sample_gaussian(&p, &grid, 500, 42)?;
/// let again = sample_gaussian(&p, &grid, 500, 42)?;
/// assert_eq!(e.paths, again.paths);
///
/// // θ = 0 leaves the driver untouched.
/// let x = ou_first_kind(e, 0.0)?;
/// assert_eq!(x.paths, again.paths);
/// # Ok::<(), fou::Error>(())
/// ```
pub mod simulation_chapter {}

/// Chapter 7: Monte-Carlo validation.
///
/// Estimators carry standard errors and refuse off-grid times:
///
/// ```
/// use fou::montecarlo::estimate_cov;
/// use fou::simulate::sample_gaussian;
/// use fou::{Grid, ProcessSpec};
///
/// let grid = Grid::uniform(0.0, 2.0, 33)?;
/// let p = ProcessSpec::fbm(0.7)?;
/// let e = sample_gaussian(&p, &grid, 4000, 7)?;
/// let est = estimate_cov(&e, 1.0, 2.0)?;
/// let exact = p.cov(1.0, 2.0)?;
/// assert!((est.value - exact).abs() < 4.0 * est.std_error);
/// assert!(estimate_cov(&e, 0.33, 2.0).is_err());
/// # Ok::<(), fou::Error>(())
/// ```
pub mod montecarlo_chapter {}
