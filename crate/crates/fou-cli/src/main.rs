//! Batch CLI over the `fou` library.
//!
//! Subcommands: `cov` (stationary auto-covariance tables, optionally with
//! Monte-Carlo columns), `regime` (asymptotic decay-law classification),
//! `simulate` (path ensembles with reproducibility manifests) and
//! `validate` (the named validation suites).
//!
//! Every run writes a one-line JSON manifest next to its output; a run
//! can be reproduced bit-exactly from the manifest alone
//! (`simulate --from-manifest`). Exit codes: 0 success, 1 validation
//! failure, 2 usage/parameter errors.

use clap::{Args, Parser, Subcommand};
use fou::analytics::{self, AsymptoticRegime, ClosedFormId, LeadingConstant, OuSpec};
use fou::kernels::ProcessSpec;
use fou::montecarlo::{self, DecayStudyConfig};
use fou::quadrature::QuadConfig;
use fou::simulate::{self, Grid};
use fou::validate::{Budget, Check};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fou", version, about = "fractional Ornstein-Uhlenbeck toolkit")]
struct Cli {
    /// Flat key=value config file; explicit flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for path sampling (results are thread-count
    /// invariant).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary auto-covariance at a set of lags.
    Cov(CovArgs),
    /// Classify the asymptotic decay law of the auto-covariance.
    Regime(RegimeArgs),
    /// Sample a path ensemble and write it with a manifest.
    Simulate(SimulateArgs),
    /// Run validation suites.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct ProcessArgs {
    /// Noise family: fbm | subfbm | bifbm | hermite.
    #[arg(long)]
    process: Option<String>,
    /// Hurst parameter H.
    #[arg(long)]
    hurst: Option<f64>,
    /// Second bifBm parameter K (bifbm only).
    #[arg(long)]
    k: Option<f64>,
    /// Hermite order q (hermite only).
    #[arg(long)]
    order: Option<u32>,
    /// first | second (OU kind).
    #[arg(long)]
    kind: Option<String>,
    /// Mean reversion speed θ.
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args)]
struct CovArgs {
    #[command(flatten)]
    process: ProcessArgs,
    /// Comma-separated lags.
    #[arg(long, value_delimiter = ',')]
    lags: Vec<f64>,
    /// Add Monte-Carlo value/std_error columns from a decay study.
    #[arg(long)]
    empirical: bool,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid points for the empirical study.
    #[arg(long)]
    points: Option<usize>,
    /// csv | json.
    #[arg(long)]
    format: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RegimeArgs {
    #[command(flatten)]
    process: ProcessArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    process: ProcessArgs,
    /// Horizon end (grid spans [0, t1]).
    #[arg(long)]
    t1: Option<f64>,
    /// Number of grid points.
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample the stationary solution (burn-in applied) instead of the
    /// zero-start one.
    #[arg(long)]
    stationary: bool,
    /// Burn-in horizon; default 20/θ.
    #[arg(long)]
    burn_in: Option<f64>,
    /// binary | csv (csv for small runs).
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Re-run a previous simulation from its manifest (bit-exact).
    #[arg(long)]
    from_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Comma-separated suites: identities | asymptotics | montecarlo.
    /// An empty list trivially passes.
    #[arg(long, value_delimiter = ',')]
    suite: Vec<String>,
    /// quick | full.
    #[arg(long)]
    budget: Option<String>,
    /// Re-check a simulated ensemble against its manifest summary
    /// (bit-exact round trip).
    #[arg(long)]
    ensemble: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// csv | json report; human-readable lines otherwise.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Usage/parameter problems exit 2; failed validations exit 1.
enum CliError {
    Usage(String),
    Validation(String),
}

impl From<fou::Error> for CliError {
    fn from(e: fou::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Results do not depend on the pool size; this only bounds work.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = match cli.config.as_deref().map(read_config).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => return fail(e),
    };
    let result = match cli.command {
        Command::Cov(args) => cmd_cov(args, &config),
        Command::Regime(args) => cmd_regime(args, &config),
        Command::Simulate(args) => cmd_simulate(args, &config),
        Command::Validate(args) => cmd_validate(args, &config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    match e {
        CliError::Usage(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        CliError::Validation(msg) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(1)
        }
    }
}

type Config = BTreeMap<String, String>;

/// Flat `key=value` file, `#` comments, blank lines ignored.
fn read_config(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut map = Config::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn cfg_get<T: std::str::FromStr>(config: &Config, key: &str) -> Result<Option<T>, CliError> {
    match config.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("config key '{key}': cannot parse '{raw}'"))),
    }
}

fn resolve<T: std::str::FromStr + Clone>(
    flag: &Option<T>,
    config: &Config,
    key: &str,
    default: Option<T>,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    if let Some(v) = cfg_get::<T>(config, key)? {
        return Ok(v);
    }
    default.ok_or_else(|| CliError::Usage(format!("missing required parameter '{key}'")))
}

fn build_process(a: &ProcessArgs, config: &Config) -> Result<ProcessSpec, CliError> {
    let family: String = resolve(&a.process, config, "process", Some("fbm".to_string()))?;
    let hurst: f64 = resolve(&a.hurst, config, "hurst", None)?;
    Ok(match family.as_str() {
        "fbm" => ProcessSpec::fbm(hurst)?,
        "subfbm" => ProcessSpec::subfbm(hurst)?,
        "bifbm" => {
            let k: f64 = resolve(&a.k, config, "k", None)?;
            ProcessSpec::bifbm(hurst, k)?
        }
        "hermite" => {
            let order: u32 = resolve(&a.order, config, "order", Some(2))?;
            ProcessSpec::hermite(order, hurst)?
        }
        other => return Err(CliError::Usage(format!("unknown process family '{other}'"))),
    })
}

fn build_ou(a: &ProcessArgs, config: &Config) -> Result<OuSpec, CliError> {
    let p = build_process(a, config)?;
    let kind: String = resolve(&a.kind, config, "kind", Some("first".to_string()))?;
    let theta: f64 = resolve(&a.theta, config, "theta", Some(1.0))?;
    Ok(match kind.as_str() {
        "first" => OuSpec::first_kind(p, theta)?,
        "second" => OuSpec::second_kind(p, theta)?,
        other => return Err(CliError::Usage(format!("kind must be first|second, got '{other}'"))),
    })
}

/// Resolve an output path against `FOU_OUTPUT_DIR` when it is relative.
fn output_path(p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    match std::env::var_os("FOU_OUTPUT_DIR") {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn write_or_print(output: &Option<PathBuf>, text: &str) -> Result<Option<PathBuf>, CliError> {
    match output {
        Some(p) => {
            let path = output_path(p);
            std::fs::write(&path, text)?;
            Ok(Some(path))
        }
        None => {
            print!("{text}");
            Ok(None)
        }
    }
}

/// Floats are printed with 17 significant digits so the CSV round-trips.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_manifest(path: &Path, entries: &[(&str, serde_json::Value)]) -> Result<(), CliError> {
    let mut obj = serde_json::Map::new();
    obj.insert("library_version".into(), env!("CARGO_PKG_VERSION").into());
    for (k, v) in entries {
        obj.insert((*k).to_string(), v.clone());
    }
    let line = serde_json::Value::Object(obj).to_string();
    std::fs::write(path, format!("{line}\n")).map_err(CliError::from)
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn cmd_cov(args: CovArgs, config: &Config) -> Result<(), CliError> {
    let ou = build_ou(&args.process, config)?;
    let lags: Vec<f64> = if args.lags.is_empty() {
        cfg_get::<String>(config, "lags")?
            .map(|s| parse_lags(&s))
            .transpose()?
            .ok_or_else(|| CliError::Usage("missing required parameter 'lags'".into()))?
    } else {
        args.lags.clone()
    };
    if lags.is_empty() {
        return Err(CliError::Usage("need at least one lag".into()));
    }
    let format: String = resolve(&args.format, config, "format", Some("csv".to_string()))?;
    let q = QuadConfig::default();

    let mut text = String::new();
    if args.empirical {
        let cfg = DecayStudyConfig {
            n_paths: resolve(&args.n_paths, config, "n_paths", Some(2000))?,
            seed: resolve(&args.seed, config, "seed", Some(1))?,
            grid_points: resolve(&args.points, config, "points", Some(1025))?,
            burn_in: None,
        };
        let rows = montecarlo::decay_study(&ou, &lags, &cfg, &q)?;
        match format.as_str() {
            "csv" => {
                text.push_str("lag,value,std_error,analytic\n");
                for r in rows {
                    let _ = writeln!(
                        text,
                        "{},{},{},{}",
                        fmt_f64(r.lag),
                        fmt_f64(r.value),
                        fmt_f64(r.std_error),
                        fmt_f64(r.analytic)
                    );
                }
            }
            "json" => {
                for r in rows {
                    let _ = writeln!(
                        text,
                        "{}",
                        serde_json::json!({
                            "lag": r.lag, "value": r.value,
                            "std_error": r.std_error, "analytic": r.analytic
                        })
                    );
                }
            }
            other => return Err(CliError::Usage(format!("unknown format '{other}'"))),
        }
    } else {
        let mut rows = Vec::with_capacity(lags.len());
        for &lag in &lags {
            rows.push((lag, analytics::stationary_autocov(&ou, lag, &q)?));
        }
        match format.as_str() {
            "csv" => {
                text.push_str("lag,value\n");
                for (lag, v) in rows {
                    let _ = writeln!(text, "{},{}", fmt_f64(lag), fmt_f64(v));
                }
            }
            "json" => {
                for (lag, v) in rows {
                    let _ = writeln!(text, "{}", serde_json::json!({"lag": lag, "value": v}));
                }
            }
            other => return Err(CliError::Usage(format!("unknown format '{other}'"))),
        }
    }
    let written = write_or_print(&args.output, &text)?;
    if let Some(path) = written {
        write_manifest(
            &manifest_path(&path),
            &[
                ("command", "cov".into()),
                ("ou", serde_json::to_value(ou).unwrap()),
                ("lags", serde_json::to_value(&lags).unwrap()),
                ("empirical", args.empirical.into()),
                ("format", format.clone().into()),
                ("output", path.display().to_string().into()),
            ],
        )?;
    }
    Ok(())
}

fn parse_lags(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("cannot parse lag '{p}'")))
        })
        .collect()
}

fn regime_json(regime: &AsymptoticRegime, q: &QuadConfig) -> Result<serde_json::Value, CliError> {
    Ok(match regime {
        AsymptoticRegime::PowerLaw { exponent, constant } => {
            serde_json::json!({
                "kind": "power",
                "exponent": exponent,
                "constant": constant_value(constant, q)?,
            })
        }
        AsymptoticRegime::Exponential { rate, poly_degree, constant, boundary } => {
            serde_json::json!({
                "kind": "exp",
                "rate": rate,
                "poly_degree": poly_degree,
                "constant": constant_value(constant, q)?,
                "boundary": boundary,
            })
        }
        AsymptoticRegime::Closed { form: ClosedFormId::StandardOuAutocov { theta } } => {
            serde_json::json!({
                "kind": "closed",
                "form": "standard_ou",
                "rate": theta,
                "constant": 1.0 / (2.0 * theta),
            })
        }
    })
}

fn constant_value(c: &LeadingConstant, q: &QuadConfig) -> Result<f64, CliError> {
    Ok(c.value(q)?)
}

fn cmd_regime(args: RegimeArgs, config: &Config) -> Result<(), CliError> {
    let ou = build_ou(&args.process, config)?;
    let regime = analytics::classify_regime(&ou)?;
    let record = regime_json(&regime, &QuadConfig::default())?;
    let text = format!("{record}\n");
    let written = write_or_print(&args.output, &text)?;
    if let Some(path) = written {
        write_manifest(
            &manifest_path(&path),
            &[
                ("command", "regime".into()),
                ("ou", serde_json::to_value(ou).unwrap()),
                ("output", path.display().to_string().into()),
            ],
        )?;
    }
    Ok(())
}

/// The summary statistics recorded in a simulation manifest, as exact
/// f64 bit patterns (hex) so the round trip is bit-exact.
fn ensemble_summary(e: &simulate::PathEnsemble) -> (String, String) {
    let last = e.grid.n - 1;
    let n = e.n_paths as f64;
    let mean: f64 = e.column(last).sum::<f64>() / n;
    let second: f64 = e.column(last).map(|v| v * v).sum::<f64>() / n;
    (format!("{:016x}", mean.to_bits()), format!("{:016x}", second.to_bits()))
}

fn cmd_simulate(args: SimulateArgs, config: &Config) -> Result<(), CliError> {
    // Manifest-driven rerun: the manifest is a flat JSON config.
    let (args, config) = if let Some(mpath) = &args.from_manifest {
        let text = std::fs::read_to_string(mpath)?;
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("manifest parse: {e}")))?;
        let mut cfg = config.clone();
        for (k, val) in v.as_object().into_iter().flatten() {
            let s = match val {
                serde_json::Value::Null => continue,
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            cfg.insert(k.clone(), s);
        }
        (args, cfg)
    } else {
        (args, config.clone())
    };
    let config = &config;

    let p = build_process(&args.process, config)?;
    let kind: String = resolve(&args.process.kind, config, "kind", Some("first".to_string()))?;
    let theta: f64 = resolve(&args.process.theta, config, "theta", Some(1.0))?;
    let t1: f64 = resolve(&args.t1, config, "t1", Some(10.0))?;
    let points: usize = resolve(&args.points, config, "points", Some(1025))?;
    let n_paths: usize = resolve(&args.n_paths, config, "n_paths", Some(100))?;
    let seed: u64 = resolve(&args.seed, config, "seed", Some(42))?;
    let stationary = args.stationary || cfg_get::<bool>(config, "stationary")?.unwrap_or(false);
    let burn_in = match args.burn_in {
        Some(b) => Some(b),
        None => cfg_get::<f64>(config, "burn_in")?,
    };
    let format: String = resolve(&args.format, config, "format", Some("binary".to_string()))?;
    let output: PathBuf = resolve(&args.output, config, "output", None)?;

    let grid = Grid::uniform(0.0, t1, points)?;
    let q = QuadConfig::default();
    let ens = match (kind.as_str(), stationary) {
        ("first", false) => {
            let drv = simulate::sample_gaussian(&p, &grid, n_paths, seed)?;
            simulate::ou_first_kind(drv, theta)?
        }
        ("second", false) => {
            let noise = simulate::second_kind_noise(&p, &grid, n_paths, seed, &q)?;
            simulate::ou_second_kind(noise, theta)?
        }
        (k, true) => {
            let ou = match k {
                "first" => OuSpec::first_kind(p, theta)?,
                "second" => OuSpec::second_kind(p, theta)?,
                other => {
                    return Err(CliError::Usage(format!("kind must be first|second, got '{other}'")))
                }
            };
            simulate::stationary_path(&ou, &grid, n_paths, seed, burn_in, &q)?
        }
        (other, false) => {
            return Err(CliError::Usage(format!("kind must be first|second, got '{other}'")))
        }
    };
    if matches!(ens.method, simulate::SampleMethod::DenseFallback) {
        eprintln!("note: circulant spectrum failed the tolerance; dense factorization used");
    }

    let path = output_path(&output);
    match format.as_str() {
        "binary" => {
            let file = std::fs::File::create(&path)?;
            ens.write_binary(std::io::BufWriter::new(file))?;
        }
        "csv" => {
            let file = std::fs::File::create(&path)?;
            ens.write_csv(std::io::BufWriter::new(file))?;
        }
        other => return Err(CliError::Usage(format!("unknown format '{other}'"))),
    }
    let (mean_bits, second_bits) = ensemble_summary(&ens);
    write_manifest(
        &manifest_path(&path),
        &[
            ("command", "simulate".into()),
            ("process", p.tag().into()),
            ("hurst", hurst_of(&p).into()),
            ("k", k_of(&p).map(serde_json::Value::from).unwrap_or(serde_json::Value::Null)),
            ("order", order_of(&p).map(serde_json::Value::from).unwrap_or(serde_json::Value::Null)),
            ("kind", kind.clone().into()),
            ("theta", theta.into()),
            ("t1", t1.into()),
            ("points", points.into()),
            ("n_paths", n_paths.into()),
            ("seed", seed.into()),
            ("stationary", stationary.into()),
            (
                "burn_in",
                burn_in.map(serde_json::Value::from).unwrap_or(serde_json::Value::Null),
            ),
            ("format", format.clone().into()),
            ("output", path.display().to_string().into()),
            ("summary_mean_final_bits", mean_bits.into()),
            ("summary_second_moment_final_bits", second_bits.into()),
        ],
    )?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn hurst_of(p: &ProcessSpec) -> f64 {
    match *p {
        ProcessSpec::Fbm { hurst }
        | ProcessSpec::SubFbm { hurst }
        | ProcessSpec::BiFbm { hurst, .. }
        | ProcessSpec::Hermite { hurst, .. } => hurst,
    }
}

fn k_of(p: &ProcessSpec) -> Option<f64> {
    match *p {
        ProcessSpec::BiFbm { k, .. } => Some(k),
        _ => None,
    }
}

fn order_of(p: &ProcessSpec) -> Option<u32> {
    match *p {
        ProcessSpec::Hermite { order, .. } => Some(order),
        _ => None,
    }
}

fn cmd_validate(args: ValidateArgs, config: &Config) -> Result<(), CliError> {
    // Ensemble round-trip mode: recompute the summary statistics and
    // compare bit-exactly against the manifest.
    if let (Some(ens_path), Some(man_path)) = (&args.ensemble, &args.manifest) {
        let file = std::fs::File::open(ens_path)?;
        let ens = simulate::PathEnsemble::read_binary(std::io::BufReader::new(file))?;
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(man_path)?)
                .map_err(|e| CliError::Usage(format!("manifest parse: {e}")))?;
        let (mean_bits, second_bits) = ensemble_summary(&ens);
        let want_mean = manifest["summary_mean_final_bits"].as_str().unwrap_or_default();
        let want_second =
            manifest["summary_second_moment_final_bits"].as_str().unwrap_or_default();
        if mean_bits == want_mean && second_bits == want_second {
            println!("round-trip: PASS (summaries bit-identical)");
            return Ok(());
        }
        return Err(CliError::Validation(format!(
            "summary mismatch: mean {mean_bits} vs {want_mean}, second moment {second_bits} vs {want_second}"
        )));
    }

    let suites: Vec<String> = if args.suite.is_empty() {
        match cfg_get::<String>(config, "suite")? {
            Some(s) => s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect(),
            None => Vec::new(),
        }
    } else {
        args.suite.iter().filter(|s| !s.is_empty()).cloned().collect()
    };
    let budget_name: String = resolve(&args.budget, config, "budget", Some("quick".to_string()))?;
    let budget = match budget_name.as_str() {
        "quick" => Budget::Quick,
        "full" => Budget::Full,
        other => return Err(CliError::Usage(format!("budget must be quick|full, got '{other}'"))),
    };
    let format: String = resolve(&args.format, config, "format", Some("text".to_string()))?;

    // An empty suite list trivially succeeds.
    let mut checks: Vec<Check> = Vec::new();
    for suite in &suites {
        checks.extend(fou::validate::run_suite(suite, budget)?);
    }
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();

    let mut text = String::new();
    match format.as_str() {
        "json" => {
            for c in &checks {
                let _ = writeln!(text, "{}", serde_json::to_string(c).unwrap());
            }
        }
        "csv" => {
            text.push_str("criterion,name,passed,detail\n");
            for c in &checks {
                let _ = writeln!(
                    text,
                    "{},{:?},{},{:?}",
                    c.criterion, c.name, c.passed, c.detail
                );
            }
        }
        _ => {
            for c in &checks {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                let _ = writeln!(text, "[{mark}] (criterion {}) {}: {}", c.criterion, c.name, c.detail);
            }
            let _ = writeln!(
                text,
                "{} checks, {} failed",
                checks.len(),
                failed.len()
            );
        }
    }
    write_or_print(&args.output, &text)?;
    if !failed.is_empty() {
        return Err(CliError::Validation(format!(
            "{} of {} checks failed",
            failed.len(),
            checks.len()
        )));
    }
    Ok(())
}
