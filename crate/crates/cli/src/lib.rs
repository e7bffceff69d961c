//! Experiment driver behind the `qdarwin` binary. Every command returns its
//! output document as text so runs can be compared byte for byte.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use qdarwin::dynamics::{scramble_environment, DynamicsError, ScrambleConfig};
use qdarwin::foundations::{
    born_probabilities, copier_search, envariance_check, evaluate_copier, phase_operator,
    random_repeatable_triple, EvenBranchState, FinegrainSpec, FoundationsError, LocalUnitary,
};
use qdarwin::hilbert::{HilbertError, StateVector};
use qdarwin::infotheory::{
    linear_fit, partial_information_plot, plateau_deviation, redundancy, InfoError,
    PartialInfoCurve, Sampling,
};
use qdarwin::prep::{PrepParams, PreparationRegistry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("{0}")]
    Capacity(String),
    #[error("{0}")]
    Computation(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::BadConfig(_) => 2,
            CliError::Capacity(_) => 3,
            CliError::Computation(_) | CliError::Io { .. } => 1,
        }
    }
}

impl From<HilbertError> for CliError {
    fn from(e: HilbertError) -> Self {
        match e {
            HilbertError::CapacityExceeded(_) => CliError::Capacity(e.to_string()),
            other => CliError::BadConfig(other.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Hilbert(h) => h.into(),
            other => CliError::BadConfig(other.to_string()),
        }
    }
}

impl From<InfoError> for CliError {
    fn from(e: InfoError) -> Self {
        match e {
            InfoError::Hilbert(h) => h.into(),
            InfoError::InvalidDelta(_) => CliError::BadConfig(e.to_string()),
            other => CliError::Computation(other.to_string()),
        }
    }
}

impl From<FoundationsError> for CliError {
    fn from(e: FoundationsError) -> Self {
        match e {
            FoundationsError::Hilbert(h) => h.into(),
            other => CliError::Computation(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qdarwin",
    version,
    about = "Seeded quantum Darwinism experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partial-information curve I(S:F) against fragment size, as CSV
    Pip(Flags),
    /// Redundancy R_delta of the prepared state, as JSON
    Redundancy(Flags),
    /// Envariance, repeatability and Born-rule checks, as JSON
    Foundations(Flags),
    /// Redundancy after t = 1..n_env collisions, as CSV
    Collide(Flags),
    /// Partial-information curve of the state after environment scrambling
    Scramble(Flags),
    /// Partial-information curve of a Haar-random state of n_env + 1 qubits
    Random(Flags),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long)]
    pub n_env: Option<usize>,
    /// |alpha|; beta follows from normalization
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Record overlap c between branches on each environment subsystem
    #[arg(long)]
    pub overlap: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte-Carlo fragments per size when a size is not enumerated
    #[arg(long)]
    pub samples_per_size: Option<usize>,
    /// Enumerate all fragments of a size when there are at most this many
    #[arg(long)]
    pub max_exhaustive: Option<u64>,
    #[arg(long)]
    pub scramble_rounds: Option<usize>,
    /// Per-collision rotation angle in radians
    #[arg(long)]
    pub collision_angle: Option<f64>,
    /// Purity p of each hazy environment qubit
    #[arg(long)]
    pub haze: Option<f64>,
    /// State preparation (branching, ghz, haar, scrambled, collision, hazy)
    #[arg(long)]
    pub state: Option<String>,
    /// key = value file; command-line flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write output here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: &'static str,
    pub state: String,
    pub n_env: usize,
    pub alpha: f64,
    pub overlap: f64,
    pub delta: f64,
    pub seed: u64,
    pub samples_per_size: usize,
    pub max_exhaustive: u64,
    pub scramble_rounds: usize,
    pub collision_angle: f64,
    pub haze: f64,
    pub output_path: Option<PathBuf>,
    pub inject_fault: bool,
}

impl Command {
    fn parts(&self) -> (&'static str, &Flags) {
        match self {
            Command::Pip(f) => ("pip", f),
            Command::Redundancy(f) => ("redundancy", f),
            Command::Foundations(f) => ("foundations", f),
            Command::Collide(f) => ("collide", f),
            Command::Scramble(f) => ("scramble", f),
            Command::Random(f) => ("random", f),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment. Keys may use `-` or `_`.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::BadConfig(format!("line {}: expected key = value", no + 1)))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

fn file_value<T: std::str::FromStr>(
    file: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, CliError> {
    file.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| CliError::BadConfig(format!("config key {key}: cannot parse {v:?}")))
        })
        .transpose()
}

const KNOWN_KEYS: [&str; 11] = [
    "n-env",
    "alpha",
    "overlap",
    "delta",
    "seed",
    "samples-per-size",
    "max-exhaustive",
    "scramble-rounds",
    "collision-angle",
    "haze",
    "state",
];

impl ExperimentConfig {
    pub fn resolve(command: &'static str, flags: &Flags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::BadConfig(format!("cannot read {}: {e}", p.display()))
                })?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(k) = file.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(CliError::BadConfig(format!("unknown config key {k}")));
        }
        let default_state = match command {
            "random" => "haar",
            "collide" => "collision",
            _ => "branching",
        };
        let cfg = Self {
            command,
            state: match &flags.state {
                Some(s) => s.clone(),
                None => file_value(&file, "state")?.unwrap_or_else(|| default_state.to_string()),
            },
            n_env: flags.n_env.or(file_value(&file, "n-env")?).unwrap_or(10),
            alpha: flags
                .alpha
                .or(file_value(&file, "alpha")?)
                .unwrap_or(FRAC_1_SQRT_2),
            overlap: flags
                .overlap
                .or(file_value(&file, "overlap")?)
                .unwrap_or(0.0),
            delta: flags.delta.or(file_value(&file, "delta")?).unwrap_or(0.1),
            seed: flags.seed.or(file_value(&file, "seed")?).unwrap_or(1),
            samples_per_size: flags
                .samples_per_size
                .or(file_value(&file, "samples-per-size")?)
                .unwrap_or(200),
            max_exhaustive: flags
                .max_exhaustive
                .or(file_value(&file, "max-exhaustive")?)
                .unwrap_or(10_000),
            scramble_rounds: flags
                .scramble_rounds
                .or(file_value(&file, "scramble-rounds")?)
                .unwrap_or(200),
            collision_angle: flags
                .collision_angle
                .or(file_value(&file, "collision-angle")?)
                .unwrap_or(FRAC_PI_4),
            haze: flags.haze.or(file_value(&file, "haze")?).unwrap_or(1.0),
            output_path: flags.out.clone(),
            inject_fault: flags.inject_fault,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::BadConfig(msg));
        if self.n_env == 0 {
            return bad("n-env must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad(format!("overlap {} outside [0, 1]", self.overlap));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} outside (0, 1)", self.delta));
        }
        if self.samples_per_size == 0 {
            return bad("samples-per-size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.haze) {
            return bad(format!("haze {} outside [0, 1]", self.haze));
        }
        let angle_ok = if self.command == "collide" {
            self.collision_angle > 0.0 && self.collision_angle <= FRAC_PI_2
        } else {
            (0.0..=FRAC_PI_2).contains(&self.collision_angle)
        };
        if !angle_ok {
            return bad(format!(
                "collision-angle {} out of range",
                self.collision_angle
            ));
        }
        if PreparationRegistry::with_builtins()
            .get(&self.state)
            .is_none()
        {
            return bad(format!(
                "unknown state {:?}; known: {}",
                self.state,
                PreparationRegistry::with_builtins().names().join(", ")
            ));
        }
        Ok(())
    }

    pub fn prep_params(&self) -> PrepParams {
        PrepParams {
            n_env: self.n_env,
            alpha: self.alpha,
            overlap: self.overlap,
            seed: self.seed,
            scramble_rounds: self.scramble_rounds,
            collision_angle: self.collision_angle,
            haze: self.haze,
        }
    }

    pub fn sampling(&self) -> Sampling {
        Sampling {
            max_exhaustive: self.max_exhaustive,
            mc_samples: self.samples_per_size,
            seed: self.seed,
        }
    }

    /// One-line echo of every setting that affects the output.
    pub fn echo(&self) -> String {
        format!(
            "command={} state={} n_env={} alpha={} overlap={} delta={} seed={} samples_per_size={} max_exhaustive={} scramble_rounds={} collision_angle={} haze={}",
            self.command,
            self.state,
            self.n_env,
            self.alpha,
            self.overlap,
            self.delta,
            self.seed,
            self.samples_per_size,
            self.max_exhaustive,
            self.scramble_rounds,
            self.collision_angle,
            self.haze
        )
    }
}

/// Output document and the exit status it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub body: String,
    pub exit_code: i32,
}

impl Report {
    fn ok(body: String) -> Self {
        Self { body, exit_code: 0 }
    }
}

/// Fixed 12-decimal formatting; `-0` prints as `0`.
pub fn fmt_float(x: f64) -> String {
    let s = format!("{x:.12}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn curve_csv(
    curve: &PartialInfoCurve,
    cfg: &ExperimentConfig,
    descriptor: &str,
    extra: &[String],
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# H_S={} seed={} state={}",
        fmt_float(curve.system_entropy),
        cfg.seed,
        descriptor
    );
    let _ = writeln!(out, "# config {}", cfg.echo());
    for line in extra {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("m,f,samples,I_mean,I_std,I_min,I_max\n");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.m,
            fmt_float(p.f),
            p.samples,
            fmt_float(p.mean),
            fmt_float(p.std),
            fmt_float(p.min),
            fmt_float(p.max)
        );
    }
    out
}

fn prepare(cfg: &ExperimentConfig) -> Result<(StateVector, String), CliError> {
    let registry = PreparationRegistry::with_builtins();
    let prep = registry
        .get(&cfg.state)
        .ok_or_else(|| CliError::BadConfig(format!("unknown state {}", cfg.state)))?;
    let params = cfg.prep_params();
    Ok((prep.prepare(&params)?, prep.describe(&params)))
}

pub fn cmd_pip(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (state, descriptor) = prepare(cfg)?;
    let curve = partial_information_plot(&state, &cfg.sampling())?;
    Ok(Report::ok(curve_csv(&curve, cfg, &descriptor, &[])))
}

#[derive(Serialize)]
struct RedundancyJson {
    n_env: usize,
    delta: f64,
    entropy_system_bits: f64,
    m_delta: usize,
    f_delta: f64,
    redundancy: f64,
    seed: u64,
}

pub fn cmd_redundancy(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (state, _) = prepare(cfg)?;
    let curve = partial_information_plot(&state, &cfg.sampling())?;
    match redundancy(&curve, cfg.delta) {
        Ok(r) => {
            let doc = RedundancyJson {
                n_env: curve.n_env,
                delta: r.delta,
                entropy_system_bits: r.system_entropy,
                m_delta: r.m_delta,
                f_delta: r.f_delta,
                redundancy: r.redundancy,
                seed: cfg.seed,
            };
            Ok(Report::ok(to_json(&doc)))
        }
        Err(InfoError::DegenerateSystem(h)) => Ok(degenerate(h, cfg.seed)),
        Err(e) => Err(e.into()),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub residual: f64,
    pub cases: usize,
}

#[derive(Debug, Clone, Serialize)]
struct BornRow {
    mu: u64,
    nu: u64,
    p_up: String,
    p_down: String,
    exact: bool,
    deviation: f64,
}

#[derive(Serialize)]
struct FoundationsJson {
    command: &'static str,
    seed: u64,
    config: String,
    pass: bool,
    checks: Vec<Check>,
    born: Vec<BornRow>,
}

#[derive(Serialize)]
struct DegenerateJson {
    error: &'static str,
    entropy_system_bits: f64,
    seed: u64,
}

fn degenerate(h: f64, seed: u64) -> Report {
    Report {
        body: to_json(&DegenerateJson {
            error: "degenerate_system",
            entropy_system_bits: h,
            seed,
        }),
        exit_code: 4,
    }
}

const ENVARIANCE_CASES: usize = 100;
const TRIPLE_CASES: usize = 1000;
const COPIER_TRIALS: usize = 10_000;
const BORN_MAX: u64 = 20;

/// Swap and phase envariance on seeded random even states with 1..=6
/// environment qubits. `fault` builds the counterswap with the wrong phase sign.
pub fn envariance_suite(seed: u64, fault: bool) -> Result<[Check; 2], CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let swap = LocalUnitary::swap(vec![0], 2, 0, 1);
    let (mut worst_swap, mut worst_phase) = (0.0f64, 0.0f64);
    for i in 0..ENVARIANCE_CASES {
        let even = EvenBranchState::random(1 + i % 6, &mut rng)?;
        let chi = if fault { -even.chi } else { even.chi };
        let r = envariance_check(&even.state, &swap, &even.counterswap(chi)?)?;
        worst_swap = worst_swap.max((1.0 - r.global_fidelity).abs());

        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        let shift = LocalUnitary::new(vec![0], phase_operator(2, phi, (0, 1))?)?;
        let r = envariance_check(&even.state, &shift, &even.countershift(phi))?;
        worst_phase = worst_phase.max((1.0 - r.global_fidelity).abs());
    }
    Ok([
        Check {
            name: "envariance_swap",
            pass: worst_swap <= 1e-10,
            residual: worst_swap,
            cases: ENVARIANCE_CASES,
        },
        Check {
            name: "envariance_phase",
            pass: worst_phase <= 1e-10,
            residual: worst_phase,
            cases: ENVARIANCE_CASES,
        },
    ])
}

/// The scalar-product identity on random copiers built to satisfy the copy map.
pub fn repeatability_suite(seed: u64) -> Result<Check, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..TRIPLE_CASES {
        let t = random_repeatable_triple(&mut rng);
        let out = evaluate_copier(&t.u, &t.v, &t.copier)?;
        worst = worst
            .max(out.record_pair().identity_residual())
            .max(out.deviation_u)
            .max(out.deviation_v);
    }
    Ok(Check {
        name: "repeatability_identity",
        pass: worst <= 1e-10,
        residual: worst,
        cases: TRIPLE_CASES,
    })
}

/// Copier search on states with overlap 0.6; passes when it stays above the floor.
pub fn copier_suite(seed: u64) -> Result<Check, CliError> {
    let u = StateVector::single(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])?;
    let v = StateVector::single(vec![Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)])?;
    let s = copier_search(&u, &v, COPIER_TRIALS, seed)?;
    Ok(Check {
        name: "copier_floor",
        pass: s.best_residual >= s.floor,
        residual: s.best_residual - s.floor,
        cases: COPIER_TRIALS,
    })
}

fn born_suite() -> Result<(Check, Vec<BornRow>), CliError> {
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    let mut all_exact = true;
    for mu in 1..=BORN_MAX {
        for nu in 1..=BORN_MAX {
            let p = born_probabilities(&FinegrainSpec::new(mu, nu)?)?;
            let exact = *p.up.numer() * (mu + nu) == mu * *p.up.denom()
                && *p.down.numer() * (mu + nu) == nu * *p.down.denom();
            all_exact &= exact;
            worst = worst.max(p.max_deviation());
            rows.push(BornRow {
                mu,
                nu,
                p_up: p.up.to_string(),
                p_down: p.down.to_string(),
                exact,
                deviation: p.max_deviation(),
            });
        }
    }
    let check = Check {
        name: "born_counting",
        pass: all_exact && worst <= 1e-12,
        residual: worst,
        cases: rows.len(),
    };
    Ok((check, rows))
}

pub fn cmd_foundations(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut checks: Vec<Check> = envariance_suite(cfg.seed, cfg.inject_fault)?.to_vec();
    checks.push(repeatability_suite(cfg.seed)?);
    checks.push(copier_suite(cfg.seed)?);
    let (born, rows) = born_suite()?;
    checks.push(born);
    let pass = checks.iter().all(|c| c.pass);
    let doc = FoundationsJson {
        command: "foundations",
        seed: cfg.seed,
        config: cfg.echo(),
        pass,
        checks,
        born: rows,
    };
    Ok(Report {
        body: to_json(&doc),
        exit_code: if pass { 0 } else { 5 },
    })
}

pub fn cmd_collide(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let registry = PreparationRegistry::with_builtins();
    let prep = registry.get("collision").expect("builtin");
    let mut out = String::new();
    let mut params = cfg.prep_params();
    params.n_env = cfg.n_env;
    let _ = writeln!(
        out,
        "# seed={} state={} delta={}",
        cfg.seed,
        prep.describe(&params),
        cfg.delta
    );
    let _ = writeln!(out, "# config {}", cfg.echo());
    out.push_str("t,R\n");
    let mut ts = Vec::with_capacity(cfg.n_env);
    let mut rs = Vec::with_capacity(cfg.n_env);
    for t in 1..=cfg.n_env {
        params.n_env = t;
        let state = prep.prepare(&params)?;
        let curve = partial_information_plot(&state, &cfg.sampling())?;
        let r = match redundancy(&curve, cfg.delta) {
            Ok(r) => r,
            Err(InfoError::DegenerateSystem(h)) => return Ok(degenerate(h, cfg.seed)),
            Err(e) => return Err(e.into()),
        };
        let _ = writeln!(out, "{},{}", t, fmt_float(r.redundancy));
        ts.push(t as f64);
        rs.push(r.redundancy);
    }
    if ts.len() >= 2 {
        let fit = linear_fit(&ts, &rs);
        let _ = writeln!(
            out,
            "# fit slope={} intercept={} r_squared={}",
            fmt_float(fit.slope),
            fmt_float(fit.intercept),
            fmt_float(fit.r_squared)
        );
    }
    Ok(Report::ok(out))
}

pub fn cmd_scramble(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let (state, descriptor) = prepare(cfg)?;
    let scrambled = scramble_environment(
        &state,
        ScrambleConfig {
            rounds: cfg.scramble_rounds,
            seed: cfg.seed,
        },
    )?;
    let sys = state
        .layout()
        .system_index()
        .ok_or_else(|| CliError::BadConfig("state has no system".into()))?;
    let before_rho = state.partial_trace(&[sys])?;
    let after_rho = scrambled.partial_trace(&[sys])?;
    let before = partial_information_plot(&state, &cfg.sampling())?;
    let after = partial_information_plot(&scrambled, &cfg.sampling())?;
    let mut extra = vec![format!(
        "system_state_change={}",
        fmt_float(before_rho.max_abs_diff(&after_rho)?)
    )];
    if cfg.n_env >= 5 {
        extra.push(format!(
            "plateau_deviation before={} after={}",
            fmt_float(plateau_deviation(&before)?),
            fmt_float(plateau_deviation(&after)?)
        ));
    }
    let descriptor = format!(
        "scrambled({descriptor},rounds={},seed={})",
        cfg.scramble_rounds, cfg.seed
    );
    Ok(Report::ok(curve_csv(&after, cfg, &descriptor, &extra)))
}

pub fn cmd_random(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    let mut cfg = cfg.clone();
    cfg.state = "haar".into();
    cmd_pip(&cfg)
}

pub fn execute(cli: &Cli) -> Result<(Report, ExperimentConfig), CliError> {
    let (name, flags) = cli.command.parts();
    let cfg = ExperimentConfig::resolve(name, flags)?;
    let report = match &cli.command {
        Command::Pip(_) => cmd_pip(&cfg),
        Command::Redundancy(_) => cmd_redundancy(&cfg),
        Command::Foundations(_) => cmd_foundations(&cfg),
        Command::Collide(_) => cmd_collide(&cfg),
        Command::Scramble(_) => cmd_scramble(&cfg),
        Command::Random(_) => cmd_random(&cfg),
    }?;
    Ok((report, cfg))
}

/// Parses arguments, runs the command and returns the document and exit code.
pub fn run<I, T>(args: I) -> Result<(Report, ExperimentConfig), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::BadConfig(e.to_string()))?;
    execute(&cli)
}

pub fn write_output(report: &Report, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, &report.body).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(report.body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format() {
        assert_eq!(fmt_float(2.0), "2.000000000000");
        assert_eq!(fmt_float(-0.0), "0.000000000000");
        assert_eq!(fmt_float(-1e-15), "0.000000000000");
        assert_eq!(fmt_float(-0.5), "-0.500000000000");
    }

    #[test]
    fn config_file_parsing() {
        let m = parse_config_file("# comment\nn_env = 6\n\noverlap=0.5 # trailing\n").unwrap();
        assert_eq!(m["n-env"], "6");
        assert_eq!(m["overlap"], "0.5");
        assert!(parse_config_file("nonsense").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("qdarwin-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("exp.cfg");
        std::fs::write(&path, "n-env = 6\noverlap = 0.5\nseed = 9\n").unwrap();
        let flags = Flags {
            config: Some(path),
            seed: Some(3),
            ..Flags::default()
        };
        let cfg = ExperimentConfig::resolve("pip", &flags).unwrap();
        assert_eq!((cfg.n_env, cfg.overlap, cfg.seed), (6, 0.5, 3));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn validation_errors_are_bad_config() {
        for flags in [
            Flags {
                alpha: Some(1.5),
                ..Flags::default()
            },
            Flags {
                delta: Some(0.0),
                ..Flags::default()
            },
            Flags {
                n_env: Some(0),
                ..Flags::default()
            },
            Flags {
                state: Some("nope".into()),
                ..Flags::default()
            },
        ] {
            let e = ExperimentConfig::resolve("pip", &flags).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{e}");
        }
        let e = ExperimentConfig::resolve(
            "collide",
            &Flags {
                collision_angle: Some(0.0),
                ..Flags::default()
            },
        )
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
