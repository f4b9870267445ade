//! `bgwf`: command-line front end for the bgw-core experiments.

mod config;

use bgw_core::continuum::{sample_excursion, DEFAULT_LEVELS};
use bgw_core::harness::{self, ExperimentConfig, HarnessError, Mode, PowerToll};
use bgw_core::offspring::{Normalization, OffspringModel};
use bgw_core::rng::{self, lanes};
use bgw_core::sampler::{sample_conditioned_counted, SamplerError};
use bgw_core::selftest;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use config::{usage, FamilyArg, FlatConfig, Format, UsageError};
use serde::Serialize;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_INVALID_RUN: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_SOFTWARE: u8 = 70;
const EXIT_IO: u8 = 74;

const DEFAULT_SIZES: [u64; 1] = [1001];
const DEFAULT_SCAN_SIZES: [u64; 3] = [101, 1001, 10_001];
const DEFAULT_GRIDS: [u64; 1] = [1000];
const DEFAULT_REPLICATES: u64 = 1000;
const DEFAULT_GAMMA: f64 = 1.5;
const DEFAULT_C: f64 = 0.5;

#[derive(Parser)]
#[command(name = "bgwf", version, about = "Additive functionals of conditioned Bienaymé-Galton-Watson trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump one conditioned tree, or one Brownian excursion with --m
    Sample(RunArgs),
    /// Per-tree rescaled power sums
    Functional(RunArgs),
    /// Mean rescaled power sums against the limit
    Moment(RunArgs),
    /// Growth of the mean over sizes, against the predicted phase
    PhaseScan(RunArgs),
    /// Exact local probability b_n P(S_n = n-1)/λ₀ against g(0)
    Llt(RunArgs),
    /// Moments of the rescaled height
    HeightMoments(RunArgs),
    /// Tail exponents of the rescaled height
    Tail(RunArgs),
    /// Brownian-excursion functional by level sweep
    Continuum(RunArgs),
    /// Golden-value self test
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML config (JSON if the extension is .json); flags override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit
    #[arg(long)]
    dry_run: bool,
    #[command(flatten)]
    flags: FlatConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Sample,
    Functional,
    Harness(Mode),
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Sample => "sample",
            Kind::Functional => "functional",
            Kind::Harness(m) => m.name(),
        }
    }
}

/// Which keys a subcommand reads.
struct Uses {
    sizes: bool,
    grids: bool,
    replicates: bool,
    tolls: bool,
    powers: bool,
    levels: bool,
    seed: bool,
    workers: bool,
    budget: bool,
}

fn uses(kind: Kind, excursion: bool) -> Uses {
    let harness = |m| kind == Kind::Harness(m);
    let continuum = harness(Mode::Continuum) || excursion;
    let trees = !continuum && !harness(Mode::Llt);
    Uses {
        sizes: !continuum,
        grids: continuum,
        replicates: kind != Kind::Sample && !harness(Mode::Llt),
        tolls: matches!(kind, Kind::Functional) || harness(Mode::Moment) || harness(Mode::PhaseScan) || harness(Mode::Continuum),
        powers: harness(Mode::HeightMoments),
        levels: harness(Mode::Continuum),
        seed: !harness(Mode::Llt),
        workers: kind != Kind::Sample,
        budget: trees,
    }
}

struct Resolved {
    echo: FlatConfig,
    experiment: ExperimentConfig,
    excursion: bool,
    format: Format,
    out: Option<PathBuf>,
}

fn auto_seed() -> u64 {
    let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_nanos()).unwrap_or(0);
    (nanos as u64) ^ ((std::process::id() as u64) << 40)
}

fn build_model(flat: &FlatConfig, echo: &mut FlatConfig) -> Result<OffspringModel, UsageError> {
    let family = flat.family.unwrap_or(FamilyArg::Catalan);
    echo.family = Some(family);
    if family != FamilyArg::Stable && (flat.gamma.is_some() || flat.c.is_some()) {
        return Err(usage("--gamma and --c apply to the stable family only"));
    }
    if family != FamilyArg::Pmf && flat.pmf.is_some() {
        return Err(usage("--pmf applies to the pmf family only"));
    }
    let model = match family {
        FamilyArg::Catalan => OffspringModel::catalan(),
        FamilyArg::Geometric => OffspringModel::geometric(),
        FamilyArg::Stable => {
            let (gamma, c) = (flat.gamma.unwrap_or(DEFAULT_GAMMA), flat.c.unwrap_or(DEFAULT_C));
            echo.gamma = Some(gamma);
            echo.c = Some(c);
            OffspringModel::stable_power(gamma, c).map_err(|e| usage(e.to_string()))?
        }
        FamilyArg::Pmf => {
            let text = flat.pmf.as_deref().ok_or_else(|| usage("the pmf family needs --pmf k:p,k:p,..."))?;
            echo.pmf = Some(text.to_string());
            OffspringModel::finite_variance(&config::parse_pmf(text)?).map_err(|e| usage(e.to_string()))?
        }
    };
    match (flat.bn_scale, flat.kappa) {
        (None, None) => Ok(model),
        (Some(scale), Some(kappa)) => {
            if !(scale > 0.0 && scale.is_finite() && kappa > 0.0 && kappa.is_finite()) {
                return Err(usage("--bn-scale and --kappa must be positive"));
            }
            echo.bn_scale = Some(scale);
            echo.kappa = Some(kappa);
            Ok(model.with_normalization(Normalization::Custom { scale, kappa }))
        }
        _ => Err(usage("--bn-scale and --kappa go together")),
    }
}

/// Pair α' and β lists, broadcasting a single value.
fn pair_tolls(alpha: &[f64], beta: &[f64]) -> Result<Vec<PowerToll>, UsageError> {
    let len = alpha.len().max(beta.len());
    if alpha.is_empty() || beta.is_empty() || (alpha.len() != len && alpha.len() != 1) || (beta.len() != len && beta.len() != 1) {
        return Err(usage(format!("--alpha-prime ({}) and --beta ({}) lengths do not pair", alpha.len(), beta.len())));
    }
    let pick = |xs: &[f64], i: usize| if xs.len() == 1 { xs[0] } else { xs[i] };
    let tolls: Vec<PowerToll> = (0..len).map(|i| PowerToll::new(pick(alpha, i), pick(beta, i))).collect();
    if tolls.iter().any(|t| !(t.alpha_prime.is_finite() && t.beta.is_finite())) {
        return Err(usage("toll exponents must be finite"));
    }
    Ok(tolls)
}

fn resolve(kind: Kind, flat: FlatConfig) -> Result<Resolved, UsageError> {
    let excursion = kind == Kind::Sample && flat.m.is_some();
    if excursion && flat.n.is_some() {
        return Err(usage("sample takes either --n (tree) or --m (excursion)"));
    }
    let u = uses(kind, excursion);
    let mut echo = FlatConfig::default();
    let model = build_model(&flat, &mut echo)?;
    let mode = match kind {
        Kind::Harness(m) => m,
        _ => Mode::Moment,
    };
    let mut experiment = ExperimentConfig::new(model, mode);
    let mut ignored = Vec::new();
    let mut note = |set: bool, used: bool, key: &str| {
        if set && !used {
            ignored.push(key.to_string());
        }
        used
    };

    if note(flat.n.is_some(), u.sizes, "n") {
        let default: &[u64] = if kind == Kind::Harness(Mode::PhaseScan) { &DEFAULT_SCAN_SIZES } else { &DEFAULT_SIZES };
        let sizes = flat.n.clone().unwrap_or_else(|| default.to_vec());
        experiment.sizes = sizes.clone();
        echo.n = Some(sizes);
    }
    if note(flat.m.is_some(), u.grids, "m") {
        let grids = flat.m.clone().unwrap_or_else(|| DEFAULT_GRIDS.to_vec());
        experiment.sizes = grids.clone();
        echo.m = Some(grids);
    }
    if experiment.sizes.is_empty() {
        return Err(usage("the size list is empty"));
    }
    if kind == Kind::Sample && experiment.sizes.len() != 1 {
        return Err(usage("sample takes a single size"));
    }
    if u.sizes {
        for &n in &experiment.sizes {
            if !experiment.model.support_contains(n) {
                let next = (n..n + 64).find(|&k| experiment.model.support_contains(k));
                let hint = next.map(|k| format!("; nearest valid size above is {k}")).unwrap_or_default();
                return Err(usage(format!("no tree of size {n} has positive probability under this law{hint}")));
            }
        }
    }
    if note(flat.r.is_some(), u.replicates, "R") {
        experiment.replicates = flat.r.unwrap_or(DEFAULT_REPLICATES);
        echo.r = Some(experiment.replicates);
    }
    let tolls_set = flat.alpha_prime.is_some() || flat.beta.is_some();
    if note(tolls_set, u.tolls, "alpha-prime/beta") {
        let alpha = flat.alpha_prime.clone().unwrap_or_else(|| vec![1.0]);
        let beta = flat.beta.clone().unwrap_or_else(|| vec![0.0]);
        experiment.tolls = pair_tolls(&alpha, &beta)?;
        echo.alpha_prime = Some(alpha);
        echo.beta = Some(beta);
    }
    if note(flat.powers.is_some(), u.powers, "powers") {
        if let Some(p) = &flat.powers {
            experiment.powers = p.clone();
        }
        echo.powers = Some(experiment.powers.clone());
    }
    if note(flat.levels.is_some(), u.levels, "K") {
        experiment.levels = flat.levels.unwrap_or(DEFAULT_LEVELS);
        echo.levels = Some(experiment.levels);
    }
    if note(flat.seed.is_some(), u.seed, "seed") {
        experiment.master_seed = flat.seed.unwrap_or_else(auto_seed);
        echo.seed = Some(experiment.master_seed);
    }
    if note(flat.workers.is_some(), u.workers, "workers") {
        let workers = match flat.workers {
            Some(w) => w,
            None => match std::env::var("BGWF_WORKERS") {
                Ok(v) => v.trim().parse().map_err(|_| usage(format!("BGWF_WORKERS={v:?} is not a count")))?,
                Err(_) => 1,
            },
        };
        experiment.workers = workers;
        echo.workers = Some(workers);
    }
    if note(flat.budget.is_some(), u.budget, "budget") {
        experiment.budget = flat.budget;
        echo.budget = flat.budget;
    }
    for key in ignored {
        eprintln!("warning: {key} is not used by {}", kind.name());
    }
    if kind != Kind::Sample {
        experiment.validate().map_err(|e| usage(e.to_string()))?;
    }
    let format = flat.format.unwrap_or(Format::Csv);
    echo.format = Some(format);
    echo.out = flat.out.clone();
    Ok(Resolved { echo, experiment, excursion, format, out: flat.out })
}

enum Failure {
    Usage(String),
    Exit(u8, String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Exit(EXIT_IO, e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Pool(_) => Failure::Exit(EXIT_SOFTWARE, e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn open_output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct FunctionalRow {
    n: u64,
    replicate: u64,
    alpha_prime: f64,
    beta: f64,
    value: f64,
}

fn run_sample(r: &Resolved) -> Result<u8, Failure> {
    let e = &r.experiment;
    let size = e.sizes[0];
    let mut out = open_output(&r.out)?;
    if r.excursion {
        let ex = sample_excursion(size as usize, &mut rng::stream(e.master_seed, lanes::excursions(size), 0));
        match r.format {
            Format::Csv => ex.write_csv(&mut out)?,
            Format::Json => {
                let dt = ex.dt();
                let t: Vec<f64> = (0..ex.values().len()).map(|i| i as f64 * dt).collect();
                serde_json::to_writer(&mut out, &serde_json::json!({ "t": t, "value": ex.values() })).map_err(io::Error::from)?;
                writeln!(out)?;
            }
        }
    } else {
        let mut g = rng::stream(e.master_seed, lanes::trees(size), 0);
        let tree = match sample_conditioned_counted(&e.model, size, &mut g, e.budget) {
            Ok((tree, _)) => tree,
            Err(err @ SamplerError::BudgetExhausted { .. }) => return Err(Failure::Exit(EXIT_INVALID_RUN, err.to_string())),
            Err(err) => return Err(Failure::Usage(err.to_string())),
        };
        match r.format {
            Format::Csv => tree.write_csv(&mut out)?,
            Format::Json => {
                let parent: Vec<i64> = (0..tree.n()).map(|v| if v == 0 { -1 } else { tree.parent()[v] as i64 }).collect();
                let doc = serde_json::json!({
                    "parent": parent,
                    "degree": tree.degree(),
                    "depth": tree.depth(),
                    "subtree_size": tree.subtree_size(),
                    "subtree_height": tree.subtree_height(),
                });
                serde_json::to_writer(&mut out, &doc).map_err(io::Error::from)?;
                writeln!(out)?;
            }
        }
    }
    out.flush()?;
    Ok(0)
}

fn run_functional(r: &Resolved) -> Result<u8, Failure> {
    let e = &r.experiment;
    let trees = harness::tree_values(e)?;
    let mut rows = Vec::new();
    let mut drops = 0u64;
    for t in &trees {
        match &t.values {
            Some(values) => rows.extend(e.tolls.iter().zip(values).map(|(toll, &value)| FunctionalRow {
                n: t.n,
                replicate: t.replicate,
                alpha_prime: toll.alpha_prime,
                beta: toll.beta,
                value,
            })),
            None => drops += 1,
        }
    }
    let mut out = open_output(&r.out)?;
    match r.format {
        Format::Csv => {
            writeln!(out, "n,replicate,alpha_prime,beta,value")?;
            for row in &rows {
                writeln!(out, "{},{},{},{},{}", row.n, row.replicate, row.alpha_prime, row.beta, row.value)?;
            }
        }
        Format::Json => {
            serde_json::to_writer(&mut out, &rows).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    if drops > 0 {
        eprintln!("{drops} of {} trees exhausted the rejection budget", trees.len());
    }
    let invalid = drops as f64 > e.thresholds.max_drop_fraction * trees.len() as f64;
    Ok(if invalid { EXIT_INVALID_RUN } else { 0 })
}

fn run_harness(r: &Resolved) -> Result<u8, Failure> {
    let report = harness::run(&r.experiment)?;
    let mut out = open_output(&r.out)?;
    match r.format {
        Format::Csv => report.write_csv(&mut out)?,
        Format::Json => report.write_json(&mut out)?,
    }
    out.flush()?;
    for v in &report.verdicts {
        eprintln!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.label, v.detail);
    }
    for n in &report.notes {
        eprintln!("note: {n}");
    }
    if report.invalid {
        eprintln!("run invalid: too many replicates dropped");
    }
    eprintln!("wall time: {:.3} s", report.wall_time);
    Ok(report.exit_code() as u8)
}

fn run_selftest() -> u8 {
    let checks = selftest::run();
    for c in &checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failed} failed", checks.len());
    if failed == 0 { 0 } else { 2 }
}

fn dispatch(kind: Kind, args: RunArgs) -> Result<u8, Failure> {
    let base = match &args.config {
        Some(path) => FlatConfig::load(path)?,
        None => FlatConfig::default(),
    };
    let resolved = resolve(kind, base.overlay(args.flags))?;
    let echo = resolved.echo.to_json();
    if args.dry_run {
        println!("{echo}");
        return Ok(0);
    }
    eprintln!("config: {echo}");
    if let Some(seed) = resolved.echo.seed {
        eprintln!("seed: {seed}");
    }
    match kind {
        Kind::Sample => run_sample(&resolved),
        Kind::Functional => run_functional(&resolved),
        Kind::Harness(_) => run_harness(&resolved),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (kind, args) = match cli.command {
        Command::Selftest => return ExitCode::from(run_selftest()),
        Command::Sample(a) => (Kind::Sample, a),
        Command::Functional(a) => (Kind::Functional, a),
        Command::Moment(a) => (Kind::Harness(Mode::Moment), a),
        Command::PhaseScan(a) => (Kind::Harness(Mode::PhaseScan), a),
        Command::Llt(a) => (Kind::Harness(Mode::Llt), a),
        Command::HeightMoments(a) => (Kind::Harness(Mode::HeightMoments), a),
        Command::Tail(a) => (Kind::Harness(Mode::TailProfile), a),
        Command::Continuum(a) => (Kind::Harness(Mode::Continuum), a),
    };
    match dispatch(kind, args) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Exit(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
