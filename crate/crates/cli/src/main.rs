//! `casimir-response`: batch front end writing CSV tables and JSON
//! summaries for plotting offline.
//!
//! Exit codes: 0 ok, 1 I/O, 2 usage, 3 invalid scenario, 4 numerical
//! failure, 5 cutoff coverage.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use casimir_response::error::{Error, ErrorClass};
use casimir_response::output::{TOOL_NAME, TOOL_VERSION};
use casimir_response::scenario::{load_scenario_with, LoadOptions, ScenarioConfig, ScenarioHash};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "casimir-response", version, about = "Photon production by time-dependent dielectrics")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct GlobalOpts {
    /// Output directory, created if needed.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Cap on worker threads.
    #[arg(long, global = true, env = "CASIMIR_RESPONSE_THREADS")]
    threads: Option<usize>,
    /// Accept unknown keys in scenario files (with a warning).
    #[arg(long, global = true)]
    lax: bool,
    /// Add a generation timestamp to CSV headers.
    #[arg(long, global = true)]
    stamp: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// e(omega), V*N_k, both energy paths and the low-frequency fit.
    Spectrum(SpectrumArgs),
    /// Total energy by quadrature and by the moment series.
    Energy(EnergyArgs),
    /// Table of the exact moment-coupling coefficients.
    Gnm(GnmArgs),
    /// Small-k diagnostics of the scenario's velocity field.
    Velocity(ScenarioArg),
    /// Radial potential for the scenario's potential_probe.
    Potential(ScenarioArg),
    /// Order-of-magnitude energy and per-mode bounds.
    Estimate(EstimateArgs),
    /// Energy of the scenario against its rescaled copy.
    Scaling(ScalingArgs),
}

#[derive(Args, Debug)]
struct ScenarioArg {
    scenario: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KernelArg {
    Summed,
    PerPolarization,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DerivativeArg {
    ClosedForm,
    Spectral,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "summed")]
    kernel: KernelArg,
    /// Highest moment order in the series.
    #[arg(long, default_value_t = 2)]
    n_max: usize,
    #[arg(long, value_enum, default_value = "closed-form")]
    derivatives: DerivativeArg,
    /// Also write the sampled transform as table.csv.
    #[arg(long)]
    export_table: bool,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    scenario: PathBuf,
    #[arg(long, default_value_t = 2)]
    n_max: usize,
    #[arg(long, value_enum, default_value = "closed-form")]
    derivatives: DerivativeArg,
}

#[derive(Args, Debug)]
struct GnmArgs {
    /// Largest n and m.
    #[arg(long)]
    n_max: usize,
    /// Permittivity for the value_at_epsilon column.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    #[arg(long)]
    rmax: f64,
    #[arg(long)]
    tmax: f64,
    #[arg(long)]
    kc: f64,
    #[arg(long)]
    volume: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
}

#[derive(Args, Debug)]
struct ScalingArgs {
    scenario: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    factor: f64,
    #[arg(long, default_value_t = 2)]
    n_max: usize,
}

pub(crate) struct Context {
    pub out: PathBuf,
    pub lax: bool,
    pub stamp: Option<u64>,
}

impl Context {
    pub fn load(&self, path: &PathBuf) -> Result<ScenarioConfig, Error> {
        load_scenario_with(path, LoadOptions { lax: self.lax })
    }
}

/// What a subcommand hands back for the manifest.
pub(crate) struct Finished {
    pub hash: ScenarioHash,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    tool_version: &'static str,
    subcommand: &'a str,
    scenario_hash: String,
    config: serde_json::Value,
    outputs: Vec<String>,
    wall_clock_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated: Option<u64>,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Io => 1,
        ErrorClass::Usage => 2,
        ErrorClass::Validation => 3,
        ErrorClass::Numerical => 4,
        ErrorClass::Coverage => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let stamp = cli
        .global
        .stamp
        .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0));
    let ctx = Context { out: cli.global.out.clone(), lax: cli.global.lax, stamp };

    let start = Instant::now();
    let (name, result) = match &cli.command {
        Command::Spectrum(a) => ("spectrum", commands::spectrum(&ctx, a)),
        Command::Energy(a) => ("energy", commands::energy(&ctx, a)),
        Command::Gnm(a) => ("gnm", commands::gnm(&ctx, a)),
        Command::Velocity(a) => ("velocity", commands::velocity(&ctx, &a.scenario)),
        Command::Potential(a) => ("potential", commands::potential(&ctx, &a.scenario)),
        Command::Estimate(a) => ("estimate", commands::estimate(&ctx, a)),
        Command::Scaling(a) => ("scaling", commands::scaling(&ctx, a)),
    };
    let finished = match result {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let manifest = RunManifest {
        tool: TOOL_NAME,
        tool_version: TOOL_VERSION,
        subcommand: name,
        scenario_hash: finished.hash.to_string(),
        config: finished.config,
        outputs: finished.outputs,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        generated: stamp,
    };
    let path = ctx.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(source) = std::fs::write(&path, text) {
        let e = Error::Io { path, source };
        eprintln!("error: {e}");
        return ExitCode::from(exit_code(&e));
    }
    ExitCode::SUCCESS
}
