//! `peer-review`: command-line driver for the equilibrium and reform solvers.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::Value;

use peer_review_core::format::round_json;
use peer_review_core::sweep::{SweepOutput, SweepParameter};
use peer_review_core::{
    baseline_report, oracle_suite, premise_report, restoration_scan, run_sweep, sharpness_profile,
    solve_reform, Calibration, ModelError, SimConfig, SweepSpec,
};

#[derive(Parser)]
#[command(name = "peer-review", version, about = "Peer-review equilibrium and reform solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Calibration file (JSON). Defaults to the baseline calibration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a calibration entry, e.g. `sigma_s=0.5` or `D_spec.d0=2`.
    /// `gamma` sets the capability level of the run.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Seed for Monte Carlo runs and sweep spot checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write results into this directory instead of stdout.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Transition point, pre/post reform and sharpness summary.
    Baseline,
    /// Solve the editor's reform at one capability level.
    Solve {
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Comparative statics over one parameter.
    Sweep {
        /// R, V, sigma_s, N or gamma.
        #[arg(long)]
        param: String,
        /// Comma-separated values; defaults to the standard grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        /// Comma-separated capability levels.
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        /// Comma-separated outputs: m, a_star, U_A, K_star, p_det_star, U_E_gain, lambda.
        #[arg(long, value_delimiter = ',')]
        outputs: Vec<String>,
    },
    /// Check the four premises of the sign reversal.
    Premises,
    /// Welfare slope and threshold sharpness across effort rates.
    Sharpness,
    /// Best post-transition editor welfare over panels up to `n_max`.
    Restoration {
        #[arg(long, default_value_t = 20)]
        n_max: u32,
    },
    /// Compare the analytic pipeline with the Monte Carlo simulator.
    Validate {
        #[arg(long, default_value_t = 100_000)]
        papers: usize,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
    },
    /// Print the baseline calibration as a config file.
    EmitConfig,
}

enum Failure {
    Usage(String),
    Model(ModelError),
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Model(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Model(ModelError::Io(_)) => 1,
            Failure::Model(e) if e.is_nonconvergence() => 3,
            Failure::Model(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Model(e) => e.to_string(),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Loads the calibration, applies overrides and validates. Returns the run-level
/// capability override separately.
fn load(cli: &Cli) -> Outcome<(Calibration, Option<f64>)> {
    let cal = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            Calibration::from_json(&text)?
        }
        None => Calibration::baseline(),
    };
    // Round trip through the full serialized form so nested defaults exist.
    let mut doc: Value = serde_json::from_str(&cal.to_json_pretty()).expect("calibration serializes");
    let mut gamma = None;
    for item in &cli.overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| ModelError::Config(format!("override `{item}` is not KEY=VALUE")))?;
        let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        if key == "gamma" {
            let g = value
                .as_f64()
                .ok_or_else(|| ModelError::Config(format!("gamma must be a number, got `{raw}`")))?;
            gamma = Some(g);
            continue;
        }
        let slot = key
            .split('.')
            .try_fold(&mut doc, |node, part| node.get_mut(part))
            .ok_or_else(|| ModelError::Config(format!("unknown override key `{key}`")))?;
        *slot = value;
    }
    let cal = serde_json::from_value::<Calibration>(doc)
        .map_err(|e| ModelError::Config(e.to_string()))?
        .validate()?;
    Ok((cal, gamma))
}

fn to_json<T: serde::Serialize>(x: &T) -> String {
    let mut v = serde_json::to_value(x).expect("results serialize");
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("json value prints");
    s.push('\n');
    s
}

fn emit(cli: &Cli, name: &str, ext: &str, body: &str) -> Outcome<()> {
    match &cli.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(ModelError::from)?;
            let path = dir.join(format!("{name}.{ext}"));
            fs::write(&path, body).map_err(ModelError::from)?;
            info!("wrote {}", path.display());
        }
        None => io::stdout().write_all(body.as_bytes()).map_err(ModelError::from)?,
    }
    Ok(())
}

fn json_only(cli: &Cli, verb: &str) -> Outcome<()> {
    if cli.format == Some(Format::Csv) {
        return Err(Failure::Usage(format!("`{verb}` has no csv output")));
    }
    Ok(())
}

fn parse_outputs(names: &[String]) -> Outcome<Vec<SweepOutput>> {
    names
        .iter()
        .map(|n| {
            serde_json::from_value(Value::String(n.clone()))
                .map_err(|_| Failure::Usage(format!("unknown sweep output `{n}`")))
        })
        .collect()
}

fn run(cli: &Cli) -> Outcome<()> {
    if let Command::EmitConfig = cli.command {
        json_only(cli, "emit-config")?;
        let mut text = Calibration::baseline().to_json_pretty();
        text.push('\n');
        return emit(cli, "config", "json", &text);
    }
    let (cal, gamma_override) = load(cli)?;
    match &cli.command {
        Command::EmitConfig => unreachable!(),
        Command::Baseline => {
            json_only(cli, "baseline")?;
            emit(cli, "baseline", "json", &to_json(&baseline_report(&cal)?))
        }
        Command::Solve { gamma } => {
            json_only(cli, "solve")?;
            let g = gamma
                .or(gamma_override)
                .ok_or_else(|| Failure::Usage("solve needs --gamma or --override gamma=VALUE".into()))?;
            emit(cli, "solve", "json", &to_json(&solve_reform(&cal, g)?))
        }
        Command::Sweep { param, values, gammas, outputs } => {
            let parameter = SweepParameter::parse(param).map_err(|e| Failure::Usage(e.to_string()))?;
            let mut spec = SweepSpec::standard(parameter, &cal);
            if !values.is_empty() {
                spec.values = values.clone();
            }
            if !gammas.is_empty() {
                spec.gamma_grid = gammas.clone();
            } else if let Some(g) = gamma_override {
                spec.gamma_grid = vec![g];
            }
            if !outputs.is_empty() {
                spec.outputs = parse_outputs(outputs)?;
            }
            let table = run_sweep(&cal, &spec)?;
            for problem in table.spot_check(5, cli.seed) {
                warn!("spot check: {problem}");
            }
            let name = format!("sweep_{}", parameter.name());
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => emit(cli, &name, "csv", &table.to_csv_string()?),
                Format::Json => emit(cli, &name, "json", &to_json(&table)),
            }
        }
        Command::Premises => {
            json_only(cli, "premises")?;
            let report = premise_report(&cal)?;
            if !report.all_hold() {
                warn!("not every premise holds under this calibration");
            }
            emit(cli, "premises", "json", &to_json(&report))
        }
        Command::Sharpness => {
            let profile = sharpness_profile(&cal)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut buf = Vec::new();
                    profile.write_csv(&mut buf)?;
                    emit(cli, "sharpness", "csv", &String::from_utf8(buf).expect("csv output is utf-8"))
                }
                Format::Json => emit(cli, "sharpness", "json", &to_json(&profile)),
            }
        }
        Command::Restoration { n_max } => {
            json_only(cli, "restoration")?;
            emit(cli, "restoration", "json", &to_json(&restoration_scan(&cal, *n_max)?))
        }
        Command::Validate { papers, replicates } => {
            let sim = SimConfig {
                papers: *papers,
                replicates: *replicates,
                seed: cli.seed,
                ..SimConfig::default()
            };
            let checks = oracle_suite(&cal, &sim)?;
            let failed = checks.iter().filter(|c| !c.pass).count();
            if failed > 0 {
                warn!("{failed} of {} oracle checks failed", checks.len());
            }
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => emit(cli, "validate", "json", &to_json(&checks)),
                Format::Csv => {
                    let mut s = String::from("check,target,estimate,se,result\n");
                    for c in &checks {
                        s.push_str(&format!(
                            "\"{}\",{},{},{},{}\n",
                            c.name,
                            peer_review_core::format::fmt_sig(c.target),
                            peer_review_core::format::fmt_sig(c.estimate),
                            peer_review_core::format::fmt_sig(c.se),
                            if c.pass { "PASS" } else { "FAIL" }
                        ));
                    }
                    emit(cli, "validate", "csv", &s)
                }
            }
        }
    }
}

fn configure_threads() {
    let Ok(raw) = std::env::var("PEER_REVIEW_THREADS") else {
        return;
    };
    match raw.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                warn!("could not size thread pool: {e}");
            }
        }
        _ => warn!("ignoring PEER_REVIEW_THREADS={raw}: expected a positive integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("peer-review: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
