//! `seccogc` — build gradient codes and key schedules, run privacy reports,
//! Monte-Carlo the aggregation protocol, and train the desk-scale benchmark.
//!
//! Every command is deterministic: rerunning with the same config and seed
//! produces byte-identical artifacts. Exit codes: 0 success, 1 runtime
//! failure, 2 usage or config error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seccogc::codes::{Arithmetic, CodingScheme};
use seccogc::config::ExperimentConfig;
use seccogc::fltrain::{dirichlet_partition, train, ModelArch, Scheme, TrainLog, TrainSetup};
use seccogc::keys::KeySchedule;
use seccogc::privacy;
use seccogc::protocol::{
    relative_update_error, run_round_h_seccogc, run_round_hfl_unreliable, run_round_ideal,
    run_round_private_hfl, unit_deltas, RoundError,
};
use seccogc::rng::{stream, tag};

#[derive(Parser)]
#[command(name = "seccogc", version, about = "Coding-enforced secure aggregation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a (K, s)-cyclic gradient code and write it as JSON.
    Codes(CodesArgs),
    /// Construct a zero-sum secret-key schedule and write it as JSON.
    Keys(KeysArgs),
    /// Emit the per-layer LDP report (CSV + JSON summary).
    Privacy(ConfiguredArgs),
    /// Run protocol rounds with synthetic unit deltas and log outcomes.
    Simulate(SimulateArgs),
    /// Train the desk-scale task under each configured aggregation scheme.
    Train(TrainArgs),
}

#[derive(Args)]
struct CodesArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long)]
    s: usize,
    #[arg(long, value_enum, default_value_t = ArithmeticArg::ExactRational)]
    arithmetic: ArithmeticArg,
    /// Output file (default: `scheme_K<K>_s<s>.json`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Check every invariant and print the validation report.
    #[arg(long)]
    verify: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArithmeticArg {
    ExactRational,
    Float,
}

impl From<ArithmeticArg> for Arithmetic {
    fn from(a: ArithmeticArg) -> Self {
        match a {
            ArithmeticArg::ExactRational => Arithmetic::ExactRational,
            ArithmeticArg::Float => Arithmetic::Float,
        }
    }
}

#[derive(Args)]
struct KeysArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long = "D")]
    dim: usize,
    /// Output file (default: `keys_K<K>.json`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sample a few rounds and check the zero-sum and row-norm invariants.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct ConfiguredArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's global seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: ConfiguredArgs,
    /// Number of rounds to simulate.
    #[arg(long, default_value_t = 1000)]
    rounds: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: ConfiguredArgs,
    /// Comma-separated override of the scheme list.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<String>>,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }
    fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Codes(args) => cmd_codes(args),
        Command::Keys(args) => cmd_keys(args),
        Command::Privacy(args) => cmd_privacy(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Train(args) => cmd_train(args),
    }
}

fn cmd_codes(args: CodesArgs) -> Result<(), CliError> {
    if args.k == 0 || args.s >= args.k {
        return Err(CliError::Usage(format!(
            "need K >= 1 and s <= K-1, got K={}, s={}",
            args.k, args.s
        )));
    }
    let scheme =
        CodingScheme::build(args.k, args.s, args.arithmetic.into()).map_err(CliError::runtime)?;
    let path = args
        .out
        .unwrap_or_else(|| PathBuf::from(format!("scheme_K{}_s{}.json", args.k, args.s)));
    write_file(&path, &scheme.to_json())?;
    println!(
        "wrote (K={}, s={}) scheme with f={} combination rows to {}",
        args.k,
        args.s,
        scheme.f(),
        path.display()
    );
    if args.verify {
        let report = scheme.verify();
        println!("verification: {report}");
        if !report.is_ok() {
            return Err(CliError::Runtime("scheme failed verification".into()));
        }
    }
    Ok(())
}

fn cmd_keys(args: KeysArgs) -> Result<(), CliError> {
    if args.dim == 0 {
        return Err(CliError::Usage("D must be positive".into()));
    }
    if args.lambda < 0.0 {
        return Err(CliError::Usage("lambda must be nonnegative".into()));
    }
    let schedule =
        KeySchedule::build(args.k, args.lambda, args.dim).map_err(CliError::usage)?;
    let path = args
        .out
        .unwrap_or_else(|| PathBuf::from(format!("keys_K{}.json", args.k)));
    write_file(&path, &schedule.to_json())?;
    println!(
        "wrote key schedule (K={}, lambda={}, D={}, {} shared sources) to {}",
        args.k,
        args.lambda,
        args.dim,
        schedule.sources(),
        path.display()
    );
    if args.verify {
        // structural invariants of A: zero column sums, row norms = lambda
        let mut worst_col = 0.0f64;
        for c in 0..schedule.sources() {
            let sum: f64 = (0..args.k).map(|r| schedule.a()[(r, c)]).sum();
            worst_col = worst_col.max(sum.abs());
        }
        let mut worst_norm = 0.0f64;
        for r in 0..args.k {
            let norm: f64 = schedule.a().row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            worst_norm = worst_norm.max((norm - args.lambda).abs());
        }
        let tol = 1e-10 * args.k as f64 * args.lambda.max(1.0);
        let mut worst: f64 = 0.0;
        for round in 0..16u64 {
            let mut rng = stream(&[tag::ROUND_KEYS, 0xc11, round]);
            let real = schedule.sample_keys(&mut rng, round);
            for d in 0..args.dim {
                let s: f64 = real.keys.iter().map(|k| k[d]).sum();
                worst = worst.max(s.abs());
            }
        }
        println!(
            "column-sum residual {worst_col:e}, row-norm deviation {worst_norm:e}, \
             zero-sum residual over 16 sampled rounds {worst:e} (tolerance {tol:e})"
        );
        if worst > tol || worst_col > tol || worst_norm > tol {
            return Err(CliError::Runtime("key schedule invariants violated".into()));
        }
    }
    Ok(())
}

fn load_config(common: &ConfiguredArgs) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::from_path(&common.config).map_err(CliError::usage)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out_dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    Ok((cfg, out_dir))
}

fn cmd_privacy(args: ConfiguredArgs) -> Result<(), CliError> {
    let (cfg, out_dir) = load_config(&args)?;
    let scheme = cfg.coding_scheme().map_err(CliError::runtime)?;
    let schedule = cfg.key_schedule(cfg.privacy.dim).map_err(CliError::runtime)?;
    let net = cfg.network().map_err(CliError::runtime)?;
    let report = privacy::full_report(
        &cfg.privacy_params(),
        &scheme,
        &schedule,
        &net,
        cfg.privacy.delta_prime,
        cfg.radius_method(),
    )
    .map_err(CliError::runtime)?;
    let csv_path = out_dir.join("privacy_report.csv");
    write_file(&csv_path, &report.to_csv())?;
    let json_path = out_dir.join("privacy_summary.json");
    write_file(&json_path, &report.to_json_summary())?;
    println!(
        "wrote {} entries to {} (worst-case leakage {} nats, {} warnings)",
        report.entries.len(),
        csv_path.display(),
        report.leakage_nats,
        report.warnings.len()
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let (cfg, out_dir) = load_config(&args.common)?;
    let scheme = cfg.coding_scheme().map_err(CliError::runtime)?;
    let dim = cfg.privacy.dim;
    let schedule = cfg.key_schedule(dim).map_err(CliError::runtime)?;
    let net = cfg.network().map_err(CliError::runtime)?;
    let k = cfg.code.k;
    let cluster: Vec<usize> = (0..k).collect();
    let max_attempts = cfg.training.max_attempts;
    let schemes = cfg.scheme_list();

    let mut csv = String::from(
        "round,scheme,attempts,delivered_fraction,update_error_vs_ideal,residual_noise_norm,status\n",
    );
    let mut attempt_total = 0u64;
    let mut failures = 0u64;
    for round in 1..=args.rounds {
        let deltas = unit_deltas(cfg.seed, round, k, dim);
        for &sch in &schemes {
            let row = match sch {
                Scheme::Ideal => {
                    let update = run_round_ideal(&deltas);
                    sim_row(round, sch, 1, 1.0, relative_update_error(&update, &deltas), 0.0, "ok")
                }
                Scheme::HSecCoGc => match run_round_h_seccogc(
                    &scheme,
                    &schedule,
                    &net,
                    &deltas,
                    round,
                    max_attempts,
                ) {
                    Ok(out) => {
                        attempt_total += out.attempts as u64;
                        sim_row(
                            round,
                            sch,
                            out.attempts,
                            1.0,
                            relative_update_error(&out.global_update, &deltas),
                            0.0,
                            "ok",
                        )
                    }
                    Err(RoundError::MaxAttemptsExceeded { attempts, .. }) => {
                        failures += 1;
                        sim_row(round, sch, attempts, 0.0, f64::NAN, 0.0, "max-attempts-exceeded")
                    }
                    Err(e) => return Err(CliError::runtime(e)),
                },
                Scheme::HflUnreliable => {
                    match run_round_hfl_unreliable(&net, &deltas, &cluster, round) {
                        Ok(out) => sim_row(
                            round,
                            sch,
                            1,
                            fraction(&out.delivered),
                            relative_update_error(&out.update, &deltas),
                            out.residual_noise_norm,
                            "ok",
                        ),
                        Err(RoundError::EmptyRound) => {
                            sim_row(round, sch, 1, 0.0, f64::NAN, 0.0, "empty-round")
                        }
                        Err(e) => return Err(CliError::runtime(e)),
                    }
                }
                Scheme::PrivateHfl => {
                    match run_round_private_hfl(&net, &deltas, &schedule, &cluster, round) {
                        Ok(out) => sim_row(
                            round,
                            sch,
                            1,
                            fraction(&out.delivered),
                            relative_update_error(&out.update, &deltas),
                            out.residual_noise_norm,
                            "ok",
                        ),
                        Err(RoundError::EmptyRound) => {
                            sim_row(round, sch, 1, 0.0, f64::NAN, 0.0, "empty-round")
                        }
                        Err(e) => return Err(CliError::runtime(e)),
                    }
                }
            };
            csv.push_str(&row);
        }
    }
    let path = out_dir.join("simulate.csv");
    write_file(&path, &csv)?;
    println!(
        "simulated {} rounds x {} schemes -> {} (secure rounds: mean attempts {:.4}, {} failures)",
        args.rounds,
        schemes.len(),
        path.display(),
        attempt_total as f64 / (args.rounds - failures).max(1) as f64,
        failures
    );
    Ok(())
}

fn sim_row(
    round: u64,
    scheme: Scheme,
    attempts: u32,
    delivered: f64,
    err: f64,
    residual: f64,
    status: &str,
) -> String {
    let err_s = if err.is_nan() { String::new() } else { err.to_string() };
    format!(
        "{round},{},{attempts},{delivered},{err_s},{residual},{status}\n",
        scheme.name()
    )
}

fn fraction(mask: &[bool]) -> f64 {
    mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let (mut cfg, out_dir) = load_config(&args.common)?;
    if let Some(schemes) = args.schemes {
        cfg.schemes = schemes;
        cfg.validate().map_err(CliError::usage)?;
    }
    let (train_data, test_data) = cfg.datasets().map_err(CliError::usage)?;
    let k = cfg.code.k;
    let partition = dirichlet_partition(
        &train_data,
        k,
        cfg.training.dataset.gamma(),
        seccogc::rng::mix64(cfg.seed ^ 0x70617274), // "part"
    )
    .map_err(CliError::runtime)?;
    let coding = cfg.coding_scheme().map_err(CliError::runtime)?;
    let arch = ModelArch::new(cfg.training.model, &train_data);
    let keys = cfg.key_schedule(arch.param_count()).map_err(CliError::runtime)?;
    let net = cfg.network().map_err(CliError::runtime)?;
    let train_cfg = cfg.training_config();

    let mut combined = String::from(TrainLog::CSV_HEADER);
    combined.push('\n');
    for sch in cfg.scheme_list() {
        let setup = TrainSetup {
            train_data: &train_data,
            test_data: &test_data,
            partition: &partition,
            scheme: sch,
            coding: &coding,
            keys: &keys,
            net: &net,
            config: &train_cfg,
        };
        let log = train(&setup).map_err(CliError::runtime)?;
        let path = out_dir.join(format!("train_{}.csv", sch.name()));
        write_file(&path, &log.to_csv())?;
        for line in log.to_csv().lines().skip(1) {
            combined.push_str(line);
            combined.push('\n');
        }
        println!(
            "{}: final loss {:.6}, final accuracy {:.4} -> {}",
            sch.name(),
            log.final_loss,
            log.final_acc,
            path.display()
        );
    }
    let combined_path = out_dir.join("train_combined.csv");
    write_file(&combined_path, &combined)?;
    println!("combined log -> {}", combined_path.display());
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}
