use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use substream_cli::config::GeneratorSpec;
use substream_cli::runner::{self, Format, RunOptions};
use substream_cli::verify::{run_checks, Check, Verdict, VerifyOptions};
use substream_cli::{CliError, ExperimentConfig, Instance};

#[derive(Parser)]
#[command(name = "substream", about = "Streaming submodular maximization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Fill the ms column with wall time.
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the trials of an experiment config.
    Run(RunArgs),
    /// Run exhaustive checks on an instance.
    Verify {
        /// Instance JSON; alternatively take it from --config.
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated: submodular,independence,matroid,p-system,hardness.
        #[arg(long, default_value = "submodular,independence,matroid,p-system,hardness")]
        checks: String,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 12)]
        n_cap: usize,
    },
    /// Write a generated instance as JSON.
    GenInstance {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        universe: Option<usize>,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        block: Option<usize>,
        #[arg(long)]
        decoy_degree: Option<usize>,
        #[arg(long)]
        edge_prob: Option<f64>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        alpha: Option<usize>,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config with timing and print throughput.
    Bench(RunArgs),
}

fn need<T>(v: Option<T>, name: &str, kind: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("{kind} needs --{name}")))
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_run(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn main_inner(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_run(&args)?;
            let out = runner::run(
                &cfg,
                RunOptions {
                    jobs: args.jobs,
                    timing: args.timing,
                },
            )?;
            let format = match args.format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
            runner::write_output(&out, format, sink(&args.out)?)
        }
        Command::Bench(args) => {
            let cfg = load_run(&args)?;
            let out = runner::run(
                &cfg,
                RunOptions {
                    jobs: args.jobs,
                    timing: true,
                },
            )?;
            let mut w = sink(&args.out)?;
            let total: f64 = out.rows.iter().map(|r| r.ms).sum();
            let calls: u64 = out.rows.iter().map(|r| r.f_calls).sum();
            let io = |e: io::Error| CliError::Io(e.to_string());
            writeln!(w, "algorithm: {}", cfg.algorithm.id()).map_err(io)?;
            writeln!(w, "trials: {}", out.rows.len()).map_err(io)?;
            writeln!(w, "total ms: {total:.3}").map_err(io)?;
            writeln!(w, "mean ms per trial: {:.3}", total / out.rows.len() as f64).map_err(io)?;
            if total > 0.0 {
                writeln!(w, "f calls per ms: {:.1}", calls as f64 / total).map_err(io)?;
            }
            Ok(())
        }
        Command::Verify {
            instance,
            config,
            checks,
            p,
            n_cap,
        } => {
            let inst = match (instance, config) {
                (Some(path), None) => Instance::load(&path)?,
                (None, Some(path)) => {
                    let cfg = ExperimentConfig::load(&path)?;
                    cfg.shared_instance()?
                        .ok_or_else(|| CliError::Config("config resamples; give --instance".into()))?
                }
                _ => return Err(CliError::Config("give exactly one of --instance or --config".into())),
            };
            let checks = checks
                .split(',')
                .map(|s| Check::parse(s.trim()))
                .collect::<Result<Vec<_>, _>>()?;
            let results = run_checks(&inst, &checks, &VerifyOptions { n_cap, p })?;
            let mut failed = Vec::new();
            for r in &results {
                println!("{r}");
                if matches!(r.verdict, Verdict::Fail(_)) {
                    failed.push(r.check.name());
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Invariant(format!("failed checks: {}", failed.join(", "))))
            }
        }
        Command::GenInstance {
            kind,
            n,
            universe,
            degree,
            r,
            block,
            decoy_degree,
            edge_prob,
            rank,
            p,
            k,
            alpha,
            ell,
            seed,
            out,
        } => {
            let k_ = kind.as_str();
            let spec = match k_ {
                "coverage-random" => GeneratorSpec::CoverageRandom {
                    n: need(n, "n", k_)?,
                    universe: need(universe, "universe", k_)?,
                    degree: need(degree, "degree", k_)?,
                    r: need(r, "r", k_)?,
                    seed,
                },
                "planted-coverage" => GeneratorSpec::PlantedCoverage {
                    n: need(n, "n", k_)?,
                    r: need(r, "r", k_)?,
                    block: block.unwrap_or(10),
                    decoy_degree: decoy_degree.unwrap_or(4),
                    seed,
                },
                "cut-random" => GeneratorSpec::CutRandom {
                    n: need(n, "n", k_)?,
                    edge_prob: need(edge_prob, "edge-prob", k_)?,
                    rank: need(rank, "rank", k_)?,
                    seed,
                },
                "hardness" => GeneratorSpec::Hardness {
                    p: need(p, "p", k_)?,
                    r: need(r, "r", k_)?,
                    k,
                    alpha,
                    ell,
                },
                other => return Err(CliError::Config(format!("unknown instance kind {other:?}"))),
            };
            let inst = Instance::from_generated(&spec.generate()?);
            match out {
                Some(path) => inst.save(&path),
                None => {
                    let text = serde_json::to_string(&inst.file).map_err(|e| CliError::Io(e.to_string()))?;
                    println!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
