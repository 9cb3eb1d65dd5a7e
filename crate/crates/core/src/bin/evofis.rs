use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use evofis::bench::{
    analyze, run_config_file, write_stats, OutputFormat, RunOptions, ScoreMatrix, SynthKind,
    SynthSpec,
};
use evofis::{Error, Result};

#[derive(Parser)]
#[command(name = "evofis", version, about = "Evolving fuzzy forecasters: data, runs and statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic series as CSV.
    Synth(SynthArgs),
    /// Run every algorithm of an experiment config.
    Run(RunArgs),
    /// Rank algorithms and test significance from reports or a score matrix.
    Stats(StatsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Sine,
    TwoCluster,
    Drift,
    DailyProfile,
}

impl From<KindArg> for SynthKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Sine => SynthKind::Sine,
            KindArg::TwoCluster => SynthKind::TwoCluster,
            KindArg::Drift => SynthKind::Drift,
            KindArg::DailyProfile => SynthKind::DailyProfile,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML generator spec; replaces the flags below when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "sine")]
    kind: KindArg,
    #[arg(long, default_value_t = 200)]
    length: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Samples per day.
    #[arg(long, default_value_t = 24)]
    period: usize,
    /// Segment length for two-cluster and drift.
    #[arg(long, default_value_t = 100)]
    segment: usize,
    /// Add a temperature column (daily-profile).
    #[arg(long)]
    covariate: bool,
    #[arg(long, default_value_t = 4)]
    nu: usize,
    #[arg(long, default_value_t = 1)]
    gamma: usize,
    /// Output file (`.csv`) or directory.
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Stop adapting during the test stream.
    #[arg(long)]
    freeze: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// ExperimentReport JSON files.
    reports: Vec<PathBuf>,
    /// Score matrix CSV (`problem,<alg>,...`) instead of reports.
    #[arg(long, conflicts_with = "reports")]
    matrix: Option<PathBuf>,
    #[arg(long, default_value = "stats")]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

fn synth(args: SynthArgs) -> Result<()> {
    let spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str::<SynthSpec>(&text).map_err(|e| Error::Config {
                file: path.display().to_string(),
                message: e.to_string(),
            })?
        }
        None => SynthSpec {
            kind: args.kind.into(),
            length: args.length,
            noise: args.noise,
            seed: args.seed,
            period: args.period,
            segment: args.segment,
            covariate: args.covariate,
            nu: args.nu,
            gamma: args.gamma,
        },
    };
    let path = if args.output.extension().is_some_and(|e| e == "csv") {
        args.output
    } else {
        args.output.join(format!("{}.csv", spec.kind))
    };
    let sidecar = spec.write_csv(&path)?;
    println!("wrote {} and {}", path.display(), sidecar.display());
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let opts = RunOptions {
        output_dir: args.output,
        freeze: args.freeze,
    };
    let outcome = run_config_file(&args.config, &opts)?;
    println!("{:<10} {:<8} {:>8} {:>8} {:>6}", "problem", "algo", "RMSE", "NDEI", "RULES");
    for r in &outcome.reports {
        println!(
            "{:<10} {:<8} {:>8.4} {:>8.4} {:>6}",
            r.problem, r.algorithm, r.rmse, r.ndei, r.final_rule_count
        );
    }
    println!("manifest: {}", outcome.manifest_path.display());
    Ok(())
}

fn stats(args: StatsArgs) -> Result<()> {
    let matrix = match &args.matrix {
        Some(path) => ScoreMatrix::from_csv(path)?,
        None if args.reports.is_empty() => {
            return Err(Error::InvalidArgument(
                "give report files or --matrix <csv>".into(),
            ))
        }
        None => ScoreMatrix::load_reports(&args.reports)?,
    };
    let report = analyze(&matrix)?;
    let format = match args.format {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    };
    let files = write_stats(&report, &args.output, format)?;

    let ranks = &report.ranks;
    for (alg, avg) in ranks.algorithms.iter().zip(&ranks.average_ranks) {
        println!("avg rank {alg:<10} {avg:.4}");
    }
    match &report.friedman {
        Some(outcome) => {
            println!("Friedman Q = {:.4} (df = {})", outcome.q, outcome.df);
            for level in &outcome.levels {
                println!(
                    "  alpha {}: critical {:.4}{} -> {}",
                    level.alpha,
                    level.critical_value,
                    if level.exact { " (exact)" } else { " (chi-square)" },
                    if level.reject_null { "reject H0" } else { "retain H0" }
                );
            }
            for gap in &report.differences {
                println!("  {} vs {}: {:.4}", gap.best, gap.other, gap.difference);
            }
            for cd in &report.critical_differences {
                println!("  CD alpha {}: {:.4}", cd.alpha, cd.cd);
            }
        }
        None => {
            if let Some(note) = &report.note {
                eprintln!("{note}");
            }
        }
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => synth(args),
        Command::Run(args) => run(args),
        Command::Stats(args) => stats(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
