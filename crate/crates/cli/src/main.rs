//! Command-line front end: fit a CSV file, stream from stdin, benchmark
//! incremental against batch recomputation, or generate test scenarios.
//!
//! Exit status: 0 on success, 1 on data errors (unreadable input,
//! malformed rows, numerical failures), 2 on usage errors (bad flags or
//! parameters, reported before any I/O).

use clap::{Args, Parser, Subcommand};
use ndarray::{s, Array2};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use pcastream::{
    batch_pca, generate, prefix_grid, read_csv_file, run_bench, write_bench_csv, write_dataset,
    write_diagnostics, write_diagnostics_record, write_pc_series, BenchMode, DiagnosticsRecord,
    Error, PcaConfig, PcaEngine, PcaStepResult, Result, RowReader, Scenario,
};

#[derive(Parser)]
#[command(
    name = "pcastream",
    version,
    about = "Streaming principal component analysis with batch-exact updates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a CSV file and emit per-step PC values
    Fit(FitArgs),
    /// Read CSV rows from stdin, emit one diagnostics record per sample
    Stream(StreamArgs),
    /// Time incremental updates against batch recomputation
    Bench(BenchArgs),
    /// Generate synthetic scenario data
    Gen(GenArgs),
}

/// Model settings shared by every data-processing subcommand.
#[derive(Args)]
struct ModelArgs {
    /// Warm-up sample count (default: one more than the variable count)
    #[arg(long = "n-start")]
    n_start: Option<usize>,

    /// Keep raw offsets instead of centering each variable
    #[arg(long = "no-center")]
    no_center: bool,

    /// Keep raw magnitudes instead of scaling to unit variance
    #[arg(long = "no-scale")]
    no_scale: bool,

    /// Keep component identities continuous across steps
    #[arg(long, value_parser = ["on", "off"], default_value = "on")]
    continuity: String,

    /// Relative eigenvalue gap treated as degenerate
    #[arg(long = "degeneracy-eps", default_value_t = 1e-6)]
    degeneracy_eps: f64,
}

#[derive(Args)]
struct FitArgs {
    /// Input CSV with a header row
    input: PathBuf,

    #[command(flatten)]
    model: ModelArgs,

    /// Also run the batch reference on the full file and record each
    /// step's covariance distance to its final matrix
    #[arg(long = "compare-batch")]
    compare_batch: bool,

    /// PC series CSV destination (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,

    /// Per-step diagnostics destination, one JSON record per line
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct BenchArgs {
    /// Variable count of the generated benchmark stream
    #[arg(long, default_value_t = 27)]
    vars: usize,

    /// Stream length
    #[arg(long, default_value_t = 1000)]
    samples: usize,

    /// Repetitions per timing point
    #[arg(long, default_value_t = 33)]
    trials: usize,

    /// Comma-separated arms: incremental, batch-single, batch-cumulative
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "incremental,batch-single,batch-cumulative"
    )]
    modes: Vec<String>,

    /// Generator seed for the benchmark stream
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[command(flatten)]
    model: ModelArgs,

    /// Timing table CSV destination (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Scenario: random, crossing or degenerate
    #[arg(long)]
    scenario: String,

    /// Variable count
    #[arg(long, default_value_t = 27)]
    vars: usize,

    /// Sample count
    #[arg(long, default_value_t = 500)]
    samples: usize,

    /// Generator seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Data CSV destination (default: stdout)
    #[arg(long)]
    output: Option<PathBuf>,
}

fn build_config(m: usize, model: &ModelArgs) -> Result<PcaConfig> {
    let mut config = PcaConfig::new(m)
        .with_centering(!model.no_center)
        .with_scaling(!model.no_scale)
        .with_continuity(model.continuity == "on")
        .with_eps_rel(model.degeneracy_eps);
    if let Some(n_start) = model.n_start {
        config = config.with_n_start(n_start);
    }
    config.validate()?;
    Ok(config)
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let dataset = read_csv_file(&args.input)?;
    let m = dataset.rows.ncols();
    let config = build_config(m, &args.model)?;
    if dataset.rows.nrows() < config.n_start {
        return Err(Error::InsufficientData {
            needed: config.n_start,
            actual: dataset.rows.nrows(),
        });
    }

    let reference = if args.compare_batch {
        Some(batch_pca(dataset.rows.view(), &config)?)
    } else {
        None
    };

    let mut engine = PcaEngine::warmup(dataset.rows.slice(s![..config.n_start, ..]), &config)?;

    // Warm-up block: PC values of the initial samples under the warm-up
    // basis, one series row each, before any push happens.
    let warmup_eigenvalues = engine.eigenvalues().clone();
    let mut series: Vec<PcaStepResult> = engine
        .warmup_pcs()
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| PcaStepResult {
            step: i + 1,
            pcs: row.to_owned(),
            eigenvalues: warmup_eigenvalues.clone(),
            q_frobenius_to_reference: None,
            corrections: Vec::new(),
        })
        .collect();

    let mut records = Vec::new();
    for i in config.n_start..dataset.rows.nrows() {
        let row = dataset.rows.row(i);
        let mut result = engine.push(row.as_slice().expect("row-major dataset"))?;
        if let Some(batch) = &reference {
            result.q_frobenius_to_reference = Some(engine.frobenius_to(batch.q.view())?);
        }
        records.push(DiagnosticsRecord::from_step(&result));
        series.push(result);
    }

    write_pc_series(&series, open_output(&args.output)?)?;
    if let Some(path) = &args.diagnostics {
        write_diagnostics(&records, BufWriter::new(File::create(path)?))?;
    }
    if let Some(batch) = &reference {
        let spectrum = serde_json::json!({
            "batch_eigenvalues": batch.eigenvalues.to_vec(),
        });
        eprintln!("{spectrum}");
    }
    Ok(())
}

fn cmd_stream(args: StreamArgs) -> Result<()> {
    let stdin = std::io::stdin();
    let mut reader = RowReader::new(stdin.lock())?;
    let m = reader.dim();
    let config = build_config(m, &args.model)?;

    let mut warm = Array2::zeros((config.n_start, m));
    for i in 0..config.n_start {
        match reader.next_row() {
            Some(row) => {
                let row = row?;
                if row.len() != m {
                    unreachable!("row length validated against header");
                }
                for (j, v) in row.into_iter().enumerate() {
                    warm[[i, j]] = v;
                }
            }
            None => {
                return Err(Error::InsufficientData {
                    needed: config.n_start,
                    actual: i,
                })
            }
        }
    }
    let mut engine = PcaEngine::warmup(warm.view(), &config)?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    while let Some(row) = reader.next_row() {
        let result = engine.push(&row?)?;
        let record = DiagnosticsRecord::from_step(&result);
        write_diagnostics_record(&record, &mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let modes: Vec<BenchMode> = args
        .modes
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;
    let config = build_config(args.vars, &args.model)?;
    let data = generate(Scenario::Random, args.vars, args.samples, args.seed)?;
    let grid = prefix_grid(config.n_start, args.samples, 10);
    let records = run_bench(data.data.view(), &config, &grid, args.trials, &modes)?;
    write_bench_csv(&records, open_output(&args.output)?)
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let scenario: Scenario = args.scenario.parse()?;
    let generated = generate(scenario, args.vars, args.samples, args.seed)?;
    let names: Vec<String> = (1..=args.vars).map(|j| format!("x{j}")).collect();
    write_dataset(&names, generated.data.view(), open_output(&args.output)?)
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Stream(args) => cmd_stream(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Gen(args) => cmd_gen(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        let code = match err {
            Error::InvalidConfig(_) | Error::InvalidScenario(_) => 2,
            _ => 1,
        };
        std::process::exit(code);
    }
}
