use clap::{Args, Parser, Subcommand};
use hybridstream::experiment::{
    load_toml, run_experiment, write_run_outputs, write_summary, ExperimentConfig, ExperimentError,
    REPORT_FILE,
};
use hybridstream::ingest::{generate_synthetic, preprocess_csv, write_stream, IngestConfig, IngestError, SynthConfig};
use hybridstream::stream::Schema;
use log::info;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "hybridstream", version, about = "Drift-aware stream classification experiments")]
struct Cli {
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a raw CSV into a canonical stream file.
    Preprocess {
        input: PathBuf,
        /// TOML ingest config (target_column, datetime_columns, ...).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        force: Force,
    },
    /// Write a synthetic drifting stream.
    Generate {
        /// TOML synthetic-stream config.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the generator seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        force: Force,
    },
    /// Run one experiment and write its report, trace and event log.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run directory; defaults to `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the experiment seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        force: Force,
    },
    /// Rank methods across all reports below a directory.
    Report {
        dir: PathBuf,
        /// Where ranking.csv and traces.csv go; defaults to DIR.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Force {
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

fn refuse_existing(path: &Path, force: &Force) -> Result<(), ExperimentError> {
    if path.exists() && !force.force {
        return Err(ExperimentError::OutputExists(path.to_path_buf()));
    }
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".schema.json");
    out.with_file_name(name)
}

fn write_manifest(out: &Path, schema: &Schema) -> Result<(), ExperimentError> {
    let path = manifest_path(out);
    let json = serde_json::to_string_pretty(schema).expect("schema serializes");
    std::fs::write(&path, json + "\n").map_err(|e| ExperimentError::Io { path, source: e })
}

fn describe(schema: &Schema, n_rows: usize) -> String {
    format!(
        "{n_rows} rows, {} features, {} classes",
        schema.n_features(),
        schema.n_classes()
    )
}

fn execute(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Preprocess {
            input,
            config,
            out,
            force,
        } => {
            let config: IngestConfig = load_toml(&config)?;
            if same_file(&input, &out) {
                return Err(ExperimentError::Config("output would overwrite the input file".into()));
            }
            refuse_existing(&out, &force)?;
            let summary = preprocess_csv(&input, &config, &out).map_err(|e| match e {
                IngestError::Io(source) if !input.exists() => ExperimentError::Io { path: input.clone(), source },
                other => other.into(),
            })?;
            write_manifest(&out, &summary.schema)?;
            println!(
                "{}: {} ({} rows without target dropped)",
                out.display(),
                describe(&summary.schema, summary.n_rows),
                summary.n_excluded
            );
        }
        Command::Generate {
            config,
            out,
            seed,
            force,
        } => {
            let mut config: SynthConfig = load_toml(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            config.validate().map_err(ExperimentError::Config)?;
            refuse_existing(&out, &force)?;
            let (schema, instances) = generate_synthetic(&config);
            write_stream(&out, &schema, &instances)?;
            write_manifest(&out, &schema)?;
            println!("{}: {}", out.display(), describe(&schema, instances.len()));
        }
        Command::Run {
            config: path,
            out,
            seed,
            force,
        } => {
            let mut config = ExperimentConfig::load(&path)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let dir = out.or_else(|| config.output.clone()).ok_or_else(|| {
                ExperimentError::Config("no output directory: pass --out or set `output`".into())
            })?;
            // fail before the (possibly long) run rather than after it
            refuse_existing(&dir.join(REPORT_FILE), &force)?;
            let output = run_experiment(&config)?;
            write_run_outputs(&dir, &output, force.force)?;
            let r = &output.report;
            info!("wrote {}", dir.display());
            println!(
                "{} on {}: F1-macro {:.4}, {} drifts, {} replacements ({:.1}s)",
                r.method_id,
                r.stream_id,
                r.final_f1_macro,
                r.drift_count,
                r.replacement_count,
                output.wall_time.as_secs_f64()
            );
        }
        Command::Report { dir, out } => {
            let out = out.unwrap_or_else(|| dir.clone());
            let summary = write_summary(&dir, &out)?;
            println!("{:>8}  {:>7}  method", "position", "score");
            for row in &summary.ranking {
                println!("{:>8}  {:>7.2}  {}", row.position, row.score, row.method);
            }
            info!("{} reports ranked; tables in {}", summary.n_reports, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match std::panic::catch_unwind(|| execute(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        // the panic hook has already printed the message
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
