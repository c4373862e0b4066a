//! `aa-guard`: audit A/B-test metrics for z-test validity with resampled
//! A/A tests.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aa_guard::ingest::{self, InputFormat};
use aa_guard::report::{self, ReportFormat, DEFAULT_FLAG_THRESHOLD};
use aa_guard::resample::{DEFAULT_ALPHA, DEFAULT_ITERATIONS};
use aa_guard::synth::{self, PopulationSpec};
use aa_guard::{Error, ResamplePlan, Result};
use clap::{Parser, Subcommand, ValueEnum};

const EXIT_FLAGGED: u8 = 2;

#[derive(Parser)]
#[command(name = "aa-guard", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Outcome {
    /// Sum of logged values per user (event counts when values are omitted).
    Sum,
    /// 1 if the user logged the event at all, else 0.
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Run the A/A audit over an event log and write a report.
    Validate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: InputFormat,
        /// File listing every user id, one per line; users without events
        /// count as zero outcomes.
        #[arg(long)]
        universe: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_FLAG_THRESHOLD)]
        flag_threshold: f64,
        #[arg(long, default_value_t = 0.5)]
        split_fraction: f64,
        /// Compare only users with a nonzero outcome for each event.
        #[arg(long)]
        exclude_zero_users: bool,
        #[arg(long, value_enum, default_value_t = Outcome::Sum)]
        outcome: Outcome,
        #[arg(long)]
        out: PathBuf,
        /// Report format; inferred from the --out extension when omitted.
        #[arg(long)]
        report_format: Option<ReportFormat>,
        /// Directory for fig1.csv, fig2.csv and fig3.csv (defaults to the
        /// report's directory).
        #[arg(long)]
        plots_dir: Option<PathBuf>,
        /// Worker threads for the resampling phase (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Generate a synthetic event log from a population spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the full user list, for use as --universe.
        #[arg(long)]
        universe_out: Option<PathBuf>,
    },
    /// Summarize a JSON report: flagged events and rank correlations.
    Diagnose {
        #[arg(long)]
        report: PathBuf,
    },
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
}

fn flagged_exit(report: &report::AuditReport) -> ExitCode {
    if report.flagged_events.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FLAGGED)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate {
            input,
            format,
            universe,
            iterations,
            seed,
            alpha,
            flag_threshold,
            split_fraction,
            exclude_zero_users,
            outcome,
            out,
            report_format,
            plots_dir,
            threads,
        } => {
            let records = ingest::load_events(open(&input)?, format)?;
            let universe = universe
                .map(|p| ingest::read_universe(open(&p)?))
                .transpose()?;
            let mut matrix = ingest::aggregate(&records, universe.as_ref())?;
            if let Outcome::Binary = outcome {
                matrix = matrix.to_indicator();
            }
            let plan = ResamplePlan {
                iterations,
                master_seed: seed,
                alpha,
                split_fraction,
                include_zero_users: !exclude_zero_users,
            };
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            let report = pool.install(|| report::audit(&matrix, &plan, flag_threshold))?;
            let format = report_format.unwrap_or_else(|| ReportFormat::from_path(&out));
            report::emit_report(&report, format, &out, plots_dir.as_deref())?;
            eprint!("{}", report::diagnose(&report));
            Ok(flagged_exit(&report))
        }
        Command::Synth {
            spec,
            out,
            universe_out,
        } => {
            let spec = PopulationSpec::from_path(&spec)?;
            let (records, users) = synth::generate_records(&spec)?;
            ingest::write_events_csv(&records, create(&out)?)
                .map_err(|e| Error::Io { path: out.clone(), source: e })?;
            if let Some(path) = universe_out {
                use std::io::Write;
                let mut w = create(&path)?;
                users
                    .iter()
                    .try_for_each(|u| writeln!(w, "{u}"))
                    .and_then(|_| w.flush())
                    .map_err(|e| Error::Io { path: path.clone(), source: e })?;
            }
            eprintln!(
                "wrote {} records for {} users and {} events to {}",
                records.len(),
                spec.users,
                spec.events.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Diagnose { report } => {
            let report = report::load_report(&report)?;
            print!("{}", report::diagnose(&report));
            Ok(flagged_exit(&report))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("aa-guard: {e}");
            ExitCode::FAILURE
        }
    }
}
