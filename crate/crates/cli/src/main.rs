//! `leakcheck`: run, compare and audit windowed activity-classification
//! experiments from a JSON config, generate synthetic datasets, and inspect
//! or re-verify persisted reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use leakcheck_core::error::{Error, Result};
use leakcheck_core::ingest::{SampleTableSchema, SubjectSource};
use leakcheck_core::model::ClassTable;
use leakcheck_core::pipeline::{
    audit_only, compare, run, verify_run_artifacts, ExperimentConfig, RunReport,
};
use leakcheck_core::synth::{
    generate_ambient_stream, generate_body_streams, location_map, serialize_sample_table,
    SynthConfig,
};

#[derive(Parser)]
#[command(name = "leakcheck", version, about = "Leakage-aware evaluation for windowed activity classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Write reports and artifacts into this directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Suppress everything except errors
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment (single split spec) and report metrics
    Run(ConfigArgs),
    /// Run the biased and unbiased splits side by side and report the gap
    Compare(ConfigArgs),
    /// Segment and split only: leakage, group integrity, overlap histogram
    Audit(ConfigArgs),
    /// Generate a synthetic dataset on disk, with a manifest
    Synth {
        /// ambient (event log) or body (per-subject sample tables)
        #[arg(long)]
        mode: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Pretty-print a persisted run report
    Inspect {
        /// Path to a report_<scheme>.json file
        #[arg(long)]
        report: PathBuf,
    },
    /// Recompute metrics from persisted predictions and check they match
    Verify {
        /// Directory holding the run artifacts
        #[arg(long)]
        dir: PathBuf,
        /// Scheme name used in the artifact file names
        #[arg(long)]
        scheme: String,
    },
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = Some(out.clone());
    }
    Ok(config)
}

fn print_report(report: &RunReport, quiet: bool) {
    if quiet {
        return;
    }
    println!("scheme             : {}", report.scheme);
    println!("seed               : {}", report.seed);
    println!("balanced accuracy  : {:.4}", report.metrics.balanced_accuracy);
    println!("weighted F1        : {:.4}", report.metrics.weighted_f1);
    println!("leakage fraction   : {:.4}", report.audit.leakage_fraction);
    println!("group violations   : {}", report.audit.violations.len());
    println!(
        "train/test size    : {}/{}",
        report.audit.train_size, report.audit.test_size
    );
}

fn cmd_run(args: &ConfigArgs) -> Result<()> {
    let config = load_config(args)?;
    let report = run(&config)?;
    print_report(&report, args.quiet);
    Ok(())
}

fn cmd_compare(args: &ConfigArgs) -> Result<()> {
    let config = load_config(args)?;
    let gap = compare(&config)?;
    if !args.quiet {
        println!("== biased ({}) ==", gap.biased.scheme);
        print_report(&gap.biased, false);
        println!("== unbiased ({}) ==", gap.unbiased.scheme);
        print_report(&gap.unbiased, false);
        println!("== gap (biased - unbiased) ==");
        println!("balanced accuracy  : {:+.4}", gap.gap_balanced_accuracy);
        println!("weighted F1        : {:+.4}", gap.gap_weighted_f1);
    }
    Ok(())
}

fn cmd_audit(args: &ConfigArgs) -> Result<()> {
    let config = load_config(args)?;
    let report = audit_only(&config)?;
    if !args.quiet {
        println!("leakage fraction        : {:.4}", report.leakage_fraction);
        println!("near-duplicate fraction : {:.4}", report.near_duplicate_fraction);
        println!(
            "adjacency fraction      : {:.4} (k = {})",
            report.adjacency_fraction, report.adjacency_k
        );
        println!("group violations        : {}", report.violations.len());
        for v in &report.violations {
            println!("  group '{}' spans partitions {:?}", v.group_key, v.partitions);
        }
        println!("overlap histogram       : {:?}", report.overlap_histogram);
    }
    Ok(())
}

fn cmd_synth(mode: &str, out: &PathBuf, seed: u64) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut classes = ClassTable::new();
    let manifest = match mode {
        "ambient" => {
            let mut config = SynthConfig::default_ambient();
            config.seed = seed;
            let events = generate_ambient_stream(&config, &mut classes)?;
            let path = out.join("events.txt");
            let text = leakcheck_core::ingest::serialize_event_log(&events, &classes);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            serde_json::json!({
                "kind": "ambient",
                "files": [{ "path": "events.txt" }],
                "event_schema": leakcheck_core::ingest::EventLogSchema::default(),
                "location_map": location_map(&config),
            })
        }
        "body" => {
            let mut config = SynthConfig::default_body();
            config.seed = seed;
            let streams = generate_body_streams(&config, &mut classes)?;
            let mut files = Vec::new();
            for (subject, rows) in &streams {
                let name = format!("{subject}.txt");
                let path = out.join(&name);
                std::fs::write(&path, serialize_sample_table(rows, &classes))
                    .map_err(|e| Error::io(&path, e))?;
                files.push(serde_json::json!({ "path": name, "subject_id": subject }));
            }
            let schema = SampleTableSchema::new(
                (0..config.channels).collect(),
                config.channels,
                SubjectSource::Constant("unknown".to_string()),
            );
            serde_json::json!({
                "kind": "body",
                "files": files,
                "sample_schema": schema,
            })
        }
        other => {
            return Err(Error::config(format!(
                "unknown synth mode '{other}' (expected ambient or body)"
            )))
        }
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::invariant(format!("manifest serialize: {e}")))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    println!("wrote {mode} dataset and manifest to {}", out.display());
    Ok(())
}

fn cmd_inspect(path: &PathBuf) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: RunReport =
        serde_json::from_str(&text).map_err(|e| Error::format(format!("report parse: {e}")))?;
    print_report(&report, false);
    println!("config fingerprint : {}", report.config_fingerprint);
    println!("per-class F1:");
    for (name, f1) in report.confusion.classes.iter().zip(&report.metrics.per_class_f1) {
        println!("  {name:<20} {f1:.4}");
    }
    println!("confusion matrix (rows = truth):");
    print!("{}", report.confusion.to_csv());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Audit(args) => cmd_audit(args),
        Command::Synth { mode, out, seed } => cmd_synth(mode, out, *seed),
        Command::Inspect { report } => cmd_inspect(report),
        Command::Verify { dir, scheme } => {
            verify_run_artifacts(dir, scheme)?;
            println!("artifacts for scheme '{scheme}' verify clean");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    // die quietly when stdout is closed early (e.g. piped into head)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
