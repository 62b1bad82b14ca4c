mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::info;
use phonospace::dataset::{validate_dataset, MANIFEST_FILE};
use phonospace::report::{self, RunConfig, Table};
use phonospace::synthgen::{generate_planted, PlantedConfig};

use config::{run_config, FileConfig};

#[derive(Parser)]
#[command(name = "phonospace", version, about = "Layerwise analysis of speech-model embeddings")]
struct Cli {
    /// Flat key = value settings file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    /// Output directory for result tables or generated datasets.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check dataset containers; exits 1 if anything is wrong.
    Validate {
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
    },
    /// Write a synthetic dataset with planted structure.
    Synth {
        /// Planted-corpus settings (TOML); defaults when omitted.
        #[arg(long, value_name = "PATH")]
        spec: Option<PathBuf>,
    },
    /// Layerwise probe accuracy table.
    Probe(AnalysisArgs),
    /// CRV table for directed factor pairs.
    Geometry(AnalysisArgs),
    /// Tone/phone AMI per syllable role.
    Ami(AnalysisArgs),
    /// Magnitude statistics of phone and speaker centroids.
    Magnitudes(AnalysisArgs),
    /// Join the result tables in the output directory into report.json.
    Report,
}

#[derive(Args, Debug, Default)]
pub struct AnalysisArgs {
    /// Dataset manifests or directories.
    pub datasets: Vec<PathBuf>,
    /// Comma-separated: phone, tone, speaker.
    #[arg(long, value_delimiter = ',')]
    pub probe_types: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub layers: Option<Vec<u32>>,
    /// Comma-separated x:y pairs, e.g. phone:speaker.
    #[arg(long, value_delimiter = ',')]
    pub pairs: Option<Vec<String>>,
    #[arg(long)]
    pub k_phone: Option<usize>,
    #[arg(long)]
    pub k_speaker: Option<usize>,
    #[arg(long)]
    pub k_tone: Option<usize>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub replacement: bool,
    #[arg(long)]
    pub speaker_disjoint: bool,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(Failure::Usage)?,
        None => FileConfig::default(),
    };
    if let Some(n) = cli.workers.or(file.workers) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")
            .map_err(runtime)?;
    }
    let out = cli.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from("."));

    let table_fn: fn(&RunConfig) -> phonospace::Result<Table> = match &cli.command {
        Command::Validate { datasets } => return Ok(validate(datasets)),
        Command::Synth { spec } => return synth(spec.as_deref().or(file.planted.as_deref()), cli.seed, &out),
        Command::Report => return write_report(&out),
        Command::Probe(_) => report::probe_table,
        Command::Geometry(_) => report::geometry_table,
        Command::Ami(_) => report::ami_table,
        Command::Magnitudes(_) => report::magnitude_table,
    };
    let (Command::Probe(args) | Command::Geometry(args) | Command::Ami(args) | Command::Magnitudes(args)) =
        &cli.command
    else {
        unreachable!("non-table commands returned above");
    };
    let cfg = run_config(&file, args, cli.seed).map_err(Failure::Usage)?;
    let table = table_fn(&cfg).map_err(runtime)?;
    write_table(&out, &table, &cfg.provenance()).map_err(runtime)?;
    Ok(ExitCode::SUCCESS)
}

fn validate(datasets: &[PathBuf]) -> ExitCode {
    let mut total = 0;
    for path in datasets {
        let manifest = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.clone() };
        let findings = validate_dataset(&manifest);
        for f in &findings {
            println!("{}: {f}", path.display());
        }
        total += findings.len();
    }
    if total == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{total} finding(s)");
        ExitCode::from(1)
    }
}

fn synth(spec: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<ExitCode, Failure> {
    let mut config = match spec {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Usage)?;
            toml::from_str::<PlantedConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(Failure::Usage)?
        }
        None => PlantedConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate().map_err(|e| Failure::Usage(e.into()))?;
    generate_planted(&config, out).map_err(runtime)?;
    info!("wrote planted dataset to {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn write_table(out: &Path, table: &Table, provenance: &str) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(table.file_name());
    fs::write(&path, table.to_csv(provenance)).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {} rows to {}", table.rows.len(), path.display());
    Ok(())
}

fn write_report(out: &Path) -> Result<ExitCode, Failure> {
    fs::create_dir_all(out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(runtime)?;
    let doc = report::join_tables(out, &["probe", "geometry", "ami", "magnitudes"]).map_err(runtime)?;
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(&doc).expect("report serializes");
    fs::write(&path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .map_err(runtime)?;
    Ok(ExitCode::SUCCESS)
}
