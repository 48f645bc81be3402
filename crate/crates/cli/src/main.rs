use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use framegraph::config::PipelineConfig;
use framegraph::pipeline::{Pipeline, PipelineError};
use framegraph::toy;

#[derive(Parser)]
#[command(
    name = "framegraph",
    version,
    about = "Frame hypergraph mining and controlled document generation"
)]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// mock, echo, canned or http.
    #[arg(long, global = true)]
    provider: Option<String>,
    /// hypergraph or a link-prediction heuristic.
    #[arg(long, global = true)]
    method: Option<String>,
    /// Comma-separated control attributes.
    #[arg(long, global = true)]
    control: Option<String>,
    #[arg(long = "mix-ratio", global = true)]
    mix_ratio: Option<f64>,
    #[arg(long = "out-dir", global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract frames from raw documents.
    Parse { documents: PathBuf },
    /// Take frames from a corpus file that already has them.
    Import { corpus: PathBuf },
    /// Hypergraph snapshot, DOT and affinity/intimacy matrices.
    Build,
    /// Ranked candidates per frame.
    Mine,
    /// Mined frames from the candidate lists.
    Mix,
    /// Frame histories and heatmaps.
    Temporal,
    /// Generation jobs per control attribute.
    Generate,
    /// Metric reports for the generated variants.
    Evaluate,
    /// Every stage in order.
    Run { documents: PathBuf },
    /// Write the bundled toy corpus, canned responses and a config.
    Toy { dir: PathBuf },
}

impl Command {
    fn stage(&self) -> &'static str {
        match self {
            Command::Parse { .. } => "parse",
            Command::Import { .. } => "import",
            Command::Build => "build",
            Command::Mine => "mine",
            Command::Mix => "mix",
            Command::Temporal => "temporal",
            Command::Generate => "generate",
            Command::Evaluate => "evaluate",
            Command::Run { .. } => "run",
            Command::Toy { .. } => "toy",
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(p) = &cli.provider {
        cfg.set("provider", p)?;
    }
    if let Some(m) = &cli.method {
        cfg.set("method", m)?;
    }
    if let Some(c) = &cli.control {
        cfg.set("control", c)?;
    }
    if let Some(r) = cli.mix_ratio {
        cfg.set("mix_ratio", &r.to_string())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(|e| PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write_toy(dir: &Path) -> Result<serde_json::Value, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let documents = dir.join("documents.jsonl");
    toy::raw_corpus().save(&documents)?;
    let canned = dir.join("canned.jsonl");
    toy::canned_responses().save(&canned)?;
    let config = dir.join("config.txt");
    write(
        &config,
        "provider = mock\ncanned_responses = canned.jsonl\n",
    )?;
    Ok(json!({"documents": documents, "canned": canned, "config": config}))
}

fn run(cli: &Cli) -> Result<serde_json::Value, PipelineError> {
    if let Command::Toy { dir } = &cli.command {
        return write_toy(dir);
    }
    let cfg = load_config(cli)?;
    let hash = cfg.hash();
    let seed = cfg.seed;
    let p = Pipeline::new(cfg, &cli.out_dir)?;
    let mut out = json!({"stage": cli.command.stage(), "config_hash": hash, "seed": seed, "out_dir": p.out_dir()});
    match &cli.command {
        Command::Parse { documents } => out["artifact"] = json!(p.parse(documents)?),
        Command::Import { corpus } => out["artifact"] = json!(p.import(corpus)?),
        Command::Build => p.build()?,
        Command::Mine => out["artifact"] = json!(p.mine()?),
        Command::Mix => out["artifact"] = json!(p.mix()?),
        Command::Temporal => p.temporal()?,
        Command::Generate => out["artifacts"] = json!(p.generate()?),
        Command::Evaluate => out["reports"] = json!(p.evaluate()?.len()),
        Command::Run { documents } => out["reports"] = json!(p.run_all(documents)?.len()),
        Command::Toy { .. } => unreachable!(),
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json(cli.command.stage()));
            ExitCode::FAILURE
        }
    }
}
