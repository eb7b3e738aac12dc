use std::io::{self, BufReader};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use navinstr::config::PipelineConfig;
use navinstr::metrics::BleuSmoothing;
use navinstr::pipeline::{cmd_evaluate, cmd_generate, cmd_stats, cmd_validate};
use navinstr::provider::protocol::serve;
use navinstr::provider::{FixtureDetector, FixtureEmbedder, MockProvider};
use navinstr::speaker::ToyLm;
use navinstr::templating::build_template_library;
use navinstr::Error;

#[derive(Parser)]
#[command(name = "navinstr", version, about = "Generate and evaluate navigation instruction datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Smoothing {
    None,
    AddOne,
}

#[derive(Subcommand)]
enum Command {
    /// Sample trajectories and write an annotated instruction dataset.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured worker count.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the configured output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Start over even if a matching partial run exists.
        #[arg(long)]
        no_resume: bool,
    },
    /// Score a hypothesis/reference file or a navigation episode file.
    Evaluate {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        bleu_smoothing: Smoothing,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count trajectories, instructions, sub-pairs and entity pairs.
    Stats { dataset: PathBuf },
    /// Check every record invariant; exits 1 on any violation.
    Validate {
        dataset: PathBuf,
        /// Connectivity graphs for hop adjacency checks.
        #[arg(long = "graph")]
        graphs: Vec<PathBuf>,
    },
    /// Print the template library as JSON.
    Templates,
    /// Serve fixture providers over stdin/stdout using the NDJSON protocol.
    Provider {
        #[arg(long)]
        detector: Option<PathBuf>,
        #[arg(long)]
        embedder: Option<PathBuf>,
        #[arg(long)]
        lm: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Generate { config, seed, workers, out, no_resume } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            cfg.validate()?;
            let report = cmd_generate(cfg, !no_resume)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Evaluate { input, bleu_smoothing, out } => {
            let smoothing = match bleu_smoothing {
                Smoothing::None => BleuSmoothing::None,
                Smoothing::AddOne => BleuSmoothing::AddOne,
            };
            let report = cmd_evaluate(&input, smoothing)?;
            let json = serde_json::to_string(&report).expect("report serializes");
            if let Some(path) = out {
                std::fs::write(&path, format!("{json}\n")).map_err(|e| Error::Io { path, source: e })?;
            }
            println!("{json}");
            print!("{}", report.table());
        }
        Command::Stats { dataset } => {
            let s = cmd_stats(&dataset)?;
            println!("{}", serde_json::to_string(&s).expect("stats serialize"));
            println!("{:<14} {:>8}", "trajectories", s.trajectories);
            println!("{:<14} {:>8}", "instructions", s.instructions);
            println!("{:<14} {:>8}", "sub-pairs", s.sub_pairs);
            println!("{:<14} {:>8}", "entity pairs", s.entity_pairs);
        }
        Command::Validate { dataset, graphs } => {
            let report = cmd_validate(&dataset, &graphs)?;
            for v in &report.violations {
                println!("{}: {}: {}", v.instr_id, v.field, v.message);
            }
            if !report.passed() {
                eprintln!("{} violation(s) in {} record(s)", report.violations.len(), report.records);
                return Ok(ExitCode::from(1));
            }
            println!("ok: {} record(s)", report.records);
        }
        Command::Templates => {
            println!("{}", build_template_library().to_json());
        }
        Command::Provider { detector, embedder, lm } => {
            let mut mock = MockProvider::default();
            if let Some(p) = detector {
                mock.detector = Some(Box::new(FixtureDetector::load(p)?));
            }
            if let Some(p) = embedder {
                mock.embedder = Some(Box::new(FixtureEmbedder::load(p)?));
            }
            if let Some(p) = lm {
                mock.lm = Some(Box::new(ToyLm::load(p)?));
            }
            let stdin = io::stdin();
            serve(BufReader::new(stdin.lock()), io::stdout().lock(), &mock)
                .map_err(|e| Error::Io { path: "<stdio>".into(), source: e })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_environmental() { 2 } else { 1 })
        }
    }
}
