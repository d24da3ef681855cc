use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use raicl::config::{artifacts, PipelineConfig};
use raicl::fsio;
use raicl::pipeline::{self, exit_code, EXIT_IDENTITY_FAILURE};
use raicl::{Error, Result};

#[derive(Parser)]
#[command(
    name = "raicl",
    version,
    about = "Retrieval-augmented in-context learning for driving explanations"
)]
struct Cli {
    /// Pipeline config (TOML); built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine caption-similarity triplets.
    Mine,
    /// Train the hybrid projector on the mined triplets.
    Train,
    /// Embed every record into the retrieval index.
    Index,
    /// Print the top-k neighbors of a stored record.
    Retrieve {
        /// Query record id.
        id: String,
        #[arg(long)]
        k: Option<usize>,
        /// Also write the ranking here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the prompt for a stored record.
    Assemble {
        id: String,
        /// Write the prompt here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a JSON-lines answers file against the store.
    Evaluate { answers: PathBuf },
    /// Check the linear-attention identity and sweep softmax drift.
    IclVerify,
    /// Run everything end to end with leave-one-out queries.
    Pipeline,
}

fn load_config(path: Option<&PathBuf>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).map_err(|e| match e {
            Error::Io { .. } => Error::Config(format!("cannot read config: {e}")),
            other => other,
        }),
        None => {
            let cfg = PipelineConfig::default();
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => fsio::write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = load_config(cli.config.as_ref())?;
    match &cli.command {
        Command::Mine => {
            let b = pipeline::cmd_mine(&cfg)?;
            eprintln!(
                "{} triplets ({} anchors skipped) -> {}",
                b.len(),
                b.skipped_anchors,
                cfg.artifact(artifacts::TRIPLETS).display()
            );
        }
        Command::Train => {
            let o = pipeline::cmd_train(&cfg)?;
            if let Some(l) = o.loss_history.last() {
                eprintln!("final loss {l:.6}");
            }
            eprintln!(
                "checkpoint -> {}",
                cfg.artifact(artifacts::CHECKPOINT).display()
            );
        }
        Command::Index => {
            let idx = pipeline::cmd_index(&cfg)?;
            eprintln!(
                "{} rows ({}) -> {}",
                idx.len(),
                idx.mode,
                cfg.artifact(artifacts::INDEX).display()
            );
        }
        Command::Retrieve { id, k, out } => {
            let r = pipeline::cmd_retrieve(&cfg, id, *k)?;
            print!("{}", r.render());
            if let Some(p) = out {
                fsio::write_atomic(p, r.render().as_bytes())?;
            }
        }
        Command::Assemble { id, out } => {
            let bundle = pipeline::cmd_assemble(&cfg, id)?;
            emit(&bundle.render(), out.as_ref())?;
        }
        Command::Evaluate { answers } => {
            let report = pipeline::cmd_evaluate(&cfg, answers)?;
            print!("{}", report.render_table());
        }
        Command::IclVerify => {
            let o = pipeline::cmd_icl_verify(&cfg)?;
            print!("{}", o.identity.render());
            if !o.identity.passed() {
                return Ok(EXIT_IDENTITY_FAILURE);
            }
        }
        Command::Pipeline => {
            let o = pipeline::run_pipeline(&cfg)?;
            print!("{}", pipeline::render_summary(&o));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
