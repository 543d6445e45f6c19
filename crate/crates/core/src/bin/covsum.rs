use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use covsum::coverage::Method;
use covsum::harness::{self, parse_split, ExperimentConfig};
use covsum::represent::{Representation, TrainScope};
use covsum::selftest;

#[derive(Parser)]
#[command(
    name = "covsum",
    version,
    about = "Coverage-aware extractive summarization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Train the paragraph-embedding models the representations need.
    Train,
    /// Summarize every document under the method x representation grid.
    Summarize,
    /// Score summaries with ROUGE and write the comparison table.
    Evaluate,
    /// Run the built-in acceptance suite on the bundled corpus.
    Selftest,
}

#[derive(Args)]
struct Overrides {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// JSONL corpus (default: the bundled synthetic corpus).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated methods, e.g. `MMR,JXDTD`.
    #[arg(long, global = true, value_delimiter = ',')]
    method: Vec<Method>,
    /// Comma-separated representations, e.g. `BOW,BOW+DM`.
    #[arg(long = "repr", global = true, value_delimiter = ',')]
    representation: Vec<Representation>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    ratio: Option<f64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Half-open document range `lo:hi`.
    #[arg(long, global = true, value_parser = parse_split)]
    split: Option<(usize, usize)>,
    /// Train embeddings over the whole corpus or per document.
    #[arg(long, global = true)]
    scope: Option<TrainScope>,
}

impl Overrides {
    fn config(self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if self.corpus.is_some() {
            cfg.corpus = self.corpus;
        }
        if !self.method.is_empty() {
            cfg.methods = self.method;
        }
        if !self.representation.is_empty() {
            cfg.representations = self.representation;
        }
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.alpha = self.alpha.unwrap_or(cfg.alpha);
        cfg.ratio = self.ratio.unwrap_or(cfg.ratio);
        cfg.out = self.out.unwrap_or(cfg.out);
        cfg.split = self.split.or(cfg.split);
        cfg.scope = self.scope.unwrap_or(cfg.scope);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let cfg = cli.opts.config()?;
    match cli.command {
        Command::Train => {
            for path in harness::cmd_train(&cfg).context("training failed")? {
                println!("{}", path.display());
            }
        }
        Command::Summarize => {
            let records = harness::cmd_summarize(&cfg).context("summarization failed")?;
            println!(
                "{} summaries written to {}",
                records.len(),
                harness::summaries_path(&cfg).display()
            );
        }
        Command::Evaluate => {
            let eval = harness::cmd_evaluate(&cfg).context("evaluation failed")?;
            print!("{}", eval.to_tsv());
        }
        Command::Selftest => {
            let report = selftest::run(cfg.seed, cfg.corpus.clone())?;
            print!("{}", report.render());
            return Ok(report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
