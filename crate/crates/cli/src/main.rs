use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "dialog-engine",
    version,
    about = "Train, test and run a Roman Urdu dialog engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train NLU and dialogue policies and write a model archive.
    Train(TrainArgs),
    /// Replay conversation tests; exits 1 if any diverges.
    Test(TestArgs),
    /// Write intent and conversation reports for a model.
    Evaluate(EvaluateArgs),
    /// Chat with a model on stdin/stdout.
    Shell(ShellArgs),
    /// Cluster unlabeled questions into draft intents.
    MineIntents(MineArgs),
    /// Serve the HTTP endpoints.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(short, long, value_parser = existing_file)]
    config: PathBuf,
    /// Directory with nlu.md, stories.md and responses.json.
    #[arg(short, long, value_parser = existing_dir)]
    data: PathBuf,
    /// Output directory; the archive is written as model.tar.gz inside it.
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long, value_parser = existing_file)]
    model: PathBuf,
    #[arg(long, value_parser = existing_file)]
    stories: PathBuf,
    #[arg(long, value_parser = existing_file)]
    kg: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("inputs").required(true).multiple(true).args(["nlu", "stories"])))]
struct EvaluateArgs {
    #[arg(long, value_parser = existing_file)]
    model: PathBuf,
    /// Labeled nlu.md test set.
    #[arg(long, value_parser = existing_file)]
    nlu: Option<PathBuf>,
    /// Conversation tests.
    #[arg(long, value_parser = existing_file)]
    stories: Option<PathBuf>,
    #[arg(long, value_parser = existing_file)]
    kg: Option<PathBuf>,
    /// Directory for report.json, report.txt and conversations.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ShellArgs {
    #[arg(long, value_parser = existing_file)]
    model: PathBuf,
    #[arg(long, value_parser = existing_file)]
    kg: Option<PathBuf>,
    /// Conversation id for the session.
    #[arg(long, default_value = "shell")]
    sender: String,
}

#[derive(Debug, Args)]
struct MineArgs {
    /// One question per line.
    #[arg(long, value_parser = existing_file)]
    input: PathBuf,
    /// Topic counts to sweep, comma separated.
    #[arg(long, value_delimiter = ',', required = true, value_parser = topic_count)]
    k: Vec<usize>,
    /// K used for the draft; defaults to the smallest swept K.
    #[arg(long, value_parser = topic_count)]
    label_k: Option<usize>,
    /// Draft nlu.md output.
    #[arg(long)]
    out: PathBuf,
    /// Sweep report output (structured text).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    /// Fixed Dirichlet alpha; by default alpha = 50 / K.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    beta: f64,
    /// Stopword file, one word per line; replaces the built-in list.
    #[arg(long, value_parser = existing_file)]
    stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = dialog_engine_server::PORT_ENV, default_value_t = dialog_engine_server::DEFAULT_PORT)]
    port: u16,
    #[arg(long, value_parser = existing_file)]
    model: Option<PathBuf>,
    #[arg(long, value_parser = existing_file)]
    kg: Option<PathBuf>,
    /// Tracker snapshot: restored at startup if present, written on shutdown.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("no such file: {s}"))
    }
}

fn existing_dir(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_dir() {
        Ok(p)
    } else {
        Err(format!("no such directory: {s}"))
    }
}

fn topic_count(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(k) if k >= 2 => Ok(k),
        Ok(k) => Err(format!("K must be at least 2, got {k}")),
        Err(e) => Err(e.to_string()),
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Train(a) => commands::train(&a.config, &a.data, &a.out, a.seed),
        Command::Test(a) => commands::test(&a.model, &a.stories, a.kg.as_deref()),
        Command::Evaluate(a) => commands::evaluate(
            &a.model,
            a.nlu.as_deref(),
            a.stories.as_deref(),
            a.kg.as_deref(),
            &a.out,
        ),
        Command::Shell(a) => commands::shell(&a.model, a.kg.as_deref(), &a.sender),
        Command::MineIntents(a) => commands::mine_intents(&commands::MineOptions {
            input: a.input,
            ks: a.k,
            label_k: a.label_k,
            out: a.out,
            report: a.report,
            iterations: a.iterations,
            alpha: a.alpha,
            beta: a.beta,
            stopwords: a.stopwords,
            seed: a.seed,
        }),
        Command::Serve(a) => commands::serve(a.port, a.model.as_deref(), a.kg.as_deref(), a.snapshot),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
