use std::fs;
use std::io::{self, BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use dialog_engine::dialog::DialogTracker;
use dialog_engine::engine::{load_config, load_knowledge_graph, train as train_model};
use dialog_engine::evaluation::{evaluate_intents, render_report, run_conversation_tests, EvalError};
use dialog_engine::intent_miner::{
    default_stopwords, export_intent_draft, fit_lda, parse_stopwords, preprocess_corpus, sweep_k, AlphaRule,
    MinerError, PreprocessOptions, SweepSettings,
};
use dialog_engine::training_data::{
    load_model, package_model, parse_nlu_markdown, parse_stories_markdown, ArchiveError,
};
use dialog_engine::{Engine, EngineError, TrainingData};
use dialog_engine_server::{AppState, ServerError};
use thiserror::Error;

pub const ARCHIVE_NAME: &str = "model.tar.gz";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Archive {
        path: PathBuf,
        #[source]
        source: ArchiveError,
    },
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Miner(#[from] MinerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Server(#[from] ServerError),
    #[error("cannot start runtime: {0}")]
    Runtime(#[source] io::Error),
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Colors only on a terminal, and never when `NO_COLOR` is set.
struct Style {
    enabled: bool,
}

impl Style {
    fn stdout() -> Self {
        let no_color = std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty());
        Self {
            enabled: !no_color && io::stdout().is_terminal(),
        }
    }

    fn paint(&self, code: &str, text: &str) -> String {
        if self.enabled {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }
}

fn load_engine(model: &Path, kg: Option<&Path>) -> Result<Engine, CliError> {
    let (artifacts, fingerprint) = load_model(model).map_err(|source| CliError::Archive {
        path: model.to_path_buf(),
        source,
    })?;
    let kg = kg.map(load_knowledge_graph).transpose()?.map(Arc::new);
    Ok(Engine::new(artifacts, fingerprint, kg))
}

pub fn train(config: &Path, data: &Path, out: &Path, seed: u64) -> Result<ExitCode, CliError> {
    let config = load_config(config)?;
    let data = TrainingData::load_dir(data)?;
    let artifacts = train_model(&config, &data, seed)?;
    create_dir(out)?;
    let path = out.join(ARCHIVE_NAME);
    let fingerprint = package_model(&artifacts, &path).map_err(|source| CliError::Archive {
        path: path.clone(),
        source,
    })?;
    println!("archive: {}", path.display());
    println!("fingerprint: {fingerprint}");
    Ok(ExitCode::SUCCESS)
}

pub fn test(model: &Path, stories: &Path, kg: Option<&Path>) -> Result<ExitCode, CliError> {
    let engine = load_engine(model, kg)?;
    let tests = parse_stories_markdown(&read(stories)?).map_err(|e| CliError::Input {
        path: stories.to_path_buf(),
        message: e.to_string(),
    })?;
    let results = run_conversation_tests(&tests, &engine)?;
    let style = Style::stdout();
    let mut failed = 0;
    for r in &results {
        match &r.divergence {
            None => println!("{} {}", style.paint("32", "PASS"), r.name),
            Some(d) => {
                failed += 1;
                println!(
                    "{} {}: step {} action {}: expected {}, got {}",
                    style.paint("31", "FAIL"),
                    r.name,
                    d.step + 1,
                    d.position + 1,
                    d.expected.as_deref().unwrap_or("(nothing)"),
                    d.actual.as_deref().unwrap_or("(nothing)"),
                );
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

pub fn evaluate(
    model: &Path,
    nlu: Option<&Path>,
    stories: Option<&Path>,
    kg: Option<&Path>,
    out: &Path,
) -> Result<ExitCode, CliError> {
    let engine = load_engine(model, kg)?;
    create_dir(out)?;
    if let Some(nlu) = nlu {
        let doc = parse_nlu_markdown(&read(nlu)?).map_err(|e| CliError::Input {
            path: nlu.to_path_buf(),
            message: e.to_string(),
        })?;
        let report = evaluate_intents(&engine.artifacts.nlu, &doc.examples)?;
        let (json, text) = render_report(&report);
        write(&out.join("report.json"), &json)?;
        write(&out.join("report.txt"), &text)?;
        let macro_f1 = report.macro_avg.f1;
        println!(
            "intents: {} examples, accuracy {:.4}, macro F1 {:.4}",
            report.examples, report.accuracy, macro_f1
        );
    }
    if let Some(stories) = stories {
        let tests = parse_stories_markdown(&read(stories)?).map_err(|e| CliError::Input {
            path: stories.to_path_buf(),
            message: e.to_string(),
        })?;
        let results = run_conversation_tests(&tests, &engine)?;
        let json = serde_json::to_string_pretty(&results).expect("results serialize");
        write(&out.join("conversations.json"), &(json + "\n"))?;
        let passed = results.iter().filter(|r| r.passed).count();
        println!("conversations: {passed}/{} passed", results.len());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn shell(model: &Path, kg: Option<&Path>, sender: &str) -> Result<ExitCode, CliError> {
    let engine = load_engine(model, kg)?;
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let style = Style::stdout();
    let mut out = io::stdout().lock();
    let mut tracker = DialogTracker::new(sender);
    let io_err = |source| CliError::Io {
        path: PathBuf::from("<stdio>"),
        source,
    };
    if interactive {
        writeln!(out, "Type a message, or /quit to exit.").map_err(io_err)?;
    }
    let mut lines = stdin.lock().lines();
    loop {
        if interactive {
            write!(out, "you> ").map_err(io_err)?;
            out.flush().map_err(io_err)?;
        }
        let Some(line) = lines.next() else { break };
        let line = line.map_err(io_err)?;
        let message = line.trim();
        if message.is_empty() {
            continue;
        }
        if message == "/quit" {
            break;
        }
        let outcome = engine.handle_message(&mut tracker, message)?;
        for reply in &outcome.replies {
            writeln!(out, "bot> {}", reply.text).map_err(io_err)?;
            let debug = format!(
                "     intent={} confidence={:.4} policy={}",
                outcome.parse.intent(),
                outcome.parse.confidence(),
                reply.source.as_str(),
            );
            writeln!(out, "{}", style.paint("2", &debug)).map_err(io_err)?;
        }
        out.flush().map_err(io_err)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub struct MineOptions {
    pub input: PathBuf,
    pub ks: Vec<usize>,
    pub label_k: Option<usize>,
    pub out: PathBuf,
    pub report: Option<PathBuf>,
    pub iterations: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub stopwords: Option<PathBuf>,
    pub seed: u64,
}

pub fn mine_intents(opts: &MineOptions) -> Result<ExitCode, CliError> {
    let questions: Vec<String> = read(&opts.input)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let stopwords = match &opts.stopwords {
        Some(p) => parse_stopwords(&read(p)?),
        None => default_stopwords(),
    };
    let corpus = preprocess_corpus(&questions, &stopwords, &PreprocessOptions::default())?;
    let settings = SweepSettings {
        alpha: opts.alpha.map_or_else(AlphaRule::default, AlphaRule::Fixed),
        beta: opts.beta,
        iterations: opts.iterations,
        seed: opts.seed,
        ..SweepSettings::default()
    };
    let report = sweep_k(&corpus, &opts.ks, &settings)?;
    println!(
        "{} documents, {} distinct terms",
        corpus.docs.len(),
        corpus.vocabulary_size()
    );
    for e in &report.entries {
        println!(
            "K={:<3} alpha={:.4} mean JS distance {:.4}",
            e.k, e.alpha, e.mean_distance
        );
    }
    if let Some(path) = &opts.report {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write(path, &(json + "\n"))?;
    }
    let label_k = opts
        .label_k
        .unwrap_or_else(|| *opts.ks.iter().min().expect("clap requires at least one K"));
    let model = fit_lda(&corpus, &settings.params_for(label_k))?;
    write(&opts.out, &export_intent_draft(&model, &corpus, "topic")?)?;
    println!("draft for K={label_k}: {}", opts.out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn serve(
    port: u16,
    model: Option<&Path>,
    kg: Option<&Path>,
    snapshot: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let engine = model.map(|m| load_engine(m, kg)).transpose()?;
    let graph = match (&engine, kg) {
        (None, Some(kg)) => Some(Arc::new(load_knowledge_graph(kg)?)),
        _ => None,
    };
    let state = Arc::new(AppState::new(engine, graph));
    if let Some(path) = snapshot.as_deref().filter(|p| p.is_file()) {
        let n = state.read_snapshot(path)?;
        eprintln!("restored {n} conversations from {}", path.display());
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::Runtime)?;
    runtime.block_on(async move {
        let listener = dialog_engine_server::bind(port).await?;
        eprintln!("listening on port {port}");
        dialog_engine_server::serve(listener, state, snapshot, dialog_engine_server::shutdown_signal()).await
    })?;
    Ok(ExitCode::SUCCESS)
}
