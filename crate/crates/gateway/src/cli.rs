//! Command-line front end.

use std::io::{BufRead, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use intent_gate_core::canonical;
use intent_gate_core::corpus::{
    evaluate, generate_corpus, read_examples, seed_examples, AugmentationConfig, Augmenter, CorpusError,
};
use intent_gate_core::extraction::chat::RecordingTransport;
use intent_gate_core::extraction::{ExtractorBackend, Lexicon, LlmBackend, LlmOptions, PromptSpec, RetryPolicy};
use intent_gate_core::time::IsoDuration;
use thiserror::Error;

use crate::config::{BackendKind, ConfigError, GatewayConfig};
use crate::error::GatewayError;
use crate::service::{build_backend, Gateway};
use crate::transport::HttpTransport;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "intent-gate", version, about = "Natural-language intents in, 5G core actions out")]
pub struct Cli {
    /// JSON configuration file; INTENT_GATE_* variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP gateway.
    Serve {
        /// Overrides the configured listen address.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Interactive session on standard input.
    Chat,
    /// Send one request, or one per line of a file, through a fresh session.
    Submit(SubmitArgs),
    /// Score a backend against a labelled dataset.
    Eval(EvalArgs),
    /// Labelled corpus tools.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Replay fixture tools.
    Fixtures {
        #[command(subcommand)]
        command: FixturesCommand,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SubmitSource {
    #[arg(long)]
    pub text: Option<String>,
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubmitArgs {
    #[command(flatten)]
    pub source: SubmitSource,
    /// Print each RequestOutcome as JSON instead of the reply text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSONL dataset, with or without a corpus header line.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Overrides the configured backend.
    #[arg(long)]
    pub backend: Option<BackendKind>,
    /// Exit with status 1 when macro-F1 falls below this.
    #[arg(long)]
    pub min_f1: Option<f64>,
    /// Also write the full report as JSON.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// List every misclassified example.
    #[arg(long)]
    pub failures: bool,
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Expand the seed set by augmentation into a JSONL corpus.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        rounds: u32,
        /// Augmentation settings; the bundled ones when omitted.
        #[arg(long)]
        augmentation: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum FixturesCommand {
    /// Classify each input line with the live model and save the exchanges.
    Record {
        /// One request per line, or a JSONL dataset.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    std::fs::write(path, contents).map_err(io_err(path))
}

/// Request texts from a plain file or a labelled dataset.
fn request_lines(content: &str) -> Vec<String> {
    match read_examples(content) {
        Ok(examples) if !examples.is_empty() => examples.into_iter().map(|e| e.text).collect(),
        _ => content.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect(),
    }
}

pub fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let load = || GatewayConfig::load(cli.config.as_deref());
    match cli.command {
        Command::Serve { listen } => {
            let mut config = load()?;
            if let Some(l) = listen {
                config.listen = l;
            }
            serve(config)
        }
        Command::Chat => chat(load()?),
        Command::Submit(args) => submit(load()?, args),
        Command::Eval(args) => {
            let mut config = match (&cli.config, args.backend) {
                // rule evaluation needs no configuration at all
                (None, Some(BackendKind::Rule)) => GatewayConfig::default(),
                _ => load()?,
            };
            if let Some(b) = args.backend {
                config.backend = b;
                config.validate()?;
            }
            eval(&config, &args)
        }
        Command::Corpus { command: CorpusCommand::Gen { seed, out, rounds, augmentation } } => {
            let augmenter = match augmentation {
                Some(path) => {
                    let config = AugmentationConfig::from_json(&read(&path)?)?;
                    Augmenter::new(config, Lexicon::bundled())?
                }
                None => Augmenter::bundled(),
            };
            let corpus = generate_corpus(&augmenter, &seed_examples(), seed, rounds);
            write(&out, &corpus.to_jsonl())?;
            eprintln!("wrote {} examples ({}) to {}", corpus.examples.len(), corpus.header.corpus_version, out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Fixtures { command: FixturesCommand::Record { input, out } } => {
            let mut config = load()?;
            config.backend = BackendKind::Llm;
            config.validate()?;
            record_fixtures(&config, &input, &out)
        }
    }
}

fn serve(config: GatewayConfig) -> Result<ExitCode, CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async move {
        let listen = config.listen.clone();
        let gw = Arc::new(Gateway::new(config)?);
        let listener = tokio::net::TcpListener::bind(&listen)
            .await
            .map_err(|source| CliError::Io { path: PathBuf::from(&listen), source })?;
        tracing::info!("listening on {listen} with the {} backend", gw.backend_name());
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        crate::http::serve(gw, listener, shutdown)
            .await
            .map_err(|source| CliError::Io { path: PathBuf::from(&listen), source })?;
        Ok(ExitCode::SUCCESS)
    })
}

fn chat(config: GatewayConfig) -> Result<ExitCode, CliError> {
    let gw = Gateway::new(config)?;
    let session = gw.create_session()?;
    println!("session {session} ({} backend). `:tick PT10M` advances time, `:quit` leaves.", gw.backend_name());
    let stdin = std::io::stdin();
    let mut out = std::io::stdout();
    loop {
        print!("> ");
        let _ = out.flush();
        let mut line = String::new();
        if stdin.lock().read_line(&mut line).map_err(io_err(Path::new("<stdin>")))? == 0 {
            break;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == ":quit" {
            break;
        }
        if let Some(d) = line.strip_prefix(":tick") {
            let step = d.trim().parse::<IsoDuration>().unwrap_or(IsoDuration::from_secs(1));
            for e in gw.tick(step)? {
                println!("[{}] {}", e.event, canonical::to_string(&e.data).unwrap_or_default());
            }
            continue;
        }
        match gw.handle_request_blocking(session, line.to_string()) {
            Ok(outcome) => println!("{}", outcome.reply),
            Err(e) => println!("error: {e}"),
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn submit(config: GatewayConfig, args: SubmitArgs) -> Result<ExitCode, CliError> {
    let texts = match (args.source.text, args.source.file) {
        (Some(t), _) => vec![t],
        (None, Some(f)) => request_lines(&read(&f)?),
        (None, None) => return Err(CliError::Usage("give --text or --file".into())),
    };
    let gw = Gateway::new(config)?;
    let session = gw.create_session()?;
    for text in texts {
        let outcome = gw.handle_request_blocking(session, text)?;
        if args.json {
            println!("{}", canonical::to_string_pretty(&outcome).expect("outcomes serialize"));
        } else {
            println!("{}\n", outcome.reply);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn eval(config: &GatewayConfig, args: &EvalArgs) -> Result<ExitCode, CliError> {
    let dataset = read_examples(&read(&args.dataset)?)?;
    let backend = build_backend(config)?;
    let report = evaluate(backend.as_ref(), &dataset)?;
    print!("{}", report.render_text());
    if args.failures {
        for f in &report.failures {
            println!("  {}: {:?}", f.id, f.text);
        }
    }
    if let Some(path) = &args.json_out {
        write(path, &canonical::to_string_pretty(&report).expect("reports serialize"))?;
    }
    match args.min_f1 {
        Some(floor) if report.macro_f1 < floor => {
            eprintln!("macro-F1 {:.4} is below the floor {floor:.4}", report.macro_f1);
            Ok(ExitCode::from(1))
        }
        _ => Ok(ExitCode::SUCCESS),
    }
}

fn record_fixtures(config: &GatewayConfig, input: &Path, out: &Path) -> Result<ExitCode, CliError> {
    let transport = HttpTransport::from_config(config).map_err(|e| CliError::Usage(e.to_string()))?;
    let recording = RecordingTransport::new(transport, out);
    let spec = match &config.prompt_spec_path {
        Some(p) => PromptSpec::load(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => PromptSpec::bundled(),
    };
    let options = LlmOptions {
        model: config.llm_model.clone(),
        temperature: config.llm_temperature,
        retry: RetryPolicy { max_retries: config.llm_retries, ..RetryPolicy::default() },
        ..LlmOptions::default()
    };
    let backend = LlmBackend::new("llm", Arc::new(recording), spec, options);
    let mut failed = 0;
    for text in request_lines(&read(input)?) {
        match backend.classify(&text) {
            Ok(outcome) => println!("{:?} <- {text}", outcome.types()),
            Err(e) => {
                failed += 1;
                eprintln!("failed: {text}: {e}");
            }
        }
    }
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
