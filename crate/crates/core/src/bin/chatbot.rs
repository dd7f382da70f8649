use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use moodbot::assets::AssetError;
use moodbot::config::PipelineConfig;
use moodbot::eval::{load_corpus, run_eval, EvalError};
use moodbot::lang::LanguageProfile;
use moodbot::mock_server::{mock_provider_router, MockProviderOptions};
use moodbot::pipeline::{Engine, EngineError, TurnInput, TurnResult};
use moodbot::skill::{parse_skill_unchecked, validate_skill, SkillError};
use moodbot::text::normalize_tokens;

const EXIT_INVALID: u8 = 1;
const EXIT_IO: u8 = 2;

#[derive(Parser)]
#[command(
    name = "chatbot",
    version,
    about = "Tone-aware exam stress support chatbot"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a skill file and print every violation.
    Validate {
        #[arg(long)]
        skill: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Talk to the bot in the terminal. `/quit` exits.
    Chat {
        #[command(flatten)]
        assets: AssetArgs,
        /// Language every message is declared in.
        #[arg(long)]
        lang: Option<String>,
        /// Print a diagnostics line after each reply.
        #[arg(long)]
        verbose: bool,
    },
    /// Score routing accuracy over a labelled corpus.
    Eval {
        #[command(flatten)]
        assets: AssetArgs,
        #[arg(long)]
        corpus: PathBuf,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        tone_threshold: Option<f64>,
    },
    /// Run the HTTP chat service.
    Serve {
        #[command(flatten)]
        assets: AssetArgs,
        #[arg(long)]
        bind: Option<String>,
    },
    /// Replay a persisted transcript and report any divergence.
    Replay {
        #[command(flatten)]
        assets: AssetArgs,
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Run a local mock of the translation and speech provider API.
    MockProvider {
        #[arg(long, default_value = "127.0.0.1:8090")]
        bind: String,
        #[arg(long, env = "CHATBOT_MOCK_TOKEN")]
        token: Option<String>,
    },
    /// Build a language profile from sample text.
    Profile {
        #[arg(long)]
        code: String,
        /// Whitespace-separated stopword list.
        #[arg(long)]
        stopwords: PathBuf,
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct AssetArgs {
    /// JSON config file; `CHATBOT_*` variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    skill: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    phrase_table: Option<PathBuf>,
    /// Synthesize every reply through the speech adapter.
    #[arg(long)]
    speak: bool,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(message: impl ToString) -> Self {
        Failure {
            code: EXIT_IO,
            message: message.to_string(),
        }
    }

    fn invalid(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.to_string(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let invalid = matches!(
            &e,
            EngineError::InvalidSkill(_)
                | EngineError::Config(_)
                | EngineError::UnsupportedLanguage(_)
                | EngineError::Assets(AssetError::Skill {
                    source: SkillError::Invalid(_),
                    ..
                })
        );
        if invalid {
            Failure::invalid(e)
        } else {
            Failure::io(e)
        }
    }
}

impl AssetArgs {
    fn config(&self) -> Result<PipelineConfig, Failure> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::from_file(path).map_err(Failure::io)?,
            None => PipelineConfig::default(),
        };
        config.apply_process_env().map_err(Failure::invalid)?;
        if self.skill.is_some() {
            config.skill = self.skill.clone();
        }
        if self.lexicon.is_some() {
            config.lexicon = self.lexicon.clone();
        }
        if self.phrase_table.is_some() {
            config.phrase_table = self.phrase_table.clone();
        }
        if self.speak {
            config.speak_replies = true;
        }
        Ok(config)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
}

fn validate(skill: &Path, json: bool) -> Result<(), Failure> {
    let document = read(skill)?;
    let report = match parse_skill_unchecked(&document) {
        Ok(skill) => validate_skill(&skill),
        Err(SkillError::Invalid(violations)) => moodbot::skill::ValidationReport { violations },
        Err(e) => return Err(Failure::io(format!("{}: {e}", skill.display()))),
    };
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("reports serialize")
        );
    } else if report.is_servable() {
        println!("{}: ok", skill.display());
    } else {
        println!(
            "{}: {} violation(s)",
            skill.display(),
            report.violations.len()
        );
        print!("{report}");
    }
    if report.is_servable() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_INVALID,
            message: String::new(),
        })
    }
}

fn summary_line(result: &TurnResult) -> String {
    let Some(d) = &result.diagnostics else {
        return String::new();
    };
    let intent = d.intents.first().map_or("-".to_string(), |i| {
        format!("#{} {:.2}", i.intent, i.confidence)
    });
    format!(
        "[lang {} ({:?}) | tone {} | intent {} | node {}]",
        d.input_language,
        d.language_source,
        if d.tone_primary.is_empty() {
            "-"
        } else {
            &d.tone_primary
        },
        intent,
        d.node_path.join(" > ")
    )
}

fn chat(args: &AssetArgs, lang: Option<String>, verbose: bool) -> Result<(), Failure> {
    let engine = Engine::from_config(args.config()?)?;
    let (id, greeting) = engine.create_session(lang.as_deref())?;
    let mut out = std::io::stdout().lock();
    let print = |out: &mut std::io::StdoutLock<'_>, r: &TurnResult| -> std::io::Result<()> {
        writeln!(out, "bot> {}", r.reply)?;
        if let Some(speech) = &r.speech {
            writeln!(out, "     (spoken: {})", speech.locator)?;
        }
        if verbose {
            writeln!(out, "     {}", summary_line(r))?;
        }
        out.flush()
    };
    print(&mut out, &greeting).map_err(Failure::io)?;
    for line in std::io::stdin().lock().lines() {
        let line = line.map_err(Failure::io)?;
        if line.trim() == "/quit" {
            break;
        }
        let input = TurnInput {
            text: Some(line),
            audio_ref: None,
            language: lang.clone(),
        };
        match engine.process_turn(&id, input) {
            Ok(result) => print(&mut out, &result).map_err(Failure::io)?,
            Err(e) => writeln!(out, "error: {e}").map_err(Failure::io)?,
        }
    }
    Ok(())
}

fn eval(
    args: &AssetArgs,
    corpus: &Path,
    report: Option<&Path>,
    tone_threshold: Option<f64>,
) -> Result<(), Failure> {
    let mut config = args.config()?;
    if let Some(t) = tone_threshold {
        config.tone_threshold = t;
    }
    let engine = Engine::from_config(config)?;
    let trials = load_corpus(&read(corpus)?).map_err(|e| match e {
        EvalError::Malformed { .. } | EvalError::EmptyCorpus => {
            Failure::io(format!("{}: {e}", corpus.display()))
        }
        EvalError::Engine(e) => Failure::from(e),
    })?;
    let result = run_eval(&trials, &engine).map_err(|e| match e {
        EvalError::Engine(e) => Failure::from(e),
        other => Failure::io(other),
    })?;
    print!("{result}");
    if let Some(path) = report {
        std::fs::write(path, result.to_json())
            .map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::io)
}

fn serve(args: &AssetArgs, bind: Option<String>) -> Result<(), Failure> {
    let mut config = args.config()?;
    if let Some(bind) = bind {
        config.bind = bind;
    }
    let bind = config.bind.clone();
    let engine = Arc::new(Engine::from_config(config)?);
    for report in engine.restore_sessions()? {
        if !report.is_identical() {
            tracing::warn!(session = %report.session_id, "restored session diverged from its transcript");
        }
    }
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind)
            .await
            .map_err(|e| Failure::io(format!("cannot bind {bind}: {e}")))?;
        tracing::info!(addr = %bind, "chat service listening");
        moodbot::service::serve(engine, listener)
            .await
            .map_err(Failure::io)
    })
}

fn replay(args: &AssetArgs, transcript: &Path) -> Result<(), Failure> {
    let mut config = args.config()?;
    config.transcript_dir = None;
    let engine = Engine::from_config(config)?;
    let report = engine.replay_transcript(transcript)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("reports serialize")
    );
    if report.is_identical() {
        Ok(())
    } else {
        Err(Failure::invalid(format!(
            "{} of {} turns diverged",
            report.mismatches.len(),
            report.turns
        )))
    }
}

fn mock_provider(bind: &str, token: Option<String>) -> Result<(), Failure> {
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| Failure::io(format!("cannot bind {bind}: {e}")))?;
        tracing::info!(addr = %bind, "mock provider listening");
        let app = mock_provider_router(MockProviderOptions {
            token,
            failing: false,
        });
        axum::serve(listener, app).await.map_err(Failure::io)
    })
}

fn profile(code: &str, stopwords: &Path, sample: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let words = normalize_tokens(&read(stopwords)?);
    let profile =
        LanguageProfile::from_sample(code, words, &read(sample)?).map_err(Failure::invalid)?;
    let mut json =
        serde_json::to_string_pretty(&profile.to_document()).expect("profiles serialize");
    json.push('\n');
    match out {
        Some(path) => {
            std::fs::write(path, json).map_err(|e| Failure::io(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate { skill, json } => validate(&skill, json),
        Command::Chat {
            assets,
            lang,
            verbose,
        } => chat(&assets, lang, verbose),
        Command::Eval {
            assets,
            corpus,
            report,
            tone_threshold,
        } => eval(&assets, &corpus, report.as_deref(), tone_threshold),
        Command::Serve { assets, bind } => serve(&assets, bind),
        Command::Replay { assets, transcript } => replay(&assets, &transcript),
        Command::MockProvider { bind, token } => mock_provider(&bind, token),
        Command::Profile {
            code,
            stopwords,
            sample,
            out,
        } => profile(&code, &stopwords, &sample, out.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
