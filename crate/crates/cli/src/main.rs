mod args;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use analogist_core::config::{Config, ConfigError, Engine, ProviderMode};
use analogist_core::designspace::{corpus_stats, load_corpus, CorpusError};
use analogist_core::pipeline::{render_multiplier, write_materials, PipelineError, StageError, Stage1Report, Stage1Request};
use analogist_core::scoring::WeightConfig;
use analogist_core::session::{Session, SessionError};
use args::{AnalogizeArgs, Cli, Command, CorpusAction, DesignArgs, EngineArgs, MaterialsArgs, ProviderArg};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PROVIDER: u8 = 3;

/// A failure paired with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl Failure {
    fn data(message: impl fmt::Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.to_string(),
        }
    }
}

fn upstream(e: &PipelineError) -> bool {
    matches!(
        e,
        PipelineError::Provider(_) | PipelineError::Generation(_) | PipelineError::Design(_) | PipelineError::Materials(_)
    )
}

impl From<StageError> for Failure {
    fn from(e: StageError) -> Self {
        let code = if upstream(&e.source) { EXIT_PROVIDER } else { EXIT_DATA };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = if matches!(e, ConfigError::Provider(_)) { EXIT_PROVIDER } else { EXIT_DATA };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        Failure::data(e)
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Failure::data(e)
    }
}

fn engine(args: &EngineArgs) -> Result<Engine, Failure> {
    let mut config = Config::from_env_and_file(args.config.as_deref())?;
    match args.provider {
        Some(ProviderArg::Mock) => config.provider = ProviderMode::Mock,
        Some(ProviderArg::Remote) => config.provider = ProviderMode::Remote,
        None => {}
    }
    if let Some(script) = &args.script {
        config.mock_script = Some(script.clone());
    }
    Ok(Engine::from_config(&config)?)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn print_report(report: &Stage1Report) {
    println!("{}", report.statement.raw);
    for (rank, a) in report.analogies.iter().enumerate() {
        let c = &a.candidate.candidate;
        println!(
            "{:>2}. [{}] {} {:<13} {} ×{}  score {:.3}",
            rank + 1,
            if a.perceptibility.passed() { "pass" } else { "fail" },
            c.id,
            c.strategy.as_str(),
            c.object,
            render_multiplier(a.multiplier).rendered,
            a.composite
        );
        println!("    {}", a.candidate.sentence.polished);
    }
}

fn analogize(args: AnalogizeArgs) -> Result<(), Failure> {
    let engine = engine(&args.engine)?;
    let mut weights = WeightConfig::default();
    if let Some(f) = args.weights {
        weights.factors = f;
    }
    let request = Stage1Request {
        statement: args.statement,
        kind: args.kind.into(),
        strategy: args.strategy.map(Into::into),
        weights,
        theme_hint: args.theme,
    };
    let report = engine.stage1(&request)?;
    for w in report.warnings.iter() {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.session_file {
        let mut session = Session::new(request);
        session.set_generated(report.clone());
        session.save(path)?;
    }
    if args.json {
        print!("{}", report.to_json());
    } else {
        print_report(&report);
    }
    Ok(())
}

fn design(args: DesignArgs) -> Result<(), Failure> {
    let mut session = Session::load(&args.session_file)?;
    if let Some(id) = &args.choose {
        session.choose(id, args.sentence.clone())?;
    }
    let sentence = session.chosen_sentence()?.to_string();
    let engine = engine(&args.engine)?;
    let scheme = engine.design(&sentence)?;
    session.set_scheme(scheme.clone())?;
    session.save(&args.session_file)?;
    if args.json {
        print_json(&scheme);
    } else {
        println!("theme: {}", scheme.theme);
        println!("prefix: {}", scheme.visual_prefix());
        println!("objects: {}", scheme.objects.join(", "));
        println!("background: {}", scheme.background.join(", "));
    }
    Ok(())
}

fn materials_dir(session_file: &Path, id: &str) -> PathBuf {
    session_file.parent().unwrap_or(Path::new(".")).join(id)
}

fn materials(args: MaterialsArgs) -> Result<(), Failure> {
    let mut session = Session::load(&args.session_file)?;
    let scheme = session.scheme()?.clone();
    let engine = engine(&args.engine)?;
    let set = engine.materials(&scheme, &args.select)?;
    let dir = args.out.clone().unwrap_or_else(|| materials_dir(&args.session_file, &session.id));
    write_materials(&dir, &set).map_err(|e| e.at("stage2.materials"))?;
    session.set_materials(&set)?;
    session.save(&args.session_file)?;
    if args.json {
        print_json(&session.materials);
    } else {
        for item in &set.items {
            match &item.error {
                Some(e) => println!("{}: failed ({e})", item.keyword),
                None => {
                    for image in &item.images {
                        println!("{}: {}", item.keyword, dir.join(&image.file).display());
                    }
                }
            }
        }
    }
    Ok(())
}

fn corpus(action: CorpusAction) -> Result<(), Failure> {
    match action {
        CorpusAction::Validate { path } => {
            let cases = load_corpus(&path)?;
            println!("{}: {} valid case(s)", path.display(), cases.len());
        }
        CorpusAction::Stats { path, json } => {
            let stats = corpus_stats(&load_corpus(&path)?)?;
            if json {
                print_json(&stats);
            } else {
                print!("{stats}");
            }
        }
    }
    Ok(())
}

fn serve(config: Option<PathBuf>, listen: Option<String>) -> Result<(), Failure> {
    let mut config = Config::from_env_and_file(config.as_deref())?;
    if let Some(l) = listen {
        config.listen = l;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::data)?;
    runtime.block_on(analogist_server::serve(&config)).map_err(|e| match e {
        analogist_server::ServerError::Config(c) => Failure::from(c),
        other => Failure::data(other),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let filter = EnvFilter::try_from_env("ANALOGIST_LOG").unwrap_or_else(|_| EnvFilter::new(&cli.log));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    let result = match cli.command {
        Command::Analogize(a) => analogize(a),
        Command::Design(a) => design(a),
        Command::Materials(a) => materials(a),
        Command::Corpus { action } => corpus(action),
        Command::Serve { config, listen } => serve(config, listen),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
