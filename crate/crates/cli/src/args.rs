use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use analogist_core::designspace::AnalogyStrategy;
use analogist_core::pipeline::StatementKind;
use analogist_core::scoring::FactorWeights;

#[derive(Debug, Parser)]
#[command(name = "analogist", version, about = "Generate data analogies for numeric statements")]
pub struct Cli {
    /// Log level for stderr diagnostics (error, warn, info, debug).
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run stage 1 on one statement and print ranked analogies.
    Analogize(AnalogizeArgs),
    /// Choose a candidate in a session file and design its illustration.
    Design(DesignArgs),
    /// Generate illustration materials for selected keywords of a designed session.
    Materials(MaterialsArgs),
    /// Inspect a labeled analogy corpus.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Run the HTTP session service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the listen address from the config.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderArg {
    Mock,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Comparison,
    Unitization,
    Accumulation,
    Proportion,
}

impl From<StrategyArg> for AnalogyStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Comparison => AnalogyStrategy::Comparison,
            StrategyArg::Unitization => AnalogyStrategy::Unitization,
            StrategyArg::Accumulation => AnalogyStrategy::Accumulation,
            StrategyArg::Proportion => AnalogyStrategy::Proportion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Simple,
    Proportion,
}

impl From<KindArg> for StatementKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Simple => StatementKind::Simple,
            KindArg::Proportion => StatementKind::Proportion,
        }
    }
}

/// Engine selection shared by every command that calls a provider.
#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    /// TOML config with lexicon, corpus and provider settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the provider mode from the config.
    #[arg(long, value_enum)]
    pub provider: Option<ProviderArg>,
    /// Mock reply script; required with `--provider mock`.
    #[arg(long, required_if_eq("provider", "mock"))]
    pub script: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalogizeArgs {
    pub statement: String,
    #[arg(long, value_enum, default_value = "simple")]
    pub kind: KindArg,
    /// Restrict generation to one strategy; omitted means unclassified.
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Factor weights as `similarity,familiarity,concreteness`.
    #[arg(long, value_parser = parse_weights)]
    pub weights: Option<FactorWeights>,
    #[arg(long, default_value = "")]
    pub theme: String,
    /// Emit the full stage-1 report as JSON.
    #[arg(long)]
    pub json: bool,
    /// Also write a session document usable by `design` and `serve`.
    #[arg(long)]
    pub session_file: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub session_file: PathBuf,
    /// Candidate to choose first; required unless the session already has a choice.
    #[arg(long)]
    pub choose: Option<String>,
    /// Replacement sentence for the chosen candidate.
    #[arg(long, requires = "choose")]
    pub sentence: Option<String>,
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct MaterialsArgs {
    #[arg(long)]
    pub session_file: PathBuf,
    /// Comma-separated object or background keywords.
    #[arg(long, value_delimiter = ',', required = true)]
    pub select: Vec<String>,
    /// Output directory; defaults to `<session dir>/<session id>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Subcommand)]
pub enum CorpusAction {
    /// Check a corpus document against its schema.
    Validate { path: PathBuf },
    /// Print category distributions.
    Stats {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn parse_weights(s: &str) -> Result<FactorWeights, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected three comma-separated weights, got `{s}`"));
    };
    let num = |t: &str| {
        let v: f64 = t.parse().map_err(|_| format!("`{t}` is not a number"))?;
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(format!("weight `{t}` must be a non-negative number"))
        }
    };
    let w = FactorWeights {
        similarity: num(a)?,
        familiarity: num(b)?,
        concreteness: num(c)?,
    };
    if w.similarity + w.familiarity + w.concreteness <= 0.0 {
        return Err("at least one weight must be positive".into());
    }
    Ok(w)
}
