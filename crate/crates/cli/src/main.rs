mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use composerx::baselines::BaselineMethod;
use composerx::eval::GroupBy;

use commands::{AbOpts, ComposeOpts, Target, EXIT_CONFIG};
use config::{CliConfig, GlobalArgs};

/// Compose, validate and evaluate ABC notation music with LLM agents.
#[derive(Parser)]
#[command(name = "composerx", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct TargetArgs {
    /// Prompt id from the prompt set
    prompt_id: Option<String>,
    /// Inline request text instead of a prompt id
    #[arg(long)]
    text: Option<String>,
    /// Every prompt in the set
    #[arg(long)]
    all: bool,
    /// Parallel runs with --all
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl TargetArgs {
    fn target(&self) -> Target {
        Target {
            prompt_id: self.prompt_id.clone(),
            text: self.text.clone(),
            all: self.all,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the multi-agent pipeline
    Compose {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        max_rounds: Option<u32>,
        #[arg(long)]
        max_review_cycles: Option<u32>,
        /// deterministic or llm_managed
        #[arg(long)]
        selection_policy: Option<String>,
        /// Let the reviewer end revisions by replying APPROVE
        #[arg(long)]
        early_approval: bool,
    },
    /// Run a single-agent baseline: ori, role, cot or icl
    Baseline {
        method: BaselineMethod,
        #[command(flatten)]
        target: TargetArgs,
        /// Examples taken from the ICL store per request
        #[arg(long)]
        icl_examples: Option<usize>,
    },
    /// Check an ABC file for bar, alignment, range and key problems
    Validate {
        file: PathBuf,
        /// Also check against this prompt's attributes
        #[arg(long)]
        prompt_id: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Summarize a runs.jsonl file
    Eval {
        runs: PathBuf,
        /// system, model, system_model or none
        #[arg(long, default_value = "system_model")]
        group_by: GroupBy,
        /// Leave runs without ABC out of the mean length
        #[arg(long)]
        exclude_empty: bool,
        /// Write blind A/B pairs against --against into this directory
        #[arg(long, requires = "against")]
        ab_export: Option<PathBuf>,
        #[arg(long, requires = "ab_export")]
        against: Option<PathBuf>,
        #[arg(long)]
        ab_seed: Option<u64>,
        /// Mark pairs as showing the prompt text to raters
        #[arg(long)]
        prompt_shown: bool,
    },
    /// List or grow the prompt set
    Prompts {
        #[command(subcommand)]
        action: PromptsAction,
    },
}

#[derive(Subcommand)]
enum PromptsAction {
    List,
    /// Generate N new prompts from the set and append them to --prompts
    Expand { n: usize },
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let cfg = CliConfig::resolve(&cli.global)?;
    match cli.command {
        Command::Compose { target, max_rounds, max_review_cycles, selection_policy, early_approval } => {
            let opts = ComposeOpts { max_rounds, max_review_cycles, selection_policy, early_approval, jobs: target.jobs };
            commands::compose(&cfg, &target.target(), &opts)
        }
        Command::Baseline { method, target, icl_examples } => {
            commands::baseline(&cfg, method, &target.target(), icl_examples, target.jobs)
        }
        Command::Validate { file, prompt_id, json } => commands::validate_file(&cfg, &file, prompt_id.as_deref(), json),
        Command::Eval { runs, group_by, exclude_empty, ab_export, against, ab_seed, prompt_shown } => {
            let ab = ab_export.zip(against).map(|(dir, against)| AbOpts { dir, against, seed: ab_seed, prompt_shown });
            commands::eval(&cfg, &runs, group_by, exclude_empty, ab)
        }
        Command::Prompts { action: PromptsAction::List } => commands::prompts_list(&cfg),
        Command::Prompts { action: PromptsAction::Expand { n } } => commands::prompts_expand(&cfg, n),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = run(cli).unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        EXIT_CONFIG
    });
    ExitCode::from(code as u8)
}
