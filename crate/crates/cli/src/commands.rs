use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::Utc;
use log::warn;
use rayon::prelude::*;

use composerx::abc::parse_tune;
use composerx::analysis::{validate, RangeTable};
use composerx::baselines::{run_baseline, BaselineConfig, BaselineMethod};
use composerx::eval::{
    adherence_summary, export_ab_pairs, load_runs, mean_abc_length, new_run_id, success_rate, write_ab_export,
    EvalError, GroupBy, MetricsSummary, RunRecord, RunSink, SystemKind,
};
use composerx::llm::{ChatBackend, MockBackend, MockScript, OpenAiBackend, RetryPolicy, Retrying, API_KEY_ENV};
use composerx::orchestrator::{run_composition, CompositionResult, OrchestratorConfig, SelectionPolicy, Stage};
use composerx::prompts::{expand_prompts, save_prompt_set, UserPrompt};

use crate::config::{BackendKind, CliConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NO_PARSE: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

/// A configured backend. Mock scripts are replayed from the start for every
/// run so parallel runs stay reproducible.
pub enum Backend {
    Mock(MockScript),
    Live(Retrying<OpenAiBackend>),
}

impl Backend {
    pub fn build(cfg: &CliConfig) -> Result<Backend> {
        match cfg.backend {
            None => bail!("no backend configured (use --backend mock --script FILE or --backend openai)"),
            Some(BackendKind::Mock) => {
                let path = cfg.script.as_ref().ok_or_else(|| anyhow!("--backend mock needs --script FILE"))?;
                let mock = MockBackend::load(path)?;
                Ok(Backend::Mock(mock.script().clone()))
            }
            Some(BackendKind::Openai) => {
                if std::env::var(API_KEY_ENV).map_or(true, |k| k.is_empty()) {
                    warn!("{API_KEY_ENV} is not set; requests go out without a key");
                }
                let client = OpenAiBackend::from_config(&cfg.gateway)?;
                let policy = RetryPolicy { retries: cfg.gateway.retries, ..RetryPolicy::default() };
                Ok(Backend::Live(Retrying::new(client, policy)))
            }
        }
    }

    pub fn session(&self) -> Box<dyn ChatBackend + '_> {
        match self {
            Backend::Mock(script) => Box::new(MockBackend::new(script.clone())),
            Backend::Live(client) => Box::new(client),
        }
    }
}

/// Which prompts a compose or baseline command runs on.
pub struct Target {
    pub prompt_id: Option<String>,
    pub text: Option<String>,
    pub all: bool,
}

fn select_prompts(cfg: &CliConfig, target: &Target) -> Result<Vec<UserPrompt>> {
    match (&target.prompt_id, &target.text, target.all) {
        (None, Some(text), false) => Ok(vec![UserPrompt::inline("inline", text.clone())]),
        (None, None, true) => {
            let set = cfg.load_prompts()?;
            if set.is_empty() {
                bail!("the prompt set is empty");
            }
            Ok(set)
        }
        (Some(id), None, false) => {
            let set = cfg.load_prompts()?;
            let found = set.into_iter().find(|p| &p.id == id);
            found.map(|p| vec![p]).ok_or_else(|| anyhow!("unknown prompt id {id:?}"))
        }
        (None, None, false) => bail!("give a PROMPT_ID, --text or --all"),
        _ => bail!("PROMPT_ID, --text and --all are mutually exclusive"),
    }
}

pub fn exit_code(result: &CompositionResult) -> i32 {
    match result.state.stage {
        Stage::Aborted => EXIT_ABORTED,
        _ if result.parse_ok() => EXIT_OK,
        _ => EXIT_NO_PARSE,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| path.display().to_string())
}

/// Writes `<out>/<run_id>/{transcript.json, final.abc, validation.json}`.
fn write_run_dir(out: &Path, record: &RunRecord) -> Result<PathBuf> {
    let dir = out.join(&record.run_id);
    fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
    write_json(&dir.join("transcript.json"), &record.transcript)?;
    if let Some(abc) = &record.final_abc {
        fs::write(dir.join("final.abc"), abc).with_context(|| dir.display().to_string())?;
    }
    if let Some(v) = &record.validation {
        write_json(&dir.join("validation.json"), v)?;
    }
    Ok(dir)
}

fn report(record: &RunRecord, result: &CompositionResult, dir: &Path) {
    println!(
        "== {} [{}] run {}: {} after {} calls",
        record.prompt_id, record.system, record.run_id, record.terminal_stage, record.backend_calls
    );
    if let Some(abc) = &record.final_abc {
        println!("{}", abc.trim_end());
    }
    match (&result.validation, &result.parse_error) {
        (Some(v), _) => print!("{v}"),
        (None, Some(e)) => println!("final ABC does not parse: {e}"),
        (None, None) if record.terminal_stage == Stage::Done => println!("no ABC in the final message"),
        _ => {}
    }
    if let Some(reason) = &record.abort {
        println!("aborted: {}", serde_json::to_string(reason).unwrap_or_default());
    }
    println!("saved to {}", dir.display());
}

type RunFn<'a> = dyn Fn(&UserPrompt, &dyn ChatBackend) -> Result<CompositionResult> + Sync + 'a;

/// Runs `run` over `prompts` on `jobs` threads and records each outcome.
/// Returns the largest exit code.
fn run_all(cfg: &CliConfig, backend: &Backend, prompts: &[UserPrompt], system: SystemKind, jobs: usize, run: &RunFn) -> Result<i32> {
    let sink = RunSink::open(&cfg.out.join("runs.jsonl"))?;
    let one = |prompt: &UserPrompt| -> Result<(RunRecord, CompositionResult, PathBuf)> {
        let session = backend.session();
        let result = run(prompt, session.as_ref())?;
        let now = Utc::now();
        let record = RunRecord::from_result(new_run_id(now, &prompt.id, system), &prompt.id, system, now, &result);
        sink.append(&record)?;
        let dir = write_run_dir(&cfg.out, &record)?;
        Ok((record, result, dir))
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let outcomes: Vec<_> = pool.install(|| prompts.par_iter().map(one).collect());
    let mut code = EXIT_OK;
    for outcome in outcomes {
        let (record, result, dir) = outcome?;
        report(&record, &result, &dir);
        code = code.max(exit_code(&result));
    }
    Ok(code)
}

pub struct ComposeOpts {
    pub max_rounds: Option<u32>,
    pub max_review_cycles: Option<u32>,
    pub selection_policy: Option<String>,
    pub early_approval: bool,
    pub jobs: usize,
}

fn parse_policy(s: &str) -> Result<SelectionPolicy> {
    match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
        "deterministic" => Ok(SelectionPolicy::Deterministic),
        "llm_managed" => Ok(SelectionPolicy::LlmManaged),
        other => bail!("unknown selection policy {other:?} (expected deterministic or llm_managed)"),
    }
}

pub fn compose(cfg: &CliConfig, target: &Target, opts: &ComposeOpts) -> Result<i32> {
    let defaults = OrchestratorConfig::default();
    let policy = match opts.selection_policy.as_ref().or(cfg.selection_policy.as_ref()) {
        Some(s) => parse_policy(s)?,
        None => defaults.selection_policy,
    };
    let config = OrchestratorConfig {
        max_rounds: opts.max_rounds.or(cfg.max_rounds).unwrap_or(defaults.max_rounds),
        max_review_cycles: opts.max_review_cycles.or(cfg.max_review_cycles).unwrap_or(defaults.max_review_cycles),
        selection_policy: policy,
        early_approval: opts.early_approval || cfg.early_approval.unwrap_or(false),
        model: cfg.gateway.model.clone(),
        temperature: cfg.gateway.temperature,
        max_tokens: cfg.gateway.max_tokens,
    };
    config.check()?;
    let prompts = select_prompts(cfg, target)?;
    let ranges = cfg.load_ranges()?;
    let backend = Backend::build(cfg)?;
    let run = |p: &UserPrompt, b: &dyn ChatBackend| Ok(run_composition(p, config.clone(), b, &ranges)?);
    run_all(cfg, &backend, &prompts, SystemKind::Multi, opts.jobs, &run)
}

pub fn baseline(cfg: &CliConfig, method: BaselineMethod, target: &Target, icl_examples: Option<usize>, jobs: usize) -> Result<i32> {
    let prompts = select_prompts(cfg, target)?;
    let ranges: RangeTable = cfg.load_ranges()?;
    let examples = cfg.load_icl(false)?;
    if method == BaselineMethod::Icl && examples.is_empty() {
        bail!("icl needs --icl-store FILE with at least one example");
    }
    let config = BaselineConfig {
        model: cfg.gateway.model.clone(),
        temperature: cfg.gateway.temperature,
        max_tokens: cfg.gateway.max_tokens,
        icl_examples: icl_examples.unwrap_or(BaselineConfig::default().icl_examples),
    };
    let backend = Backend::build(cfg)?;
    let run = |p: &UserPrompt, b: &dyn ChatBackend| Ok(run_baseline(method, p, b, &examples, &config, &ranges)?);
    run_all(cfg, &backend, &prompts, method.into(), jobs, &run)
}

pub fn validate_file(cfg: &CliConfig, file: &Path, prompt_id: Option<&str>, json: bool) -> Result<i32> {
    let text = fs::read_to_string(file).with_context(|| file.display().to_string())?;
    let attrs = match prompt_id {
        Some(id) => {
            let set = cfg.load_prompts()?;
            let p = set.into_iter().find(|p| p.id == id).ok_or_else(|| anyhow!("unknown prompt id {id:?}"))?;
            Some(p.attributes)
        }
        None => None,
    };
    let ranges = cfg.load_ranges()?;
    let tune = parse_tune(&text).map_err(|e| anyhow!("{}: {e}", file.display()))?;
    let report = validate(&tune, attrs.as_ref(), &ranges);
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{report}");
    }
    Ok(if report.has_problems() { EXIT_NO_PARSE } else { EXIT_OK })
}

pub struct AbOpts {
    pub dir: PathBuf,
    pub against: PathBuf,
    pub seed: Option<u64>,
    pub prompt_shown: bool,
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or("-".into(), |v| format!("{v:.3}"))
}

fn print_rows(rows: &[MetricsSummary]) {
    println!(
        "{:<8} {:<20} {:>6} {:>9} {:>11} {:>8} {:>8} {:>8}",
        "system", "model", "runs", "success", "mean_len", "key", "bars", "chords"
    );
    for r in rows {
        println!(
            "{:<8} {:<20} {:>6} {:>9} {:>11.3} {:>8} {:>8} {:>8}",
            r.system.map_or("*".to_string(), |s| s.to_string()),
            r.model.as_deref().unwrap_or("*"),
            r.n_runs,
            r.success_rate.to_string(),
            r.mean_abc_length,
            fmt_rate(r.key_match),
            fmt_rate(r.bar_count_match),
            fmt_rate(r.chord_match),
        );
    }
}

pub fn eval(cfg: &CliConfig, runs: &Path, group_by: GroupBy, exclude_empty: bool, ab: Option<AbOpts>) -> Result<i32> {
    let records = load_runs(runs)?;
    let rate = success_rate(&records)?;
    println!("success rate      {rate} ({}/{})", rate.successes, rate.total);
    match mean_abc_length(&records, exclude_empty) {
        Ok(m) => println!("mean ABC length   {m:.3}"),
        Err(e) => println!("mean ABC length   n/a ({e})"),
    }
    print_rows(&adherence_summary(&records, group_by));
    let Some(ab) = ab else { return Ok(EXIT_OK) };
    let other = load_runs(&ab.against)?;
    let labels = (runs.display().to_string(), ab.against.display().to_string());
    let seed = ab.seed.unwrap_or(cfg.seed);
    match export_ab_pairs(&records, &other, (&labels.0, &labels.1), &ab.dir, seed, ab.prompt_shown) {
        Ok((export, files)) => {
            write_ab_export(&ab.dir, &export, &files)?;
            println!("wrote {} pairs to {}", export.manifest.len(), ab.dir.display());
            Ok(EXIT_OK)
        }
        Err(e @ EvalError::NoOverlap) => {
            eprintln!("error: {e}");
            Ok(EXIT_NO_PARSE)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn prompts_list(cfg: &CliConfig) -> Result<i32> {
    for p in cfg.load_prompts()? {
        println!("{}\t{}", p.id, p.attributes.name);
    }
    Ok(EXIT_OK)
}

pub fn prompts_expand(cfg: &CliConfig, n: usize) -> Result<i32> {
    let backend = Backend::build(cfg)?;
    let path = cfg.prompts.as_ref().ok_or_else(|| anyhow!("expand needs --prompts FILE to append to"))?;
    let mut set = cfg.load_prompts()?;
    let session = backend.session();
    let expansion = expand_prompts(&set, n, session.as_ref(), &cfg.gateway.model, cfg.seed)?;
    for w in &expansion.warnings {
        eprintln!("warning: {w}");
    }
    for p in &expansion.prompts {
        println!("{}\t{}", p.id, p.attributes.name);
    }
    let added = expansion.prompts.len();
    set.extend(expansion.prompts);
    save_prompt_set(path, &set)?;
    println!("added {added} of {n} prompts to {}", path.display());
    Ok(EXIT_OK)
}
