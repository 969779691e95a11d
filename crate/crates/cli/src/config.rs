//! Settings merged from flags, `COMPOSERX_*` environment variables and an
//! optional flat TOML file, in that order of precedence.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

use composerx::analysis::RangeTable;
use composerx::llm::{GatewayConfig, DEFAULT_BASE_URL, DEFAULT_MODEL, DEFAULT_RETRIES, DEFAULT_TIMEOUT_S, DEFAULT_TEMPERATURE};
use composerx::prompts::{bundled_icl_examples, bundled_prompts, load_icl_examples, load_prompt_set, IclExample, UserPrompt};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Openai,
    Mock,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// Flat TOML file with any of the settings below
    #[arg(long, global = true, env = "COMPOSERX_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, env = "COMPOSERX_BACKEND")]
    pub backend: Option<BackendKind>,
    /// Mock script (JSON object keyed by agent tag, then "*")
    #[arg(long, global = true, env = "COMPOSERX_SCRIPT")]
    pub script: Option<PathBuf>,
    #[arg(long, global = true, env = "COMPOSERX_BASE_URL")]
    pub base_url: Option<String>,
    #[arg(long, global = true, env = "COMPOSERX_MODEL")]
    pub model: Option<String>,
    #[arg(long, global = true, env = "COMPOSERX_TEMPERATURE")]
    pub temperature: Option<f64>,
    #[arg(long, global = true, env = "COMPOSERX_MAX_TOKENS")]
    pub max_tokens: Option<u32>,
    #[arg(long, global = true, env = "COMPOSERX_RETRIES")]
    pub retries: Option<u32>,
    #[arg(long, global = true, env = "COMPOSERX_TIMEOUT_S")]
    pub timeout_s: Option<u64>,
    /// Output directory for run records
    #[arg(long, global = true, env = "COMPOSERX_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "COMPOSERX_SEED")]
    pub seed: Option<u64>,
    /// Prompt set JSON; the bundled set when absent
    #[arg(long, global = true, env = "COMPOSERX_PROMPTS")]
    pub prompts: Option<PathBuf>,
    /// Instrument range table; the bundled table when absent
    #[arg(long, global = true, env = "COMPOSERX_RANGES")]
    pub ranges: Option<PathBuf>,
    /// ICL example store JSON
    #[arg(long, global = true, env = "COMPOSERX_ICL_STORE")]
    pub icl_store: Option<PathBuf>,
}

/// Keys accepted in the config file. Orchestrator keys are read here and
/// applied by `compose` when the matching flag is absent.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<BackendKind>,
    pub script: Option<PathBuf>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub retries: Option<u32>,
    pub timeout_s: Option<u64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub prompts: Option<PathBuf>,
    pub ranges: Option<PathBuf>,
    pub icl_store: Option<PathBuf>,
    pub max_rounds: Option<u32>,
    pub max_review_cycles: Option<u32>,
    pub selection_policy: Option<String>,
    pub early_approval: Option<bool>,
}

/// Fully merged settings with every path made absolute.
#[derive(Debug, Clone)]
pub struct CliConfig {
    pub backend: Option<BackendKind>,
    pub script: Option<PathBuf>,
    pub gateway: GatewayConfig,
    pub out: PathBuf,
    pub seed: u64,
    pub prompts: Option<PathBuf>,
    pub ranges: Option<PathBuf>,
    pub icl_store: Option<PathBuf>,
    pub max_rounds: Option<u32>,
    pub max_review_cycles: Option<u32>,
    pub selection_policy: Option<String>,
    pub early_approval: Option<bool>,
}

fn absolute(p: PathBuf, base: &Path) -> Result<PathBuf> {
    let joined = if p.is_absolute() { p } else { base.join(p) };
    std::path::absolute(&joined).with_context(|| format!("cannot resolve {}", joined.display()))
}

impl CliConfig {
    pub fn resolve(args: &GlobalArgs) -> Result<Self> {
        let cwd = std::env::current_dir().context("no working directory")?;
        let (file, file_dir) = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("config {}", path.display()))?;
                let parsed: FileConfig = toml::from_str(&text).with_context(|| format!("config {}", path.display()))?;
                let dir = absolute(path.clone(), &cwd)?.parent().map(Path::to_path_buf).unwrap_or(cwd.clone());
                (parsed, dir)
            }
            None => (FileConfig::default(), cwd.clone()),
        };
        // Paths from the file are relative to the file, paths from flags to the cwd.
        let path = |flag: &Option<PathBuf>, from_file: Option<PathBuf>| -> Result<Option<PathBuf>> {
            match (flag, from_file) {
                (Some(p), _) => absolute(p.clone(), &cwd).map(Some),
                (None, Some(p)) => absolute(p, &file_dir).map(Some),
                (None, None) => Ok(None),
            }
        };
        let gateway = GatewayConfig {
            base_url: args.base_url.clone().or(file.base_url).unwrap_or_else(|| DEFAULT_BASE_URL.into()),
            model: args.model.clone().or(file.model).unwrap_or_else(|| DEFAULT_MODEL.into()),
            temperature: args.temperature.or(file.temperature).unwrap_or(DEFAULT_TEMPERATURE),
            max_tokens: args.max_tokens.or(file.max_tokens),
            retries: args.retries.or(file.retries).unwrap_or(DEFAULT_RETRIES),
            timeout_s: args.timeout_s.or(file.timeout_s).unwrap_or(DEFAULT_TIMEOUT_S),
        };
        if !(0.0..=2.0).contains(&gateway.temperature) {
            bail!("temperature must be within [0, 2], got {}", gateway.temperature);
        }
        let out = path(&args.out, file.out)?.unwrap_or(absolute(DEFAULT_OUT.into(), &cwd)?);
        Ok(CliConfig {
            backend: args.backend.or(file.backend),
            script: path(&args.script, file.script)?,
            gateway,
            out,
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            prompts: path(&args.prompts, file.prompts)?,
            ranges: path(&args.ranges, file.ranges)?,
            icl_store: path(&args.icl_store, file.icl_store)?,
            max_rounds: file.max_rounds,
            max_review_cycles: file.max_review_cycles,
            selection_policy: file.selection_policy,
            early_approval: file.early_approval,
        })
    }

    pub fn load_prompts(&self) -> Result<Vec<UserPrompt>> {
        match &self.prompts {
            Some(p) => load_prompt_set(p).with_context(|| format!("prompt set {}", p.display())),
            None => Ok(bundled_prompts()),
        }
    }

    pub fn load_ranges(&self) -> Result<RangeTable> {
        match &self.ranges {
            Some(p) => RangeTable::load(p).with_context(|| format!("range table {}", p.display())),
            None => Ok(RangeTable::default_table()),
        }
    }

    /// The ICL store only when one was named; `bundled` falls back to the shipped examples.
    pub fn load_icl(&self, bundled: bool) -> Result<Vec<IclExample>> {
        match &self.icl_store {
            Some(p) => load_icl_examples(p).with_context(|| format!("ICL store {}", p.display())),
            None if bundled => Ok(bundled_icl_examples()),
            None => Ok(Vec::new()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(&cfg, "model = \"from-file\"\nseed = 7\nout = \"runs\"\ntemperature = 0.2\n").unwrap();
        let args = GlobalArgs {
            config: Some(cfg),
            model: Some("from-flag".into()),
            ..Default::default()
        };
        let c = CliConfig::resolve(&args).unwrap();
        assert_eq!(c.gateway.model, "from-flag");
        assert_eq!(c.seed, 7);
        assert_eq!(c.gateway.temperature, 0.2);
        assert_eq!(c.out, std::path::absolute(dir.path().join("runs")).unwrap());
    }

    #[test]
    fn defaults_without_file() {
        let c = CliConfig::resolve(&GlobalArgs::default()).unwrap();
        assert_eq!(c.seed, DEFAULT_SEED);
        assert!(c.out.is_absolute());
        assert!(c.backend.is_none());
    }

    #[test]
    fn unknown_file_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(&cfg, "colour = \"red\"\n").unwrap();
        let args = GlobalArgs { config: Some(cfg), ..Default::default() };
        assert!(CliConfig::resolve(&args).is_err());
    }
}
