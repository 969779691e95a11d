//! Run records, corpus metrics, AB-test pair export and JSONL storage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::ValidationReport;
use crate::baselines::BaselineMethod;
use crate::llm::{ChatMessage, Usage};
use crate::orchestrator::{AbortReason, CompositionResult, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Multi,
    Ori,
    Role,
    Cot,
    Icl,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Multi => "multi",
            SystemKind::Ori => "ori",
            SystemKind::Role => "role",
            SystemKind::Cot => "cot",
            SystemKind::Icl => "icl",
        }
    }
}

impl From<BaselineMethod> for SystemKind {
    fn from(m: BaselineMethod) -> Self {
        match m {
            BaselineMethod::Ori => SystemKind::Ori,
            BaselineMethod::Role => SystemKind::Role,
            BaselineMethod::Cot => SystemKind::Cot,
            BaselineMethod::Icl => SystemKind::Icl,
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "multi" => Ok(SystemKind::Multi),
            other => other.parse::<BaselineMethod>().map(SystemKind::from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub prompt_id: String,
    pub system: SystemKind,
    pub model: String,
    pub timestamp: DateTime<Utc>,
    pub transcript: Vec<ChatMessage>,
    pub final_abc: Option<String>,
    pub parse_ok: bool,
    /// Characters of `final_abc`, 0 when absent.
    pub abc_length: usize,
    pub validation: Option<ValidationReport>,
    pub usage: Usage,
    pub backend_calls: u32,
    pub terminal_stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort: Option<AbortReason>,
}

impl RunRecord {
    pub fn from_result(
        run_id: impl Into<String>,
        prompt_id: impl Into<String>,
        system: SystemKind,
        timestamp: DateTime<Utc>,
        result: &CompositionResult,
    ) -> Self {
        RunRecord {
            run_id: run_id.into(),
            prompt_id: prompt_id.into(),
            system,
            model: result.state.config.model.clone(),
            timestamp,
            transcript: result.state.transcript.clone(),
            final_abc: result.final_abc.clone(),
            parse_ok: result.parse_ok(),
            abc_length: result.final_abc.as_deref().map_or(0, |a| a.chars().count()),
            validation: result.validation.clone(),
            usage: result.usage,
            backend_calls: result.state.backend_calls,
            terminal_stage: result.state.stage,
            abort: result.state.abort.clone(),
        }
    }

    /// Checks the record invariants; returns the first violation.
    pub fn check(&self) -> Result<(), String> {
        if self.parse_ok && self.final_abc.is_none() {
            return Err("parse_ok without final_abc".into());
        }
        let len = self.final_abc.as_deref().map_or(0, |a| a.chars().count());
        if len != self.abc_length {
            return Err(format!("abc_length {} but final_abc has {len} characters", self.abc_length));
        }
        Ok(())
    }
}

/// `<UTC timestamp>-<8 hex digits>`; the suffix mixes prompt, system and a
/// process-wide counter so parallel runs never collide.
pub fn new_run_id(timestamp: DateTime<Utc>, prompt_id: &str, system: SystemKind) -> String {
    use std::hash::{Hash, Hasher};
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let mut h = std::collections::hash_map::DefaultHasher::new();
    (prompt_id, system, timestamp.timestamp_nanos_opt(), COUNTER.fetch_add(1, Ordering::Relaxed), std::process::id())
        .hash(&mut h);
    format!("{}-{:08x}", timestamp.format("%Y%m%dT%H%M%S"), h.finish() as u32)
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no runs to evaluate")]
    EmptyCorpus,
    #[error("the two corpora share no prompt id with ABC on both sides")]
    NoOverlap,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Schema { line: usize, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Successful runs over all runs, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessRate {
    pub successes: usize,
    pub total: usize,
}

impl SuccessRate {
    pub fn value(&self) -> f64 {
        self.successes as f64 / self.total as f64
    }
}

impl fmt::Display for SuccessRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}", self.value())
    }
}

/// Share of runs whose single attempt gave ABC that parses.
pub fn success_rate(records: &[RunRecord]) -> Result<SuccessRate, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(SuccessRate {
        successes: records.iter().filter(|r| r.parse_ok).count(),
        total: records.len(),
    })
}

/// Mean `abc_length`. Runs without ABC count as 0 unless `exclude_empty`.
pub fn mean_abc_length(records: &[RunRecord], exclude_empty: bool) -> Result<f64, EvalError> {
    let lengths: Vec<usize> = records
        .iter()
        .filter(|r| !exclude_empty || r.final_abc.is_some())
        .map(|r| r.abc_length)
        .collect();
    if lengths.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(lengths.iter().sum::<usize>() as f64 / lengths.len() as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    System,
    Model,
    #[default]
    SystemModel,
    None,
}

impl FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "system" => Ok(GroupBy::System),
            "model" => Ok(GroupBy::Model),
            "system_model" | "system,model" => Ok(GroupBy::SystemModel),
            "none" => Ok(GroupBy::None),
            _ => Err(format!("unknown grouping {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub system: Option<SystemKind>,
    pub model: Option<String>,
    pub n_runs: usize,
    pub success_rate: SuccessRate,
    pub mean_abc_length: f64,
    /// Runs without a validation report, left out of the adherence rates.
    pub without_validation: usize,
    pub key_match: Option<f64>,
    pub bar_count_match: Option<f64>,
    pub chord_match: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn summarize(system: Option<SystemKind>, model: Option<String>, records: &[&RunRecord]) -> MetricsSummary {
    let owned: Vec<RunRecord> = records.iter().map(|r| (*r).clone()).collect();
    let validated: Vec<&ValidationReport> = records.iter().filter_map(|r| r.validation.as_ref()).collect();
    let rate = |flag: fn(&ValidationReport) -> Option<bool>| {
        mean(validated.iter().filter_map(|v| flag(v)).map(|b| if b { 1.0 } else { 0.0 }))
    };
    MetricsSummary {
        system,
        model,
        n_runs: records.len(),
        success_rate: success_rate(&owned).expect("groups are nonempty"),
        mean_abc_length: mean_abc_length(&owned, false).expect("groups are nonempty"),
        without_validation: records.len() - validated.len(),
        key_match: rate(|v| v.key_match),
        bar_count_match: rate(|v| v.bar_count_match()),
        chord_match: mean(validated.iter().filter_map(|v| v.chord_match_fraction())),
    }
}

/// Metrics per group, in key order.
pub fn adherence_summary(records: &[RunRecord], group_by: GroupBy) -> Vec<MetricsSummary> {
    let mut groups: BTreeMap<(Option<SystemKind>, Option<String>), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = match group_by {
            GroupBy::System => (Some(r.system), None),
            GroupBy::Model => (None, Some(r.model.clone())),
            GroupBy::SystemModel => (Some(r.system), Some(r.model.clone())),
            GroupBy::None => (None, None),
        };
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((s, m), rs)| summarize(s, m, &rs))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbPair {
    pub pair_id: String,
    pub prompt_id: String,
    pub left_path: String,
    pub right_path: String,
    pub seed: u64,
    /// Whether raters are shown the prompt text.
    pub prompt_shown: bool,
}

/// Which side holds which corpus. Kept out of the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbKey {
    pub pair_id: String,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbExport {
    pub manifest: Vec<AbPair>,
    pub key: Vec<AbKey>,
}

fn first_with_abc(records: &[RunRecord]) -> BTreeMap<&str, &RunRecord> {
    let mut out = BTreeMap::new();
    for r in records.iter().filter(|r| r.final_abc.is_some()) {
        out.entry(r.prompt_id.as_str()).or_insert(r);
    }
    out
}

/// Pairs the first ABC-bearing run of each prompt present in both corpora
/// and assigns sides with a seeded coin. Paths are `<out_dir>/<pair_id>-{left,right}.abc`;
/// call [`write_ab_export`] to create the files.
pub fn export_ab_pairs(
    records_a: &[RunRecord],
    records_b: &[RunRecord],
    labels: (&str, &str),
    out_dir: &Path,
    seed: u64,
    prompt_shown: bool,
) -> Result<(AbExport, Vec<(PathBuf, String)>), EvalError> {
    let a = first_with_abc(records_a);
    let b = first_with_abc(records_b);
    let shared: BTreeSet<&str> = a.keys().filter(|k| b.contains_key(*k)).copied().collect();
    if shared.is_empty() {
        return Err(EvalError::NoOverlap);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut export = AbExport { manifest: Vec::new(), key: Vec::new() };
    let mut files = Vec::new();
    for (i, prompt_id) in shared.into_iter().enumerate() {
        let pair_id = format!("pair-{:03}", i + 1);
        let (ra, rb) = (a[prompt_id], b[prompt_id]);
        let swap = rng.random_bool(0.5);
        let (left, right, left_label, right_label) = if swap {
            (rb, ra, labels.1, labels.0)
        } else {
            (ra, rb, labels.0, labels.1)
        };
        let left_path = out_dir.join(format!("{pair_id}-left.abc"));
        let right_path = out_dir.join(format!("{pair_id}-right.abc"));
        files.push((left_path.clone(), left.final_abc.clone().unwrap_or_default()));
        files.push((right_path.clone(), right.final_abc.clone().unwrap_or_default()));
        export.manifest.push(AbPair {
            pair_id: pair_id.clone(),
            prompt_id: prompt_id.to_string(),
            left_path: left_path.display().to_string(),
            right_path: right_path.display().to_string(),
            seed,
            prompt_shown,
        });
        export.key.push(AbKey {
            pair_id,
            left: left_label.to_string(),
            right: right_label.to_string(),
        });
    }
    Ok((export, files))
}

/// Writes the sample files, `manifest.json` and `key.json` under `out_dir`.
pub fn write_ab_export(out_dir: &Path, export: &AbExport, files: &[(PathBuf, String)]) -> Result<(), EvalError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for (path, abc) in files {
        fs::write(path, abc).map_err(io_err(path))?;
    }
    for (name, value) in [
        ("manifest.json", serde_json::to_string_pretty(&export.manifest)),
        ("key.json", serde_json::to_string_pretty(&export.key)),
    ] {
        let path = out_dir.join(name);
        fs::write(&path, value.expect("plain data serializes")).map_err(io_err(&path))?;
    }
    Ok(())
}

/// Appends records to a JSONL file, one line each.
pub fn persist_runs(records: &[RunRecord], path: &Path) -> Result<(), EvalError> {
    RunSink::open(path)?.append_all(records)
}

/// Reads a JSONL file written by [`persist_runs`]. Blank lines are skipped.
pub fn load_runs(path: &Path) -> Result<Vec<RunRecord>, EvalError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&line).map_err(|e| EvalError::Schema {
            line: i + 1,
            reason: e.to_string(),
        })?;
        record.check().map_err(|reason| EvalError::Schema { line: i + 1, reason })?;
        out.push(record);
    }
    Ok(out)
}

/// Append-only JSONL writer shared by concurrent runs.
pub struct RunSink {
    path: PathBuf,
    file: Mutex<File>,
}

impl RunSink {
    pub fn open(path: &Path) -> Result<Self, EvalError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        Ok(RunSink {
            path: path.to_path_buf(),
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, record: &RunRecord) -> Result<(), EvalError> {
        self.append_all(std::slice::from_ref(record))
    }

    fn append_all(&self, records: &[RunRecord]) -> Result<(), EvalError> {
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r).expect("run records serialize"));
            buf.push('\n');
        }
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.write_all(buf.as_bytes()).map_err(io_err(&self.path))?;
        file.flush().map_err(io_err(&self.path))
    }
}
