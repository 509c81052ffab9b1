//! `curator` command line: `run`, `eval` and `sample`.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 provider
//! failure, 3 validation-set initialization failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::classifier::{evaluate, FeaturizerKind, FeaturizerSpec, Model, RemoteEmbedder};
use crate::controller::{Curator, LoopConfig, LoopError, RunArtifacts, RunReport, StopReason};
use crate::dataset::{read_records, write_records, Dataset, Label, LabelSet, TaskSpec};
use crate::llm::{ChatProvider, MockProvider, MockScript, OpenAiCompatible, ProviderConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PROVIDER: i32 = 2;
pub const EXIT_INIT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "curator", version, about = "LLM-curated training data for small text classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a curation job described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "max-iterations")]
        max_iterations: Option<usize>,
    },
    /// Evaluate a saved model on a labeled record file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Where to write the evaluation report (default: next to the data file).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Draw k examples per class from a record file.
    Sample {
        #[arg(long)]
        data: PathBuf,
        #[arg(short = 'k')]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub labels: Vec<Label>,
    #[serde(default)]
    pub task_description: Option<String>,
    #[serde(default)]
    pub seed_data: Option<PathBuf>,
    #[serde(default)]
    pub shots: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderSection {
    #[serde(default)]
    pub live: Option<ProviderConfig>,
    #[serde(default)]
    pub mock_script: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub task: TaskSection,
    #[serde(default, rename = "loop")]
    pub loop_config: LoopConfig,
    pub provider: ProviderSection,
    #[serde(default)]
    pub featurizer: Option<FeaturizerSpec>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(String);

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfigFile {
    /// Parses the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfigFile =
            toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.task.seed_data = cfg.task.seed_data.map(|p| resolve(base, &p));
        cfg.provider.mock_script = cfg.provider.mock_script.map(|p| resolve(base, &p));
        cfg.output_dir = resolve(base, &cfg.output_dir);
        if let Some(f) = cfg.featurizer.take() {
            cfg.loop_config.featurizer = f;
        }
        match (&cfg.provider.live, &cfg.provider.mock_script) {
            (Some(_), Some(_)) => return Err(ConfigError("configure either a live provider or a mock script, not both".into())),
            (None, None) => return Err(ConfigError("no provider configured".into())),
            (Some(live), None) => live.validate().map_err(ConfigError)?,
            _ => {}
        }
        Ok(cfg)
    }

    pub fn task_spec(&self) -> Result<TaskSpec, ConfigError> {
        let labels = LabelSet::new(self.task.labels.clone()).map_err(|e| ConfigError(e.to_string()))?;
        let desc = self.task.task_description.clone();
        match &self.task.seed_data {
            None if self.task.shots == 0 => Ok(TaskSpec::zero_shot(labels, desc)),
            None => Err(ConfigError(format!("shots = {} but no seed_data given", self.task.shots))),
            Some(path) => {
                let read = read_records(path, Some(&labels)).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
                if !read.skipped_lines.is_empty() {
                    log::warn!("seed data: skipped duplicate lines {:?}", read.skipped_lines);
                }
                TaskSpec::few_shot(read.dataset, self.task.shots, desc).map_err(|e| ConfigError(e.to_string()))
            }
        }
    }
}

/// Builds the live provider. Swappable so tests can forbid network use.
pub type LiveFactory<'a> = &'a dyn Fn(&ProviderConfig) -> Box<dyn ChatProvider>;

fn default_live(cfg: &ProviderConfig) -> Box<dyn ChatProvider> {
    Box::new(OpenAiCompatible::new(cfg.clone()))
}

pub fn cmd_run(config: &Path, overrides: &RunOverrides) -> i32 {
    cmd_run_with(config, overrides, &default_live)
}

pub fn cmd_run_with(config: &Path, overrides: &RunOverrides, live: LiveFactory<'_>) -> i32 {
    let cfg = match RunConfigFile::load(config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let task = match cfg.task_spec() {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut loop_cfg = cfg.loop_config.clone();
    if let Some(seed) = overrides.seed {
        loop_cfg.rng_seed = seed;
    }
    if let Some(t) = overrides.max_iterations {
        loop_cfg.max_iterations = t;
    }
    let out_root = overrides.out.clone().unwrap_or(cfg.output_dir.clone());

    let provider: Box<dyn ChatProvider> = match (&cfg.provider.live, &cfg.provider.mock_script) {
        (_, Some(script)) => match MockScript::load(script) {
            Ok(s) => Box::new(MockProvider::from_script(s)),
            Err(e) => {
                eprintln!("error: mock script {}: {e}", script.display());
                return EXIT_CONFIG;
            }
        },
        (Some(live_cfg), None) => live(live_cfg),
        (None, None) => unreachable!("checked on load"),
    };

    if loop_cfg.featurizer.kind == FeaturizerKind::RemoteEmbedding && loop_cfg.featurizer.dimension == 0 {
        let Some(endpoint) = loop_cfg.featurizer.endpoint.clone() else {
            eprintln!("error: remote_embedding featurizer needs an endpoint");
            return EXIT_CONFIG;
        };
        match RemoteEmbedder::probe_dimension(&OpenAiCompatible::new(endpoint)) {
            Ok(d) => loop_cfg.featurizer.dimension = d,
            Err(e) => {
                eprintln!("error: embedding endpoint: {e}");
                return EXIT_PROVIDER;
            }
        }
    }

    let curator = match Curator::new(loop_cfg.clone(), provider.as_ref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = match curator.run(&task) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code_for(&e);
        }
    };

    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let run_dir = out_root.join(format!("run-{stamp}-seed{}", loop_cfg.rng_seed));
    let artifacts = RunArtifacts {
        model: "model.json".into(),
        train_set: "train.jsonl".into(),
        validation_set: "validation.jsonl".into(),
        result: "result.json".into(),
    };
    let report = RunReport::new(&task, &loop_cfg, provider.name(), &result, artifacts.clone());
    let written = (|| -> Result<(), Box<dyn std::error::Error>> {
        fs::create_dir_all(&run_dir)?;
        result.model.save(run_dir.join(&artifacts.model))?;
        write_records(&result.final_train_set, run_dir.join(&artifacts.train_set))?;
        write_records(&result.validation_set, run_dir.join(&artifacts.validation_set))?;
        fs::write(run_dir.join(&artifacts.result), result.to_json())?;
        fs::write(run_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("error: writing {}: {e}", run_dir.display());
        return EXIT_CONFIG;
    }

    println!(
        "stop_reason={} best_macro_f1={} train_size={} iterations={} out={}",
        result.stop_reason,
        result.best_metric().map_or("n/a".to_string(), |m| format!("{m:.4}")),
        result.final_train_set.len(),
        result.history.len(),
        run_dir.display()
    );
    if result.stop_reason == StopReason::ProviderFailure {
        EXIT_PROVIDER
    } else {
        EXIT_OK
    }
}

fn exit_code_for(e: &LoopError) -> i32 {
    match e {
        LoopError::InitializationFailed { .. } => EXIT_INIT,
        LoopError::Provider(_) => EXIT_PROVIDER,
        LoopError::Classifier(crate::classifier::ClassifierError::Provider(_)) => EXIT_PROVIDER,
        _ => EXIT_CONFIG,
    }
}

fn render_confusion(labels: &[String], confusion: &[Vec<u64>]) -> String {
    let width = labels.iter().map(String::len).max().unwrap_or(0).max(6);
    let mut out = format!("{:>width$}", "");
    for l in labels {
        out.push_str(&format!(" {l:>width$}"));
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(confusion) {
        out.push_str(&format!("{l:>width$}"));
        for c in row {
            out.push_str(&format!(" {c:>width$}"));
        }
        out.push('\n');
    }
    out
}

pub fn cmd_eval(model_path: &Path, data_path: &Path, report_path: Option<&Path>) -> i32 {
    let model = match Model::load(model_path) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {}: {e}", model_path.display());
            return EXIT_CONFIG;
        }
    };
    let labels = match LabelSet::from_names(model.labels()) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: model labels: {e}");
            return EXIT_CONFIG;
        }
    };
    let data = match read_records(data_path, Some(&labels)) {
        Ok(r) => r.dataset,
        Err(e) => {
            eprintln!("error: {}: {e}", data_path.display());
            return EXIT_CONFIG;
        }
    };
    let report = match evaluate(&model, &data) {
        Ok(r) => r,
        Err(crate::classifier::ClassifierError::Provider(e)) => {
            eprintln!("error: {e}");
            return EXIT_PROVIDER;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    println!("accuracy: {:.4}", report.accuracy);
    println!("macro_f1: {:.4}", report.macro_f1);
    print!("{}", render_confusion(&report.labels, &report.confusion));
    let out = report_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| data_path.with_extension("eval.json"));
    match serde_json::to_string_pretty(&report).map_err(std::io::Error::from).and_then(|s| fs::write(&out, s)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: writing {}: {e}", out.display());
            EXIT_CONFIG
        }
    }
}

pub fn cmd_sample(data_path: &Path, k: usize, seed: u64, out: &Path) -> i32 {
    let sampled = read_records(data_path, None)
        .map_err(|e| e.to_string())
        .and_then(|r| r.dataset.stratified_sample(k, seed).map_err(|e| e.to_string()))
        .and_then(|s: Dataset| write_records(&s, out).map(|_| s).map_err(|e| e.to_string()));
    match sampled {
        Ok(s) => {
            println!("wrote {} examples to {}", s.len(), out.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

pub fn execute(cli: Cli) -> i32 {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            max_iterations,
        } => cmd_run(
            &config,
            &RunOverrides {
                seed,
                out,
                max_iterations,
            },
        ),
        Command::Eval { model, data, report } => cmd_eval(&model, &data, report.as_deref()),
        Command::Sample { data, k, seed, out } => cmd_sample(&data, k, seed, &out),
    }
}
