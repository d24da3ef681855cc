//! Pipeline configuration, one TOML file for every subcommand.
//!
//! Every section and field is optional; omitted values take the defaults
//! listed in `pipeline.toml` at the crate root. Relative paths are resolved
//! against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::icl::{IdentityCheckConfig, SweepConfig, TokenPattern};
use crate::metrics::DEFAULT_SIGMAS;
use crate::miner::MinerConfig;
use crate::projector::TrainConfig;
use crate::prompt::{ControlLayout, Endpoint, PromptTemplate, Task};
use crate::retrieval::RetrievalMode;
use crate::store::StoreDims;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// JSON-lines experience store.
    pub records: PathBuf,
    pub video_dim: usize,
    /// Number of control intervals; `C = 4 · intervals`.
    pub control_intervals: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            records: "data/synthetic40.jsonl".into(),
            video_dim: 2,
            control_intervals: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory receiving every artifact.
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k: usize,
    pub mode: RetrievalMode,
    /// Leave the query's own record out of its candidates.
    pub exclude_self: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: 2,
            mode: RetrievalMode::Hybrid,
            exclude_self: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    /// TOML template file; the built-in template when absent.
    pub template: Option<PathBuf>,
    pub tasks: Vec<Task>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            template: None,
            tasks: Task::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub sigmas: Vec<f64>,
    /// Seed of the random-answer baseline.
    pub baseline_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            sigmas: DEFAULT_SIGMAS.to_vec(),
            baseline_seed: 13,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IclConfig {
    pub configs: usize,
    pub max_dim: usize,
    pub max_tokens: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub sweep_d_in: Vec<usize>,
    pub sweep_d_out: Vec<usize>,
    pub sweep_n_icl: Vec<usize>,
    pub sweep_n_q: Vec<usize>,
    pub sweep_trials: usize,
}

impl Default for IclConfig {
    fn default() -> Self {
        let id = IdentityCheckConfig::default();
        let sw = SweepConfig::default();
        Self {
            configs: id.configs,
            max_dim: id.max_dim,
            max_tokens: id.max_tokens,
            tolerance: id.tolerance,
            seed: id.seed,
            sweep_d_in: sw.d_in,
            sweep_d_out: sw.d_out,
            sweep_n_icl: sw.n_icl,
            sweep_n_q: sw.n_q,
            sweep_trials: sw.trials,
        }
    }
}

impl IclConfig {
    pub fn identity(&self) -> IdentityCheckConfig {
        IdentityCheckConfig {
            configs: self.configs,
            max_dim: self.max_dim,
            max_tokens: self.max_tokens,
            tolerance: self.tolerance,
            seed: self.seed,
        }
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            d_in: self.sweep_d_in.clone(),
            d_out: self.sweep_d_out.clone(),
            n_icl: self.sweep_n_icl.clone(),
            n_q: self.sweep_n_q.clone(),
            trials: self.sweep_trials,
            seed: self.seed,
            pattern: TokenPattern::Random,
        }
    }
}

fn bundled_train() -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub output: OutputConfig,
    pub miner: MinerConfig,
    pub train: TrainConfig,
    pub retrieval: RetrievalConfig,
    pub prompt: PromptConfig,
    pub eval: EvalConfig,
    /// External model endpoint; the echo generator when absent.
    pub generator: Option<Endpoint>,
    pub icl: IclConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            output: OutputConfig::default(),
            miner: MinerConfig::default(),
            train: bundled_train(),
            retrieval: RetrievalConfig::default(),
            prompt: PromptConfig::default(),
            eval: EvalConfig::default(),
            generator: None,
            icl: IclConfig::default(),
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, validates and resolves relative paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&fsio::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        self.data.records = resolve(base, &self.data.records);
        self.output.dir = resolve(base, &self.output.dir);
        if let Some(t) = &self.prompt.template {
            self.prompt.template = Some(resolve(base, t));
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dims(&self) -> StoreDims {
        StoreDims {
            video: self.data.video_dim,
            control: self.layout().len(),
        }
    }

    pub fn layout(&self) -> ControlLayout {
        ControlLayout::with_intervals(self.data.control_intervals)
    }

    pub fn validate(&self) -> Result<()> {
        self.miner.validate()?;
        self.train.validate()?;
        let d = self.dims();
        if d.video == 0 || d.control == 0 {
            return Err(Error::Config(
                "video_dim and control_intervals must be at least 1".into(),
            ));
        }
        if self.train.layer_dims[0] != d.video + d.control {
            return Err(Error::Config(format!(
                "train.layer_dims starts with {}, but inputs have V + C = {} + {} = {}",
                self.train.layer_dims[0],
                d.video,
                d.control,
                d.video + d.control
            )));
        }
        if self.retrieval.k == 0 {
            return Err(Error::Config("retrieval.k must be at least 1".into()));
        }
        if self.prompt.tasks.is_empty() {
            return Err(Error::Config(
                "prompt.tasks must name at least one task".into(),
            ));
        }
        if self.eval.sigmas.is_empty()
            || self
                .eval
                .sigmas
                .iter()
                .any(|s| !(*s > 0.0 && s.is_finite()))
        {
            return Err(Error::Config("eval.sigmas must be positive numbers".into()));
        }
        if self.icl.max_dim == 0 || self.icl.max_tokens == 0 || self.icl.sweep_trials == 0 {
            return Err(Error::Config(
                "icl.max_dim, icl.max_tokens and icl.sweep_trials must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        match &self.prompt.template {
            Some(p) => PromptTemplate::load(p),
            None => Ok(PromptTemplate::default()),
        }
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.output.dir.join(name)
    }
}

/// Artifact file names inside the output directory.
pub mod artifacts {
    pub const TRIPLETS: &str = "triplets.jsonl";
    pub const CHECKPOINT: &str = "projector.ckpt";
    pub const LOSS: &str = "loss.csv";
    pub const INDEX: &str = "index.json";
    pub const ANSWERS: &str = "answers.jsonl";
    pub const BASELINE_ANSWERS: &str = "baseline_answers.jsonl";
    pub const REPORT: &str = "report.json";
    pub const BASELINE_REPORT: &str = "baseline_report.json";
    pub const SUMMARY: &str = "summary.txt";
    pub const SWEEP: &str = "icl_sweep.csv";
    pub const IDENTITY: &str = "icl_identity.txt";
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(
            PipelineConfig::parse("").unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn shipped_config_spells_out_the_defaults() {
        let cfg = PipelineConfig::parse(include_str!("../pipeline.toml")).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = PipelineConfig::parse("[retrieval]\nk = 3\nmode = \"visual\"\n").unwrap();
        assert_eq!(cfg.retrieval.k, 3);
        assert_eq!(cfg.retrieval.mode, RetrievalMode::Visual);
        assert!(cfg.retrieval.exclude_self);
        assert_eq!(cfg.miner, MinerConfig::default());
    }

    #[test]
    fn layer_dims_must_match_inputs() {
        let err = PipelineConfig::parse("[data]\nvideo_dim = 3\n").unwrap_err();
        assert!(err.to_string().contains("V + C"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::parse("[retrieval]\nkk = 3\n").is_err());
    }

    #[test]
    fn generator_endpoint_parses() {
        let cfg = PipelineConfig::parse(
            "[generator]\ntransport = \"tcp\"\naddr = \"127.0.0.1:7070\"\ntimeout_ms = 2000\n",
        )
        .unwrap();
        assert!(matches!(cfg.generator, Some(Endpoint::Tcp { .. })));
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let mut cfg = PipelineConfig::default();
        cfg.rebase(Path::new("/etc/raicl"));
        assert_eq!(
            cfg.data.records,
            Path::new("/etc/raicl/data/synthetic40.jsonl")
        );
        assert_eq!(
            cfg.artifact("report.json"),
            Path::new("/etc/raicl/out/report.json")
        );
    }
}
