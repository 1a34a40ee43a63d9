use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use drfix_core::fixgen::{FixConfig, ScopeOrder};
use drfix_core::retrieval::DEFAULT_DIM;
use drfix_core::validate::DESK_REPETITIONS;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderChoice {
    /// Offline hashed token trigrams.
    Deterministic,
    /// HTTP embedding service at `embedder_endpoint`.
    Remote,
}

/// Contents of a TOML config file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub repo: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub model_endpoint: Option<String>,
    pub model_credential_env: Option<String>,
    pub embedder: Option<EmbedderChoice>,
    pub embedder_endpoint: Option<String>,
    pub dim: Option<usize>,
    pub repetitions: Option<usize>,
    pub workers: Option<usize>,
    pub use_rag: Option<bool>,
    pub use_skeleton: Option<bool>,
    pub use_lca: Option<bool>,
    pub scope_order: Option<ScopeOrder>,
    pub k: Option<usize>,
    pub feedback_retries: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Values that came from flags or environment variables (clap merges the two).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub repo: Option<PathBuf>,
    pub db: Option<PathBuf>,
    pub model_endpoint: Option<String>,
    pub model_credential_env: Option<String>,
    pub embedder: Option<EmbedderChoice>,
    pub embedder_endpoint: Option<String>,
    pub dim: Option<usize>,
    pub repetitions: Option<usize>,
    pub workers: Option<usize>,
    pub no_rag: bool,
    pub no_skeleton: bool,
    pub no_lca: bool,
    pub scope_order: Option<ScopeOrder>,
    pub k: Option<usize>,
    pub feedback_retries: Option<usize>,
}

/// Resolved settings. The ablation switches can only be turned off by a
/// higher layer, never back on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub repo_root: PathBuf,
    pub db_path: PathBuf,
    pub model_endpoint: Option<String>,
    /// Name of the variable holding the credential, not the credential.
    pub model_credential_env: Option<String>,
    pub embedder: EmbedderChoice,
    pub embedder_endpoint: Option<String>,
    pub dim: usize,
    pub repetitions: usize,
    pub workers: usize,
    pub use_rag: bool,
    pub use_skeleton: bool,
    pub use_lca: bool,
    pub scope_order: ScopeOrder,
    pub k: usize,
    pub feedback_retries: usize,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

impl Config {
    pub fn resolve(o: Overrides, file: FileConfig) -> anyhow::Result<Config> {
        let config = Config {
            repo_root: o.repo.or(file.repo).unwrap_or_else(|| PathBuf::from(".")),
            db_path: o.db.or(file.db).unwrap_or_else(|| PathBuf::from("drfix-db.json")),
            model_endpoint: o.model_endpoint.or(file.model_endpoint),
            model_credential_env: o.model_credential_env.or(file.model_credential_env),
            embedder: o.embedder.or(file.embedder).unwrap_or(EmbedderChoice::Deterministic),
            embedder_endpoint: o.embedder_endpoint.or(file.embedder_endpoint),
            dim: o.dim.or(file.dim).unwrap_or(DEFAULT_DIM),
            repetitions: o.repetitions.or(file.repetitions).unwrap_or(DESK_REPETITIONS),
            workers: o.workers.or(file.workers).unwrap_or_else(default_workers),
            use_rag: !o.no_rag && file.use_rag.unwrap_or(true),
            use_skeleton: !o.no_skeleton && file.use_skeleton.unwrap_or(true),
            use_lca: !o.no_lca && file.use_lca.unwrap_or(true),
            scope_order: o.scope_order.or(file.scope_order).unwrap_or_default(),
            k: o.k.or(file.k).unwrap_or(1),
            feedback_retries: o.feedback_retries.or(file.feedback_retries).unwrap_or(1),
        };
        if config.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        if config.workers == 0 {
            bail!("workers must be at least 1");
        }
        if config.dim == 0 {
            bail!("dim must be at least 1");
        }
        if config.embedder == EmbedderChoice::Remote && config.embedder_endpoint.is_none() {
            bail!("the remote embedder needs embedder_endpoint");
        }
        Ok(config)
    }

    pub fn fix_config(&self) -> FixConfig {
        FixConfig {
            use_rag: self.use_rag,
            use_skeleton: self.use_skeleton,
            use_lca: self.use_lca,
            scope_order: self.scope_order,
            k: self.k,
            feedback_retries: self.feedback_retries,
            repetitions: self.repetitions,
            ..FixConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let file: FileConfig =
            toml::from_str("repetitions = 5\nk = 3\nuse_lca = false\nscope_order = \"file-only\"").unwrap();
        let o = Overrides {
            repetitions: Some(7),
            ..Overrides::default()
        };
        let c = Config::resolve(o, file).unwrap();
        assert_eq!(c.repetitions, 7);
        assert_eq!(c.k, 3);
        assert!(!c.use_lca);
        assert!(c.use_rag);
        assert_eq!(c.scope_order, ScopeOrder::FileOnly);
        assert_eq!(c.dim, DEFAULT_DIM);
        assert_eq!(c.feedback_retries, 1);
    }

    #[test]
    fn flags_only_disable() {
        let file: FileConfig = toml::from_str("use_rag = true").unwrap();
        let o = Overrides {
            no_rag: true,
            ..Overrides::default()
        };
        assert!(!Config::resolve(o, file).unwrap().use_rag);
    }

    #[test]
    fn rejects_bad_values() {
        let zero = Overrides {
            repetitions: Some(0),
            ..Overrides::default()
        };
        assert!(Config::resolve(zero, FileConfig::default()).is_err());
        let remote = Overrides {
            embedder: Some(EmbedderChoice::Remote),
            ..Overrides::default()
        };
        assert!(Config::resolve(remote, FileConfig::default()).is_err());
        assert!(toml::from_str::<FileConfig>("repetitons = 3").is_err());
    }

    #[test]
    fn fix_config_carries_ablations() {
        let o = Overrides {
            no_skeleton: true,
            k: Some(2),
            ..Overrides::default()
        };
        let fc = Config::resolve(o, FileConfig::default()).unwrap().fix_config();
        assert!(!fc.use_skeleton);
        assert_eq!(fc.k, 2);
        assert!(fc.baseline);
    }
}
