//! Run settings. Precedence: command-line flags, then environment variables,
//! then the config file, then built-in defaults. Relative paths in a config
//! file are resolved against the file's directory.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, ValueEnum};
use serde::Deserialize;
use valuemap::compare::{AlignmentBands, DEFAULT_THRESHOLD_RANKS};
use valuemap::gateway::RetryPolicy;
use valuemap::prompt::SamplingParams;
use valuemap::Projection;

use crate::error::{CliError, Result};

pub const DEFAULT_MODEL: &str = "gpt-4";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";
pub const DEFAULT_OUT_DIR: &str = "valuemap-run";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendChoice {
    /// Serve recorded answers keyed by job id.
    Replay,
    /// OpenAI-compatible chat-completions endpoint.
    HttpChat,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true, env = "VALUEMAP_CONFIG")]
    pub config: Option<PathBuf>,
    /// Catalog TOML; defaults to the built-in catalog.
    #[arg(long, global = true, env = "VALUEMAP_CATALOG")]
    pub catalog: Option<PathBuf>,
    /// Factor-loading override table.
    #[arg(long, global = true, env = "VALUEMAP_LOADINGS")]
    pub loadings: Option<PathBuf>,
    #[arg(long, value_enum, global = true, env = "VALUEMAP_BACKEND")]
    pub backend: Option<BackendChoice>,
    /// Replay fixture (JSON lines of job_id, raw_text); defaults to the built-in fixture.
    #[arg(long, global = true, env = "VALUEMAP_FIXTURE")]
    pub fixture: Option<PathBuf>,
    #[arg(long, global = true, env = "VALUEMAP_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Environment variable holding the API token.
    #[arg(long, global = true, env = "VALUEMAP_API_KEY_ENV")]
    pub api_key_env: Option<String>,
    #[arg(long, global = true, env = "VALUEMAP_MODEL")]
    pub model: Option<String>,
    /// Comma-separated entity names to restrict the run to.
    #[arg(long, global = true, value_delimiter = ',', env = "VALUEMAP_ENTITIES")]
    pub entities: Option<Vec<String>>,
    /// Benchmark CSV (entity, trad_sec, surv_self).
    #[arg(long, global = true, env = "VALUEMAP_BENCHMARK")]
    pub benchmark: Option<PathBuf>,
    /// GeoJSON world geometry keyed by iso3.
    #[arg(long, global = true, env = "VALUEMAP_GEOMETRY")]
    pub geometry: Option<PathBuf>,
    #[arg(long, global = true, env = "VALUEMAP_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Response cache directory; defaults to `<out-dir>/cache`.
    #[arg(long, global = true, env = "VALUEMAP_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Ranks of the two regional MSEs averaged into the threshold, e.g. `3,4`.
    #[arg(long, global = true, value_parser = parse_ranks, env = "VALUEMAP_THRESHOLD_RANKS")]
    pub threshold_ranks: Option<(usize, usize)>,
    #[arg(long, global = true, env = "VALUEMAP_PARALLELISM")]
    pub parallelism: Option<usize>,
    /// Maximum requests per second.
    #[arg(long, global = true, env = "VALUEMAP_RATE_LIMIT")]
    pub rate_limit: Option<f64>,
    /// Stop the batch at the first failed job.
    #[arg(long, global = true)]
    pub fail_fast: bool,
    /// Let downstream stages run on partial upstream output.
    #[arg(long, global = true)]
    pub allow_partial: bool,
}

pub fn parse_ranks(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected A,B, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("rank {a:?}: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("rank {b:?}: {e}"))?;
    if a == 0 || a > b {
        return Err(format!("ranks must satisfy 1 <= A <= B, got {a},{b}"));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendFile {
    pub kind: Option<BackendChoice>,
    pub fixture: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub api_key_env: Option<String>,
    pub parallelism: Option<usize>,
    pub rate_limit: Option<f64>,
    pub max_attempts: Option<u32>,
    pub base_backoff_ms: Option<u64>,
    pub max_backoff_ms: Option<u64>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub catalog: Option<PathBuf>,
    pub loadings: Option<PathBuf>,
    pub model: Option<String>,
    pub entities: Option<Vec<String>>,
    pub benchmark: Option<PathBuf>,
    pub geometry: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub threshold_ranks: Option<[usize; 2]>,
    pub fail_fast: Option<bool>,
    pub allow_partial: Option<bool>,
    #[serde(default)]
    pub backend: BackendFile,
    pub sampling: Option<SamplingParams>,
    pub projection: Option<Projection>,
    pub labels: Option<AlignmentBands>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut cfg.catalog);
        fix(&mut cfg.loadings);
        fix(&mut cfg.benchmark);
        fix(&mut cfg.geometry);
        fix(&mut cfg.out_dir);
        fix(&mut cfg.cache_dir);
        fix(&mut cfg.backend.fixture);
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackendSettings {
    pub kind: BackendChoice,
    /// `None` selects the built-in replay fixture.
    pub fixture: Option<PathBuf>,
    pub endpoint: String,
    pub api_key_env: Option<String>,
    pub parallelism: usize,
    pub rate_limit: Option<f64>,
    pub retry: RetryPolicy,
    pub timeout: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub catalog: Option<PathBuf>,
    pub loadings: Option<PathBuf>,
    pub backend: BackendSettings,
    pub model: String,
    pub sampling: SamplingParams,
    pub entities: Option<Vec<String>>,
    pub benchmark: Option<PathBuf>,
    pub geometry: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub threshold_ranks: (usize, usize),
    pub fail_fast: bool,
    pub allow_partial: bool,
    pub projection: Projection,
    pub labels: AlignmentBands,
}

impl Default for Settings {
    fn default() -> Self {
        Settings::resolve(&GlobalArgs::default(), FileConfig::default())
            .expect("defaults are valid")
    }
}

impl Settings {
    /// Loads the config file named by `args` (if any) and merges.
    pub fn from_args(args: &GlobalArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Self::resolve(args, file)
    }

    pub fn resolve(args: &GlobalArgs, file: FileConfig) -> Result<Self> {
        let defaults = RetryPolicy::default();
        let b = file.backend;
        let kind = args.backend.or(b.kind).unwrap_or(BackendChoice::Replay);
        let api_key_env = args.api_key_env.clone().or(b.api_key_env).or_else(|| {
            (kind == BackendChoice::HttpChat).then(|| DEFAULT_API_KEY_ENV.to_string())
        });
        let backend = BackendSettings {
            kind,
            fixture: args.fixture.clone().or(b.fixture),
            endpoint: args
                .endpoint
                .clone()
                .or(b.endpoint)
                .unwrap_or_else(|| DEFAULT_ENDPOINT.to_string()),
            api_key_env: api_key_env.filter(|s| !s.is_empty()),
            parallelism: args.parallelism.or(b.parallelism).unwrap_or(4),
            rate_limit: args.rate_limit.or(b.rate_limit),
            retry: RetryPolicy {
                max_attempts: b.max_attempts.unwrap_or(defaults.max_attempts),
                base_backoff: b
                    .base_backoff_ms
                    .map_or(defaults.base_backoff, Duration::from_millis),
                max_backoff: b
                    .max_backoff_ms
                    .map_or(defaults.max_backoff, Duration::from_millis),
            },
            timeout: Duration::from_secs(b.timeout_secs.unwrap_or(120)),
        };
        if backend.parallelism == 0 {
            return Err(CliError::Config("parallelism must be at least 1".into()));
        }
        if backend.retry.max_attempts == 0 {
            return Err(CliError::Config("max_attempts must be at least 1".into()));
        }
        let threshold_ranks = match (args.threshold_ranks, file.threshold_ranks) {
            (Some(r), _) => r,
            (None, Some([a, b])) => {
                parse_ranks(&format!("{a},{b}")).map_err(CliError::Config)?
            }
            (None, None) => DEFAULT_THRESHOLD_RANKS,
        };
        Ok(Settings {
            catalog: args.catalog.clone().or(file.catalog),
            loadings: args.loadings.clone().or(file.loadings),
            backend,
            model: args
                .model
                .clone()
                .or(file.model)
                .unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            sampling: file.sampling.unwrap_or_default(),
            entities: args.entities.clone().or(file.entities),
            benchmark: args.benchmark.clone().or(file.benchmark),
            geometry: args.geometry.clone().or(file.geometry),
            out_dir: args
                .out_dir
                .clone()
                .or(file.out_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            cache_dir: args.cache_dir.clone().or(file.cache_dir),
            threshold_ranks,
            fail_fast: args.fail_fast || file.fail_fast.unwrap_or(false),
            allow_partial: args.allow_partial || file.allow_partial.unwrap_or(false),
            projection: file.projection.unwrap_or_default(),
            labels: file.labels.unwrap_or_default(),
        })
    }

    pub fn cache_root(&self) -> PathBuf {
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("cache"))
    }

    /// Short description recorded in the manifest.
    pub fn backend_summary(&self) -> String {
        match self.backend.kind {
            BackendChoice::Replay => match &self.backend.fixture {
                Some(p) => format!("replay:{}", p.display()),
                None => "replay:builtin".to_string(),
            },
            BackendChoice::HttpChat => format!("http-chat:{}", self.backend.endpoint),
        }
    }
}
