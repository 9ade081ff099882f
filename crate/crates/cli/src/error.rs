use std::path::PathBuf;

use thiserror::Error;
use valuemap::catalog::CatalogError;
use valuemap::compare::CompareError;
use valuemap::gateway::GatewayError;
use valuemap::index::IndexError;
use valuemap::viz::GeometryLoadError;

/// Process exit codes. Stable for automation.
pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("catalog has {} violation(s):\n  {}", .0.len(), .0.join("\n  "))]
    Violations(Vec<String>),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("upstream stage `{stage}` has not completed in {dir}")]
    UpstreamMissing { stage: String, dir: PathBuf },
    #[error("upstream stage `{stage}` finished with {failed} failed job(s); rerun it or pass --allow-partial")]
    UpstreamPartial { stage: String, failed: usize },
    #[error("artifact schema version {found} does not match supported version {expected}")]
    SchemaMismatch { found: u32, expected: u32 },
    #[error("{failed} of {total} job(s) failed; see raw_errors.jsonl (first: {first})")]
    JobsFailed {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error(transparent)]
    Geometry(#[from] GeometryLoadError),
    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<CliError>,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            CliError::Stage { .. } => self,
            other => CliError::Stage {
                stage: stage.to_string(),
                source: Box::new(other),
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => EXIT_IO,
            CliError::Catalog(CatalogError::MissingFile(_) | CatalogError::Io { .. }) => EXIT_IO,
            CliError::Compare(CompareError::MissingFile(_)) => EXIT_IO,
            CliError::Geometry(GeometryLoadError::Missing(_)) => EXIT_IO,
            CliError::Gateway(GatewayError::Io(_) | GatewayError::Fixture(_)) => EXIT_IO,
            CliError::Gateway(GatewayError::InvalidConfig(_)) => EXIT_DATA,
            CliError::Gateway(_) | CliError::JobsFailed { .. } => EXIT_BACKEND,
            CliError::Stage { source, .. } => source.exit_code(),
            _ => EXIT_DATA,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
