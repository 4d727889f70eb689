//! Library side of the `dregion` binary: configuration, case loading,
//! commands and their artifacts.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::{Path, PathBuf};

use dispatch_region::adcg::AdcgError;
use dispatch_region::builder::BuildError;
use dispatch_region::netmodel::{builtin, import_matpower, parse_case, CaseError, NetworkCase};
use dispatch_region::oracle::OracleError;

pub use config::{MasterChoice, ModelChoice, RunConfig};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "DREGION_OUT";

pub mod exit {
    pub const OK: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const IO: i32 = 2;
    pub const SOLVER: i32 = 3;
    pub const UNCONVERGED: i32 = 4;
}

/// Failure with its exit code; printed to stderr as one JSON object.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        Self { code, kind, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(exit::VALIDATION, "validation", message)
    }

    pub fn io(path: &Path, err: impl fmt::Display) -> Self {
        Self::new(exit::IO, "io", format!("{}: {err}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind, "code": self.code, "message": self.message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<AdcgError> for CliError {
    fn from(e: AdcgError) -> Self {
        match e {
            AdcgError::EmptyUncertainty
            | AdcgError::Config(_)
            | AdcgError::Dimension { .. }
            | AdcgError::TooLarge(_) => Self::validation(e.to_string()),
            _ => Self::new(exit::SOLVER, "solver", e.to_string()),
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Solver(_) => Self::new(exit::SOLVER, "solver", e.to_string()),
            _ => Self::validation(e.to_string()),
        }
    }
}

fn case_error(path: &Path, e: CaseError) -> CliError {
    CliError::validation(format!("{}: {e}", path.display()))
}

/// Loads `builtin:NAME`, a native `.dnet` file, or a MATPOWER `.m` file
/// with an optional `.rpg` sidecar next to it.
pub fn load_case(spec: &str) -> Result<NetworkCase, CliError> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return builtin(name).ok_or_else(|| {
            CliError::validation(format!("unknown builtin case {name:?} (ieee33, ieee33-3rpg, feeder141)"))
        });
    }
    let path = PathBuf::from(spec);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    if path.extension().is_some_and(|e| e == "m") {
        let side = path.with_extension("rpg");
        let rpg = if side.exists() { std::fs::read_to_string(&side).map_err(|e| CliError::io(&side, e))? } else { String::new() };
        import_matpower(&text, &rpg).map_err(|e| case_error(&path, e))
    } else {
        parse_case(&text).map_err(|e| case_error(&path, e))
    }
}

/// Output directory: config, then the environment, then `dregion-out`.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("dregion-out"))
}
