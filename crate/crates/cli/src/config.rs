//! Run configuration: TOML file first, command-line flags on top.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelChoice {
    Tcr,
    La,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MasterChoice {
    Scan,
    Milp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// File path or `builtin:NAME`.
    pub case: String,
    pub model: ModelChoice,
    pub k: usize,
    pub t: usize,
    pub include_circle: bool,
    /// Defaults by uncertainty dimension when absent.
    pub delta: Option<f64>,
    /// Fixed big-M for every row; row-wise bounds when absent.
    pub big_m: Option<f64>,
    pub margin: f64,
    pub max_iter: usize,
    pub master: MasterChoice,
    /// Sweep grid spacing in MW.
    pub resolution_mw: f64,
    pub tol_exact: f64,
    /// Cone depth of the labeling oracle.
    pub oracle_k: usize,
    pub grid_cap: usize,
    /// Inclusive range `A..B` of cone depths for the k-sweep.
    pub sweep_k: Option<String>,
    pub scale_rx: Option<Vec<f64>>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            case: "builtin:ieee33".into(),
            model: ModelChoice::Tcr,
            k: 6,
            t: 4,
            include_circle: true,
            delta: None,
            big_m: None,
            margin: 0.05,
            max_iter: 500,
            master: MasterChoice::Scan,
            resolution_mw: 0.03,
            tol_exact: 1e-6,
            oracle_k: 14,
            grid_cap: 250_000,
            sweep_k: None,
            scale_rx: None,
            seed: 7,
            workers: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reproducibility header: the full config as `#` comment lines.
    pub fn header(&self) -> String {
        let mut s = format!("# dregion {}\n", env!("CARGO_PKG_VERSION"));
        for line in self.to_toml().lines() {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }

    pub fn k_range(&self) -> Result<Option<(usize, usize)>, String> {
        let Some(spec) = &self.sweep_k else { return Ok(None) };
        let (a, b) = spec.split_once("..").ok_or_else(|| format!("sweep_k must look like A..B, got {spec:?}"))?;
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("sweep_k bound {x:?}: {e}"));
        let (a, b) = (parse(a)?, parse(b)?);
        if a < 2 || b < a {
            return Err(format!("sweep_k needs 2 ≤ A ≤ B, got {a}..{b}"));
        }
        Ok(Some((a, b)))
    }

    /// Checks every numeric field before any computation.
    pub fn validate(&self) -> Result<(), String> {
        if self.k < 2 {
            return Err(format!("k must be at least 2, got {}", self.k));
        }
        if self.t < 1 {
            return Err("t must be at least 1".into());
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(format!("delta must be positive, got {d}"));
            }
        }
        if let Some(m) = self.big_m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(format!("big_m must be positive and finite, got {m}"));
            }
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(format!("margin must be ≥ 0, got {}", self.margin));
        }
        if self.max_iter == 0 {
            return Err("max_iter must be positive".into());
        }
        if !(self.resolution_mw > 0.0) {
            return Err(format!("resolution_mw must be positive, got {}", self.resolution_mw));
        }
        if !(self.tol_exact > 0.0) {
            return Err("tol_exact must be positive".into());
        }
        if let Some(s) = &self.scale_rx {
            if s.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
                return Err("scale_rx factors must be positive".into());
            }
        }
        if self.workers == Some(0) {
            return Err("workers must be positive".into());
        }
        self.k_range()?;
        Ok(())
    }
}
