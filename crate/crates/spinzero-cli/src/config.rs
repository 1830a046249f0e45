//! Suite configuration files (TOML).
//!
//! ```toml
//! suite = "sphere-zero-mode"
//! dims = [3]
//! resolutions = [64]
//! seed = 7
//! out = "sphere.jsonl"
//! stencil = "fourth"          # or "second" (debug control)
//!
//! [chart]                     # optional, see `spinzero::io::ChartConfig`
//! kind = "sphere-stereographic"
//! n = 3
//! resolution = 64
//! r_max = 3.0
//!
//! [tolerances]                # optional overrides by key
//! algebra = 1e-12
//! ```
//!
//! Unknown keys are rejected. Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use spinzero::chart::FdOrder;
use spinzero::io::ChartConfig;
use spinzero::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stencil {
    Second,
    #[default]
    Fourth,
}

impl Stencil {
    pub fn order(self) -> FdOrder {
        match self {
            Stencil::Second => FdOrder::Second,
            Stencil::Fourth => FdOrder::Fourth,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(default)]
    pub suite: Option<String>,
    #[serde(default)]
    pub chart: Option<ChartConfig>,
    #[serde(default)]
    pub dims: Option<Vec<usize>>,
    #[serde(default)]
    pub resolutions: Option<Vec<usize>>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub stencil: Stencil,
}

impl SuiteConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: SuiteConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = &self.dims {
            if d.is_empty() || d.iter().any(|&n| n < 2) {
                return Err(Error::Config(format!("dims must be nonempty and >= 2, got {d:?}")));
            }
        }
        if let Some(r) = &self.resolutions {
            if r.is_empty() || r.iter().any(|&v| v < 4) {
                return Err(Error::Config(format!("resolutions must be nonempty and >= 4, got {r:?}")));
            }
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Config(format!("tolerance {k} = {v} is not positive")));
        }
        if let Some(c) = &self.chart {
            if c.n < 2 || c.resolution < 4 {
                return Err(Error::Config("chart needs n >= 2 and resolution >= 4".into()));
            }
        }
        Ok(())
    }

    /// Dimensions, falling back to the chart and then to `default`.
    pub fn dims_or(&self, default: &[usize]) -> Vec<usize> {
        self.dims.clone().or_else(|| self.chart.as_ref().map(|c| vec![c.n])).unwrap_or_else(|| default.to_vec())
    }

    pub fn resolutions_or(&self, default: &[usize]) -> Vec<usize> {
        self.resolutions.clone().or_else(|| self.chart.as_ref().map(|c| vec![c.resolution])).unwrap_or_else(|| default.to_vec())
    }
}
