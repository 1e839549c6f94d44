//! Optional TOML defaults for the numerical routines.
//!
//! ```toml
//! [quadrature]
//! nodes = 256
//! radius = 0.9
//!
//! [airy]
//! fredholm_nodes = 96
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use aztec_dimers::airy::AiryKernelSpec;
use aztec_dimers::kasteleyn::QuadratureSpec;
use serde::Deserialize;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub quadrature: QuadratureConfig,
    pub airy: AiryConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub nodes: Option<usize>,
    pub radius: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AiryConfig {
    pub panel_nodes: Option<usize>,
    pub tail_tol: Option<f64>,
    pub max_cutoff: Option<f64>,
    pub fredholm_nodes: Option<usize>,
    pub fredholm_span: Option<f64>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        let d = QuadratureSpec::default();
        let q = &self.quadrature;
        QuadratureSpec {
            nodes: q.nodes.unwrap_or(d.nodes),
            radius: q.radius.or(d.radius),
            tolerance: q.tolerance.unwrap_or(d.tolerance),
        }
    }

    pub fn airy(&self) -> AiryKernelSpec {
        let d = AiryKernelSpec::default();
        let a = &self.airy;
        AiryKernelSpec {
            panel_nodes: a.panel_nodes.unwrap_or(d.panel_nodes),
            tail_tol: a.tail_tol.unwrap_or(d.tail_tol),
            max_cutoff: a.max_cutoff.unwrap_or(d.max_cutoff),
            fredholm_nodes: a.fredholm_nodes.unwrap_or(d.fredholm_nodes),
            fredholm_span: a.fredholm_span.unwrap_or(d.fredholm_span),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_defaults() {
        let c = Config::parse("[quadrature]\nnodes = 256\n[airy]\nfredholm_nodes = 96\n").unwrap();
        assert_eq!(c.quadrature().nodes, 256);
        assert_eq!(c.quadrature().tolerance, QuadratureSpec::default().tolerance);
        assert_eq!(c.airy().fredholm_nodes, 96);
        assert_eq!(Config::parse("").unwrap(), Config::default());
        assert!(Config::parse("[quadrature]\nnodez = 3\n").is_err());
    }
}
