//! Experiment configuration: one TOML file per run.
//!
//! ```toml
//! seed = 7
//!
//! [flow]
//! base = { kind = "rotation" }
//! roof = { kind = "constant", value = 1.0 }
//!
//! [cocycle]
//! kind = "coboundary"
//! potential = { kind = "fiber_top" }
//!
//! [point]          # optional; drawn from μ with the seed when absent
//! y = 0.3
//! tau = 0.45
//!
//! [run]
//! horizon = 1000.0
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use cocycle_core::config::{from_toml, CocycleSpec, FlowSpec};
use cocycle_core::density::{PhiFunction, PhiKind, PhiVariant, ScanConfig};
use cocycle_core::{Error, FiberPoint, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExceptionalMode {
    None,
    Theorem1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSpec {
    /// φ(x) = x^p: increasing for p > 0 (thresholds n/φ(n)), convex blowup
    /// for p < 0 (thresholds n/φ(f/n)).
    Power { p: f64 },
    /// φ(x) = ln(x + 2), with thresholds n/φ(n).
    LogShift,
}

impl PhiSpec {
    pub fn build(&self) -> Result<(PhiFunction, PhiVariant)> {
        let phi = match self {
            PhiSpec::Power { p } => PhiFunction::power(*p).map_err(|e| Error::Config(e.to_string()))?,
            PhiSpec::LogShift => PhiFunction::log_shift(),
        };
        let variant = match phi.kind() {
            PhiKind::Increasing => PhiVariant::NOverPhi,
            PhiKind::ConvexBlowup => PhiVariant::FRatio,
        };
        Ok((phi, variant))
    }
}

/// Estimator settings. Every field is optional; each subcommand picks its
/// own defaults for the ones left out.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    /// Largest horizon T.
    pub horizon: Option<f64>,
    /// Explicit horizon grid; otherwise doubling from 100 up to T.
    pub horizons: Option<Vec<f64>>,
    pub band_limit: Option<f64>,
    pub exceptional: Option<ExceptionalMode>,
    /// Scale s ∈ (0, 1] on the tail bounds 2⁻ˡ.
    pub scale: Option<f64>,
    pub scan: Option<ScanConfig>,
    pub phi: Option<PhiSpec>,
    /// Return threshold for `atkinson`.
    pub eps: Option<f64>,
    /// Spacings for the lattice limits in `birkhoff`.
    pub lattice: Option<Vec<f64>>,
    /// Sample times for `simulate`.
    pub times: Option<Vec<f64>>,
    /// Monte-Carlo sample size (space means, random probe times).
    pub samples: Option<usize>,
    /// y cutoffs for the Example-2 sup-integral estimate.
    pub cutoffs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub flow: FlowSpec,
    pub cocycle: Option<CocycleSpec>,
    pub point: Option<FiberPoint>,
    pub run: RunSpec,
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = from_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        if let Some(h) = r.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("horizon must be positive and finite (got {h})")));
            }
        }
        if let Some(b) = r.band_limit {
            if !(b > 0.0) {
                return Err(Error::Config(format!("band_limit must be positive (got {b})")));
            }
        }
        if let Some(s) = &r.scan {
            s.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(l) = &r.lattice {
            if l.is_empty() || l.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                return Err(Error::Config("lattice spacings must be positive".into()));
            }
        }
        if let Some(c) = &r.cutoffs {
            if c.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
                return Err(Error::Config("cutoffs must lie in (0, 1)".into()));
            }
        }
        if r.samples == Some(0) {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_a_valid_config() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg.seed, 0);
        assert!(cfg.cocycle.is_none());
    }

    #[test]
    fn typos_are_rejected() {
        let err = ExperimentConfig::parse("[run]\nhorizonn = 5.0\n").unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("horizonn"));
    }

    #[test]
    fn unknown_cocycle_kind_lists_valid_kinds() {
        let err = ExperimentConfig::parse("[cocycle]\nkind = \"brownian\"\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("integral") && msg.contains("random_sl2"), "{msg}");
    }

    #[test]
    fn bad_values_are_validation_errors() {
        assert!(ExperimentConfig::parse("[run]\nhorizon = -1.0\n").unwrap_err().is_validation());
        assert!(ExperimentConfig::parse("[run]\ncutoffs = [2.0]\n").unwrap_err().is_validation());
    }
}
