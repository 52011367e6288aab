//! Run configuration: a single JSON document plus command-line overrides.
//! The fully resolved configuration is echoed into every result document so
//! a run can be reproduced exactly.

use std::collections::BTreeMap;
use std::path::Path;

use clborrow_core::npp::NppConfig;
use clborrow_core::weights::{
    AsymmetricWeight, MultiArmOption, PValueWeight, SymmetricWeight, WeightSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

fn default_level() -> f64 {
    0.95
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Cohort treated as the target population.
    pub target_cohort: Option<String>,
    /// Arm analyzed by the scalar subcommands (fit, npp, ess, binomial
    /// tipping); may be omitted when the dataset has a single arm.
    pub arm: Option<String>,
    /// Control arm of the regression subcommands.
    pub control_arm: Option<String>,
    pub level: f64,
    pub alpha: f64,
    /// Null value; defaults to the target sample mean.
    pub p0: Option<f64>,
    /// Weight function for the scalar and regression paths.
    pub weight: Option<WeightSpec>,
    /// Multi-arm weighting option for the regression path.
    pub multiarm: Option<MultiArmOption>,
    /// Distinct weight function per arm (separate-weights special case).
    pub arm_weights: Option<BTreeMap<String, WeightSpec>>,
    /// Fixed per-arm weights bypassing the weight functions.
    pub fixed_weights: Option<BTreeMap<String, f64>>,
    /// Fixed scalar weight bypassing the weight function (fit/ess/tipping).
    pub fixed_weight: Option<f64>,
    pub sweep: SweepSection,
    pub npp: NppSection,
    pub ess: Option<EssSection>,
    pub tipping: TippingSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            target_cohort: None,
            arm: None,
            control_arm: None,
            level: default_level(),
            alpha: default_alpha(),
            p0: None,
            weight: None,
            multiarm: None,
            arm_weights: None,
            fixed_weights: None,
            fixed_weight: None,
            sweep: SweepSection::default(),
            npp: NppSection::default(),
            ess: None,
            tipping: TippingSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("cannot read config '{}': {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("cannot parse config JSON: {e}")))
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::config(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let Some(p0) = self.p0 {
            if !(0.0..=1.0).contains(&p0) {
                return Err(CliError::config(format!("p0 must lie in [0, 1], got {p0}")));
            }
        }
        if let Some(spec) = &self.weight {
            spec.validate()?;
        }
        if let Some(specs) = &self.arm_weights {
            for spec in specs.values() {
                spec.validate()?;
            }
        }
        if let Some(ws) = &self.fixed_weights {
            for (arm, w) in ws {
                if !(w.is_finite() && (0.0..=1.0).contains(w)) {
                    return Err(CliError::config(format!(
                        "fixed weight for arm '{arm}' must lie in [0, 1], got {w}"
                    )));
                }
            }
        }
        if let Some(w) = self.fixed_weight {
            if !(w.is_finite() && (0.0..=1.0).contains(&w)) {
                return Err(CliError::config(format!(
                    "fixed_weight must lie in [0, 1], got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Sweep settings; the weight-function fields default to the standard study
/// parameterization (band [0, 0.8], w1 thresholds 0.05/0.1, asymmetric
/// thresholds -0.01/0/0.05/0.1, shape 0.01).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub target_n: usize,
    pub target_mean: f64,
    pub points: usize,
    /// Mean-axis settings.
    pub reference_n: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Size-axis settings.
    pub reference_mean: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub w1: SymmetricWeight,
    pub w2: AsymmetricWeight,
    pub w3: PValueWeight,
    pub npp: NppConfig,
    pub p0: Option<f64>,
}

pub fn default_w1() -> SymmetricWeight {
    SymmetricWeight {
        a: 0.0,
        b: 0.8,
        c_low: 0.05,
        c_upp: 0.1,
    }
}

pub fn default_w2() -> AsymmetricWeight {
    AsymmetricWeight {
        a: 0.0,
        b: 0.8,
        g_low: -0.01,
        c_low: 0.0,
        c_upp: 0.05,
        g_upp: 0.1,
        ascending: Default::default(),
    }
}

pub fn default_w3() -> PValueWeight {
    PValueWeight {
        a: 0.0,
        b: 0.8,
        shape_c: 0.01,
        orientation: Default::default(),
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            target_n: 300,
            target_mean: 0.2,
            points: 50,
            reference_n: 800,
            tau_min: -0.2,
            tau_max: 0.2,
            reference_mean: 0.26,
            n_min: 50,
            n_max: 800,
            w1: default_w1(),
            w2: default_w2(),
            w3: default_w3(),
            npp: NppConfig::default(),
            p0: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsSection {
    pub successes: u64,
    pub trials: u64,
}

/// Power-prior settings; counts may come from the config or the dataset.
/// (`deny_unknown_fields` does not combine with `flatten`.)
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct NppSection {
    pub target: Option<CountsSection>,
    pub reference: Option<CountsSection>,
    #[serde(flatten)]
    pub config: NppConfig,
}

/// Direct-variance inputs for the effective-sample-size formula.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EssSection {
    pub n_target: Option<usize>,
    pub var_target_only: Option<f64>,
    pub var_combined: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TippingPath {
    #[default]
    Binomial,
    Glm,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TippingSection {
    pub path: TippingPath,
    /// Grid of borrowing weights; defaults to 0, 0.05, ..., 1.
    pub grid: Option<Vec<f64>>,
    /// Treatment arm whose coefficient the regression path tests.
    pub test_arm: Option<String>,
    /// Weight mode; absent means uniform.
    #[serde(flatten)]
    pub mode: Option<clborrow_core::study::TippingWeightMode>,
}

impl TippingSection {
    pub fn grid(&self) -> Vec<f64> {
        self.grid
            .clone()
            .unwrap_or_else(|| (0..=20).map(|i| i as f64 / 20.0).collect())
    }

    pub fn weight_mode(&self) -> clborrow_core::study::TippingWeightMode {
        self.mode
            .clone()
            .unwrap_or(clborrow_core::study::TippingWeightMode::Uniform)
    }
}
