//! Scenario configuration: a single strict JSON document.

use serde::Deserialize;
use shuntlab_core::{
    tune_series_rl, tune_series_rl_linearized, FreqGrid, PiezoModel, ShuntParams, SweepConfig,
    SweepLaw,
};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub tuning: Option<TuningSpec>,
    #[serde(default)]
    pub delay: Option<DelaySpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub substeps: Option<usize>,
    #[serde(default)]
    pub pinned_index: Option<usize>,
    #[serde(default)]
    pub tau_max: Option<f64>,
    #[serde(default)]
    pub dtau: Option<f64>,
    #[serde(default)]
    pub emit_plots: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ModelSpec {
    Hertz { f_sc: f64, f_oc: f64, cp: f64 },
    Frequencies { omega_sc: f64, omega_oc: f64, cp: f64 },
    Modal { omega_sc: f64, kc: f64, cp: f64 },
    Physical { mass: f64, k_oc: f64, theta_p: f64, cp: f64 },
    Normalized { kc: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum TuningSpec {
    Optimal,
    Linearized,
    Explicit { inductance: f64, resistance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayVariantSpec {
    None,
    Pure,
    Zoh,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub variant: DelayVariantSpec,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub taus: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub f_start: f64,
    pub f_end: f64,
    pub duration: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub law: SweepLawSpec,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepLawSpec {
    #[default]
    Linear,
    Logarithmic,
}

impl Scenario {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let scenario: Scenario = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid scenario {}: {e}", path.display())))?;
        if scenario.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                scenario.schema_version
            )));
        }
        if let Some(d) = &scenario.delay {
            if d.tau.is_some() && d.taus.is_some() {
                return Err(CliError::Config("delay: give tau or taus, not both".into()));
            }
        }
        Ok(scenario)
    }

    pub fn model(&self) -> Result<PiezoModel, CliError> {
        let spec = self
            .model
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a model".into()))?;
        let model = match *spec {
            ModelSpec::Hertz { f_sc, f_oc, cp } => PiezoModel::from_hertz(f_sc, f_oc, cp),
            ModelSpec::Frequencies { omega_sc, omega_oc, cp } => {
                PiezoModel::from_frequencies(omega_sc, omega_oc, cp)
            }
            ModelSpec::Modal { omega_sc, kc, cp } => PiezoModel::from_modal(omega_sc, kc, cp),
            ModelSpec::Physical { mass, k_oc, theta_p, cp } => {
                PiezoModel::from_physical(mass, k_oc, theta_p, cp)
            }
            ModelSpec::Normalized { kc } => PiezoModel::normalized(kc),
        };
        model.map_err(|e| CliError::Config(format!("invalid model: {e}")))
    }

    pub fn shunt(&self, model: &PiezoModel) -> Result<ShuntParams, CliError> {
        match self.tuning.as_ref().unwrap_or(&TuningSpec::Optimal) {
            TuningSpec::Optimal => tune_series_rl(model).map_err(CliError::from),
            TuningSpec::Linearized => Ok(tune_series_rl_linearized(model)),
            TuningSpec::Explicit { inductance, resistance } => {
                ShuntParams::from_components(*inductance, *resistance, model)
                    .map_err(|e| CliError::Config(format!("invalid explicit tuning: {e}")))
            }
        }
    }

    /// Delay values requested by the scenario (one or a fan-out list).
    pub fn taus(&self) -> Result<(DelayVariantSpec, Vec<f64>), CliError> {
        let d = self
            .delay
            .as_ref()
            .ok_or_else(|| CliError::Config("this command needs a delay specification".into()))?;
        let taus = match (&d.tau, &d.taus) {
            (Some(t), None) => vec![*t],
            (None, Some(ts)) if !ts.is_empty() => ts.clone(),
            (None, None) if d.variant == DelayVariantSpec::None => vec![0.0],
            _ => return Err(CliError::Config("delay needs tau or a non-empty taus list".into())),
        };
        if taus.iter().any(|t| *t < 0.0 || !t.is_finite()) {
            return Err(CliError::Config("delay values must be non-negative".into()));
        }
        Ok((d.variant, taus))
    }

    pub fn grid_or(&self, default: FreqGrid) -> FreqGrid {
        match &self.grid {
            Some(g) => FreqGrid {
                start: g.start,
                stop: g.stop,
                points: g.points,
                log_spaced: matches!(g.spacing, Spacing::Log),
            },
            None => default,
        }
    }

    pub fn sweep_or_default(&self, model: &PiezoModel) -> SweepConfig {
        match &self.sweep {
            Some(s) => SweepConfig {
                f_start: s.f_start,
                f_end: s.f_end,
                duration: s.duration,
                amplitude: s.amplitude,
                law: match s.law {
                    SweepLawSpec::Linear => SweepLaw::Linear,
                    SweepLawSpec::Logarithmic => SweepLaw::Logarithmic,
                },
            },
            None => SweepConfig::default_for(model),
        }
    }
}
