//! Scenario configuration: flat key-value TOML with one section per concern.
//! Unknown keys are rejected so typos fail loudly.

use serde::Deserialize;
use twap_equilibrium::{
    BuiltinKappa, EquilibriumSelector, Grid, ModelParams, TargetMoments, TargetRatio,
    TimeFunction,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    pub penalty: Option<PenaltySection>,
    #[serde(default)]
    pub target_ratio: Option<TargetRatioSection>,
    #[serde(default)]
    pub selector: Option<SelectorSection>,
    #[serde(default)]
    pub simulation: Option<SimulationSection>,
    #[serde(default)]
    pub vwap: Option<VwapSection>,
    #[serde(default)]
    pub exp: Option<ExpSection>,
    #[serde(default)]
    pub calibrate: Option<CalibrateSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub investors: usize,
    pub w0: f64,
    pub alpha: f64,
    pub pi: f64,
    pub eta: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub d0: f64,
    pub targets: Vec<f64>,
    pub initial_holdings: Vec<f64>,
    #[serde(default)]
    pub target_moments: Option<MomentsSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsSection {
    pub individual_sq: f64,
    pub aggregate_sq: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltySection {
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRatioSection {
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorSection {
    pub kind: String,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub paths: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VwapSection {
    pub rho: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpSection {
    pub tau: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub lambda_csv: String,
}

/// Validation failure with a stable machine-readable name.
#[derive(Debug)]
pub struct ConfigError {
    pub name: &'static str,
    pub detail: String,
}

impl ConfigError {
    fn new(name: &'static str, detail: impl Into<String>) -> Self {
        ConfigError { name, detail: detail.into() }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::new("InvalidConfig", e.to_string()))
    }

    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let m = &self.model;
        let params = ModelParams {
            m: m.investors,
            w0: m.w0,
            alpha: m.alpha,
            pi: m.pi,
            eta: m.eta,
            phi0: m.phi0,
            phi1: m.phi1,
            d0: m.d0,
            targets: m.targets.clone(),
            initial_holdings: m.initial_holdings.clone(),
            target_moments: m.target_moments.as_ref().map(|t| TargetMoments {
                individual_sq: t.individual_sq,
                aggregate_sq: t.aggregate_sq,
            }),
        };
        params
            .validate()
            .map_err(|e| ConfigError::new("InvalidParams", e.to_string()))?;
        Ok(params)
    }

    pub fn kappa(&self, grid: &Grid) -> Result<TimeFunction, ConfigError> {
        let section = self
            .penalty
            .as_ref()
            .ok_or_else(|| ConfigError::new("MissingPenalty", "config has no [penalty] section"))?;
        match (&section.builtin, &section.values) {
            (Some(id), None) => {
                let id: BuiltinKappa = id
                    .parse()
                    .map_err(|e| ConfigError::new("InvalidConfig", format!("{e}")))?;
                Ok(twap_equilibrium::builtin_kappa(id, grid))
            }
            (None, Some(values)) => {
                if values.len() != grid.n() + 1 {
                    return Err(ConfigError::new(
                        "InvalidConfig",
                        format!(
                            "penalty.values needs {} entries for grid {}, got {}",
                            grid.n() + 1,
                            grid.n(),
                            values.len()
                        ),
                    ));
                }
                if values.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
                    return Err(ConfigError::new(
                        "InvalidConfig",
                        "penalty severity must be strictly positive and finite",
                    ));
                }
                Ok(TimeFunction::from_values(values.clone()))
            }
            _ => Err(ConfigError::new(
                "InvalidConfig",
                "penalty needs exactly one of `builtin` or `values`",
            )),
        }
    }

    pub fn gamma(&self, grid: &Grid) -> Result<TimeFunction, ConfigError> {
        match &self.target_ratio {
            None => Ok(twap_equilibrium::builtin_gamma(TargetRatio::FrontLoaded, grid)),
            Some(sec) => match (&sec.builtin, &sec.values) {
                (Some(id), None) => {
                    let ratio = match id.as_str() {
                        "uniform" => TargetRatio::Uniform,
                        "front_loaded" => TargetRatio::FrontLoaded,
                        other => {
                            return Err(ConfigError::new(
                                "InvalidConfig",
                                format!("unknown target ratio '{other}'"),
                            ))
                        }
                    };
                    Ok(twap_equilibrium::builtin_gamma(ratio, grid))
                }
                (None, Some(values)) => {
                    if values.len() != grid.n() + 1 {
                        return Err(ConfigError::new(
                            "InvalidConfig",
                            "target_ratio.values length does not match the grid",
                        ));
                    }
                    if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                        return Err(ConfigError::new(
                            "InvalidConfig",
                            "target ratio must be nonnegative",
                        ));
                    }
                    Ok(TimeFunction::from_values(values.clone()))
                }
                _ => Err(ConfigError::new(
                    "InvalidConfig",
                    "target_ratio needs exactly one of `builtin` or `values`",
                )),
            },
        }
    }

    pub fn selector(&self, grid: &Grid) -> Result<EquilibriumSelector, ConfigError> {
        let sec = self.selector.as_ref().ok_or_else(|| {
            ConfigError::new("InvalidConfig", "config has no [selector] section")
        })?;
        match sec.kind.as_str() {
            "radner" => Ok(EquilibriumSelector::Radner),
            "vayanos" => Ok(EquilibriumSelector::Vayanos),
            "welfare" => Ok(EquilibriumSelector::WelfareMax),
            "custom" => {
                let values = sec.values.as_ref().ok_or_else(|| {
                    ConfigError::new("InvalidConfig", "custom selector needs `values`")
                })?;
                if values.len() != grid.n() + 1 {
                    return Err(ConfigError::new(
                        "InvalidConfig",
                        "selector.values length does not match the grid",
                    ));
                }
                Ok(EquilibriumSelector::Custom(TimeFunction::from_values(values.clone())))
            }
            other => Err(ConfigError::new(
                "InvalidConfig",
                format!("unknown selector kind '{other}'"),
            )),
        }
    }

    pub fn grid_size(&self, override_n: Option<usize>) -> usize {
        override_n
            .or(self.simulation.as_ref().and_then(|s| s.grid))
            .unwrap_or(1000)
    }

    pub fn paths(&self, override_p: Option<usize>) -> usize {
        override_p
            .or(self.simulation.as_ref().and_then(|s| s.paths))
            .unwrap_or(10_000)
    }

    pub fn seed(&self, override_s: Option<u64>) -> u64 {
        override_s
            .or(self.simulation.as_ref().and_then(|s| s.seed))
            .unwrap_or(1)
    }
}
