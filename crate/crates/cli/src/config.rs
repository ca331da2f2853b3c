use std::path::Path;

use serde::{Deserialize, Serialize};

use geoscale::audio::{CepstraConfig, ChannelFilterSpec};
use geoscale::chart::SolverTolerances;
use geoscale::geometry::{GridSpec, MetricEstimation};
use geoscale::harness::{GridChoice, ReferenceTimes};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoKeyword {
    #[serde(rename = "auto")]
    Auto,
}

/// `"auto"` or an explicit grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSetting {
    Auto(AutoKeyword),
    Explicit(GridSpec),
}

/// Settings shared by every command. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub cepstra: CepstraConfig,
    pub channel_filter: ChannelFilterSpec,
    pub pca_components: usize,
    pub grid: GridSetting,
    /// Node counts per axis for the automatic grid.
    pub grid_counts: Vec<usize>,
    /// Central data mass the automatic grid covers on each axis.
    pub mass_fraction: f64,
    pub estimation: MetricEstimation,
    pub reference: Option<ReferenceTimes>,
    /// Newton and self-test settings, including the self-test seed.
    pub solver: SolverTolerances,
    /// Only the last `history_window_s` seconds of the trajectory feed the
    /// metric; the whole trajectory when absent.
    pub history_window_s: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            cepstra: CepstraConfig::default(),
            channel_filter: ChannelFilterSpec::default(),
            pca_components: 2,
            grid: GridSetting::Auto(AutoKeyword::Auto),
            grid_counts: vec![7, 9],
            mass_fraction: 0.95,
            estimation: MetricEstimation::default(),
            reference: None,
            solver: SolverTolerances::default(),
            history_window_s: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let config = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, &e))?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::validation(format!("config: {e}")).with("path", p.display().to_string())
                })?
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.cepstra.validate().map_err(|e| CliError::validation(format!("config.cepstra: {e}")))?;
        if self.pca_components == 0 || self.pca_components > self.cepstra.n_cepstra {
            return Err(CliError::validation("config.pca_components must be in 1..=n_cepstra"));
        }
        if self.grid_counts.iter().any(|&c| c < 2) || self.grid_counts.is_empty() {
            return Err(CliError::validation("config.grid_counts needs at least 2 nodes per axis"));
        }
        if !(self.mass_fraction > 0.0 && self.mass_fraction <= 1.0) {
            return Err(CliError::validation("config.mass_fraction must be in (0, 1]"));
        }
        if let GridSetting::Explicit(g) = &self.grid {
            g.validate().map_err(|e| CliError::validation(format!("config.grid: {e}")))?;
        }
        if let Some(r) = &self.reference {
            if r.vector_times.is_empty() || !r.t0.is_finite() || r.vector_times.iter().any(|t| !t.is_finite()) {
                return Err(CliError::validation("config.reference needs finite t0 and vector_times"));
            }
        }
        if self.history_window_s.is_some_and(|w| !(w > 0.0)) {
            return Err(CliError::validation("config.history_window_s must be positive"));
        }
        let s = &self.solver;
        if !(s.step_fraction > 0.0 && s.jacobian_step > 0.0 && s.max_iterations > 0 && s.round_trip_tol > 0.0) {
            return Err(CliError::validation("config.solver step sizes, tolerances and iteration cap must be positive"));
        }
        Ok(())
    }

    pub fn grid_choice(&self) -> GridChoice {
        match &self.grid {
            GridSetting::Auto(_) => GridChoice::Auto { counts: self.grid_counts.clone(), mass_fraction: self.mass_fraction },
            GridSetting::Explicit(g) => GridChoice::Explicit(g.clone()),
        }
    }
}
