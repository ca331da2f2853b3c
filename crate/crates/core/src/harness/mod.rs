//! Synthetic trajectories, invertible transforms and the comparison of `x`
//! and `s` representations under them.

mod compare;
mod synth;
mod transform;

use serde::{Deserialize, Serialize};

use crate::chart::{rescale_trajectory_with, select_reference, ScaleChart, SolverTolerances};
use crate::error::HarnessError;
use crate::exec::Execution;
use crate::geometry::{estimate_metric_grid_with, estimate_velocities, GridSpec, MetricEstimation};
use crate::trajectory::FeatureTrajectory;

pub use compare::{compare_representations, ComparisonReport};
pub use synth::{generate_synthetic, SyntheticKind, SyntheticSpec};
pub use transform::{
    apply_transform, invert_transform, AxisWarp, Transform, TransformSpec, MAX_JACOBIAN_CONDITION,
};

/// Reference point time and one vector time per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceTimes {
    pub t0: f64,
    pub vector_times: Vec<f64>,
}

/// How a metric grid is laid over a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridChoice {
    /// Box over the central `mass_fraction` of the data per axis.
    Auto { counts: Vec<usize>, mass_fraction: f64 },
    Explicit(GridSpec),
}

impl GridChoice {
    pub fn resolve(&self, traj: &FeatureTrajectory) -> Result<GridSpec, HarnessError> {
        Ok(match self {
            GridChoice::Auto { counts, mass_fraction } => GridSpec::fit_to_mass(traj, counts, *mass_fraction)?,
            GridChoice::Explicit(g) => {
                g.validate()?;
                g.clone()
            }
        })
    }
}

/// Chart-building settings shared by both sides of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartRecipe {
    pub grid: GridChoice,
    #[serde(default)]
    pub estimation: MetricEstimation,
    #[serde(default)]
    pub tolerances: SolverTolerances,
    /// Run the round-trip self-test before use.
    #[serde(default = "yes")]
    pub self_test: bool,
}

fn yes() -> bool {
    true
}

/// Estimates the metric on `traj`, reads the frame at `reference`, and
/// optionally self-tests the chart.
pub fn build_chart(
    traj: &FeatureTrajectory,
    reference: &ReferenceTimes,
    recipe: &ChartRecipe,
    exec: Execution,
) -> Result<ScaleChart, HarnessError> {
    let vel = estimate_velocities(traj)?;
    let grid = recipe.grid.resolve(traj)?;
    let field = estimate_metric_grid_with(traj, &vel, &grid, &recipe.estimation, exec)?;
    let frame = select_reference(traj, &vel, reference.t0, &reference.vector_times)?;
    let order = (0..traj.dim()).collect();
    let chart = ScaleChart::with_options(field, frame, order, recipe.tolerances.clone())?;
    Ok(if recipe.self_test { chart.calibrate()? } else { chart })
}

/// One invariance run: a transform, the shared reference times, how each
/// chart is built, and optionally the time window to rescale and compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceExperiment {
    pub transform: TransformSpec,
    pub reference: ReferenceTimes,
    /// Chart recipe for the original trajectory.
    pub chart_x: ChartRecipe,
    /// Chart recipe for the transformed trajectory; defaults to `chart_x`.
    #[serde(default)]
    pub chart_y: Option<ChartRecipe>,
    /// `[start, end]` in seconds; the whole trajectory when absent. Metrics
    /// are always estimated from the whole trajectory.
    #[serde(default)]
    pub segment: Option<(f64, f64)>,
}

/// Raw and rescaled comparisons from one invariance run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceReport {
    pub report_x: ComparisonReport,
    pub report_s: ComparisonReport,
    /// Points each chart could not rescale.
    pub rescale_exclusions: (usize, usize),
}

/// Builds one chart on `traj` and one on its image under the transform, with
/// the same reference times, and compares both the raw and the rescaled
/// trajectories.
pub fn run_invariance_experiment(
    traj: &FeatureTrajectory,
    experiment: &InvarianceExperiment,
) -> Result<InvarianceReport, HarnessError> {
    run_invariance_experiment_with(traj, experiment, Execution::default())
}

pub fn run_invariance_experiment_with(
    traj: &FeatureTrajectory,
    experiment: &InvarianceExperiment,
    exec: Execution,
) -> Result<InvarianceReport, HarnessError> {
    let image = apply_transform(traj, &experiment.transform)?;
    let recipe_y = experiment.chart_y.as_ref().unwrap_or(&experiment.chart_x);
    let chart_x = build_chart(traj, &experiment.reference, &experiment.chart_x, exec)?;
    let chart_y = build_chart(&image, &experiment.reference, recipe_y, exec)?;
    let (a, b) = match experiment.segment {
        Some((start, end)) => (traj.segment(start, end)?, image.segment(start, end)?),
        None => (traj.clone(), image),
    };
    let s_a = rescale_trajectory_with(&chart_x, &a, exec);
    let s_b = rescale_trajectory_with(&chart_y, &b, exec);
    Ok(InvarianceReport {
        report_x: compare_representations(&a, &b)?,
        report_s: compare_representations(&s_a.trajectory()?, &s_b.trajectory()?)?,
        rescale_exclusions: (s_a.exclusions.len(), s_b.exclusions.len()),
    })
}
