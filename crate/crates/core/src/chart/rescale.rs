use serde::{Deserialize, Serialize};

use crate::error::{ChartError, GeometryError};
use crate::exec::Execution;
use crate::trajectory::FeatureTrajectory;

use super::{ScaleChart, WarmStart};

/// Points processed sequentially with warm starts; fixed so output does not
/// depend on the thread count.
const CHUNK: usize = 32;

/// A trajectory point that could not be mapped into `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub index: usize,
    pub time: f64,
    pub reason: String,
}

/// The `s` representation of a trajectory plus the points it had to skip.
#[derive(Debug, Clone, PartialEq)]
pub struct RescaledTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub exclusions: Vec<Exclusion>,
}

impl RescaledTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn trajectory(&self) -> Result<FeatureTrajectory, GeometryError> {
        FeatureTrajectory::new(self.times.clone(), self.points.clone())
    }
}

/// Maps every point through the inverse chart. Failures are collected in the
/// exclusion report rather than aborting.
pub fn rescale_trajectory(chart: &ScaleChart, traj: &FeatureTrajectory) -> RescaledTrajectory {
    rescale_trajectory_with(chart, traj, Execution::default())
}

pub fn rescale_trajectory_with(chart: &ScaleChart, traj: &FeatureTrajectory, exec: Execution) -> RescaledTrajectory {
    let n_chunks = traj.len().div_ceil(CHUNK);
    let chunks = exec.map_indexed(n_chunks, |c| {
        let mut out: Vec<Result<Vec<f64>, ChartError>> = Vec::with_capacity(CHUNK);
        let mut warm: Option<WarmStart> = None;
        for i in c * CHUNK..((c + 1) * CHUNK).min(traj.len()) {
            let x = traj.point(i);
            let mut result = chart.inverse_map_warm(x, warm.as_ref());
            if result.is_err() && warm.is_some() {
                result = chart.inverse_map_warm(x, None);
            }
            warm = result.as_ref().ok().cloned();
            out.push(result.map(|w| w.s));
        }
        out
    });
    let mut rescaled = RescaledTrajectory { times: Vec::new(), points: Vec::new(), exclusions: Vec::new() };
    for (i, result) in chunks.into_iter().flatten().enumerate() {
        let time = traj.times()[i];
        match result {
            Ok(s) => {
                rescaled.times.push(time);
                rescaled.points.push(s);
            }
            Err(e) => rescaled.exclusions.push(Exclusion { index: i, time, reason: e.to_string() }),
        }
    }
    rescaled
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::tests::{flat_chart, polar_chart};

    #[test]
    fn reference_point_maps_to_zero() {
        let chart = polar_chart();
        let x0 = chart.frame().x0.clone();
        let traj = FeatureTrajectory::new(vec![0.0, 1.0, 2.0], vec![x0; 3]).unwrap();
        let r = rescale_trajectory(&chart, &traj);
        assert!(r.exclusions.is_empty());
        assert!(r.points.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn flat_chart_subtracts_reference_and_reports_exclusions() {
        let chart = flat_chart();
        let pts = vec![vec![1.0, 1.0], vec![9.0, 0.0], vec![-2.0, 3.0], vec![0.5, -0.5]];
        let traj = FeatureTrajectory::new(vec![0.0, 0.1, 0.2, 0.3], pts.clone()).unwrap();
        let r = rescale_trajectory(&chart, &traj);
        assert_eq!(r.times, vec![0.0, 0.2, 0.3]);
        assert_eq!(r.exclusions.len(), 1);
        assert_eq!(r.exclusions[0].index, 1);
        for (s, x) in r.points.iter().zip([&pts[0], &pts[2], &pts[3]]) {
            assert!((s[0] - (x[0] - 0.5)).abs() < 1e-9 && (s[1] - (x[1] + 0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn segment_of_73_frames() {
        let chart = polar_chart();
        let times: Vec<f64> = (0..200).map(|i| 0.002 + 0.004 * i as f64).collect();
        let pts = times.iter().map(|t| vec![1.0 + 0.5 * (t * 3.0).sin(), 0.3 * (t * 5.0).cos()]).collect();
        let traj = FeatureTrajectory::new(times, pts).unwrap();
        let seg = traj.segment(0.1, 0.1 + 0.292 - 1e-9).unwrap();
        assert_eq!(seg.len(), 73);
        let r = rescale_trajectory(&chart, &seg);
        assert_eq!(r.len() + r.exclusions.len(), 73);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let chart = polar_chart();
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let pts = times.iter().map(|t| vec![1.2 + 0.4 * (t * 2.0).sin(), 0.5 * (t * 3.0).sin()]).collect();
        let traj = FeatureTrajectory::new(times, pts).unwrap();
        assert_eq!(
            rescale_trajectory_with(&chart, &traj, Execution::Sequential),
            rescale_trajectory_with(&chart, &traj, Execution::Parallel)
        );
    }
}
