//! End-to-end invariance of the rescaled representation.

use geoscale::chart::{rescale_trajectory, suggest_reference_times};
use geoscale::geometry::{estimate_metric_grid, estimate_velocities, GridSpec, MetricEstimation};
use geoscale::harness::{
    build_chart, compare_representations, generate_synthetic, ChartRecipe, GridChoice, ReferenceTimes, SyntheticKind,
    SyntheticSpec,
};
use geoscale::{Execution, FeatureTrajectory};

fn walk(seed: u64) -> FeatureTrajectory {
    let spec = SyntheticSpec {
        kind: SyntheticKind::NoiseWalk,
        duration_s: 400.0,
        sample_rate_hz: 50.0,
        lo: vec![-1.0, -1.0],
        hi: vec![1.0, 1.0],
        seed,
    };
    generate_synthetic(&spec).unwrap()
}

fn recipe(grid: GridSpec) -> ChartRecipe {
    ChartRecipe {
        grid: GridChoice::Explicit(grid),
        estimation: MetricEstimation::default(),
        tolerances: Default::default(),
        self_test: true,
    }
}

fn reference_for(traj: &FeatureTrajectory, grid: &GridSpec) -> ReferenceTimes {
    let vel = estimate_velocities(traj).unwrap();
    let field = estimate_metric_grid(traj, &vel, grid, &MetricEstimation::default()).unwrap();
    let (t0, vector_times) = suggest_reference_times(traj, &vel, &field).unwrap();
    ReferenceTimes { t0, vector_times }
}

/// A chart built on a time-shifted copy, with shifted reference times, gives
/// the same `s` at the same samples.
#[test]
fn time_shift_leaves_s_unchanged() {
    let x = walk(8);
    let grid = GridSpec::covering(&[-0.85, -0.85], &[0.85, 0.85], &[7, 9]).unwrap();
    let reference = reference_for(&x, &grid);
    let offset = 1000.0;
    let shifted = x.shifted(offset);
    let shifted_ref = ReferenceTimes {
        t0: reference.t0 + offset,
        vector_times: reference.vector_times.iter().map(|t| t + offset).collect(),
    };
    let ca = build_chart(&x, &reference, &recipe(grid.clone()), Execution::default()).unwrap();
    let cb = build_chart(&shifted, &shifted_ref, &recipe(grid), Execution::default()).unwrap();

    let seg = x.segment(0.0, 6.0).unwrap();
    let sa = rescale_trajectory(&ca, &seg);
    let sb = rescale_trajectory(&cb, &seg);
    assert!(sa.len() > seg.len() / 2);
    assert_eq!(sa.times, sb.times);
    for (p, q) in sa.points.iter().zip(&sb.points) {
        for (a, b) in p.iter().zip(q) {
            assert!((a - b).abs() < 1e-6, "{p:?} vs {q:?}");
        }
    }
}

/// Under an axis-aligned affine map the grids correspond node for node, so
/// the two charts are the same geometry and `s` agrees up to the solver
/// tolerance, while `x` differs substantially.
#[test]
fn diagonal_affine_map_gives_same_s() {
    let x = walk(9);
    let d = [3.0, 0.5];
    let b = [-2.0, 5.0];
    let y = x.map_points(2, |p| vec![d[0] * p[0] + b[0], d[1] * p[1] + b[1]]).unwrap();
    let (lo, hi) = ([-0.85, -0.85], [0.85, 0.85]);
    let gx = GridSpec::covering(&lo, &hi, &[7, 9]).unwrap();
    let gy = GridSpec::covering(&[d[0] * lo[0] + b[0], d[1] * lo[1] + b[1]], &[d[0] * hi[0] + b[0], d[1] * hi[1] + b[1]], &[7, 9])
        .unwrap();
    let reference = reference_for(&x, &gx);
    let cx = build_chart(&x, &reference, &recipe(gx), Execution::default()).unwrap();
    let cy = build_chart(&y, &reference, &recipe(gy), Execution::default()).unwrap();

    let (xs, ys) = (x.segment(0.0, 8.0).unwrap(), y.segment(0.0, 8.0).unwrap());
    let sx = rescale_trajectory(&cx, &xs).trajectory().unwrap();
    let sy = rescale_trajectory(&cy, &ys).trajectory().unwrap();
    let report_s = compare_representations(&sx, &sy).unwrap();
    let report_x = compare_representations(&xs, &ys).unwrap();
    assert!(report_s.fraction_compared > 0.9, "{report_s:?}");
    for k in 0..2 {
        assert!(report_s.rms[k] < 1e-4, "{report_s:?}");
        assert!(report_x.rms[k] > 0.3, "{report_x:?}");
    }
}
