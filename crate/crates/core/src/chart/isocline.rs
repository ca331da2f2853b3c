use serde::{Deserialize, Serialize};

use crate::error::{ChartError, GeometryError};
use crate::exec::Execution;

use super::contour::contour_lines;
use super::{ScaleChart, WarmStart};

/// Level set of one `s` coordinate, drawn in `x` coordinates. `component` is
/// 1-based to match `s1`, `s2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isocline {
    pub component: usize,
    pub level: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// Lattice of `s` values over a region plus the traced level sets.
pub fn trace_isoclines(
    chart: &ScaleChart,
    region: ([f64; 2], [f64; 2]),
    levels_1: &[f64],
    levels_2: &[f64],
    resolution: usize,
) -> Result<Vec<Isocline>, ChartError> {
    trace_isoclines_with(chart, region, levels_1, levels_2, resolution, Execution::default())
}

pub fn trace_isoclines_with(
    chart: &ScaleChart,
    region: ([f64; 2], [f64; 2]),
    levels_1: &[f64],
    levels_2: &[f64],
    resolution: usize,
    exec: Execution,
) -> Result<Vec<Isocline>, ChartError> {
    if chart.dim() != 2 {
        return Err(GeometryError::UnsupportedDimension(chart.dim()).into());
    }
    if resolution < 2 {
        return Err(ChartError::Invalid("isocline lattice needs resolution >= 2".into()));
    }
    let (lo, hi) = region;
    for corner in [lo, hi] {
        if !chart.field().contains(&corner) {
            return Err(GeometryError::OutOfDomain { point: corner.to_vec() }.into());
        }
    }
    let axis = |a: usize| -> Vec<f64> {
        (0..resolution).map(|i| lo[a] + (hi[a] - lo[a]) * i as f64 / (resolution - 1) as f64).collect()
    };
    let (xs, ys) = (axis(0), axis(1));
    // One row per task; warm starts run along the row.
    let rows = exec.map_indexed(resolution, |j| {
        let mut warm: Option<WarmStart> = None;
        xs.iter()
            .map(|&x| {
                let p = [x, ys[j]];
                let mut r = chart.inverse_map_warm(&p, warm.as_ref());
                if r.is_err() && warm.is_some() {
                    r = chart.inverse_map_warm(&p, None);
                }
                warm = r.as_ref().ok().cloned();
                r.map_or([f64::NAN; 2], |w| [w.s[0], w.s[1]])
            })
            .collect::<Vec<_>>()
    });
    let field: Vec<[f64; 2]> = rows.concat();
    let mut out = Vec::new();
    for (component, levels) in [(1usize, levels_1), (2, levels_2)] {
        let values: Vec<f64> = field.iter().map(|s| s[component - 1]).collect();
        for &level in levels {
            out.push(Isocline { component, level, polylines: contour_lines(&values, &xs, &ys, level) });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::tests::flat_chart;

    #[test]
    fn flat_chart_isoclines_are_axis_parallel() {
        let chart = flat_chart();
        let x0 = chart.frame().x0.clone();
        let iso = trace_isoclines(&chart, ([-4.0, -4.0], [4.0, 4.0]), &[-2.0, 1.0], &[0.0, 2.5], 17).unwrap();
        assert_eq!(iso.len(), 4);
        for c in &iso {
            assert_eq!(c.polylines.len(), 1);
            let axis = c.component - 1;
            for p in &c.polylines[0] {
                assert!((p[axis] - (x0[axis] + c.level)).abs() < 1e-6, "{c:?}");
            }
        }
    }

    #[test]
    fn region_outside_domain_fails() {
        let chart = flat_chart();
        assert!(matches!(
            trace_isoclines(&chart, ([-6.0, 0.0], [0.0, 1.0]), &[0.0], &[0.0], 5),
            Err(ChartError::Geometry(GeometryError::OutOfDomain { .. }))
        ));
    }
}
