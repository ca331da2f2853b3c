use crate::error::GeometryError;
use crate::geometry::{curvature_scalar, MetricField};

/// Lattice point of largest `|R|` in `region`, scanned at the metric grid's
/// spacing. Points too close to the domain edge for the curvature stencil
/// are skipped; ties keep the first point in row-major order.
pub fn find_curvature_extremum(field: &MetricField, region: (&[f64], &[f64])) -> Result<Vec<f64>, GeometryError> {
    let n = field.dim();
    if n != 2 {
        return Err(GeometryError::UnsupportedDimension(n));
    }
    let (lo, hi) = region;
    if lo.len() != 2 || hi.len() != 2 {
        return Err(GeometryError::DimensionMismatch { expected: 2, got: lo.len() });
    }
    for corner in [lo, hi] {
        if !field.contains(corner) {
            return Err(GeometryError::OutOfDomain { point: corner.to_vec() });
        }
    }
    let spacing = &field.grid().spacing;
    let counts: Vec<usize> = (0..2).map(|a| ((hi[a] - lo[a]) / spacing[a] + 1e-9).floor() as usize + 1).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            let p = vec![lo[0] + i as f64 * spacing[0], lo[1] + j as f64 * spacing[1]];
            let Ok(r) = curvature_scalar(field, &p) else { continue };
            if best.as_ref().is_none_or(|(b, _)| r.abs() > *b) {
                best = Some((r.abs(), p));
            }
        }
    }
    best.map(|(_, p)| p).ok_or_else(|| GeometryError::OutOfDomain { point: lo.to_vec() })
}
