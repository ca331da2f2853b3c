use crate::error::GeometryError;

use super::connection::{christoffel_into, Scratch};
use super::metric::MetricField;

/// Position, velocity and a set of vectors carried along by parallel transport.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub frame: Vec<Vec<f64>>,
}

impl GeodesicState {
    pub fn new(position: Vec<f64>, velocity: Vec<f64>) -> Self {
        Self { position, velocity, frame: Vec::new() }
    }

    pub fn with_frame(mut self, frame: Vec<Vec<f64>>) -> Self {
        self.frame = frame;
        self
    }

    fn pack(&self) -> Vec<f64> {
        let mut y = self.position.clone();
        y.extend_from_slice(&self.velocity);
        for w in &self.frame {
            y.extend_from_slice(w);
        }
        y
    }

    fn unpack(y: &[f64], n: usize) -> Self {
        Self {
            position: y[..n].to_vec(),
            velocity: y[n..2 * n].to_vec(),
            frame: y[2 * n..].chunks_exact(n).map(<[f64]>::to_vec).collect(),
        }
    }
}

/// `dy/ds` for the packed state `[x, v, w_1, ...]`.
fn geodesic_rhs(field: &MetricField, y: &[f64], dy: &mut [f64], s: &mut Scratch) -> Result<(), GeometryError> {
    let n = field.dim();
    christoffel_into(field, &y[..n], s)?;
    let v = &y[n..2 * n];
    dy[..n].copy_from_slice(v);
    let gamma = &s.gamma;
    for (block, chunk) in y[n..].chunks_exact(n).enumerate() {
        for k in 0..n {
            let mut acc = 0.0;
            for l in 0..n {
                for m in 0..n {
                    acc += gamma[(k * n + l) * n + m] * v[l] * chunk[m];
                }
            }
            dy[n + block * n + k] = -acc;
        }
    }
    Ok(())
}

struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Self { k: std::array::from_fn(|_| vec![0.0; len]), tmp: vec![0.0; len] }
    }

    /// One classical RK4 step of size `h`, in place.
    fn step<F>(&mut self, y: &mut [f64], h: f64, mut f: F) -> Result<(), GeometryError>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), GeometryError>,
    {
        let [k1, k2, k3, k4] = &mut self.k;
        f(0.0, y, k1)?;
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(0.5, &self.tmp, k2)?;
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        f(0.5, &self.tmp, k3)?;
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * k3[i];
        }
        f(1.0, &self.tmp, k4)?;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(())
    }
}

/// Integrates the geodesic equation for affine parameter `s` (negative `s`
/// runs backwards) with classical RK4 steps of at most `step`, carrying the
/// state's frame by parallel transport.
pub fn integrate_geodesic(
    field: &MetricField,
    start: &GeodesicState,
    s: f64,
    step: f64,
) -> Result<GeodesicState, GeometryError> {
    let n = field.dim();
    if start.position.len() != n || start.velocity.len() != n || start.frame.iter().any(|w| w.len() != n) {
        return Err(GeometryError::DimensionMismatch { expected: n, got: start.position.len() });
    }
    if !(step > 0.0) || !s.is_finite() {
        return Err(GeometryError::InvalidParameter(format!("step {step} must be positive and s {s} finite")));
    }
    if !field.contains(&start.position) {
        return Err(GeometryError::OutOfDomain { point: start.position.clone() });
    }
    if s == 0.0 {
        return Ok(start.clone());
    }
    let total = s.abs();
    let sign = s.signum();
    let mut y = start.pack();
    let mut scratch = Scratch::new(n);
    let mut rk = Rk4::new(y.len());
    let mut done = 0.0;
    while total - done > 1e-12 * total {
        let h = step.min(total - done);
        let before = y.clone();
        let result = rk.step(&mut y, sign * h, |_, state, dy| geodesic_rhs(field, state, dy, &mut scratch));
        if result.is_err() || !field.contains(&y[..n]) {
            return Err(GeometryError::LeftDomain { s_exit: sign * done, position: before[..n].to_vec() });
        }
        done += h;
    }
    Ok(GeodesicState::unpack(&y, n))
}

/// Parallel-transports `v` along the polyline `path`, each segment traversed
/// linearly in coordinates with RK4 sub-steps of about 5% of the grid spacing.
pub fn parallel_transport(field: &MetricField, path: &[Vec<f64>], v: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let n = field.dim();
    if v.len() != n || path.iter().any(|p| p.len() != n) {
        return Err(GeometryError::DimensionMismatch { expected: n, got: v.len() });
    }
    if let Some(p) = path.iter().find(|p| !field.contains(p)) {
        return Err(GeometryError::OutOfDomain { point: p.clone() });
    }
    let max_len = 0.05 * field.grid().min_spacing();
    let mut w = v.to_vec();
    let mut scratch = Scratch::new(n);
    let mut rk = Rk4::new(n);
    let mut x = vec![0.0; n];
    for seg in path.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let d: Vec<f64> = b.iter().zip(a).map(|(b, a)| b - a).collect();
        let len = d.iter().map(|c| c * c).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let steps = (len / max_len).ceil().max(1.0) as usize;
        let h = 1.0 / steps as f64;
        for i in 0..steps {
            let tau0 = i as f64 * h;
            rk.step(&mut w, h, |frac, w, dw| {
                let tau = tau0 + frac * h;
                for c in 0..n {
                    x[c] = a[c] + tau * d[c];
                }
                christoffel_into(field, &x, &mut scratch)?;
                for k in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        for m in 0..n {
                            acc += scratch.gamma[(k * n + l) * n + m] * d[l] * w[m];
                        }
                    }
                    dw[k] = -acc;
                }
                Ok(())
            })?;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{metric_at, GridSpec};
    use std::f64::consts::PI;

    fn flat() -> MetricField {
        let grid = GridSpec::covering(&[-1.0, -1.0], &[6.0, 6.0], &[8, 8]).unwrap();
        MetricField::from_fn(grid, |_| vec![1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    fn polar() -> MetricField {
        let grid = GridSpec::covering(&[0.5, -0.5], &[2.5, 1.5], &[21, 21]).unwrap();
        MetricField::from_fn(grid, |x| vec![1.0, 0.0, 0.0, x[0] * x[0]]).unwrap()
    }

    fn sphere(rho: f64) -> MetricField {
        let grid = GridSpec::covering(&[0.3, -1.5], &[2.8, 1.5], &[41, 41]).unwrap();
        MetricField::from_fn(grid, move |x| vec![rho * rho, 0.0, 0.0, (rho * x[0].sin()).powi(2)]).unwrap()
    }

    fn g_dot(field: &MetricField, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let g = metric_at(field, x).unwrap();
        (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| g[(i, j)] * a[i] * b[j]).sum()
    }

    #[test]
    fn flat_straight_line() {
        let field = flat();
        let out = integrate_geodesic(&field, &GeodesicState::new(vec![0.0, 0.0], vec![1.0, 0.0]), 5.0, 0.05).unwrap();
        assert!((out.position[0] - 5.0).abs() < 1e-12 && out.position[1].abs() < 1e-12);
        assert!((out.velocity[0] - 1.0).abs() < 1e-12 && out.velocity[1].abs() < 1e-12);
    }

    #[test]
    fn zero_length_is_exact() {
        let field = polar();
        let start = GeodesicState::new(vec![1.3, 0.2], vec![0.4, 0.7]);
        assert_eq!(integrate_geodesic(&field, &start, 0.0, 0.01).unwrap(), start);
    }

    #[test]
    fn polar_geodesic_matches_cartesian_line() {
        let field = polar();
        let start = GeodesicState::new(vec![1.0, 0.0], vec![0.0, 1.0]);
        let out = integrate_geodesic(&field, &start, 1.0, 0.01).unwrap();
        // Straight line from (1, 0) with velocity (0, 1) reaches (1, 1).
        assert!((out.position[0] - 2f64.sqrt()).abs() < 1e-4);
        assert!((out.position[1] - PI / 4.0).abs() < 1e-4);
    }

    #[test]
    fn rk4_order_on_polar_plane() {
        let field = polar();
        let start = GeodesicState::new(vec![1.0, 0.0], vec![0.0, 1.0]);
        let err = |h: f64| {
            let out = integrate_geodesic(&field, &start, 1.0, h).unwrap();
            ((out.position[0] - 2f64.sqrt()).powi(2) + (out.position[1] - PI / 4.0).powi(2)).sqrt()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((10.0..25.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn negative_parameter_runs_backwards() {
        let field = polar();
        let start = GeodesicState::new(vec![1.5, 0.5], vec![0.3, -0.2]);
        let fwd = integrate_geodesic(&field, &start, 1.0, 0.01).unwrap();
        let back = integrate_geodesic(&field, &fwd, -1.0, 0.01).unwrap();
        for (a, b) in back.position.iter().zip(&start.position) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn velocity_norm_and_frame_products_are_conserved() {
        let field = sphere(1.5);
        let start = GeodesicState::new(vec![1.2, 0.0], vec![0.3, 0.5])
            .with_frame(vec![vec![1.0, 0.2], vec![-0.3, 0.8]]);
        let s = 2.0;
        let step = field.default_step(&start.velocity);
        let out = integrate_geodesic(&field, &start, s, step).unwrap();
        let n0 = g_dot(&field, &start.position, &start.velocity, &start.velocity);
        let n1 = g_dot(&field, &out.position, &out.velocity, &out.velocity);
        assert!(((n1 - n0) / n0).abs() <= 1e-6 * s);
        let p0 = g_dot(&field, &start.position, &start.frame[0], &start.frame[1]);
        let p1 = g_dot(&field, &out.position, &out.frame[0], &out.frame[1]);
        assert!((p1 - p0).abs() < 1e-6);
    }

    #[test]
    fn leaving_the_domain_is_reported() {
        let field = flat();
        let err = integrate_geodesic(&field, &GeodesicState::new(vec![0.0, 0.0], vec![1.0, 0.0]), 10.0, 0.1)
            .unwrap_err();
        match err {
            GeometryError::LeftDomain { s_exit, .. } => assert!((5.8..=6.0).contains(&s_exit), "{s_exit}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flat_transport_is_identity() {
        let field = flat();
        let path = vec![vec![0.0, 0.0], vec![2.0, 1.0], vec![3.0, 4.0]];
        let w = parallel_transport(&field, &path, &[0.3, -0.7]).unwrap();
        assert!((w[0] - 0.3).abs() < 1e-12 && (w[1] + 0.7).abs() < 1e-12);
    }

    #[test]
    fn holonomy_around_a_coordinate_square_on_the_sphere() {
        let field = sphere(1.0);
        let (theta0, phi0, d) = (0.9, -0.1, 0.2);
        let square = vec![
            vec![theta0, phi0],
            vec![theta0 + d, phi0],
            vec![theta0 + d, phi0 + d],
            vec![theta0, phi0 + d],
            vec![theta0, phi0],
        ];
        let x = &square[0];
        let v = vec![1.0, 0.0];
        let w = parallel_transport(&field, &square, &v).unwrap();
        // Rotation angle measured in an orthonormal frame at the base point.
        let e2 = vec![0.0, 1.0 / x[0].sin()];
        let angle = g_dot(&field, x, &w, &e2).atan2(g_dot(&field, x, &w, &v));
        // Enclosed spherical area on the unit sphere.
        let area = d * (theta0.cos() - (theta0 + d).cos());
        assert!((angle.abs() - area).abs() < 1e-4 * area.max(1.0), "{angle} vs {area}");
        let w2 = parallel_transport(&field, &square, &e2).unwrap();
        assert!((g_dot(&field, x, &w, &w2) - g_dot(&field, x, &v, &e2)).abs() < 1e-6);
    }
}
