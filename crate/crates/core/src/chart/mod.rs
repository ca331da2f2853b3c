//! The invariant `s` chart: reference point and vectors, the constructive
//! forward map by iterated geodesic legs, its Newton inverse, and trajectory
//! rescaling and isocline tracing on top of those.

mod contour;
mod extremum;
mod isocline;
mod rescale;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ChartError, GeometryError};
use crate::geometry::{integrate_geodesic, GeodesicState, MetricField, VelocitySeries};
use crate::trajectory::FeatureTrajectory;

pub use contour::contour_lines;
pub use extremum::find_curvature_extremum;
pub use isocline::{trace_isoclines, trace_isoclines_with, Isocline};
pub use rescale::{rescale_trajectory, rescale_trajectory_with, Exclusion, RescaledTrajectory};

pub const CHART_FORMAT_VERSION: &str = "geoscale-chart-v1";

/// Reference point `x0` and reference vectors `h_1 .. h_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceFrame {
    pub x0: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    /// `[t0, t_1, .., t_N]` when the frame was read off a trajectory.
    #[serde(default)]
    pub source_times: Option<Vec<f64>>,
}

impl ReferenceFrame {
    pub fn new(x0: Vec<f64>, h: Vec<Vec<f64>>) -> Result<Self, ChartError> {
        let frame = Self { x0, h, source_times: None };
        frame.validate()?;
        Ok(frame)
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// Matrix with the reference vectors as columns.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |r, c| self.h[c][r])
    }

    pub fn validate(&self) -> Result<(), ChartError> {
        let n = self.dim();
        if n == 0 || self.h.len() != n || self.h.iter().any(|v| v.len() != n) {
            return Err(ChartError::Invalid(format!("need {n} reference vectors of dimension {n}")));
        }
        let condition = condition_number(&self.matrix());
        if !(condition < 1e6) {
            return Err(ChartError::DependentVectors { condition });
        }
        Ok(())
    }
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let (lo, hi) = (sv.min(), sv.max());
    if lo <= 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Reads the frame off a trajectory: `x0` is the sample nearest `t0`, and
/// `h_a` the velocity at the sample nearest `vector_times[a]`.
pub fn select_reference(
    traj: &FeatureTrajectory,
    vel: &VelocitySeries,
    t0: f64,
    vector_times: &[f64],
) -> Result<ReferenceFrame, ChartError> {
    let n = traj.dim();
    if vel.len() != traj.len() || vel.dim() != n {
        return Err(GeometryError::DimensionMismatch { expected: traj.len(), got: vel.len() }.into());
    }
    if vector_times.len() != n {
        return Err(ChartError::Invalid(format!("{n}-D frame needs {n} vector times, got {}", vector_times.len())));
    }
    let times = traj.times();
    let (start, end) = (times[0], times[times.len() - 1]);
    for &t in std::iter::once(&t0).chain(vector_times) {
        if !(t >= start && t <= end) {
            return Err(ChartError::TimeOutOfRange { time: t, start, end });
        }
    }
    let x0 = traj.point(traj.nearest_index(t0)).to_vec();
    let h = vector_times.iter().map(|&t| vel.velocity(traj.nearest_index(t)).to_vec()).collect();
    let mut source_times = vec![t0];
    source_times.extend_from_slice(vector_times);
    let frame = ReferenceFrame { x0, h, source_times: Some(source_times) };
    frame.validate()?;
    Ok(frame)
}

/// Picks reference times from a trajectory: `t0` at the in-domain sample
/// nearest the domain center, and vector times among samples within half a
/// grid cell of `x0` that greedily maximize the spanned volume.
pub fn suggest_reference_times(
    traj: &FeatureTrajectory,
    vel: &VelocitySeries,
    field: &MetricField,
) -> Result<(f64, Vec<f64>), ChartError> {
    let n = traj.dim();
    let (lo, hi) = field.domain();
    let center: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect();
    let dist2 = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let i0 = (0..traj.len())
        .filter(|&i| field.contains(traj.point(i)))
        .min_by(|&a, &b| dist2(traj.point(a), &center).total_cmp(&dist2(traj.point(b), &center)))
        .ok_or_else(|| ChartError::Invalid("no trajectory sample lies inside the metric domain".into()))?;
    let x0 = traj.point(i0);
    let radius = 0.5 * field.grid().min_spacing();
    let near: Vec<usize> = (0..traj.len()).filter(|&i| dist2(traj.point(i), x0) <= radius * radius).collect();

    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<(f64, usize)> = None;
        for &i in &near {
            if chosen.contains(&i) {
                continue;
            }
            let mut cols: Vec<&[f64]> = chosen.iter().map(|&c| vel.velocity(c)).collect();
            cols.push(vel.velocity(i));
            let m = DMatrix::from_fn(n, cols.len(), |r, c| cols[c][r]);
            let volume = (m.transpose() * &m).determinant().max(0.0);
            if best.is_none_or(|(b, _)| volume > b) {
                best = Some((volume, i));
            }
        }
        match best {
            Some((v, i)) if v > 0.0 => chosen.push(i),
            _ => return Err(ChartError::DependentVectors { condition: f64::INFINITY }),
        }
    }
    chosen.sort_unstable();
    Ok((traj.times()[i0], chosen.iter().map(|&i| traj.times()[i]).collect()))
}

/// Numerical settings for the forward and inverse maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverTolerances {
    /// RK4 step as a fraction of the finest grid spacing, in coordinates.
    pub step_fraction: f64,
    /// Newton residual tolerance in coordinates; defaults to `1e-6` of the
    /// finest grid spacing.
    pub newton_tol: Option<f64>,
    pub max_iterations: usize,
    /// Relative finite-difference step for the Newton Jacobian.
    pub jacobian_step: f64,
    /// Round-trip error allowed by the chart self-test, in `s` units.
    pub round_trip_tol: f64,
    pub self_test_samples: usize,
    /// Fraction of the linear-frame box that the self-test samples.
    pub working_fraction: f64,
    pub seed: u64,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            step_fraction: 0.05,
            newton_tol: None,
            max_iterations: 50,
            jacobian_step: 1e-6,
            round_trip_tol: 1e-5,
            self_test_samples: 100,
            working_fraction: 0.5,
            seed: 0x5eed,
        }
    }
}

/// Outcome of the forward/inverse round-trip check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfTestReport {
    pub samples: usize,
    pub rejected: usize,
    pub max_error: f64,
    pub working_box: Vec<(f64, f64)>,
}

/// Solution and Jacobian carried from one inverse map to the next.
#[derive(Debug, Clone)]
pub(crate) struct WarmStart {
    pub s: Vec<f64>,
    pub jacobian: Option<DMatrix<f64>>,
    /// Point that `s` maps to, when known.
    pub x: Option<Vec<f64>>,
}

/// A metric field with a reference frame and transport order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChartRepr", into = "ChartRepr")]
pub struct ScaleChart {
    field: MetricField,
    frame: ReferenceFrame,
    order: Vec<usize>,
    tol: SolverTolerances,
    self_test: Option<SelfTestReport>,
}

impl ScaleChart {
    pub fn new(field: MetricField, frame: ReferenceFrame) -> Result<Self, ChartError> {
        let order = (0..field.dim()).collect();
        Self::with_options(field, frame, order, SolverTolerances::default())
    }

    pub fn with_options(
        field: MetricField,
        frame: ReferenceFrame,
        order: Vec<usize>,
        tol: SolverTolerances,
    ) -> Result<Self, ChartError> {
        frame.validate()?;
        let n = field.dim();
        if frame.dim() != n {
            return Err(GeometryError::DimensionMismatch { expected: n, got: frame.dim() }.into());
        }
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..n).collect::<Vec<_>>() {
            return Err(ChartError::Invalid(format!("transport order {order:?} is not a permutation of 0..{n}")));
        }
        if !field.contains(&frame.x0) {
            return Err(GeometryError::OutOfDomain { point: frame.x0.clone() }.into());
        }
        if !(tol.step_fraction > 0.0 && tol.jacobian_step > 0.0 && tol.max_iterations > 0) {
            return Err(ChartError::Invalid("solver step sizes and iteration cap must be positive".into()));
        }
        Ok(Self { field, frame, order, tol, self_test: None })
    }

    pub fn field(&self) -> &MetricField {
        &self.field
    }

    pub fn frame(&self) -> &ReferenceFrame {
        &self.frame
    }

    pub fn transport_order(&self) -> &[usize] {
        &self.order
    }

    pub fn tolerances(&self) -> &SolverTolerances {
        &self.tol
    }

    pub fn self_test_report(&self) -> Option<&SelfTestReport> {
        self.self_test.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    fn newton_tol(&self) -> f64 {
        self.tol.newton_tol.unwrap_or(1e-6 * self.field.grid().min_spacing())
    }

    /// Position reached from `x0` by following, for each `a` in transport
    /// order, the geodesic with initial velocity `h_a` (as transported so far)
    /// for affine parameter `s_a`, co-transporting the rest of the frame.
    pub fn forward_map(&self, s: &[f64]) -> Result<Vec<f64>, ChartError> {
        let n = self.dim();
        if s.len() != n {
            return Err(GeometryError::DimensionMismatch { expected: n, got: s.len() }.into());
        }
        let mut state = GeodesicState::new(self.frame.x0.clone(), vec![0.0; n]).with_frame(self.frame.h.clone());
        for &a in &self.order {
            if s[a] == 0.0 {
                continue;
            }
            state.velocity = state.frame[a].clone();
            let speed = state.velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
            let step = self.tol.step_fraction * self.field.grid().min_spacing() / speed;
            state = integrate_geodesic(&self.field, &state, s[a], step).map_err(|e| match e {
                GeometryError::LeftDomain { s_exit, .. } => ChartError::LeftDomain { leg: a, s_exit },
                other => other.into(),
            })?;
        }
        Ok(state.position)
    }

    /// `s` from the linear frame: `H s = x - x0`.
    pub fn linear_guess(&self, x: &[f64]) -> Vec<f64> {
        let rhs = DVector::from_iterator(self.dim(), x.iter().zip(&self.frame.x0).map(|(a, b)| a - b));
        self.frame
            .matrix()
            .lu()
            .solve(&rhs)
            .map(|v| v.iter().copied().collect())
            .unwrap_or_else(|| vec![0.0; self.dim()])
    }

    /// Solves `forward_map(s) = x` by damped quasi-Newton iteration,
    /// starting from the linear-frame guess. The Jacobian is taken by forward
    /// differences and refined by Broyden updates; it is re-differenced
    /// whenever an updated Jacobian fails to reduce the residual.
    pub fn inverse_map(&self, x: &[f64]) -> Result<Vec<f64>, ChartError> {
        self.inverse_map_from(x, None)
    }

    /// As [`inverse_map`](Self::inverse_map), starting from `guess` when given.
    pub fn inverse_map_from(&self, x: &[f64], guess: Option<&[f64]>) -> Result<Vec<f64>, ChartError> {
        let warm = guess.map(|s| WarmStart { s: s.to_vec(), jacobian: None, x: None });
        self.inverse_map_warm(x, warm.as_ref()).map(|w| w.s)
    }

    /// Inverse map that also returns its final Jacobian estimate, so a
    /// nearby point can start from both.
    pub(crate) fn inverse_map_warm(&self, x: &[f64], warm: Option<&WarmStart>) -> Result<WarmStart, ChartError> {
        let n = self.dim();
        if x.len() != n {
            return Err(GeometryError::DimensionMismatch { expected: n, got: x.len() }.into());
        }
        if !self.field.contains(x) {
            return Err(GeometryError::OutOfDomain { point: x.to_vec() }.into());
        }
        let residual = |s: &[f64]| -> Option<(Vec<f64>, f64)> {
            let y = self.forward_map(s).ok()?;
            let r: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            Some((r, norm))
        };

        let mut s = match warm {
            None => self.linear_guess(x),
            // Predict with the carried Jacobian: s + J^-1 (x - x_prev).
            Some(WarmStart { s, jacobian: Some(j), x: Some(prev) }) => {
                let dx = DVector::from_iterator(n, x.iter().zip(prev).map(|(a, b)| a - b));
                match j.clone().lu().solve(&dx) {
                    Some(ds) => s.iter().zip(ds.iter()).map(|(a, d)| a + d).collect(),
                    None => s.clone(),
                }
            }
            Some(w) => w.s.clone(),
        };
        let mut current = residual(&s);
        // Pull an infeasible starting guess toward the reference point.
        let mut shrink = 0;
        while current.is_none() && shrink < 30 {
            s.iter_mut().for_each(|v| *v *= 0.5);
            current = residual(&s);
            shrink += 1;
        }
        let (mut r, mut norm) = match current {
            Some(c) => c,
            None => {
                s = vec![0.0; n];
                residual(&s).expect("s = 0 maps to the reference point")
            }
        };

        let fd_jacobian = |s: &[f64], r: &[f64], norm: f64| -> Result<DMatrix<f64>, ChartError> {
            let mut jac = DMatrix::<f64>::zeros(n, n);
            for a in 0..n {
                let delta = self.tol.jacobian_step * s[a].abs().max(1.0);
                let mut probe = s.to_vec();
                probe[a] += delta;
                let (col, sign) = match residual(&probe) {
                    Some((rp, _)) => (rp, 1.0),
                    None => {
                        probe[a] = s[a] - delta;
                        let (rm, _) =
                            residual(&probe).ok_or(ChartError::NoConvergence { residual: norm, iterations: 0 })?;
                        (rm, -1.0)
                    }
                };
                for k in 0..n {
                    jac[(k, a)] = sign * (col[k] - r[k]) / delta;
                }
            }
            Ok(jac)
        };

        let tol = self.newton_tol();
        let mut jac = match warm.and_then(|w| w.jacobian.clone()) {
            Some(j) if shrink == 0 => j,
            _ => fd_jacobian(&s, &r, norm)?,
        };
        let mut fresh = warm.is_none_or(|w| w.jacobian.is_none()) || shrink > 0;
        let mut iterations = 0;
        // Consecutive iterations that cut the residual by less than 10%;
        // points reachable only by leaving the domain stall like this.
        let mut slow = 0;
        while iterations < self.tol.max_iterations && norm > tol && slow < 4 {
            iterations += 1;
            let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
            let step = jac.clone().lu().solve(&rhs);
            let mut accepted = None;
            if let Some(step) = &step {
                let mut lambda = 1.0;
                for _ in 0..12 {
                    let trial: Vec<f64> = s.iter().zip(step.iter()).map(|(a, d)| a + lambda * d).collect();
                    if let Some((rt, nt)) = residual(&trial) {
                        if nt < norm {
                            accepted = Some((trial, rt, nt));
                            break;
                        }
                    }
                    lambda *= 0.5;
                    if !fresh && lambda < 0.25 {
                        break;
                    }
                }
            }
            match accepted {
                Some((trial, rt, nt)) => {
                    // Broyden: J += (dr - J ds) ds^T / (ds^T ds).
                    let ds = DVector::from_iterator(n, trial.iter().zip(&s).map(|(a, b)| a - b));
                    let dr = DVector::from_iterator(n, rt.iter().zip(&r).map(|(a, b)| a - b));
                    let denom = ds.dot(&ds);
                    if denom > 0.0 {
                        let u = (dr - &jac * &ds) / denom;
                        jac += u * ds.transpose();
                    }
                    slow = if nt > 0.9 * norm { slow + 1 } else { 0 };
                    s = trial;
                    r = rt;
                    norm = nt;
                    fresh = false;
                }
                None if !fresh => {
                    jac = fd_jacobian(&s, &r, norm)?;
                    fresh = true;
                }
                None => break,
            }
        }
        if norm <= tol {
            Ok(WarmStart { s, jacobian: Some(jac), x: Some(x.to_vec()) })
        } else {
            Err(ChartError::NoConvergence { residual: norm, iterations })
        }
    }

    /// `s` box sampled by the self-test: the linear-frame image of the
    /// domain corners, scaled by `working_fraction` about `s = 0`.
    pub fn working_box(&self) -> Vec<(f64, f64)> {
        let n = self.dim();
        let (lo, hi) = self.field.domain();
        let mut bounds = vec![(0.0f64, 0.0f64); n];
        for mask in 0..(1usize << n) {
            let corner: Vec<f64> = (0..n).map(|a| if mask >> a & 1 == 1 { hi[a] } else { lo[a] }).collect();
            let s = self.linear_guess(&corner);
            for a in 0..n {
                bounds[a].0 = bounds[a].0.min(s[a]);
                bounds[a].1 = bounds[a].1.max(s[a]);
            }
        }
        bounds
            .into_iter()
            .map(|(l, h)| (self.tol.working_fraction * l, self.tol.working_fraction * h))
            .collect()
    }

    /// Round-trips `self_test_samples` random `s` from the working box whose
    /// forward image stays in the domain, and fails if any error exceeds
    /// `round_trip_tol`.
    pub fn self_test(&self) -> Result<SelfTestReport, ChartError> {
        let bounds = self.working_box();
        let mut rng = ChaCha8Rng::seed_from_u64(self.tol.seed);
        let wanted = self.tol.self_test_samples;
        let mut samples = 0;
        let mut rejected = 0;
        let mut max_error = 0.0f64;
        while samples < wanted {
            if rejected > 50 * wanted.max(1) {
                return Err(ChartError::SelfTestFailed(format!(
                    "only {samples} of {wanted} working-box samples stay inside the domain"
                )));
            }
            let s: Vec<f64> = bounds.iter().map(|&(l, h)| if h > l { rng.random_range(l..h) } else { l }).collect();
            let Ok(x) = self.forward_map(&s) else {
                rejected += 1;
                continue;
            };
            let back = self
                .inverse_map(&x)
                .map_err(|e| ChartError::SelfTestFailed(format!("inverse at s = {s:?}: {e}")))?;
            let err = s.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            max_error = max_error.max(err);
            samples += 1;
        }
        if max_error > self.tol.round_trip_tol {
            return Err(ChartError::SelfTestFailed(format!(
                "round-trip error {max_error:e} exceeds {:e}",
                self.tol.round_trip_tol
            )));
        }
        Ok(SelfTestReport { samples, rejected, max_error, working_box: bounds })
    }

    /// Runs [`self_test`](Self::self_test) and records the report in the chart.
    pub fn calibrate(mut self) -> Result<Self, ChartError> {
        self.self_test = Some(self.self_test()?);
        Ok(self)
    }
}

/// Forward map as a free function.
pub fn forward_map(chart: &ScaleChart, s: &[f64]) -> Result<Vec<f64>, ChartError> {
    chart.forward_map(s)
}

/// Inverse map as a free function.
pub fn inverse_map(chart: &ScaleChart, x: &[f64]) -> Result<Vec<f64>, ChartError> {
    chart.inverse_map(x)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChartRepr {
    version: String,
    metric: MetricField,
    frame: ReferenceFrame,
    transport_order: Vec<usize>,
    tolerances: SolverTolerances,
    #[serde(default)]
    self_test: Option<SelfTestReport>,
}

impl From<ScaleChart> for ChartRepr {
    fn from(c: ScaleChart) -> Self {
        Self {
            version: CHART_FORMAT_VERSION.to_string(),
            metric: c.field,
            frame: c.frame,
            transport_order: c.order,
            tolerances: c.tol,
            self_test: c.self_test,
        }
    }
}

impl TryFrom<ChartRepr> for ScaleChart {
    type Error = ChartError;

    fn try_from(r: ChartRepr) -> Result<Self, ChartError> {
        if r.version != CHART_FORMAT_VERSION {
            return Err(ChartError::Invalid(format!("unsupported chart format {:?}", r.version)));
        }
        let mut chart = ScaleChart::with_options(r.metric, r.frame, r.transport_order, r.tolerances)?;
        chart.self_test = r.self_test;
        Ok(chart)
    }
}
