//! Flow integration: uphill gradient flows and the closed-form catalog flow,
//! ω/α-limit detection, and linearized transport along trajectories.

pub mod rk45;
pub mod sphere17;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::critical::CriticalSet;
use crate::expr::{ExprError, FormExpression, ScalarExpression};
use crate::geometry::{GeomError, ManifoldBackend};

pub use rk45::Rk45;


#[derive(Debug, Error)]
pub enum FlowError {
    #[error("step size underflow at t={t:.6} near {point:?}")]
    StepUnderflow { t: f64, point: Vec<f64> },
    #[error("trajectory did not converge within max_time {0}")]
    NonConvergent(f64),
    #[error("trajectory left the retraction domain")]
    LeftDomain,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn reverse(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Integrator tolerances and capture thresholds.
#[derive(Debug, Clone, Copy)]
pub struct StepControls {
    pub rtol: f64,
    pub atol: f64,
    pub max_time: f64,
    /// Radius of the hyperbolic capture ball around a critical point.
    pub capture_radius: f64,
}

impl Default for StepControls {
    fn default() -> Self {
        StepControls {
            rtol: 1e-9,
            atol: 1e-11,
            max_time: 200.0,
            capture_radius: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub enum FlowKind {
    /// Flow of `+∇f`: `f` is non-decreasing along forward trajectories.
    GradientUphill(ScalarExpression),
    /// Chart-translation flow on the unit 2-sphere with direction `u`.
    Sphere17 { direction: DVector<f64> },
}

#[derive(Debug, Clone)]
pub struct FlowSpec {
    pub manifold: ManifoldBackend,
    pub kind: FlowKind,
    pub controls: StepControls,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Terminal {
    Converged { id: usize, time: f64 },
    MaxTime,
    LeftDomain,
}

/// Sampled integral curve; points live in the covering space for quotient
/// backends so deck elements stay recoverable.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub direction: Direction,
    pub times: Vec<f64>,
    pub points: Vec<DVector<f64>>,
    pub status: Terminal,
}

impl Trajectory {
    pub fn start(&self) -> &DVector<f64> {
        &self.points[0]
    }

    pub fn end(&self) -> &DVector<f64> {
        self.points.last().unwrap()
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

impl FlowSpec {
    pub fn gradient_uphill(manifold: ManifoldBackend, f: ScalarExpression) -> Self {
        assert_eq!(f.num_vars(), manifold.ambient_dim());
        FlowSpec {
            manifold,
            kind: FlowKind::GradientUphill(f),
            controls: StepControls::default(),
        }
    }

    /// The catalog chart-translation flow; requires the implicit unit sphere
    /// in `R^3`.
    pub fn sphere17(manifold: ManifoldBackend, direction: DVector<f64>) -> Self {
        assert_eq!(direction.len(), 2, "chart direction lives in R^2");
        match &manifold {
            ManifoldBackend::ImplicitHypersurface {
                ambient_dim: 3,
                constraint,
            } => {
                for probe in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]] {
                    let v = constraint.eval(&probe).unwrap_or(f64::NAN);
                    assert!(
                        v.abs() < 1e-9,
                        "the chart-translation flow needs the unit sphere backend"
                    );
                }
            }
            _ => panic!("the chart-translation flow needs the implicit unit sphere backend"),
        }
        let u = &direction / direction.norm();
        FlowSpec {
            manifold,
            kind: FlowKind::Sphere17 { direction: u },
            controls: StepControls::default(),
        }
    }

    pub fn function(&self) -> Option<&ScalarExpression> {
        match &self.kind {
            FlowKind::GradientUphill(f) => Some(f),
            FlowKind::Sphere17 { .. } => None,
        }
    }

    /// The generating vector field `V` at a point.
    pub fn velocity(&self, x: &DVector<f64>) -> Result<DVector<f64>, FlowError> {
        match &self.kind {
            FlowKind::GradientUphill(f) => Ok(self.manifold.riemannian_gradient(f, x)?),
            FlowKind::Sphere17 { direction } => Ok(sphere17::velocity(x, direction)),
        }
    }

    /// Ambient Jacobian of `V` for gradient flows, used by the variational
    /// equation. For the implicit case `V = ∇f − μ∇c` with
    /// `μ = ⟨∇f, ∇c⟩/|∇c|²`, so
    /// `DV = Hf − ∇c·(∇μ)ᵀ − μ·Hc`.
    pub(crate) fn velocity_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>, FlowError> {
        let f = match &self.kind {
            FlowKind::GradientUphill(f) => f,
            FlowKind::Sphere17 { .. } => {
                unreachable!("closed-form flow transports exactly, no variational equation")
            }
        };
        let n = self.manifold.ambient_dim();
        let jet_f = f.eval_jet_raw(x.as_slice())?;
        let hf = DMatrix::from_fn(n, n, |i, j| jet_f.hessian_entry(i, j));
        match &self.manifold {
            ManifoldBackend::FlatQuotient { .. } => Ok(hf),
            ManifoldBackend::ImplicitHypersurface { constraint, .. } => {
                let jet_c = constraint.eval_jet_raw(x.as_slice())?;
                let hc = DMatrix::from_fn(n, n, |i, j| jet_c.hessian_entry(i, j));
                let g = DVector::from_row_slice(jet_f.gradient());
                let nc = DVector::from_row_slice(jet_c.gradient());
                let n2 = nc.norm_squared();
                let mu = g.dot(&nc) / n2;
                let grad_mu = (&hf * &nc + &hc * &g - &hc * &nc * (2.0 * mu)) / n2;
                Ok(hf - &nc * grad_mu.transpose() - hc * mu)
            }
        }
    }

    fn is_closed_form(&self) -> bool {
        matches!(self.kind, FlowKind::Sphere17 { .. })
    }
}

/// Hyperbolic-ball capture test: inside the `capture_radius` ball of a
/// critical point with the expanding component (unstable eigenframe for
/// forward flow, stable for backward) below `capture_radius·1e−2`.
pub fn capture(
    spec: &FlowSpec,
    cs: &CriticalSet,
    x: &DVector<f64>,
    dir: Direction,
) -> Option<usize> {
    let delta = spec.controls.capture_radius;
    for p in &cs.points {
        let d = spec.manifold.displacement(x, &p.location);
        if d.norm() >= delta {
            continue;
        }
        let expanding = match dir {
            Direction::Forward => &p.unstable_frame.vectors,
            Direction::Backward => &p.stable_frame.vectors,
        };
        let comp2: f64 = expanding.iter().map(|v| d.dot(v).powi(2)).sum();
        if comp2.sqrt() < delta * 1e-2 {
            return Some(p.id);
        }
    }
    None
}

/// Integrate the flow from `x0`, stopping at hyperbolic capture or
/// `max_time`. Samples are recorded at every accepted step.
pub fn integrate(
    spec: &FlowSpec,
    cs: Option<&CriticalSet>,
    x0: &DVector<f64>,
    dir: Direction,
) -> Result<Trajectory, FlowError> {
    if let Some(set) = cs {
        if let Some(id) = capture(spec, set, x0, dir) {
            return Ok(Trajectory {
                direction: dir,
                times: vec![0.0],
                points: vec![x0.clone()],
                status: Terminal::Converged { id, time: 0.0 },
            });
        }
    }
    if spec.is_closed_form() {
        return integrate_closed_form(spec, x0, dir);
    }

    let mut marcher = FlowMarcher::new(spec, x0.clone(), Vec::new(), dir, false)?;
    let mut times = vec![0.0];
    let mut points = vec![x0.clone()];
    let max_time = spec.controls.max_time;
    loop {
        let remaining = max_time - marcher.t();
        if remaining <= 1e-12 {
            return Ok(Trajectory {
                direction: dir,
                times,
                points,
                status: Terminal::MaxTime,
            });
        }
        match marcher.step_capped(cs, remaining) {
            Ok(_) => {}
            Err(FlowError::Geom(GeomError::RetractionFailed { .. })) => {
                return Ok(Trajectory {
                    direction: dir,
                    times,
                    points,
                    status: Terminal::LeftDomain,
                })
            }
            Err(e) => return Err(e),
        }
        times.push(marcher.t());
        points.push(marcher.position().clone());
        if let Some(set) = cs {
            if let Some(id) = capture(spec, set, marcher.position(), dir) {
                return Ok(Trajectory {
                    direction: dir,
                    times,
                    points,
                    status: Terminal::Converged {
                        id,
                        time: marcher.t(),
                    },
                });
            }
        }
    }
}

fn integrate_closed_form(
    spec: &FlowSpec,
    x0: &DVector<f64>,
    dir: Direction,
) -> Result<Trajectory, FlowError> {
    let u = match &spec.kind {
        FlowKind::Sphere17 { direction } => direction,
        _ => unreachable!(),
    };
    let mut times = vec![0.0];
    let mut points = vec![x0.clone()];
    let mut t = 0.0;
    let mut dt = 0.05;
    while t < spec.controls.max_time {
        t = (t + dt).min(spec.controls.max_time);
        dt *= 1.3;
        times.push(t);
        points.push(sphere17::flow_point(x0, u, dir.sign() * t));
    }
    Ok(Trajectory {
        direction: dir,
        times,
        points,
        status: Terminal::MaxTime,
    })
}

/// Terminal critical point of the trajectory through `x0`.
pub fn limit(
    spec: &FlowSpec,
    cs: &CriticalSet,
    x0: &DVector<f64>,
    dir: Direction,
) -> Result<usize, FlowError> {
    let traj = integrate(spec, Some(cs), x0, dir)?;
    match traj.status {
        Terminal::Converged { id, .. } => Ok(id),
        Terminal::MaxTime => Err(FlowError::NonConvergent(spec.controls.max_time)),
        Terminal::LeftDomain => Err(FlowError::LeftDomain),
    }
}

/// The flow map `φ_t(x)` for a fixed (unsigned) duration.
pub fn flow_map(
    spec: &FlowSpec,
    x0: &DVector<f64>,
    t: f64,
    dir: Direction,
) -> Result<DVector<f64>, FlowError> {
    let mut marcher = FlowMarcher::new(spec, x0.clone(), Vec::new(), dir, false)?;
    marcher.advance_to(t)?;
    Ok(marcher.position().clone())
}

/// Transport a tangent frame from the start of `traj` to its end along the
/// linearized flow (variational equation, re-projected to the tangent bundle
/// each step; exact differential for the closed-form flow).
pub fn transport(
    spec: &FlowSpec,
    traj: &Trajectory,
    frame: &[DVector<f64>],
    dir: Direction,
) -> Result<Vec<DVector<f64>>, FlowError> {
    let mut marcher = FlowMarcher::new(spec, traj.start().clone(), frame.to_vec(), dir, false)?;
    marcher.advance_to(traj.duration())?;
    Ok(marcher.frames().to_vec())
}

/// Evaluate the pulled-back form `(φ_t^*α)(x)` on the given tangent vectors:
/// `α` at `φ_t(x)` applied to the transported vectors.
pub fn pullback_form(
    spec: &FlowSpec,
    alpha: &FormExpression,
    t: f64,
    x: &DVector<f64>,
    vectors: &[DVector<f64>],
) -> Result<f64, FlowError> {
    let dir = if t >= 0.0 {
        Direction::Forward
    } else {
        Direction::Backward
    };
    let mut marcher = FlowMarcher::new(spec, x.clone(), vectors.to_vec(), dir, false)?;
    marcher.advance_to(t.abs())?;
    Ok(alpha.eval(marcher.position().as_slice(), marcher.frames())?)
}

/// Transport a frame backward along a stored forward trajectory.
///
/// Marches the variational equation `ẇ = −DV(x(τ))·w` from the last sample
/// down to the first, with the position linearly interpolated between stored
/// samples (retracted on implicit backends) and the frame re-projected and
/// renormalized along the way. Positive renormalization only, so orientation
/// signs are preserved. Used for the orientation-sign rule, where only the
/// sign of a determinant at the far end matters.
pub fn transport_reverse_along(
    spec: &FlowSpec,
    times: &[f64],
    points: &[DVector<f64>],
    frame: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>, FlowError> {
    assert!(!spec.is_closed_form(), "gradient flows only");
    assert_eq!(times.len(), points.len());
    let implicit = matches!(
        spec.manifold,
        ManifoldBackend::ImplicitHypersurface { .. }
    );
    let mut w: Vec<DVector<f64>> = frame.to_vec();
    let max_sub = 0.01;
    for seg in (0..times.len() - 1).rev() {
        let dt = times[seg + 1] - times[seg];
        if dt <= 0.0 {
            continue;
        }
        let steps = (dt / max_sub).ceil().max(1.0) as usize;
        let h = dt / steps as f64;
        let pos = |frac: f64| -> Result<DVector<f64>, FlowError> {
            let x = &points[seg] * (1.0 - frac) + &points[seg + 1] * frac;
            if implicit {
                Ok(spec.manifold.retract(&x)?.0)
            } else {
                Ok(x)
            }
        };
        // March τ from the segment end to its start.
        for s in 0..steps {
            let f1 = 1.0 - s as f64 / steps as f64;
            let f2 = f1 - 0.5 / steps as f64;
            let f3 = f1 - 1.0 / steps as f64;
            let j1 = spec.velocity_jacobian(&pos(f1)?)?;
            let j2 = spec.velocity_jacobian(&pos(f2)?)?;
            let j3 = spec.velocity_jacobian(&pos(f3)?)?;
            for v in w.iter_mut() {
                // Classic RK4 for ẇ = −J(τ)·w.
                let k1 = -(&j1 * &*v);
                let k2 = -(&j2 * (&*v + &k1 * (0.5 * h)));
                let k3 = -(&j2 * (&*v + &k2 * (0.5 * h)));
                let k4 = -(&j3 * (&*v + &k3 * h));
                *v += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
        }
        let base = pos(0.0)?;
        for v in w.iter_mut() {
            let mut proj = spec.manifold.tangent_project(&base, v)?;
            let norm = proj.norm();
            if norm > 0.0 {
                proj /= norm;
            }
            *v = proj;
        }
    }
    Ok(w)
}

/// Incremental integrator carrying a point and a transported tangent frame.
///
/// Gradient flows advance the joint system `ẋ = ±V(x)`, `ẇ = ±DV(x)·w` with
/// per-step retraction and tangent re-projection; the closed-form flow
/// evaluates its exact flow map and differential instead. With `renormalize`
/// the frame columns are rescaled to unit length after each step (positive
/// scalings only, so orientation signs survive).
pub struct FlowMarcher<'a> {
    spec: &'a FlowSpec,
    dir: Direction,
    renormalize: bool,
    n: usize,
    k: usize,
    t: f64,
    h: f64,
    state: DVector<f64>,
    position: DVector<f64>,
    frames: Vec<DVector<f64>>,
    closed_form: bool,
    origin: DVector<f64>,
    origin_frame: Vec<DVector<f64>>,
}

impl<'a> FlowMarcher<'a> {
    pub fn new(
        spec: &'a FlowSpec,
        x0: DVector<f64>,
        frame: Vec<DVector<f64>>,
        dir: Direction,
        renormalize: bool,
    ) -> Result<Self, FlowError> {
        let n = spec.manifold.ambient_dim();
        let k = frame.len();
        let closed_form = spec.is_closed_form();
        let mut state = DVector::zeros(n * (k + 1));
        state.rows_mut(0, n).copy_from(&x0);
        for (i, w) in frame.iter().enumerate() {
            state.rows_mut(n * (i + 1), n).copy_from(w);
        }
        Ok(FlowMarcher {
            spec,
            dir,
            renormalize,
            n,
            k,
            t: 0.0,
            h: 1e-3,
            state,
            position: x0.clone(),
            frames: frame.clone(),
            closed_form,
            origin: x0,
            origin_frame: frame,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn position(&self) -> &DVector<f64> {
        &self.position
    }

    pub fn frames(&self) -> &[DVector<f64>] {
        &self.frames
    }

    pub fn velocity(&self) -> Result<DVector<f64>, FlowError> {
        self.spec.velocity(&self.position)
    }

    fn rhs(&self, y: &DVector<f64>) -> Result<DVector<f64>, FlowError> {
        let s = self.dir.sign();
        let x = y.rows(0, self.n).into_owned();
        let v = self.spec.velocity(&x)?;
        let mut out = DVector::zeros(self.n * (self.k + 1));
        out.rows_mut(0, self.n).copy_from(&(&v * s));
        if self.k > 0 {
            let jac = self.spec.velocity_jacobian(&x)?;
            for i in 0..self.k {
                let w = y.rows(self.n * (i + 1), self.n).into_owned();
                out.rows_mut(self.n * (i + 1), self.n)
                    .copy_from(&(&jac * w * s));
            }
        }
        Ok(out)
    }

    fn postprocess(&mut self) -> Result<(), FlowError> {
        if matches!(
            self.spec.manifold,
            ManifoldBackend::ImplicitHypersurface { .. }
        ) {
            let x = self.state.rows(0, self.n).into_owned();
            let (xr, _) = self.spec.manifold.retract(&x)?;
            self.state.rows_mut(0, self.n).copy_from(&xr);
            for i in 0..self.k {
                let w = self.state.rows(self.n * (i + 1), self.n).into_owned();
                let mut w = self.spec.manifold.tangent_project(&xr, &w)?;
                if self.renormalize {
                    let norm = w.norm();
                    if norm > 0.0 {
                        w /= norm;
                    }
                }
                self.state.rows_mut(self.n * (i + 1), self.n).copy_from(&w);
            }
        } else if self.renormalize {
            for i in 0..self.k {
                let w = self.state.rows(self.n * (i + 1), self.n).into_owned();
                let norm = w.norm();
                if norm > 0.0 {
                    self.state
                        .rows_mut(self.n * (i + 1), self.n)
                        .copy_from(&(w / norm));
                }
            }
        }
        self.refresh_views();
        Ok(())
    }

    fn refresh_views(&mut self) {
        self.position = self.state.rows(0, self.n).into_owned();
        self.frames = (0..self.k)
            .map(|i| self.state.rows(self.n * (i + 1), self.n).into_owned())
            .collect();
    }

    /// One accepted adaptive step of at most `dt_max`; returns the step taken.
    pub fn step(&mut self, dt_max: f64) -> Result<f64, FlowError> {
        if self.closed_form {
            let dt = dt_max.min(0.05_f64.max(0.02 * (1.0 + self.t)));
            self.t += dt;
            self.eval_closed_form();
            return Ok(dt);
        }
        let controls = self.spec.controls;
        let attempt = {
            let rhs = |y: &DVector<f64>| self.rhs(y);
            rk45::adaptive_step(
                &rhs,
                &self.state,
                self.h.min(dt_max),
                dt_max,
                controls.rtol,
                controls.atol,
            )
        };
        let (y_new, h_used, h_next) = attempt.map_err(|e| match e {
            FlowError::StepUnderflow { point, .. } => FlowError::StepUnderflow { t: self.t, point },
            other => other,
        })?;
        self.state = y_new;
        self.t += h_used;
        self.h = h_next;
        self.postprocess()?;
        Ok(h_used)
    }

    /// One step, additionally capped so the point moves at most a quarter of
    /// the distance to the nearest critical point (never skips a capture
    /// ball).
    pub fn step_capped(
        &mut self,
        cs: Option<&CriticalSet>,
        dt_max: f64,
    ) -> Result<f64, FlowError> {
        let mut cap = dt_max;
        if let Some(set) = cs {
            let d_min = set
                .points
                .iter()
                .map(|p| self.spec.manifold.displacement(&self.position, &p.location).norm())
                .fold(f64::INFINITY, f64::min);
            let v = self.velocity()?.norm();
            if v > 0.0 {
                let move_cap = (d_min / 4.0).max(self.spec.controls.capture_radius / 4.0);
                cap = cap.min(move_cap / v);
            }
        }
        self.step(cap)
    }

    /// Advance exactly to elapsed time `t_target` (unsigned).
    pub fn advance_to(&mut self, t_target: f64) -> Result<(), FlowError> {
        if self.closed_form {
            self.t = t_target;
            self.eval_closed_form();
            return Ok(());
        }
        while self.t < t_target - 1e-13 {
            self.step(t_target - self.t)?;
        }
        Ok(())
    }

    fn eval_closed_form(&mut self) {
        let u = match &self.spec.kind {
            FlowKind::Sphere17 { direction } => direction,
            _ => unreachable!(),
        };
        let t = self.dir.sign() * self.t;
        self.position = sphere17::flow_point(&self.origin, u, t);
        self.frames = self
            .origin_frame
            .iter()
            .map(|v| {
                let mut w = sphere17::flow_differential(&self.origin, u, t, v);
                if self.renormalize {
                    let norm = w.norm();
                    if norm > 0.0 {
                        w /= norm;
                    }
                }
                w
            })
            .collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{find_critical_points, CriticalOptions, SeedSpec};

    fn sphere() -> ManifoldBackend {
        ManifoldBackend::implicit(
            3,
            ScalarExpression::parse("x^2+y^2+z^2-1", 3).unwrap(),
        )
    }

    fn v3(x: f64, y: f64, z: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y, z])
    }

    fn sphere_height() -> (FlowSpec, CriticalSet) {
        let m = sphere();
        let f = ScalarExpression::parse("z", 3).unwrap();
        let cs = find_critical_points(
            &m,
            &f,
            &SeedSpec::Random { count: 80, seed: 5 },
            &CriticalOptions::default(),
        )
        .unwrap();
        (FlowSpec::gradient_uphill(m, f), cs)
    }

    #[test]
    fn equator_flows_to_the_poles() {
        let (spec, cs) = sphere_height();
        let x0 = v3(1.0, 0.0, 0.0);
        let traj = integrate(&spec, Some(&cs), &x0, Direction::Forward).unwrap();
        match traj.status {
            Terminal::Converged { id, .. } => {
                assert!(cs.by_id(id).value > 0.9, "expected the north pole");
            }
            other => panic!("unexpected terminal {other:?}"),
        }
        // f strictly increases along the samples.
        for w in traj.points.windows(2) {
            assert!(w[1][2] > w[0][2] - 1e-12);
        }
        let back = limit(&spec, &cs, &x0, Direction::Backward).unwrap();
        assert!(cs.by_id(back).value < -0.9, "expected the south pole");
    }

    #[test]
    fn critical_start_converges_immediately() {
        let (spec, cs) = sphere_height();
        let pole = cs.points.iter().find(|p| p.index == 2).unwrap();
        let id = limit(&spec, &cs, &pole.location, Direction::Forward).unwrap();
        assert_eq!(id, pole.id);
    }

    #[test]
    fn torus_axis_trajectory_matches_reduced_ode() {
        let m = ManifoldBackend::flat_torus(2);
        let f = ScalarExpression::parse("cos(2*pi*x)+cos(2*pi*y)", 2).unwrap();
        let cs = find_critical_points(
            &m,
            &f,
            &SeedSpec::Grid {
                per_axis: vec![8, 8],
            },
            &CriticalOptions::default(),
        )
        .unwrap();
        let spec = FlowSpec::gradient_uphill(m, f);
        let x0 = DVector::from_vec(vec![0.3, 0.0]);
        let traj = integrate(&spec, Some(&cs), &x0, Direction::Forward).unwrap();
        match traj.status {
            Terminal::Converged { id, .. } => {
                let p = cs.by_id(id);
                assert_eq!(p.index, 2);
                assert!(spec.manifold.distance(&p.location, &DVector::from_vec(vec![0.0, 0.0])) < 1e-9);
            }
            other => panic!("unexpected terminal {other:?}"),
        }
        // Stays on the y = 0 circle.
        for p in &traj.points {
            assert!(p[1].abs() < 1e-9);
        }
        // Independent scalar oracle: x' = -2π sin(2πx) by fixed-step RK4.
        let tau = std::f64::consts::TAU;
        let rhs = |x: f64| -tau * (tau * x).sin();
        let mut x = 0.3;
        let h = 1e-4_f64;
        for (i, &t) in traj.times.iter().enumerate() {
            // March the oracle to time t.
            let already = if i == 0 { 0.0 } else { traj.times[i - 1] };
            let mut s = already;
            while s < t - 1e-12 {
                let step = h.min(t - s);
                let k1 = rhs(x);
                let k2 = rhs(x + 0.5 * step * k1);
                let k3 = rhs(x + 0.5 * step * k2);
                let k4 = rhs(x + step * k3);
                x += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                s += step;
            }
            assert!(
                (x - traj.points[i][0]).abs() < 1e-6,
                "t={t}: oracle {x} vs flow {}",
                traj.points[i][0]
            );
        }
    }

    #[test]
    fn flow_property_composition() {
        let (spec, _) = sphere_height();
        let x0 = v3(0.6, 0.48, -0.64);
        let (x0, _) = spec.manifold.retract(&x0).unwrap();
        for (s, t) in [(0.3, 0.9), (1.2, 0.4)] {
            let a = flow_map(&spec, &x0, s + t, Direction::Forward).unwrap();
            let mid = flow_map(&spec, &x0, t, Direction::Forward).unwrap();
            let b = flow_map(&spec, &mid, s, Direction::Forward).unwrap();
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn transport_is_linear_and_flow_invariant() {
        let (spec, cs) = sphere_height();
        let x0 = spec.manifold.retract(&v3(1.0, 0.2, -0.1)).unwrap().0;
        let traj = integrate(&spec, Some(&cs), &x0, Direction::Forward).unwrap();
        // Zero transports to zero.
        let zero = vec![DVector::zeros(3)];
        let tz = transport(&spec, &traj, &zero, Direction::Forward).unwrap();
        assert!(tz[0].norm() < 1e-12);
        // The velocity field is invariant under its own linearized flow.
        let v0 = spec.velocity(&x0).unwrap();
        let duration = traj.duration().min(2.0);
        let mut marcher = FlowMarcher::new(&spec, x0.clone(), vec![v0], Direction::Forward, false).unwrap();
        marcher.advance_to(duration).unwrap();
        let moved = marcher.frames()[0].clone();
        let v_end = spec.velocity(marcher.position()).unwrap();
        let cosine = moved.dot(&v_end) / (moved.norm() * v_end.norm());
        assert!(cosine > 1.0 - 1e-6, "angle too large: cos={cosine}");
    }

    #[test]
    fn pullback_at_time_zero_is_identity() {
        let (spec, _) = sphere_height();
        let alpha = FormExpression::parse(1, 3, &[(&[0], "1"), (&[2], "x")]).unwrap();
        let x = spec.manifold.retract(&v3(0.3, -0.9, 0.3)).unwrap().0;
        let v = spec.manifold.tangent_project(&x, &v3(0.1, 0.7, -0.2)).unwrap();
        let direct = alpha.eval(x.as_slice(), std::slice::from_ref(&v)).unwrap();
        let pulled = pullback_form(&spec, &alpha, 0.0, &x, &[v]).unwrap();
        assert!((direct - pulled).abs() < 1e-12);
    }

    #[test]
    fn area_pullback_decays_toward_the_pole() {
        let (spec, _) = sphere_height();
        let area = FormExpression::parse(
            2,
            3,
            &[(&[1, 2], "x"), (&[0, 2], "-y"), (&[0, 1], "z")],
        )
        .unwrap();
        let x = spec.manifold.retract(&v3(1.0, 0.1, 0.0)).unwrap().0;
        let basis = spec.manifold.tangent_basis(&x).unwrap();
        let mut last = f64::INFINITY;
        for t in [0.0, 1.0, 2.0, 4.0, 8.0] {
            let val = pullback_form(&spec, &area, t, &x, &basis).unwrap().abs();
            assert!(val <= last + 1e-9, "no decay at t={t}");
            // Cross-check against a finite-difference Jacobian of the flow map.
            if t > 0.0 {
                let h = 1e-6;
                let end = flow_map(&spec, &x, t, Direction::Forward).unwrap();
                let mut fd_frame = Vec::new();
                for b in &basis {
                    let plus = flow_map(
                        &spec,
                        &spec.manifold.retract(&(&x + b * h)).unwrap().0,
                        t,
                        Direction::Forward,
                    )
                    .unwrap();
                    let minus = flow_map(
                        &spec,
                        &spec.manifold.retract(&(&x - b * h)).unwrap().0,
                        t,
                        Direction::Forward,
                    )
                    .unwrap();
                    fd_frame.push((plus - minus) / (2.0 * h));
                }
                let fd_val = area.eval(end.as_slice(), &fd_frame).unwrap().abs();
                assert!(
                    (fd_val - val).abs() < 1e-4 * (1.0 + val),
                    "t={t}: fd {fd_val} vs transported {val}"
                );
            }
            last = val;
        }
        assert!(last < 1e-2, "area should collapse toward the pole");
    }

    #[test]
    fn sphere17_pullback_matches_finite_difference_jacobian() {
        let m = sphere();
        let spec = FlowSpec::sphere17(m, DVector::from_vec(vec![1.0, 0.0]));
        let alpha = FormExpression::parse(1, 3, &[(&[0], "y"), (&[1], "1"), (&[2], "x*z")]).unwrap();
        let x = spec.manifold.retract(&v3(0.1, 0.9, 0.4)).unwrap().0;
        let v = spec.manifold.tangent_project(&x, &v3(-0.3, 0.5, 0.2)).unwrap();
        let t = 1.0;
        let ours = pullback_form(&spec, &alpha, t, &x, std::slice::from_ref(&v)).unwrap();
        // Oracle: finite differences of the closed-form flow map.
        let h = 1e-6;
        let end = flow_map(&spec, &x, t, Direction::Forward).unwrap();
        let plus = flow_map(&spec, &spec.manifold.retract(&(&x + &v * h)).unwrap().0, t, Direction::Forward).unwrap();
        let minus = flow_map(&spec, &spec.manifold.retract(&(&x - &v * h)).unwrap().0, t, Direction::Forward).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        let oracle = alpha.eval(end.as_slice(), &[fd]).unwrap();
        assert!((ours - oracle).abs() < 1e-6, "ours {ours} vs oracle {oracle}");
    }

    #[test]
    fn energy_identity_along_trajectory() {
        let (spec, _) = sphere_height();
        let x0 = spec.manifold.retract(&v3(0.8, -0.5, 0.33)).unwrap().0;
        let f = spec.function().unwrap().clone();
        let duration = 3.0;
        // Quadrature of |∇f|² along the trajectory with fine fixed steps.
        let mut marcher = FlowMarcher::new(&spec, x0.clone(), Vec::new(), Direction::Forward, false).unwrap();
        let mut integral = 0.0;
        let dt = 1e-3_f64;
        let mut prev = marcher.velocity().unwrap().norm_squared();
        let mut t = 0.0;
        while t < duration - 1e-12 {
            marcher.advance_to((t + dt).min(duration)).unwrap();
            let cur = marcher.velocity().unwrap().norm_squared();
            integral += 0.5 * (prev + cur) * (marcher.t() - t);
            t = marcher.t();
            prev = cur;
        }
        let df = f.eval(marcher.position().as_slice()).unwrap() - f.eval(x0.as_slice()).unwrap();
        assert!(
            (df - integral).abs() < 1e-6,
            "energy identity violated: Δf={df}, ∫|V|²={integral}"
        );
    }
}
