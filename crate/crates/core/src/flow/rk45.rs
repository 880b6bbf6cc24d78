//! Embedded Dormand–Prince 5(4) stepping.

use nalgebra::DVector;

use super::FlowError;

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;
const MIN_STEP: f64 = 1e-14;

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

// B5 − B4: weights of the embedded error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One accepted adaptive step from `y`: returns `(y_new, h_used, h_next)`.
///
/// `h_init` is the first attempted size, capped at `h_max`; rejected attempts
/// shrink the step until the scaled error estimate passes.
pub fn adaptive_step<F>(
    rhs: &F,
    y: &DVector<f64>,
    h_init: f64,
    h_max: f64,
    rtol: f64,
    atol: f64,
) -> Result<(DVector<f64>, f64, f64), FlowError>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>, FlowError> + ?Sized,
{
    adaptive_step_masked(rhs, y, h_init, h_max, rtol, atol, 0)
}

/// `adaptive_step` with the last `skip_tail` components excluded from the
/// error score — used for quadrature accumulators that ride the state but
/// should not set the step size (their own O(h⁵) error is negligible once
/// the carried trajectory is resolved).
pub fn adaptive_step_masked<F>(
    rhs: &F,
    y: &DVector<f64>,
    h_init: f64,
    h_max: f64,
    rtol: f64,
    atol: f64,
    skip_tail: usize,
) -> Result<(DVector<f64>, f64, f64), FlowError>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>, FlowError> + ?Sized,
{
    let mut h = h_init.min(h_max).max(MIN_STEP);
    let scored = y.len() - skip_tail;
    loop {
        let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
        k.push(rhs(y)?);
        for s in 0..6 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                let a = A[s][j];
                if a != 0.0 {
                    ys += kj * (a * h);
                }
            }
            k.push(rhs(&ys)?);
        }
        let mut y5 = y.clone();
        let mut err = DVector::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            if B5[j] != 0.0 {
                y5 += kj * (B5[j] * h);
            }
            if E[j] != 0.0 {
                err += kj * (E[j] * h);
            }
        }
        let mut score: f64 = 0.0;
        for i in 0..scored {
            let scale = atol + rtol * y[i].abs().max(y5[i].abs());
            score += (err[i] / scale).powi(2);
        }
        let score = (score / scored.max(1) as f64).sqrt();
        if score <= 1.0 {
            let grow = if score > 0.0 {
                SAFETY * score.powf(-0.2)
            } else {
                MAX_SCALE
            };
            let h_next = (h * grow.clamp(MIN_SCALE, MAX_SCALE)).max(MIN_STEP);
            return Ok((y5, h, h_next));
        }
        if h <= MIN_STEP * 2.0 {
            return Err(FlowError::StepUnderflow {
                t: f64::NAN,
                point: y.as_slice().to_vec(),
            });
        }
        let shrink = SAFETY * score.powf(-0.2);
        h = (h * shrink.clamp(MIN_SCALE, 1.0)).max(MIN_STEP);
    }
}

/// Plain adaptive integrator over a flat state vector with a post-step hook.
pub struct Rk45<'a> {
    rhs: &'a dyn Fn(&DVector<f64>) -> Result<DVector<f64>, FlowError>,
    post: &'a dyn Fn(&mut DVector<f64>) -> Result<(), FlowError>,
    rtol: f64,
    atol: f64,
    pub t: f64,
    pub y: DVector<f64>,
    h: f64,
}

impl<'a> Rk45<'a> {
    pub fn new(
        rhs: &'a dyn Fn(&DVector<f64>) -> Result<DVector<f64>, FlowError>,
        post: &'a dyn Fn(&mut DVector<f64>) -> Result<(), FlowError>,
        y0: DVector<f64>,
        rtol: f64,
        atol: f64,
    ) -> Self {
        Rk45 {
            rhs,
            post,
            rtol,
            atol,
            t: 0.0,
            y: y0,
            h: 1e-3,
        }
    }

    pub fn step(&mut self, h_max: f64) -> Result<f64, FlowError> {
        let (y_new, h_used, h_next) = adaptive_step(
            self.rhs,
            &self.y,
            self.h,
            h_max,
            self.rtol,
            self.atol,
        )
        .map_err(|e| match e {
            FlowError::StepUnderflow { point, .. } => FlowError::StepUnderflow { t: self.t, point },
            other => other,
        })?;
        self.y = y_new;
        (self.post)(&mut self.y)?;
        self.t += h_used;
        self.h = h_next;
        Ok(h_used)
    }

    pub fn advance_to(&mut self, t_target: f64) -> Result<(), FlowError> {
        while self.t < t_target - 1e-15 {
            self.step(t_target - self.t)?;
        }
        Ok(())
    }
}
