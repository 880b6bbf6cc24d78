//! Residues of forms over stable/unstable manifolds, the projection `P`, the
//! degree minus-one operator `T`, and the numerical verifications built on
//! them: the chain homotopy `d∘T + T∘d = I − P`, the chain-map identity
//! `P∘d = d∘P`, and the intersection pairing against a direct integral.
//!
//! `P` is represented intrinsically by its residues on the generators; `T`
//! acts pointwise through `T(α)(x) = −∫_0^∞ (φ_s^* ι_V α)(x) ds`, whose sign
//! is pinned by requiring the chain homotopy to hold verbatim.

pub mod quadrature;
mod valueform;

use nalgebra::DVector;
use thiserror::Error;

use crate::complex::{CoefficientMode, IntMat, MorseComplex};
use crate::connections::{sample_invariant_manifold, ConnError, ConnectionOptions, ManifoldRole};
use crate::critical::{CriticalPoint, CriticalSet};
use crate::expr::{ExprError, FormExpression};
use crate::flow::{sphere17, Direction, FlowError, FlowKind, FlowSpec};
use crate::geometry::{GeomError, ManifoldBackend};

pub use quadrature::{adaptive_simpson, gauss_legendre, gauss_on};
pub use valueform::{ExteriorDerivative, FormField, ValueForm, WedgeField};

#[derive(Debug, Error)]
pub enum CurrentsError {
    #[error("quadrature shells still contributing at max_time; partial value {partial:.6e}")]
    ToleranceFailure { partial: f64 },
    #[error("{0}")]
    Unsupported(String),
    #[error("form degree {got} does not match the required degree {expected}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("operation requires an orientable backend")]
    NonOrientable,
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Conn(#[from] ConnError),
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Radius of the eigen-disk seeding the sweep.
    pub epsilon0: f64,
    /// Shell length in flow time.
    pub shell_dt: f64,
    /// Gauss nodes per shell.
    pub shell_gauss: usize,
    /// A shell counts as quiet when below `rel_tol · |total|`.
    pub rel_tol: f64,
    /// Consecutive quiet shells before stopping.
    pub quiet_shells: usize,
    /// Absolute tolerance of the direction-circle quadrature.
    pub theta_tol: f64,
    pub theta_depth: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            epsilon0: 1e-3,
            shell_dt: 1.0,
            shell_gauss: 8,
            rel_tol: 1e-10,
            quiet_shells: 5,
            theta_tol: 1e-6,
            theta_depth: 26,
        }
    }
}

/// Residue data of one generator: `∫ over its unstable (or stable) manifold`.
#[derive(Debug, Clone)]
pub struct ResidueEntry {
    pub id: usize,
    pub index: usize,
    pub role: ManifoldRole,
    pub value: f64,
    pub error: f64,
}

/// All residues of a fixed-degree form: `r_p = ∫_{U_p} α` over points with
/// `n − λ_p = deg α`, co-residues `s_p = ∫_{S_p} α` over points with
/// `λ_p = deg α`.
#[derive(Debug, Clone)]
pub struct ResidueVector {
    pub degree: usize,
    pub residues: Vec<ResidueEntry>,
    pub coresidues: Vec<ResidueEntry>,
}

/// Formal combination `Σ c_p [S_p]` (or on unstable generators).
#[derive(Debug, Clone)]
pub struct CurrentSum {
    pub entries: Vec<(f64, usize, ManifoldRole)>,
}

impl CurrentSum {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn coefficient_of(&self, id: usize) -> f64 {
        self.entries
            .iter()
            .find(|(_, g, _)| *g == id)
            .map_or(0.0, |(c, _, _)| *c)
    }
}

/// `∫ over the unstable manifold of p` of a field of degree `n − λ_p`.
pub fn integrate_over_unstable(
    spec: &FlowSpec,
    cs: &CriticalSet,
    p: usize,
    field: &dyn FormField,
    opts: &QuadratureOptions,
) -> Result<(f64, f64), CurrentsError> {
    invariant_manifold_integral(spec, cs.by_id(p), field, ManifoldRole::Unstable, opts)
}

/// `∫ over the stable manifold of p` of a field of degree `λ_p`.
pub fn integrate_over_stable(
    spec: &FlowSpec,
    cs: &CriticalSet,
    p: usize,
    field: &dyn FormField,
    opts: &QuadratureOptions,
) -> Result<(f64, f64), CurrentsError> {
    invariant_manifold_integral(spec, cs.by_id(p), field, ManifoldRole::Stable, opts)
}

/// Oriented integral over `U_p` or `S_p`: Gauss quadrature over the seeding
/// eigen-disk plus the sweep `(t, s) ↦ φ_±t(p + ε₀·s)` over the eigen-sphere,
/// with the flow-transported frame supplying the Jacobian.
fn invariant_manifold_integral(
    spec: &FlowSpec,
    point: &CriticalPoint,
    field: &dyn FormField,
    role: ManifoldRole,
    opts: &QuadratureOptions,
) -> Result<(f64, f64), CurrentsError> {
    if !spec.manifold.orientable() {
        return Err(CurrentsError::NonOrientable);
    }
    let (frame, dir) = match role {
        ManifoldRole::Unstable => (&point.unstable_frame.vectors, Direction::Forward),
        ManifoldRole::Stable => (&point.stable_frame.vectors, Direction::Backward),
    };
    let m = frame.len();
    if field.degree() != m {
        return Err(CurrentsError::DegreeMismatch {
            expected: m,
            got: field.degree(),
        });
    }
    match m {
        0 => Ok((field.eval(point.location.as_slice(), &[])?, 0.0)),
        1 => {
            let u = &frame[0];
            let disk = disk_integral_1d(spec, point, u, field, opts)?;
            let mut total = disk;
            let mut err = 1e-16;
            for branch in [1.0f64, -1.0] {
                let x0 = spec
                    .manifold
                    .retract(&(&point.location + u * (branch * opts.epsilon0)))?
                    .0;
                let sigma = ray_orientation(spec, &x0, dir, &[], std::slice::from_ref(u))?;
                let (val, e) = ray_integral(spec, &x0, Vec::new(), dir, field, opts)?;
                total += sigma * val;
                err += e;
            }
            Ok((total, err))
        }
        2 => {
            let disk = disk_integral_2d(spec, point, frame, field, opts)?;
            let mut err_total = 1e-16;
            let base = point.location.clone();
            let u0 = frame[0].clone();
            let u1 = frame[1].clone();
            let mut f = |theta: f64| -> Result<f64, CurrentsError> {
                if std::env::var_os("MORSEFLOW_TRACE_THETA").is_some() {
                    eprintln!("theta eval: {theta:.12}");
                }
                let dir_vec = &u0 * theta.cos() + &u1 * theta.sin();
                let x0 = spec
                    .manifold
                    .retract(&(&base + &dir_vec * opts.epsilon0))?
                    .0;
                // Tangent of the seeding circle by central differences.
                let h = 1e-6;
                let plus = spec
                    .manifold
                    .retract(&(&base + (&u0 * (theta + h).cos() + &u1 * (theta + h).sin()) * opts.epsilon0))?
                    .0;
                let minus = spec
                    .manifold
                    .retract(&(&base + (&u0 * (theta - h).cos() + &u1 * (theta - h).sin()) * opts.epsilon0))?
                    .0;
                let w0 = (plus - minus) / (2.0 * h);
                let sigma = ray_orientation(spec, &x0, dir, std::slice::from_ref(&w0), &[u0.clone(), u1.clone()])?;
                let (val, _) = ray_integral(spec, &x0, vec![w0], dir, field, opts)?;
                Ok(sigma * val)
            };
            // Start the periodic integral at an irrational offset: separatrix
            // directions of symmetric fields sit at eigenframe-aligned angles,
            // and a dyadic panel edge landing exactly on such a direction
            // hides its (integrable) singularity from the refinement.
            let offset = std::f64::consts::FRAC_1_PI;
            let (sweep, e) = adaptive_simpson(
                &mut f,
                offset,
                offset + std::f64::consts::TAU,
                opts.theta_tol,
                opts.theta_depth,
            )?;
            err_total += e;
            Ok((disk + sweep, err_total))
        }
        _ => Err(CurrentsError::Unsupported(format!(
            "sweep quadrature over {m}-dimensional invariant manifolds (catalog needs ≤ 2)"
        ))),
    }
}

/// Sign of the sweep parametrization frame against the chosen orientation of
/// the invariant manifold: coordinates of (±V, sphere tangents) in the
/// oriented eigenframe.
fn ray_orientation(
    spec: &FlowSpec,
    x0: &DVector<f64>,
    dir: Direction,
    sphere_tangents: &[DVector<f64>],
    oriented_frame: &[DVector<f64>],
) -> Result<f64, CurrentsError> {
    let v = spec.velocity(x0)? * dir.sign();
    let m = oriented_frame.len();
    let mut mat = nalgebra::DMatrix::zeros(m, m);
    for (i, b) in oriented_frame.iter().enumerate() {
        mat[(i, 0)] = v.dot(b);
        for (j, w) in sphere_tangents.iter().enumerate() {
            mat[(i, j + 1)] = w.dot(b);
        }
    }
    let det = mat.determinant();
    Ok(if det >= 0.0 { 1.0 } else { -1.0 })
}

/// Time quadrature along one sweep ray with the transported frame.
///
/// The integrand `field(x(t))(±V, w(t)…)` rides the trajectory as an extra
/// quadrature state of the adaptive integrator, so sharp transition pulses
/// are resolved by the same step control that resolves the position; the
/// integration stops once whole shells stay below both the relative and the
/// absolute quiet floor.
fn ray_integral(
    spec: &FlowSpec,
    x0: &DVector<f64>,
    sphere_frame: Vec<DVector<f64>>,
    dir: Direction,
    field: &dyn FormField,
    opts: &QuadratureOptions,
) -> Result<(f64, f64), CurrentsError> {
    sweep_time_quadrature(spec, x0, sphere_frame, dir, field, true, opts)
}

/// Shared driver for `ray_integral` (sweep tangent `±V` first) and the
/// pointwise `T` operator (plain `V` first).
fn sweep_time_quadrature(
    spec: &FlowSpec,
    x0: &DVector<f64>,
    carried: Vec<DVector<f64>>,
    dir: Direction,
    field: &dyn FormField,
    orient_velocity: bool,
    opts: &QuadratureOptions,
) -> Result<(f64, f64), CurrentsError> {
    const ABS_FLOOR: f64 = 1e-10;
    let v_sign = if orient_velocity { dir.sign() } else { 1.0 };
    let max_time = spec.controls.max_time;

    if matches!(spec.kind, FlowKind::Sphere17 { .. }) {
        // Closed-form flow: random access in t, adaptive Simpson per shell.
        let signed = |t: f64| dir.sign() * t;
        let u = match &spec.kind {
            FlowKind::Sphere17 { direction } => direction.clone(),
            _ => unreachable!(),
        };
        let mut eval_at = |t: f64| -> Result<f64, CurrentsError> {
            let pos = sphere17::flow_point(x0, &u, signed(t));
            let mut frame = Vec::with_capacity(1 + carried.len());
            frame.push(sphere17::velocity(&pos, &u) * v_sign);
            for w in &carried {
                frame.push(sphere17::flow_differential(x0, &u, signed(t), w));
            }
            Ok(field.eval(pos.as_slice(), &frame)?)
        };
        let mut total = 0.0;
        let mut err = 0.0;
        let mut quiet = 0;
        let mut t = 0.0;
        while t < max_time {
            let end = (t + opts.shell_dt).min(max_time);
            let (shell, e) = adaptive_simpson(&mut eval_at, t, end, 1e-12, 30)?;
            total += shell;
            err += e;
            if shell.abs() <= (opts.rel_tol * total.abs()).max(ABS_FLOOR) {
                quiet += 1;
                if quiet >= opts.quiet_shells {
                    return Ok((total, err.max(1e-16)));
                }
            } else {
                quiet = 0;
            }
            t = end;
        }
        return Err(CurrentsError::ToleranceFailure { partial: total });
    }

    // Gradient flow: joint state [x; w_1..w_k; acc] with
    // acc' = field(x)(±V, w…); the accumulator rides the state outside the
    // error score.
    let n = spec.manifold.ambient_dim();
    let k = carried.len();
    let s = dir.sign();
    let rtol = spec.controls.rtol.min(1e-9);
    let atol = spec.controls.atol.min(1e-11);
    let implicit = matches!(
        spec.manifold,
        ManifoldBackend::ImplicitHypersurface { .. }
    );

    let rhs = |y: &DVector<f64>| -> Result<DVector<f64>, FlowError> {
        let x = y.rows(0, n).into_owned();
        let v = spec.velocity(&x)?;
        let mut out = DVector::zeros(n * (k + 1) + 1);
        out.rows_mut(0, n).copy_from(&(&v * s));
        let mut frame = Vec::with_capacity(1 + k);
        frame.push(&v * v_sign);
        if k > 0 {
            let jac = spec.velocity_jacobian(&x)?;
            for i in 0..k {
                let w = y.rows(n * (i + 1), n).into_owned();
                out.rows_mut(n * (i + 1), n).copy_from(&(&jac * &w * s));
                frame.push(w);
            }
        }
        out[n * (k + 1)] = field
            .eval(x.as_slice(), &frame)
            .map_err(FlowError::from)?;
        Ok(out)
    };

    let mut state = DVector::zeros(n * (k + 1) + 1);
    state.rows_mut(0, n).copy_from(x0);
    for (i, w) in carried.iter().enumerate() {
        state.rows_mut(n * (i + 1), n).copy_from(w);
    }
    let mut t = 0.0;
    let mut h = 1e-4;
    let mut total_prev = 0.0;
    let mut pos_prev = x0.clone();
    let mut quiet = 0;
    let mut shell_end = opts.shell_dt;
    while t < max_time {
        let target = shell_end.min(max_time);
        while t < target - 1e-13 {
            let (y_new, h_used, h_next) =
                crate::flow::rk45::adaptive_step_masked(&rhs, &state, h, target - t, rtol, atol, 1)
                    .map_err(CurrentsError::Flow)?;
            state = y_new;
            t += h_used;
            h = h_next;
            if implicit {
                let x = state.rows(0, n).into_owned();
                let (xr, _) = spec.manifold.retract(&x)?;
                state.rows_mut(0, n).copy_from(&xr);
                for i in 0..k {
                    let w = state.rows(n * (i + 1), n).into_owned();
                    let w = spec.manifold.tangent_project(&xr, &w)?;
                    state.rows_mut(n * (i + 1), n).copy_from(&w);
                }
            }
        }
        let total = state[n * (k + 1)];
        let shell = total - total_prev;
        total_prev = total;
        let pos = state.rows(0, n).into_owned();
        let moved = (&pos - &pos_prev).norm();
        pos_prev = pos;
        // Quiet either by contribution size or because the trajectory has
        // pinned itself to the limit point (remaining contribution is then
        // bounded by the leftover path length).
        if shell.abs() <= (opts.rel_tol * total.abs()).max(ABS_FLOOR) || moved < 1e-8 {
            quiet += 1;
            if quiet >= opts.quiet_shells {
                return Ok((total, shell.abs().max(1e-16)));
            }
        } else {
            quiet = 0;
        }
        shell_end += opts.shell_dt;
    }
    Err(CurrentsError::ToleranceFailure {
        partial: state[n * (k + 1)],
    })
}

fn disk_integral_1d(
    spec: &FlowSpec,
    point: &CriticalPoint,
    u: &DVector<f64>,
    field: &dyn FormField,
    opts: &QuadratureOptions,
) -> Result<f64, CurrentsError> {
    let (nodes, weights) = gauss_legendre(8);
    let h = 1e-6;
    let base = &point.location;
    let val = gauss_on(&nodes, &weights, -opts.epsilon0, opts.epsilon0, |r| {
        let at = spec.manifold.retract(&(base + u * r))?.0;
        let plus = spec.manifold.retract(&(base + u * (r + h)))?.0;
        let minus = spec.manifold.retract(&(base + u * (r - h)))?.0;
        let tangent = (plus - minus) / (2.0 * h);
        Ok::<f64, CurrentsError>(field.eval(at.as_slice(), &[tangent])?)
    })?;
    Ok(val)
}

fn disk_integral_2d(
    spec: &FlowSpec,
    point: &CriticalPoint,
    frame: &[DVector<f64>],
    field: &dyn FormField,
    opts: &QuadratureOptions,
) -> Result<f64, CurrentsError> {
    let (nodes, weights) = gauss_legendre(4);
    let k_theta = 16;
    let h = 1e-6;
    let base = &point.location;
    let u0 = &frame[0];
    let u1 = &frame[1];
    let mut total = 0.0;
    for i in 0..k_theta {
        let theta = i as f64 / k_theta as f64 * std::f64::consts::TAU;
        let dir = |th: f64| -> DVector<f64> { u0 * th.cos() + u1 * th.sin() };
        let radial = gauss_on(&nodes, &weights, 0.0, opts.epsilon0, |r| {
            let at = spec.manifold.retract(&(base + dir(theta) * r))?.0;
            let dr = {
                let plus = spec.manifold.retract(&(base + dir(theta) * (r + h)))?.0;
                let minus = spec.manifold.retract(&(base + dir(theta) * (r - h)))?.0;
                (plus - minus) / (2.0 * h)
            };
            let dth = {
                let plus = spec.manifold.retract(&(base + dir(theta + h) * r))?.0;
                let minus = spec.manifold.retract(&(base + dir(theta - h) * r))?.0;
                (plus - minus) / (2.0 * h)
            };
            Ok::<f64, CurrentsError>(field.eval(at.as_slice(), &[dr, dth])?)
        })?;
        total += radial * std::f64::consts::TAU / k_theta as f64;
    }
    Ok(total)
}

/// Residues and co-residues of `alpha` across the critical set.
pub fn residue_table(
    spec: &FlowSpec,
    cs: &CriticalSet,
    alpha: &FormExpression,
    opts: &QuadratureOptions,
) -> Result<ResidueVector, CurrentsError> {
    let n = spec.manifold.dim();
    let k = alpha.degree();
    let mut residues = Vec::new();
    let mut coresidues = Vec::new();
    for p in &cs.points {
        if n - p.index == k {
            let (value, error) =
                invariant_manifold_integral(spec, p, alpha, ManifoldRole::Unstable, opts)?;
            residues.push(ResidueEntry {
                id: p.id,
                index: p.index,
                role: ManifoldRole::Unstable,
                value,
                error,
            });
        }
        if p.index == k {
            let (value, error) =
                invariant_manifold_integral(spec, p, alpha, ManifoldRole::Stable, opts)?;
            coresidues.push(ResidueEntry {
                id: p.id,
                index: p.index,
                role: ManifoldRole::Stable,
                value,
                error,
            });
        }
    }
    Ok(ResidueVector {
        degree: k,
        residues,
        coresidues,
    })
}

/// `P(α) = Σ r_p(α)·[S_p]`, supported on generators with `n − λ_p = deg α`;
/// the empty sum when no index matches.
pub fn p_apply(
    spec: &FlowSpec,
    cs: &CriticalSet,
    alpha: &FormExpression,
    opts: &QuadratureOptions,
) -> Result<CurrentSum, CurrentsError> {
    let table = residue_table(spec, cs, alpha, opts)?;
    Ok(CurrentSum {
        entries: table
            .residues
            .into_iter()
            .map(|e| (e.value, e.id, ManifoldRole::Stable))
            .collect(),
    })
}

/// Pointwise value of `T(α)(x)` on `deg α − 1` tangent vectors:
/// `−∫_0^∞ α(φ_s x)(V, dφ_s v_1, …) ds`. Degree 0 forms give 0.
pub fn t_apply_pointwise(
    spec: &FlowSpec,
    field: &dyn FormField,
    x: &DVector<f64>,
    vectors: &[DVector<f64>],
    opts: &QuadratureOptions,
) -> Result<f64, CurrentsError> {
    if field.degree() == 0 {
        return Ok(0.0);
    }
    assert_eq!(vectors.len(), field.degree() - 1);
    let (total, _) = sweep_time_quadrature(
        spec,
        x,
        vectors.to_vec(),
        Direction::Forward,
        field,
        false,
        opts,
    )?;
    Ok(-total)
}

/// Report of the pointwise chain-homotopy verification.
#[derive(Debug, Clone)]
pub struct FmeReport {
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub samples_used: usize,
}

/// Admissible sample points: away from the critical points and from the
/// stable manifolds of index < n by the given margin.
pub fn admissible_samples(
    spec: &FlowSpec,
    cs: Option<&CriticalSet>,
    count: usize,
    margin: f64,
    seed: u64,
) -> Result<Vec<DVector<f64>>, CurrentsError> {
    use rand::SeedableRng;
    let mut exclusion: Vec<DVector<f64>> = Vec::new();
    let n = spec.manifold.dim();
    if let Some(set) = cs {
        let conn_opts = ConnectionOptions::default();
        for p in &set.points {
            exclusion.push(p.location.clone());
            if p.index < n && p.index > 0 {
                exclusion.extend(sample_invariant_manifold(
                    spec,
                    set,
                    p.id,
                    ManifoldRole::Stable,
                    &conn_opts,
                )?);
            }
        }
    }
    if matches!(spec.kind, FlowKind::Sphere17 { .. }) {
        exclusion.push(sphere17::fixed_point());
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut guard = 0;
    while out.len() < count && guard < 1000 * count {
        guard += 1;
        let x = spec.manifold.sample_point(&mut rng)?;
        if exclusion
            .iter()
            .all(|e| spec.manifold.distance(&x, e) > margin)
        {
            out.push(x);
        }
    }
    Ok(out)
}

/// Verify `d(Tα) + T(dα) = α` pointwise at the samples (the identity holds
/// off the stable manifolds where `P(α)` is supported).
///
/// `d(Tα)` is computed by central finite differences of `T` evaluations on
/// an ambient extension (retraction inside, frozen ambient argument vectors),
/// which restricts to the intrinsic exterior derivative.
pub fn verify_fme(
    spec: &FlowSpec,
    alpha: &FormExpression,
    samples: &[DVector<f64>],
    fd_step: f64,
    opts: &QuadratureOptions,
) -> Result<FmeReport, CurrentsError> {
    let k = alpha.degree();
    if k == 0 {
        return Err(CurrentsError::DegreeMismatch {
            expected: 1,
            got: 0,
        });
    }
    // Tighter trajectory tolerances: the finite difference divides by 2h.
    let mut tight = spec.clone();
    tight.controls.rtol = spec.controls.rtol.min(1e-11);
    tight.controls.atol = spec.controls.atol.min(1e-13);

    let d_alpha = ExteriorDerivative(alpha);
    let mut residuals = Vec::with_capacity(samples.len());
    for x in samples {
        let basis = tight.manifold.tangent_basis(x)?;
        let mut worst = 0.0f64;
        for tuple in increasing_tuples(basis.len(), k) {
            let vecs: Vec<DVector<f64>> = tuple.iter().map(|&i| basis[i].clone()).collect();
            // d(Tα) on the tuple: alternating sum of directional derivatives
            // of T(α) evaluated on the remaining vectors.
            let mut d_t = 0.0;
            for (omit, &bi) in tuple.iter().enumerate() {
                let rest: Vec<DVector<f64>> = tuple
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != omit)
                    .map(|(_, &i)| basis[i].clone())
                    .collect();
                let dir = &basis[bi];
                let eval_at = |shift: f64| -> Result<f64, CurrentsError> {
                    let (moved, _) = tight.manifold.retract(&(x + dir * shift))?;
                    let proj: Vec<DVector<f64>> = rest
                        .iter()
                        .map(|w| tight.manifold.tangent_project(&moved, w))
                        .collect::<Result<_, _>>()?;
                    t_apply_pointwise(&tight, alpha, &moved, &proj, opts)
                };
                let deriv = (eval_at(fd_step)? - eval_at(-fd_step)?) / (2.0 * fd_step);
                let sign = if omit % 2 == 0 { 1.0 } else { -1.0 };
                d_t += sign * deriv;
            }
            let t_d = t_apply_pointwise(&tight, &d_alpha, x, &vecs, opts)?;
            let rhs = alpha.eval(x.as_slice(), &vecs)?;
            worst = worst.max((d_t + t_d - rhs).abs());
        }
        residuals.push(worst);
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(FmeReport {
        max_residual,
        samples_used: residuals.len(),
        residuals,
    })
}

fn increasing_tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

/// One row of the chain-map identity `Σ_p r_p(β)·n_{pq} = r_q(dβ)`.
#[derive(Debug, Clone)]
pub struct ChainMapRow {
    pub q: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct ChainMapReport {
    pub rows: Vec<ChainMapRow>,
    pub max_residual: f64,
}

/// Verify `d(P(β)) = P(dβ)` expanded over the generators: for every `q` one
/// degree below the residue degree of `β`, the residue-weighted boundary
/// entries must reproduce the residue of `dβ`.
pub fn verify_p_chain_map(
    spec: &FlowSpec,
    cs: &CriticalSet,
    complex: &MorseComplex,
    beta: &FormExpression,
    opts: &QuadratureOptions,
) -> Result<ChainMapReport, CurrentsError> {
    assert!(
        matches!(complex.mode, CoefficientMode::Integers),
        "chain-map check runs on the integral complex"
    );
    let n = spec.manifold.dim();
    let k = beta.degree();
    let lambda = n - k;
    if lambda == 0 {
        return Ok(ChainMapReport {
            rows: Vec::new(),
            max_residual: 0.0,
        });
    }
    let table = residue_table(spec, cs, beta, opts)?;
    let d_beta = ExteriorDerivative(beta);
    let dk: &IntMat = &complex.boundary[lambda];
    let cols = &complex.generators_by_degree[lambda];
    let rows_ids = &complex.generators_by_degree[lambda - 1];
    let mut rows = Vec::new();
    let mut max_residual = 0.0f64;
    for (ri, &q) in rows_ids.iter().enumerate() {
        let mut lhs = 0.0;
        for (cj, &p) in cols.iter().enumerate() {
            let n_pq = dk[(ri, cj)];
            if n_pq != 0 {
                let r_p = table
                    .residues
                    .iter()
                    .find(|e| e.id == p)
                    .map_or(0.0, |e| e.value);
                lhs += r_p * n_pq as f64;
            }
        }
        let (rhs, _) = integrate_over_unstable(spec, cs, q, &d_beta, opts)?;
        max_residual = max_residual.max((lhs - rhs).abs());
        rows.push(ChainMapRow { q, lhs, rhs });
    }
    Ok(ChainMapReport { rows, max_residual })
}

#[derive(Debug, Clone)]
pub struct PairingReport {
    pub residue_pairing: f64,
    pub direct_integral: f64,
    pub difference: f64,
}

/// Residue-based intersection pairing of two closed forms against the direct
/// wedge integral `∫_X α∧β`.
pub fn pairing(
    spec: &FlowSpec,
    cs: &CriticalSet,
    alpha: &FormExpression,
    beta: &FormExpression,
    opts: &QuadratureOptions,
) -> Result<PairingReport, CurrentsError> {
    let n = spec.manifold.dim();
    if alpha.degree() + beta.degree() != n {
        return Err(CurrentsError::DegreeMismatch {
            expected: n,
            got: alpha.degree() + beta.degree(),
        });
    }
    if !spec.manifold.orientable() {
        return Err(CurrentsError::NonOrientable);
    }
    let mut residue_pairing = 0.0;
    for p in &cs.points {
        if n - p.index == alpha.degree() && p.index == beta.degree() {
            let (r, _) = invariant_manifold_integral(spec, p, alpha, ManifoldRole::Unstable, opts)?;
            let (s, _) = invariant_manifold_integral(spec, p, beta, ManifoldRole::Stable, opts)?;
            residue_pairing += r * s;
        }
    }
    let wedge = WedgeField { alpha, beta };
    let direct_integral = global_integral(&spec.manifold, &wedge)?;
    Ok(PairingReport {
        residue_pairing,
        direct_integral,
        difference: (residue_pairing - direct_integral).abs(),
    })
}

/// `∫_X ω` for a top-degree field: spherical patches (split at the equator)
/// for implicit backends, tensor Gauss over the fundamental cell for flat
/// quotients.
pub fn global_integral(
    manifold: &ManifoldBackend,
    field: &dyn FormField,
) -> Result<f64, CurrentsError> {
    let n = manifold.dim();
    if field.degree() != n {
        return Err(CurrentsError::DegreeMismatch {
            expected: n,
            got: field.degree(),
        });
    }
    if !manifold.orientable() {
        return Err(CurrentsError::NonOrientable);
    }
    match manifold {
        ManifoldBackend::ImplicitHypersurface { ambient_dim, .. } => match ambient_dim {
            2 => {
                let k = 512;
                let mut total = 0.0;
                let h = 1e-6;
                for i in 0..k {
                    let phi = (i as f64 + 0.5) / k as f64 * std::f64::consts::TAU;
                    let at = manifold
                        .retract(&DVector::from_vec(vec![phi.cos(), phi.sin()]))?
                        .0;
                    let tangent = {
                        let plus = manifold
                            .retract(&DVector::from_vec(vec![(phi + h).cos(), (phi + h).sin()]))?
                            .0;
                        let minus = manifold
                            .retract(&DVector::from_vec(vec![(phi - h).cos(), (phi - h).sin()]))?
                            .0;
                        (plus - minus) / (2.0 * h)
                    };
                    let orientation = manifold.frame_det(&at, std::slice::from_ref(&tangent))?.signum();
                    total += orientation * field.eval(at.as_slice(), &[tangent])?
                        * std::f64::consts::TAU
                        / k as f64;
                }
                Ok(total)
            }
            3 => {
                // Two polar caps with the split on the equator; each cap in
                // spherical coordinates retracted onto the surface.
                let (nodes, weights) = gauss_legendre(32);
                let k_phi = 64;
                let h = 1e-6;
                let mut total = 0.0;
                let embed = |theta: f64, phi: f64| -> DVector<f64> {
                    DVector::from_vec(vec![
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                        theta.cos(),
                    ])
                };
                for cap in 0..2 {
                    let (a, b) = if cap == 0 {
                        (0.0, std::f64::consts::FRAC_PI_2)
                    } else {
                        (std::f64::consts::FRAC_PI_2, std::f64::consts::PI)
                    };
                    let mid = 0.5 * (a + b);
                    let half = 0.5 * (b - a);
                    for (x, w) in nodes.iter().zip(&weights) {
                        let theta = mid + half * x;
                        for j in 0..k_phi {
                            let phi = (j as f64 + 0.5) / k_phi as f64 * std::f64::consts::TAU;
                            let at = manifold.retract(&embed(theta, phi))?.0;
                            let d_theta = (manifold.retract(&embed(theta + h, phi))?.0
                                - manifold.retract(&embed(theta - h, phi))?.0)
                                / (2.0 * h);
                            let d_phi = (manifold.retract(&embed(theta, phi + h))?.0
                                - manifold.retract(&embed(theta, phi - h))?.0)
                                / (2.0 * h);
                            let orientation =
                                manifold.frame_det(&at, &[d_theta.clone(), d_phi.clone()])?;
                            let sign = orientation.signum();
                            total += sign
                                * field.eval(at.as_slice(), &[d_theta, d_phi])?
                                * w
                                * half
                                * std::f64::consts::TAU
                                / k_phi as f64;
                        }
                    }
                }
                Ok(total)
            }
            other => Err(CurrentsError::Unsupported(format!(
                "global quadrature for implicit hypersurfaces in R^{other}"
            ))),
        },
        ManifoldBackend::FlatQuotient { dim, .. } => {
            let (nodes, weights) = gauss_legendre(16);
            let frame: Vec<DVector<f64>> = (0..*dim)
                .map(|i| {
                    let mut e = DVector::zeros(*dim);
                    e[i] = 1.0;
                    e
                })
                .collect();
            // Tensor product over the unit cell.
            let mut total = 0.0;
            let mut idx = vec![0usize; *dim];
            loop {
                let mut weight = 1.0;
                let mut x = DVector::zeros(*dim);
                for a in 0..*dim {
                    x[a] = 0.5 + 0.5 * nodes[idx[a]];
                    weight *= 0.5 * weights[idx[a]];
                }
                total += weight * field.eval(x.as_slice(), &frame)?;
                let mut a = 0;
                loop {
                    if a == *dim {
                        return Ok(total);
                    }
                    idx[a] += 1;
                    if idx[a] < nodes.len() {
                        break;
                    }
                    idx[a] = 0;
                    a += 1;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntegralResidueEntry {
    pub id: usize,
    pub value: f64,
    pub nearest: i64,
    pub within_tol: bool,
}

#[derive(Debug, Clone)]
pub struct IntegralResidueReport {
    pub entries: Vec<IntegralResidueEntry>,
    pub all_integral: bool,
    /// Set when the form is closed with integral residues: `T(α)` is then a
    /// spark, `dT(α) = α − P(α)` with integrally-supported `P(α)`.
    pub spark_note: Option<String>,
}

/// Check whether every matching-degree residue of `alpha` is within
/// `int_tol` of an integer.
pub fn check_integral_residues(
    spec: &FlowSpec,
    cs: &CriticalSet,
    alpha: &FormExpression,
    int_tol: f64,
    opts: &QuadratureOptions,
) -> Result<IntegralResidueReport, CurrentsError> {
    let table = residue_table(spec, cs, alpha, opts)?;
    let entries: Vec<IntegralResidueEntry> = table
        .residues
        .iter()
        .map(|e| {
            let nearest = e.value.round() as i64;
            IntegralResidueEntry {
                id: e.id,
                value: e.value,
                nearest,
                within_tol: (e.value - nearest as f64).abs() <= int_tol,
            }
        })
        .collect();
    let all_integral = entries.iter().all(|e| e.within_tol);
    let spark_note = if all_integral && is_closed(alpha, spec)? {
        Some(
            "closed form with integral residues: T(α) is a spark (dT(α) = α − P(α) with \
             integral P(α))"
                .to_string(),
        )
    } else {
        None
    };
    Ok(IntegralResidueReport {
        entries,
        all_integral,
        spark_note,
    })
}

fn is_closed(alpha: &FormExpression, spec: &FlowSpec) -> Result<bool, CurrentsError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    for _ in 0..8 {
        let x = spec.manifold.sample_point(&mut rng)?;
        let d = ValueForm::exterior_derivative(alpha, x.as_slice())?;
        if d.max_abs_coefficient() > 1e-9 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::{find_critical_points, CriticalOptions, SeedSpec};
    use crate::expr::ScalarExpression;

    fn circle_setup() -> (FlowSpec, CriticalSet) {
        let m = ManifoldBackend::implicit(2, ScalarExpression::parse("x^2+y^2-1", 2).unwrap());
        let f = ScalarExpression::parse("x", 2).unwrap();
        let cs = find_critical_points(
            &m,
            &f,
            &SeedSpec::Random { count: 40, seed: 9 },
            &CriticalOptions::default(),
        )
        .unwrap();
        (FlowSpec::gradient_uphill(m, f), cs)
    }

    fn sphere_setup() -> (FlowSpec, CriticalSet) {
        let m = ManifoldBackend::implicit(3, ScalarExpression::parse("x^2+y^2+z^2-1", 3).unwrap());
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

    fn torus_setup() -> (FlowSpec, CriticalSet) {
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
        (FlowSpec::gradient_uphill(m, f), cs)
    }

    fn angular_form() -> FormExpression {
        // dθ = −y dx + x dy on the unit circle.
        FormExpression::parse(1, 2, &[(&[0], "-y/(x^2+y^2)"), (&[1], "x/(x^2+y^2)")]).unwrap()
    }

    #[test]
    fn circle_residue_of_normalized_angular_form() {
        let (spec, cs) = circle_setup();
        let min = cs.of_index(0)[0].id;
        let alpha =
            FormExpression::parse(1, 2, &[(&[0], "-y/(2*pi)"), (&[1], "x/(2*pi)")]).unwrap();
        let (val, _) =
            integrate_over_unstable(&spec, &cs, min, &alpha, &QuadratureOptions::default())
                .unwrap();
        assert!(
            (val.abs() - 1.0).abs() < 1e-6,
            "residue of dθ/2π over the punctured circle: {val}"
        );
    }

    #[test]
    fn torus_saddle_residue_of_dx() {
        let (spec, cs) = torus_setup();
        let dx = FormExpression::parse(1, 2, &[(&[0], "1")]).unwrap();
        let opts = QuadratureOptions::default();
        let mut values = Vec::new();
        for s in cs.of_index(1) {
            let (val, _) = integrate_over_unstable(&spec, &cs, s.id, &dx, &opts).unwrap();
            values.push(val);
        }
        values.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
        assert!(values[0].abs() < 1e-6, "dx over a vertical circle vanishes");
        assert!(
            (values[1].abs() - 1.0).abs() < 1e-6,
            "dx over the horizontal circle has unit period: {}",
            values[1]
        );
    }

    #[test]
    fn p_of_unmatched_degree_is_empty() {
        let (spec, cs) = sphere_setup();
        let alpha = FormExpression::parse(1, 3, &[(&[0], "1"), (&[1], "z")]).unwrap();
        let sum = p_apply(&spec, &cs, &alpha, &QuadratureOptions::default()).unwrap();
        assert!(sum.is_empty(), "no index-1 points on the height sphere");
    }

    #[test]
    fn circle_p_reproduces_total_integral() {
        let (spec, cs) = circle_setup();
        let alpha =
            FormExpression::parse(1, 2, &[(&[0], "-y*(2+y)"), (&[1], "x*(2+y)")]).unwrap();
        // ∮ (2 + sinθ) dθ = 4π.
        let sum = p_apply(&spec, &cs, &alpha, &QuadratureOptions::default()).unwrap();
        assert_eq!(sum.entries.len(), 1);
        let min = cs.of_index(0)[0].id;
        let coeff = sum.coefficient_of(min);
        assert!(
            (coeff.abs() - 4.0 * std::f64::consts::PI).abs() < 1e-5,
            "coefficient {coeff}"
        );
    }

    #[test]
    fn t_apply_matches_circle_closed_form() {
        let (spec, cs) = circle_setup();
        // T(dθ)(x) = θ(x) − θ_∞ where θ_∞ is the angle of the forward limit.
        let alpha = angular_form();
        let x = spec
            .manifold
            .retract(&DVector::from_vec(vec![(1.0f64).cos(), (1.0f64).sin()]))
            .unwrap()
            .0;
        let val =
            t_apply_pointwise(&spec, &alpha, &x, &[], &QuadratureOptions::default()).unwrap();
        // Forward limit is the maximum of f = x at angle 0.
        let max = cs.of_index(1)[0];
        assert!(max.location[0] > 0.9);
        assert!((val - 1.0).abs() < 1e-6, "T(dθ) at angle 1: {val}");
    }

    #[test]
    fn t_apply_is_linear() {
        let (spec, _) = circle_setup();
        let alpha = angular_form();
        let beta = FormExpression::parse(1, 2, &[(&[0], "x"), (&[1], "y*x")]).unwrap();
        let combo =
            FormExpression::parse(
                1,
                2,
                &[
                    (&[0], "2*(-y/(x^2+y^2)) + 3*x"),
                    (&[1], "2*(x/(x^2+y^2)) + 3*(y*x)"),
                ],
            )
            .unwrap();
        let x = spec
            .manifold
            .retract(&DVector::from_vec(vec![0.3, 0.95]))
            .unwrap()
            .0;
        let opts = QuadratureOptions::default();
        let a = t_apply_pointwise(&spec, &alpha, &x, &[], &opts).unwrap();
        let b = t_apply_pointwise(&spec, &beta, &x, &[], &opts).unwrap();
        let c = t_apply_pointwise(&spec, &combo, &x, &[], &opts).unwrap();
        assert!((c - (2.0 * a + 3.0 * b)).abs() < 1e-8);
    }

    #[test]
    fn fme_on_circle() {
        let (spec, cs) = circle_setup();
        // α = (2 + sinθ)dθ expressed in ambient coordinates.
        let alpha =
            FormExpression::parse(1, 2, &[(&[0], "-y*(2+y)"), (&[1], "x*(2+y)")]).unwrap();
        let samples = admissible_samples(&spec, Some(&cs), 20, 1e-2, 31).unwrap();
        assert!(samples.len() >= 20);
        let report =
            verify_fme(&spec, &alpha, &samples, 1e-4, &QuadratureOptions::default()).unwrap();
        assert!(
            report.max_residual < 1e-3,
            "FME residual {}",
            report.max_residual
        );
    }

    #[test]
    fn global_integral_of_the_area_form() {
        let m = ManifoldBackend::implicit(3, ScalarExpression::parse("x^2+y^2+z^2-1", 3).unwrap());
        let area = FormExpression::parse(
            2,
            3,
            &[(&[1, 2], "x"), (&[0, 2], "-y"), (&[0, 1], "z")],
        )
        .unwrap();
        let val = global_integral(&m, &area).unwrap();
        assert!(
            (val - 4.0 * std::f64::consts::PI).abs() < 1e-6,
            "sphere area: {val}"
        );
        let torus = ManifoldBackend::flat_torus(2);
        let dxdy = FormExpression::parse(2, 2, &[(&[0, 1], "1")]).unwrap();
        let v = global_integral(&torus, &dxdy).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn torus_pairing_of_coordinate_forms() {
        let (spec, cs) = torus_setup();
        let dx = FormExpression::parse(1, 2, &[(&[0], "1")]).unwrap();
        let dy = FormExpression::parse(1, 2, &[(&[1], "1")]).unwrap();
        let opts = QuadratureOptions::default();
        let xy = pairing(&spec, &cs, &dx, &dy, &opts).unwrap();
        assert!((xy.residue_pairing - 1.0).abs() < 1e-5, "{:?}", xy);
        assert!(xy.difference < 1e-6);
        let xx = pairing(&spec, &cs, &dx, &dx, &opts).unwrap();
        assert!(xx.residue_pairing.abs() < 1e-8);
        assert!(xx.direct_integral.abs() < 1e-12);
    }

    #[test]
    fn integral_residue_check_on_torus() {
        let (spec, cs) = torus_setup();
        let opts = QuadratureOptions::default();
        let dx = FormExpression::parse(1, 2, &[(&[0], "1")]).unwrap();
        let report = check_integral_residues(&spec, &cs, &dx, 1e-4, &opts).unwrap();
        assert!(report.all_integral);
        assert!(report.spark_note.is_some());
        let half = FormExpression::parse(1, 2, &[(&[0], "0.5")]).unwrap();
        let report2 = check_integral_residues(&spec, &cs, &half, 1e-4, &opts).unwrap();
        assert!(!report2.all_integral);
    }
}
