//! Connecting flow lines between index-adjacent critical points, their
//! orientation signs `n_γ`, the signed counts `N_{p,q}`, and the
//! stable/unstable intersection pairing.
//!
//! Enumeration shoots along the one-dimensional invariant manifold of the
//! pair: forward along `U_q` when it is a curve, backward along `S_p` when it
//! is; both are exhaustive on surfaces. Higher-dimensional direction spheres
//! (first appearing at n = 3) fall back to a best-effort subdivision search
//! over shooting directions.

use std::collections::BTreeMap;

use nalgebra::DVector;
use thiserror::Error;

use crate::critical::{CriticalPoint, CriticalSet};
use crate::flow::{
    capture, integrate, transport_reverse_along, Direction, FlowError, FlowSpec, Terminal,
    Trajectory,
};
use crate::geometry::{DeckWord, GeomError, ManifoldBackend};

#[derive(Debug, Error)]
pub enum ConnError {
    #[error("critical points are not index-adjacent: λ(from)={0}, λ(to)={1}")]
    NotAdjacent(usize, usize),
    #[error("ambiguous connection cluster near shooting direction {0:.6}")]
    Ambiguous(f64),
    #[error("near-singular sign projection (|det|={0:.2e}); smaller epsilon needed")]
    NearSingular(f64),
    #[error(
        "index-increase axiom violated: flow line from index {from_index} reached index {to_index}"
    )]
    AxiomViolation { from_index: usize, to_index: usize },
    #[error(
        "off-diagonal intersection: S of point {p} meets U of point {q} within {distance:.3e}"
    )]
    OffDiagonalIntersection { p: usize, q: usize, distance: f64 },
    #[error("connection search not implemented for direction spheres of dimension {0} ≥ 3")]
    Unsupported(usize),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldRole {
    Stable,
    Unstable,
}

#[derive(Debug, Clone, Copy)]
pub struct ConnectionOptions {
    /// Shooting offset from the critical point along the eigen-disk.
    pub epsilon: f64,
    /// Radius at which the sign rule reads the crossing point near `p`.
    pub sign_epsilon: f64,
    /// Initial samples for direction-circle searches.
    pub circle_samples: usize,
}

impl Default for ConnectionOptions {
    fn default() -> Self {
        ConnectionOptions {
            epsilon: 1e-3,
            sign_epsilon: 1e-3,
            circle_samples: 64,
        }
    }
}

/// One connecting orbit from `from` (index λ) to `to` (index λ+1).
#[derive(Debug, Clone)]
pub struct FlowLine {
    pub from: usize,
    pub to: usize,
    /// Orientation sign `n_γ`; +1 on non-orientable backends where only
    /// mod-2 counts are meaningful.
    pub sign: i64,
    /// Forward-time representative from near `from` to near `to`.
    pub representative: Trajectory,
    /// Deck word of the lift starting at the canonical representative of
    /// `from` (identity for implicit backends).
    pub deck: DeckWord,
}

/// All connecting lines, keyed by `(to, from)` = `(p, q)` with
/// `λ_p = λ_q + 1`.
#[derive(Debug, Clone, Default)]
pub struct ConnectionData {
    pub lines: BTreeMap<(usize, usize), Vec<FlowLine>>,
    pub warnings: Vec<String>,
}

impl ConnectionData {
    /// Signed count `N_{p,q} = Σ_γ n_γ`.
    pub fn count(&self, p: usize, q: usize) -> i64 {
        self.lines
            .get(&(p, q))
            .map_or(0, |ls| ls.iter().map(|l| l.sign).sum())
    }

    pub fn line_count(&self, p: usize, q: usize) -> usize {
        self.lines.get(&(p, q)).map_or(0, Vec::len)
    }

    pub fn all_lines(&self) -> impl Iterator<Item = &FlowLine> {
        self.lines.values().flatten()
    }
}

/// Enumerate the flow lines from `q` up to `p` (`λ_p = λ_q + 1`).
pub fn find_flow_lines(
    spec: &FlowSpec,
    cs: &CriticalSet,
    q: usize,
    p: usize,
    opts: &ConnectionOptions,
) -> Result<Vec<FlowLine>, ConnError> {
    let lq = cs.by_id(q).index;
    let lp = cs.by_id(p).index;
    if lp != lq + 1 {
        return Err(ConnError::NotAdjacent(lq, lp));
    }
    let mut warnings = Vec::new();
    let lines = lines_for_pair(spec, cs, q, p, opts, &mut warnings)?;
    Ok(lines)
}

/// Enumerate and sign all adjacent-index connections.
pub fn find_all_connections(
    spec: &FlowSpec,
    cs: &CriticalSet,
    opts: &ConnectionOptions,
) -> Result<ConnectionData, ConnError> {
    let n = spec.manifold.dim();
    let mut data = ConnectionData::default();
    for lambda in 0..n {
        let qs: Vec<usize> = cs.of_index(lambda).iter().map(|c| c.id).collect();
        let ps: Vec<usize> = cs.of_index(lambda + 1).iter().map(|c| c.id).collect();
        if qs.is_empty() || ps.is_empty() {
            continue;
        }
        for &q in &qs {
            for &p in &ps {
                let lines = lines_for_pair(spec, cs, q, p, opts, &mut data.warnings)?;
                data.lines.insert((p, q), lines);
            }
        }
    }
    Ok(data)
}

fn lines_for_pair(
    spec: &FlowSpec,
    cs: &CriticalSet,
    q: usize,
    p: usize,
    opts: &ConnectionOptions,
    warnings: &mut Vec<String>,
) -> Result<Vec<FlowLine>, ConnError> {
    let n = spec.manifold.dim();
    let lq = cs.by_id(q).index;
    let lp = cs.by_id(p).index;
    debug_assert_eq!(lp, lq + 1);
    let mut lines = if n - lq == 1 {
        forward_curve_shots(spec, cs, q, opts, warnings)?
            .into_iter()
            .filter(|l| l.to == p)
            .collect()
    } else if lp == 1 {
        backward_curve_shots(spec, cs, p, opts, warnings)?
            .into_iter()
            .filter(|l| l.from == q)
            .collect()
    } else if n - lq == 2 {
        circle_search(spec, cs, q, p, opts, warnings)?
    } else {
        return Err(ConnError::Unsupported(n - lq - 1));
    };
    if spec.manifold.orientable() {
        for line in lines.iter_mut() {
            line.sign = sign_of(spec, cs, line, opts)?;
        }
    }
    Ok(lines)
}

/// Starting point of a shot: project onto implicit backends, keep the raw
/// cover point on quotients so the lift starts at the canonical cell.
fn shot_start(spec: &FlowSpec, raw: DVector<f64>) -> Result<DVector<f64>, ConnError> {
    match &spec.manifold {
        ManifoldBackend::ImplicitHypersurface { .. } => Ok(spec.manifold.retract(&raw)?.0),
        ManifoldBackend::FlatQuotient { .. } => Ok(raw),
    }
}

/// Shots along a one-dimensional unstable manifold: exhaustive, one line per
/// branch that converges to an index-(λ+1) point.
fn forward_curve_shots(
    spec: &FlowSpec,
    cs: &CriticalSet,
    q: usize,
    opts: &ConnectionOptions,
    warnings: &mut Vec<String>,
) -> Result<Vec<FlowLine>, ConnError> {
    let cq = cs.by_id(q);
    debug_assert_eq!(cq.unstable_frame.vectors.len(), 1);
    let u = cq.unstable_frame.vectors[0].clone();
    let mut out = Vec::new();
    for branch in [1.0f64, -1.0] {
        let x0 = shot_start(spec, &cq.location + &u * (branch * opts.epsilon))?;
        let traj = integrate(spec, Some(cs), &x0, Direction::Forward)?;
        match traj.status {
            Terminal::Converged { id, .. } => {
                let target = cs.by_id(id);
                if target.index <= cq.index {
                    return Err(ConnError::AxiomViolation {
                        from_index: cq.index,
                        to_index: target.index,
                    });
                }
                if target.index == cq.index + 1 {
                    let (deck, _) = spec
                        .manifold
                        .nearest_word_and_displacement(traj.end(), &target.location);
                    out.push(FlowLine {
                        from: q,
                        to: id,
                        sign: 1,
                        representative: traj,
                        deck,
                    });
                }
            }
            Terminal::MaxTime => {
                let f_end = spec
                    .function()
                    .map(|f| f.eval(traj.end().as_slice()).unwrap_or(f64::NAN));
                warnings.push(format!(
                    "discarded non-convergent shot from point {q} (branch {branch:+}), terminal f-value {f_end:?}"
                ));
            }
            Terminal::LeftDomain => {
                warnings.push(format!(
                    "discarded shot from point {q} (branch {branch:+}): left the domain"
                ));
            }
        }
    }
    Ok(out)
}

/// Shots along a one-dimensional stable manifold, run backward: exhaustive
/// for all `q` of index 0 below a given index-1 point.
fn backward_curve_shots(
    spec: &FlowSpec,
    cs: &CriticalSet,
    p: usize,
    opts: &ConnectionOptions,
    warnings: &mut Vec<String>,
) -> Result<Vec<FlowLine>, ConnError> {
    let cp = cs.by_id(p);
    debug_assert_eq!(cp.stable_frame.vectors.len(), 1);
    let s = cp.stable_frame.vectors[0].clone();
    let mut out = Vec::new();
    for branch in [1.0f64, -1.0] {
        let y0 = shot_start(spec, &cp.location + &s * (branch * opts.epsilon))?;
        let traj = integrate(spec, Some(cs), &y0, Direction::Backward)?;
        match traj.status {
            Terminal::Converged { id, .. } => {
                let source = cs.by_id(id);
                if source.index >= cp.index {
                    return Err(ConnError::AxiomViolation {
                        from_index: source.index,
                        to_index: cp.index,
                    });
                }
                // Reverse into a forward-time representative q → p.
                let total = traj.duration();
                let times: Vec<f64> = traj.times.iter().rev().map(|t| total - t).collect();
                let points: Vec<DVector<f64>> = traj.points.iter().rev().cloned().collect();
                let representative = Trajectory {
                    direction: Direction::Forward,
                    times,
                    points,
                    status: Terminal::Converged { id: p, time: total },
                };
                // The backward lift runs from the canonical cell of p down to
                // a deck image of q; the forward word is the inverse.
                let (end_word, _) = spec
                    .manifold
                    .nearest_word_and_displacement(traj.end(), &source.location);
                let deck = spec.manifold.invert_word(&end_word);
                out.push(FlowLine {
                    from: id,
                    to: p,
                    sign: 1,
                    representative,
                    deck,
                });
            }
            Terminal::MaxTime => warnings.push(format!(
                "discarded non-convergent backward shot from point {p} (branch {branch:+})"
            )),
            Terminal::LeftDomain => warnings.push(format!(
                "discarded backward shot from point {p} (branch {branch:+}): left the domain"
            )),
        }
    }
    Ok(out)
}

/// Best-effort bisection search over a circle of shooting directions
/// (unstable dimension 2, first needed on 3-manifolds).
fn circle_search(
    spec: &FlowSpec,
    cs: &CriticalSet,
    q: usize,
    p: usize,
    opts: &ConnectionOptions,
    warnings: &mut Vec<String>,
) -> Result<Vec<FlowLine>, ConnError> {
    const WIDTH_TARGET: f64 = 1e-8;
    const WIDTH_FLOOR: f64 = 1e-13;
    let cq = cs.by_id(q).clone();
    let u0 = cq.unstable_frame.vectors[0].clone();
    let u1 = cq.unstable_frame.vectors[1].clone();
    let shoot = |theta: f64| -> Result<(Trajectory, DeckWord), ConnError> {
        let dir = &u0 * theta.cos() + &u1 * theta.sin();
        let x0 = shot_start(spec, &cq.location + dir * opts.epsilon)?;
        let traj = integrate(spec, Some(cs), &x0, Direction::Forward)?;
        let word = match traj.status {
            Terminal::Converged { id, .. } => {
                spec.manifold
                    .nearest_word_and_displacement(traj.end(), &cs.by_id(id).location)
                    .0
            }
            _ => DeckWord::identity(spec.manifold.deck_generators().len()),
        };
        Ok((traj, word))
    };
    let classify = |traj: &Trajectory, word: &DeckWord| -> (Option<usize>, DeckWord, i8) {
        let terminal = match traj.status {
            Terminal::Converged { id, .. } => Some(id),
            _ => None,
        };
        // Side of the closest pass by the target, measured along its first
        // unstable direction.
        let cp = cs.by_id(p);
        let mut best = f64::INFINITY;
        let mut side = 0i8;
        for x in &traj.points {
            let d = spec.manifold.displacement(x, &cp.location);
            let dist = d.norm();
            if dist < best {
                best = dist;
                side = if dist < 0.1 {
                    let c = d.dot(&cp.unstable_frame.vectors[0]);
                    if c >= 0.0 {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                };
            }
        }
        (terminal, word.clone(), side)
    };

    let k = opts.circle_samples.max(8);
    let mut thetas: Vec<f64> = (0..=k)
        .map(|i| i as f64 / k as f64 * std::f64::consts::TAU)
        .collect();
    let mut labels = Vec::with_capacity(thetas.len());
    let mut hits: Vec<(f64, Trajectory, DeckWord)> = Vec::new();
    for &th in &thetas {
        let (traj, word) = shoot(th)?;
        if let Terminal::Converged { id, .. } = traj.status {
            if id == p {
                hits.push((th, traj.clone(), word.clone()));
            }
        }
        labels.push(classify(&traj, &word));
    }
    let mut depth = 0usize;
    // Bisect every adjacent pair whose classifier differs.
    let mut stack: Vec<(f64, f64, (Option<usize>, DeckWord, i8), (Option<usize>, DeckWord, i8))> =
        Vec::new();
    for i in 0..thetas.len() - 1 {
        if labels[i] != labels[i + 1] {
            stack.push((
                thetas[i],
                thetas[i + 1],
                labels[i].clone(),
                labels[i + 1].clone(),
            ));
        }
    }
    thetas.clear();
    while let Some((a, b, la, lb)) = stack.pop() {
        let width = b - a;
        let mid = 0.5 * (a + b);
        let (traj, word) = shoot(mid)?;
        if let Terminal::Converged { id, .. } = traj.status {
            if id == p && width < WIDTH_TARGET {
                hits.push((mid, traj, word));
                continue;
            }
        }
        if width < WIDTH_FLOOR {
            warnings.push(format!(
                "circle search exhausted resolution near direction {mid:.9} without a clean hit"
            ));
            continue;
        }
        depth = depth.max((std::f64::consts::TAU / width).log2() as usize);
        let lm = classify(&traj, &word);
        if lm != la {
            stack.push((a, mid, la, lm.clone()));
        }
        if lm != lb {
            stack.push((mid, b, lm, lb));
        }
    }
    warnings.push(format!(
        "circle search for pair ({p},{q}) reached subdivision depth {depth}"
    ));
    // Merge hits belonging to one cluster, with circular distance so a
    // direction at the 0/2π seam is not counted twice.
    hits.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut out: Vec<FlowLine> = Vec::new();
    let mut accepted: Vec<f64> = Vec::new();
    let tau = std::f64::consts::TAU;
    for (th, traj, deck) in hits {
        let th_mod = th.rem_euclid(tau);
        let duplicate = accepted.iter().any(|&a| {
            let d = (th_mod - a).abs();
            d.min(tau - d) < 1e-6
        });
        if duplicate {
            continue;
        }
        accepted.push(th_mod);
        out.push(FlowLine {
            from: q,
            to: p,
            sign: 1,
            representative: traj,
            deck,
        });
    }
    Ok(out)
}

/// Orientation sign of one flow line.
///
/// At the crossing `y` of the representative with the sphere of radius
/// `sign_epsilon` around `p` inside `S_p`, build a frame of the sphere's
/// tangent space oriented outward-radial-first against the orientation of
/// `S_p`, transport it backward along the line to `q`, project onto the
/// oriented stable eigenspace of `q`, and read the sign of the determinant.
pub fn sign_of(
    spec: &FlowSpec,
    cs: &CriticalSet,
    line: &FlowLine,
    opts: &ConnectionOptions,
) -> Result<i64, ConnError> {
    assert!(
        spec.manifold.orientable(),
        "orientation signs need an orientable backend"
    );
    let p = cs.by_id(line.to);
    let q = cs.by_id(line.from);
    let traj = &line.representative;

    let (cross_idx, y) = crossing_point(spec, traj, p, opts.sign_epsilon);
    // Radial direction inside the stable eigenspace of p.
    let stable_p = &p.stable_frame.vectors;
    let disp = spec.manifold.displacement(&y, &p.location);
    let mut radial = DVector::zeros(y.len());
    for s in stable_p {
        radial += s * disp.dot(s);
    }
    let rnorm = radial.norm();
    if rnorm < opts.sign_epsilon * 1e-3 {
        return Err(ConnError::NearSingular(rnorm));
    }
    radial /= rnorm;

    // Complete to an orthonormal basis of the stable eigenspace.
    let mut sphere_frame: Vec<DVector<f64>> = Vec::with_capacity(stable_p.len() - 1);
    for s in stable_p {
        if sphere_frame.len() == stable_p.len() - 1 {
            break;
        }
        let mut w = s.clone();
        w -= &radial * w.dot(&radial);
        for b in &sphere_frame {
            let d = w.dot(b);
            w -= b * d;
        }
        let norm = w.norm();
        if norm > 1e-6 {
            sphere_frame.push(w / norm);
        }
    }
    // Orientation of (radial, sphere frame) against the oriented stable
    // frame, with the boundary sphere oriented inward-radial-first: this is
    // the boundary convention under which the assembled differential agrees
    // with the residue side of the chain-map identity `P∘d = d∘P` for the
    // frame conventions fixed at orientation time (the outward choice flips
    // every line sign globally, which homology cannot detect but the
    // two-sided chain map does).
    let lambda_p = stable_p.len();
    let mut m = nalgebra::DMatrix::zeros(lambda_p, lambda_p);
    m.set_column(0, &coords_in(&(-&radial), stable_p));
    for (j, w) in sphere_frame.iter().enumerate() {
        m.set_column(j + 1, &coords_in(w, stable_p));
    }
    let sigma = m.determinant().signum() as i64;

    if q.index == 0 {
        return Ok(sigma);
    }

    // Transport the sphere frame backward along the stored line to q and
    // project onto its oriented stable eigenspace.
    let times = &traj.times[..=cross_idx + 1];
    let mut points = traj.points[..=cross_idx + 1].to_vec();
    let last = points.len() - 1;
    points[last] = y.clone();
    let transported = transport_reverse_along(spec, times, &points, &sphere_frame)?;
    let stable_q = &q.stable_frame.vectors;
    let k = stable_q.len();
    let mut a = nalgebra::DMatrix::zeros(k, k);
    for (j, w) in transported.iter().enumerate() {
        let mut col = coords_in(w, stable_q);
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
        a.set_column(j, &col);
    }
    let det = a.determinant();
    if det.abs() < 1e-8 {
        return Err(ConnError::NearSingular(det.abs()));
    }
    Ok(sigma * det.signum() as i64)
}

fn coords_in(v: &DVector<f64>, basis: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_fn(basis.len(), |i, _| v.dot(&basis[i]))
}

/// Index and location where the representative last crosses distance
/// `radius` from `p`, linearly interpolated and retracted.
fn crossing_point(
    spec: &FlowSpec,
    traj: &Trajectory,
    p: &CriticalPoint,
    radius: f64,
) -> (usize, DVector<f64>) {
    let dist =
        |x: &DVector<f64>| -> f64 { spec.manifold.displacement(x, &p.location).norm() };
    let m = traj.points.len();
    let mut idx = None;
    for i in (0..m - 1).rev() {
        if dist(&traj.points[i]) > radius && dist(&traj.points[i + 1]) <= radius {
            idx = Some(i);
            break;
        }
    }
    let Some(i) = idx else {
        // Entire stored tail within the radius (backward-found lines start
        // exactly on the sphere); use the last sample.
        return (m.saturating_sub(2), traj.points[m - 1].clone());
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let x = &traj.points[i] * (1.0 - mid) + &traj.points[i + 1] * mid;
        let x = spec.manifold.retract(&x).map(|r| r.0).unwrap_or(x);
        if dist(&x) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = &traj.points[i] * (1.0 - hi) + &traj.points[i + 1] * hi;
    let x = spec.manifold.retract(&x).map(|r| r.0).unwrap_or(x);
    (i, x)
}

/// Point cloud sampled from a stable or unstable manifold by sweeping the
/// corresponding eigen-sphere with the flow.
pub fn sample_invariant_manifold(
    spec: &FlowSpec,
    cs: &CriticalSet,
    id: usize,
    role: ManifoldRole,
    opts: &ConnectionOptions,
) -> Result<Vec<DVector<f64>>, ConnError> {
    let c = cs.by_id(id);
    let (frame, dir) = match role {
        ManifoldRole::Stable => (&c.stable_frame.vectors, Direction::Backward),
        ManifoldRole::Unstable => (&c.unstable_frame.vectors, Direction::Forward),
    };
    let mut cloud = vec![c.location.clone()];
    let dirs: Vec<DVector<f64>> = match frame.len() {
        0 => Vec::new(),
        1 => vec![frame[0].clone(), -frame[0].clone()],
        2 => (0..32)
            .map(|i| {
                let th = i as f64 / 32.0 * std::f64::consts::TAU;
                &frame[0] * th.cos() + &frame[1] * th.sin()
            })
            .collect(),
        _ => {
            return Err(ConnError::Unsupported(frame.len() - 1));
        }
    };
    for d in dirs {
        let (x0, _) = spec
            .manifold
            .retract(&(&c.location + d * opts.epsilon))?;
        let traj = integrate(spec, Some(cs), &x0, dir)?;
        for x in traj.points.iter() {
            let (reduced, _) = spec.manifold.retract(x)?;
            cloud.push(reduced);
        }
    }
    Ok(cloud)
}

/// Signed intersection count `U_{p'} • S_p` for points of equal index.
///
/// The index-increase axiom forces every such intersection to be the single
/// transversal point `p = p'`, which carries sign +1 under the frame
/// convention fixed at orientation time; this is verified numerically by
/// checking the sampled manifolds stay apart off the diagonal.
pub fn intersection_pairing(
    spec: &FlowSpec,
    cs: &CriticalSet,
    p: usize,
    p_prime: usize,
    opts: &ConnectionOptions,
) -> Result<i64, ConnError> {
    let cp = cs.by_id(p);
    let cq = cs.by_id(p_prime);
    assert_eq!(
        cp.index, cq.index,
        "intersection pairing needs complementary dimensions"
    );
    if p == p_prime {
        return Ok(1);
    }
    const CLEARANCE: f64 = 5e-3;
    let stable = sample_invariant_manifold(spec, cs, p, ManifoldRole::Stable, opts)?;
    let unstable = sample_invariant_manifold(spec, cs, p_prime, ManifoldRole::Unstable, opts)?;
    let mut min_dist = f64::INFINITY;
    for a in &stable {
        for b in &unstable {
            let d = spec.manifold.distance(a, b);
            if d < min_dist {
                min_dist = d;
            }
        }
    }
    if min_dist < CLEARANCE {
        return Err(ConnError::OffDiagonalIntersection {
            p,
            q: p_prime,
            distance: min_dist,
        });
    }
    Ok(0)
}

/// The hyperbolic-ball membership used by shooting, re-exported for tests.
pub fn enters_ball(spec: &FlowSpec, cs: &CriticalSet, x: &DVector<f64>) -> Option<usize> {
    capture(spec, cs, x, Direction::Forward)
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

    #[test]
    fn circle_has_two_lines_with_opposite_signs() {
        let (spec, cs) = circle_setup();
        assert_eq!(cs.points.len(), 2);
        let q = cs.of_index(0)[0].id;
        let p = cs.of_index(1)[0].id;
        let lines = find_flow_lines(&spec, &cs, q, p, &ConnectionOptions::default()).unwrap();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].sign + lines[1].sign, 0);
        assert_eq!(lines[0].sign.abs(), 1);
    }

    #[test]
    fn sphere_height_has_no_adjacent_pairs() {
        let m = ManifoldBackend::implicit(3, ScalarExpression::parse("x^2+y^2+z^2-1", 3).unwrap());
        let f = ScalarExpression::parse("z", 3).unwrap();
        let cs = find_critical_points(
            &m,
            &f,
            &SeedSpec::Random { count: 60, seed: 4 },
            &CriticalOptions::default(),
        )
        .unwrap();
        let spec = FlowSpec::gradient_uphill(m, f);
        let data = find_all_connections(&spec, &cs, &ConnectionOptions::default()).unwrap();
        assert!(data.lines.values().all(Vec::is_empty));
    }

    #[test]
    fn torus_saddle_to_max_lines_cancel() {
        let (spec, cs) = torus_setup();
        let max = cs.of_index(2)[0].id;
        for s in cs.of_index(1) {
            let lines =
                find_flow_lines(&spec, &cs, s.id, max, &ConnectionOptions::default()).unwrap();
            assert_eq!(lines.len(), 2, "two lines from each saddle to the max");
            assert_eq!(lines[0].sign + lines[1].sign, 0);
            // Both lines run along a coordinate circle through the saddle.
            let u = &s.unstable_frame.vectors[0];
            let moving_axis = if u[0].abs() > 0.5 { 0 } else { 1 };
            let fixed_axis = 1 - moving_axis;
            for line in &lines {
                for pt in &line.representative.points {
                    let d = (pt[fixed_axis] - s.location[fixed_axis]).abs();
                    let wrapped = d.min((d - d.round()).abs());
                    assert!(wrapped < 1e-6, "line leaves the coordinate circle");
                }
            }
        }
    }

    #[test]
    fn torus_min_to_saddle_lines_cancel_with_deck_words() {
        let (spec, cs) = torus_setup();
        let min = cs.of_index(0)[0].id;
        for s in cs.of_index(1) {
            let lines =
                find_flow_lines(&spec, &cs, min, s.id, &ConnectionOptions::default()).unwrap();
            assert_eq!(lines.len(), 2);
            assert_eq!(lines[0].sign + lines[1].sign, 0);
            // The two lines differ by one unit translation along the moving axis.
            let w0 = &lines[0].deck.exponents;
            let w1 = &lines[1].deck.exponents;
            let diff: Vec<i64> = w0.iter().zip(w1).map(|(a, b)| (a - b).abs()).collect();
            assert_eq!(diff.iter().sum::<i64>(), 1, "deck words {w0:?} vs {w1:?}");
        }
    }

    #[test]
    fn perturbed_sphere_saddle_lines_split_between_maxima() {
        let m = ManifoldBackend::implicit(3, ScalarExpression::parse("x^2+y^2+z^2-1", 3).unwrap());
        let f = ScalarExpression::parse("z + x^2", 3).unwrap();
        let cs = find_critical_points(
            &m,
            &f,
            &SeedSpec::Random {
                count: 288,
                seed: 7,
            },
            &CriticalOptions::default(),
        )
        .unwrap();
        let spec = FlowSpec::gradient_uphill(m, f);
        let data = find_all_connections(&spec, &cs, &ConnectionOptions::default()).unwrap();
        let saddle = cs.of_index(1)[0].id;
        let maxima: Vec<usize> = cs.of_index(2).iter().map(|c| c.id).collect();
        let n1 = data.count(maxima[0], saddle);
        let n2 = data.count(maxima[1], saddle);
        assert_eq!(n1.abs(), 1);
        assert_eq!(n2.abs(), 1);
        assert_eq!(n1 + n2, 0, "signs must oppose across the two maxima");
        // Min-to-saddle lines cancel.
        let min = cs.of_index(0)[0].id;
        assert_eq!(data.line_count(saddle, min), 2);
        assert_eq!(data.count(saddle, min), 0);
    }

    #[test]
    fn sign_is_stable_under_epsilon_halving() {
        let (spec, cs) = circle_setup();
        let q = cs.of_index(0)[0].id;
        let p = cs.of_index(1)[0].id;
        let opts = ConnectionOptions::default();
        let lines = find_flow_lines(&spec, &cs, q, p, &opts).unwrap();
        let halved = ConnectionOptions {
            sign_epsilon: 5e-4,
            ..opts
        };
        for line in &lines {
            let s2 = sign_of(&spec, &cs, line, &halved).unwrap();
            assert_eq!(line.sign, s2);
        }
    }

    #[test]
    fn intersection_pairing_is_diagonal_on_torus() {
        let (spec, cs) = torus_setup();
        let opts = ConnectionOptions::default();
        let saddles: Vec<usize> = cs.of_index(1).iter().map(|c| c.id).collect();
        assert_eq!(
            intersection_pairing(&spec, &cs, saddles[0], saddles[0], &opts).unwrap(),
            1
        );
        assert_eq!(
            intersection_pairing(&spec, &cs, saddles[0], saddles[1], &opts).unwrap(),
            0
        );
    }

    #[test]
    fn time_reversal_preserves_absolute_counts() {
        let (spec, cs) = circle_setup();
        let q = cs.of_index(0)[0].id;
        let p = cs.of_index(1)[0].id;
        let lines = find_flow_lines(&spec, &cs, q, p, &ConnectionOptions::default()).unwrap();
        // Reverse the flow: -f swaps stable and unstable roles.
        let m = spec.manifold.clone();
        let neg = spec.function().unwrap().negated();
        let cs_rev = find_critical_points(
            &m,
            &neg,
            &SeedSpec::Random { count: 40, seed: 9 },
            &CriticalOptions::default(),
        )
        .unwrap();
        let spec_rev = FlowSpec::gradient_uphill(m, neg);
        let q_rev = cs_rev.of_index(0)[0].id;
        let p_rev = cs_rev.of_index(1)[0].id;
        let rev_lines =
            find_flow_lines(&spec_rev, &cs_rev, q_rev, p_rev, &ConnectionOptions::default())
                .unwrap();
        assert_eq!(lines.len(), rev_lines.len());
        let n: i64 = lines.iter().map(|l| l.sign).sum();
        let n_rev: i64 = rev_lines.iter().map(|l| l.sign).sum();
        assert_eq!(n.abs(), n_rev.abs());
    }
}
