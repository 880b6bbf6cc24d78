//! Gauss–Legendre nodes and a recursive adaptive Simpson rule.

/// Nodes and weights on `[-1, 1]`, computed by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Value and derivative of the degree-n Legendre polynomial.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Integrate `f` over `[a, b]` by Gauss–Legendre with the given nodes.
pub fn gauss_on<E>(
    nodes: &[f64],
    weights: &[f64],
    a: f64,
    b: f64,
    mut f: impl FnMut(f64) -> Result<f64, E>,
) -> Result<f64, E> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut total = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        total += w * f(mid + half * x)?;
    }
    Ok(total * half)
}

/// Adaptive Simpson quadrature tolerant of finitely many jump
/// discontinuities: intervals that fail to converge by `max_depth` are
/// accepted with their best estimate (their width is then astronomically
/// small, so a bounded jump contributes nothing measurable).
pub fn adaptive_simpson<E>(
    f: &mut impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
) -> Result<(f64, f64), E> {
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    simpson_rec(f, a, fa, b, fb, m, fm, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<E>(
    f: &mut impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    tol: f64,
    depth: usize,
) -> Result<(f64, f64), E> {
    let h = b - a;
    let whole = h / 6.0 * (fa + 4.0 * fm + fb);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = h / 12.0 * (fa + 4.0 * flm + fm);
    let right = h / 12.0 * (fm + 4.0 * frm + fb);
    let err = (left + right - whole) / 15.0;
    if err.abs() <= tol || depth == 0 {
        return Ok((left + right + err, err.abs()));
    }
    let (vl, el) = simpson_rec(f, a, fa, m, fm, lm, flm, 0.5 * tol, depth - 1)?;
    let (vr, er) = simpson_rec(f, m, fm, b, fb, rm, frm, 0.5 * tol, depth - 1)?;
    Ok((vl + vr, el + er))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (nodes, weights) = gauss_legendre(8);
        // Degree-15 polynomial integrated exactly by 8 nodes.
        let val: f64 = gauss_on(&nodes, &weights, 0.0, 1.0, |x| {
            Ok::<f64, ()>(16.0 * x.powi(15))
        })
        .unwrap();
        assert!((val - 1.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_simpson_handles_a_jump() {
        let mut f = |x: f64| -> Result<f64, ()> { Ok(if x < 0.31 { 1.0 } else { 3.0 }) };
        let (val, _) = adaptive_simpson(&mut f, 0.0, 1.0, 1e-10, 48).unwrap();
        let exact = 0.31 + 3.0 * 0.69;
        assert!((val - exact).abs() < 1e-8, "got {val}, want {exact}");
    }

    #[test]
    fn adaptive_simpson_smooth() {
        let mut f = |x: f64| -> Result<f64, ()> { Ok((x).sin()) };
        let (val, _) =
            adaptive_simpson(&mut f, 0.0, std::f64::consts::PI, 1e-12, 40).unwrap();
        assert!((val - 2.0).abs() < 1e-11);
    }
}
