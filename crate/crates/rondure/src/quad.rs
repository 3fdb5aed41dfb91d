//! Adaptive Simpson quadrature.
//!
//! Used for the closed-form level-set kernels and the slit-ball energy
//! integrals. Integrands are smooth except at isolated split points, which
//! callers pass explicitly so no interval straddles a kink.

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
}

/// Integrate over `[a, b]` splitting at the given interior breakpoints.
pub fn integrate_split<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, splits: &[f64], tol: f64) -> f64 {
    let mut pts = vec![a];
    for &s in splits {
        if s > a && s < b {
            pts.push(s);
        }
    }
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = (pts.len() - 1) as f64;
    pts.windows(2)
        .map(|w| adaptive_simpson(f, w[0], w[1], tol / n))
        .sum()
}

/// Integrate an exponentially decaying integrand over `[a, inf)`.
///
/// The level-set kernels all decay at least like `e^{-t}`; truncating at
/// `a + 75` puts the remainder far below every tolerance used in the crate.
pub fn integrate_to_inf<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> f64 {
    let cut = a + 75.0;
    // split once so the adaptive refinement does not waste depth on the tail
    adaptive_simpson(f, a, a + 8.0, 0.5 * tol) + adaptive_simpson(f, a + 8.0, cut, 0.5 * tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let f = |x: f64| 3.0 * x * x;
        assert_relative_eq!(adaptive_simpson(&f, 0.0, 2.0, 1e-12), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn sin_integral() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, PI, 1e-12);
        assert_relative_eq!(v, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn improper_exponential() {
        let v = integrate_to_inf(&|x: f64| (-x).exp(), 0.0, 1e-12);
        assert_relative_eq!(v, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn split_handles_kink() {
        // |x - 1| on [0, 2]
        let f = |x: f64| (x - 1.0f64).abs();
        let v = integrate_split(&f, 0.0, 2.0, &[1.0], 1e-12);
        assert_relative_eq!(v, 1.0, epsilon = 1e-12);
    }
}
