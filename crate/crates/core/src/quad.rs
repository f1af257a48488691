//! Quadrature primitives shared by the constants and functional modules:
//! adaptive Simpson integration, Gauss-Legendre nodes, and the radial
//! density of |r e1 + U| for a standard d-dimensional Gaussian U.

use crate::error::{Error, Result};
use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::sync::Mutex;

const SQRT_2PI: f64 = 2.5066282746310002;

/// Standard normal density.
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF via erfc.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc_scalar(-x / std::f64::consts::SQRT_2)
}

/// Complementary error function: Maclaurin series for |x| <= 1, Legendre
/// continued fraction (modified Lentz) beyond. Relative error ~1e-15.
fn erfc_scalar(x: f64) -> f64 {
    let z = x.abs();
    let e = if z <= 1.0 {
        1.0 - erf_series(z)
    } else {
        // DLMF 7.9.1: erfc(z) = e^{-z^2}/sqrt(pi) * 1/K,
        // K = z + (1/2)/(z + 1/(z + (3/2)/(z + 2/(z + ...)))),
        // evaluated by modified Lentz with b_n = z, a_n = n/2.
        let tiny = 1e-300;
        let mut f = z;
        let mut c = f;
        let mut d = 0.0;
        let mut n = 1.0f64;
        loop {
            let a = n / 2.0;
            d = z + a * d;
            if d == 0.0 {
                d = tiny;
            }
            c = z + a / c;
            if c == 0.0 {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            n += 1.0;
            if (delta - 1.0).abs() < 1e-16 || n > 400.0 {
                break;
            }
        }
        (-z * z).exp() / (std::f64::consts::PI.sqrt() * f)
    };
    if x >= 0.0 {
        e
    } else {
        2.0 - e
    }
}

/// erf by its Maclaurin series, fast for |x| <= 1.
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for k in 1..60 {
        term *= -x2 / k as f64;
        let add = term / (2 * k + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

/// Adaptive Simpson quadrature on [a, b] with absolute/relative tolerance.
///
/// Returns the integral estimate. The integrand must be finite at every
/// evaluation point; probe singular endpoints with a shifted limit before
/// calling.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: usize,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    if !(fa.is_finite() && fb.is_finite() && fm.is_finite()) {
        return Err(Error::Convergence(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut bad = false;
    let v = simpson_rec(
        f, a, b, fa, fm, fb, whole, abs_tol, rel_tol, max_depth, &mut bad,
    );
    if bad {
        return Err(Error::Convergence(format!(
            "adaptive Simpson failed to converge on [{a}, {b}]"
        )));
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    abs_tol: f64,
    rel_tol: f64,
    depth: usize,
    bad: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    if !(flm.is_finite() && frm.is_finite()) {
        *bad = true;
        return whole;
    }
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 {
        if delta.abs() > abs_tol.max(rel_tol * (left + right).abs()) * 15.0 {
            *bad = true;
        }
        return left + right + delta / 15.0;
    }
    if delta.abs() <= 15.0 * abs_tol.max(rel_tol * (left + right).abs()) {
        return left + right + delta / 15.0;
    }
    let half_abs = abs_tol / 2.0;
    simpson_rec(f, a, m, fa, flm, fm, left, half_abs, rel_tol, depth - 1, bad)
        + simpson_rec(f, m, b, fm, frm, fb, right, half_abs, rel_tol, depth - 1, bad)
}

/// Adaptive Simpson over a panel decomposition: integrates on each
/// consecutive pair of `points` and sums. Useful when the integrand has
/// known kinks or peaks: pass them as interior points.
pub fn adaptive_simpson_panels<F: Fn(f64) -> f64>(
    f: &F,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let n = points.len().saturating_sub(1).max(1);
    let mut total = 0.0;
    for w in points.windows(2) {
        total += adaptive_simpson(f, w[0], w[1], abs_tol / n as f64, rel_tol, 48)?;
    }
    Ok(total)
}

static GL_CACHE: Lazy<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre polynomial and cached per order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    if let Some(v) = GL_CACHE.lock().unwrap().get(&n) {
        return v.clone();
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            // Evaluate P_n(x) and P_n'(x) by the recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                // Final weight uses the converged node.
                let (mut q0, mut q1) = (1.0, x);
                for k in 2..=n {
                    let q2 = ((2 * k - 1) as f64 * x * q1 - (k - 1) as f64 * q0) / k as f64;
                    q0 = q1;
                    q1 = q2;
                }
                let dq = n as f64 * (x * q1 - q0) / (x * x - 1.0);
                nodes[i] = -x;
                nodes[n - 1 - i] = x;
                let w = 2.0 / ((1.0 - x * x) * dq * dq);
                weights[i] = w;
                weights[n - 1 - i] = w;
                break;
            }
        }
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GL_CACHE
        .lock()
        .unwrap()
        .insert(n, (nodes.clone(), weights.clone()));
    (nodes, weights)
}

/// Density at rho >= 0 of |r e1 + U| where U ~ N(0, I_d).
///
/// Elementary closed forms for d = 1 and d = 3; for other dimensions the
/// angular integral over the sphere is evaluated by Gauss-Legendre.
pub fn noncentral_radius_density(d: usize, rho: f64, r: f64) -> f64 {
    debug_assert!(rho >= 0.0 && r >= 0.0);
    if rho <= 0.0 {
        return 0.0;
    }
    match d {
        1 => phi(rho - r) + phi(rho + r),
        3 => {
            if r < 1e-8 {
                // chi_3 limit with the leading r^2 correction.
                let base = 2.0 * rho * rho * phi(rho);
                base * (1.0 + r * r * (rho * rho - 3.0) / 6.0)
            } else {
                // (rho / r) [phi(rho - r) - phi(rho + r)], written to avoid
                // cancellation: phi(rho-r) (1 - exp(-2 rho r)).
                let lead = phi(rho - r);
                (rho / r) * lead * (-(-2.0 * rho * r).exp_m1())
            }
        }
        _ => {
            // f_d(rho; r) = (2 pi)^{-d/2} S_{d-2} rho^{d-1}
            //               exp(-(rho^2 + r^2)/2) I(rho r),
            // I(z) = int_0^pi exp(z cos a) sin^{d-2} a da, S_{d-2} the
            // surface area of the unit sphere in R^{d-1}.
            let dd = d as f64;
            let s_dm2 = if d == 2 {
                2.0 // S_0: two points
            } else {
                (dd - 1.0) * crate::special::unit_ball_volume(d - 1).unwrap()
            };
            let z = rho * r;
            let (nodes, weights) = gauss_legendre(48);
            let mut angular = 0.0;
            for (x, w) in nodes.iter().zip(weights.iter()) {
                let a = 0.5 * std::f64::consts::PI * (x + 1.0);
                let s = a.sin();
                // exp(z cos a - z) deferred: factor exp(z) into the prefactor
                // so large z does not overflow.
                angular += w * (z * (a.cos() - 1.0)).exp() * s.powi(d as i32 - 2);
            }
            angular *= 0.5 * std::f64::consts::PI;
            let log_pref = -(0.5 * (rho * rho + r * r)) + z; // exp(z) folded back
            (2.0 * std::f64::consts::PI).powf(-dd / 2.0)
                * s_dm2
                * rho.powi(d as i32 - 1)
                * log_pref.exp()
                * angular
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_polynomials_exactly() {
        let v = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12, 1e-12, 30)
            .unwrap();
        // antiderivative x^4/4 - x^2 + x
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn simpson_handles_integrable_power_singularity() {
        // int_0^1 x^{-1/2} dx = 2, integrand evaluated away from 0.
        let v = adaptive_simpson(&|x: f64| x.powf(-0.5), 1e-12, 1.0, 1e-9, 1e-9, 48).unwrap();
        assert!((v - 2.0).abs() < 1e-5, "{v}");
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(16);
        // Degree-31 polynomial x^30 integrates exactly: 2/31.
        let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-13);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }

    #[test]
    fn noncentral_density_normalizes() {
        for &d in &[1usize, 2, 3, 5] {
            for &r in &[0.0f64, 0.3, 1.0, 4.0] {
                let f = |rho: f64| noncentral_radius_density(d, rho, r);
                let hi = r + 12.0;
                let v = adaptive_simpson(&f, 1e-10, hi, 1e-10, 1e-10, 48).unwrap();
                assert!((v - 1.0).abs() < 1e-6, "d={d} r={r}: mass {v}");
            }
        }
    }

    #[test]
    fn noncentral_density_matches_mean_norm_squared() {
        // E |r e1 + U|^2 = r^2 + d.
        for &d in &[1usize, 3, 4] {
            let r = 1.7;
            let f = |rho: f64| rho * rho * noncentral_radius_density(d, rho, r);
            let v = adaptive_simpson(&f, 1e-10, r + 14.0, 1e-10, 1e-10, 48).unwrap();
            assert!(
                (v - (r * r + d as f64)).abs() < 1e-5,
                "d={d}: {v} vs {}",
                r * r + d as f64
            );
        }
    }

    #[test]
    fn norm_cdf_sanity() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.0) - 0.8413447460685429).abs() < 1e-12);
        assert!((norm_cdf(-1.0) - 0.15865525393145705).abs() < 1e-12);
        assert!((norm_cdf(2.5) - 0.9937903346742238).abs() < 1e-12);
        assert!((norm_cdf(-3.0) - 1.3498980316300946e-3).abs() < 1e-15);
        assert!(norm_cdf(8.0) > 1.0 - 1e-14);
        // Series / continued-fraction seam at |x| = sqrt(2).
        let seam = 1.0 + 1e-9;
        assert!((erfc_scalar(seam) - erfc_scalar(1.0 - 1e-9)).abs() < 1e-8);
    }
}
