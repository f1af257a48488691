//! Closed-form special functions and the regime constants.
//!
//! Everything here is deterministic: the compensator functions psi and Psi,
//! the gamma function, unit-ball volumes, the radial integral of
//! psi(|x|^{-p}), the regime constants rho_1..rho_5 (point values where the
//! closed form exists, bounds otherwise), the convolution constant C(d, p),
//! the truncated two-point kernel integral Q(b), the tail constant
//! D(d, p, sigma^2), and the catalytic growth rate and threshold.

use crate::error::{Error, Result};
use crate::params::{classify_regime, Regime};
use crate::quad::{adaptive_simpson, adaptive_simpson_panels, noncentral_radius_density};
use serde::{Deserialize, Serialize};

/// Arguments below this switch psi/Psi to their Taylor series.
const SERIES_CUT: f64 = 1e-4;

/// Largest argument for which exp(a) stays inside f64 range.
const EXP_OVERFLOW: f64 = 709.0;

// ---------------------------------------------------------------------------
// gamma
// ---------------------------------------------------------------------------

/// Lanczos coefficients, g = 7, n = 9 (Godfrey's set, ~15 significant digits).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// Gamma function for strictly positive real argument.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!(
            "gamma requires a positive finite argument, got {x}"
        )));
    }
    Ok(gamma_pos(x))
}

fn gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the Lanczos argument >= 0.5.
        std::f64::consts::PI
            / ((std::f64::consts::PI * x).sin() * gamma_pos(1.0 - x))
    } else {
        let z = x - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
    }
}

// ---------------------------------------------------------------------------
// compensator functions
// ---------------------------------------------------------------------------

/// psi(a) = e^{-a} - 1 + a, the negative-moment compensator.
///
/// Non-negative, increasing, convex, with psi(a) <= min(a, a^2/2). A 4-term
/// Taylor branch below 1e-4 avoids cancellation.
pub fn psi(a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("psi requires a >= 0, got {a}")));
    }
    Ok(psi_raw(a))
}

#[inline]
pub(crate) fn psi_raw(a: f64) -> f64 {
    if a < SERIES_CUT {
        // a^2/2 - a^3/6 + a^4/24 - a^5/120
        a * a * (0.5 + a * (-1.0 / 6.0 + a * (1.0 / 24.0 - a / 120.0)))
    } else {
        a + (-a).exp_m1()
    }
}

/// Psi(a) = e^{a} - 1 - a, the positive-moment compensator.
///
/// Returns +infinity past the f64 exponent range (the overflow is the
/// signal: the positive moment is infinite at that argument).
pub fn psi_big(a: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("Psi requires a >= 0, got {a}")));
    }
    Ok(psi_big_raw(a))
}

#[inline]
pub(crate) fn psi_big_raw(a: f64) -> f64 {
    if a < SERIES_CUT {
        a * a * (0.5 + a * (1.0 / 6.0 + a * (1.0 / 24.0 + a / 120.0)))
    } else if a > EXP_OVERFLOW {
        f64::INFINITY
    } else {
        a.exp_m1() - a
    }
}

// ---------------------------------------------------------------------------
// geometry and radial integrals
// ---------------------------------------------------------------------------

/// Volume of the d-dimensional unit ball, pi^{d/2} / Gamma(d/2 + 1).
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    if d < 1 || d > crate::params::MAX_DIM {
        return Err(Error::Domain(format!(
            "unit_ball_volume supports 1 <= d <= {}, got {d}",
            crate::params::MAX_DIM
        )));
    }
    let dd = d as f64;
    Ok(std::f64::consts::PI.powf(dd / 2.0) / gamma_pos(dd / 2.0 + 1.0))
}

fn check_dp(d: usize, p: f64) -> Result<()> {
    if d < 1 || d > crate::params::MAX_DIM {
        return Err(Error::Domain(format!("d out of range: {d}")));
    }
    if !(p > d as f64 / 2.0 && p < d as f64) {
        return Err(Error::Domain(format!(
            "(d, p) = ({d}, {p}) violates d/2 < p < d"
        )));
    }
    Ok(())
}

/// Closed form of the full-space integral of psi(|x|^{-p}):
/// omega_d * (p / (d - p)) * Gamma((2p - d) / p).
pub fn psi_radial_integral(d: usize, p: f64) -> Result<f64> {
    check_dp(d, p)?;
    let dd = d as f64;
    Ok(unit_ball_volume(d)? * p / (dd - p) * gamma_pos((2.0 * p - dd) / p))
}

/// The same integral by adaptive radial quadrature of
/// d * omega_d * int_0^infty psi(r^{-p}) r^{d-1} dr, used as the
/// independent cross-check of the closed form.
pub fn psi_radial_integral_quadrature(d: usize, p: f64) -> Result<f64> {
    check_dp(d, p)?;
    let dd = d as f64;
    let surface = dd * unit_ball_volume(d)?;
    // Inner piece [0, r0]: psi(r^{-p}) = r^{-p} - 1 + exp(-r^{-p}); the
    // exponential is below 1e-18 once r^{-p} >= 45.
    let r0 = 45.0f64.powf(-1.0 / p);
    let inner = r0.powf(dd - p) / (dd - p) - r0.powf(dd) / dd;
    // Tail beyond r1 (where r^{-p} <= 1e-2) by the alternating series
    // sum_{k>=2} (-1)^k / k! * r1^{d - kp} / (kp - d).
    let r1 = 1e-2f64.powf(-1.0 / p);
    let mut tail = 0.0;
    let mut fact = 1.0;
    for k in 2..=9u32 {
        fact *= k as f64;
        let kp = k as f64 * p;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        tail += sign / fact * r1.powf(dd - kp) / (kp - dd);
    }
    let mid = adaptive_simpson(
        &|r: f64| psi_raw(r.powf(-p)) * r.powf(dd - 1.0),
        r0,
        r1,
        1e-12,
        1e-10,
        48,
    )?;
    Ok(surface * (inner + mid + tail))
}

/// Scaled partial integral int_{|x| >= r0} psi(s |x|^{-p}) dx
/// = s^{d/p} * d * omega_d * int_{r0 / s^{1/p}}^infty psi(u^{-p}) u^{d-1} du.
pub fn psi_radial_partial(d: usize, p: f64, scale: f64, r0: f64) -> Result<f64> {
    check_dp(d, p)?;
    if !(scale > 0.0) || !(r0 >= 0.0) {
        return Err(Error::Domain("psi_radial_partial: scale > 0, r0 >= 0".into()));
    }
    let dd = d as f64;
    let surface = dd * unit_ball_volume(d)?;
    let u0 = r0 / scale.powf(1.0 / p);
    let u_small = 45.0f64.powf(-1.0 / p);
    let u_tail = 1e-2f64.powf(-1.0 / p);
    let mut total = 0.0;
    // Exact small-u piece on [u0, u_small] if it applies.
    if u0 < u_small {
        total += (u_small.powf(dd - p) - u0.powf(dd - p)) / (dd - p)
            - (u_small.powf(dd) - u0.powf(dd)) / dd;
    }
    let lo = u0.max(u_small);
    if lo < u_tail {
        total += adaptive_simpson(
            &|u: f64| psi_raw(u.powf(-p)) * u.powf(dd - 1.0),
            lo,
            u_tail,
            1e-12,
            1e-10,
            48,
        )?;
    }
    let t0 = u0.max(u_tail);
    let mut fact = 1.0;
    for k in 2..=9u32 {
        fact *= k as f64;
        let kp = k as f64 * p;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        total += sign / fact * t0.powf(dd - kp) / (kp - dd);
    }
    Ok(scale.powf(dd / p) * surface * total)
}

/// Scaled partial integral int_{|x| >= r0} Psi(s |x|^{-p}) dx (finite only
/// for r0 > 0; Psi explodes at the origin).
pub fn psi_big_radial_partial(d: usize, p: f64, scale: f64, r0: f64) -> Result<f64> {
    check_dp(d, p)?;
    if !(scale > 0.0 && r0 > 0.0) {
        return Err(Error::Domain(
            "psi_big_radial_partial: scale > 0 and r0 > 0 required".into(),
        ));
    }
    let dd = d as f64;
    let surface = dd * unit_ball_volume(d)?;
    let u0 = r0 / scale.powf(1.0 / p);
    let u_tail = 1e-2f64.powf(-1.0 / p).max(u0);
    let mut total = 0.0;
    if u0 < u_tail {
        total += adaptive_simpson(
            &|u: f64| psi_big_raw(u.powf(-p)) * u.powf(dd - 1.0),
            u0,
            u_tail,
            1e-12,
            1e-10,
            48,
        )?;
    }
    let mut fact = 1.0;
    for k in 2..=9u32 {
        fact *= k as f64;
        let kp = k as f64 * p;
        total += 1.0 / fact * u_tail.powf(dd - kp) / (kp - dd);
    }
    Ok(scale.powf(dd / p) * surface * total)
}

/// E |U|^{-q} for U ~ N(0, I_d): 2^{-q/2} Gamma((d-q)/2) / Gamma(d/2).
pub fn mean_inverse_norm_moment(d: usize, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < d as f64) {
        return Err(Error::Domain(format!(
            "E|U|^-q requires 0 < q < d, got q = {q}, d = {d}"
        )));
    }
    let dd = d as f64;
    Ok(2.0f64.powf(-q / 2.0) * gamma_pos((dd - q) / 2.0) / gamma_pos(dd / 2.0))
}

// ---------------------------------------------------------------------------
// regime constants
// ---------------------------------------------------------------------------

fn require_regime(d: usize, p: f64, want: Regime, what: &str) -> Result<()> {
    let got = classify_regime(d, p)?;
    if got != want {
        return Err(Error::Regime(format!(
            "{what} requires Regime {want}, but (d, p) = ({d}, {p}) is Regime {got}"
        )));
    }
    Ok(())
}

/// Regime I constant: theta^{d/p} * omega_d * (p/(d-p)) * Gamma((2p-d)/p).
pub fn rho1(d: usize, p: f64, theta: f64) -> Result<f64> {
    require_regime(d, p, Regime::I, "rho1")?;
    if !(theta > 0.0) {
        return Err(Error::Positivity("theta must be positive".into()));
    }
    Ok(theta.powf(d as f64 / p) * psi_radial_integral(d, p)?)
}

/// Explicit upper bound for the Regime II constant: (8/3) pi^{3/2} theta^{3/2}.
pub fn rho2_upper_bound(theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Positivity("theta must be positive".into()));
    }
    Ok(8.0 / 3.0 * std::f64::consts::PI.powf(1.5) * theta.powf(1.5))
}

/// Regime III constant.
pub fn rho3(d: usize, p: f64, theta: f64, sigma: f64) -> Result<f64> {
    require_regime(d, p, Regime::III, "rho3")?;
    let dd = d as f64;
    let a = 2.0 + dd - 2.0 * p;
    let b = 4.0 + dd - 2.0 * p;
    let gammas = gamma_pos((dd - p) / 2.0).powi(2) * gamma_pos((2.0 * p - dd) / 2.0)
        / gamma_pos(p / 2.0).powi(2);
    Ok(2.0f64.powf(a / 2.0) * theta * theta * dd * unit_ball_volume(d)?
        / (a * b * sigma.powf(2.0 * p - dd))
        * gammas)
}

/// Regime IV constant: 2^{(d+4)/2} d omega_d (theta / ((d-2) sigma))^2.
pub fn rho4(d: usize, theta: f64, sigma: f64) -> Result<f64> {
    let p = (d as f64 + 2.0) / 2.0;
    require_regime(d, p, Regime::IV, "rho4")?;
    let dd = d as f64;
    let ratio = theta / ((dd - 2.0) * sigma);
    Ok(2.0f64.powf((dd + 4.0) / 2.0) * dd * unit_ball_volume(d)? * ratio * ratio)
}

/// Regime IV constant by the two-point-kernel route:
/// theta^2 sigma^{-2} C(d,p) 2^{d-p-1} d omega_d (2 pi)^{-d/2} Gamma(d-p)
/// at p = (d+2)/2, which simplifies to 4 d omega_d (theta/((d-2) sigma))^2.
///
/// Differs from [`rho4`] by the exact factor 2^{d/2}; see the rho4 tests.
pub fn rho4_via_convolution(d: usize, theta: f64, sigma: f64) -> Result<f64> {
    let p = (d as f64 + 2.0) / 2.0;
    require_regime(d, p, Regime::IV, "rho4")?;
    let dd = d as f64;
    Ok(theta * theta / (sigma * sigma)
        * convolution_constant(d, p)?
        * 2.0f64.powf(dd - p - 1.0)
        * dd
        * unit_ball_volume(d)?
        * (2.0 * std::f64::consts::PI).powf(-dd / 2.0)
        * gamma_pos(dd - p))
}

/// Interval bracket for the Regime V constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rho5Bounds {
    /// C1(sigma^2) * theta^{(d-2)/(p-2)}; zero with `lower_estimated = false`
    /// when no Monte Carlo estimate of C1 was supplied.
    pub lower: f64,
    pub upper: f64,
    pub lower_estimated: bool,
    /// Exponent (d-2)/(p-2) of the theta-homogeneity shared by both ends.
    pub theta_exponent: f64,
}

/// Bounds C1 theta^{(d-2)/(p-2)} <= rho5 <= C2 theta^{(d-2)/(p-2)} for
/// Regime V. `c1_estimate` is the externally supplied Monte Carlo estimate
/// of the unit-theta lower constant; absent, the lower end is reported as 0
/// and flagged unestimated.
pub fn rho5_bounds(
    d: usize,
    p: f64,
    theta: f64,
    sigma: f64,
    c1_estimate: Option<f64>,
) -> Result<Rho5Bounds> {
    require_regime(d, p, Regime::V, "rho5_bounds")?;
    let dd = d as f64;
    let expo = (dd - 2.0) / (p - 2.0);
    let theta_pow = theta.powf(expo);
    let dconst = d_constant(d, p, sigma)
        .map_err(|e| e.propagate("rho5_bounds: D(d,p,sigma^2) quadrature"))?;
    // Minimize over a > 0:
    //   f(a) = 1/2 theta^2 a^{-alpha} D + theta d omega_d / (d-p) a^{beta},
    // alpha = 2p - d - 2, beta = d - p, alpha + beta = p - 2.
    let alpha = 2.0 * p - dd - 2.0;
    let beta = dd - p;
    let big_a = 0.5 * theta * theta * dconst;
    let big_b = theta * dd * unit_ball_volume(d)? / (dd - p);
    let pm2 = p - 2.0;
    let upper = big_a.powf(beta / pm2)
        * big_b.powf(alpha / pm2)
        * ((beta / alpha).powf(alpha / pm2) + (alpha / beta).powf(beta / pm2));
    let (lower, lower_estimated) = match c1_estimate {
        Some(c1) => {
            if !(c1 > 0.0) {
                return Err(Error::Positivity("C1 estimate must be positive".into()));
            }
            (c1 * theta_pow, true)
        }
        None => (0.0, false),
    };
    if lower_estimated && lower > upper {
        return Err(Error::Domain(format!(
            "rho5 interval inverted: lower {lower} > upper {upper}"
        )));
    }
    Ok(Rho5Bounds {
        lower,
        upper,
        lower_estimated,
        theta_exponent: expo,
    })
}

/// Direct numerical minimization of the rho5 upper-bound objective, used to
/// cross-check the closed-form minimum in tests.
pub fn rho5_upper_by_scan(d: usize, p: f64, theta: f64, sigma: f64) -> Result<f64> {
    require_regime(d, p, Regime::V, "rho5_upper_by_scan")?;
    let dd = d as f64;
    let dconst = d_constant(d, p, sigma)?;
    let alpha = 2.0 * p - dd - 2.0;
    let beta = dd - p;
    let obj = |a: f64| {
        0.5 * theta * theta * a.powf(-alpha) * dconst
            + theta * dd * unit_ball_volume(d).unwrap() / (dd - p) * a.powf(beta)
    };
    let mut best = f64::INFINITY;
    let mut a = 1e-4;
    while a < 1e4 {
        best = best.min(obj(a));
        a *= 1.0078;
    }
    Ok(best)
}

/// Convolution constant C(d, p) in
/// int |x-y|^{-p} |x-z|^{-p} dx = C(d,p) |y-z|^{-(2p-d)}.
pub fn convolution_constant(d: usize, p: f64) -> Result<f64> {
    check_dp(d, p)?;
    let dd = d as f64;
    Ok(std::f64::consts::PI.powf(dd / 2.0)
        * gamma_pos((dd - p) / 2.0).powi(2)
        * gamma_pos((2.0 * p - dd) / 2.0)
        / (gamma_pos(p / 2.0).powi(2) * gamma_pos(dd - p)))
}

// ---------------------------------------------------------------------------
// Q(b) and D(d, p, sigma^2)
// ---------------------------------------------------------------------------

/// Quadrature controls for Q(b) and D.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QbQuadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Radius beyond which the large-argument expansion replaces quadrature.
    pub r_far: f64,
}

impl Default for QbQuadrature {
    fn default() -> Self {
        QbQuadrature {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            r_far: 60.0,
        }
    }
}

/// Q(b) = int_{|x| >= b} |x|^{-p} E[ 1{|x+U| >= b} |x+U|^{-p} ] dx with
/// U ~ N(0, I_d), reduced by rotational symmetry to a nested radial
/// quadrature against the noncentral radius density. Monotone
/// non-increasing in b; Q(0+) = C(d,p) E|U|^{-(2p-d)} and
/// b^{2p-d} Q(b) -> d omega_d / (2p-d) as b -> infinity.
pub fn q_of_b(d: usize, p: f64, b: f64, quad: &QbQuadrature) -> Result<f64> {
    check_dp(d, p)?;
    if !(b >= 0.0) {
        return Err(Error::Domain(format!("Q(b) requires b >= 0, got {b}")));
    }
    let dd = d as f64;
    let surface = dd * unit_ball_volume(d)?;
    let r_far = quad.r_far.max(3.0 * b).max(b + 20.0);
    let inner = |r: f64| inner_power_expectation(d, p, b, r);

    // Outer integral on [r_lo, r_far] over log-spaced trapezoid nodes; the
    // r -> 0 stub is analytic to leading order since G is continuous there.
    let r_lo = b.max(1e-6);
    let stub = if b < r_lo {
        surface * inner(r_lo) * r_lo.powf(dd - p) / (dd - p)
    } else {
        0.0
    };
    let n = 480usize;
    let (lu, hu) = (r_lo.ln(), r_far.ln());
    let du = (hu - lu) / n as f64;
    let mut main = 0.0;
    let mut prev = {
        let r = r_lo;
        surface * r.powf(dd - p) * inner(r) // extra r from the log substitution
    };
    for k in 1..=n {
        let r = (lu + k as f64 * du).exp();
        let cur = surface * r.powf(dd - p) * inner(r);
        main += 0.5 * (prev + cur) * du;
        prev = cur;
    }
    if !main.is_finite() {
        return Err(Error::Convergence("Q(b): non-finite quadrature".into()));
    }

    // Tail beyond r_far: E|r e1 + U|^{-p} = r^{-p}(1 + p(p+2-d)/(2 r^2) + O(r^{-4})),
    // and the indicator is void out there.
    let q = 2.0 * p - dd;
    let corr = p * (p + 2.0 - dd) / 2.0;
    let tail = surface * (r_far.powf(-q) / q + corr * r_far.powf(-q - 2.0) / (q + 2.0));
    Ok(stub + main + tail)
}

/// G(r) = E[ 1{|r e1 + U| >= b} |r e1 + U|^{-p} ], by paneled Gauss-Legendre
/// quadrature of rho^{-p} against the noncentral radius density. The
/// integrable rho^{d-1-p} singularity at the origin is flattened by the
/// substitution u = rho^{d-p}.
fn inner_power_expectation(d: usize, p: f64, b: f64, r: f64) -> f64 {
    let lo = b.max(0.0);
    let hi = r + 10.0 + (d as f64).sqrt();
    if lo >= hi {
        return 0.0;
    }
    let (nodes, weights) = crate::quad::gauss_legendre(48);
    let gl = |a: f64, c: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        if c <= a {
            return 0.0;
        }
        let mid = 0.5 * (a + c);
        let half = 0.5 * (c - a);
        nodes
            .iter()
            .zip(weights.iter())
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    };
    let integrand = |rho: f64| rho.powf(-p) * noncentral_radius_density(d, rho, r);
    let mut total = 0.0;
    // Singular panel [lo, s0]: with u = rho^{d-p},
    // int rho^{-p} f drho = (1/(d-p)) int f(rho) rho^{1-d} du, smooth at 0.
    let s0 = 0.5f64.clamp(lo, hi);
    let beta = d as f64 - p;
    if s0 > lo {
        total += gl(lo.powf(beta), s0.powf(beta), &|u: f64| {
            let rho = u.powf(1.0 / beta);
            noncentral_radius_density(d, rho, r) * rho.powf(1.0 - d as f64) / beta
        });
    }
    // Remaining panels, split around the density peak at rho ~ r.
    let mut pts = vec![s0.max(lo)];
    for cand in [r - 6.0, r - 2.0, r + 2.0] {
        let c = cand.clamp(*pts.last().unwrap(), hi);
        if c > *pts.last().unwrap() {
            pts.push(c);
        }
    }
    if hi > *pts.last().unwrap() {
        pts.push(hi);
    }
    for w in pts.windows(2) {
        total += gl(w[0], w[1], &integrand);
    }
    total
}

/// Small-b limit of Q from Gamma closed forms:
/// C(d,p) 2^{d-p-1} d omega_d (2 pi)^{-d/2} Gamma(d-p).
pub fn q_limit_small_b(d: usize, p: f64) -> Result<f64> {
    check_dp(d, p)?;
    let dd = d as f64;
    Ok(convolution_constant(d, p)?
        * 2.0f64.powf(dd - p - 1.0)
        * dd
        * unit_ball_volume(d)?
        * (2.0 * std::f64::consts::PI).powf(-dd / 2.0)
        * gamma_pos(dd - p))
}

/// Large-b limit of b^{2p-d} Q(b): d omega_d / (2p - d).
pub fn q_limit_large_b(d: usize, p: f64) -> Result<f64> {
    check_dp(d, p)?;
    let dd = d as f64;
    Ok(dd * unit_ball_volume(d)? / (2.0 * p - dd))
}

/// D(d, p, sigma^2) = 4 sigma^{-2} int_0^inf s^{2p-d-3} Q(s) ds, defined for
/// p > (d+2)/2. The integrand tail beyond `s_cut` uses the large-b law.
pub fn d_constant(d: usize, p: f64, sigma: f64) -> Result<f64> {
    d_constant_with_cut(d, p, sigma, 50.0)
}

/// D with an explicit tail cut, exposed for the tail-substitution
/// consistency check.
pub fn d_constant_with_cut(d: usize, p: f64, sigma: f64, s_cut: f64) -> Result<f64> {
    check_dp(d, p)?;
    if !(sigma > 0.0) {
        return Err(Error::Positivity("sigma must be positive".into()));
    }
    let dd = d as f64;
    if p <= (dd + 2.0) / 2.0 {
        return Err(Error::Regime(format!(
            "D(d,p,sigma^2) requires p > (d+2)/2, got p = {p}, d = {d}"
        )));
    }
    let quad = QbQuadrature::default();
    let expo = 2.0 * p - dd - 3.0; // > -1
    // Small-s stub [0, s_lo]: Q is continuous at 0, bounded by Q(0+).
    let s_lo: f64 = 1e-3;
    let q0 = q_limit_small_b(d, p)?;
    let stub = q0 * s_lo.powf(expo + 1.0) / (expo + 1.0);
    // Composite quadrature on a geometric grid between s_lo and s_cut; Q is
    // expensive, so sample on fixed nodes and integrate the log-spaced
    // trapezoid int f(s) ds = int f(e^u) e^u du.
    let n = 160usize;
    let lu = s_lo.ln();
    let hu = s_cut.ln();
    let du = (hu - lu) / n as f64;
    let mut vals = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let u = lu + k as f64 * du;
        let s = u.exp();
        let q = q_of_b(d, p, s, &quad).map_err(|e| e.propagate("D integrand"))?;
        vals.push(s.powf(expo) * q * s);
    }
    let mut main = 0.0;
    for k in 0..n {
        main += 0.5 * (vals[k] + vals[k + 1]) * du;
    }
    // Tail via Lemma-type asymptotic Q(s) ~ (d omega_d / (2p-d)) s^{-(2p-d)}:
    // int_{s_cut}^inf s^{2p-d-3} Q(s) ds ~ (d omega_d/(2p-d)) s_cut^{-2} / 2.
    let tail = q_limit_large_b(d, p)? * s_cut.powf(-2.0) / 2.0;
    Ok(4.0 / (sigma * sigma) * (stub + main + tail))
}

// ---------------------------------------------------------------------------
// catalytic medium
// ---------------------------------------------------------------------------

/// Catalytic growth rate for p < 2:
/// ((2-p)/2) (p/sigma^2)^{p/(2-p)} (theta gamma_dp)^{2/(2-p)}.
pub fn catalytic_rate(d: usize, p: f64, theta: f64, sigma: f64, gamma_dp: f64) -> Result<f64> {
    check_dp(d, p)?;
    if !(p < 2.0) {
        return Err(Error::Regime(format!(
            "catalytic_rate requires p < 2 (sub-critical), got p = {p}"
        )));
    }
    if !(theta > 0.0 && sigma > 0.0) {
        return Err(Error::Positivity("theta, sigma must be positive".into()));
    }
    if !(gamma_dp > 0.0) {
        return Err(Error::Positivity("gamma_dp must be positive".into()));
    }
    let e1 = p / (2.0 - p);
    let e2 = 2.0 / (2.0 - p);
    Ok((2.0 - p) / 2.0 * (p / (sigma * sigma)).powf(e1) * (theta * gamma_dp).powf(e2))
}

/// Finiteness threshold sigma^2 / 8 for the critical catalytic model
/// (p = 2, d = 3) in canonical variables (kappa = 1/2).
pub fn catalytic_threshold(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Positivity("sigma must be positive".into()));
    }
    Ok(sigma * sigma / 8.0)
}

/// Threshold expressed for a general diffusivity kappa: applying
/// [`catalytic_threshold`] to the canonicalized volatility
/// sigma^2/(2 kappa) gives sigma^2/(16 kappa), the bound the rescaled
/// coupling theta/(2 kappa) must stay below.
pub fn catalytic_threshold_kappa(sigma: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::Positivity("kappa must be positive".into()));
    }
    catalytic_threshold((sigma * sigma / (2.0 * kappa)).sqrt())
}

// ---------------------------------------------------------------------------
// constants report
// ---------------------------------------------------------------------------

/// Point value or interval for a regime constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstantValue {
    Point(f64),
    Interval { lower: f64, upper: f64 },
}

/// The applicable regime constant for a parameter set, with the closed form
/// used and the predicted long-time scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub regime: Regime,
    pub formula_id: String,
    pub value: ConstantValue,
    /// Human-readable deviation scale, one of t^{d/p}, t^{3/2},
    /// t^{(4+d-2p)/2}, t*log t, t.
    pub scale: String,
    /// Numeric exponent of the power part of the scale.
    pub scale_exponent: f64,
    pub scale_has_log: bool,
    /// sigma^2/8 finiteness threshold, reported at the critical point.
    pub catalytic_threshold: Option<f64>,
    pub inputs: crate::params::ModelParams,
}

impl ConstantsReport {
    /// Build the report for validated parameters. `rho2_estimate` and
    /// `c1_estimate` optionally sharpen the Regime II / V intervals with
    /// Monte Carlo values from the functional module.
    pub fn for_params(
        params: &crate::params::ModelParams,
        rho2_estimate: Option<f64>,
        c1_estimate: Option<f64>,
    ) -> Result<ConstantsReport> {
        let regime = params.regime()?;
        let d = params.d;
        let dd = d as f64;
        let p = params.p;
        let (formula_id, value, scale, scale_exponent, scale_has_log) = match regime {
            Regime::I => (
                "rho1.gamma_closed_form".to_string(),
                ConstantValue::Point(rho1(d, p, params.theta)?),
                format!("t^{{{:.6}}}", dd / p),
                dd / p,
                false,
            ),
            Regime::II => {
                let upper = rho2_upper_bound(params.theta)?;
                let lower = rho2_estimate.map(|e| e.max(0.0)).unwrap_or(0.0);
                (
                    "rho2.interval_jensen_upper".to_string(),
                    ConstantValue::Interval { lower, upper },
                    "t^{3/2}".to_string(),
                    1.5,
                    false,
                )
            }
            Regime::III => (
                "rho3.gamma_closed_form".to_string(),
                ConstantValue::Point(rho3(d, p, params.theta, params.sigma)?),
                format!("t^{{{:.6}}}", (4.0 + dd - 2.0 * p) / 2.0),
                (4.0 + dd - 2.0 * p) / 2.0,
                false,
            ),
            Regime::IV => (
                "rho4.gamma_closed_form".to_string(),
                ConstantValue::Point(rho4(d, params.theta, params.sigma)?),
                "t*log t".to_string(),
                1.0,
                true,
            ),
            Regime::V => {
                let b = rho5_bounds(d, p, params.theta, params.sigma, c1_estimate)?;
                (
                    "rho5.interval_minimized_upper".to_string(),
                    ConstantValue::Interval {
                        lower: b.lower,
                        upper: b.upper,
                    },
                    "t".to_string(),
                    1.0,
                    false,
                )
            }
        };
        let threshold = if regime == Regime::II {
            Some(catalytic_threshold(params.sigma)?)
        } else {
            None
        };
        // Well-formedness of the reported value.
        match &value {
            ConstantValue::Point(v) => {
                if !(*v > 0.0 && v.is_finite()) {
                    return Err(Error::Domain(format!("constant must be positive: {v}")));
                }
            }
            ConstantValue::Interval { lower, upper } => {
                if !(*lower >= 0.0 && *upper > *lower && upper.is_finite()) {
                    return Err(Error::Domain(format!(
                        "malformed interval [{lower}, {upper}]"
                    )));
                }
            }
        }
        Ok(ConstantsReport {
            regime,
            formula_id,
            value,
            scale,
            scale_exponent,
            scale_has_log,
            catalytic_threshold: threshold,
            inputs: *params,
        })
    }
}
