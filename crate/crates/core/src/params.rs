//! Model parameters, validation, regime classification and the
//! diffusivity rescaling into canonical form.
//!
//! The model is parameterized by the spatial dimension `d`, the shape
//! exponent `p` of the kernel `|x|^{-p}`, the coupling `theta`, the
//! obstacle volatility `sigma`, the horizon `t` and the particle
//! diffusivity `kappa`. The admissible range is `d/2 < p < d`, which
//! splits into five regimes with distinct long-time scales.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relative tolerance for the regime boundary tests p = 2 and p = (d+2)/2.
///
/// CLI input arrives through decimal parsing, so exact boundary values may
/// be off by a few ulps; anything within this relative distance of a
/// boundary classifies as the boundary regime.
pub const EPS_REGIME: f64 = 1e-9;

/// Largest supported spatial dimension. Quadrature and Monte Carlo cost in
/// the spatial integrals grows with d, and d <= 5 already exercises all
/// five regimes.
pub const MAX_DIM: usize = 8;

/// Validated model parameters. `kappa = 1/2` is the canonical form in which
/// the particle is a standard Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub p: f64,
    pub theta: f64,
    pub sigma: f64,
    pub t: f64,
    pub kappa: f64,
}

/// Raw, unvalidated parameter record as parsed from CLI flags or a config
/// file. `d` is a float so that non-integral input can be rejected with a
/// structured error instead of a parse failure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RawParams {
    pub d: f64,
    pub p: f64,
    pub theta: f64,
    pub sigma: f64,
    pub t: f64,
    pub kappa: f64,
}

impl Default for RawParams {
    fn default() -> Self {
        RawParams {
            d: 1.0,
            p: 0.75,
            theta: 1.0,
            sigma: 1.0,
            t: 1.0,
            kappa: 0.5,
        }
    }
}

/// The five (d, p) regimes of the negative exponential moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    I,
    II,
    III,
    IV,
    V,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::I => "I",
            Regime::II => "II",
            Regime::III => "III",
            Regime::IV => "IV",
            Regime::V => "V",
        };
        write!(f, "{s}")
    }
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Positivity(format!(
            "{name} must be strictly positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// Validate a raw parameter record.
///
/// Checks, in order: d is a positive integer in 1..=8, p lies strictly
/// inside (d/2, d), and theta, sigma, t, kappa are strictly positive and
/// finite.
pub fn validate(raw: &RawParams) -> Result<ModelParams> {
    let d_round = raw.d.round();
    if !raw.d.is_finite() || (raw.d - d_round).abs() > 1e-12 || d_round < 1.0 {
        return Err(Error::Dimension(format!(
            "d must be a positive integer, got {}",
            raw.d
        )));
    }
    let d = d_round as usize;
    if d > MAX_DIM {
        return Err(Error::Dimension(format!(
            "d must be at most {MAX_DIM}, got {d}"
        )));
    }
    let half_d = d as f64 / 2.0;
    if !raw.p.is_finite() || raw.p <= half_d || raw.p >= d as f64 {
        return Err(Error::ShapeExponent(format!(
            "p must satisfy d/2 < p < d, i.e. {half_d} < p < {d}, got {}",
            raw.p
        )));
    }
    require_positive("theta", raw.theta)?;
    require_positive("sigma", raw.sigma)?;
    require_positive("t", raw.t)?;
    require_positive("kappa", raw.kappa)?;
    Ok(ModelParams {
        d,
        p: raw.p,
        theta: raw.theta,
        sigma: raw.sigma,
        t: raw.t,
        kappa: raw.kappa,
    })
}

fn near(p: f64, boundary: f64) -> bool {
    (p - boundary).abs() <= EPS_REGIME * boundary.abs().max(1.0)
}

/// Classify a validated (d, p) pair into its regime.
///
/// Boundaries: Regime II is p = 2 (which forces d = 3), Regime IV is
/// p = (d+2)/2 > 2. Boundary equality is tested with [`EPS_REGIME`].
pub fn classify_regime(d: usize, p: f64) -> Result<Regime> {
    // Re-validate the (d, p) part so the function is total on its contract.
    validate(&RawParams {
        d: d as f64,
        p,
        ..RawParams::default()
    })?;
    let critical = (d as f64 + 2.0) / 2.0;
    if near(p, 2.0) {
        return Ok(Regime::II);
    }
    if p < 2.0 {
        return Ok(Regime::I);
    }
    // Here p > 2 strictly (within tolerance), so d >= 3 and critical > 2.
    if near(p, critical) {
        return Ok(Regime::IV);
    }
    if p < critical {
        Ok(Regime::III)
    } else {
        Ok(Regime::V)
    }
}

impl ModelParams {
    pub fn from_raw(raw: &RawParams) -> Result<Self> {
        validate(raw)
    }

    pub fn regime(&self) -> Result<Regime> {
        classify_regime(self.d, self.p)
    }

    /// Whether the parameters are already in canonical form (kappa = 1/2).
    pub fn is_canonical(&self) -> bool {
        (self.kappa - 0.5).abs() <= 1e-15
    }

    /// Rescale to the canonical diffusivity kappa = 1/2.
    ///
    /// The time change s -> 2*kappa*s maps the model onto a standard
    /// Brownian particle with theta -> theta/(2 kappa),
    /// sigma^2 -> sigma^2/(2 kappa) and t -> 2*kappa*t. Idempotent on
    /// canonical input.
    pub fn canonicalize(&self) -> ModelParams {
        if self.is_canonical() {
            return *self;
        }
        let two_kappa = 2.0 * self.kappa;
        ModelParams {
            d: self.d,
            p: self.p,
            theta: self.theta / two_kappa,
            sigma: (self.sigma * self.sigma / two_kappa).sqrt(),
            t: two_kappa * self.t,
            kappa: 0.5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(d: f64, p: f64) -> RawParams {
        RawParams {
            d,
            p,
            ..RawParams::default()
        }
    }

    #[test]
    fn validates_paper_examples() {
        // p = 2 forces d = 3.
        let p = validate(&RawParams {
            d: 3.0,
            p: 2.0,
            theta: 0.1,
            sigma: 1.0,
            t: 1.0,
            kappa: 0.5,
        })
        .unwrap();
        assert_eq!(p.d, 3);

        assert!(matches!(
            validate(&raw(3.0, 1.4)),
            Err(Error::ShapeExponent(_))
        ));
        assert!(validate(&raw(1.0, 0.75)).is_ok());
    }

    #[test]
    fn rejects_bad_dimension_and_positivity() {
        assert!(matches!(validate(&raw(0.0, 0.75)), Err(Error::Dimension(_))));
        assert!(matches!(validate(&raw(2.5, 1.5)), Err(Error::Dimension(_))));
        assert!(matches!(validate(&raw(9.0, 5.0)), Err(Error::Dimension(_))));
        let mut r = raw(1.0, 0.75);
        r.theta = 0.0;
        assert!(matches!(validate(&r), Err(Error::Positivity(_))));
        r = raw(1.0, 0.75);
        r.t = -1.0;
        assert!(matches!(validate(&r), Err(Error::Positivity(_))));
        r = raw(1.0, 0.75);
        r.kappa = f64::NAN;
        assert!(matches!(validate(&r), Err(Error::Positivity(_))));
    }

    #[test]
    fn classifies_regimes() {
        assert_eq!(classify_regime(3, 1.8).unwrap(), Regime::I);
        assert_eq!(classify_regime(3, 2.0).unwrap(), Regime::II);
        assert_eq!(classify_regime(3, 2.5).unwrap(), Regime::IV);
        assert_eq!(classify_regime(5, 3.0).unwrap(), Regime::III);
        assert_eq!(classify_regime(3, 2.8).unwrap(), Regime::V);
        // Low dimensions are always Regime I.
        assert_eq!(classify_regime(1, 0.75).unwrap(), Regime::I);
        assert_eq!(classify_regime(2, 1.5).unwrap(), Regime::I);
    }

    #[test]
    fn boundary_tolerance() {
        assert_eq!(classify_regime(3, 2.0 + 1e-12).unwrap(), Regime::II);
        assert_eq!(classify_regime(3, 2.0 - 1e-12).unwrap(), Regime::II);
        assert_eq!(classify_regime(5, 3.5 * (1.0 + 1e-13)).unwrap(), Regime::IV);
    }

    #[test]
    fn regime_sweep_partitions_into_contiguous_bands() {
        // Sweep p at resolution 1e-3 over (d/2, d); the tags must form at
        // most 5 contiguous bands with boundaries at 2 and (d+2)/2.
        for d in 1..=8usize {
            let lo = d as f64 / 2.0;
            let hi = d as f64;
            let mut tags = Vec::new();
            let mut p = lo + 5e-4;
            while p < hi - 5e-4 {
                tags.push(classify_regime(d, p).unwrap());
                p += 1e-3;
            }
            let mut bands = vec![tags[0]];
            for &t in &tags[1..] {
                if t != *bands.last().unwrap() {
                    bands.push(t);
                }
            }
            assert!(bands.len() <= 5, "d={d}: bands {bands:?}");
            // Bands appear in order I..V.
            let order = |r: &Regime| match r {
                Regime::I => 0,
                Regime::II => 1,
                Regime::III => 2,
                Regime::IV => 3,
                Regime::V => 4,
            };
            for w in bands.windows(2) {
                assert!(order(&w[0]) < order(&w[1]), "d={d}: bands {bands:?}");
            }
        }
    }

    #[test]
    fn canonicalize_matches_rescaling_identity() {
        let p = validate(&RawParams {
            d: 3.0,
            p: 2.0,
            theta: 1.0,
            sigma: 1.0,
            t: 1.0,
            kappa: 1.0,
        })
        .unwrap();
        let c = p.canonicalize();
        assert!((c.theta - 0.5).abs() < 1e-15);
        assert!((c.sigma * c.sigma - 0.5).abs() < 1e-15);
        assert!((c.t - 2.0).abs() < 1e-15);
        assert!((c.kappa - 0.5).abs() < 1e-15);

        // kappa = 1/2 input is unchanged.
        let q = validate(&RawParams {
            d: 3.0,
            p: 2.0,
            theta: 1.0,
            sigma: 1.0,
            t: 1.0,
            kappa: 0.5,
        })
        .unwrap();
        assert_eq!(q.canonicalize(), q);
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent_and_preserves_regime(
            d in 1usize..=8,
            frac in 0.01f64..0.99,
            theta in 0.01f64..10.0,
            sigma in 0.1f64..4.0,
            t in 0.01f64..100.0,
            kappa in 0.05f64..5.0,
        ) {
            let p = d as f64 / 2.0 + frac * (d as f64 / 2.0);
            let raw = RawParams { d: d as f64, p, theta, sigma, t, kappa };
            let m = validate(&raw).unwrap();
            let c = m.canonicalize();
            prop_assert_eq!(c.canonicalize(), c);
            prop_assert_eq!(m.regime().unwrap(), c.regime().unwrap());
            // The rescaling leaves theta / sigma^2 and sigma^2 * t invariant.
            prop_assert!(((m.theta / (m.sigma * m.sigma))
                - (c.theta / (c.sigma * c.sigma))).abs() < 1e-12 * (1.0 + m.theta));
            prop_assert!(((m.sigma * m.sigma * m.t)
                - (c.sigma * c.sigma * c.t)).abs() < 1e-12 * (1.0 + m.t));
        }
    }
}
