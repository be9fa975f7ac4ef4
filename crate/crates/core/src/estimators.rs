//! The four range-based volatility estimators.
//!
//! Canonical forms take extremes of the unit-window, unit-variance path and
//! return a number whose expectation is 1 for an unbiased estimator. Physical
//! forms apply the same formulas to log-price increments and return a
//! variance of the log-return over the window.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::paths::{BridgeExtremes, Extremes, PhysicalBar};

/// `ln 16`, the Parkinson normalizer (`E[(h - l)^2]` at zero drift).
pub const PARKINSON_NORM: f64 = 2.772_588_722_239_781;
/// `E[s^2] = pi^2 / 6` for the bridge range `s`.
pub const BRIDGE_RANGE_SQ_MEAN: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
/// `kappa = 6 / pi^2`.
pub const BRIDGE_KAPPA: f64 = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);

/// Garman-Klass coefficients.
pub const GK_K1: f64 = 0.511;
pub const GK_K2: f64 = 0.0109;
pub const GK_K3: f64 = 0.383;

/// Which middle term the Garman–Klass formula uses; the two readings
/// disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum GkVariant {
    /// `k1 (H-L)^2 - k2 (C (H-L) - 2 H L) - k3 C^2`
    Physical,
    /// `k1 d^2 - k2 (c d - 2 h c) - k3 c^2`
    Canonical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum EstimatorKind {
    Parkinson,
    GarmanKlass(GkVariant),
    RogersSatchell,
    Bridge,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Parkinson,
        EstimatorKind::GarmanKlass(GkVariant::Physical),
        EstimatorKind::GarmanKlass(GkVariant::Canonical),
        EstimatorKind::RogersSatchell,
        EstimatorKind::Bridge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Parkinson => "parkinson",
            EstimatorKind::GarmanKlass(GkVariant::Physical) => "garman-klass",
            EstimatorKind::GarmanKlass(GkVariant::Canonical) => "garman-klass-canonical",
            EstimatorKind::RogersSatchell => "rogers-satchell",
            EstimatorKind::Bridge => "bridge",
        }
    }

    /// Estimators that can go negative on some inputs.
    pub fn can_be_negative(self) -> bool {
        matches!(self, EstimatorKind::GarmanKlass(_) | EstimatorKind::RogersSatchell)
    }

    /// Evaluate the canonical formula for this kind.
    pub fn canonical_value(self, e: &Extremes, b: &BridgeExtremes) -> f64 {
        match self {
            EstimatorKind::Parkinson => parkinson_value(e),
            EstimatorKind::GarmanKlass(v) => garman_klass_value(e, v),
            EstimatorKind::RogersSatchell => rogers_satchell_value(e),
            EstimatorKind::Bridge => bridge_value(b),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s.trim().to_ascii_lowercase().as_str() {
            "parkinson" | "park" => EstimatorKind::Parkinson,
            "garman-klass" | "gk" => EstimatorKind::GarmanKlass(GkVariant::Physical),
            "garman-klass-canonical" | "gk-canonical" => EstimatorKind::GarmanKlass(GkVariant::Canonical),
            "rogers-satchell" | "rs" => EstimatorKind::RogersSatchell,
            "bridge" => EstimatorKind::Bridge,
            other => return Err(Error::InvalidArgument(format!("unknown estimator `{other}`"))),
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolatilityEstimate {
    pub value: f64,
    pub kind: EstimatorKind,
    pub canonical: bool,
}

impl VolatilityEstimate {
    /// Set when a Garman–Klass or Rogers–Satchell value came out negative.
    /// Such values are reported as-is.
    pub fn negative_warning(&self) -> bool {
        self.value < 0.0
    }
}

#[inline]
pub fn parkinson_value(e: &Extremes) -> f64 {
    let d = e.range();
    d * d / PARKINSON_NORM
}

#[inline]
pub fn garman_klass_value(e: &Extremes, variant: GkVariant) -> f64 {
    let (h, l, c) = (e.high, e.low, e.close);
    let d = h - l;
    let middle = match variant {
        GkVariant::Physical => c * d - 2.0 * h * l,
        GkVariant::Canonical => c * d - 2.0 * h * c,
    };
    GK_K1 * d * d - GK_K2 * middle - GK_K3 * c * c
}

#[inline]
pub fn rogers_satchell_value(e: &Extremes) -> f64 {
    let (h, l, c) = (e.high, e.low, e.close);
    h * (h - c) + l * (l - c)
}

#[inline]
pub fn bridge_value(b: &BridgeExtremes) -> f64 {
    let s = b.range();
    BRIDGE_KAPPA * s * s
}

fn canonical(kind: EstimatorKind, value: f64) -> VolatilityEstimate {
    VolatilityEstimate {
        value,
        kind,
        canonical: true,
    }
}

pub fn parkinson(e: &Extremes) -> VolatilityEstimate {
    canonical(EstimatorKind::Parkinson, parkinson_value(e))
}

/// Garman–Klass with the physical-form middle term.
pub fn garman_klass(e: &Extremes) -> VolatilityEstimate {
    garman_klass_with(e, GkVariant::Physical)
}

pub fn garman_klass_with(e: &Extremes, variant: GkVariant) -> VolatilityEstimate {
    canonical(EstimatorKind::GarmanKlass(variant), garman_klass_value(e, variant))
}

pub fn rogers_satchell(e: &Extremes) -> VolatilityEstimate {
    canonical(EstimatorKind::RogersSatchell, rogers_satchell_value(e))
}

pub fn bridge_estimator(b: &BridgeExtremes) -> VolatilityEstimate {
    canonical(EstimatorKind::Bridge, bridge_value(b))
}

/// Apply an estimator to a physical bar. The bridge estimator needs the
/// bridge extremes of the intra-window path.
pub fn physical_estimate(
    bar: &PhysicalBar,
    bridge: Option<&BridgeExtremes>,
    kind: EstimatorKind,
) -> Result<VolatilityEstimate> {
    let e = bar.extremes();
    let value = match kind {
        EstimatorKind::Bridge => bridge_value(bridge.ok_or(Error::MissingBridge)?),
        other => other.canonical_value(&e, &BridgeExtremes { xi: 0.0, zeta: 0.0 }),
    };
    Ok(VolatilityEstimate {
        value,
        kind,
        canonical: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{bar_from_samples, bridge_extremes, extremes, simulate_path, Tick, Window};
    use proptest::prelude::*;

    fn ex(high: f64, low: f64, close: f64) -> Extremes {
        Extremes { high, low, close }
    }

    #[test]
    fn constants() {
        assert_eq!(PARKINSON_NORM, 16f64.ln());
        assert!((BRIDGE_KAPPA * BRIDGE_RANGE_SQ_MEAN - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parkinson_examples() {
        let d = PARKINSON_NORM.sqrt();
        assert!((parkinson(&ex(d, 0.0, 0.0)).value - 1.0).abs() < 1e-15);
        assert_eq!(parkinson(&ex(0.0, 0.0, 0.0)).value, 0.0);
    }

    #[test]
    fn garman_klass_examples() {
        assert!((garman_klass(&ex(1.0, -1.0, 0.0)).value - 2.0222).abs() < 1e-12);
        assert_eq!(garman_klass(&ex(0.0, 0.0, 0.0)).value, 0.0);
        // Canonical middle term: c d - 2 h c = 0 at c = 0.
        assert!((garman_klass_with(&ex(1.0, -1.0, 0.0), GkVariant::Canonical).value - 2.044).abs() < 1e-12);
        // h = 1, l = -0.5, c = 0.5: d = 1.5
        let e = ex(1.0, -0.5, 0.5);
        let phys = 0.511 * 2.25 - 0.0109 * (0.75 + 1.0) - 0.383 * 0.25;
        let canon = 0.511 * 2.25 - 0.0109 * (0.75 - 1.0) - 0.383 * 0.25;
        assert!((garman_klass(&e).value - phys).abs() < 1e-14);
        assert!((garman_klass_with(&e, GkVariant::Canonical).value - canon).abs() < 1e-14);
    }

    #[test]
    fn rogers_satchell_examples() {
        assert_eq!(rogers_satchell(&ex(0.7, 0.0, 0.7)).value, 0.0);
        assert_eq!(rogers_satchell(&ex(1.0, -1.0, 0.0)).value, 2.0);
    }

    #[test]
    fn bridge_examples() {
        let s = std::f64::consts::PI / 6f64.sqrt();
        assert!((bridge_estimator(&BridgeExtremes { xi: s, zeta: 0.0 }).value - 1.0).abs() < 1e-15);
        assert_eq!(bridge_estimator(&BridgeExtremes { xi: 0.0, zeta: 0.0 }).value, 0.0);
    }

    #[test]
    fn negative_values_are_not_clamped() {
        // Inconsistent bar data (close above the high) drives R&S below zero.
        let e = ex(0.1, 0.0, 0.5);
        let r = rogers_satchell(&e);
        assert!((r.value + 0.04).abs() < 1e-15 && r.negative_warning());
        assert!(!parkinson(&e).negative_warning());
    }

    #[test]
    fn names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        assert!("yang-zhang".parse::<EstimatorKind>().is_err());
    }

    #[test]
    fn physical_needs_bridge_data() {
        let bar = PhysicalBar::new(0.1, -0.1, 0.0, 1.0).unwrap();
        assert!(matches!(physical_estimate(&bar, None, EstimatorKind::Bridge), Err(Error::MissingBridge)));
        let zero = PhysicalBar::new(0.0, 0.0, 0.0, 1.0).unwrap();
        for k in EstimatorKind::ALL {
            let b = BridgeExtremes { xi: 0.0, zeta: 0.0 };
            assert_eq!(physical_estimate(&zero, Some(&b), k).unwrap().value, 0.0);
        }
    }

    #[test]
    fn physical_matches_scaled_canonical() {
        let (sigma, horizon) = (0.3f64, 2.5f64);
        let scale = sigma * horizon.sqrt();
        let p = simulate_path(1000, 0.4, 21).unwrap();
        let ticks: Vec<Tick> = p
            .values()
            .iter()
            .enumerate()
            .map(|(n, &v)| Tick { time: n as f64 * horizon / 1000.0, price: scale * v })
            .collect();
        let (bar, b) = bar_from_samples(&ticks, Window { start: 0.0, length: horizon }, true).unwrap();
        let (e, cb) = (extremes(&p), bridge_extremes(&p));
        for k in EstimatorKind::ALL {
            let phys = physical_estimate(&bar, Some(&b), k).unwrap().value;
            let want = sigma * sigma * horizon * k.canonical_value(&e, &cb);
            assert!(((phys - want) / want).abs() < 1e-12, "{k}: {phys} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn homogeneous_of_degree_two(h in 0.0f64..3.0, l in -3.0f64..0.0, t in 0.0f64..1.0, alpha in 0.1f64..10.0) {
            let c = l + t * (h - l);
            let e = ex(h, l, c);
            let b = BridgeExtremes { xi: h, zeta: l };
            for k in EstimatorKind::ALL {
                let v = k.canonical_value(&e, &b);
                let s = k.canonical_value(&e.scaled(alpha), &b.scaled(alpha));
                prop_assert!((s - alpha * alpha * v).abs() <= 1e-12 * (1.0 + (alpha * alpha * v).abs()));
            }
            prop_assert!(parkinson(&e).value >= 0.0);
            prop_assert!(bridge_estimator(&b).value >= 0.0);
        }

        #[test]
        fn rogers_satchell_at_range_ends(h in 0.0f64..3.0, l in -3.0f64..0.0) {
            prop_assert!(rogers_satchell(&ex(h, l, h)).value >= 0.0);
            prop_assert!((rogers_satchell(&ex(h, l, h)).value - l * (l - h)).abs() < 1e-14);
            prop_assert!((rogers_satchell(&ex(h, l, l)).value - h * (h - l)).abs() < 1e-14);
        }
    }
}
