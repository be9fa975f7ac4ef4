//! Theoretical moments, relative bias and interval probabilities of the
//! canonical estimators.
//!
//! Parkinson and bridge quantities are one-dimensional integrals of the range
//! densities (taken in the range variable `delta` rather than the estimator
//! variable `x = delta^2 / alpha`; the two are the same integral). Garman–Klass
//! and Rogers–Satchell means reduce to two-dimensional integrals of the
//! high/close and range/close joint densities. Their variances come from a
//! large fixed-seed Monte Carlo run (the "oracle").

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::densities::{bridge_range_pdf, high_close_joint_pdf, range_close_joint_pdf, range_pdf, SeriesConfig};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, GkVariant, BRIDGE_RANGE_SQ_MEAN, GK_K1, GK_K2, GK_K3, PARKINSON_NORM};
use crate::montecarlo::{run_experiment, CellSummary, ExperimentConfig, ExperimentSummary};
use crate::quadrature::{integrate, integrate_pieces, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    Quadrature,
    McOracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Series => "series",
            Method::Quadrature => "quadrature",
            Method::McOracle => "mc_oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentReport {
    pub estimator: EstimatorKind,
    pub gamma: f64,
    pub mean: f64,
    pub variance: f64,
    /// `(mean - 1) / sqrt(variance)`; `NaN` when the variance is zero.
    pub relative_bias: f64,
    /// The least exact method that contributed.
    pub method: Method,
    pub mean_se: Option<f64>,
    pub variance_se: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalReport {
    pub estimator: EstimatorKind,
    pub gamma: f64,
    pub level: f64,
    pub probability: f64,
}

/// A probability with its provenance; `se` is set for Monte Carlo values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probability {
    pub value: f64,
    pub se: Option<f64>,
    pub method: Method,
}

/// Size of the Monte Carlo run backing variances that have no tractable
/// low-dimensional integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            n_paths: 10_000_000,
            n_steps: 10_000,
            seed: 0x0DDB_A11,
        }
    }
}

/// `2 + sum_{m=1}^{terms} 2 / (m (4 m^2 - 1))`, which tends to `ln 16`.
pub fn mean_range_squared_series(terms: u64) -> Result<f64> {
    if terms == 0 {
        return Err(Error::InvalidArgument("terms must be at least 1".into()));
    }
    // Smallest terms first.
    let tail: f64 = (1..=terms)
        .rev()
        .map(|m| {
            let m = m as f64;
            2.0 / (m * (4.0 * m * m - 1.0))
        })
        .sum();
    Ok(2.0 + tail)
}

fn range_upper(gamma: f64) -> f64 {
    gamma.abs() + 12.0
}

const BRIDGE_UPPER: f64 = 6.0;

fn breakpoints(lower: f64, upper: f64, inner: &[f64]) -> Vec<f64> {
    let mut pts = vec![lower];
    pts.extend(inner.iter().copied().filter(|&p| p > lower && p < upper));
    pts.push(upper);
    pts
}

/// `E[d^k]` for the range of the drifted motion.
pub fn range_moment(k: i32, gamma: f64, cfg: &SeriesConfig, quad: QuadratureConfig) -> Result<f64> {
    let ub = range_upper(gamma);
    let pts = breakpoints(cfg.small_arg_floor, ub, &[0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 9.0]);
    let r = integrate_pieces(|d| Ok(d.powi(k) * range_pdf(d, gamma, cfg)?.value), &pts, quad)?;
    Ok(r.value)
}

/// `E[s^k]` for the bridge range.
pub fn bridge_range_moment(k: i32, cfg: &SeriesConfig, quad: QuadratureConfig) -> Result<f64> {
    let pts = breakpoints(cfg.small_arg_floor, BRIDGE_UPPER, &[0.5, 0.8, 1.2, 1.6, 2.0, 3.0]);
    let r = integrate_pieces(|d| Ok(d.powi(k) * bridge_range_pdf(d, cfg)?.value), &pts, quad)?;
    Ok(r.value)
}

/// `E[h^p c^q]` by two-dimensional quadrature of the high/close density.
pub fn high_close_moment(p: i32, q: i32, gamma: f64, quad: QuadratureConfig) -> Result<f64> {
    let ub = gamma.max(0.0) + 12.0;
    let inner_cfg = QuadratureConfig {
        abs_tol: quad.abs_tol / ub,
        ..quad
    };
    let outer = |eta: f64| -> Result<f64> {
        let reach = (2.0 * (40.0 + (2.0 * gamma * eta).max(0.0))).sqrt() + 1.0;
        let lo = (2.0 * eta + gamma - reach).min(eta - 1e-3);
        let r = integrate(
            |chi| Ok(chi.powi(q) * high_close_joint_pdf(eta, chi, gamma).value),
            lo,
            eta,
            inner_cfg,
        )?;
        Ok(eta.powi(p) * r.value)
    };
    let pts = breakpoints(0.0, ub, &[0.5, 1.0, 2.0, 3.0, 5.0, 8.0]);
    Ok(integrate_pieces(outer, &pts, quad)?.value)
}

/// `E[d^p c^q]` by two-dimensional quadrature of the range/close density.
pub fn range_close_moment(p: i32, q: i32, gamma: f64, cfg: &SeriesConfig, quad: QuadratureConfig) -> Result<f64> {
    let ub = range_upper(gamma);
    let inner_cfg = QuadratureConfig {
        abs_tol: quad.abs_tol / ub,
        ..quad
    };
    let outer = |delta: f64| -> Result<f64> {
        let r = integrate_pieces(
            |chi| Ok(chi.powi(q) * range_close_joint_pdf(delta, chi, gamma, cfg)?.value),
            &[-delta, 0.0, delta],
            inner_cfg,
        )?;
        Ok(delta.powi(p) * r.value)
    };
    let pts = breakpoints(cfg.small_arg_floor, ub, &[0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 9.0]);
    Ok(integrate_pieces(outer, &pts, quad)?.value)
}

/// Mean of the Garman–Klass estimator from one- and two-dimensional
/// integrals: `E[hl] = (E[h^2; gamma] + E[h^2; -gamma] - E[d^2]) / 2`.
pub fn garman_klass_mean(variant: GkVariant, gamma: f64, cfg: &SeriesConfig, quad: QuadratureConfig) -> Result<f64> {
    let d2 = range_moment(2, gamma, cfg, quad)?;
    let c2 = 1.0 + gamma * gamma;
    let cd = range_close_moment(1, 1, gamma, cfg, quad)?;
    let middle = match variant {
        GkVariant::Physical => {
            let h2 = high_close_moment(2, 0, gamma, quad)?;
            let l2 = high_close_moment(2, 0, -gamma, quad)?;
            let hl = 0.5 * (h2 + l2 - d2);
            cd - 2.0 * hl
        }
        GkVariant::Canonical => cd - 2.0 * high_close_moment(1, 1, gamma, quad)?,
    };
    Ok(GK_K1 * d2 - GK_K2 * middle - GK_K3 * c2)
}

/// Mean of Rogers–Satchell, using `l(gamma) = -h(-gamma)` and
/// `c(gamma) = -c(-gamma)` in law.
pub fn rogers_satchell_mean(gamma: f64, quad: QuadratureConfig) -> Result<f64> {
    let side = |g: f64| -> Result<f64> { Ok(high_close_moment(2, 0, g, quad)? - high_close_moment(1, 1, g, quad)?) };
    Ok(side(gamma)? + side(-gamma)?)
}

fn range_scale(kind: EstimatorKind) -> Result<f64> {
    match kind {
        EstimatorKind::Parkinson => Ok(PARKINSON_NORM),
        EstimatorKind::Bridge => Ok(BRIDGE_RANGE_SQ_MEAN),
        other => Err(Error::InvalidArgument(format!(
            "{other} has no one-dimensional analytic density"
        ))),
    }
}

/// `P(lo < v < hi)` for the Parkinson or bridge canonical estimator.
pub fn probability_between(
    kind: EstimatorKind,
    gamma: f64,
    lo: f64,
    hi: f64,
    cfg: &SeriesConfig,
    quad: QuadratureConfig,
) -> Result<f64> {
    let alpha = range_scale(kind)?;
    let upper = match kind {
        EstimatorKind::Bridge => BRIDGE_UPPER,
        _ => range_upper(gamma),
    };
    let a = (alpha * lo.max(0.0)).sqrt().max(cfg.small_arg_floor);
    let b = if hi.is_finite() { (alpha * hi).sqrt().min(upper) } else { upper };
    if !(b > a) {
        return Ok(0.0);
    }
    let density = |d: f64| -> Result<f64> {
        Ok(match kind {
            EstimatorKind::Bridge => bridge_range_pdf(d, cfg)?.value,
            _ => range_pdf(d, gamma, cfg)?.value,
        })
    };
    let pts = breakpoints(a, b, &[0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 9.0]);
    let r = integrate_pieces(density, &pts, quad)?;
    Ok(r.value.clamp(0.0, 1.0))
}

/// `F(N) = P(v > 1/N)` for Parkinson or bridge.
pub fn interval_probability(kind: EstimatorKind, gamma: f64, level: f64, cfg: &SeriesConfig) -> Result<f64> {
    if !(level > 0.0) {
        return Err(Error::InvalidArgument(format!("level must be positive, got {level}")));
    }
    probability_between(kind, gamma, 1.0 / level, f64::INFINITY, cfg, QuadratureConfig::default())
}

pub fn interval_report(kind: EstimatorKind, gamma: f64, level: f64, cfg: &SeriesConfig) -> Result<IntervalReport> {
    Ok(IntervalReport {
        estimator: kind,
        gamma: if kind == EstimatorKind::Bridge { 0.0 } else { gamma },
        level,
        probability: interval_probability(kind, gamma, level, cfg)?,
    })
}

/// Theory engine: analytic routes where they exist, and a cached Monte Carlo
/// oracle (one run per gamma) for the rest.
#[derive(Debug, Clone)]
pub struct Theory {
    pub series: SeriesConfig,
    pub quad: QuadratureConfig,
    pub oracle: OracleConfig,
    cache: Arc<Mutex<BTreeMap<u64, Arc<ExperimentSummary>>>>,
}

impl Default for Theory {
    fn default() -> Self {
        Self::new(SeriesConfig::default(), OracleConfig::default())
    }
}

impl Theory {
    pub fn new(series: SeriesConfig, oracle: OracleConfig) -> Self {
        Self {
            series,
            quad: QuadratureConfig::default(),
            oracle,
            cache: Arc::default(),
        }
    }

    /// Run the oracle once for a whole gamma grid (common random numbers make
    /// this much cheaper than one run per gamma).
    pub fn prime_oracle(&self, gammas: &[f64]) -> Result<()> {
        let missing: Vec<f64> = {
            let cache = self.cache.lock().expect("oracle cache poisoned");
            gammas.iter().copied().filter(|g| !cache.contains_key(&g.to_bits())).collect()
        };
        if missing.is_empty() {
            return Ok(());
        }
        let cfg = ExperimentConfig {
            n_steps: self.oracle.n_steps,
            n_paths: self.oracle.n_paths,
            gamma_grid: missing.clone(),
            seed: self.oracle.seed,
            theory: false,
            ..ExperimentConfig::default()
        };
        let summary = Arc::new(run_experiment(&cfg)?);
        let mut cache = self.cache.lock().expect("oracle cache poisoned");
        for g in missing {
            cache.insert(g.to_bits(), Arc::clone(&summary));
        }
        Ok(())
    }

    fn oracle_cell(&self, kind: EstimatorKind, gamma: f64) -> Result<CellSummary> {
        self.prime_oracle(&[gamma])?;
        let cache = self.cache.lock().expect("oracle cache poisoned");
        let summary = &cache[&gamma.to_bits()];
        summary
            .cell(kind, gamma)
            .cloned()
            .ok_or_else(|| Error::MissingSamples(kind.to_string()))
    }

    pub fn mean(&self, kind: EstimatorKind, gamma: f64) -> Result<f64> {
        match kind {
            EstimatorKind::Parkinson => Ok(range_moment(2, gamma, &self.series, self.quad)? / PARKINSON_NORM),
            EstimatorKind::Bridge => Ok(bridge_range_moment(2, &self.series, self.quad)? / BRIDGE_RANGE_SQ_MEAN),
            EstimatorKind::GarmanKlass(v) => garman_klass_mean(v, gamma, &self.series, self.quad),
            EstimatorKind::RogersSatchell => rogers_satchell_mean(gamma, self.quad),
        }
    }

    pub fn moments(&self, kind: EstimatorKind, gamma: f64) -> Result<MomentReport> {
        let (mean, variance, method, mean_se, variance_se) = match kind {
            EstimatorKind::Parkinson | EstimatorKind::Bridge => {
                let alpha = range_scale(kind)?;
                let (m2, m4) = if kind == EstimatorKind::Bridge {
                    (
                        bridge_range_moment(2, &self.series, self.quad)?,
                        bridge_range_moment(4, &self.series, self.quad)?,
                    )
                } else {
                    (
                        range_moment(2, gamma, &self.series, self.quad)?,
                        range_moment(4, gamma, &self.series, self.quad)?,
                    )
                };
                let mean = m2 / alpha;
                (mean, m4 / (alpha * alpha) - mean * mean, Method::Quadrature, None, None)
            }
            _ => {
                let mean = self.mean(kind, gamma)?;
                let cell = self.oracle_cell(kind, gamma)?;
                (mean, cell.variance, Method::McOracle, None, Some(cell.variance_se))
            }
        };
        let relative_bias = if variance > 0.0 {
            (mean - 1.0) / variance.sqrt()
        } else {
            f64::NAN
        };
        Ok(MomentReport {
            estimator: kind,
            gamma: if kind == EstimatorKind::Bridge { 0.0 } else { gamma },
            mean,
            variance,
            relative_bias,
            method,
            mean_se,
            variance_se,
        })
    }

    pub fn relative_bias(&self, kind: EstimatorKind, gamma: f64) -> Result<f64> {
        let r = self.moments(kind, gamma)?;
        if !(r.variance > 0.0) {
            return Err(Error::DegenerateVariance(r.variance));
        }
        Ok(r.relative_bias)
    }

    /// `P(1/2 < v < 2)`: quadrature for Parkinson and bridge, oracle
    /// frequency for the others.
    pub fn coverage_probability(&self, kind: EstimatorKind, gamma: f64) -> Result<Probability> {
        match kind {
            EstimatorKind::Parkinson | EstimatorKind::Bridge => Ok(Probability {
                value: probability_between(kind, gamma, 0.5, 2.0, &self.series, self.quad)?,
                se: None,
                method: Method::Quadrature,
            }),
            _ => {
                let cell = self.oracle_cell(kind, gamma)?;
                Ok(Probability {
                    value: cell.p_delta,
                    se: Some(cell.p_delta_se),
                    method: Method::McOracle,
                })
            }
        }
    }
}

/// Theoretical mean and variance of a canonical estimator at drift `gamma`.
pub fn theoretical_moments(kind: EstimatorKind, gamma: f64, theory: &Theory) -> Result<MomentReport> {
    theory.moments(kind, gamma)
}

/// `(mean - 1) / sqrt(variance)`.
pub fn relative_bias(kind: EstimatorKind, gamma: f64, theory: &Theory) -> Result<f64> {
    theory.relative_bias(kind, gamma)
}

/// `P_Delta = P(1/2 < v < 2)`.
pub fn coverage_probability(kind: EstimatorKind, gamma: f64, theory: &Theory) -> Result<Probability> {
    theory.coverage_probability(kind, gamma)
}
