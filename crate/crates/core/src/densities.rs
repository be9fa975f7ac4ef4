//! Closed-form and theta-type series densities for the extremes of canonical
//! Brownian motion `x(tau) = gamma tau + B(tau)` on `[0, 1]` and of its
//! bridge `z(tau) = B(tau) - tau B(1)`.
//!
//! Two-sided series over `m` are summed in symmetric shells `{m, -m}`,
//! outward from `m = 1`, until `min_terms` consecutive shells each contribute
//! less than `abs_tol` in absolute value. Below `small_arg_floor` the series
//! converge slowly while the true density is vanishingly small, so those
//! arguments evaluate to 0 with `converged = false`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{BRIDGE_RANGE_SQ_MEAN, PARKINSON_NORM};
use crate::special::{erfc, scaled_erf_diff, INV_SQRT_2PI, SQRT_2, SQRT_2_OVER_PI, SQRT_8_OVER_PI};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig {
    pub abs_tol: f64,
    pub min_terms: usize,
    pub max_terms: usize,
    pub small_arg_floor: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            min_terms: 5,
            max_terms: 1_000_000,
            small_arg_floor: 0.02,
        }
    }
}

impl SeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("abs_tol must be positive, got {}", self.abs_tol)));
        }
        if self.min_terms == 0 || self.min_terms > self.max_terms {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= min_terms <= max_terms, got {} and {}",
                self.min_terms, self.max_terms
            )));
        }
        if !(self.small_arg_floor > 0.0) {
            return Err(Error::InvalidArgument("small_arg_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityValue {
    pub value: f64,
    pub terms_used: usize,
    pub converged: bool,
    /// Round-off below zero was reset to 0.
    pub clamped: bool,
}

/// Negative series round-off up to this magnitude is clamped to zero.
const CLAMP_LIMIT: f64 = 1e-10;

impl DensityValue {
    fn exact(value: f64) -> Self {
        Self {
            value,
            terms_used: 1,
            converged: true,
            clamped: false,
        }
    }

    fn zero() -> Self {
        Self::exact(0.0)
    }

    fn below_floor() -> Self {
        Self {
            value: 0.0,
            terms_used: 0,
            converged: false,
            clamped: false,
        }
    }

    fn from_series(value: f64, terms_used: usize) -> Self {
        let clamped = value < 0.0 && value >= -CLAMP_LIMIT;
        Self {
            value: if clamped { 0.0 } else { value },
            terms_used,
            converged: true,
            clamped,
        }
    }

    fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            ..self
        }
    }
}

/// Sum `shell(k)` for `k = 1, 2, ...`; each shell returns its contribution
/// and the absolute size used for the stopping rule.
fn sum_shells<S, C>(cfg: &SeriesConfig, mut shell: S, context: C) -> Result<(f64, usize)>
where
    S: FnMut(f64) -> (f64, f64),
    C: FnOnce() -> String,
{
    let mut total = 0.0;
    let mut quiet = 0;
    for k in 1..=cfg.max_terms {
        let (value, size) = shell(k as f64);
        total += value;
        if size < cfg.abs_tol {
            quiet += 1;
            if quiet >= cfg.min_terms {
                return Ok((total, k));
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NonConvergence {
        terms: cfg.max_terms,
        context: context(),
    })
}

fn two_sided<T, C>(cfg: &SeriesConfig, term: T, context: C) -> Result<(f64, usize)>
where
    T: Fn(f64) -> f64,
    C: FnOnce() -> String,
{
    sum_shells(
        cfg,
        |k| {
            let (p, n) = (term(k), term(-k));
            (p + n, p.abs() + n.abs())
        },
        context,
    )
}

/// Which argument to use in the `erfc` of the drifted maximum density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErfcArgument {
    /// `erfc((eta + gamma) / 2)`. Does not normalize.
    Printed,
    /// `erfc((eta + gamma) / sqrt 2)`, the reflection-principle result.
    Corrected,
}

/// `exp(scale) * erfc(x)` without overflow when `erfc(x)` is tiny.
fn exp_times_erfc(scale: f64, x: f64) -> f64 {
    let e = erfc(x);
    if e == 0.0 {
        0.0
    } else if x > 0.0 {
        (scale + e.ln()).exp()
    } else {
        scale.exp() * e
    }
}

/// Density of the close `c = x(1, gamma)`, a unit normal centred at gamma.
pub fn close_pdf(chi: f64, gamma: f64) -> f64 {
    let u = chi - gamma;
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// Joint density of the high `h` and close `c`:
/// `sqrt(2/pi) (2 eta - chi) exp(2 gamma eta - (2 eta - chi + gamma)^2 / 2)`
/// on `eta > 0, chi < eta`.
pub fn high_close_joint_pdf(eta: f64, chi: f64, gamma: f64) -> DensityValue {
    if !(eta > 0.0 && chi < eta) {
        return DensityValue::zero();
    }
    let u = 2.0 * eta - chi;
    let w = u + gamma;
    DensityValue::exact(SQRT_2_OVER_PI * u * (2.0 * gamma * eta - 0.5 * w * w).exp())
}

/// Density of the high `h` (reflection-principle form).
pub fn high_pdf(eta: f64, gamma: f64) -> DensityValue {
    DensityValue::exact(high_pdf_with(eta, gamma, ErfcArgument::Corrected))
}

/// Density of the high with a selectable `erfc` argument. The printed form
/// is kept for validation and goes negative for `gamma > 0`.
pub fn high_pdf_with(eta: f64, gamma: f64, arg: ErfcArgument) -> f64 {
    if !(eta > 0.0) {
        return 0.0;
    }
    let u = eta - gamma;
    let x = match arg {
        ErfcArgument::Printed => (eta + gamma) / 2.0,
        ErfcArgument::Corrected => (eta + gamma) / SQRT_2,
    };
    let tail = if gamma == 0.0 { 0.0 } else { gamma * exp_times_erfc(2.0 * gamma * eta, x) };
    SQRT_2_OVER_PI * (-0.5 * u * u).exp() - tail
}

/// Joint density of high, low and close, `f(chi; gamma) * 4 S(eta, ell | chi)`
/// with `S = sum_m m [m F(m d, chi) + (1 - m) F(m d + ell, chi)]`,
/// `F(u, chi) = ((chi - 2u)^2 - 1) exp(2u (chi - u))` and `d = eta - ell`.
///
/// Support: `ell < min(chi, 0)`, `eta > max(chi, 0)`.
pub fn hlc_joint_pdf(eta: f64, ell: f64, chi: f64, gamma: f64, cfg: &SeriesConfig) -> Result<DensityValue> {
    if !(ell < chi.min(0.0) && eta > chi.max(0.0)) {
        return Ok(DensityValue::zero());
    }
    let d = eta - ell;
    if d < cfg.small_arg_floor {
        return Ok(DensityValue::below_floor());
    }
    let f = |u: f64| {
        let v = chi - 2.0 * u;
        (v * v - 1.0) * (2.0 * u * (chi - u)).exp()
    };
    let term = |m: f64| m * (m * f(m * d) + (1.0 - m) * f(m * d + ell));
    let (s, terms) = two_sided(cfg, term, || format!("hlc_joint_pdf(eta={eta}, ell={ell}, chi={chi})"))?;
    Ok(DensityValue::from_series(4.0 * s, terms).scaled(close_pdf(chi, gamma)))
}

/// Joint density of the range `d = h - l` and the close `c`.
/// Support: `delta > |chi|`.
pub fn range_close_joint_pdf(delta: f64, chi: f64, gamma: f64, cfg: &SeriesConfig) -> Result<DensityValue> {
    let a = chi.abs();
    if !(delta > a) {
        return Ok(DensityValue::zero());
    }
    if delta < cfg.small_arg_floor {
        return Ok(DensityValue::below_floor());
    }
    let span = delta - a;
    let term = |m: f64| {
        let w = a + 2.0 * m * delta;
        m * (m * span * (w * w - 1.0) - (m + 1.0) * w) * (-2.0 * m * delta * (a + m * delta)).exp()
    };
    let (s, terms) = two_sided(cfg, term, || format!("range_close_joint_pdf(delta={delta}, chi={chi})"))?;
    Ok(DensityValue::from_series(4.0 * s, terms).scaled(close_pdf(chi, gamma)))
}

/// Density of the range `d = h - l`. Zero drift dispatches to the shorter
/// alternating series.
pub fn range_pdf(delta: f64, gamma: f64, cfg: &SeriesConfig) -> Result<DensityValue> {
    if gamma == 0.0 {
        range_pdf_zero_drift(delta, cfg)
    } else {
        range_pdf_general(delta, gamma, cfg)
    }
}

/// `sqrt(8/pi) sum_m [(2m-1)^2 exp(-(2m-1)^2 delta^2 / 2) - 4 m^2 exp(-2 m^2 delta^2)]`
pub fn range_pdf_zero_drift(delta: f64, cfg: &SeriesConfig) -> Result<DensityValue> {
    if !(delta > 0.0) {
        return Ok(DensityValue::zero());
    }
    if delta < cfg.small_arg_floor {
        return Ok(DensityValue::below_floor());
    }
    let d2 = delta * delta;
    let term = |m: f64| {
        let odd = 2.0 * m - 1.0;
        odd * odd * (-0.5 * odd * odd * d2).exp() - 4.0 * m * m * (-2.0 * m * m * d2).exp()
    };
    let centre = term(0.0);
    let (s, terms) = two_sided(cfg, term, || format!("range_pdf_zero_drift(delta={delta})"))?;
    Ok(DensityValue::from_series(SQRT_8_OVER_PI * (centre + s), terms))
}

/// The drifted range density, valid for any gamma (including 0).
pub fn range_pdf_general(delta: f64, gamma: f64, cfg: &SeriesConfig) -> Result<DensityValue> {
    if !(delta > 0.0) {
        return Ok(DensityValue::zero());
    }
    if delta < cfg.small_arg_floor {
        return Ok(DensityValue::below_floor());
    }
    let d2 = delta * delta;
    let g2 = gamma * gamma;
    // a(delta, g, m) = e^{2 m delta g} [1 + m (3 + g (delta + 2 m delta + g))]
    //                  * [erf((2 m delta + g)/sqrt 2) - erf((delta + 2 m delta + g)/sqrt 2)]
    let aux = |g: f64, m: f64| {
        let poly = 1.0 + m * (3.0 + g * (delta + 2.0 * m * delta + g));
        if poly == 0.0 {
            return 0.0;
        }
        let lo = (2.0 * m * delta + g) / SQRT_2;
        let hi = (delta + 2.0 * m * delta + g) / SQRT_2;
        -poly * scaled_erf_diff(2.0 * m * delta * g, lo, hi)
    };
    let term = |m: f64| {
        let p = 1.0 + 2.0 * m;
        let base = p * p * d2 + g2;
        let gauss = 2.0 * (-2.0 * m * m * d2 - 0.5 * g2).exp() * (2.0 * m * m * d2 - 1.0 - m * (2.0 + g2))
            + ((-0.5 * (base + 2.0 * delta * gamma)).exp() + (-0.5 * (base - 2.0 * delta * gamma)).exp())
                * (1.0 + m * (2.0 + g2));
        m * (SQRT_8_OVER_PI * gauss - 2.0 * gamma * (aux(gamma, m) - aux(-gamma, m)))
    };
    let (s, terms) = two_sided(cfg, term, || format!("range_pdf_general(delta={delta}, gamma={gamma})"))?;
    Ok(DensityValue::from_series(s, terms))
}

/// Joint density of the bridge high `xi` and low `zeta`:
/// `sum_m m [m F(m d) + (1 - m) F(m d + ell)]`, `F(u) = 4 (4u^2 - 1) exp(-2u^2)`.
pub fn bridge_hl_joint_pdf(eta: f64, ell: f64, cfg: &SeriesConfig) -> Result<DensityValue> {
    if !(eta > 0.0 && ell < 0.0) {
        return Ok(DensityValue::zero());
    }
    let d = eta - ell;
    if d < cfg.small_arg_floor {
        return Ok(DensityValue::below_floor());
    }
    let f = |u: f64| 4.0 * (4.0 * u * u - 1.0) * (-2.0 * u * u).exp();
    let term = |m: f64| m * (m * f(m * d) + (1.0 - m) * f(m * d + ell));
    let (s, terms) = two_sided(cfg, term, || format!("bridge_hl_joint_pdf(eta={eta}, ell={ell})"))?;
    Ok(DensityValue::from_series(s, terms))
}

/// Density of the bridge range `s = xi - zeta`:
/// `8 delta sum_{m>=1} m^2 (4 m^2 delta^2 - 3) exp(-2 m^2 delta^2)`.
pub fn bridge_range_pdf(delta: f64, cfg: &SeriesConfig) -> Result<DensityValue> {
    if !(delta > 0.0) {
        return Ok(DensityValue::zero());
    }
    if delta < cfg.small_arg_floor {
        return Ok(DensityValue::below_floor());
    }
    let d2 = delta * delta;
    let (s, terms) = sum_shells(
        cfg,
        |m| {
            let t = m * m * (4.0 * m * m * d2 - 3.0) * (-2.0 * m * m * d2).exp();
            (t, (8.0 * delta * t).abs())
        },
        || format!("bridge_range_pdf(delta={delta})"),
    )?;
    Ok(DensityValue::from_series(8.0 * delta * s, terms))
}

/// Density of the canonical Parkinson estimator `d^2 / ln 16`.
pub fn parkinson_estimator_pdf(x: f64, gamma: f64, cfg: &SeriesConfig) -> Result<DensityValue> {
    if !(x > 0.0) {
        return Ok(DensityValue::zero());
    }
    let alpha = PARKINSON_NORM;
    Ok(range_pdf((alpha * x).sqrt(), gamma, cfg)?.scaled((alpha / (4.0 * x)).sqrt()))
}

/// Density of the canonical bridge estimator `6 s^2 / pi^2`.
pub fn bridge_estimator_pdf(x: f64, cfg: &SeriesConfig) -> Result<DensityValue> {
    if !(x > 0.0) {
        return Ok(DensityValue::zero());
    }
    let alpha = BRIDGE_RANGE_SQ_MEAN;
    Ok(bridge_range_pdf((alpha * x).sqrt(), cfg)?.scaled((alpha / (4.0 * x)).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SeriesConfig {
        SeriesConfig::default()
    }

    #[test]
    fn close_pdf_peak() {
        assert!((close_pdf(0.0, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-16);
        assert_eq!(close_pdf(1.3, 1.3), close_pdf(0.0, 0.0));
    }

    #[test]
    fn supports() {
        assert_eq!(high_close_joint_pdf(0.5, 0.6, 0.3).value, 0.0);
        assert_eq!(high_pdf(-0.5, 0.0).value, 0.0);
        assert_eq!(hlc_joint_pdf(0.2, 0.1, 0.15, 0.0, &cfg()).unwrap().value, 0.0);
        assert_eq!(range_close_joint_pdf(0.5, 0.7, 0.0, &cfg()).unwrap().value, 0.0);
        assert_eq!(bridge_hl_joint_pdf(-0.1, -0.5, &cfg()).unwrap().value, 0.0);
        assert_eq!(range_pdf(-1.0, 0.5, &cfg()).unwrap().value, 0.0);
        assert_eq!(bridge_range_pdf(0.0, &cfg()).unwrap().value, 0.0);
        assert_eq!(parkinson_estimator_pdf(-1.0, 0.0, &cfg()).unwrap().value, 0.0);
        assert_eq!(bridge_estimator_pdf(0.0, &cfg()).unwrap().value, 0.0);
    }

    #[test]
    fn high_pdf_zero_drift_is_half_normal() {
        let want = SQRT_2_OVER_PI * (-0.5f64).exp();
        assert!((high_pdf(1.0, 0.0).value - want).abs() < 1e-16);
        assert!((want - 0.483_941).abs() < 1e-6);
        assert_eq!(high_pdf_with(1.0, 0.0, ErfcArgument::Printed), want);
    }

    #[test]
    fn printed_erfc_argument_goes_negative() {
        assert!(high_pdf_with(1.0, 1.0, ErfcArgument::Printed) < 0.0);
        assert!(high_pdf_with(1.0, 1.0, ErfcArgument::Corrected) > 0.0);
    }

    #[test]
    fn below_floor_is_flagged() {
        let v = range_pdf(0.01, 0.0, &cfg()).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(!v.converged);
        let v = bridge_range_pdf(0.01, &cfg()).unwrap();
        assert!(!v.converged);
        let v = parkinson_estimator_pdf(1e-5, 0.0, &cfg()).unwrap();
        assert!(!v.converged);
    }

    #[test]
    fn non_convergence_is_reported() {
        let tight = SeriesConfig {
            max_terms: 2,
            ..cfg()
        };
        assert!(matches!(range_pdf(0.1, 0.0, &tight), Err(Error::NonConvergence { .. })));
        assert!(matches!(bridge_range_pdf(0.1, &tight), Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(SeriesConfig { abs_tol: 0.0, ..cfg() }.validate().is_err());
        assert!(SeriesConfig { min_terms: 10, max_terms: 5, ..cfg() }.validate().is_err());
    }

    #[test]
    fn zero_drift_symmetry_in_close() {
        for &(d, c) in &[(1.5, 0.3), (0.8, 0.79), (3.0, 2.0)] {
            let a = range_close_joint_pdf(d, c, 0.0, &cfg()).unwrap().value;
            let b = range_close_joint_pdf(d, -c, 0.0, &cfg()).unwrap().value;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn general_range_pdf_matches_high_precision_values() {
        // 40-digit evaluations of the same series.
        let cases = [
            (0.5, 2.0, 9.394_697_605_658_826e-7),
            (0.5, 1.0, 4.048_665_607_418_993e-6),
            (1.0, 2.0, 0.091_378_706_752_777_82),
        ];
        for (d, g, want) in cases {
            let got = range_pdf_general(d, g, &cfg()).unwrap().value;
            assert!((got - want).abs() < 1e-12, "delta={d} gamma={g}: {got} vs {want}");
        }
    }

    #[test]
    fn shells_decay_beyond_two_over_delta() {
        for &d in &[0.5, 1.0, 2.0, 4.0] {
            let start = (2.0 / d as f64).ceil();
            let shell = |k: f64| {
                let t = |m: f64| {
                    let odd = 2.0 * m - 1.0;
                    odd * odd * (-0.5 * odd * odd * d * d).exp() - 4.0 * m * m * (-2.0 * m * m * d * d).exp()
                };
                t(k).abs() + t(-k).abs()
            };
            let mut k = start;
            while shell(k) > 1e-300 {
                assert!(shell(k + 1.0) < shell(k), "delta={d} k={k}");
                k += 1.0;
            }
        }
    }
}
