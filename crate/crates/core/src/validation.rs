//! Checks that decide between competing readings of several density and
//! estimator formulas, each against an integral identity or a simulation.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::{bridge_range_moment, garman_klass_mean, high_close_moment};
use crate::densities::{high_close_joint_pdf, high_pdf_with, hlc_joint_pdf, close_pdf, ErfcArgument, SeriesConfig};
use crate::error::Result;
use crate::estimators::{garman_klass_value, GkVariant};
use crate::paths::{accumulate_walk, drift_point, Extremes, NoiseStream};
use crate::quadrature::{integrate, integrate_pieces, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    pub mc_paths: usize,
    pub mc_steps: usize,
    pub seed: u64,
    /// Allowance for grid extremes sitting inside continuous extremes.
    pub discretization_allowance: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            mc_paths: 20_000,
            mc_steps: 5_000,
            seed: 0xA11CE,
            discretization_allowance: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub check: &'static str,
    pub form: &'static str,
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub matches: bool,
}

impl ValidationRow {
    fn new(check: &'static str, form: &'static str, quantity: String, value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            check,
            form,
            quantity,
            value,
            reference,
            tolerance,
            matches: (value - reference).abs() <= tolerance,
        }
    }
}

struct Sample {
    extremes: Extremes,
    midpoint: f64,
}

fn simulate(cfg: &ValidationConfig, gamma: f64) -> Vec<Sample> {
    (0..cfg.mc_paths)
        .into_par_iter()
        .map_init(
            || (vec![0.0; cfg.mc_steps], Vec::with_capacity(cfg.mc_steps + 1)),
            |(eps, walk), i| {
                NoiseStream::new(cfg.seed, i as u64).fill(eps);
                accumulate_walk(eps, walk);
                let n = cfg.mc_steps as f64;
                let values: Vec<f64> = walk.iter().enumerate().map(|(k, &w)| drift_point(gamma, k, n, w)).collect();
                Sample {
                    extremes: Extremes::of_values(&values),
                    midpoint: values[cfg.mc_steps / 2],
                }
            },
        )
        .collect()
}

fn frequency(samples: &[Sample], pred: impl Fn(&Sample) -> bool) -> (f64, f64) {
    let n = samples.len() as f64;
    let p = samples.iter().filter(|s| pred(s)).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Evaluate every check and return one row per (check, form, quantity).
pub fn formula_report(cfg: &ValidationConfig) -> Result<Vec<ValidationRow>> {
    let series = SeriesConfig::default();
    let quad = QuadratureConfig::default();
    let mut rows = Vec::new();
    let gamma = 1.0;
    let samples = simulate(cfg, gamma);

    // Drifted maximum: printed erfc((eta + gamma)/2) against (eta + gamma)/sqrt 2.
    let (p_emp, p_se) = frequency(&samples, |s| s.extremes.high <= 1.0);
    for (form, arg) in [("printed (eta+gamma)/2", ErfcArgument::Printed), ("corrected (eta+gamma)/sqrt2", ErfcArgument::Corrected)] {
        let density = |eta: f64| Ok(high_pdf_with(eta, gamma, arg));
        let total = integrate_pieces(density, &[0.0, 1.0, 3.0, 14.0], quad)?.value;
        rows.push(ValidationRow::new("high_pdf_erfc_argument", form, "integral over eta>0 (gamma=1)".into(), total, 1.0, 1e-6));
        let cdf = integrate(density, 0.0, 1.0, quad)?.value;
        rows.push(ValidationRow::new(
            "high_pdf_erfc_argument",
            form,
            "P(h<=1), gamma=1, vs simulation".into(),
            cdf,
            p_emp,
            3.0 * p_se + cfg.discretization_allowance,
        ));
    }

    // High/close joint density with the bare `x` read as chi.
    let total = high_close_moment(0, 0, gamma, quad)?;
    rows.push(ValidationRow::new("high_close_exponent", "x read as chi", "double integral (gamma=1)".into(), total, 1.0, 1e-6));
    let joint = integrate(
        |eta| Ok(integrate(|chi| Ok(high_close_joint_pdf(eta, chi, gamma).value), eta - 14.0, eta.min(0.5), quad)?.value),
        0.0,
        1.0,
        quad,
    )?
    .value;
    let (p_emp, p_se) = frequency(&samples, |s| s.extremes.high <= 1.0 && s.extremes.close <= 0.5);
    rows.push(ValidationRow::new(
        "high_close_exponent",
        "x read as chi",
        "P(h<=1, c<=0.5), gamma=1, vs simulation".into(),
        joint,
        p_emp,
        3.0 * p_se + cfg.discretization_allowance,
    ));

    // High/low/close joint density: prefactor of the S-series.
    let chi = 0.3;
    let conditional = integrate(
        |eta| {
            Ok(integrate_pieces(
                |ell| Ok(hlc_joint_pdf(eta, ell, chi, 0.0, &series)?.value),
                &[-8.0, -1.0, chi.min(0.0)],
                QuadratureConfig::with_tol(1e-11),
            )?
            .value)
        },
        chi,
        8.0,
        QuadratureConfig::with_tol(1e-9),
    )?
    .value
        / close_pdf(chi, 0.0);
    rows.push(ValidationRow::new(
        "hlc_joint_prefactor",
        "printed S (no factor 4)",
        "integral over (eta, ell) at chi=0.3, divided by f(chi)".into(),
        conditional / 4.0,
        1.0,
        1e-6,
    ));
    rows.push(ValidationRow::new(
        "hlc_joint_prefactor",
        "4 S (matches the bridge and range/close forms)",
        "integral over (eta, ell) at chi=0.3, divided by f(chi)".into(),
        conditional,
        1.0,
        1e-6,
    ));

    // Garman–Klass middle term variants, against simulated means.
    for (form, variant) in [("C(H-L) - 2HL", GkVariant::Physical), ("cd - 2hc", GkVariant::Canonical)] {
        let analytic = garman_klass_mean(variant, gamma, &series, quad)?;
        let n = samples.len() as f64;
        let vals: Vec<f64> = samples.iter().map(|s| garman_klass_value(&s.extremes, variant)).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        rows.push(ValidationRow::new(
            "garman_klass_middle_term",
            form,
            "mean at gamma=1, quadrature vs simulation".into(),
            analytic,
            mean,
            3.0 * se + 0.03 * analytic.abs(),
        ));
    }

    // Fourth moment of the bridge range: upper limit 2 or infinity.
    let exact = std::f64::consts::PI.powi(4) / 30.0;
    let to_two = integrate(
        |d| Ok(d.powi(4) * crate::densities::bridge_range_pdf(d, &series)?.value),
        series.small_arg_floor,
        2.0,
        quad,
    )?
    .value;
    rows.push(ValidationRow::new("bridge_fourth_moment_limit", "upper limit 2", "E[s^4]".into(), to_two, exact, 1e-8));
    let full = bridge_range_moment(4, &series, quad)?;
    rows.push(ValidationRow::new("bridge_fourth_moment_limit", "upper limit infinity", "E[s^4]".into(), full, exact, 1e-8));

    // Discrete walk: partial sums make x_{N/2} - gamma/2 have variance 1/2.
    let n = samples.len() as f64;
    let mids: Vec<f64> = samples.iter().map(|s| s.midpoint - gamma * 0.5).collect();
    let m = mids.iter().sum::<f64>() / n;
    let var = mids.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    rows.push(ValidationRow::new(
        "walk_partial_sum",
        "x_n uses eps_1..eps_n",
        "Var[x_(N/2)]".into(),
        var,
        0.5,
        3.0 * 0.5 * (2.0 / n).sqrt(),
    ));
    Ok(rows)
}
