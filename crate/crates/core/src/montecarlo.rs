//! Monte Carlo comparison of the canonical estimators across a drift grid.
//!
//! Every path index draws its increments from its own noise stream, and the
//! same increments feed every estimator and every gamma (common random
//! numbers). Paths are processed in fixed batches whose statistics are merged
//! in batch order, so results do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::analytics::{probability_between, OracleConfig, Theory};
use crate::densities::{bridge_estimator_pdf, parkinson_estimator_pdf, SeriesConfig};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::paths::{accumulate_walk, drift_point, BridgeExtremes, Extremes, NoiseStream};
use crate::quadrature::QuadratureConfig;

const BATCH: usize = 1024;
const WAVE: usize = 64;

/// Source of path increments.
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    /// Standard normals from the per-path stream of `seed`.
    Gaussian,
    /// Fixed increments, one vector of length `n_steps` per path.
    Fixed(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_steps: usize,
    pub n_paths: usize,
    pub gamma_grid: Vec<f64>,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub histogram_bins: usize,
    pub histogram_max: f64,
    /// Attach analytic overlays (means, variances, P_Delta) where available.
    pub theory: bool,
    /// Series truncation used by the overlays.
    pub series: SeriesConfig,
    /// Upper bound on `n_paths * n_steps`.
    pub max_path_steps: u128,
    pub noise: Noise,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_steps: 5_000,
            n_paths: 100_000,
            gamma_grid: default_gamma_grid(),
            seed: 20_240_601,
            estimators: EstimatorKind::ALL.to_vec(),
            histogram_bins: 200,
            histogram_max: 6.0,
            theory: true,
            series: SeriesConfig::default(),
            max_path_steps: 1_000_000_000_000,
            noise: Noise::Gaussian,
        }
    }
}

/// `0, 0.25, ..., 2.0`
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=8).map(|i| i as f64 * 0.25).collect()
}

impl ExperimentConfig {
    /// `N = 5000`, `M = 500000`.
    pub fn full_scale() -> Self {
        Self {
            n_paths: 500_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.series.validate()?;
        if self.n_steps < 1 {
            return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
        }
        if self.n_paths < 2 {
            return Err(Error::InvalidArgument("n_paths must be at least 2".into()));
        }
        if self.histogram_bins < 1 || !(self.histogram_max > 0.0) {
            return Err(Error::InvalidArgument("histogram needs at least one bin and a positive range".into()));
        }
        if self.gamma_grid.is_empty() || self.gamma_grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidArgument("gamma grid must be non-empty and finite".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("no estimators selected".into()));
        }
        let requested = self.n_paths as u128 * self.n_steps as u128;
        if requested > self.max_path_steps {
            return Err(Error::ResourceLimit {
                requested,
                cap: self.max_path_steps,
            });
        }
        if let Noise::Fixed(rows) = &self.noise {
            if rows.len() < self.n_paths || rows.iter().any(|r| r.len() != self.n_steps) {
                return Err(Error::InvalidArgument(format!(
                    "fixed noise needs {} rows of {} increments",
                    self.n_paths, self.n_steps
                )));
            }
        }
        Ok(())
    }
}

/// One-pass central moments up to order four, mergeable in any fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let t1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        let d2 = d * d;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3 + other.m3 + d2 * d * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * other.m3 - nb * self.m3) / n;
        self.n += other.n;
        self.mean += d * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn mean_se(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }

    /// Large-sample standard error of the sample variance.
    pub fn variance_se(&self) -> f64 {
        if self.n < 4 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let s2 = self.variance();
        let mu4 = self.m4 / n;
        ((mu4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub max: f64,
    pub counts: Vec<u64>,
    /// Samples below 0.
    pub underflow: u64,
    /// Samples at or above `max`.
    pub overflow: u64,
}

impl Histogram {
    fn new(bins: usize, max: f64) -> Self {
        Self {
            max,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.max / self.counts.len() as f64
    }

    fn push(&mut self, x: f64) {
        if x < 0.0 {
            self.underflow += 1;
        } else if x >= self.max {
            self.overflow += 1;
        } else {
            let i = ((x / self.bin_width()) as usize).min(self.counts.len() - 1);
            self.counts[i] += 1;
        }
    }

    fn merge(&mut self, other: &Histogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.underflow += other.underflow;
        self.overflow += other.overflow;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TheoryOverlay {
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub p_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub estimator: EstimatorKind,
    pub gamma: f64,
    pub n: u64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub p_delta: f64,
    pub p_delta_se: f64,
    pub negative_count: u64,
    pub histogram: Histogram,
    pub theory: TheoryOverlay,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub gammas: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    /// Ordered by gamma, then estimator.
    pub cells: Vec<CellSummary>,
}

impl ExperimentSummary {
    pub fn cell(&self, estimator: EstimatorKind, gamma: f64) -> Option<&CellSummary> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.gamma.to_bits() == gamma.to_bits())
    }
}

#[derive(Debug, Clone)]
struct CellAcc {
    moments: Moments,
    inside: u64,
    negative: u64,
    histogram: Histogram,
}

impl CellAcc {
    fn push(&mut self, v: f64) {
        self.moments.push(v);
        if v > 0.5 && v < 2.0 {
            self.inside += 1;
        }
        if v < 0.0 {
            self.negative += 1;
        }
        self.histogram.push(v);
    }

    fn merge(&mut self, other: &CellAcc) {
        self.moments.merge(&other.moments);
        self.inside += other.inside;
        self.negative += other.negative;
        self.histogram.merge(&other.histogram);
    }
}

/// Per-path scratch space and estimator evaluation shared by the experiment
/// runner and the sample dump.
struct PathEngine<'a> {
    cfg: &'a ExperimentConfig,
    eps: Vec<f64>,
    walk: Vec<f64>,
}

impl<'a> PathEngine<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            cfg,
            eps: vec![0.0; cfg.n_steps],
            walk: Vec::with_capacity(cfg.n_steps + 1),
        }
    }

    /// Calls `sink(gamma_index, estimator_index, value)` for one path.
    fn run_path(&mut self, index: usize, mut sink: impl FnMut(usize, usize, f64)) {
        match &self.cfg.noise {
            Noise::Gaussian => NoiseStream::new(self.cfg.seed, index as u64).fill(&mut self.eps),
            Noise::Fixed(rows) => self.eps.copy_from_slice(&rows[index]),
        }
        accumulate_walk(&self.eps, &mut self.walk);
        // The bridge of gamma*tau + B(tau) is the bridge of B(tau).
        let bridge = BridgeExtremes::of_values(&self.walk);
        let n_steps = self.cfg.n_steps as f64;
        for (gi, &gamma) in self.cfg.gamma_grid.iter().enumerate() {
            let (mut lo, mut hi) = (0.0f64, 0.0f64);
            for (n, &w) in self.walk.iter().enumerate() {
                let x = drift_point(gamma, n, n_steps, w);
                lo = lo.min(x);
                hi = hi.max(x);
            }
            let close = drift_point(gamma, self.cfg.n_steps, n_steps, self.walk[self.cfg.n_steps]);
            let e = Extremes { high: hi, low: lo, close };
            for (ei, kind) in self.cfg.estimators.iter().enumerate() {
                sink(gi, ei, kind.canonical_value(&e, &bridge));
            }
        }
    }
}

fn run_batch(cfg: &ExperimentConfig, start: usize, end: usize) -> Vec<CellAcc> {
    let n_est = cfg.estimators.len();
    let mut cells = vec![
        CellAcc {
            moments: Moments::default(),
            inside: 0,
            negative: 0,
            histogram: Histogram::new(cfg.histogram_bins, cfg.histogram_max),
        };
        cfg.gamma_grid.len() * n_est
    ];
    let mut engine = PathEngine::new(cfg);
    for index in start..end {
        engine.run_path(index, |gi, ei, v| cells[gi * n_est + ei].push(v));
    }
    cells
}

/// Simulate `n_paths` paths and summarize every (estimator, gamma) cell.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;
    let n_batches = cfg.n_paths.div_ceil(BATCH);
    let mut total: Option<Vec<CellAcc>> = None;
    for wave_start in (0..n_batches).step_by(WAVE) {
        let wave_end = (wave_start + WAVE).min(n_batches);
        let parts: Vec<Vec<CellAcc>> = (wave_start..wave_end)
            .into_par_iter()
            .map(|b| run_batch(cfg, b * BATCH, ((b + 1) * BATCH).min(cfg.n_paths)))
            .collect();
        for part in parts {
            match total.as_mut() {
                None => total = Some(part),
                Some(acc) => acc.iter_mut().zip(&part).for_each(|(a, p)| a.merge(p)),
            }
        }
    }
    let total = total.expect("at least one batch");

    let theory = Theory::new(cfg.series, OracleConfig::default());
    let n_est = cfg.estimators.len();
    let mut cells = Vec::with_capacity(total.len());
    for (i, acc) in total.into_iter().enumerate() {
        let gamma = cfg.gamma_grid[i / n_est];
        let estimator = cfg.estimators[i % n_est];
        let n = acc.moments.n;
        let p = acc.inside as f64 / n as f64;
        let overlay = if cfg.theory { theory_overlay(&theory, estimator, gamma)? } else { TheoryOverlay::default() };
        cells.push(CellSummary {
            estimator,
            gamma,
            n,
            mean: acc.moments.mean,
            mean_se: acc.moments.mean_se(),
            variance: acc.moments.variance(),
            variance_se: acc.moments.variance_se(),
            p_delta: p,
            p_delta_se: (p * (1.0 - p) / n as f64).sqrt(),
            negative_count: acc.negative,
            histogram: acc.histogram,
            theory: overlay,
        });
    }
    Ok(ExperimentSummary {
        n_steps: cfg.n_steps,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        gammas: cfg.gamma_grid.clone(),
        estimators: cfg.estimators.clone(),
        cells,
    })
}

/// One flat output row per (estimator, gamma) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRow {
    pub estimator: &'static str,
    pub gamma: f64,
    pub mean: f64,
    pub mean_se: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub p_delta: f64,
    pub p_delta_se: f64,
    pub theory_mean: Option<f64>,
    pub theory_variance: Option<f64>,
    pub theory_p_delta: Option<f64>,
}

impl ExperimentSummary {
    pub fn rows(&self) -> Vec<SummaryRow> {
        self.cells
            .iter()
            .map(|c| SummaryRow {
                estimator: c.estimator.name(),
                gamma: c.gamma,
                mean: c.mean,
                mean_se: c.mean_se,
                variance: c.variance,
                variance_se: c.variance_se,
                p_delta: c.p_delta,
                p_delta_se: c.p_delta_se,
                theory_mean: c.theory.mean,
                theory_variance: c.theory.variance,
                theory_p_delta: c.theory.p_delta,
            })
            .collect()
    }

    /// Header plus one CSV record per cell.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn theory_overlay(theory: &Theory, kind: EstimatorKind, gamma: f64) -> Result<TheoryOverlay> {
    Ok(match kind {
        EstimatorKind::Parkinson | EstimatorKind::Bridge => {
            let m = theory.moments(kind, gamma)?;
            TheoryOverlay {
                mean: Some(m.mean),
                variance: Some(m.variance),
                p_delta: Some(theory.coverage_probability(kind, gamma)?.value),
            }
        }
        _ => TheoryOverlay {
            mean: Some(theory.mean(kind, gamma)?),
            variance: None,
            p_delta: None,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramRow {
    pub bin_center: f64,
    pub empirical_density: f64,
    pub analytic_density: Option<f64>,
}

/// Histogram of one cell normalized to a density, next to the analytic pdf
/// at the bin centres (Parkinson and bridge only).
pub fn histogram_vs_pdf(
    summary: &ExperimentSummary,
    estimator: EstimatorKind,
    gamma: f64,
    cfg: &SeriesConfig,
) -> Result<Vec<HistogramRow>> {
    let cell = summary
        .cell(estimator, gamma)
        .filter(|c| c.n > 0)
        .ok_or_else(|| Error::MissingSamples(estimator.to_string()))?;
    let h = &cell.histogram;
    let width = h.bin_width();
    let norm = 1.0 / (cell.n as f64 * width);
    h.counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let x = (i as f64 + 0.5) * width;
            let analytic = match estimator {
                EstimatorKind::Parkinson => Some(parkinson_estimator_pdf(x, gamma, cfg)?.value),
                EstimatorKind::Bridge => Some(bridge_estimator_pdf(x, cfg)?.value),
                _ => None,
            };
            Ok(HistogramRow {
                bin_center: x,
                empirical_density: count as f64 * norm,
                analytic_density: analytic,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoodnessOfFit {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Cells after pooling bins with expected count below 5.
    pub cells: usize,
}

/// Pearson chi-square test of a cell's histogram (plus its overflow) against
/// bin probabilities integrated from the analytic pdf.
pub fn chi_square_gof(
    summary: &ExperimentSummary,
    estimator: EstimatorKind,
    gamma: f64,
    cfg: &SeriesConfig,
) -> Result<GoodnessOfFit> {
    let cell = summary
        .cell(estimator, gamma)
        .filter(|c| c.n > 0)
        .ok_or_else(|| Error::MissingSamples(estimator.to_string()))?;
    let h = &cell.histogram;
    let n = cell.n as f64;
    let width = h.bin_width();
    let quad = QuadratureConfig::with_tol(1e-12);
    let mut observed: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
    let mut expected = Vec::with_capacity(observed.len() + 1);
    for i in 0..h.counts.len() {
        let lo = i as f64 * width;
        expected.push(n * probability_between(estimator, gamma, lo, lo + width, cfg, quad)?);
    }
    let inside: f64 = expected.iter().sum();
    observed.push((h.overflow + h.underflow) as f64);
    expected.push((n - inside).max(0.0));

    // Pool neighbouring bins until each expected count reaches 5.
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (oi, ei) in observed.into_iter().zip(expected) {
        o += oi;
        e += ei;
        if e >= 5.0 {
            pooled.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => pooled.push((o, e)),
        }
    }
    let statistic: f64 = pooled.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len().saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(GoodnessOfFit {
        statistic,
        dof,
        p_value: dist.sf(statistic),
        cells: pooled.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub path: usize,
    pub gamma: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleTable {
    pub estimators: Vec<EstimatorKind>,
    pub rows: Vec<SampleRow>,
}

/// Per-path estimator values for the first `count` paths of `cfg`; every
/// estimator in a row comes from the same path.
pub fn sample_dump(cfg: &ExperimentConfig, count: usize) -> Result<SampleTable> {
    cfg.validate()?;
    if count > cfg.n_paths {
        return Err(Error::InvalidArgument(format!(
            "requested {count} samples from {} paths",
            cfg.n_paths
        )));
    }
    let n_est = cfg.estimators.len();
    let per_path: Vec<Vec<SampleRow>> = (0..count)
        .into_par_iter()
        .map(|index| {
            let mut engine = PathEngine::new(cfg);
            let mut rows: Vec<SampleRow> = cfg
                .gamma_grid
                .iter()
                .map(|&gamma| SampleRow {
                    path: index,
                    gamma,
                    values: vec![0.0; n_est],
                })
                .collect();
            engine.run_path(index, |gi, ei, v| rows[gi].values[ei] = v);
            rows
        })
        .collect();
    Ok(SampleTable {
        estimators: cfg.estimators.clone(),
        rows: per_path.into_iter().flatten().collect(),
    })
}
