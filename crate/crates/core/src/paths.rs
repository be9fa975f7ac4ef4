//! Discretized canonical Brownian paths, their bridges and extreme values.
//!
//! A path of `N` steps holds `N + 1` values `x_0 = 0, x_1, ..., x_N` with
//! `x_n = gamma * n / N + (1 / sqrt N) * (eps_1 + ... + eps_n)`. Extremes are
//! taken over the sampled grid only, so they sit slightly inside the
//! continuous-path extremes (by roughly `0.5826 / sqrt N` per side).
//!
//! Noise comes from ChaCha8 with one stream per path index, and standard
//! normals from the ziggurat sampler in `rand_distr`. The same `(seed, index)`
//! always produces the same increments, whichever thread draws them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    values: Vec<f64>,
    gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremes {
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BridgeExtremes {
    pub xi: f64,
    pub zeta: f64,
}

/// High, low and close of the log-price increment over one window of
/// length `horizon`, all measured from the window's opening log-price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalBar {
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tick {
    pub time: f64,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub length: f64,
}

impl Extremes {
    pub fn range(&self) -> f64 {
        self.high - self.low
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            high: self.high * factor,
            low: self.low * factor,
            close: self.close * factor,
        }
    }

    pub fn of_values(values: &[f64]) -> Self {
        let (low, high) = min_max(values.iter().copied());
        Self {
            high,
            low,
            close: *values.last().expect("paths are never empty"),
        }
    }
}

impl BridgeExtremes {
    pub fn range(&self) -> f64 {
        self.xi - self.zeta
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            xi: self.xi * factor,
            zeta: self.zeta * factor,
        }
    }

    /// Extremes of `values[n] - (n / N) * values[N]`, without materializing
    /// the bridge.
    pub fn of_values(values: &[f64]) -> Self {
        let n_steps = (values.len() - 1) as f64;
        let end = values[values.len() - 1];
        let mut xi = 0.0f64;
        let mut zeta = 0.0f64;
        for (n, &v) in values.iter().enumerate() {
            let z = bridge_point(v, n, n_steps, end);
            xi = xi.max(z);
            zeta = zeta.min(z);
        }
        Self { xi, zeta }
    }
}

impl PhysicalBar {
    pub fn new(high: f64, low: f64, close: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
        }
        if !(low <= 0.0 && 0.0 <= high && low <= close && close <= high) {
            return Err(Error::InvalidArgument(format!(
                "bar violates L <= 0 <= H and L <= C <= H: H={high} L={low} C={close}"
            )));
        }
        Ok(Self {
            high,
            low,
            close,
            horizon,
        })
    }

    pub fn extremes(&self) -> Extremes {
        Extremes {
            high: self.high,
            low: self.low,
            close: self.close,
        }
    }
}

#[inline]
fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[inline]
pub(crate) fn drift_point(gamma: f64, n: usize, n_steps: f64, walk: f64) -> f64 {
    gamma * (n as f64 / n_steps) + walk
}

#[inline]
fn bridge_point(value: f64, n: usize, n_steps: f64, end: f64) -> f64 {
    value - (n as f64 / n_steps) * end
}

impl Path {
    /// Build a path from explicit increments; `values[n] = gamma * n / N +
    /// (eps_1 + ... + eps_n) / sqrt N`.
    pub fn from_increments(increments: &[f64], gamma: f64) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::InvalidArgument("a path needs at least one step".into()));
        }
        let mut walk = Vec::with_capacity(increments.len() + 1);
        accumulate_walk(increments, &mut walk);
        Ok(Self::from_walk(&walk, gamma))
    }

    /// Path values as given. The first value must be 0.
    pub fn from_values(values: Vec<f64>, gamma: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument("a path needs at least one step".into()));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidArgument(format!("path must start at 0, got {}", values[0])));
        }
        Ok(Self { values, gamma })
    }

    fn from_walk(walk: &[f64], gamma: f64) -> Self {
        let n_steps = (walk.len() - 1) as f64;
        let values = walk
            .iter()
            .enumerate()
            .map(|(n, &w)| drift_point(gamma, n, n_steps, w))
            .collect();
        Self { values, gamma }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn close(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            gamma: self.gamma,
        }
    }

    /// Adds `slope * n / N` to every value.
    pub fn with_added_drift(&self, slope: f64) -> Self {
        let n_steps = self.n_steps() as f64;
        Self {
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(n, &v)| drift_point(slope, n, n_steps, v))
                .collect(),
            gamma: self.gamma + slope,
        }
    }
}

/// Cumulative sum of increments scaled by `1 / sqrt N`, starting from 0.
pub fn accumulate_walk(increments: &[f64], walk: &mut Vec<f64>) {
    let scale = 1.0 / (increments.len() as f64).sqrt();
    walk.clear();
    walk.push(0.0);
    let mut sum = 0.0;
    for &e in increments {
        sum += e;
        walk.push(sum * scale);
    }
}

/// Reusable noise generator: one ChaCha8 stream per path index.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, path_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        Self { rng }
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for e in out {
            *e = self.rng.sample(StandardNormal);
        }
    }
}

/// Simulate the path with stream index 0 for `seed`.
pub fn simulate_path(n_steps: usize, gamma: f64, seed: u64) -> Result<Path> {
    simulate_path_indexed(n_steps, gamma, seed, 0)
}

pub fn simulate_path_indexed(n_steps: usize, gamma: f64, seed: u64, path_index: u64) -> Result<Path> {
    if n_steps == 0 {
        return Err(Error::InvalidArgument("n_steps must be at least 1".into()));
    }
    let mut eps = vec![0.0; n_steps];
    NoiseStream::new(seed, path_index).fill(&mut eps);
    Path::from_increments(&eps, gamma)
}

/// `z_n = x_n - (n / N) x_N`; the result ends exactly at 0 and carries no drift.
pub fn bridge_transform(path: &Path) -> Path {
    let n_steps = path.n_steps() as f64;
    let end = path.close();
    let mut values: Vec<f64> = path
        .values
        .iter()
        .enumerate()
        .map(|(n, &v)| bridge_point(v, n, n_steps, end))
        .collect();
    *values.last_mut().expect("non-empty") = 0.0;
    Path { values, gamma: 0.0 }
}

pub fn extremes(path: &Path) -> Extremes {
    Extremes::of_values(&path.values)
}

pub fn bridge_extremes(path: &Path) -> BridgeExtremes {
    BridgeExtremes::of_values(&path.values)
}

/// Reduce tick samples inside `window` to a physical bar and the extremes of
/// its bridge. Increments are measured from the first tick in the window and
/// the bridge removes the straight line through the first and last ticks.
pub fn bar_from_samples(ticks: &[Tick], window: Window, log_input: bool) -> Result<(PhysicalBar, BridgeExtremes)> {
    if !(window.length > 0.0) {
        return Err(Error::InvalidArgument(format!("window length must be positive, got {}", window.length)));
    }
    let end = window.start + window.length;
    let inside: Vec<&Tick> = ticks
        .iter()
        .filter(|t| t.time >= window.start && t.time <= end)
        .collect();
    if inside.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    let mut logs = Vec::with_capacity(inside.len());
    let mut prev_time = f64::NEG_INFINITY;
    for t in &inside {
        if !(t.time > prev_time) {
            return Err(Error::NonMonotoneTime { time: t.time });
        }
        prev_time = t.time;
        let lp = if log_input {
            t.price
        } else {
            if !(t.price > 0.0) {
                return Err(Error::NonPositivePrice {
                    time: t.time,
                    price: t.price,
                });
            }
            t.price.ln()
        };
        logs.push(lp);
    }
    let origin = logs[0];
    let increments: Vec<f64> = logs.iter().map(|&l| l - origin).collect();
    let e = Extremes::of_values(&increments);

    let t0 = inside[0].time;
    let span = inside[inside.len() - 1].time - t0;
    let close = e.close;
    let (mut xi, mut zeta) = (0.0f64, 0.0f64);
    for (t, &y) in inside.iter().zip(&increments) {
        let z = y - ((t.time - t0) / span) * close;
        xi = xi.max(z);
        zeta = zeta.min(z);
    }
    let bar = PhysicalBar {
        high: e.high,
        low: e.low,
        close: e.close,
        horizon: window.length,
    };
    Ok((bar, BridgeExtremes { xi, zeta }))
}
