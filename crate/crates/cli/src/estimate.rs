use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use rangevol_core::estimators::physical_estimate;
use rangevol_core::paths::bar_from_samples;
use rangevol_core::ticks::{read_ohlc, read_ticks, split_windows};
use rangevol_core::{BridgeExtremes, EstimatorKind, PhysicalBar, Window};

use crate::output::{Cell, Sink, Table};
use crate::{parse_estimators, CliError, Common, List};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// Decide from the header row.
    Auto,
    Ohlc,
    Ticks,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// OHLC (`window_id,open,high,low,close`) or tick (`timestamp,price`) CSV.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    pub input_format: InputFormat,
    /// Comma-separated estimators. Defaults to all that the input supports.
    #[arg(long, value_parser = parse_estimators)]
    pub estimators: Option<List<EstimatorKind>>,
    /// OHLC prices are raw prices rather than log prices.
    #[arg(long)]
    pub raw_prices: bool,
    /// Tick prices are already log prices.
    #[arg(long)]
    pub log_prices: bool,
    /// Tick window length in seconds. One window spans the whole file when absent.
    #[arg(long)]
    pub window: Option<f64>,
}

fn detect(text: &str) -> Result<InputFormat, CliError> {
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .unwrap_or_default()
        .to_ascii_lowercase();
    if header.starts_with("window_id") {
        Ok(InputFormat::Ohlc)
    } else if header.starts_with("timestamp") {
        Ok(InputFormat::Ticks)
    } else {
        Err(CliError::Runtime(format!(
            "line 1: cannot tell the input format from header `{header}`"
        )))
    }
}

struct Bar {
    id: String,
    bar: PhysicalBar,
    bridge: Option<BridgeExtremes>,
}

fn ohlc_bars(text: &str, raw_prices: bool) -> Result<Vec<Bar>, CliError> {
    read_ohlc(text.as_bytes())?
        .into_iter()
        .map(|row| {
            Ok(Bar {
                bar: row.bar(raw_prices)?,
                id: row.window_id,
                bridge: None,
            })
        })
        .collect()
}

fn tick_bars(text: &str, window: Option<f64>, log_prices: bool) -> Result<Vec<Bar>, CliError> {
    let ticks = read_ticks(text.as_bytes())?;
    let windows = match window {
        Some(length) => split_windows(&ticks, length)?,
        None => {
            let (Some(first), Some(last)) = (ticks.first(), ticks.last()) else {
                return Ok(Vec::new());
            };
            let length = (last.time - first.time).max(f64::MIN_POSITIVE);
            vec![(0, Window { start: first.time, length }, ticks.clone())]
        }
    };
    windows
        .into_iter()
        .map(|(k, w, inside)| {
            let (bar, bridge) = bar_from_samples(&inside, w, log_prices)
                .map_err(|e| CliError::Runtime(format!("window {k} starting at {}: {e}", w.start)))?;
            Ok(Bar {
                id: k.to_string(),
                bar,
                bridge: Some(bridge),
            })
        })
        .collect()
}

pub fn run(common: &Common, sink: &Sink, args: EstimateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.input)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", args.input.display())))?;
    let format = match args.input_format {
        InputFormat::Auto => detect(&text)?,
        f => f,
    };
    let estimators = match (args.estimators.as_ref().map(|l| &l.0), format) {
        (Some(list), InputFormat::Ohlc) if list.contains(&EstimatorKind::Bridge) => {
            return Err(CliError::Usage(
                "the bridge estimator needs the intra-window path; use tick input".into(),
            ))
        }
        (Some(list), _) => list.clone(),
        (None, InputFormat::Ohlc) => EstimatorKind::ALL
            .into_iter()
            .filter(|&k| k != EstimatorKind::Bridge)
            .collect(),
        (None, _) => EstimatorKind::ALL.to_vec(),
    };
    if format == InputFormat::Ohlc && (args.log_prices || args.window.is_some()) {
        return Err(CliError::Usage("--log-prices and --window apply to tick input only".into()));
    }
    if format == InputFormat::Ticks && args.raw_prices {
        return Err(CliError::Usage("--raw-prices applies to OHLC input only".into()));
    }

    let bars = match format {
        InputFormat::Ohlc => ohlc_bars(&text, args.raw_prices)?,
        _ => tick_bars(&text, args.window, args.log_prices)?,
    };

    let mut headers: Vec<&'static str> = vec!["window_id", "high", "low", "close"];
    headers.extend(estimators.iter().map(|k| k.name()));
    headers.push("warnings");
    let mut table = Table::new(&headers);
    for b in &bars {
        let mut row: Vec<Cell> = vec![b.id.clone().into(), b.bar.high.into(), b.bar.low.into(), b.bar.close.into()];
        let mut negative = Vec::new();
        for &kind in &estimators {
            let est = physical_estimate(&b.bar, b.bridge.as_ref(), kind)?;
            if est.negative_warning() {
                negative.push(format!("negative-{}", kind.name()));
            }
            row.push(est.value.into());
        }
        row.push(negative.join(";").into());
        table.push(row);
    }
    sink.write(common.out.as_deref(), &table)
}
