use clap::{Args, ValueEnum};
use rangevol_core::densities::*;
use rangevol_core::{DensityValue, ErfcArgument, SeriesConfig};

use crate::output::{Cell, Sink, Table};
use crate::{CliError, Common};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Density {
    /// Close c; x = chi.
    ClosePdf,
    /// High h; x = eta.
    HighPdf,
    /// Joint high/close at fixed --chi; x = eta.
    HighClosePdf,
    /// Joint high/low/close at fixed --ell and --chi; x = eta.
    HlcPdf,
    /// Range d; x = delta.
    RangePdf,
    /// Joint range/close at fixed --chi; x = delta.
    RangeClosePdf,
    /// Joint bridge high/low at fixed --ell; x = eta.
    BridgeHlPdf,
    /// Bridge range s; x = delta.
    BridgeRangePdf,
    /// Canonical Parkinson estimator.
    ParkEstimatorPdf,
    /// Canonical bridge estimator.
    BridgeEstimatorPdf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Erfc {
    Corrected,
    Printed,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[arg(value_enum)]
    pub kind: Density,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long, default_value_t = 600)]
    pub points: usize,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub gamma: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub chi: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub ell: Option<f64>,
    /// erfc argument of the high density.
    #[arg(long, value_enum, default_value_t = Erfc::Corrected)]
    pub erfc: Erfc,
}

fn need(v: Option<f64>, flag: &str, kind: Density) -> Result<f64, CliError> {
    v.ok_or_else(|| {
        let name = kind.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default();
        CliError::Usage(format!("{name} needs --{flag}"))
    })
}

fn exact(value: f64) -> rangevol_core::Result<(Option<f64>, usize, bool)> {
    Ok((Some(value), 1, true))
}

fn series(d: DensityValue) -> rangevol_core::Result<(Option<f64>, usize, bool)> {
    let below_floor = !d.converged && d.terms_used == 0;
    Ok((if below_floor { None } else { Some(d.value) }, d.terms_used, d.converged))
}

fn evaluate(args: &DensityArgs, x: f64, cfg: &SeriesConfig) -> Result<(Option<f64>, usize, bool), CliError> {
    let g = args.gamma;
    let r = match args.kind {
        Density::ClosePdf => exact(close_pdf(x, g)),
        Density::HighPdf => {
            let arg = match args.erfc {
                Erfc::Corrected => ErfcArgument::Corrected,
                Erfc::Printed => ErfcArgument::Printed,
            };
            exact(high_pdf_with(x, g, arg))
        }
        Density::HighClosePdf => series(high_close_joint_pdf(x, need(args.chi, "chi", args.kind)?, g)),
        Density::HlcPdf => {
            let (ell, chi) = (need(args.ell, "ell", args.kind)?, need(args.chi, "chi", args.kind)?);
            hlc_joint_pdf(x, ell, chi, g, cfg).and_then(series)
        }
        Density::RangePdf => range_pdf(x, g, cfg).and_then(series),
        Density::RangeClosePdf => range_close_joint_pdf(x, need(args.chi, "chi", args.kind)?, g, cfg).and_then(series),
        Density::BridgeHlPdf => bridge_hl_joint_pdf(x, need(args.ell, "ell", args.kind)?, cfg).and_then(series),
        Density::BridgeRangePdf => bridge_range_pdf(x, cfg).and_then(series),
        Density::ParkEstimatorPdf => parkinson_estimator_pdf(x, g, cfg).and_then(series),
        Density::BridgeEstimatorPdf => bridge_estimator_pdf(x, cfg).and_then(series),
    };
    r.map_err(|e| CliError::Runtime(format!("x = {x}: {e}")))
}

pub fn run(common: &Common, sink: &Sink, args: DensityArgs) -> Result<(), CliError> {
    let cfg = common.series()?;
    if args.points < 2 || !(args.to > args.from) {
        return Err(CliError::Usage("need --points >= 2 and --to > --from".into()));
    }
    let mut table = Table::new(&["x", "value", "terms_used", "converged", "note"]);
    let step = (args.to - args.from) / (args.points - 1) as f64;
    for i in 0..args.points {
        let x = if i + 1 == args.points { args.to } else { args.from + i as f64 * step };
        let (value, terms, converged) = evaluate(&args, x, &cfg)?;
        let note = if value.is_none() { "below small_arg_floor" } else { "" };
        table.push(vec![x.into(), value.into(), terms.into(), converged.into(), Cell::from(note)]);
    }
    sink.write(common.out.as_deref(), &table)
}
