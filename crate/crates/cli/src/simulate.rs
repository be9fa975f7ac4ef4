use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use clap::Args;
use rangevol_core::montecarlo::{
    default_gamma_grid, histogram_vs_pdf, run_experiment, sample_dump, ExperimentConfig, ExperimentSummary,
};
use rangevol_core::paths::simulate_path_indexed;
use rangevol_core::ticks::write_ticks;
use rangevol_core::EstimatorKind;

use crate::output::{Cell, Sink, Table};
use crate::{parse_estimators, parse_list, CliError, Common, List};

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of paths M.
    #[arg(long, default_value_t = 100_000, conflicts_with = "full_scale")]
    pub paths: usize,
    /// Steps per path N.
    #[arg(long, default_value_t = 5_000)]
    pub steps: usize,
    /// Use M = 500000 paths.
    #[arg(long)]
    pub full_scale: bool,
    /// Comma-separated drift grid (default 0, 0.25, ..., 2).
    #[arg(long, value_parser = parse_list)]
    pub gammas: Option<List<f64>>,
    #[arg(long, value_parser = parse_estimators, default_value = "all")]
    pub estimators: List<EstimatorKind>,
    /// Histogram bins on [0, --hist-max).
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    #[arg(long, default_value_t = 6.0)]
    pub hist_max: f64,
    /// Skip the analytic overlay columns.
    #[arg(long)]
    pub no_theory: bool,
    /// Refuse runs with more than this many path steps in total.
    #[arg(long, default_value_t = 1_000_000_000_000)]
    pub max_path_steps: u128,
    /// Also write every simulated path (first gamma) as a tick file.
    #[arg(long)]
    pub emit_ticks: Option<PathBuf>,
    /// Variance sigma^2 T of one emitted path.
    #[arg(long, default_value_t = 1.0, requires = "emit_ticks")]
    pub sigma2t: f64,
    /// Write normalized histograms next to the analytic pdfs.
    #[arg(long)]
    pub histograms: Option<PathBuf>,
    /// Write per-path estimator values for the first COUNT paths.
    #[arg(long, value_name = "COUNT", requires = "samples_out")]
    pub samples: Option<usize>,
    #[arg(long)]
    pub samples_out: Option<PathBuf>,
}

const SUMMARY_HEADERS: [&str; 11] = [
    "estimator",
    "gamma",
    "mean",
    "mean_se",
    "variance",
    "variance_se",
    "p_delta",
    "p_delta_se",
    "theory_mean",
    "theory_variance",
    "theory_p_delta",
];

fn summary_table(summary: &ExperimentSummary) -> Table {
    let mut table = Table::new(&SUMMARY_HEADERS);
    for r in summary.rows() {
        table.push(vec![
            r.estimator.into(),
            r.gamma.into(),
            r.mean.into(),
            r.mean_se.into(),
            r.variance.into(),
            r.variance_se.into(),
            r.p_delta.into(),
            r.p_delta_se.into(),
            r.theory_mean.into(),
            r.theory_variance.into(),
            r.theory_p_delta.into(),
        ]);
    }
    table
}

/// Path `i` becomes ticks at integer times `i (N + 1) + n`, `n = 0..=N`,
/// with price `exp(sqrt(sigma2t) x_n)`.
fn emit_ticks(cfg: &ExperimentConfig, sigma2t: f64, path: &PathBuf) -> Result<(), CliError> {
    if !(sigma2t > 0.0) {
        return Err(CliError::Usage(format!("--sigma2t must be positive, got {sigma2t}")));
    }
    let scale = sigma2t.sqrt();
    let gamma = cfg.gamma_grid[0];
    let stride = cfg.n_steps as i64 + 1;
    let file = File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut first_error = None;
    let ticks = (0..cfg.n_paths).flat_map(|i| {
        let values = match simulate_path_indexed(cfg.n_steps, gamma, cfg.seed, i as u64) {
            Ok(p) => p.values().to_vec(),
            Err(e) => {
                first_error.get_or_insert(e);
                Vec::new()
            }
        };
        values
            .into_iter()
            .enumerate()
            .map(move |(n, x)| (i as i64 * stride + n as i64, (scale * x).exp()))
    });
    write_ticks(BufWriter::new(file), ticks)?;
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub fn run(common: &Common, sink: &Sink, args: SimulateArgs) -> Result<(), CliError> {
    let series = common.series()?;
    let cfg = ExperimentConfig {
        n_steps: args.steps,
        n_paths: if args.full_scale { ExperimentConfig::full_scale().n_paths } else { args.paths },
        gamma_grid: args.gammas.clone().map_or_else(default_gamma_grid, |g| g.0),
        seed: common.seed,
        estimators: args.estimators.0.clone(),
        histogram_bins: args.bins,
        histogram_max: args.hist_max,
        theory: !args.no_theory,
        series,
        max_path_steps: args.max_path_steps,
        ..ExperimentConfig::default()
    };
    cfg.validate()?;
    if let Some(count) = args.samples {
        if count > cfg.n_paths {
            return Err(CliError::Usage(format!("--samples {count} exceeds --paths {}", cfg.n_paths)));
        }
    }

    let summary = run_experiment(&cfg)?;
    sink.write(common.out.as_deref(), &summary_table(&summary))?;

    if let Some(path) = &args.emit_ticks {
        emit_ticks(&cfg, args.sigma2t, path)?;
    }
    if let Some(path) = &args.histograms {
        let mut table = Table::new(&["estimator", "gamma", "bin_center", "empirical_density", "analytic_density"]);
        for cell in &summary.cells {
            for row in histogram_vs_pdf(&summary, cell.estimator, cell.gamma, &series)? {
                table.push(vec![
                    cell.estimator.name().into(),
                    cell.gamma.into(),
                    row.bin_center.into(),
                    row.empirical_density.into(),
                    row.analytic_density.into(),
                ]);
            }
        }
        sink.write(Some(path), &table)?;
    }
    if let (Some(count), Some(path)) = (args.samples, &args.samples_out) {
        let dump = sample_dump(&cfg, count)?;
        let mut headers: Vec<&'static str> = vec!["path", "gamma"];
        headers.extend(dump.estimators.iter().map(|k| k.name()));
        let mut table = Table::new(&headers);
        for r in &dump.rows {
            let mut row: Vec<Cell> = vec![r.path.into(), r.gamma.into()];
            row.extend(r.values.iter().map(|&v| Cell::from(v)));
            table.push(row);
        }
        sink.write(Some(path), &table)?;
    }
    Ok(())
}
