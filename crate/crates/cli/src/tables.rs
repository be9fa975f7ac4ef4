use std::fs;

use clap::{Args, ValueEnum};
use rangevol_core::analytics::{interval_probability, Method, OracleConfig, Theory};
use rangevol_core::montecarlo::default_gamma_grid;
use rangevol_core::validation::{formula_report, ValidationConfig};
use rangevol_core::EstimatorKind;

use crate::output::{Cell, Format, Sink, Table};
use crate::{parse_estimators, parse_list, CliError, Common, List};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Mean,
    Variance,
    /// Relative bias (mean - 1) / sd.
    Bias,
    /// F(N) = P(v > 1/N).
    F,
    /// P(1/2 < v < 2).
    Pdelta,
    /// Competing formula readings, each checked against an identity or simulation.
    Validation,
    /// Every table, one file each under --out.
    All,
}

impl Which {
    fn name(self) -> &'static str {
        match self {
            Which::Mean => "mean",
            Which::Variance => "variance",
            Which::Bias => "bias",
            Which::F => "f",
            Which::Pdelta => "pdelta",
            Which::Validation => "validation",
            Which::All => "all",
        }
    }
}

#[derive(Debug, Args)]
pub struct TablesArgs {
    #[arg(value_enum)]
    pub which: Which,
    /// Drift grid (default 0, 0.25, ..., 2).
    #[arg(long, value_parser = parse_list)]
    pub gammas: Option<List<f64>>,
    /// Levels N of the F table.
    #[arg(long, value_parser = parse_list, default_value = "1,1.25,1.5,2,3,4,5,10")]
    pub levels: List<f64>,
    /// Drift of the Parkinson rows in the F table.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub f_gamma: f64,
    #[arg(long, value_parser = parse_estimators, default_value = "all")]
    pub estimators: List<EstimatorKind>,
    /// Paths of the Monte Carlo oracle behind variances without an integral form.
    #[arg(long, default_value_t = 10_000_000)]
    pub oracle_paths: usize,
    #[arg(long, default_value_t = 10_000)]
    pub oracle_steps: usize,
    /// Paths and steps of the simulations in the validation table.
    #[arg(long, default_value_t = 20_000)]
    pub validation_paths: usize,
    #[arg(long, default_value_t = 5_000)]
    pub validation_steps: usize,
}

const HEADERS: [&str; 5] = ["estimator", "x", "value", "method", "se"];

fn analytic(kind: EstimatorKind) -> bool {
    matches!(kind, EstimatorKind::Parkinson | EstimatorKind::Bridge)
}

struct Ctx<'a> {
    args: &'a TablesArgs,
    theory: Theory,
    gammas: Vec<f64>,
}

impl Ctx<'_> {
    fn rows(
        &self,
        which: Which,
        kinds: impl Iterator<Item = EstimatorKind>,
        xs: &[f64],
        mut f: impl FnMut(EstimatorKind, f64) -> rangevol_core::Result<(f64, Method, Option<f64>)>,
    ) -> Result<Table, CliError> {
        let mut table = Table::new(&HEADERS);
        for kind in kinds {
            for &x in xs {
                let (value, method, se) = f(kind, x)
                    .map_err(|e| CliError::Runtime(format!("{} table, {kind} at x = {x}: {e}", which.name())))?;
                table.push(vec![kind.name().into(), x.into(), value.into(), method.name().into(), se.into()]);
            }
        }
        Ok(table)
    }

    fn build(&self, which: Which) -> Result<Table, CliError> {
        let kinds = self.args.estimators.0.iter().copied();
        let th = &self.theory;
        match which {
            Which::Mean => self.rows(which, kinds, &self.gammas, |k, g| Ok((th.mean(k, g)?, Method::Quadrature, None))),
            Which::Variance => self.rows(which, kinds, &self.gammas, |k, g| {
                let r = th.moments(k, g)?;
                Ok((r.variance, r.method, r.variance_se))
            }),
            Which::Bias => self.rows(which, kinds, &self.gammas, |k, g| {
                let r = th.moments(k, g)?;
                // Delta method through the variance only; the mean is analytic.
                let se = r
                    .variance_se
                    .map(|vs| (r.mean - 1.0).abs() / (2.0 * r.variance.powf(1.5)) * vs);
                Ok((r.relative_bias, r.method, se))
            }),
            Which::Pdelta => self.rows(which, kinds, &self.gammas, |k, g| {
                let p = th.coverage_probability(k, g)?;
                Ok((p.value, p.method, p.se))
            }),
            Which::F => self.rows(which, kinds.filter(|&k| analytic(k)), &self.args.levels.0, |k, n| {
                Ok((interval_probability(k, self.args.f_gamma, n, &th.series)?, Method::Quadrature, None))
            }),
            Which::Validation => {
                let cfg = ValidationConfig {
                    mc_paths: self.args.validation_paths,
                    mc_steps: self.args.validation_steps,
                    seed: th.oracle.seed,
                    ..ValidationConfig::default()
                };
                let mut table = Table::new(&["check", "form", "quantity", "value", "reference", "tolerance", "matches"]);
                for r in formula_report(&cfg)? {
                    table.push(vec![
                        r.check.into(),
                        r.form.into(),
                        r.quantity.into(),
                        r.value.into(),
                        r.reference.into(),
                        r.tolerance.into(),
                        Cell::from(r.matches),
                    ]);
                }
                Ok(table)
            }
            Which::All => unreachable!("expanded by the caller"),
        }
    }
}

pub fn run(common: &Common, sink: &Sink, args: TablesArgs) -> Result<(), CliError> {
    let series = common.series()?;
    let oracle = OracleConfig {
        n_paths: args.oracle_paths,
        n_steps: args.oracle_steps,
        seed: common.seed,
    };
    if oracle.n_paths < 2 || oracle.n_steps < 1 {
        return Err(CliError::Usage("--oracle-paths must be at least 2 and --oracle-steps at least 1".into()));
    }
    let gammas = args.gammas.clone().map_or_else(default_gamma_grid, |g| g.0);
    let ctx = Ctx {
        theory: Theory::new(series, oracle),
        gammas,
        args: &args,
    };
    let which: Vec<Which> = match args.which {
        Which::All => vec![Which::Mean, Which::Variance, Which::Bias, Which::F, Which::Pdelta, Which::Validation],
        w => vec![w],
    };
    if args.which == Which::All && common.out.is_none() {
        return Err(CliError::Usage("`tables all` needs --out DIR".into()));
    }
    let needs_oracle = which.iter().any(|w| matches!(w, Which::Variance | Which::Bias | Which::Pdelta))
        && args.estimators.0.iter().any(|&k| !analytic(k));
    if needs_oracle {
        ctx.theory.prime_oracle(&ctx.gammas)?;
    }

    if args.which == Which::All {
        let dir = common.out.as_deref().expect("checked above");
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        let ext = match sink.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        for w in which {
            let table = ctx.build(w)?;
            sink.write(Some(&dir.join(format!("{}.{ext}", w.name()))), &table)?;
        }
        Ok(())
    } else {
        sink.write(common.out.as_deref(), &ctx.build(args.which)?)
    }
}
