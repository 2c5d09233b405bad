use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use poisson_eb::cv::{select_h, CvConfig, CvEstimator};
use poisson_eb::io::ingest_counts;
use poisson_eb::report::{Format, Metadata, ObservationRow, Payload, ReportDocument, RuleRow};
use poisson_eb::sim::{
    bayes_benchmark, empirical_risk, make_lambda, run_experiment, ExperimentConfig, LambdaConfig,
    TablePreset,
};
use poisson_eb::{apply_rule, Error, Estimator, DEFAULT_SEED};

#[derive(Parser, Debug)]
#[command(
    name = "poisson-eb",
    version,
    about = "Empirical Bayes estimation of Poisson means"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a rule on a count file and print it with the per-observation estimates.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo risk table for a preset or an explicit mean vector.
    Simulate {
        /// Preset: 1-5 or example1.
        #[arg(
            long,
            conflicts_with = "lambda_spec",
            required_unless_present = "lambda_spec"
        )]
        table: Option<TablePreset>,
        /// e.g. constant:10:200, linspace:5:15:200, or parts joined by '+'.
        /// Grids then default to those of table 1.
        #[arg(long)]
        lambda_spec: Option<LambdaConfig>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Overrides the adjusted-rule h grid.
        #[arg(long, value_delimiter = ',')]
        h_grid: Option<Vec<f64>>,
        /// Overrides the normal-rule bandwidth grid.
        #[arg(long, value_delimiter = ',')]
        bandwidth_grid: Option<Vec<f64>>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Choose the smoothing parameter by Poisson thinning.
    Cv {
        #[arg(long)]
        input: PathBuf,
        /// Retention probability.
        #[arg(long, default_value_t = 0.9)]
        p: f64,
        /// Number of thinnings.
        #[arg(long = "K", default_value_t = 1000)]
        k: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2,2.5,3")]
        h_grid: Vec<f64>,
        #[arg(long, value_enum, default_value_t = CvFamily::Adjusted)]
        estimator: CvFamily,
        /// Offset of the square-root transform for the normal family.
        #[arg(long, default_value_t = 0.25)]
        q: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Bayes risk benchmark nB(λ) of the empirical prior of a mean vector.
    BayesRisk {
        #[arg(long)]
        lambda_spec: LambdaConfig,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Σ (δ(y_i) - z_i)² on a paired "y,z" file, the rule fitted on the y column.
    EmpiricalRisk {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Naive,
    Robbins,
    Adjusted,
    Normal,
    Kl,
    Npmle,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CvFamily {
    Adjusted,
    Normal,
}

#[derive(Args, Debug)]
struct EstimatorArgs {
    #[arg(long, value_enum)]
    estimator: Family,
    /// Poisson corruption parameter of the adjusted rule.
    #[arg(long)]
    h: Option<f64>,
    /// Kernel bandwidth of the normal rule.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Offset of the square-root transform.
    #[arg(long, default_value_t = 0.25)]
    q: f64,
    /// NPMLE grid size.
    #[arg(long, default_value_t = 400)]
    grid_size: usize,
}

impl EstimatorArgs {
    fn build(&self) -> Result<Estimator, Error> {
        let missing = |flag: &str| Error::InvalidArgument(format!("this estimator needs --{flag}"));
        Ok(match self.estimator {
            Family::Naive => Estimator::Naive,
            Family::Robbins => Estimator::Robbins,
            Family::Adjusted => Estimator::Adjusted {
                h: self.h.ok_or_else(|| missing("h"))?,
            },
            Family::Normal => Estimator::Normal {
                bandwidth: self.bandwidth.ok_or_else(|| missing("bandwidth"))?,
                q: self.q,
            },
            Family::Kl => Estimator::Kl,
            Family::Npmle => Estimator::Npmle {
                grid_size: self.grid_size,
            },
        })
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, value_parser = parse_format, default_value = "text")]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<Format, Error> {
    s.parse()
}

fn command_line() -> String {
    std::env::args().skip(1).collect::<Vec<_>>().join(" ")
}

fn emit(doc: &ReportDocument, output: &OutputArgs) -> Result<(), Error> {
    let text = doc.render(output.format)?;
    match &output.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let command = command_line();
    match cli.command {
        Command::Estimate {
            input,
            estimator,
            output,
        } => {
            let (sample, _) = ingest_counts(&input, false)?;
            let est = estimator.build()?;
            let rule = est.fit(&sample)?;
            let fitted = apply_rule(&rule, &sample)?;
            let payload = Payload::Rule {
                estimator: est.tag(),
                parameter: est.parameter(),
                rule: rule
                    .iter()
                    .map(|(y, lambda_hat)| RuleRow { y, lambda_hat })
                    .collect(),
                observations: sample
                    .counts()
                    .iter()
                    .zip(&fitted)
                    .enumerate()
                    .map(|(index, (&y, &lambda_hat))| ObservationRow {
                        index,
                        y,
                        lambda_hat,
                    })
                    .collect(),
            };
            emit(
                &ReportDocument::new(Metadata::now(command, None), payload),
                &output,
            )
        }
        Command::Simulate {
            table,
            lambda_spec,
            reps,
            seed,
            h_grid,
            bandwidth_grid,
            output,
        } => {
            let preset = table.unwrap_or(TablePreset::Table1);
            let lambda = match lambda_spec {
                Some(spec) => spec,
                None => preset.lambda(),
            };
            let mut estimators = vec![Estimator::Naive, Estimator::Robbins];
            let h_grid = h_grid.unwrap_or_else(|| preset.adjusted_grid());
            estimators.extend(h_grid.into_iter().map(|h| Estimator::Adjusted { h }));
            let bandwidths = bandwidth_grid.unwrap_or_else(|| preset.bandwidth_grid());
            for q in [0.0, 0.25] {
                estimators.extend(
                    bandwidths
                        .iter()
                        .map(|&bandwidth| Estimator::Normal { bandwidth, q }),
                );
            }
            let cfg = ExperimentConfig {
                lambda,
                reps: reps.unwrap_or_else(|| preset.default_reps()),
                estimators,
                seed,
            };
            let report = run_experiment(&cfg)?;
            let doc =
                ReportDocument::new(Metadata::now(command, Some(seed)), Payload::risk(report));
            emit(&doc, &output)
        }
        Command::Cv {
            input,
            p,
            k,
            h_grid,
            estimator,
            q,
            seed,
            output,
        } => {
            let (sample, _) = ingest_counts(&input, false)?;
            let cfg = CvConfig { p, h_grid, k, seed };
            let family = match estimator {
                CvFamily::Adjusted => CvEstimator::AdjustedRobbins,
                CvFamily::Normal => CvEstimator::ModifiedNormal { q },
            };
            let result = select_h(&sample, &cfg, family)?;
            let name = family.with_parameter(0.0).tag();
            let doc = ReportDocument::new(
                Metadata::now(command, Some(seed)),
                Payload::cv(name, result),
            );
            emit(&doc, &output)
        }
        Command::BayesRisk {
            lambda_spec,
            output,
        } => {
            let value = bayes_benchmark(&make_lambda(&lambda_spec)?)?;
            let payload = Payload::Scalar {
                name: "n_bayes".into(),
                value,
            };
            emit(
                &ReportDocument::new(Metadata::now(command, None), payload),
                &output,
            )
        }
        Command::EmpiricalRisk {
            input,
            estimator,
            output,
        } => {
            let (sample, targets) = ingest_counts(&input, true)?;
            let targets = targets.expect("paired ingestion returns targets");
            let rule = estimator.build()?.fit(&sample)?;
            let value = empirical_risk(&rule, &sample, &targets)?;
            let payload = Payload::Scalar {
                name: "empirical_risk".into(),
                value,
            };
            emit(
                &ReportDocument::new(Metadata::now(command, None), payload),
                &output,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
