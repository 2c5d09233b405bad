//! Monte Carlo risk estimation for fixed mean vectors.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counts::{apply_rule, empirical_pmf, CountSample, DecisionRule, DiscretePrior};
use crate::error::{invalid, Error, Result};
use crate::estimator::Estimator;
use crate::losses::bayes_risk_l2;
use crate::sampling::{poisson, stream};

/// A deterministic vector of Poisson means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaConfig {
    Constant {
        value: f64,
        n: usize,
    },
    /// `n` evenly spaced values from `lo` to `hi`, both included.
    Linspace {
        lo: f64,
        hi: f64,
        n: usize,
    },
    Concat {
        parts: Vec<LambdaConfig>,
    },
}

impl LambdaConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            LambdaConfig::Constant { value, n } => {
                if *n == 0 || !value.is_finite() || *value < 0.0 {
                    return Err(invalid(
                        "constant lambda needs n >= 1 and a finite value >= 0",
                    ));
                }
            }
            LambdaConfig::Linspace { lo, hi, n } => {
                if *n == 0 || !lo.is_finite() || !hi.is_finite() || *lo < 0.0 || *hi < 0.0 {
                    return Err(invalid(
                        "linspace lambda needs n >= 1 and finite bounds >= 0",
                    ));
                }
                if *n == 1 && lo != hi {
                    return Err(invalid("linspace with n = 1 needs lo == hi"));
                }
            }
            LambdaConfig::Concat { parts } => {
                if parts.is_empty() {
                    return Err(invalid("empty lambda concatenation"));
                }
                parts.iter().try_for_each(LambdaConfig::validate)?;
            }
        }
        Ok(())
    }
}

/// Parses `constant:C:N`, `linspace:LO:HI:N`, or several of those joined
/// with `+`.
impl FromStr for LambdaConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('+').map(str::trim).collect();
        if parts.len() > 1 {
            let parts = parts
                .into_iter()
                .map(str::parse)
                .collect::<Result<Vec<LambdaConfig>>>()?;
            return Ok(LambdaConfig::Concat { parts });
        }
        let bad = || invalid(format!("cannot parse lambda spec '{s}'"));
        let fields: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
        let count = |x: &str| x.parse::<usize>().map_err(|_| bad());
        let cfg = match fields.as_slice() {
            ["constant", c, n] => LambdaConfig::Constant {
                value: num(c)?,
                n: count(n)?,
            },
            ["linspace", lo, hi, n] => LambdaConfig::Linspace {
                lo: num(lo)?,
                hi: num(hi)?,
                n: count(n)?,
            },
            _ => return Err(bad()),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for LambdaConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaConfig::Constant { value, n } => write!(f, "constant:{value}:{n}"),
            LambdaConfig::Linspace { lo, hi, n } => write!(f, "linspace:{lo}:{hi}:{n}"),
            LambdaConfig::Concat { parts } => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
        }
    }
}

pub fn make_lambda(cfg: &LambdaConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(build_lambda(cfg))
}

fn build_lambda(cfg: &LambdaConfig) -> Vec<f64> {
    match *cfg {
        LambdaConfig::Constant { value, n } => vec![value; n],
        LambdaConfig::Linspace { lo, hi, n } => {
            if n == 1 {
                return vec![lo];
            }
            let step = (hi - lo) / (n - 1) as f64;
            let mut v: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
            v[n - 1] = hi;
            v
        }
        LambdaConfig::Concat { ref parts } => parts.iter().flat_map(build_lambda).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub lambda: LambdaConfig,
    pub reps: usize,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.lambda.validate()?;
        if self.reps == 0 {
            return Err(invalid("reps must be at least 1"));
        }
        if self.estimators.is_empty() {
            return Err(invalid("no estimators to evaluate"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub estimator: String,
    pub parameter: Option<f64>,
    /// Mean total squared-error loss over replications.
    pub mean_loss: f64,
    /// Standard deviation of the per-replication losses over `√reps`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmarks {
    /// Risk of `λ̂ = Y`, which is `Σ λ_i`.
    pub naive: f64,
    /// `n B(λ)`.
    pub n_bayes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
    pub benchmarks: Benchmarks,
}

impl RiskReport {
    pub fn row(&self, estimator: &Estimator) -> Option<&RiskRow> {
        let tag = estimator.tag();
        let param = estimator.parameter();
        self.rows
            .iter()
            .find(|r| r.estimator == tag && r.parameter == param)
    }
}

/// Draws `Y_i ~ Po(λ_i)` independently.
pub fn draw_counts<R: rand::Rng + ?Sized>(lambda: &[f64], rng: &mut R) -> Result<CountSample> {
    CountSample::new(lambda.iter().map(|&l| poisson(rng, l)).collect())
}

/// Total squared-error loss of every estimator in one replication. All
/// estimators see the same draw.
fn replicate(lambda: &[f64], estimators: &[Estimator], seed: u64, rep: u64) -> Result<Vec<f64>> {
    let mut rng = stream(seed, rep);
    let y = draw_counts(lambda, &mut rng)?;
    let pmf = empirical_pmf(&y);
    estimators
        .iter()
        .map(|e| {
            let rule = e.fit_pmf(&pmf)?;
            let fitted = apply_rule(&rule, &y)?;
            Ok(fitted
                .iter()
                .zip(lambda)
                .map(|(a, l)| (a - l).powi(2))
                .sum())
        })
        .collect()
}

/// Runs the experiment. Replication `r` draws from stream `(seed, r)` and
/// losses are reduced in replication order, so the report is identical for
/// any number of worker threads.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RiskReport> {
    cfg.validate()?;
    let lambda = build_lambda(&cfg.lambda);
    let losses: Vec<Vec<f64>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| replicate(&lambda, &cfg.estimators, cfg.seed, rep))
        .collect::<Result<_>>()?;

    let reps = cfg.reps as f64;
    let rows = cfg
        .estimators
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mean = losses.iter().map(|l| l[i]).sum::<f64>() / reps;
            let std_error = if cfg.reps > 1 {
                let ss: f64 = losses.iter().map(|l| (l[i] - mean).powi(2)).sum();
                (ss / (reps - 1.0)).sqrt() / reps.sqrt()
            } else {
                0.0
            };
            RiskRow {
                estimator: e.tag(),
                parameter: e.parameter(),
                mean_loss: mean,
                std_error,
            }
        })
        .collect();
    Ok(RiskReport {
        rows,
        benchmarks: Benchmarks {
            naive: lambda.iter().sum(),
            n_bayes: bayes_benchmark(&lambda)?,
        },
    })
}

/// `n B(λ)`: `n` times the Bayes risk under the empirical distribution of
/// the mean vector.
pub fn bayes_benchmark(lambda: &[f64]) -> Result<f64> {
    if lambda.is_empty() {
        return Err(Error::EmptySample);
    }
    let prior = DiscretePrior::empirical(lambda)?;
    Ok(lambda.len() as f64 * bayes_risk_l2(&prior))
}

/// `Σ (rule(y_i) - z_i)²` against held-out targets.
pub fn empirical_risk(rule: &DecisionRule, y: &CountSample, z_target: &[f64]) -> Result<f64> {
    if y.len() != z_target.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: z_target.len(),
        });
    }
    let fitted = apply_rule(rule, y)?;
    Ok(fitted
        .iter()
        .zip(z_target)
        .map(|(a, z)| (a - z).powi(2))
        .sum())
}

/// Preset mean vectors with their estimator grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TablePreset {
    /// λ evenly spaced on [5, 15], n = 200.
    Table1,
    /// λ evenly spaced on [0, 5], n = 200.
    Table2,
    /// λ ≡ 10, n = 200.
    Table3,
    /// 200 means at 5 and 20 at 15.
    Table4,
    /// λ evenly spaced on [0, 20], n = 30.
    Table5,
    /// λ ≡ 10, n = 500, with the classical rule.
    Example1,
}

impl FromStr for TablePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" => Ok(TablePreset::Table1),
            "2" => Ok(TablePreset::Table2),
            "3" => Ok(TablePreset::Table3),
            "4" => Ok(TablePreset::Table4),
            "5" => Ok(TablePreset::Table5),
            "example1" => Ok(TablePreset::Example1),
            other => Err(invalid(format!("unknown table preset '{other}'"))),
        }
    }
}

impl TablePreset {
    pub fn lambda(&self) -> LambdaConfig {
        match self {
            TablePreset::Table1 => LambdaConfig::Linspace {
                lo: 5.0,
                hi: 15.0,
                n: 200,
            },
            TablePreset::Table2 => LambdaConfig::Linspace {
                lo: 0.0,
                hi: 5.0,
                n: 200,
            },
            TablePreset::Table3 => LambdaConfig::Constant {
                value: 10.0,
                n: 200,
            },
            TablePreset::Table4 => LambdaConfig::Concat {
                parts: vec![
                    LambdaConfig::Constant { value: 5.0, n: 200 },
                    LambdaConfig::Constant { value: 15.0, n: 20 },
                ],
            },
            TablePreset::Table5 => LambdaConfig::Linspace {
                lo: 0.0,
                hi: 20.0,
                n: 30,
            },
            TablePreset::Example1 => LambdaConfig::Constant {
                value: 10.0,
                n: 500,
            },
        }
    }

    pub fn adjusted_grid(&self) -> Vec<f64> {
        match self {
            TablePreset::Table1 => vec![0.0, 0.2, 0.4, 0.8, 1.8, 3.0],
            TablePreset::Table2 => vec![0.0, 0.2, 1.0, 1.8, 2.4, 3.0],
            TablePreset::Table3 => vec![0.0, 0.2, 0.4, 1.0, 2.0, 3.0],
            TablePreset::Table4 => vec![0.0, 0.2, 0.4, 1.2, 2.0, 3.0],
            TablePreset::Table5 => vec![0.0, 0.01, 0.2, 0.4, 1.2, 2.0, 3.0],
            TablePreset::Example1 => vec![0.0, 3.0],
        }
    }

    pub fn bandwidth_grid(&self) -> Vec<f64> {
        match self {
            TablePreset::Table1 => vec![0.2, 0.3, 0.5, 0.7, 0.9, 1.2],
            TablePreset::Table2 => vec![0.2, 0.3, 0.5, 0.8, 1.0, 1.4],
            TablePreset::Table3 => vec![0.2, 0.3, 0.5, 0.7, 0.9, 1.3],
            TablePreset::Table4 => vec![0.2, 0.3, 0.5, 0.9, 1.1, 1.4],
            TablePreset::Table5 => vec![0.2, 0.3, 0.5, 0.9, 1.2, 1.4],
            TablePreset::Example1 => vec![],
        }
    }

    pub fn default_reps(&self) -> usize {
        match self {
            TablePreset::Example1 => 100,
            _ => 1000,
        }
    }

    /// Naive and classical rows, `Δ_h` over the grid, and `Δ_{N,h}` for
    /// `q = 0` and `q = 1/4` over the bandwidth grid.
    pub fn estimators(&self) -> Vec<Estimator> {
        let mut out = vec![Estimator::Naive, Estimator::Robbins];
        out.extend(
            self.adjusted_grid()
                .into_iter()
                .map(|h| Estimator::Adjusted { h }),
        );
        for q in [0.0, 0.25] {
            out.extend(
                self.bandwidth_grid()
                    .into_iter()
                    .map(|bandwidth| Estimator::Normal { bandwidth, q }),
            );
        }
        out
    }

    pub fn config(&self, reps: Option<usize>, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            lambda: self.lambda(),
            reps: reps.unwrap_or_else(|| self.default_reps()),
            estimators: self.estimators(),
            seed,
        }
    }
}
