//! Loss functions, exact Bayes rules for a known discrete prior, and the
//! plug-in rule for the KL-type loss.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::counts::{ln_poisson_pmf_unchecked, DecisionRule, DiscretePrior, EmpiricalPmf};
use crate::error::{invalid, Error, Result};
use crate::robbins::isotonize_clamped;

/// Stop summing over `y` once this much marginal mass is covered.
const MASS_COVERAGE: f64 = 1.0 - 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `Σ (λ - λ̂)²`
    L2,
    /// `Σ (√λ - √λ̂)²`
    Hellinger,
    /// `Σ (λ - λ̂)² / λ`
    Kl,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::L2 => "l2",
            LossKind::Hellinger => "hellinger",
            LossKind::Kl => "kl",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(LossKind::L2),
            "hellinger" | "h" => Ok(LossKind::Hellinger),
            "kl" => Ok(LossKind::Kl),
            other => Err(invalid(format!("unknown loss '{other}'"))),
        }
    }
}

/// Summed loss between true means and estimates.
pub fn loss(kind: LossKind, lambda_true: &[f64], lambda_hat: &[f64]) -> Result<f64> {
    if lambda_true.len() != lambda_hat.len() {
        return Err(Error::LengthMismatch {
            left: lambda_true.len(),
            right: lambda_hat.len(),
        });
    }
    let pairs = lambda_true.iter().zip(lambda_hat);
    match kind {
        LossKind::L2 => Ok(pairs.map(|(l, a)| (l - a).powi(2)).sum()),
        LossKind::Hellinger => pairs
            .map(|(&l, &a)| {
                if l < 0.0 || a < 0.0 {
                    Err(invalid("Hellinger loss needs nonnegative means"))
                } else {
                    Ok((l.sqrt() - a.sqrt()).powi(2))
                }
            })
            .sum(),
        LossKind::Kl => pairs
            .enumerate()
            .map(|(i, (&l, &a))| {
                if l < 0.0 {
                    Err(invalid("KL loss needs nonnegative true means"))
                } else if l == 0.0 {
                    if a == 0.0 {
                        Ok(0.0)
                    } else {
                        Err(Error::InfiniteKlLoss(i))
                    }
                } else {
                    Ok((l - a).powi(2) / l)
                }
            })
            .sum(),
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let peak = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + terms.map(|t| (t - peak).exp()).sum::<f64>().ln()
}

/// Posterior weights of the prior atoms given `Y = y`, plus the log
/// marginal `ln P_G(y)`.
pub(crate) fn posterior(prior: &DiscretePrior, y: u64) -> Option<(Vec<f64>, f64)> {
    let logs: Vec<f64> = prior
        .iter()
        .map(|(a, w)| w.ln() + ln_poisson_pmf_unchecked(y, a))
        .collect();
    let ln_marginal = log_sum_exp(logs.iter().copied());
    if ln_marginal == f64::NEG_INFINITY {
        return None;
    }
    let weights = logs.iter().map(|l| (l - ln_marginal).exp()).collect();
    Some((weights, ln_marginal))
}

/// Posterior mean `E(Λ | Y = y)` under `prior` for `y = 0..=y_max`.
pub fn bayes_rule(prior: &DiscretePrior, y_max: u64) -> Result<DecisionRule> {
    let mut values = Vec::with_capacity(y_max as usize + 1);
    for y in 0..=y_max {
        let (post, _) = posterior(prior, y).ok_or(Error::Underflow(y))?;
        let mean: f64 = post.iter().zip(prior.atoms()).map(|(p, a)| p * a).sum();
        // The posterior mean is nondecreasing in y; remove rounding wiggles.
        let floor = values.last().copied().unwrap_or(f64::NEG_INFINITY);
        values.push(mean.max(floor));
    }
    DecisionRule::new((0..=y_max).collect(), values, true)
}

/// Per-coordinate Bayes risk under squared error, `E Var(Λ | Y)`.
pub fn bayes_risk_l2(prior: &DiscretePrior) -> f64 {
    let top = prior.atoms()[prior.len() - 1];
    let hard_cap = (top + 40.0 * top.sqrt() + 200.0) as u64;
    let mut covered = 0.0;
    let mut risk = 0.0;
    for y in 0..=hard_cap {
        let Some((post, ln_marginal)) = posterior(prior, y) else {
            continue;
        };
        let marginal = ln_marginal.exp();
        let mean: f64 = post.iter().zip(prior.atoms()).map(|(p, a)| p * a).sum();
        let var: f64 = post
            .iter()
            .zip(prior.atoms())
            .map(|(p, a)| p * (a - mean).powi(2))
            .sum();
        risk += marginal * var;
        covered += marginal;
        if covered >= MASS_COVERAGE {
            break;
        }
    }
    risk
}

/// Plug-in rule for the KL loss: `y P̂(y) / P̂(y-1)` for `y >= 1`
/// (zero when `y - 1` is unobserved) and `0` at `y = 0`, then isotonized
/// with multiplicity weights and clamped at zero.
pub fn kl_plugin_rule(pmf: &EmpiricalPmf) -> DecisionRule {
    let raw: Vec<f64> = pmf
        .entries()
        .iter()
        .map(|e| {
            if e.y == 0 {
                return 0.0;
            }
            let below = pmf.prob(e.y - 1);
            if below == 0.0 {
                0.0
            } else {
                e.y as f64 * e.probability / below
            }
        })
        .collect();
    isotonize_clamped(pmf, &raw)
}

/// The KL-loss Bayes decision at `y = 0`,
/// `∫ e^{-λ} dG / ∫ λ^{-1} e^{-λ} dG`. Any atom at zero forces `0`.
pub fn kl_zero_decision(prior: &DiscretePrior) -> f64 {
    if prior.atoms()[0] == 0.0 {
        return 0.0;
    }
    let (num, den) = prior.iter().fold((0.0, 0.0), |(n, d), (a, w)| {
        let e = w * (-a).exp();
        (n + e, d + e / a)
    });
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        let l = [3.0, 0.5, 9.0];
        for kind in [LossKind::L2, LossKind::Hellinger, LossKind::Kl] {
            assert_eq!(loss(kind, &l, &l).unwrap(), 0.0);
        }
        assert_eq!(
            loss(LossKind::L2, &[10.0, 10.0], &[9.0, 11.0]).unwrap(),
            2.0
        );
        assert_eq!(loss(LossKind::Hellinger, &[4.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(
            loss(LossKind::Kl, &[2.0, 4.0], &[1.0, 6.0]).unwrap(),
            0.5 + 1.0
        );
    }

    #[test]
    fn loss_errors() {
        let e = loss(LossKind::Kl, &[1.0, 0.0], &[1.0, 0.3]).unwrap_err();
        assert!(matches!(e, Error::InfiniteKlLoss(1)));
        assert!(e.to_string().contains("infinite KL loss"));
        assert_eq!(loss(LossKind::Kl, &[0.0], &[0.0]).unwrap(), 0.0);
        assert!(loss(LossKind::Hellinger, &[1.0], &[-1.0]).is_err());
        assert!(loss(LossKind::L2, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn bayes_rule_point_mass() {
        let r = bayes_rule(&DiscretePrior::point_mass(7.0).unwrap(), 30).unwrap();
        assert!(r.values().iter().all(|v| (v - 7.0).abs() < 1e-12));
    }

    #[test]
    fn bayes_rule_two_atoms() {
        let prior = DiscretePrior::new(vec![5.0, 15.0], vec![0.5, 0.5]).unwrap();
        let r = bayes_rule(&prior, 3).unwrap();
        let (a, b) = ((-5.0f64).exp(), (-15.0f64).exp());
        let expect = (5.0 * a + 15.0 * b) / (a + b);
        assert!((r.get(0).unwrap() - expect).abs() < 1e-12);
        assert!((r.get(0).unwrap() - 5.000454).abs() < 1e-6);
    }

    #[test]
    fn bayes_rule_underflow_diagnostic() {
        let prior = DiscretePrior::point_mass(0.0).unwrap();
        assert!(matches!(bayes_rule(&prior, 2), Err(Error::Underflow(1))));
    }

    #[test]
    fn bayes_risk_point_mass_is_zero() {
        assert!(bayes_risk_l2(&DiscretePrior::point_mass(4.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn bayes_risk_brute_force() {
        // Double sum over y <= 40 and the two atoms, written out directly.
        let prior = DiscretePrior::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let mut fact = 1.0;
        let mut oracle = 0.0;
        for y in 0..=40 {
            if y > 0 {
                fact *= y as f64;
            }
            let f1 = 0.5 * (-1.0f64).exp() / fact;
            let f2 = 0.5 * (-2.0f64).exp() * 2f64.powi(y) / fact;
            let m = f1 + f2;
            let mean = (f1 + 2.0 * f2) / m;
            let second = (f1 + 4.0 * f2) / m;
            oracle += m * (second - mean * mean);
        }
        assert!((bayes_risk_l2(&prior) - oracle).abs() < 1e-12);
        assert!(bayes_risk_l2(&prior) <= prior.variance());
    }

    #[test]
    fn kl_plugin_examples() {
        let pmf = EmpiricalPmf::from_multiplicities([(0, 1), (1, 2), (2, 1)]).unwrap();
        let r = kl_plugin_rule(&pmf);
        assert_eq!(r.values()[0], 0.0);
        assert!((r.values()[1] - 5.0 / 3.0).abs() < 1e-15);
        assert!((r.values()[2] - 5.0 / 3.0).abs() < 1e-15);

        let pmf = EmpiricalPmf::from_multiplicities([(4, 10)]).unwrap();
        assert_eq!(kl_plugin_rule(&pmf).values(), &[0.0]);
    }

    #[test]
    fn kl_zero_decision_cases() {
        let with_zero = DiscretePrior::new(vec![0.0, 3.0], vec![0.1, 0.9]).unwrap();
        assert_eq!(kl_zero_decision(&with_zero), 0.0);
        // A point mass at λ0 gives λ0.
        let point = DiscretePrior::point_mass(2.5).unwrap();
        assert!((kl_zero_decision(&point) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn loss_kind_parsing() {
        assert_eq!("L2".parse::<LossKind>().unwrap(), LossKind::L2);
        assert_eq!("kl".parse::<LossKind>().unwrap(), LossKind::Kl);
        assert!("abs".parse::<LossKind>().is_err());
    }
}
