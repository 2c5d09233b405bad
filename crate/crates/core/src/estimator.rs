//! Estimator families that can be fitted on a count sample.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::counts::{empirical_pmf, CountSample, DecisionRule, EmpiricalPmf};
use crate::error::Result;
use crate::losses::kl_plugin_rule;
use crate::normal::modified_normal_pmf;
use crate::npmle::{fit_npmle_pmf, npmle_rule, NpmleConfig};
use crate::robbins::{adjusted_robbins_pmf, classical_rule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Estimator {
    /// `λ̂_i = Y_i`.
    Naive,
    /// Robbins' plug-in rule, no smoothing or monotonization.
    Robbins,
    /// `Δ_h`.
    Adjusted { h: f64 },
    /// `Δ_{N,h}` with kernel bandwidth `bandwidth` and offset `q`.
    Normal { bandwidth: f64, q: f64 },
    /// Monotonized plug-in rule for the KL loss.
    Kl,
    /// Bayes rule of the fitted NPMLE prior.
    Npmle { grid_size: usize },
}

impl Estimator {
    /// Family name as it appears in reports.
    pub fn tag(&self) -> String {
        match self {
            Estimator::Naive => "naive".into(),
            Estimator::Robbins => "robbins".into(),
            Estimator::Adjusted { .. } => "adjusted".into(),
            Estimator::Normal { q, .. } => format!("normal(q={q})"),
            Estimator::Kl => "kl".into(),
            Estimator::Npmle { .. } => "npmle".into(),
        }
    }

    /// The smoothing parameter reported alongside the tag.
    pub fn parameter(&self) -> Option<f64> {
        match *self {
            Estimator::Adjusted { h } => Some(h),
            Estimator::Normal { bandwidth, .. } => Some(bandwidth),
            _ => None,
        }
    }

    pub fn fit(&self, sample: &CountSample) -> Result<DecisionRule> {
        self.fit_pmf(&empirical_pmf(sample))
    }

    /// Fits the rule from the empirical pmf. All families here depend on
    /// the sample only through it.
    pub fn fit_pmf(&self, pmf: &EmpiricalPmf) -> Result<DecisionRule> {
        match *self {
            Estimator::Naive => {
                let support = pmf.support();
                let values = support.iter().map(|&y| y as f64).collect();
                DecisionRule::new(support, values, true)
            }
            Estimator::Robbins => Ok(classical_rule(pmf)),
            Estimator::Adjusted { h } => adjusted_robbins_pmf(pmf, h),
            Estimator::Normal { bandwidth, q } => modified_normal_pmf(pmf, bandwidth, q),
            Estimator::Kl => Ok(kl_plugin_rule(pmf)),
            Estimator::Npmle { grid_size } => {
                let cfg = NpmleConfig {
                    grid_size,
                    ..NpmleConfig::default()
                };
                let fit = fit_npmle_pmf(pmf, &cfg)?;
                npmle_rule(&fit, pmf.max_support())
            }
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parameter() {
            Some(p) => write!(f, "{}[{}]", self.tag(), p),
            None => f.write_str(&self.tag()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::apply_rule;

    #[test]
    fn naive_is_identity() {
        let s = CountSample::new(vec![4, 0, 9, 4]).unwrap();
        let out = apply_rule(&Estimator::Naive.fit(&s).unwrap(), &s).unwrap();
        assert_eq!(out, vec![4.0, 0.0, 9.0, 4.0]);
    }

    #[test]
    fn tags() {
        assert_eq!(
            Estimator::Normal {
                bandwidth: 0.5,
                q: 0.25
            }
            .tag(),
            "normal(q=0.25)"
        );
        assert_eq!(Estimator::Adjusted { h: 1.8 }.to_string(), "adjusted[1.8]");
        assert_eq!(Estimator::Robbins.parameter(), None);
    }
}
