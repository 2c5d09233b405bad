//! Normal-transform estimator `Δ_{N,h}`.
//!
//! Counts are mapped to `z = 2√(y + q)`, treated as `N(μ, 1)`, and the
//! means are estimated with the Tweedie-type rule `z + ĝ'(z)/ĝ(z)` where
//! `ĝ` is a Gaussian kernel density estimate of the transformed sample.
//! Estimates are mapped back by `λ̂ = μ̂²/4` and made monotone over the
//! observed counts.

use std::f64::consts::PI;

use crate::counts::{empirical_pmf, CountSample, DecisionRule, EmpiricalPmf};
use crate::error::{invalid, Result};
use crate::robbins::isotonize_clamped;

/// Variance-stabilizing transform `2√(y + q)`.
pub fn vst(y: u64, q: f64) -> f64 {
    2.0 * (y as f64 + q).sqrt()
}

/// A transformed sample with unit noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedSample {
    z_values: Vec<f64>,
    q: f64,
}

impl TransformedSample {
    pub fn new(sample: &CountSample, q: f64) -> Result<Self> {
        check_q(q)?;
        Ok(Self {
            z_values: sample.counts().iter().map(|&y| vst(y, q)).collect(),
            q,
        })
    }

    pub fn z_values(&self) -> &[f64] {
        &self.z_values
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn sigma2(&self) -> f64 {
        1.0
    }
}

fn check_q(q: f64) -> Result<()> {
    if !q.is_finite() || q < 0.0 {
        return Err(invalid(format!(
            "transform offset q must be finite and >= 0, got {q}"
        )));
    }
    Ok(())
}

fn check_bandwidth(b: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!(
            "bandwidth must be finite and > 0, got {b}"
        )));
    }
    Ok(())
}

/// Gaussian kernel density estimate with its analytic derivative.
///
/// Points may carry weights (multiplicities); the estimate is normalized by
/// the total weight.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEstimate {
    bandwidth: f64,
    points: Vec<f64>,
    weights: Vec<f64>,
    total_weight: f64,
}

impl KernelEstimate {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `ĝ(z)`.
    pub fn density(&self, z: f64) -> f64 {
        self.eval(z).0
    }

    /// `ĝ'(z)`.
    pub fn derivative(&self, z: f64) -> f64 {
        self.eval(z).1
    }

    /// `(ĝ(z), ĝ'(z))`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let b = self.bandwidth;
        let norm = 1.0 / (b * (2.0 * PI).sqrt() * self.total_weight);
        let (mut g, mut dg) = (0.0, 0.0);
        for (&p, &w) in self.points.iter().zip(&self.weights) {
            let u = (z - p) / b;
            let k = w * (-0.5 * u * u).exp();
            g += k;
            dg -= k * u / b;
        }
        (g * norm, dg * norm)
    }

    /// `ĝ'(z) / ĝ(z)`, evaluated with the largest kernel term factored out
    /// so it stays finite far from the data.
    pub fn score(&self, z: f64) -> f64 {
        let b = self.bandwidth;
        let exponent = |p: f64| -0.5 * ((z - p) / b).powi(2);
        let peak = self
            .points
            .iter()
            .map(|&p| exponent(p))
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for (&p, &w) in self.points.iter().zip(&self.weights) {
            let k = w * (exponent(p) - peak).exp();
            num += k * (p - z);
            den += k;
        }
        num / (den * b * b)
    }
}

/// Kernel estimate from unweighted points.
pub fn kernel_density(zs: &[f64], bandwidth: f64) -> Result<KernelEstimate> {
    weighted_kernel_density(zs.to_vec(), vec![1.0; zs.len()], bandwidth)
}

pub(crate) fn weighted_kernel_density(
    points: Vec<f64>,
    weights: Vec<f64>,
    bandwidth: f64,
) -> Result<KernelEstimate> {
    check_bandwidth(bandwidth)?;
    if points.is_empty() {
        return Err(crate::Error::EmptySample);
    }
    let total_weight = weights.iter().sum();
    Ok(KernelEstimate {
        bandwidth,
        points,
        weights,
        total_weight,
    })
}

/// The normal empirical Bayes rule `z -> z + ĝ'(z)/ĝ(z)` with `σ² = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalRule {
    kernel: KernelEstimate,
}

impl NormalRule {
    pub fn eval(&self, z: f64) -> f64 {
        z + self.kernel.score(z)
    }

    pub fn kernel(&self) -> &KernelEstimate {
        &self.kernel
    }
}

pub fn normal_rule(zs: &[f64], bandwidth: f64) -> Result<NormalRule> {
    Ok(NormalRule {
        kernel: kernel_density(zs, bandwidth)?,
    })
}

/// `Δ_{N,h}` fitted on a precomputed pmf.
///
/// The kernel is summed over distinct values weighted by multiplicity,
/// which is the same estimate as summing over every observation.
pub fn modified_normal_pmf(pmf: &EmpiricalPmf, bandwidth: f64, q: f64) -> Result<DecisionRule> {
    check_q(q)?;
    let zs: Vec<f64> = pmf.entries().iter().map(|e| vst(e.y, q)).collect();
    let kernel = weighted_kernel_density(zs.clone(), pmf.weights(), bandwidth)?;
    let rule = NormalRule { kernel };
    let raw: Vec<f64> = zs
        .iter()
        .map(|&z| {
            let mu = rule.eval(z).max(0.0);
            mu * mu / 4.0
        })
        .collect();
    Ok(isotonize_clamped(pmf, &raw))
}

/// The modified normal rule `Δ_{N,h}` on the observed values of `sample`.
pub fn modified_normal(sample: &CountSample, bandwidth: f64, q: f64) -> Result<DecisionRule> {
    modified_normal_pmf(&empirical_pmf(sample), bandwidth, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vst_values() {
        assert_eq!(vst(0, 0.25), 1.0);
        assert_eq!(vst(0, 0.0), 0.0);
        assert_eq!(vst(4, 0.0), 4.0);
    }

    #[test]
    fn transformed_sample() {
        let s = CountSample::new(vec![0, 4, 12]).unwrap();
        let t = TransformedSample::new(&s, 0.25).unwrap();
        assert_eq!(t.z_values()[0], 1.0);
        assert!((t.z_values()[1] - 2.0 * 4.25f64.sqrt()).abs() < 1e-15);
        assert_eq!(t.sigma2(), 1.0);
        assert!(TransformedSample::new(&s, -1.0).is_err());
    }

    #[test]
    fn symmetric_derivatives_vanish() {
        let k = kernel_density(&[1.3], 0.7).unwrap();
        assert!(k.derivative(1.3).abs() < 1e-15);
        let k = kernel_density(&[-2.0, 2.0], 0.9).unwrap();
        assert!(k.derivative(0.0).abs() < 1e-15);
        assert!(k.density(0.0) > 0.0);
    }

    #[test]
    fn bandwidth_validated() {
        assert!(kernel_density(&[1.0], 0.0).is_err());
        assert!(kernel_density(&[1.0], -1.0).is_err());
        assert!(kernel_density(&[], 1.0).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        let zs = [0.5, 1.0, 4.0, 4.2, 7.5];
        let k = kernel_density(&zs, 0.6).unwrap();
        // Composite Simpson on [-10, 20].
        let (a, b, m) = (-10.0, 20.0, 6000);
        let step = (b - a) / m as f64;
        let mut total = k.density(a) + k.density(b);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            total += w * k.density(a + i as f64 * step);
        }
        total *= step / 3.0;
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn normal_rule_examples() {
        let r = normal_rule(&[3.0], 0.5).unwrap();
        assert!((r.eval(3.0) - 3.0).abs() < 1e-15);

        let r = normal_rule(&[0.0, 2.0], 1.0).unwrap();
        assert!((r.eval(1.0) - 1.0).abs() < 1e-15);

        // All points at c: the rule is z + (c - z)/b², which returns c at c.
        let r = normal_rule(&[2.5; 4], 0.8).unwrap();
        assert!((r.eval(2.5) - 2.5).abs() < 1e-15);
        let z = 1.0;
        assert!((r.eval(z) - (z + (2.5 - z) / 0.64)).abs() < 1e-12);
    }

    #[test]
    fn score_stable_far_from_data() {
        let r = normal_rule(&[0.0, 1.0], 0.1).unwrap();
        let v = r.eval(50.0);
        assert!(v.is_finite());
        // Dominated by the nearest point: 50 + (1 - 50)/0.01.
        assert!((v - (50.0 - 49.0 / 0.01)).abs() < 1e-6);
    }

    #[test]
    fn modified_normal_degenerate() {
        let s = CountSample::new(vec![6; 5]).unwrap();
        let r = modified_normal(&s, 0.5, 0.25).unwrap();
        assert_eq!(r.domain(), &[6]);
        assert!((r.values()[0] - 6.25).abs() < 1e-12);

        let s = CountSample::new(vec![0; 5]).unwrap();
        let r = modified_normal(&s, 0.5, 0.0).unwrap();
        assert_eq!(r.values(), &[0.0]);
    }

    #[test]
    fn weighted_kernel_matches_per_observation() {
        let s = CountSample::new(vec![1, 1, 3, 5, 5, 5, 9]).unwrap();
        let zs: Vec<f64> = s.counts().iter().map(|&y| vst(y, 0.25)).collect();
        let flat = normal_rule(&zs, 0.4).unwrap();
        let pmf = empirical_pmf(&s);
        let grouped = weighted_kernel_density(
            pmf.entries().iter().map(|e| vst(e.y, 0.25)).collect(),
            pmf.weights(),
            0.4,
        )
        .unwrap();
        for &z in &zs {
            assert!((flat.kernel().score(z) - grouped.score(z)).abs() < 1e-12);
            assert!((flat.kernel().density(z) - grouped.density(z)).abs() < 1e-12);
        }
    }
}
