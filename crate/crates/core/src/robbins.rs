//! Robbins' plug-in rule and the adjusted rule `Δ_h`.
//!
//! `Δ_h` is built in three stages:
//!
//! 1. corrupt the empirical pmf with independent `Po(h)` noise and take the
//!    Robbins ratio of the smoothed pmf, minus `h` ([`delta_h1`]);
//! 2. average that rule over the noise, `y -> E δ_{h,1}(y + N)` ([`delta_h2`]);
//! 3. project onto nondecreasing functions over the observed values, with
//!    each value weighted by its multiplicity, then clamp at zero
//!    ([`adjusted_robbins`]).
//!
//! Stages 1 and 2 keep negative values; only the final rule is clamped.

use crate::counts::{
    empirical_pmf, poisson_pmf_table, poisson_truncation, CountSample, DecisionRule, EmpiricalPmf,
};
use crate::error::{invalid, Result};
use crate::isotonic::pava_slices;

/// Tail mass of `Po(h)` dropped when truncating the noise distribution.
pub const NOISE_TAIL: f64 = 1e-12;

fn check_h(h: f64) -> Result<()> {
    if !h.is_finite() || h < 0.0 {
        return Err(invalid(format!(
            "smoothing parameter h must be finite and >= 0, got {h}"
        )));
    }
    Ok(())
}

/// Classical Robbins rule `(y+1) P̂(y+1) / P̂(y)` on the observed values.
pub fn classical_rule(pmf: &EmpiricalPmf) -> DecisionRule {
    let (domain, values) = pmf
        .entries()
        .iter()
        .map(|e| (e.y, (e.y + 1) as f64 * pmf.prob(e.y + 1) / e.probability))
        .unzip();
    DecisionRule::new(domain, values, false).expect("pmf support is increasing")
}

/// The empirical pmf convolved with `Po(h)`, tabulated on `0..=z_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedPmf {
    h: f64,
    min_support: u64,
    values: Vec<f64>,
}

impl SmoothedPmf {
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn z_max(&self) -> u64 {
        (self.values.len() - 1) as u64
    }

    /// Smallest observed value; `δ_{h,1}` is defined from here on.
    pub fn min_support(&self) -> u64 {
        self.min_support
    }

    /// `P̃_Z(z)`; zero beyond `z_max`.
    pub fn prob(&self, z: u64) -> f64 {
        self.values.get(z as usize).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `P̃_Z(z) = Σ_{i ≤ z} P̂(i) e^{-h} h^{z-i} / (z-i)!` for `z = 0..=z_max`.
///
/// `z_max` is the largest observation plus `J + 1`, where `J` is the
/// smallest truncation point with `P(N > J) < 1e-12`. That leaves room for
/// `δ_{h,2}` to evaluate `δ_{h,1}` up to `max + J`.
pub fn smoothed_pmf(pmf: &EmpiricalPmf, h: f64) -> Result<SmoothedPmf> {
    check_h(h)?;
    let j = poisson_truncation(h, NOISE_TAIL);
    let z_max = pmf.max_support() as usize + j + 1;
    let noise = poisson_pmf_table(h, z_max);
    let mut values = vec![0.0; z_max + 1];
    for e in pmf.entries() {
        let y = e.y as usize;
        for (z, v) in values.iter_mut().enumerate().skip(y) {
            *v += e.probability * noise[z - y];
        }
    }
    Ok(SmoothedPmf {
        h,
        min_support: pmf.min_support(),
        values,
    })
}

/// Stage-1 rule `(z+1) P̃_Z(z+1) / P̃_Z(z) - h`, with `0/0 -> 0`.
///
/// Defined for `z` in `[min support, z_max - 1]`.
pub fn delta_h1(spmf: &SmoothedPmf, z: u64) -> Result<f64> {
    if z < spmf.min_support || z >= spmf.z_max() {
        return Err(invalid(format!(
            "z = {z} outside the truncation range [{}, {}]",
            spmf.min_support,
            spmf.z_max() - 1
        )));
    }
    Ok(delta_h1_unchecked(spmf, z))
}

#[inline]
fn delta_h1_unchecked(spmf: &SmoothedPmf, z: u64) -> f64 {
    let here = spmf.values[z as usize];
    if here == 0.0 {
        return 0.0;
    }
    (z + 1) as f64 * spmf.values[z as usize + 1] / here - spmf.h
}

/// Normalized `Po(h)` weights on `0..=J`.
fn noise_weights(h: f64) -> Vec<f64> {
    let j = poisson_truncation(h, NOISE_TAIL);
    let mut w = poisson_pmf_table(h, j);
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Stage-2 values `E δ_{h,1}(y + N)` on each support point.
fn delta_h2_values(pmf: &EmpiricalPmf, h: f64) -> Result<Vec<f64>> {
    let spmf = smoothed_pmf(pmf, h)?;
    let weights = noise_weights(h);
    let lo = spmf.min_support;
    let stage1: Vec<f64> = (lo..spmf.z_max())
        .map(|z| delta_h1_unchecked(&spmf, z))
        .collect();
    Ok(pmf
        .entries()
        .iter()
        .map(|e| {
            let base = (e.y - lo) as usize;
            weights
                .iter()
                .enumerate()
                .map(|(j, w)| w * stage1[base + j])
                .sum()
        })
        .collect())
}

/// Stage-2 (Rao-Blackwellized) rule on the observed values. The noise sum
/// is truncated where the `Po(h)` tail drops below `1e-12` and renormalized.
pub fn delta_h2(pmf: &EmpiricalPmf, h: f64) -> Result<DecisionRule> {
    let values = delta_h2_values(pmf, h)?;
    Ok(DecisionRule::new(pmf.support(), values, false).expect("pmf support is increasing"))
}

/// Isotonic projection (multiplicity weights) followed by clamping at 0.
pub(crate) fn isotonize_clamped(pmf: &EmpiricalPmf, raw: &[f64]) -> DecisionRule {
    let mut fitted = pava_slices(raw, &pmf.weights());
    fitted.iter_mut().for_each(|v| *v = v.max(0.0));
    DecisionRule::new(pmf.support(), fitted, true).expect("isotonic output is monotone")
}

/// `Δ_h` fitted on a precomputed pmf.
pub fn adjusted_robbins_pmf(pmf: &EmpiricalPmf, h: f64) -> Result<DecisionRule> {
    let raw = delta_h2_values(pmf, h)?;
    Ok(isotonize_clamped(pmf, &raw))
}

/// The adjusted Robbins rule `Δ_h` on the observed values of `sample`.
pub fn adjusted_robbins(sample: &CountSample, h: f64) -> Result<DecisionRule> {
    adjusted_robbins_pmf(&empirical_pmf(sample), h)
}

/// `δ_{h,2}(y_max) / h` for each `h`, a diagnostic of the bias at the
/// largest observation for small `h`.
pub fn delta_h2_at_ymax_slope(sample: &CountSample, h_grid: &[f64]) -> Result<Vec<f64>> {
    let pmf = empirical_pmf(sample);
    let y_max = pmf.max_support();
    h_grid
        .iter()
        .map(|&h| {
            if h.is_nan() || h <= 0.0 {
                return Err(invalid(format!("slope diagnostic needs h > 0, got {h}")));
            }
            let rule = delta_h2(&pmf, h)?;
            Ok(rule.get(y_max).expect("y_max is observed") / h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(pairs: &[(u64, u64)]) -> EmpiricalPmf {
        EmpiricalPmf::from_multiplicities(pairs.iter().copied()).unwrap()
    }

    fn sample(v: &[u64]) -> CountSample {
        CountSample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn classical_examples() {
        let r = classical_rule(&pmf(&[(0, 1), (1, 2), (2, 1)]));
        assert_eq!(r.values(), &[2.0, 1.0, 0.0]);
        assert!(!r.is_monotone());

        let r = classical_rule(&pmf(&[(4, 9)]));
        assert_eq!(r.values(), &[0.0]);

        let r = classical_rule(&pmf(&[(0, 1), (2, 1)]));
        assert_eq!(r.domain(), &[0, 2]);
        assert_eq!(r.values(), &[0.0, 0.0]);
    }

    #[test]
    fn smoothing_point_mass_at_zero() {
        let s = smoothed_pmf(&pmf(&[(0, 3)]), 1.0).unwrap();
        let mut fact = 1.0;
        for z in 0..s.z_max() {
            if z > 0 {
                fact *= z as f64;
            }
            assert!((s.prob(z) - (-1.0f64).exp() / fact).abs() < 1e-15);
        }
    }

    #[test]
    fn smoothing_identity_at_zero_h() {
        let p = pmf(&[(1, 2), (3, 5), (4, 1)]);
        let s = smoothed_pmf(&p, 0.0).unwrap();
        assert_eq!(s.z_max(), 5);
        for z in 0..=s.z_max() {
            assert_eq!(s.prob(z), p.prob(z));
        }
    }

    #[test]
    fn smoothing_two_points() {
        let s = smoothed_pmf(&pmf(&[(0, 1), (1, 1)]), 0.5).unwrap();
        let e = (-0.5f64).exp();
        assert!((s.prob(0) - 0.5 * e).abs() < 1e-15);
        assert!((s.prob(1) - 0.5 * e * 1.5).abs() < 1e-15);
        assert!((s.prob(0) - 0.303265).abs() < 1e-6);
        assert!((s.prob(1) - 0.454898).abs() < 1e-6);
    }

    #[test]
    fn negative_h_rejected() {
        assert!(smoothed_pmf(&pmf(&[(0, 1)]), -0.1).is_err());
        assert!(adjusted_robbins(&sample(&[1, 2]), f64::NAN).is_err());
    }

    #[test]
    fn pure_noise_has_zero_signal() {
        for &h in &[0.1, 1.0, 3.0] {
            let s = smoothed_pmf(&pmf(&[(0, 10)]), h).unwrap();
            for z in 0..s.z_max() {
                assert!(delta_h1(&s, z).unwrap().abs() < 1e-12, "h={h} z={z}");
            }
        }
    }

    #[test]
    fn point_mass_closed_form() {
        // For a point mass at c, P̃(z) ∝ h^{z-c}/(z-c)!, so the ratio is
        // h (z+1)/(z-c+1) and δ_{h,1}(z) = h c / (z - c + 1).
        let c = 4u64;
        let h = 1.7;
        let s = smoothed_pmf(&pmf(&[(c, 2)]), h).unwrap();
        for z in c..s.z_max() {
            let expect = h * c as f64 / (z - c + 1) as f64;
            assert!((delta_h1(&s, z).unwrap() - expect).abs() < 1e-10, "z={z}");
        }
        let r = delta_h2(&pmf(&[(c, 2)]), h).unwrap();
        let expect = c as f64 * (1.0 - (-h).exp());
        assert!((r.values()[0] - expect).abs() < 1e-10);
    }

    #[test]
    fn delta_h1_range_checked() {
        let s = smoothed_pmf(&pmf(&[(2, 1), (5, 1)]), 0.5).unwrap();
        assert!(delta_h1(&s, 1).is_err());
        assert!(delta_h1(&s, s.z_max()).is_err());
        assert!(delta_h1(&s, s.z_max() - 1).is_ok());
    }

    #[test]
    fn h_zero_reduces_to_classical() {
        let p = pmf(&[(0, 3), (1, 5), (2, 4), (4, 1), (5, 2)]);
        let classical = classical_rule(&p);
        let s = smoothed_pmf(&p, 0.0).unwrap();
        for (y, v) in classical.iter() {
            assert!((delta_h1(&s, y).unwrap() - v).abs() < 1e-15);
        }
        assert_eq!(delta_h2(&p, 0.0).unwrap().values(), classical.values());
    }

    #[test]
    fn gap_limit() {
        // P̂(1) = 0: δ_{h,2}(0) -> 2 P̂(2) / P̂(0) as h -> 0.
        let r = delta_h2(&pmf(&[(0, 1), (2, 1)]), 1e-4).unwrap();
        assert!((r.get(0).unwrap() - 2.0).abs() < 1e-2);
        // Δ_0 there is 0.
        assert_eq!(
            delta_h2(&pmf(&[(0, 1), (2, 1)]), 0.0).unwrap().get(0),
            Some(0.0)
        );
    }

    #[test]
    fn adjusted_examples() {
        let r = adjusted_robbins(&sample(&[3, 3, 3, 3]), 3.0).unwrap();
        assert_eq!(r.domain(), &[3]);
        let expect = 3.0 * (1.0 - (-3.0f64).exp());
        assert!((r.values()[0] - expect).abs() < 1e-10);
        assert!((r.values()[0] - 2.8506).abs() < 1e-4);

        let r = adjusted_robbins(&sample(&[0, 1, 1, 2]), 0.0).unwrap();
        assert!(r.is_monotone());
        for v in r.values() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn adjusted_zero_sample_is_zero() {
        for &h in &[0.0, 0.2, 1.0, 5.0] {
            let r = adjusted_robbins(&sample(&[0; 7]), h).unwrap();
            assert!(r.values().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn slope_diagnostic_point_mass() {
        // δ_{h,2}(c) = c (1 - e^{-h}) for a point mass, so the ratio tends to c.
        let r = delta_h2_at_ymax_slope(&sample(&[5, 5]), &[1e-3]).unwrap();
        assert!((r[0] - 5.0 * (1.0 - (-1e-3f64).exp()) / 1e-3).abs() < 1e-9);
        let r = delta_h2_at_ymax_slope(&sample(&[0]), &[1e-3]).unwrap();
        assert!(r[0].abs() < 1e-12);
        assert!(delta_h2_at_ymax_slope(&sample(&[1]), &[0.0]).is_err());
    }
}
