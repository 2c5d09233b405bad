//! Count samples, empirical pmfs, decision rules and discrete priors.
//!
//! Every type here is immutable once built; constructors validate their
//! invariants and the fields are only reachable through accessors.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{invalid, Error, Result};

/// Observed counts `Y_1..Y_n`, `n >= 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountSample {
    counts: Vec<u64>,
}

impl CountSample {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max(&self) -> u64 {
        *self.counts.iter().max().expect("nonempty")
    }

    pub fn min(&self) -> u64 {
        *self.counts.iter().min().expect("nonempty")
    }
}

impl TryFrom<Vec<u64>> for CountSample {
    type Error = Error;

    fn try_from(counts: Vec<u64>) -> Result<Self> {
        Self::new(counts)
    }
}

/// One support point of an [`EmpiricalPmf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmfEntry {
    pub y: u64,
    pub probability: f64,
    pub multiplicity: u64,
}

/// The empirical distribution of a sample, keeping the multiplicities
/// alongside the probabilities (the isotonic step weighs by them).
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPmf {
    entries: Vec<PmfEntry>,
    n: u64,
}

impl EmpiricalPmf {
    /// Builds the pmf from `(y, multiplicity)` pairs. The pairs need not be
    /// sorted but `y` values must be distinct and multiplicities positive.
    pub fn from_multiplicities(pairs: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut pairs: Vec<(u64, u64)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        pairs.sort_unstable_by_key(|&(y, _)| y);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid("duplicate support point"));
        }
        if pairs.iter().any(|&(_, m)| m == 0) {
            return Err(invalid("multiplicity must be positive"));
        }
        let n: u64 = pairs.iter().map(|&(_, m)| m).sum();
        let entries = pairs
            .into_iter()
            .map(|(y, m)| PmfEntry {
                y,
                probability: m as f64 / n as f64,
                multiplicity: m,
            })
            .collect();
        Ok(Self { entries, n })
    }

    /// Entries sorted by `y`.
    pub fn entries(&self) -> &[PmfEntry] {
        &self.entries
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// The distinct observed values `D(Y)`, ascending.
    pub fn support(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.y).collect()
    }

    pub fn min_support(&self) -> u64 {
        self.entries[0].y
    }

    pub fn max_support(&self) -> u64 {
        self.entries[self.entries.len() - 1].y
    }

    fn entry(&self, y: u64) -> Option<&PmfEntry> {
        self.entries
            .binary_search_by_key(&y, |e| e.y)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// `P̂(y)`, zero off the support.
    pub fn prob(&self, y: u64) -> f64 {
        self.entry(y).map_or(0.0, |e| e.probability)
    }

    pub fn multiplicity(&self, y: u64) -> u64 {
        self.entry(y).map_or(0, |e| e.multiplicity)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.multiplicity as f64).collect()
    }
}

/// Empirical pmf of a sample: probability `multiplicity / n` on every
/// distinct observed value.
pub fn empirical_pmf(sample: &CountSample) -> EmpiricalPmf {
    let mut sorted = sample.counts().to_vec();
    sorted.sort_unstable();
    let mut pairs: Vec<(u64, u64)> = Vec::new();
    for y in sorted {
        match pairs.last_mut() {
            Some((last, m)) if *last == y => *m += 1,
            _ => pairs.push((y, 1)),
        }
    }
    EmpiricalPmf::from_multiplicities(pairs).expect("sample is nonempty")
}

/// Poisson log-pmf. `ln f(k | 0)` is `0` at `k = 0` and `-inf` elsewhere.
pub fn ln_poisson_pmf(k: u64, mean: f64) -> Result<f64> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(invalid(format!(
            "Poisson mean must be finite and >= 0, got {mean}"
        )));
    }
    Ok(ln_poisson_pmf_unchecked(k, mean))
}

#[inline]
pub(crate) fn ln_poisson_pmf_unchecked(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mean.ln() - mean - ln_factorial(k)
}

/// `e^{-mean} mean^k / k!`, evaluated through log-gamma.
pub fn poisson_pmf(k: u64, mean: f64) -> Result<f64> {
    ln_poisson_pmf(k, mean).map(f64::exp)
}

/// Poisson pmf over `0..=k_max`, built by the recurrence
/// `f(k) = f(k-1) * mean / k` from `f(0) = e^{-mean}`.
pub(crate) fn poisson_pmf_table(mean: f64, k_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k_max + 1);
    let mut p = (-mean).exp();
    out.push(p);
    for k in 1..=k_max {
        p *= mean / k as f64;
        out.push(p);
    }
    out
}

/// Smallest `j` such that `P(N > j) < tail` for `N ~ Po(mean)`.
pub(crate) fn poisson_truncation(mean: f64, tail: f64) -> usize {
    if mean == 0.0 {
        return 0;
    }
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut j = 0usize;
    while 1.0 - cdf >= tail {
        j += 1;
        p *= mean / j as f64;
        cdf += p;
        // cdf saturates in floating point before the tail is resolved for
        // large means; stop once the terms themselves are negligible.
        if j as f64 > mean && p < tail * 1e-3 {
            break;
        }
    }
    j
}

/// A decision rule `y -> λ̂` tabulated on an increasing integer domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    domain: Vec<u64>,
    values: Vec<f64>,
    monotone: bool,
}

impl DecisionRule {
    pub fn new(domain: Vec<u64>, values: Vec<f64>, monotone: bool) -> Result<Self> {
        if domain.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: domain.len(),
                right: values.len(),
            });
        }
        if domain.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("rule domain must be strictly increasing"));
        }
        if monotone && values.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("rule flagged monotone but values decrease"));
        }
        Ok(Self {
            domain,
            values,
            monotone,
        })
    }

    pub fn domain(&self) -> &[u64] {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn get(&self, y: u64) -> Option<f64> {
        self.domain.binary_search(&y).ok().map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.domain.iter().copied().zip(self.values.iter().copied())
    }
}

/// Applies `rule` elementwise to the sample.
pub fn apply_rule(rule: &DecisionRule, sample: &CountSample) -> Result<Vec<f64>> {
    sample
        .counts()
        .iter()
        .map(|&y| rule.get(y).ok_or(Error::RuleUndefined(y)))
        .collect()
}

/// A finitely supported prior on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePrior {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscretePrior {
    /// Atoms must be strictly increasing and nonnegative, weights positive
    /// and summing to one within `1e-12`.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("prior needs at least one atom"));
        }
        if atoms.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: atoms.len(),
                right: weights.len(),
            });
        }
        if atoms.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(invalid("prior atoms must be finite and >= 0"));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("prior atoms must be strictly increasing"));
        }
        if weights.iter().any(|w| w.is_nan() || *w <= 0.0) {
            return Err(invalid("prior weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("prior weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, weights })
    }

    /// Normalizes positive masses and merges equal atoms; used for the
    /// empirical distribution of a λ vector.
    pub fn from_masses(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().filter(|p| p.1 > 0.0).collect();
        if pairs.is_empty() {
            return Err(invalid("prior needs positive mass"));
        }
        if pairs.iter().any(|p| !p.0.is_finite()) {
            return Err(invalid("prior atoms must be finite"));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut masses: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, m) in pairs {
            if atoms.last() == Some(&a) {
                *masses.last_mut().unwrap() += m;
            } else {
                atoms.push(a);
                masses.push(m);
            }
        }
        let total: f64 = masses.iter().sum();
        let weights = masses.into_iter().map(|m| m / total).collect();
        Self::new(atoms, weights)
    }

    pub fn point_mass(lambda: f64) -> Result<Self> {
        Self::new(vec![lambda], vec![1.0])
    }

    /// Empirical distribution of the vector `lambdas`.
    pub fn empirical(lambdas: &[f64]) -> Result<Self> {
        Self::from_masses(lambdas.iter().map(|&l| (l, 1.0)))
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, w)| a * w).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(a, w)| w * (a - m).powi(2)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(v: &[u64]) -> CountSample {
        CountSample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn empirical_pmf_counts() {
        let pmf = empirical_pmf(&sample(&[0, 1, 1, 2]));
        assert_eq!(pmf.n(), 4);
        assert_eq!(pmf.support(), vec![0, 1, 2]);
        assert_eq!(pmf.prob(0), 0.25);
        assert_eq!(pmf.prob(1), 0.5);
        assert_eq!(pmf.prob(2), 0.25);
        assert_eq!(pmf.multiplicity(1), 2);
        assert_eq!(pmf.prob(3), 0.0);

        let single = empirical_pmf(&sample(&[7]));
        assert_eq!(single.support(), vec![7]);
        assert_eq!(single.prob(7), 1.0);

        let degenerate = empirical_pmf(&sample(&[3, 3, 3, 3]));
        assert_eq!(degenerate.n(), 4);
        assert_eq!(degenerate.prob(3), 1.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(matches!(CountSample::new(vec![]), Err(Error::EmptySample)));
    }

    #[test]
    fn pmf_values() {
        assert!((poisson_pmf(0, 1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(poisson_pmf(0, 0.0).unwrap(), 1.0);
        assert_eq!(poisson_pmf(5, 0.0).unwrap(), 0.0);
        let direct = (-3.0f64).exp() * 9.0 / 2.0;
        assert!((poisson_pmf(2, 3.0).unwrap() - direct).abs() < 1e-15);
        assert!((poisson_pmf(2, 3.0).unwrap() - 0.224042).abs() < 1e-6);
        assert!(poisson_pmf(1, -0.5).is_err());
        assert!(poisson_pmf(1, f64::NAN).is_err());
    }

    #[test]
    fn pmf_finite_for_huge_k() {
        let p = poisson_pmf(1_000_000, 1_000_000.0).unwrap();
        // Stirling: f(m | m) ~ 1 / sqrt(2 pi m)
        let approx = 1.0 / (2.0 * std::f64::consts::PI * 1e6).sqrt();
        assert!((p / approx - 1.0).abs() < 1e-5);
    }

    #[test]
    fn pmf_mass_sums_to_one() {
        for &mean in &[0.0, 0.3, 1.0, 7.5, 40.0, 250.0] {
            let k_max = (mean + 12.0 * f64::sqrt(mean) + 30.0) as u64;
            let total: f64 = (0..=k_max).map(|k| poisson_pmf(k, mean).unwrap()).sum();
            assert!(total >= 1.0 - 1e-10, "mean {mean}: {total}");
        }
    }

    #[test]
    fn table_matches_pmf() {
        let t = poisson_pmf_table(2.5, 30);
        for (k, v) in t.iter().enumerate() {
            assert!((v - poisson_pmf(k as u64, 2.5).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn truncation_tail() {
        for &h in &[1e-4, 0.5, 3.0, 20.0] {
            let j = poisson_truncation(h, 1e-12);
            let kept: f64 = poisson_pmf_table(h, j).iter().sum();
            assert!(1.0 - kept < 1e-12, "h={h} j={j}");
            if j > 0 {
                let short: f64 = poisson_pmf_table(h, j - 1).iter().sum();
                assert!(1.0 - short >= 1e-12 - 1e-15);
            }
        }
        assert_eq!(poisson_truncation(0.0, 1e-12), 0);
    }

    #[test]
    fn apply_rule_lookup() {
        let rule = DecisionRule::new(vec![0, 1, 2], vec![2.0, 1.0, 0.0], false).unwrap();
        let out = apply_rule(&rule, &sample(&[0, 1, 1, 2])).unwrap();
        assert_eq!(out, vec![2.0, 1.0, 1.0, 0.0]);

        let constant = DecisionRule::new(vec![0, 1, 2, 3], vec![5.0; 4], true).unwrap();
        let out = apply_rule(&constant, &sample(&[3, 0, 2])).unwrap();
        assert_eq!(out, vec![5.0; 3]);

        let err = apply_rule(&rule, &sample(&[0, 4])).unwrap_err();
        assert!(matches!(err, Error::RuleUndefined(4)));
        assert_eq!(err.to_string(), "rule undefined at y = 4");
    }

    #[test]
    fn rule_validation() {
        assert!(DecisionRule::new(vec![1, 1], vec![0.0, 0.0], false).is_err());
        assert!(DecisionRule::new(vec![0, 1], vec![2.0, 1.0], true).is_err());
        assert!(DecisionRule::new(vec![0], vec![], false).is_err());
    }

    #[test]
    fn prior_validation() {
        assert!(DiscretePrior::new(vec![1.0, 2.0], vec![0.5, 0.5]).is_ok());
        assert!(DiscretePrior::new(vec![2.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(DiscretePrior::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(DiscretePrior::new(vec![-1.0], vec![1.0]).is_err());
        let p = DiscretePrior::empirical(&[5.0, 15.0, 5.0, 5.0]).unwrap();
        assert_eq!(p.atoms(), &[5.0, 15.0]);
        assert_eq!(p.weights(), &[0.75, 0.25]);
        assert!((p.mean() - 7.5).abs() < 1e-12);
    }
}
