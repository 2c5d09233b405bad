//! Choosing the smoothing parameter by Poisson thinning.
//!
//! Each count is split as `U ~ Bin(Y, p)`, `V = Y - U`. Given the means,
//! `U ~ Po(pλ)` and `V ~ Po((1-p)λ)` are independent, so a rule fitted on
//! `U` can be scored against `p V / (1 - p)`, an unbiased proxy for `pλ`.
//! The score is averaged over `K` thinnings to remove the splitting noise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counts::{apply_rule, empirical_pmf, CountSample, DecisionRule};
use crate::error::{invalid, Error, Result};
use crate::estimator::Estimator;
use crate::sampling::{binomial, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    /// Retention probability of the thinning.
    pub p: f64,
    pub h_grid: Vec<f64>,
    /// Number of thinning replications.
    pub k: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            p: 0.9,
            h_grid: vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            k: 1000,
            seed: crate::DEFAULT_SEED,
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(invalid(format!(
                "thinning p must lie in (0, 1), got {}",
                self.p
            )));
        }
        if self.h_grid.is_empty() {
            return Err(invalid("h grid is empty"));
        }
        if self
            .h_grid
            .windows(2)
            .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
        {
            return Err(invalid("h grid must be sorted ascending without repeats"));
        }
        if self.k == 0 {
            return Err(invalid("K must be at least 1"));
        }
        Ok(())
    }
}

/// Which rule family the smoothing parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvEstimator {
    /// `h` is the Poisson corruption parameter of `Δ_h`.
    AdjustedRobbins,
    /// `h` is the kernel bandwidth of `Δ_{N,h}`.
    ModifiedNormal { q: f64 },
}

impl CvEstimator {
    pub fn with_parameter(&self, h: f64) -> Estimator {
        match *self {
            CvEstimator::AdjustedRobbins => Estimator::Adjusted { h },
            CvEstimator::ModifiedNormal { q } => Estimator::Normal { bandwidth: h, q },
        }
    }
}

/// Binomial thinning of every count. Returns `(U, V)` with `U + V = Y`.
pub fn thin<R: Rng + ?Sized>(
    sample: &CountSample,
    p: f64,
    rng: &mut R,
) -> Result<(CountSample, CountSample)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("thinning p must lie in (0, 1), got {p}")));
    }
    let (u, v): (Vec<u64>, Vec<u64>) = sample
        .counts()
        .iter()
        .map(|&y| {
            let kept = binomial(rng, y, p);
            (kept, y - kept)
        })
        .unzip();
    Ok((CountSample::new(u)?, CountSample::new(v)?))
}

/// `(1/n) Σ (δ*(U_i) - p V_i / (1 - p))²`.
pub fn cv_criterion(
    u: &CountSample,
    v: &CountSample,
    rule_on_u: &DecisionRule,
    p: f64,
) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let fitted = apply_rule(rule_on_u, u)?;
    let scale = p / (1.0 - p);
    let total: f64 = fitted
        .iter()
        .zip(v.counts())
        .map(|(d, &vi)| (d - scale * vi as f64).powi(2))
        .sum();
    Ok(total / u.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub h: f64,
    /// Criterion averaged over the thinnings.
    pub criterion: f64,
    /// `criterion · (1 - p)²`.
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub h_star: f64,
    pub p: f64,
    pub k: usize,
    pub rows: Vec<CvRow>,
}

/// Averages the criterion over `K` thinnings for every `h` and returns the
/// minimizer, ties going to the smaller `h`.
///
/// All values of `h` are scored on the same thinnings. Thinning `k` draws
/// from stream `(seed, k)`, so the table does not depend on scheduling.
pub fn select_h(sample: &CountSample, cfg: &CvConfig, estimator: CvEstimator) -> Result<CvResult> {
    cfg.validate()?;
    let per_thinning: Vec<Vec<f64>> = (0..cfg.k as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(cfg.seed, k);
            let (u, v) = thin(sample, cfg.p, &mut rng)?;
            let pmf_u = empirical_pmf(&u);
            cfg.h_grid
                .iter()
                .map(|&h| {
                    let rule = estimator.with_parameter(h).fit_pmf(&pmf_u)?;
                    cv_criterion(&u, &v, &rule, cfg.p)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut sums = vec![0.0; cfg.h_grid.len()];
    for row in &per_thinning {
        for (s, c) in sums.iter_mut().zip(row) {
            *s += c;
        }
    }
    let scale = (1.0 - cfg.p).powi(2);
    let rows: Vec<CvRow> = cfg
        .h_grid
        .iter()
        .zip(&sums)
        .map(|(&h, &s)| {
            let criterion = s / cfg.k as f64;
            CvRow {
                h,
                criterion,
                scaled: criterion * scale,
            }
        })
        .collect();
    let best = rows.iter().fold(&rows[0], |best, r| {
        if r.criterion < best.criterion {
            r
        } else {
            best
        }
    });
    Ok(CvResult {
        h_star: best.h,
        p: cfg.p,
        k: cfg.k,
        rows,
    })
}

/// Splits approximately `N(μ_i, 1)` observations into
/// `U = z + αε` and `V = z - ε/α`, independent given the means.
pub fn normal_split<R: Rng + ?Sized>(
    zs: &[f64],
    alpha: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!(
            "alpha must be finite and > 0, got {alpha}"
        )));
    }
    Ok(zs
        .iter()
        .map(|&z| {
            let eps: f64 = StandardNormal.sample(rng);
            (z + alpha * eps, z - eps / alpha)
        })
        .unzip())
}
