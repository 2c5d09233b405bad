//! Nonparametric maximum likelihood for the mixing distribution.
//!
//! The prior is restricted to a fixed uniform grid on `[0, upper]` and the
//! grid weights are fitted by EM. The fit is certified by the gradient of
//! the log-likelihood in the direction of a point mass,
//! `D(λ) = (1/n) Σ_i f(y_i | λ) / p_G(y_i) - 1`, which is `<= 0` everywhere
//! at the optimum and `0` on the support.

use crate::counts::{
    empirical_pmf, ln_poisson_pmf_unchecked, CountSample, DecisionRule, DiscretePrior, EmpiricalPmf,
};
use crate::error::{invalid, Error, Result};
use crate::losses::bayes_rule;

/// Weights at or below this are dropped from the reported prior.
pub const PRUNE_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct NpmleConfig {
    pub grid_size: usize,
    /// Upper end of the λ grid; defaults to `max(sample) + 1`.
    pub upper: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NpmleConfig {
    fn default() -> Self {
        Self {
            grid_size: 400,
            upper: None,
            tol: 1e-7,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpmleFit {
    /// Fitted prior with weights `<= 1e-8` pruned and renormalized.
    pub prior: DiscretePrior,
    /// Mean log-likelihood `(1/n) Σ ln p_G(y_i)` of the unpruned fit.
    pub loglik: f64,
    /// Accelerated EM cycles (each at least two EM updates).
    pub iterations: usize,
    /// `max_λ D(λ)` over the grid.
    pub stationarity_gap: f64,
    /// Mean log-likelihood after each EM step.
    pub loglik_trace: Vec<f64>,
}

/// Mixture likelihood for the distinct observed values.
struct Design {
    /// `f(y_d | λ_j)`, row per distinct `y`.
    lik: Vec<Vec<f64>>,
    /// Observation share of each distinct `y`.
    share: Vec<f64>,
}

impl Design {
    fn new(pmf: &EmpiricalPmf, grid: &[f64]) -> Self {
        let lik = pmf
            .entries()
            .iter()
            .map(|e| {
                grid.iter()
                    .map(|&l| {
                        let f = ln_poisson_pmf_unchecked(e.y, l).exp();
                        // Subnormal entries contribute nothing but are slow.
                        if f < f64::MIN_POSITIVE {
                            0.0
                        } else {
                            f
                        }
                    })
                    .collect()
            })
            .collect();
        let share = pmf.entries().iter().map(|e| e.probability).collect();
        Self { lik, share }
    }

    fn marginals(&self, weights: &[f64]) -> Vec<f64> {
        self.lik
            .iter()
            .map(|row| row.iter().zip(weights).map(|(f, g)| f * g).sum())
            .collect()
    }

    fn loglik(&self, marginals: &[f64]) -> f64 {
        marginals
            .iter()
            .zip(&self.share)
            .map(|(p, s)| s * p.ln())
            .sum()
    }

    /// `1 + D(λ_j)` for every grid point.
    fn directional(&self, marginals: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.lik[0].len()];
        for ((row, p), s) in self.lik.iter().zip(marginals).zip(&self.share) {
            let scale = s / p;
            for (o, f) in out.iter_mut().zip(row) {
                *o += scale * f;
            }
        }
        out
    }
}

/// Uniform grid of `size` points on `[0, upper]`, endpoints included.
pub fn uniform_grid(upper: f64, size: usize) -> Vec<f64> {
    let step = upper / (size - 1) as f64;
    (0..size).map(|j| j as f64 * step).collect()
}

pub fn fit_npmle(sample: &CountSample, cfg: &NpmleConfig) -> Result<NpmleFit> {
    fit_npmle_pmf(&empirical_pmf(sample), cfg)
}

/// One EM update `g_j <- g_j (1 + D(λ_j))`.
fn em_step(design: &Design, weights: &[f64], marginals: &[f64]) -> Vec<f64> {
    let direction = design.directional(marginals);
    let mut next: Vec<f64> = weights.iter().zip(&direction).map(|(w, d)| w * d).collect();
    // The update preserves the total; renormalize against rounding drift.
    let total: f64 = next.iter().sum();
    next.iter_mut().for_each(|w| *w /= total);
    next
}

fn max_gap(design: &Design, marginals: &[f64]) -> f64 {
    design
        .directional(marginals)
        .iter()
        .fold(f64::NEG_INFINITY, |m, &d| m.max(d - 1.0))
}

/// Squared-extrapolation proposal from `w0 -> w1 -> w2`, or `None` when
/// the steplength has to shrink to plain EM to stay on the simplex.
fn extrapolate(w0: &[f64], w1: &[f64], w2: &[f64]) -> Option<Vec<f64>> {
    let mut rr = 0.0;
    let mut vv = 0.0;
    for ((a, b), c) in w0.iter().zip(w1).zip(w2) {
        let r = b - a;
        let v = c - 2.0 * b + a;
        rr += r * r;
        vv += v * v;
    }
    if vv == 0.0 || rr == 0.0 {
        return None;
    }
    let mut alpha = -(rr / vv).sqrt();
    if alpha > -1.0 {
        return None;
    }
    for _ in 0..30 {
        let candidate: Vec<f64> = w0
            .iter()
            .zip(w1)
            .zip(w2)
            .map(|((a, b), c)| {
                let r = b - a;
                let v = c - 2.0 * b + a;
                a - 2.0 * alpha * r + alpha * alpha * v
            })
            .collect();
        if candidate.iter().all(|&w| w >= 0.0) {
            let total: f64 = candidate.iter().sum();
            return Some(candidate.into_iter().map(|w| w / total).collect());
        }
        alpha = (alpha - 1.0) / 2.0;
        if alpha > -1.0 + 1e-9 {
            return None;
        }
    }
    None
}

/// EM over the grid from uniform weights, accelerated by squared
/// extrapolation (SQUAREM). An extrapolated step is kept only if one EM
/// update from it beats two plain EM updates, so the recorded
/// log-likelihood never decreases.
///
/// Stops once an iteration gains less than `tol` in mean log-likelihood
/// and the stationarity gap is below `tol`, or after `max_iter`
/// iterations.
pub fn fit_npmle_pmf(pmf: &EmpiricalPmf, cfg: &NpmleConfig) -> Result<NpmleFit> {
    if cfg.grid_size < 2 {
        return Err(invalid("NPMLE grid needs at least 2 points"));
    }
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(invalid("NPMLE tolerance must be positive"));
    }
    let upper = cfg.upper.unwrap_or(pmf.max_support() as f64 + 1.0);
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(invalid("NPMLE grid upper bound must be positive"));
    }
    let grid = uniform_grid(upper, cfg.grid_size);
    let design = Design::new(pmf, &grid);

    let mut weights = vec![1.0 / grid.len() as f64; grid.len()];
    let mut marginals = design.marginals(&weights);
    let mut loglik = design.loglik(&marginals);
    let mut trace = vec![loglik];
    let mut gap = max_gap(&design, &marginals);
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let w1 = em_step(&design, &weights, &marginals);
        let m1 = design.marginals(&w1);
        let w2 = em_step(&design, &w1, &m1);
        let m2 = design.marginals(&w2);
        let ll2 = design.loglik(&m2);

        let mut next = (w2.clone(), m2, ll2);
        if let Some(jump) = extrapolate(&weights, &w1, &w2) {
            let mj = design.marginals(&jump);
            if mj.iter().all(|&p| p > 0.0) {
                let w3 = em_step(&design, &jump, &mj);
                let m3 = design.marginals(&w3);
                let ll3 = design.loglik(&m3);
                if ll3 > ll2 {
                    next = (w3, m3, ll3);
                }
            }
        }
        let gain = next.2 - loglik;
        (weights, marginals, loglik) = next;
        trace.push(loglik);
        iterations += 1;
        gap = max_gap(&design, &marginals);
        if gain < cfg.tol && gap < cfg.tol {
            break;
        }
    }

    let prior = DiscretePrior::from_masses(
        grid.iter()
            .zip(&weights)
            .filter(|(_, &w)| w > PRUNE_WEIGHT)
            .map(|(&l, &w)| (l, w)),
    )?;
    Ok(NpmleFit {
        prior,
        loglik,
        iterations,
        stationarity_gap: gap,
        loglik_trace: trace,
    })
}

/// `max_λ D(λ)` over `grid` for a candidate prior.
pub fn stationarity_gap(prior: &DiscretePrior, sample: &CountSample, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(invalid("stationarity grid is empty"));
    }
    let pmf = empirical_pmf(sample);
    let marginals = marginal_pmf(prior, &pmf)?;
    let design = Design::new(&pmf, grid);
    let direction = design.directional(&marginals);
    Ok(direction
        .iter()
        .fold(f64::NEG_INFINITY, |m, &d| m.max(d - 1.0)))
}

fn marginal_pmf(prior: &DiscretePrior, pmf: &EmpiricalPmf) -> Result<Vec<f64>> {
    pmf.entries()
        .iter()
        .map(|e| {
            let p: f64 = prior
                .iter()
                .map(|(a, w)| w * ln_poisson_pmf_unchecked(e.y, a).exp())
                .sum();
            if p > 0.0 {
                Ok(p)
            } else {
                Err(Error::IncompatiblePrior(e.y))
            }
        })
        .collect()
}

/// Mean log-likelihood `(1/n) Σ ln p_G(y_i)`.
pub fn mean_loglik(prior: &DiscretePrior, sample: &CountSample) -> Result<f64> {
    let pmf = empirical_pmf(sample);
    let marginals = marginal_pmf(prior, &pmf)?;
    Ok(pmf
        .entries()
        .iter()
        .zip(&marginals)
        .map(|(e, p)| e.probability * p.ln())
        .sum())
}

/// The same mean log-likelihood written through the empirical survival
/// function and the Bayes rule:
/// `ln p_G(0) + Σ_i F̄_n(i) ln δ^G(i) - Σ_i F̄_n(i) ln(i+1)`.
pub fn mean_loglik_by_survival(prior: &DiscretePrior, sample: &CountSample) -> Result<f64> {
    let pmf = empirical_pmf(sample);
    let y_max = pmf.max_support();
    let ln_p0 = crate::losses::posterior(prior, 0)
        .ok_or(Error::IncompatiblePrior(0))?
        .1;
    let rule = bayes_rule(prior, y_max)?;
    let mut survival = 1.0;
    let mut total = ln_p0;
    for i in 0..y_max {
        survival -= pmf.prob(i);
        if survival <= 0.0 {
            break;
        }
        let delta = rule.get(i).expect("rule covers 0..=y_max");
        total += survival * (delta.ln() - ((i + 1) as f64).ln());
    }
    Ok(total)
}

/// Bayes rule of the fitted prior on `0..=y_max`.
pub fn npmle_rule(fit: &NpmleFit, y_max: u64) -> Result<DecisionRule> {
    bayes_rule(&fit.prior, y_max)
}
