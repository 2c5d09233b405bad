//! Seeded random streams and exact Poisson / binomial samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

pub type StreamRng = ChaCha8Rng;

/// Independent RNG stream for `(seed, index)`. Results keyed this way do
/// not depend on which worker thread handles which index.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, for nesting keyed streams (e.g. a replication
/// that itself needs many thinning streams).
pub fn child_seed(seed: u64, index: u64) -> u64 {
    stream(seed, index).random()
}

const INVERSION_LIMIT: f64 = 30.0;

/// `Po(mean)` draw: inversion below mean 30, PTRS rejection above.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    debug_assert!(mean >= 0.0 && mean.is_finite());
    if mean == 0.0 {
        0
    } else if mean < INVERSION_LIMIT {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let u: f64 = rng.random();
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 && k as f64 > mean {
            break;
        }
    }
    k
}

/// Hörmann's transformed rejection with squeeze.
fn poisson_ptrs<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let slam = mean.sqrt();
    let loglam = mean.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln()
            <= -mean + k * loglam - ln_gamma(k + 1.0)
        {
            return k as u64;
        }
    }
}

const BINOMIAL_INVERSION_MAX: u64 = 100;

/// `Bin(trials, p)` draw: inversion for up to 100 trials, Bernoulli
/// trials beyond.
pub fn binomial<R: Rng + ?Sized>(rng: &mut R, trials: u64, p: f64) -> u64 {
    debug_assert!((0.0..=1.0).contains(&p));
    if trials == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return trials;
    }
    if trials > BINOMIAL_INVERSION_MAX {
        return (0..trials).filter(|_| rng.random::<f64>() < p).count() as u64;
    }
    // Invert with the smaller success probability so q^n stays representable.
    if p > 0.5 {
        return trials - binomial_inversion(rng, trials, 1.0 - p);
    }
    binomial_inversion(rng, trials, p)
}

fn binomial_inversion<R: Rng + ?Sized>(rng: &mut R, trials: u64, p: f64) -> u64 {
    let q = 1.0 - p;
    let ratio = p / q;
    let u: f64 = rng.random();
    let mut pk = q.powi(trials as i32);
    let mut cdf = pk;
    let mut k = 0u64;
    while u > cdf && k < trials {
        pk *= ratio * (trials - k) as f64 / (k + 1) as f64;
        k += 1;
        cdf += pk;
    }
    k
}
