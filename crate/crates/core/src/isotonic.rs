//! Weighted isotonic regression by pool-adjacent-violators.

use crate::error::{invalid, Error, Result};

/// Points `(x, value, weight)` with `x` strictly increasing and positive
/// weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSeries {
    xs: Vec<u64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSeries {
    pub fn new(xs: Vec<u64>, values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if xs.is_empty() {
            return Err(invalid("isotonic regression of an empty series"));
        }
        if xs.len() != values.len() || xs.len() != weights.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: values.len().min(weights.len()),
            });
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("isotonic x values must be strictly increasing"));
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(invalid("isotonic weights must be positive and finite"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("isotonic values must be finite"));
        }
        Ok(Self {
            xs,
            values,
            weights,
        })
    }

    pub fn xs(&self) -> &[u64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// The nondecreasing sequence minimizing `Σ w_i (f_i - v_i)^2`.
pub fn pava(series: &WeightedSeries) -> Vec<f64> {
    pava_slices(series.values(), series.weights())
}

/// PAVA on raw slices. Callers guarantee equal, nonzero lengths and
/// positive weights.
pub(crate) fn pava_slices(values: &[f64], weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(values.len(), weights.len());
    // Stack of blocks: (weighted mean, total weight, number of points).
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        let mut mean = v;
        let mut weight = w;
        let mut len = 1usize;
        while let Some(&(prev_mean, prev_weight, prev_len)) = blocks.last() {
            if prev_mean <= mean {
                break;
            }
            blocks.pop();
            let total = prev_weight + weight;
            mean = (prev_mean * prev_weight + mean * weight) / total;
            weight = total;
            len += prev_len;
        }
        blocks.push((mean, weight, len));
    }
    let mut out = Vec::with_capacity(values.len());
    for (mean, _, len) in blocks {
        out.extend(std::iter::repeat_n(mean, len));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(values: &[f64], weights: &[f64]) -> Vec<f64> {
        let xs = (0..values.len() as u64).collect();
        pava(&WeightedSeries::new(xs, values.to_vec(), weights.to_vec()).unwrap())
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn pools_violators() {
        assert!(close(&fit(&[3.0, 1.0, 2.0], &[1.0; 3]), &[2.0, 2.0, 2.0]));
        assert!(close(&fit(&[5.0, 4.0], &[1.0, 3.0]), &[4.25, 4.25]));
        assert!(close(
            &fit(&[2.0, 1.0, 0.0], &[1.0, 2.0, 1.0]),
            &[1.0, 1.0, 1.0]
        ));
    }

    #[test]
    fn monotone_input_unchanged() {
        let v = [0.0, 0.5, 0.5, 2.0, 7.0];
        assert_eq!(fit(&v, &[1.0, 2.0, 3.0, 1.0, 1.0]), v.to_vec());
    }

    #[test]
    fn rejects_bad_series() {
        assert!(WeightedSeries::new(vec![], vec![], vec![]).is_err());
        assert!(WeightedSeries::new(vec![1, 1], vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(WeightedSeries::new(vec![0, 1], vec![0.0, 0.0], vec![1.0, 0.0]).is_err());
        assert!(WeightedSeries::new(vec![0], vec![0.0, 1.0], vec![1.0]).is_err());
    }
}
