//! Summary statistics for batches of estimates.

use crate::error::{Error, Result};

pub const DECILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation; zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

pub fn std_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    sample_std(xs) / (xs.len() as f64).sqrt()
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] + w * (sorted[hi] - sorted[lo])
}

/// The nine decile quantiles `q10..q90`.
pub fn deciles(xs: &[f64]) -> Result<[f64; 9]> {
    if xs.is_empty() {
        return Err(Error::contract("quantiles of an empty sample"));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract("quantiles of a non-finite sample"));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(DECILES.map(|p| quantile(&sorted, p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deciles_of_a_ramp() {
        let xs: Vec<f64> = (0..=10).rev().map(f64::from).collect();
        let q = deciles(&xs).unwrap();
        for (i, v) in q.iter().enumerate() {
            assert!((v - (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn single_value() {
        assert_eq!(deciles(&[2.5]).unwrap(), [2.5; 9]);
        assert_eq!(sample_std(&[2.5]), 0.0);
    }

    #[test]
    fn std_of_known_sample() {
        let xs = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert!((sample_std(&xs) - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
        assert!((std_error(&xs) - (32.0f64 / 7.0 / 8.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_rejected() {
        assert!(deciles(&[]).is_err());
    }
}
