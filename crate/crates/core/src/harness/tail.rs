use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::mean;
use super::streams;
use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::noise::{sample_noise, subgaussian_K, NoiseSpec};
use crate::rng;

/// `max_r (sum of the r largest squared entries) - K1 r log(e n1 n2 / r)`.
///
/// The largest energy over supports of size `r` is the sum of the `r` largest
/// squares, so a single descending scan suffices.
pub fn projected_noise_stat(e: &RealMatrix, k1: f64) -> f64 {
    let n = e.len();
    let mut squares: Vec<f64> = e.entries().iter().map(|v| v * v).collect();
    squares.sort_by(|a, b| b.total_cmp(a));
    let log_en = 1.0 + (n as f64).ln();
    let mut prefix = 0.0;
    let mut best = f64::NEG_INFINITY;
    for (i, sq) in squares.iter().enumerate() {
        prefix += sq;
        let r = (i + 1) as f64;
        best = best.max(prefix - k1 * r * (log_en - r.ln()));
    }
    best
}

/// `POINTS` log-spaced values from `0.1 K^2` to `50 K^2`.
pub fn delta_grid(k: f64) -> Vec<f64> {
    const POINTS: usize = 20;
    let (lo, hi) = ((0.1 * k * k).ln(), (50.0 * k * k).ln());
    (0..POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (POINTS - 1) as f64).exp())
        .collect()
}

/// Empirical tail of the projected-noise statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub n1: usize,
    pub n2: usize,
    pub k: f64,
    pub k1: f64,
    pub trials: usize,
    pub deltas: Vec<f64>,
    /// `P[stat >= delta]` for every delta.
    pub exceedance: Vec<f64>,
    /// `P[stat >= 0]`.
    pub p_nonnegative: f64,
    pub mean_stat: f64,
    /// Mean of `max(stat, 0)`.
    pub mean_positive: f64,
}

impl TailCurve {
    pub fn monotone(&self) -> bool {
        self.exceedance.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Minimum number of trials accepted by [`tail_check`].
pub const MIN_TAIL_TRIALS: usize = 100;

/// Samples `trials` noise matrices and tabulates the exceedance of
/// [`projected_noise_stat`] on [`delta_grid`]. Trial `t` draws from the seed
/// `mix_path(noise.seed, [TAIL, t])`.
pub fn tail_check(
    noise: &NoiseSpec,
    n1: usize,
    n2: usize,
    k1: f64,
    trials: usize,
) -> Result<TailCurve> {
    if trials < MIN_TAIL_TRIALS {
        return Err(Error::domain(format!(
            "tail checks need at least {MIN_TAIL_TRIALS} trials, got {trials}"
        )));
    }
    if !(k1 > 0.0) || !k1.is_finite() {
        return Err(Error::domain(format!("K1 must be positive, got {k1}")));
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::domain("dimensions must be positive"));
    }
    let stats: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = rng::mix_path(noise.seed, &[streams::TAIL, t as u64]);
            projected_noise_stat(&sample_noise(n1, n2, &noise.with_seed(seed)), k1)
        })
        .collect();
    let k = subgaussian_K(noise);
    let deltas = delta_grid(k);
    let frac = |d: f64| stats.iter().filter(|s| **s >= d).count() as f64 / trials as f64;
    let positive: Vec<f64> = stats.iter().map(|s| s.max(0.0)).collect();
    Ok(TailCurve {
        n1,
        n2,
        k,
        k1,
        trials,
        exceedance: deltas.iter().map(|d| frac(*d)).collect(),
        deltas,
        p_nonnegative: frac(0.0),
        mean_stat: mean(&stats),
        mean_positive: mean(&positive),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_matrix_peaks_at_one() {
        let e = RealMatrix::zeros(3, 4);
        let v = projected_noise_stat(&e, 2.0);
        assert_relative_eq!(v, -2.0 * (1.0 + 12f64.ln()), max_relative = 1e-15);
    }

    #[test]
    fn k1_zero_is_total_energy() {
        let e = RealMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap();
        assert_eq!(projected_noise_stat(&e, 0.0), 14.0);
    }

    #[test]
    fn grid_endpoints() {
        let g = delta_grid(2.0);
        assert_eq!(g.len(), 20);
        assert_relative_eq!(g[0], 0.4, max_relative = 1e-12);
        assert_relative_eq!(g[19], 200.0, max_relative = 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn huge_k1_never_nonnegative() {
        let noise = NoiseSpec::gaussian(1.0, 8).unwrap();
        let c = tail_check(&noise, 4, 8, 1e3, 200).unwrap();
        assert_eq!(c.p_nonnegative, 0.0);
        assert_eq!(c.mean_positive, 0.0);
        assert!(c.monotone());
    }

    #[test]
    fn curve_is_monotone_and_finite() {
        let noise = NoiseSpec::gaussian(1.0, 1).unwrap();
        let c = tail_check(&noise, 4, 8, 0.5, 300).unwrap();
        assert!(c.monotone());
        assert!(c.mean_positive.is_finite() && c.mean_positive > 0.0);
        assert!(tail_check(&noise, 4, 8, 0.5, 99).is_err());
    }
}
