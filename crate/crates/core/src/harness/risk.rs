use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mean, quantile, std_dev};
use super::{in_pool, streams, EstimatorKind, ExperimentConfig, GridPoint};
use crate::error::{Error, Result};
use crate::estimator::{estimate_pls, estimate_rowwise};
use crate::matrix::{norm_2p, RealMatrix};
use crate::noise::observe;
use crate::packing::{hard_amplitude, random_pattern};
use crate::rng;

/// A uniformly drawn `s`-per-row pattern scaled by
/// `sigma * gamma * sqrt(log(e n2 / s))`, the hypothesis amplitude of the
/// hard-sparsity lower bound.
pub fn worst_case_signal(
    n1: usize,
    n2: usize,
    s: usize,
    sigma: f64,
    gamma: f64,
    seed: u64,
) -> Result<RealMatrix> {
    if s == 0 || 2 * s > n2 {
        return Err(Error::domain(format!(
            "worst-case signals need 1 <= s <= n2/2, got s={s}, n2={n2}"
        )));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    random_pattern(n1, n2, s, seed)?
        .to_matrix()
        .scaled(hard_amplitude(n2, s, gamma, sigma))
}

/// Monte Carlo summary of `||M_hat - M||_{2,p}^2` at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub n1: usize,
    pub n2: usize,
    pub s: usize,
    pub trials: usize,
    pub mean: f64,
    pub std_err: f64,
    pub q05: f64,
    pub q95: f64,
    pub min: f64,
    pub max: f64,
    pub elapsed_secs: f64,
}

impl RiskReport {
    /// Equality of every numeric field except the wall-clock time.
    pub fn same_numbers(&self, other: &RiskReport) -> bool {
        let strip = |r: &RiskReport| RiskReport {
            elapsed_secs: 0.0,
            ..r.clone()
        };
        strip(self) == strip(other)
    }
}

/// Per-trial losses, indexed by trial. Trial `t` at grid index `g` observes
/// `M` under the noise stream `mix_path(base_seed, [NOISE, g, t])`.
pub fn trial_risks(m: &RealMatrix, cfg: &ExperimentConfig, grid_index: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    let run = || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let seed = rng::mix_path(
                    cfg.base_seed,
                    &[streams::NOISE, grid_index as u64, t as u64],
                );
                let y = observe(m, &cfg.noise.with_seed(seed));
                let m_hat = match cfg.estimator {
                    EstimatorKind::Pls => estimate_pls(&y, &cfg.penalty).m_hat,
                    EstimatorKind::Rowwise => estimate_rowwise(&y, &cfg.penalty),
                };
                let err = m_hat.try_sub(m).expect("same dims");
                norm_2p(&err, cfg.p).expect("validated p").powi(2)
            })
            .collect::<Vec<f64>>()
    };
    Ok(in_pool(cfg.threads, run))
}

/// [`mc_risk_at`] for grid index 0.
pub fn mc_risk(m: &RealMatrix, cfg: &ExperimentConfig) -> Result<RiskReport> {
    mc_risk_at(m, cfg, 0)
}

/// Runs `cfg.trials` replicates of observe-then-estimate on `m` and
/// summarizes the loss.
pub fn mc_risk_at(m: &RealMatrix, cfg: &ExperimentConfig, grid_index: usize) -> Result<RiskReport> {
    let start = Instant::now();
    let values = trial_risks(m, cfg, grid_index)?;
    let point = cfg
        .grid
        .get(grid_index)
        .copied()
        .filter(|g| (g.n1, g.n2) == m.dims())
        .unwrap_or(GridPoint::new(m.n1(), m.n2(), 0));
    Ok(summarize(&values, point, start.elapsed().as_secs_f64()))
}

pub(crate) fn summarize(values: &[f64], point: GridPoint, elapsed_secs: f64) -> RiskReport {
    let mu = mean(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    RiskReport {
        n1: point.n1,
        n2: point.n2,
        s: point.s,
        trials: values.len(),
        mean: mu,
        std_err: std_dev(values, mu) / (values.len() as f64).sqrt(),
        q05: quantile(&sorted, 0.05),
        q95: quantile(&sorted, 0.95),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        elapsed_secs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::PenaltyConfig;
    use crate::matrix::{in_class, SparsityClass};
    use crate::noise::NoiseSpec;
    use approx::assert_relative_eq;

    fn cfg(sigma: f64, lambda: f64, trials: usize) -> ExperimentConfig {
        ExperimentConfig::new(
            vec![GridPoint::new(4, 16, 2)],
            NoiseSpec::gaussian(sigma, 0).unwrap(),
            PenaltyConfig::with_lambda(lambda).unwrap(),
            trials,
            77,
        )
    }

    #[test]
    fn signal_examples() {
        let m = worst_case_signal(1, 2, 1, 1.0, 0.5, 3).unwrap();
        let nz: Vec<f64> = m.entries().iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert_relative_eq!(nz[0], 0.650_604_945_523_768_9, max_relative = 1e-12);
        for seed in 0..20 {
            let m = worst_case_signal(5, 12, 3, 2.0, 0.9, seed).unwrap();
            assert!(in_class(&m, &SparsityClass::hard(3).unwrap()));
        }
        let near_one = worst_case_signal(1, 8, 2, 1.0, 0.999_999, 0).unwrap();
        let top = near_one.entries().iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(top, (1.0 + 4f64.ln()).sqrt(), max_relative = 1e-5);
        assert!(worst_case_signal(1, 3, 2, 1.0, 0.5, 0).is_err());
        assert!(worst_case_signal(1, 4, 2, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn zero_noise_zero_signal() {
        let r = mc_risk(&RealMatrix::zeros(4, 16), &cfg(1e-12, 4e-24, 20)).unwrap();
        assert!(r.mean <= 1e-20);
    }

    #[test]
    fn heavy_penalty_kills_pure_noise() {
        let r = mc_risk(&RealMatrix::zeros(4, 16), &cfg(1.0, 100.0, 200)).unwrap();
        assert_eq!(r.mean, 0.0);
        assert_eq!(r.max, 0.0);
    }

    #[test]
    fn deterministic_across_runs_and_threads() {
        let m = worst_case_signal(4, 16, 2, 1.0, 0.5, 1).unwrap();
        let mut c = cfg(1.0, 4.0, 64);
        let a = mc_risk(&m, &c).unwrap();
        let b = mc_risk(&m, &c).unwrap();
        assert!(a.same_numbers(&b));
        c.threads = Some(1);
        let serial = mc_risk(&m, &c).unwrap();
        c.threads = Some(4);
        let par = mc_risk(&m, &c).unwrap();
        assert!(serial.same_numbers(&par));
        assert!(serial.same_numbers(&a));
    }

    #[test]
    fn report_ordering_invariants() {
        let m = worst_case_signal(4, 16, 2, 1.0, 0.5, 1).unwrap();
        let r = mc_risk(&m, &cfg(1.0, 1.0, 101)).unwrap();
        assert!(r.min <= r.q05 && r.q05 <= r.q95 && r.q95 <= r.max);
        assert!(r.min <= r.mean && r.mean <= r.max);
        assert_eq!(r.trials, 101);
        assert_eq!((r.n1, r.n2, r.s), (4, 16, 2));
    }
}
