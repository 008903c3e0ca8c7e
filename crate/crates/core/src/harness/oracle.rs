use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{in_pool, streams, EstimatorKind, ExperimentConfig};
use crate::error::{Error, Result};
use crate::estimator::{estimate_pls, estimate_rowwise};
use crate::matrix::{l0_count, RealMatrix};
use crate::noise::{observe, subgaussian_K};
use crate::rng;

/// One candidate `A` of the oracle bound together with the constant each
/// trial needs for `A` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGap {
    pub l0: usize,
    /// `(a + 1) / (a - 1) * ||M - A||_2^2`.
    pub bias: f64,
    /// `K^2 ||A||_0 log(e n1 n2 / (||A||_0 v 1))`, the factor multiplying `C`.
    pub complexity: f64,
    /// Smallest `C >= 0` covering each trial with this probe (`inf` when none does).
    pub needed_c: Vec<f64>,
    pub c_fit_95: Option<f64>,
}

/// Per-trial record of `LHS = ||M - M_hat||_2^2` against
/// `min_A bias(A) + C * complexity(A) + slack`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGapReport {
    pub a: f64,
    pub slack: f64,
    pub k: f64,
    pub lhs: Vec<f64>,
    /// Smallest `C` covering each trial over all probes.
    pub needed_c: Vec<f64>,
    /// Smallest `C` covering at least 95% of the trials, `None` if unbounded.
    pub c_fit_95: Option<f64>,
    /// Probe 0 is `A = M`, probe 1 is `A = 0`, then the supplied extras.
    pub probes: Vec<ProbeGap>,
}

/// Coverage level used for the fitted constant.
pub const COVERAGE_LEVEL: f64 = 0.95;

impl OracleGapReport {
    pub fn trials(&self) -> usize {
        self.lhs.len()
    }

    /// Fraction of trials with `LHS <= min_A RHS(A)` at constant `c`.
    pub fn coverage(&self, c: f64) -> f64 {
        coverage_of(&self.needed_c, c)
    }
}

fn coverage_of(needed: &[f64], c: f64) -> f64 {
    needed.iter().filter(|v| **v <= c).count() as f64 / needed.len() as f64
}

fn fit_constant(needed: &[f64]) -> Option<f64> {
    let mut sorted = needed.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (COVERAGE_LEVEL * sorted.len() as f64).ceil() as usize;
    let c = sorted[rank.clamp(1, sorted.len()) - 1];
    c.is_finite().then_some(c)
}

fn needed_for(lhs: f64, bias: f64, complexity: f64, slack: f64) -> f64 {
    let gap = lhs - bias - slack;
    if gap <= 0.0 {
        0.0
    } else if complexity > 0.0 {
        gap / complexity
    } else {
        f64::INFINITY
    }
}

/// Empirical check of the oracle inequality on signal `m`.
///
/// Trial `t` uses the noise seed `mix_path(base_seed, [ORACLE, 0, t])`. The
/// probes `A = M` and `A = 0` are always evaluated; `extra_probes` are added
/// after them.
pub fn oracle_gap(
    m: &RealMatrix,
    cfg: &ExperimentConfig,
    a: f64,
    extra_probes: &[RealMatrix],
    slack: f64,
) -> Result<OracleGapReport> {
    cfg.validate()?;
    if !(a > 1.0) || !a.is_finite() {
        return Err(Error::domain(format!("a must exceed 1, got {a}")));
    }
    if !(slack >= 0.0) || !slack.is_finite() {
        return Err(Error::domain(format!(
            "slack must be nonnegative, got {slack}"
        )));
    }
    let (n1, n2) = m.dims();
    if let Some(bad) = extra_probes.iter().find(|p| p.dims() != (n1, n2)) {
        return Err(Error::DimensionMismatch {
            expected: (n1, n2),
            found: bad.dims(),
        });
    }
    let k = subgaussian_K(&cfg.noise);
    let factor = (a + 1.0) / (a - 1.0);
    let n = (n1 * n2) as f64;
    let zero = RealMatrix::zeros(n1, n2);
    let probes: Vec<(f64, f64, usize)> = [m, &zero]
        .into_iter()
        .chain(extra_probes)
        .map(|p| {
            let l0 = l0_count(p);
            let bias = factor * m.try_sub(p).expect("same dims").sq_frobenius();
            let complexity = if l0 == 0 {
                0.0
            } else {
                k * k * l0 as f64 * (1.0 + n.ln() - (l0 as f64).ln())
            };
            (bias, complexity, l0)
        })
        .collect();

    let lhs: Vec<f64> = in_pool(cfg.threads, || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let seed = rng::mix_path(cfg.base_seed, &[streams::ORACLE, 0, t as u64]);
                let y = observe(m, &cfg.noise.with_seed(seed));
                let m_hat = match cfg.estimator {
                    EstimatorKind::Pls => estimate_pls(&y, &cfg.penalty).m_hat,
                    EstimatorKind::Rowwise => estimate_rowwise(&y, &cfg.penalty),
                };
                m.try_sub(&m_hat).expect("same dims").sq_frobenius()
            })
            .collect()
    });

    let probe_gaps: Vec<ProbeGap> = probes
        .iter()
        .map(|&(bias, complexity, l0)| {
            let needed_c: Vec<f64> = lhs
                .iter()
                .map(|&l| needed_for(l, bias, complexity, slack))
                .collect();
            ProbeGap {
                l0,
                bias,
                complexity,
                c_fit_95: fit_constant(&needed_c),
                needed_c,
            }
        })
        .collect();
    let needed_c: Vec<f64> = (0..lhs.len())
        .map(|t| {
            probe_gaps
                .iter()
                .map(|p| p.needed_c[t])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(OracleGapReport {
        a,
        slack,
        k,
        lhs,
        c_fit_95: fit_constant(&needed_c),
        needed_c,
        probes: probe_gaps,
    })
}
