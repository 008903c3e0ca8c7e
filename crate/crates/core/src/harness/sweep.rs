use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::risk::{summarize, trial_risks, worst_case_signal, RiskReport};
use super::{in_pool, streams, ExperimentConfig};
use crate::error::{Error, Result};
use crate::noise::subgaussian_K;
use crate::rates::{rate_hard, ProblemDims};
use crate::rng;

/// Rate formula a sweep regresses against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFormula {
    /// `K^2 n1^(2/p) s log(e n2 / s)` with `K` the noise moment constant.
    #[default]
    Hard,
}

impl RateFormula {
    pub fn eval(&self, n1: usize, n2: usize, s: usize, noise: f64, p: f64) -> Result<f64> {
        match self {
            RateFormula::Hard => rate_hard(&ProblemDims::hard(n1, n2, s, noise).with_p(p)),
        }
    }
}

/// Least-squares fit of `log(risk) = intercept + slope * log(rate)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `exp(intercept)`, the multiplicative constant in front of the rate.
    pub fitted_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate: f64,
    pub risk: RiskReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub label: String,
    pub formula: RateFormula,
    pub fit: RateFit,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Equality ignoring wall-clock times.
    pub fn same_numbers(&self, other: &SweepResult) -> bool {
        self.label == other.label
            && self.formula == other.formula
            && self.fit == other.fit
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.rate == b.rate && a.risk.same_numbers(&b.risk))
    }
}

/// Ordinary least squares on `(ln x, ln y)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateGrid(
            "need at least two paired points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateGrid(
            "log-log fit needs positive finite values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateGrid("rate values are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        fitted_constant: intercept.exp(),
    })
}

/// Mean risk on a worst-case signal at every grid point.
///
/// The signal at grid index `g` is drawn from `mix_path(base_seed, [SIGNAL, g])`
/// with amplitude `K gamma sqrt(log(e n2 / s))`.
pub fn grid_risks(cfg: &ExperimentConfig) -> Result<Vec<RiskReport>> {
    cfg.validate()?;
    let k = subgaussian_K(&cfg.noise);
    // Grid points share the configured pool with their trials.
    let mut inner = cfg.clone();
    inner.threads = None;
    in_pool(cfg.threads, || {
        cfg.grid
            .par_iter()
            .enumerate()
            .map(|(gi, g)| {
                let start = std::time::Instant::now();
                let seed = rng::mix_path(cfg.base_seed, &[streams::SIGNAL, gi as u64]);
                let m = worst_case_signal(g.n1, g.n2, g.s, k, cfg.gamma, seed)?;
                let values = trial_risks(&m, &inner, gi)?;
                Ok(summarize(&values, *g, start.elapsed().as_secs_f64()))
            })
            .collect()
    })
}

/// Minimum number of grid points and dynamic range of the rate.
pub const MIN_SWEEP_POINTS: usize = 4;
pub const MIN_RATE_RANGE: f64 = 4.0;

/// [`grid_risks`] regressed on the rate formula in log-log scale.
pub fn rate_sweep(cfg: &ExperimentConfig, formula: RateFormula) -> Result<SweepResult> {
    cfg.validate()?;
    let k = subgaussian_K(&cfg.noise);
    let rates = cfg
        .grid
        .iter()
        .map(|g| formula.eval(g.n1, g.n2, g.s, k, cfg.p))
        .collect::<Result<Vec<f64>>>()?;
    if rates.len() < MIN_SWEEP_POINTS {
        return Err(Error::DegenerateGrid(format!(
            "need at least {MIN_SWEEP_POINTS} grid points, got {}",
            rates.len()
        )));
    }
    let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().cloned().fold(0.0, f64::max);
    if hi < MIN_RATE_RANGE * lo {
        return Err(Error::DegenerateGrid(format!(
            "rate spans {lo:.4}..{hi:.4}, less than a factor {MIN_RATE_RANGE}"
        )));
    }

    let rows = grid_risks(cfg)?;
    let means: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let fit = fit_loglog(&rates, &means)?;
    Ok(SweepResult {
        label: format!("{formula:?}").to_lowercase(),
        formula,
        fit,
        rows: rates
            .into_iter()
            .zip(rows)
            .map(|(rate, risk)| SweepRow { rate, risk })
            .collect(),
    })
}
