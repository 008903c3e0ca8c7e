//! Penalized least-squares hard thresholding.
//!
//! The estimator minimizes
//!
//! ```text
//! ||Y - A||_2^2 + lambda * ||A||_0 * log(e n1 n2 / (||A||_0 v 1))
//! ```
//!
//! over all real matrices `A`. For a fixed support size `k` the best support
//! is the `k` largest magnitudes of `Y`, with `A = Y` on it, so the global
//! minimum is found by sorting once and scanning `k = 0..=n1 n2`.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;

/// Tuning of the penalized estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PenaltyRepr")]
#[allow(non_snake_case)]
pub struct PenaltyConfig {
    pub lambda: f64,
    /// Oracle-inequality parameter, `a > 1`.
    pub a: f64,
    /// The constant in `lambda = 2 a K0 K^2`.
    pub K0: f64,
}

#[derive(Deserialize)]
#[allow(non_snake_case)]
struct PenaltyRepr {
    lambda: f64,
    #[serde(default = "default_a")]
    a: f64,
    #[serde(default = "default_k0")]
    K0: f64,
}

fn default_a() -> f64 {
    2.0
}

fn default_k0() -> f64 {
    1.0
}

impl TryFrom<PenaltyRepr> for PenaltyConfig {
    type Error = Error;

    fn try_from(r: PenaltyRepr) -> Result<Self> {
        PenaltyConfig::new(r.lambda, r.a, r.K0)
    }
}

impl PenaltyConfig {
    #[allow(non_snake_case)]
    pub fn new(lambda: f64, a: f64, K0: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !(a > 1.0) || !a.is_finite() {
            return Err(Error::domain(format!("a must exceed 1, got {a}")));
        }
        if !(K0 > 0.0) || !K0.is_finite() {
            return Err(Error::domain(format!("K0 must be positive, got {K0}")));
        }
        Ok(PenaltyConfig { lambda, a, K0 })
    }

    /// `lambda` with the default `a = 2`, `K0 = 1`.
    pub fn with_lambda(lambda: f64) -> Result<Self> {
        Self::new(lambda, default_a(), default_k0())
    }

    /// Default for Gaussian noise of known level: `lambda = 4 sigma^2`.
    pub fn gaussian_default(sigma: f64) -> Result<Self> {
        Self::with_lambda(4.0 * sigma * sigma)
    }

    /// The oracle-inequality calibration `lambda = 2 a K0 K^2`.
    #[allow(non_snake_case)]
    pub fn calibrated(a: f64, K0: f64, K: f64) -> Result<Self> {
        Self::new(2.0 * a * K0 * K * K, a, K0)
    }
}

/// Result of one penalized fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub m_hat: RealMatrix,
    pub k_star: usize,
    pub objective_value: f64,
    /// Squared magnitude of the smallest kept entry; `+inf` when nothing is
    /// kept (serialized as `null`).
    #[serde(serialize_with = "finite_or_null")]
    pub kept_threshold: f64,
    /// Keep-rule diagnostics, see [`KeepRule`].
    pub keep_rule: KeepRule,
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Support sizes suggested by comparing sorted squared entries with the
/// threshold schedule. Both sequences are nonincreasing, so the comparison
/// can flip more than once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeepRule {
    /// Length of the leading run with `y_(j)^2 > t_j`.
    pub first_crossing: usize,
    /// Largest `j` with `y_(j)^2 > t_j`, or 0.
    pub last_crossing: usize,
}

fn check_k(k: usize, n1: usize, n2: usize) -> Result<()> {
    if k > n1 * n2 {
        return Err(Error::domain(format!(
            "support size {k} exceeds n1*n2 = {}",
            n1 * n2
        )));
    }
    Ok(())
}

/// `lambda * k * log(e n1 n2 / (k v 1))`, zero at `k = 0`.
pub fn penalty(k: usize, n1: usize, n2: usize, lambda: f64) -> Result<f64> {
    check_k(k, n1, n2)?;
    Ok(penalty_unchecked(k, n1 * n2, lambda))
}

fn penalty_unchecked(k: usize, n: usize, lambda: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let k = k as f64;
    lambda * k * (1.0 + (n as f64).ln() - k.ln())
}

/// Marginal penalty increments `t_j = pen(j) - pen(j-1)`, `j = 1..=n1 n2`.
///
/// Written out, `t_j = lambda (log(e n1 n2) - j log j + (j-1) log(j-1))`.
/// The sequence is nonincreasing because `k log(e N / k)` is concave.
pub fn threshold_schedule(n1: usize, n2: usize, lambda: f64) -> Vec<f64> {
    let n = n1 * n2;
    let log_en = 1.0 + (n as f64).ln();
    (1..=n)
        .map(|j| lambda * (log_en - xlogx(j) + xlogx(j - 1)))
        .collect()
}

fn xlogx(j: usize) -> f64 {
    if j <= 1 {
        0.0
    } else {
        let x = j as f64;
        x * x.ln()
    }
}

/// The alternating closed form
/// `lambda (log(e n1 n2) + sum_{i=2}^{j} (-1)^(i+j+1) i log i)`.
///
/// It coincides with the marginal increment only for `j <= 3`; from `j = 4`
/// on the alternating tail adds `sum_{i<j-1} (-1)^(i+j+1) i log i`. Kept for
/// comparison only.
pub fn alternating_threshold(j: usize, n1: usize, n2: usize, lambda: f64) -> f64 {
    let tail: f64 = (2..=j)
        .map(|i| {
            let sign = if (i + j + 1).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            sign * xlogx(i)
        })
        .sum();
    lambda * (1.0 + ((n1 * n2) as f64).ln() + tail)
}

/// Row-major indices sorted by decreasing magnitude, ties by index.
fn magnitude_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    order
}

/// Suffix sums of squares accumulated from the smallest magnitude upward:
/// `tail[k] = sum_{j > k} y_(j)^2`.
fn tail_energy(values: &[f64], order: &[usize]) -> Vec<f64> {
    let n = order.len();
    let mut tail = vec![0.0; n + 1];
    for k in (0..n).rev() {
        let y = values[order[k]];
        tail[k] = tail[k + 1] + y * y;
    }
    tail
}

fn fit_slice(values: &[f64], n_total: usize, lambda: f64) -> (Vec<f64>, usize, f64, f64, KeepRule) {
    let order = magnitude_order(values);
    let tail = tail_energy(values, &order);
    let mut k_star = 0;
    let mut best = tail[0];
    for (k, residual) in tail.iter().enumerate().skip(1) {
        let obj = residual + penalty_unchecked(k, n_total, lambda);
        if obj < best {
            best = obj;
            k_star = k;
        }
    }
    let mut kept = vec![0.0; values.len()];
    for &idx in &order[..k_star] {
        kept[idx] = values[idx];
    }
    let kept_threshold = if k_star == 0 {
        f64::INFINITY
    } else {
        let y = values[order[k_star - 1]];
        y * y
    };

    let mut first = 0;
    let mut last = 0;
    let mut leading = true;
    let log_en = 1.0 + (n_total as f64).ln();
    for (pos, &idx) in order.iter().enumerate() {
        let j = pos + 1;
        let t = lambda * (log_en - xlogx(j) + xlogx(j - 1));
        let y = values[idx];
        if y * y > t {
            last = j;
            if leading {
                first = j;
            }
        } else {
            leading = false;
        }
    }
    let rule = KeepRule {
        first_crossing: first,
        last_crossing: last,
    };
    (kept, k_star, best, kept_threshold, rule)
}

/// Exact global minimizer of the penalized criterion. Among equal
/// objectives the smallest support size wins, and among equal magnitudes
/// the lower row-major index is kept.
pub fn estimate_pls(y: &RealMatrix, cfg: &PenaltyConfig) -> EstimateReport {
    let (kept, k_star, objective_value, kept_threshold, keep_rule) =
        fit_slice(y.entries(), y.len(), cfg.lambda);
    EstimateReport {
        m_hat: RealMatrix::from_parts_unchecked(y.n1(), y.n2(), kept),
        k_star,
        objective_value,
        kept_threshold,
        keep_rule,
    }
}

/// Largest instance [`brute_force_pls`] accepts.
pub const BRUTE_FORCE_MAX_ENTRIES: usize = 20;

/// Exhaustive minimization over all `2^(n1 n2)` supports.
///
/// Supports are visited by size, then lexicographically by their sorted
/// index lists; the first one reaching the minimum wins. The residual of a
/// support sums the off-support squares from the smallest upward.
pub fn brute_force_pls(y: &RealMatrix, cfg: &PenaltyConfig) -> Result<EstimateReport> {
    let n = y.len();
    if n > BRUTE_FORCE_MAX_ENTRIES {
        return Err(Error::Capacity {
            what: "n1*n2",
            size: n,
            limit: BRUTE_FORCE_MAX_ENTRIES,
        });
    }
    let values = y.entries();
    let mut masks: Vec<u32> = (0..(1u32 << n)).collect();
    masks.sort_by(|&a, &b| {
        a.count_ones()
            .cmp(&b.count_ones())
            .then_with(|| lex_cmp(a, b, n))
    });

    let mut best: Option<(u32, f64)> = None;
    let mut off: Vec<f64> = Vec::with_capacity(n);
    for &mask in &masks {
        off.clear();
        off.extend(
            (0..n)
                .filter(|i| mask & (1 << i) == 0)
                .map(|i| values[i] * values[i]),
        );
        off.sort_by(f64::total_cmp);
        let residual = off.iter().fold(0.0, |acc, v| acc + v);
        let obj = residual + penalty_unchecked(mask.count_ones() as usize, n, cfg.lambda);
        if best.is_none_or(|(_, b)| obj < b) {
            best = Some((mask, obj));
        }
    }
    let (mask, objective_value) = best.expect("at least the empty support");
    let mut kept = vec![0.0; n];
    let mut kept_threshold = f64::INFINITY;
    for i in (0..n).filter(|i| mask & (1 << i) != 0) {
        kept[i] = values[i];
        kept_threshold = kept_threshold.min(values[i] * values[i]);
    }
    let (.., keep_rule) = fit_slice(values, n, cfg.lambda);
    Ok(EstimateReport {
        m_hat: RealMatrix::from_parts_unchecked(y.n1(), y.n2(), kept),
        k_star: mask.count_ones() as usize,
        objective_value,
        kept_threshold,
        keep_rule,
    })
}

/// Lexicographic order of the sorted index lists of two equal-size masks.
fn lex_cmp(a: u32, b: u32, n: usize) -> Ordering {
    let diff = a ^ b;
    if diff == 0 {
        return Ordering::Equal;
    }
    let lowest = diff.trailing_zeros() as usize;
    debug_assert!(lowest < n);
    // the set holding the lowest differing index comes first
    if a & (1 << lowest) != 0 {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Fits every row on its own, with the penalty computed for a `1 x n2`
/// problem. Rows are processed in parallel; the result does not depend on
/// scheduling.
pub fn estimate_rowwise(y: &RealMatrix, cfg: &PenaltyConfig) -> RealMatrix {
    estimate_rowwise_report(y, cfg).m_hat
}

/// [`estimate_rowwise`] plus the summed support size and objective.
pub fn estimate_rowwise_report(y: &RealMatrix, cfg: &PenaltyConfig) -> EstimateReport {
    let n2 = y.n2();
    let fits: Vec<_> = y
        .entries()
        .par_chunks_exact(n2)
        .map(|row| fit_slice(row, n2, cfg.lambda))
        .collect();
    let mut entries = Vec::with_capacity(y.len());
    let mut k_star = 0;
    let mut objective_value = 0.0;
    let mut kept_threshold = f64::INFINITY;
    let mut keep_rule = KeepRule {
        first_crossing: 0,
        last_crossing: 0,
    };
    for (kept, k, obj, thr, rule) in fits {
        entries.extend(kept);
        k_star += k;
        objective_value += obj;
        kept_threshold = kept_threshold.min(thr);
        keep_rule.first_crossing += rule.first_crossing;
        keep_rule.last_crossing += rule.last_crossing;
    }
    EstimateReport {
        m_hat: RealMatrix::from_parts_unchecked(y.n1(), n2, entries),
        k_star,
        objective_value,
        kept_threshold,
        keep_rule,
    }
}

/// The penalized objective of the top-`k` support, `sum_{j>k} y_(j)^2 + pen(k)`,
/// for every `k = 0..=n1 n2`.
pub fn objective_profile(y: &RealMatrix, cfg: &PenaltyConfig) -> Vec<f64> {
    let order = magnitude_order(y.entries());
    let tail = tail_energy(y.entries(), &order);
    tail.iter()
        .enumerate()
        .map(|(k, r)| r + penalty_unchecked(k, y.len(), cfg.lambda))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::l0_count;
    use approx::assert_relative_eq;

    fn lam(l: f64) -> PenaltyConfig {
        PenaltyConfig::with_lambda(l).unwrap()
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty(0, 3, 3, 2.0).unwrap(), 0.0);
        assert_relative_eq!(penalty(1, 1, 1, 1.0).unwrap(), 1.0);
        assert_relative_eq!(
            penalty(2, 2, 2, 1.0).unwrap(),
            3.386_294_361_119_891,
            max_relative = 1e-12
        );
        assert!(penalty(5, 2, 2, 1.0).is_err());
    }

    #[test]
    fn schedule_examples() {
        let t = threshold_schedule(2, 2, 1.0);
        assert_eq!(t.len(), 4);
        assert_relative_eq!(t[0], 1.0 + 4f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(t[1], 1.0, max_relative = 1e-14);
        // log(4e) + 2 log 2 - 3 log 3
        assert_relative_eq!(t[2], 0.476_751_856_235_452_4, max_relative = 1e-12);
        for j in 1..=3 {
            assert_relative_eq!(
                alternating_threshold(j, 2, 2, 1.0),
                t[j - 1],
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn alternating_form_departs_from_increment_at_four() {
        let t = threshold_schedule(3, 3, 1.0);
        let alt = alternating_threshold(4, 3, 3, 1.0);
        assert_relative_eq!(t[3] - alt, 2.0 * 2f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn schedule_sums_to_penalty_and_decreases() {
        for (n1, n2, l) in [(1, 7, 1.0), (4, 5, 0.3), (10, 10, 4.0)] {
            let t = threshold_schedule(n1, n2, l);
            let mut acc = 0.0;
            for (k, tj) in t.iter().enumerate() {
                acc += tj;
                let pen = penalty(k + 1, n1, n2, l).unwrap();
                assert!((acc - pen).abs() <= 1e-9 * pen);
            }
            assert!(t.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn zero_input_keeps_nothing() {
        let r = estimate_pls(&RealMatrix::zeros(3, 4), &lam(0.5));
        assert_eq!(r.k_star, 0);
        assert_eq!(r.m_hat, RealMatrix::zeros(3, 4));
        assert_eq!(r.kept_threshold, f64::INFINITY);
        assert_eq!(r.objective_value, 0.0);
    }

    #[test]
    fn four_entry_example() {
        let y = RealMatrix::from_rows(&[[3.0, 1.2, 0.5, 0.0]]).unwrap();
        let r = estimate_pls(&y, &lam(1.0));
        assert_eq!(r.k_star, 2);
        assert_eq!(
            r.m_hat,
            RealMatrix::from_rows(&[[3.0, 1.2, 0.0, 0.0]]).unwrap()
        );
        assert_relative_eq!(
            r.objective_value,
            0.25 + 2.0 * (2.0f64.ln() + 1.0),
            max_relative = 1e-12
        );
        assert_relative_eq!(r.kept_threshold, 1.44, max_relative = 1e-12);

        let profile = objective_profile(&y, &lam(1.0));
        let expected = [10.69, 4.0763, 3.6363, 3.8630, 4.0];
        for (p, e) in profile.iter().zip(expected) {
            assert!((p - e).abs() < 5e-4, "{p} vs {e}");
        }
        let bf = brute_force_pls(&y, &lam(1.0)).unwrap();
        assert_eq!(bf, r);
    }

    #[test]
    fn scalar_examples() {
        let r = estimate_pls(&RealMatrix::from_rows(&[[2.0]]).unwrap(), &lam(1.0));
        assert_eq!((r.k_star, r.m_hat.get(0, 0)), (1, 2.0));
        let bf = brute_force_pls(&RealMatrix::from_rows(&[[0.1]]).unwrap(), &lam(1.0)).unwrap();
        assert_eq!(bf.k_star, 0);
        assert_relative_eq!(bf.objective_value, 0.01, max_relative = 1e-12);
    }

    #[test]
    fn equal_magnitudes_agree_at_boundary() {
        for l in [0.05, 0.2, 1.0, 10.0] {
            let y = RealMatrix::from_rows(&[[1.0, -1.0], [1.0, 1.0]]).unwrap();
            let a = estimate_pls(&y, &lam(l));
            let b = brute_force_pls(&y, &lam(l)).unwrap();
            assert_eq!(a, b);
            assert!(
                a.k_star == 0 || a.k_star == 4,
                "lambda {l}: k*={}",
                a.k_star
            );
        }
    }

    #[test]
    fn ties_keep_lowest_index() {
        // k* = 1 with three equal magnitudes: keep index 0
        let y = RealMatrix::from_rows(&[[2.0, -2.0, 2.0, 0.1]]).unwrap();
        let cfg = lam(1.3);
        let a = estimate_pls(&y, &cfg);
        let b = brute_force_pls(&y, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.m_hat.get(0, 0) != 0.0 || a.k_star == 0);
    }

    #[test]
    fn brute_force_capacity() {
        let y = RealMatrix::zeros(3, 7);
        assert!(matches!(
            brute_force_pls(&y, &lam(1.0)),
            Err(Error::Capacity { size: 21, .. })
        ));
    }

    #[test]
    fn report_invariants() {
        let y = RealMatrix::from_rows(&[[0.3, -2.5, 1.1], [4.0, -0.2, 1.9]]).unwrap();
        let r = estimate_pls(&y, &lam(0.4));
        assert_eq!(l0_count(&r.m_hat), r.k_star);
        for (a, b) in r.m_hat.entries().iter().zip(y.entries()) {
            assert!(*a == 0.0 || a == b);
        }
        let profile = objective_profile(&y, &lam(0.4));
        assert!(profile.iter().all(|&o| r.objective_value <= o));
    }

    #[test]
    fn rowwise_examples() {
        let cfg = lam(1.0);
        let row = RealMatrix::from_rows(&[[3.0, 1.2, 0.5, 0.0]]).unwrap();
        assert_eq!(estimate_rowwise(&row, &cfg), estimate_pls(&row, &cfg).m_hat);

        let twin = RealMatrix::from_rows(&[[3.0, 1.2, 0.5, -2.0], [3.0, 1.2, 0.5, -2.0]]).unwrap();
        let out = estimate_rowwise(&twin, &cfg);
        assert_eq!(out.row(0), out.row(1));

        assert_eq!(
            estimate_rowwise(&RealMatrix::zeros(3, 5), &cfg),
            RealMatrix::zeros(3, 5)
        );

        let rep = estimate_rowwise_report(&twin, &cfg);
        assert_eq!(rep.k_star, l0_count(&rep.m_hat));
    }

    #[test]
    fn keep_rule_diagnostics() {
        let y = RealMatrix::from_rows(&[[3.0, 1.2, 0.5, 0.0]]).unwrap();
        let r = estimate_pls(&y, &lam(1.0));
        // t = [log(4e), 4log2-... ]: 9 > 2.386, 1.44 > t_2
        let t = threshold_schedule(1, 4, 1.0);
        let expected_first = [9.0, 1.44, 0.25, 0.0]
            .iter()
            .zip(&t)
            .take_while(|(y2, t)| y2 > t)
            .count();
        assert_eq!(r.keep_rule.first_crossing, expected_first);
        assert!(r.keep_rule.last_crossing >= r.keep_rule.first_crossing);
    }

    #[test]
    fn penalty_config_validation() {
        assert!(PenaltyConfig::new(0.0, 2.0, 1.0).is_err());
        assert!(PenaltyConfig::new(1.0, 1.0, 1.0).is_err());
        assert!(PenaltyConfig::new(1.0, 2.0, 0.0).is_err());
        let c = PenaltyConfig::calibrated(2.0, 1.5, 2.0).unwrap();
        assert_relative_eq!(c.lambda, 24.0);
        assert_eq!(PenaltyConfig::gaussian_default(0.5).unwrap().lambda, 1.0);
        let parsed: PenaltyConfig = serde_json::from_str(r#"{"lambda": 3.0}"#).unwrap();
        assert_eq!(parsed, PenaltyConfig::new(3.0, 2.0, 1.0).unwrap());
        assert!(serde_json::from_str::<PenaltyConfig>(r#"{"lambda": -1}"#).is_err());
    }

    #[test]
    fn report_json_uses_null_for_empty_support() {
        let r = estimate_pls(&RealMatrix::zeros(1, 2), &lam(1.0));
        let v = serde_json::to_value(&r).unwrap();
        assert!(v["kept_threshold"].is_null());
    }
}
