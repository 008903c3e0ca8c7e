//! Constant-free minimax rates and the integer solvers behind the
//! soft-sparsity bounds.
//!
//! Every rate here omits its absolute constant; the harness fits one
//! empirically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem size and regime. `noise` is `sigma` for the lower-bound rates and
/// `K` for the sub-Gaussian upper rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub n1: usize,
    pub n2: usize,
    pub s: f64,
    pub q: f64,
    pub noise: f64,
    pub p: f64,
}

impl ProblemDims {
    /// Hard sparsity (`q = 0`) in the squared Frobenius loss.
    pub fn hard(n1: usize, n2: usize, s: usize, sigma: f64) -> Self {
        ProblemDims {
            n1,
            n2,
            s: s as f64,
            q: 0.0,
            noise: sigma,
            p: 2.0,
        }
    }

    pub fn soft(n1: usize, n2: usize, s: f64, q: f64, noise: f64) -> Self {
        ProblemDims {
            n1,
            n2,
            s,
            q,
            noise,
            p: 2.0,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    fn check_common(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::domain("n1 and n2 must be positive"));
        }
        if !(self.noise > 0.0) || !self.noise.is_finite() {
            return Err(Error::domain(format!(
                "noise level must be positive, got {}",
                self.noise
            )));
        }
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(Error::domain(format!("s must be positive, got {}", self.s)));
        }
        Ok(())
    }

    /// Whether `1 <= s <= n2/2`, the range where the hard lower bound is
    /// proved.
    pub fn hard_bound_applies(&self) -> bool {
        self.s >= 1.0 && 2.0 * self.s <= self.n2 as f64
    }
}

/// `sigma^2 n1^(2/p) s log(e n2 / s)`.
///
/// Values of `s` above `n2 / 2` are still evaluated; check
/// [`ProblemDims::hard_bound_applies`] to flag them.
pub fn rate_hard(d: &ProblemDims) -> Result<f64> {
    d.check_common()?;
    if d.s < 1.0 {
        return Err(Error::domain(format!(
            "hard sparsity needs s >= 1, got {}",
            d.s
        )));
    }
    if !(d.p > 0.0) {
        return Err(Error::domain(format!("p must be positive, got {}", d.p)));
    }
    let sigma2 = d.noise * d.noise;
    Ok(sigma2 * (d.n1 as f64).powf(2.0 / d.p) * d.s * (1.0 + (d.n2 as f64 / d.s).ln()))
}

/// Which of the three soft-sparsity terms attains the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominantTerm {
    /// `s [sigma^2 log(1 + sigma^q n2 / s)]^(1 - q/2)`.
    Logarithmic,
    /// `s^(2/q)`.
    Radius,
    /// `n2 sigma^2`.
    Dense,
}

fn soft_terms(n2: usize, s: f64, noise: f64, q: f64) -> [f64; 3] {
    let n2 = n2 as f64;
    let sigma2 = noise * noise;
    [
        s * (sigma2 * (1.0 + noise.powf(q) * n2 / s).ln()).powf(1.0 - q / 2.0),
        s.powf(2.0 / q),
        n2 * sigma2,
    ]
}

fn max_term(terms: [f64; 3]) -> (f64, DominantTerm) {
    let labels = [
        DominantTerm::Logarithmic,
        DominantTerm::Radius,
        DominantTerm::Dense,
    ];
    let mut best = (terms[0], labels[0]);
    for (t, l) in terms.into_iter().zip(labels).skip(1) {
        if t > best.0 {
            best = (t, l);
        }
    }
    best
}

fn check_soft_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 2.0) {
        return Err(Error::domain(format!(
            "soft-sparsity rates need 0 < q < 2, got {q}; use rate_hard for q = 0"
        )));
    }
    Ok(())
}

/// Minimax rate for one `n2`-vector in `B_q(s)`.
pub fn eta_vect(n2: usize, s: f64, sigma: f64, q: f64) -> Result<f64> {
    if !(0.0..2.0).contains(&q) {
        return Err(Error::domain(format!("q must lie in [0, 2), got {q}")));
    }
    let d = ProblemDims::soft(1, n2, s, q, sigma);
    if q == 0.0 {
        return rate_hard(&d);
    }
    d.check_common()?;
    Ok(max_term(soft_terms(n2, s, sigma, q)).0)
}

/// `eta_vect` with its dominant term.
pub fn eta_vect_labelled(n2: usize, s: f64, sigma: f64, q: f64) -> Result<(f64, DominantTerm)> {
    check_soft_q(q)?;
    ProblemDims::soft(1, n2, s, q, sigma).check_common()?;
    Ok(max_term(soft_terms(n2, s, sigma, q)))
}

fn soft_rate(d: &ProblemDims) -> Result<(f64, DominantTerm)> {
    check_soft_q(d.q)?;
    d.check_common()?;
    if d.p != 2.0 {
        return Err(Error::domain(format!(
            "soft-sparsity rates are available for p = 2 only, got p = {}",
            d.p
        )));
    }
    let n1 = d.n1 as f64;
    let terms = soft_terms(d.n2, d.s, d.noise, d.q).map(|t| n1 * t);
    Ok(max_term(terms))
}

/// Soft-sparsity lower rate
/// `max(n1 s [sigma^2 log(1 + sigma^q n2/s)]^(1-q/2), n1 s^(2/q), n1 n2 sigma^2)`
/// with `d.noise = sigma`.
pub fn eta_soft(d: &ProblemDims) -> Result<f64> {
    soft_rate(d).map(|r| r.0)
}

/// The same three-term maximum with the sub-Gaussian constant `K` in place
/// of `sigma` (`d.noise = K`).
pub fn psi_soft(d: &ProblemDims) -> Result<f64> {
    soft_rate(d).map(|r| r.0)
}

/// Soft rate with the label of its dominant term.
pub fn soft_rate_labelled(d: &ProblemDims) -> Result<(f64, DominantTerm)> {
    soft_rate(d)
}

/// Largest `k` the solver scans before giving up.
pub fn solve_k_cap(n2: usize) -> usize {
    n2.max(1_000_000)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolvedK {
    pub k: usize,
    /// The cap was reached; the true solution may be larger.
    pub capped: bool,
}

/// Whether `k <= s sigma^(-q) (log(1 + n2/k))^(-q/2)`.
pub fn k_condition(k: usize, n2: usize, s: f64, sigma: f64, q: f64) -> bool {
    let kf = k as f64;
    kf <= s * sigma.powf(-q) * (1.0 + n2 as f64 / kf).ln().powf(-q / 2.0)
}

/// Largest integer `k >= 1` with `k <= s sigma^(-q) (log(1 + n2/k))^(-q/2)`,
/// or 0 when `k = 1` already fails.
///
/// `k (log(1 + n2/k))^(q/2)` increases in `k`, so the feasible set is an
/// initial segment and bisection finds its end.
pub fn solve_k(n2: usize, s: f64, sigma: f64, q: f64) -> Result<SolvedK> {
    check_soft_q(q)?;
    ProblemDims::soft(1, n2, s, q, sigma).check_common()?;
    if !k_condition(1, n2, s, sigma, q) {
        return Ok(SolvedK {
            k: 0,
            capped: false,
        });
    }
    let cap = solve_k_cap(n2);
    if k_condition(cap, n2, s, sigma, q) {
        return Ok(SolvedK {
            k: cap,
            capped: true,
        });
    }
    // invariant: condition(lo) holds, condition(hi) fails
    let (mut lo, mut hi) = (1usize, cap);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if k_condition(mid, n2, s, sigma, q) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SolvedK {
        k: lo,
        capped: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SPrime {
    pub s_prime: usize,
    pub clamped_low: bool,
    pub clamped_high: bool,
}

/// `floor(c' (s / K^q) (log(1 + n2 K^q / s))^(-q/2))` clamped to
/// `[1, floor(n2/2)]`.
#[allow(non_snake_case)]
pub fn balance_sprime(n2: usize, s: f64, K: f64, q: f64, c_prime: f64) -> Result<SPrime> {
    if !(q > 0.0 && q <= 2.0) {
        return Err(Error::domain(format!("q must lie in (0, 2], got {q}")));
    }
    if n2 < 2 {
        return Err(Error::domain(format!("n2 must be at least 2, got {n2}")));
    }
    if !(c_prime > 0.0) {
        return Err(Error::domain(format!("c' must be positive, got {c_prime}")));
    }
    ProblemDims::soft(1, n2, s, q, K).check_common()?;
    let kq = K.powf(q);
    let raw = (c_prime * (s / kq) * (1.0 + n2 as f64 * kq / s).ln().powf(-q / 2.0)).floor();
    let hi = n2 / 2;
    Ok(if raw < 1.0 {
        SPrime {
            s_prime: 1,
            clamped_low: true,
            clamped_high: false,
        }
    } else if raw > hi as f64 {
        SPrime {
            s_prime: hi,
            clamped_low: false,
            clamped_high: true,
        }
    } else {
        SPrime {
            s_prime: raw as usize,
            clamped_low: false,
            clamped_high: false,
        }
    })
}
