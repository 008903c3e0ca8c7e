//! Binary row-sparse packings and their certificates.
//!
//! A pattern is an `n1 x n2` 0/1 matrix with exactly `s` ones in every row.
//! [`vg_pack`] grows a Hamming-separated family greedily from uniform random
//! patterns; [`embed_replicate`] and [`embed_pad_ones`] lift a packing built
//! in a smaller space into the target one. Scaled packings are the
//! hypotheses of the lower-bound argument, and [`verify_pack`] /
//! [`pair_checks`] replay the separation and divergence conditions on every
//! pair.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{in_class, RealMatrix, SparsityClass};
use crate::{norm_2p, rng};

/// A 0/1 matrix with the same number of ones in every row, stored as one
/// bitset per row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryPattern {
    n1: usize,
    n2: usize,
    s: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BinaryPattern {
    /// Builds a pattern from the column indices of the ones in each row.
    pub fn from_supports(n2: usize, supports: &[Vec<usize>]) -> Result<Self> {
        let n1 = supports.len();
        if n1 == 0 || n2 == 0 {
            return Err(Error::domain("pattern dimensions must be positive"));
        }
        let s = supports[0].len();
        let words_per_row = n2.div_ceil(64);
        let mut bits = vec![0u64; n1 * words_per_row];
        for (i, cols) in supports.iter().enumerate() {
            if cols.len() != s {
                return Err(Error::Parse(format!(
                    "row {i} has {} ones, expected {s}",
                    cols.len()
                )));
            }
            for &j in cols {
                if j >= n2 {
                    return Err(Error::Parse(format!("column {j} out of range in row {i}")));
                }
                let w = &mut bits[i * words_per_row + j / 64];
                if *w & (1 << (j % 64)) != 0 {
                    return Err(Error::Parse(format!("column {j} repeated in row {i}")));
                }
                *w |= 1 << (j % 64);
            }
        }
        Ok(BinaryPattern {
            n1,
            n2,
            s,
            words_per_row,
            bits,
        })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    /// Ones per row.
    pub fn row_weight(&self) -> usize {
        self.s
    }

    fn row_words(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.row_words(i)[j / 64] & (1 << (j % 64)) != 0
    }

    /// Column indices of the ones in row `i`, increasing.
    pub fn row_support(&self, i: usize) -> Vec<usize> {
        (0..self.n2).filter(|&j| self.get(i, j)).collect()
    }

    pub fn supports(&self) -> Vec<Vec<usize>> {
        (0..self.n1).map(|i| self.row_support(i)).collect()
    }

    pub fn to_matrix(&self) -> RealMatrix {
        let entries = (0..self.n1)
            .flat_map(|i| (0..self.n2).map(move |j| (i, j)))
            .map(|(i, j)| if self.get(i, j) { 1.0 } else { 0.0 })
            .collect();
        RealMatrix::from_parts_unchecked(self.n1, self.n2, entries)
    }

    fn row_distance(&self, other: &BinaryPattern, i: usize) -> usize {
        self.row_words(i)
            .iter()
            .zip(other.row_words(i))
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    fn check_dims(&self, other: &BinaryPattern) -> Result<()> {
        if (self.n1, self.n2) != (other.n1, other.n2) {
            return Err(Error::DimensionMismatch {
                expected: (self.n1, self.n2),
                found: (other.n1, other.n2),
            });
        }
        Ok(())
    }

    fn random(n1: usize, n2: usize, s: usize, g: &mut rng::Generator) -> Self {
        let supports: Vec<Vec<usize>> = (0..n1)
            .map(|_| index::sample(g, n2, s).into_vec())
            .collect();
        Self::from_supports(n2, &supports).expect("sampled supports are valid")
    }
}

/// A uniformly random pattern with `s` ones per row.
pub fn random_pattern(n1: usize, n2: usize, s: usize, seed: u64) -> Result<BinaryPattern> {
    if n1 == 0 || s == 0 || s > n2 {
        return Err(Error::domain(format!(
            "need n1 >= 1 and 1 <= s <= n2, got n1={n1}, s={s}, n2={n2}"
        )));
    }
    Ok(BinaryPattern::random(n1, n2, s, &mut rng::generator(seed)))
}

/// Number of disagreeing entries.
pub fn hamming(a: &BinaryPattern, b: &BinaryPattern) -> Result<usize> {
    a.check_dims(b)?;
    Ok(hamming_unchecked(a, b))
}

fn hamming_unchecked(a: &BinaryPattern, b: &BinaryPattern) -> usize {
    a.bits
        .iter()
        .zip(&b.bits)
        .map(|(x, y)| (x ^ y).count_ones() as usize)
        .sum()
}

/// Number of rows disagreeing in more than `s / 32` positions.
pub fn row_disagreement(a: &BinaryPattern, b: &BinaryPattern, s: usize) -> Result<usize> {
    a.check_dims(b)?;
    let cut = s as f64 / 32.0;
    Ok((0..a.n1)
        .filter(|&i| a.row_distance(b, i) as f64 > cut)
        .count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    Greedy,
    ReplicateEmbed,
    PadOnesEmbed,
}

/// A Hamming-separated family of patterns sharing dimensions and row weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingSet {
    pub n1: usize,
    pub n2: usize,
    pub s: usize,
    pub patterns: Vec<BinaryPattern>,
    pub d_min_required: usize,
    /// Smallest pairwise distance; `None` with fewer than two patterns.
    pub d_min_achieved: Option<usize>,
    pub log_cardinality: f64,
    pub construction: Construction,
}

impl PackingSet {
    /// Assembles a set and recomputes its minimum distance.
    pub fn new(
        n1: usize,
        n2: usize,
        s: usize,
        patterns: Vec<BinaryPattern>,
        d_min_required: usize,
        construction: Construction,
    ) -> Result<Self> {
        for p in &patterns {
            if (p.n1, p.n2, p.s) != (n1, n2, s) {
                return Err(Error::domain(format!(
                    "pattern shape {}x{} weight {} does not match packing {n1}x{n2} weight {s}",
                    p.n1, p.n2, p.s
                )));
            }
        }
        let d_min_achieved = min_pairwise_distance(&patterns);
        Ok(PackingSet {
            n1,
            n2,
            s,
            log_cardinality: (patterns.len() as f64).ln(),
            patterns,
            d_min_required,
            d_min_achieved,
            construction,
        })
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// All unordered pairs `(i, j)`, `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (&BinaryPattern, &BinaryPattern)> {
        let p = &self.patterns;
        (0..p.len()).flat_map(move |i| (i + 1..p.len()).map(move |j| (&p[i], &p[j])))
    }
}

/// Exhaustive minimum over all pairs, parallel over the first index.
pub fn min_pairwise_distance(patterns: &[BinaryPattern]) -> Option<usize> {
    (0..patterns.len())
        .into_par_iter()
        .filter_map(|i| {
            patterns[i + 1..]
                .iter()
                .map(|q| hamming_unchecked(&patterns[i], q))
                .min()
        })
        .min()
}

/// Cap on the size of a greedy packing.
pub const DEFAULT_MAX_PATTERNS: usize = 1024;

/// Greedy randomized packing: draw uniform patterns and accept each one at
/// distance `>= d_min` from everything accepted so far. Stops after `budget`
/// consecutive rejections or at [`DEFAULT_MAX_PATTERNS`] patterns.
pub fn vg_pack(
    n1: usize,
    n2: usize,
    s: usize,
    d_min: usize,
    budget: usize,
    seed: u64,
) -> Result<PackingSet> {
    vg_pack_capped(n1, n2, s, d_min, budget, seed, DEFAULT_MAX_PATTERNS)
}

/// [`vg_pack`] with an explicit size cap.
pub fn vg_pack_capped(
    n1: usize,
    n2: usize,
    s: usize,
    d_min: usize,
    budget: usize,
    seed: u64,
    max_patterns: usize,
) -> Result<PackingSet> {
    if n1 == 0 || s == 0 || 2 * s > n2 {
        return Err(Error::domain(format!(
            "need n1 >= 1 and 1 <= s <= n2/2, got n1={n1}, n2={n2}, s={s}"
        )));
    }
    if d_min == 0 || budget == 0 || max_patterns == 0 {
        return Err(Error::domain(
            "d_min, budget and max_patterns must be positive",
        ));
    }
    let mut g = rng::generator(seed);
    let mut accepted: Vec<BinaryPattern> = Vec::new();
    let mut rejections = 0;
    while rejections < budget && accepted.len() < max_patterns {
        let cand = BinaryPattern::random(n1, n2, s, &mut g);
        if accepted
            .iter()
            .all(|a| hamming_unchecked(a, &cand) >= d_min)
        {
            accepted.push(cand);
            rejections = 0;
        } else {
            rejections += 1;
        }
    }
    PackingSet::new(n1, n2, s, accepted, d_min, Construction::Greedy)
}

/// Repeats each one-per-row base pattern of width `l = n2 / s` side by side
/// `s` times and zero-pads to width `n2`. Distances scale by `s`.
pub fn embed_replicate(base: &PackingSet, s: usize, n2: usize) -> Result<PackingSet> {
    if base.s != 1 {
        return Err(Error::domain(format!(
            "replication needs one 1 per base row, got {}",
            base.s
        )));
    }
    if s == 0 || base.n2 != n2 / s {
        return Err(Error::domain(format!(
            "base width {} must equal floor(n2 / s) = {}",
            base.n2,
            n2.checked_div(s).unwrap_or(0)
        )));
    }
    let l = base.n2;
    let patterns = base
        .patterns
        .iter()
        .map(|p| {
            let supports: Vec<Vec<usize>> = (0..p.n1)
                .map(|i| {
                    let c = p.row_support(i)[0];
                    (0..s).map(|r| c + r * l).collect()
                })
                .collect();
            BinaryPattern::from_supports(n2, &supports)
        })
        .collect::<Result<Vec<_>>>()?;
    PackingSet::new(
        base.n1,
        n2,
        s,
        patterns,
        base.d_min_required * s,
        Construction::ReplicateEmbed,
    )
}

/// Appends `s - s'` all-ones columns to every base pattern of row weight
/// `s'`. Distances are unchanged.
pub fn embed_pad_ones(base: &PackingSet, s: usize, n2: usize) -> Result<PackingSet> {
    if base.s > s || n2 != base.n2 + (s - base.s) {
        return Err(Error::domain(format!(
            "padding a width-{} weight-{} base to weight {s} gives width {}, not {n2}",
            base.n2,
            base.s,
            base.n2 + s.saturating_sub(base.s)
        )));
    }
    let pad: Vec<usize> = (base.n2..n2).collect();
    let patterns = base
        .patterns
        .iter()
        .map(|p| {
            let supports: Vec<Vec<usize>> = (0..p.n1)
                .map(|i| {
                    let mut cols = p.row_support(i);
                    cols.extend_from_slice(&pad);
                    cols
                })
                .collect();
            BinaryPattern::from_supports(n2, &supports)
        })
        .collect::<Result<Vec<_>>>()?;
    PackingSet::new(
        base.n1,
        n2,
        s,
        patterns,
        base.d_min_required,
        Construction::PadOnesEmbed,
    )
}

/// `KL(N(B, sigma^2 I), N(B', sigma^2 I)) = ||B - B'||_2^2 / (2 sigma^2)`.
pub fn kl_gaussian(b: &RealMatrix, b2: &RealMatrix, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let diff = b.try_sub(b2)?;
    Ok(diff.sq_frobenius() / (2.0 * sigma * sigma))
}

/// How patterns become hypothesis matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMode {
    /// Amplitude `sigma * gamma * sqrt(log(e n2 / s))`, `0 < gamma < 1`.
    Hard { gamma: f64, sigma: f64 },
    /// Amplitude `tau * (delta_bar / s)^(1/q)` with `s` the pattern row
    /// weight; outputs must lie in the l_q class of the given radius.
    Soft {
        q: f64,
        tau: f64,
        delta_bar: f64,
        radius: f64,
    },
}

/// `sigma * gamma * sqrt(log(e n2 / s))`.
pub fn hard_amplitude(n2: usize, s: usize, gamma: f64, sigma: f64) -> f64 {
    sigma * gamma * (1.0 + (n2 as f64 / s as f64).ln()).sqrt()
}

fn open_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::domain(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

/// The amplitude `mode` assigns to a packing of shape `(n2, s)`.
pub fn scale_amplitude(n2: usize, s: usize, mode: &ScaleMode) -> Result<f64> {
    match *mode {
        ScaleMode::Hard { gamma, sigma } => {
            open_unit("gamma", gamma)?;
            if !(sigma > 0.0) {
                return Err(Error::domain(format!(
                    "sigma must be positive, got {sigma}"
                )));
            }
            Ok(hard_amplitude(n2, s, gamma, sigma))
        }
        ScaleMode::Soft {
            q, tau, delta_bar, ..
        } => {
            open_unit("tau", tau)?;
            if !(q > 0.0 && q < 2.0) {
                return Err(Error::domain(format!("q must lie in (0, 2), got {q}")));
            }
            if !(delta_bar > 0.0) {
                return Err(Error::domain(format!(
                    "delta_bar must be positive, got {delta_bar}"
                )));
            }
            Ok(tau * (delta_bar / s as f64).powf(1.0 / q))
        }
    }
}

/// Multiplies every pattern by the mode's amplitude.
pub fn scale_pack(pack: &PackingSet, mode: &ScaleMode) -> Result<Vec<RealMatrix>> {
    let amp = scale_amplitude(pack.n2, pack.s, mode)?;
    let out: Vec<RealMatrix> = pack
        .patterns
        .iter()
        .map(|p| p.to_matrix().scaled(amp))
        .collect::<Result<_>>()?;
    if let ScaleMode::Soft { q, radius, .. } = *mode {
        let class = SparsityClass::new(q, radius)?;
        if let Some(pos) = out.iter().position(|m| !in_class(m, &class)) {
            return Err(Error::domain(format!(
                "scaled pattern {pos} leaves the l_{q} ball of radius {radius}"
            )));
        }
    }
    Ok(out)
}

/// `n1 (s + 1) / 16`.
pub fn separation_requirement(n1: usize, s: usize) -> f64 {
    n1 as f64 * (s as f64 + 1.0) / 16.0
}

/// `n1 s log(e n2 / s)`.
pub fn log_volume_scale(n1: usize, n2: usize, s: usize) -> f64 {
    n1 as f64 * s as f64 * (1.0 + (n2 as f64 / s as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackCertificate {
    pub patterns: usize,
    pub log_cardinality: f64,
    pub c_target: f64,
    /// `c_target * n1 s log(e n2 / s)`.
    pub log_cardinality_target: f64,
    /// `log|pack| / (n1 s log(e n2 / s))`, the constant actually achieved.
    pub achieved_constant: f64,
    pub distance_requirement: f64,
    pub d_min_required: usize,
    pub d_min_achieved: Option<usize>,
    pub distance_pass: bool,
    pub required_distance_pass: bool,
    pub cardinality_pass: bool,
}

impl PackCertificate {
    pub fn pass(&self) -> bool {
        self.distance_pass && self.required_distance_pass && self.cardinality_pass
    }
}

/// Recomputes the minimum distance and compares cardinality against
/// `c_target * n1 s log(e n2 / s)`.
pub fn verify_pack(pack: &PackingSet, c_target: f64) -> PackCertificate {
    let d = min_pairwise_distance(&pack.patterns);
    let scale = log_volume_scale(pack.n1, pack.n2, pack.s);
    let log_card = if pack.is_empty() {
        f64::NEG_INFINITY
    } else {
        (pack.len() as f64).ln()
    };
    let req = separation_requirement(pack.n1, pack.s);
    PackCertificate {
        patterns: pack.len(),
        log_cardinality: log_card,
        c_target,
        log_cardinality_target: c_target * scale,
        achieved_constant: log_card / scale,
        distance_requirement: req,
        d_min_required: pack.d_min_required,
        d_min_achieved: d,
        distance_pass: d.is_none_or(|d| d as f64 >= req),
        required_distance_pass: d.is_none_or(|d| d >= pack.d_min_required),
        cardinality_pass: log_card >= c_target * scale,
    }
}

/// Pairwise replay of the lower-bound conditions on a hard-scaled packing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheckReport {
    pub pairs: usize,
    /// Pairs with `d_H >= n1 (s + 1) / 16`.
    pub premise_pairs: usize,
    /// Premise pairs with fewer than `n1 / 64` strongly disagreeing rows.
    pub row_disagreement_violations: usize,
    /// Pairs whose divergence exceeds `gamma^2 n1 s log(e n2 / s)`.
    pub kl_violations: usize,
    pub max_kl_ratio: f64,
    /// `(p, violations)` of the `||.||_{2,p}` separation on premise pairs.
    pub separation_violations: Vec<(f64, usize)>,
}

impl PairCheckReport {
    pub fn clean(&self) -> bool {
        self.row_disagreement_violations == 0
            && self.kl_violations == 0
            && self.separation_violations.iter().all(|&(_, v)| v == 0)
    }
}

/// Checks every pair of `pack` scaled by `sigma * gamma * sqrt(log(e n2/s))`.
pub fn pair_checks(
    pack: &PackingSet,
    gamma: f64,
    sigma: f64,
    ps: &[f64],
) -> Result<PairCheckReport> {
    let mats = scale_pack(pack, &ScaleMode::Hard { gamma, sigma })?;
    let (n1, n2, s) = (pack.n1, pack.n2, pack.s);
    let scale = log_volume_scale(n1, n2, s);
    let kl_bound = gamma * gamma * scale;
    let premise = separation_requirement(n1, s);
    let rows_needed = n1 as f64 / 64.0;

    struct Tally {
        pairs: usize,
        premise: usize,
        rows: usize,
        kl: usize,
        kl_ratio: f64,
        sep: Vec<usize>,
    }
    let n = pack.len();
    let tally = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut t = Tally {
                pairs: 0,
                premise: 0,
                rows: 0,
                kl: 0,
                kl_ratio: 0.0,
                sep: vec![0; ps.len()],
            };
            for j in i + 1..n {
                let (a, b) = (&pack.patterns[i], &pack.patterns[j]);
                t.pairs += 1;
                let kl = kl_gaussian(&mats[i], &mats[j], sigma).expect("same dims");
                t.kl_ratio = t.kl_ratio.max(kl / kl_bound);
                if kl > kl_bound {
                    t.kl += 1;
                }
                if (hamming_unchecked(a, b) as f64) < premise {
                    continue;
                }
                t.premise += 1;
                if (row_disagreement(a, b, s).expect("same dims") as f64) < rows_needed {
                    t.rows += 1;
                }
                let diff = mats[i].try_sub(&mats[j]).expect("same dims");
                for (k, &p) in ps.iter().enumerate() {
                    let lhs = norm_2p(&diff, p).expect("p > 0").powi(2);
                    let rhs = gamma * gamma * sigma * sigma / 64f64.powf(1.0 + 2.0 / p)
                        * (n1 as f64).powf(2.0 / p)
                        * s as f64
                        * (1.0 + (n2 as f64 / s as f64).ln());
                    if lhs < rhs {
                        t.sep[k] += 1;
                    }
                }
            }
            t
        })
        .reduce(
            || Tally {
                pairs: 0,
                premise: 0,
                rows: 0,
                kl: 0,
                kl_ratio: 0.0,
                sep: vec![0; ps.len()],
            },
            |mut a, b| {
                a.pairs += b.pairs;
                a.premise += b.premise;
                a.rows += b.rows;
                a.kl += b.kl;
                a.kl_ratio = a.kl_ratio.max(b.kl_ratio);
                for (x, y) in a.sep.iter_mut().zip(b.sep) {
                    *x += y;
                }
                a
            },
        );
    Ok(PairCheckReport {
        pairs: tally.pairs,
        premise_pairs: tally.premise,
        row_disagreement_violations: tally.rows,
        kl_violations: tally.kl,
        max_kl_ratio: tally.kl_ratio,
        separation_violations: ps.iter().copied().zip(tally.sep).collect(),
    })
}

/// On-disk form: patterns as row-wise column-index lists plus a certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PackFile {
    pub n1: usize,
    pub n2: usize,
    pub s: usize,
    pub construction: Construction,
    pub d_min_required: usize,
    pub d_min_achieved: Option<usize>,
    pub log_cardinality: f64,
    pub patterns: Vec<Vec<Vec<usize>>>,
    pub certificate: PackCertificate,
}

impl PackFile {
    pub fn new(pack: &PackingSet, c_target: f64) -> Self {
        PackFile {
            n1: pack.n1,
            n2: pack.n2,
            s: pack.s,
            construction: pack.construction,
            d_min_required: pack.d_min_required,
            d_min_achieved: pack.d_min_achieved,
            log_cardinality: pack.log_cardinality,
            patterns: pack.patterns.iter().map(BinaryPattern::supports).collect(),
            certificate: verify_pack(pack, c_target),
        }
    }

    /// Rebuilds the packing; distances are recomputed, not trusted.
    pub fn to_packing(&self) -> Result<PackingSet> {
        let patterns = self
            .patterns
            .iter()
            .map(|rows| BinaryPattern::from_supports(self.n2, rows))
            .collect::<Result<Vec<_>>>()?;
        PackingSet::new(
            self.n1,
            self.n2,
            self.s,
            patterns,
            self.d_min_required,
            self.construction,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pat(n2: usize, rows: &[&[usize]]) -> BinaryPattern {
        let rows: Vec<Vec<usize>> = rows.iter().map(|r| r.to_vec()).collect();
        BinaryPattern::from_supports(n2, &rows).unwrap()
    }

    fn single_pack(n2: usize, s: usize, rows_list: &[&[&[usize]]], d: usize) -> PackingSet {
        let pats = rows_list.iter().map(|r| pat(n2, r)).collect();
        PackingSet::new(rows_list[0].len(), n2, s, pats, d, Construction::Greedy).unwrap()
    }

    #[test]
    fn hamming_examples() {
        let a = pat(2, &[&[0]]);
        let b = pat(2, &[&[1]]);
        assert_eq!(hamming(&a, &a).unwrap(), 0);
        assert_eq!(hamming(&a, &b).unwrap(), 2);
        let c = pat(3, &[&[0]]);
        assert!(matches!(
            hamming(&a, &c),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hamming_bounded_by_twice_row_weight() {
        for seed in 0..50 {
            let a = random_pattern(5, 70, 3, seed).unwrap();
            let b = random_pattern(5, 70, 3, seed + 1000).unwrap();
            assert!(hamming(&a, &b).unwrap() <= 2 * 5 * 3);
        }
    }

    #[test]
    fn pattern_validation() {
        assert!(BinaryPattern::from_supports(3, &[vec![0], vec![0, 1]]).is_err());
        assert!(BinaryPattern::from_supports(3, &[vec![3]]).is_err());
        assert!(BinaryPattern::from_supports(3, &[vec![1, 1]]).is_err());
        let p = pat(130, &[&[0, 64, 129]]);
        assert_eq!(p.row_support(0), vec![0, 64, 129]);
        assert_eq!(p.to_matrix().get(0, 129), 1.0);
    }

    #[test]
    fn greedy_on_two_point_space() {
        let pack = vg_pack(1, 2, 1, 2, 200, 5).unwrap();
        assert_eq!(pack.len(), 2);
        assert_eq!(pack.d_min_achieved, Some(2));
        let mut supports: Vec<_> = pack.patterns.iter().map(|p| p.supports()).collect();
        supports.sort();
        assert_eq!(supports, vec![vec![vec![0]], vec![vec![1]]]);
    }

    #[test]
    fn greedy_rejects_heavy_rows() {
        assert!(vg_pack(2, 5, 3, 1, 10, 0).is_err());
        assert!(vg_pack(2, 4, 0, 1, 10, 0).is_err());
        assert!(vg_pack(2, 4, 2, 0, 10, 0).is_err());
    }

    #[test]
    fn greedy_respects_cap_and_distance() {
        let pack = vg_pack_capped(4, 16, 2, 3, 1000, 9, 50).unwrap();
        assert_eq!(pack.len(), 50);
        assert!(pack.d_min_achieved.unwrap() >= 3);
        assert!(pack.patterns.iter().all(|p| p.row_weight() == 2));
    }

    #[test]
    fn replicate_example_and_distance_scaling() {
        let base = single_pack(2, 1, &[&[&[0]], &[&[1]]], 2);
        let out = embed_replicate(&base, 2, 5).unwrap();
        assert_eq!(out.patterns[0].supports(), vec![vec![0, 2]]);
        let m = out.patterns[0].to_matrix();
        assert_eq!(m.entries(), &[1.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(out.len(), base.len());
        assert_eq!(out.d_min_achieved, Some(4));
        assert_eq!(out.d_min_required, 4);
        assert_eq!(out.construction, Construction::ReplicateEmbed);
        assert!(embed_replicate(&base, 2, 7).is_err());
    }

    #[test]
    fn replicate_of_greedy_half_separated_base() {
        let (n1, s, n2) = (8, 3, 30);
        let l = n2 / s;
        let base = vg_pack(n1, l, 1, n1 / 2, 2000, 17).unwrap();
        let out = embed_replicate(&base, s, n2).unwrap();
        for (i, j) in (0..base.len()).flat_map(|i| (i + 1..base.len()).map(move |j| (i, j))) {
            let d0 = hamming(&base.patterns[i], &base.patterns[j]).unwrap();
            let d1 = hamming(&out.patterns[i], &out.patterns[j]).unwrap();
            assert_eq!(d1, s * d0);
        }
        let d = out.d_min_achieved.unwrap();
        assert!(d >= s * n1 / 2);
        assert!(d as f64 >= n1 as f64 * (s as f64 + 1.0) / 4.0);
    }

    #[test]
    fn pad_ones_example_and_invariance() {
        let base = single_pack(3, 1, &[&[&[0]], &[&[2]]], 2);
        let out = embed_pad_ones(&base, 2, 4).unwrap();
        assert_eq!(out.patterns[0].supports(), vec![vec![0, 3]]);
        assert!(out.patterns.iter().all(|p| p.row_weight() == 2));
        assert_eq!(
            hamming(&out.patterns[0], &out.patterns[1]).unwrap(),
            hamming(&base.patterns[0], &base.patterns[1]).unwrap()
        );
        assert!(embed_pad_ones(&base, 2, 5).is_err());
        assert!(embed_pad_ones(&base, 0, 2).is_err());
    }

    #[test]
    fn row_disagreement_examples() {
        let a = pat(4, &[&[0, 1], &[0, 1]]);
        let b = pat(4, &[&[2, 3], &[2, 3]]);
        assert_eq!(row_disagreement(&a, &a, 2).unwrap(), 0);
        assert_eq!(row_disagreement(&a, &b, 2).unwrap(), 2);
        // a single disagreement in a row only counts when s < 32
        let c = pat(4, &[&[0, 1], &[0, 2]]);
        assert_eq!(row_disagreement(&a, &c, 2).unwrap(), 1);
    }

    #[test]
    fn kl_examples() {
        let b = RealMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let b2 = RealMatrix::from_rows(&[[1.0, 4.0]]).unwrap();
        assert_eq!(kl_gaussian(&b, &b, 1.0).unwrap(), 0.0);
        assert_relative_eq!(kl_gaussian(&b, &b2, 1.0).unwrap(), 2.0);
        let c = 3.0;
        assert_relative_eq!(
            kl_gaussian(&b.scaled(c).unwrap(), &b2.scaled(c).unwrap(), 0.7).unwrap(),
            c * c * kl_gaussian(&b, &b2, 0.7).unwrap(),
            max_relative = 1e-12
        );
        assert!(kl_gaussian(&b, &b2, 0.0).is_err());
        assert!(kl_gaussian(&b, &RealMatrix::zeros(2, 1), 1.0).is_err());
    }

    #[test]
    fn scale_examples() {
        let pack = single_pack(2, 1, &[&[&[0]], &[&[1]]], 2);
        let mats = scale_pack(
            &pack,
            &ScaleMode::Hard {
                gamma: 0.5,
                sigma: 1.0,
            },
        )
        .unwrap();
        assert_relative_eq!(
            mats[0].get(0, 0),
            0.650_604_945_523_768_9,
            max_relative = 1e-12
        );
        assert!(scale_pack(
            &pack,
            &ScaleMode::Hard {
                gamma: 0.0,
                sigma: 1.0
            }
        )
        .is_err());
        assert!(scale_pack(
            &pack,
            &ScaleMode::Hard {
                gamma: 1.0,
                sigma: 1.0
            }
        )
        .is_err());

        // delta_bar = s, S = 1: amplitude tau * s^(1/q)
        let (q, s, tau) = (0.5, 0.3, 0.4);
        let mats = scale_pack(
            &pack,
            &ScaleMode::Soft {
                q,
                tau,
                delta_bar: s,
                radius: s,
            },
        )
        .unwrap();
        assert_relative_eq!(
            mats[0].get(0, 0),
            tau * s.powf(1.0 / q),
            max_relative = 1e-12
        );
        assert!(scale_pack(
            &pack,
            &ScaleMode::Soft {
                q,
                tau: 1.5,
                delta_bar: s,
                radius: s
            }
        )
        .is_err());
    }

    #[test]
    fn soft_scaling_must_stay_in_class() {
        let pack = single_pack(4, 2, &[&[&[0, 1]], &[&[2, 3]]], 4);
        // row sum tau^q * delta_bar exceeds the radius
        let err = scale_pack(
            &pack,
            &ScaleMode::Soft {
                q: 1.0,
                tau: 0.9,
                delta_bar: 2.0,
                radius: 1.0,
            },
        );
        assert!(err.is_err());
        let ok = scale_pack(
            &pack,
            &ScaleMode::Soft {
                q: 1.0,
                tau: 0.9,
                delta_bar: 1.0,
                radius: 1.0,
            },
        )
        .unwrap();
        assert!(ok[0].entries().iter().sum::<f64>() <= 1.0);
    }

    #[test]
    fn certificate_examples() {
        let one = single_pack(2, 1, &[&[&[0]]], 2);
        let c = verify_pack(&one, 1e-5);
        assert!(c.distance_pass);
        assert_eq!(c.log_cardinality, 0.0);

        let pack = vg_pack(2, 4, 1, 2, 1000, 3).unwrap();
        let c = verify_pack(&pack, 1e-5);
        assert!(pack.len() >= 4);
        assert!(c.cardinality_pass);
        assert!(c.distance_pass && c.required_distance_pass);

        let mut bad = pack.clone();
        bad.patterns.push(bad.patterns[0].clone());
        let c = verify_pack(&bad, 1e-5);
        assert_eq!(c.d_min_achieved, Some(0));
        assert!(!c.distance_pass);
        assert!(!c.pass());
    }

    #[test]
    fn pack_file_round_trip() {
        let pack = vg_pack(3, 8, 2, 2, 100, 4).unwrap();
        let file = PackFile::new(&pack, 1e-5);
        let text = serde_json::to_string(&file).unwrap();
        let back: PackFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_packing().unwrap(), pack);
        assert!(text.contains("\"construction\":\"greedy\""));
    }

    #[test]
    fn pair_checks_on_small_pack() {
        let pack = vg_pack(4, 16, 2, 1, 1000, 2).unwrap();
        let r = pair_checks(&pack, 0.3, 1.0, &[0.5, 1.0, 2.0]).unwrap();
        assert_eq!(r.pairs, pack.len() * (pack.len() - 1) / 2);
        assert!(r.clean(), "{r:?}");
        assert!(r.max_kl_ratio <= 1.0);
    }
}
