//! Inputs shared by the benchmarks.

use rowsparse::harness::worst_case_signal;
use rowsparse::{observe, NoiseSpec, RealMatrix};

/// A worst-case signal of row weight `s` observed in unit Gaussian noise.
pub fn observed(n1: usize, n2: usize, s: usize, seed: u64) -> RealMatrix {
    let m = worst_case_signal(n1, n2, s, 1.0, 0.5, seed).expect("valid dims");
    observe(
        &m,
        &NoiseSpec::gaussian(1.0, seed ^ 1).expect("valid sigma"),
    )
}
