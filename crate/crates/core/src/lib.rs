//! Denoising of row-sparse matrices observed in sub-Gaussian noise.
//!
//! The crate provides the penalized least-squares hard-thresholding estimator
//! with its exact threshold schedule, packing constructions behind the
//! minimax lower bounds, closed-form rate formulas and a deterministic Monte
//! Carlo harness for checking rate laws empirically.
//!
//! ```
//! use rowsparse::{estimate_pls, PenaltyConfig, RealMatrix};
//!
//! let y = RealMatrix::from_rows(&[vec![3.0, 0.1], vec![-0.2, 0.05]]).unwrap();
//! let fit = estimate_pls(&y, &PenaltyConfig::with_lambda(0.5).unwrap());
//! assert_eq!(fit.k_star, 1);
//! assert_eq!(fit.m_hat.get(0, 0), 3.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
pub mod estimator;
pub mod harness;
mod matrix;
pub mod noise;
pub mod packing;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};
pub use estimator::{
    brute_force_pls, estimate_pls, estimate_rowwise, penalty, threshold_schedule, EstimateReport,
    PenaltyConfig,
};
pub use harness::{ExperimentConfig, GridPoint, RateFit, RiskReport};
pub use matrix::{
    fmt_real, in_class, l0_count, norm_2p, norm_lq, truncate_rows, RealMatrix, SparsityClass,
};
pub use noise::{observe, sample_noise, subgaussian_K, NoiseFamily, NoiseSpec};
pub use packing::{BinaryPattern, PackingSet};
pub use rates::ProblemDims;
