//! Seeded noise matrices and the additive observation model `Y = M + E`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::RealMatrix;
use crate::rng;

/// Zero-mean sub-Gaussian noise families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseFamily {
    /// `N(0, sigma^2)`.
    Gaussian { sigma: f64 },
    /// `+a` or `-a` with probability 1/2 each.
    Rademacher { scale: f64 },
    /// Uniform on `[-a, a]`.
    Uniform { half_width: f64 },
}

impl NoiseFamily {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseFamily::Gaussian { .. } => "gaussian",
            NoiseFamily::Rademacher { .. } => "rademacher",
            NoiseFamily::Uniform { .. } => "uniform",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            NoiseFamily::Gaussian { sigma } => sigma,
            NoiseFamily::Rademacher { scale } => scale,
            NoiseFamily::Uniform { half_width } => half_width,
        }
    }

    pub fn from_name(name: &str, param: f64) -> Result<Self> {
        if !(param > 0.0) || !param.is_finite() {
            return Err(Error::domain(format!(
                "noise parameter must be positive, got {param}"
            )));
        }
        Ok(match name {
            "gaussian" => NoiseFamily::Gaussian { sigma: param },
            "rademacher" => NoiseFamily::Rademacher { scale: param },
            "uniform" => NoiseFamily::Uniform { half_width: param },
            other => return Err(Error::domain(format!("unknown noise family {other:?}"))),
        })
    }

    /// `E(xi^2)`.
    pub fn variance(&self) -> f64 {
        match *self {
            NoiseFamily::Gaussian { sigma } => sigma * sigma,
            NoiseFamily::Rademacher { scale } => scale * scale,
            NoiseFamily::Uniform { half_width } => half_width * half_width / 3.0,
        }
    }
}

/// A noise family plus the seed of its stream.
///
/// JSON form: `{"family": "gaussian", "param": 1.0, "seed": 7}`, with an
/// optional `"K"` overriding the moment constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseSpecRepr", into = "NoiseSpecRepr")]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub seed: u64,
    pub k_override: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct NoiseSpecRepr {
    family: String,
    param: f64,
    seed: u64,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
}

impl TryFrom<NoiseSpecRepr> for NoiseSpec {
    type Error = Error;

    fn try_from(r: NoiseSpecRepr) -> Result<Self> {
        let spec = NoiseSpec {
            family: NoiseFamily::from_name(&r.family, r.param)?,
            seed: r.seed,
            k_override: None,
        };
        match r.k {
            Some(k) => spec.with_k(k),
            None => Ok(spec),
        }
    }
}

impl From<NoiseSpec> for NoiseSpecRepr {
    fn from(s: NoiseSpec) -> Self {
        NoiseSpecRepr {
            family: s.family.name().to_owned(),
            param: s.family.param(),
            seed: s.seed,
            k: s.k_override,
        }
    }
}

impl NoiseSpec {
    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        Self::new(NoiseFamily::from_name("gaussian", sigma)?, seed)
    }

    pub fn rademacher(scale: f64, seed: u64) -> Result<Self> {
        Self::new(NoiseFamily::from_name("rademacher", scale)?, seed)
    }

    pub fn uniform(half_width: f64, seed: u64) -> Result<Self> {
        Self::new(NoiseFamily::from_name("uniform", half_width)?, seed)
    }

    pub fn new(family: NoiseFamily, seed: u64) -> Result<Self> {
        // re-validate the parameter for hand-built families
        NoiseFamily::from_name(family.name(), family.param())?;
        Ok(NoiseSpec {
            family,
            seed,
            k_override: None,
        })
    }

    /// Replaces the default moment constant.
    pub fn with_k(mut self, k: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::domain(format!("K must be positive, got {k}")));
        }
        self.k_override = Some(k);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The spec of sub-stream `index`, derived with [`rng::mix`].
    pub fn stream(self, index: u64) -> Self {
        self.with_seed(rng::mix(self.seed, index))
    }
}

/// An `n1 x n2` matrix of i.i.d. draws from the family. Identical inputs give
/// bit-identical outputs.
///
/// Draws are taken in row-major order from a ChaCha8 stream seeded with
/// `spec.seed`. Gaussian entries use `rand_distr::StandardNormal` (ziggurat)
/// times `sigma`.
pub fn sample_noise(n1: usize, n2: usize, spec: &NoiseSpec) -> RealMatrix {
    let mut g = rng::generator(spec.seed);
    let len = n1 * n2;
    let entries: Vec<f64> = match spec.family {
        NoiseFamily::Gaussian { sigma } => (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut g);
                sigma * z
            })
            .collect(),
        NoiseFamily::Rademacher { scale } => (0..len)
            .map(|_| if g.random::<bool>() { scale } else { -scale })
            .collect(),
        NoiseFamily::Uniform { half_width } => {
            let dist =
                Uniform::new_inclusive(-half_width, half_width).expect("validated half-width");
            (0..len).map(|_| dist.sample(&mut g)).collect()
        }
    };
    RealMatrix::from_parts_unchecked(n1, n2, entries)
}

/// `Y = M + E` with `E = sample_noise(M.n1, M.n2, spec)`.
pub fn observe(m: &RealMatrix, spec: &NoiseSpec) -> RealMatrix {
    let e = sample_noise(m.n1(), m.n2(), spec);
    let entries = m
        .entries()
        .iter()
        .zip(e.entries())
        .map(|(a, b)| a + b)
        .collect();
    RealMatrix::from_parts_unchecked(m.n1(), m.n2(), entries)
}

/// A constant `K` with `(E|xi|^p)^(1/p) <= K sqrt(p)` for all `p >= 1`.
///
/// Gaussian uses `K = sigma`, Rademacher and uniform use `K = a`. An explicit
/// `k_override` wins.
#[allow(non_snake_case)]
pub fn subgaussian_K(spec: &NoiseSpec) -> f64 {
    spec.k_override.unwrap_or(spec.family.param())
}
