//! Seeded samplers for synthetic input batches: plain Gaussian noise,
//! Latin hypercube and Halton points in a box, and a domain-constrained
//! sampler for features with known per-column statistics.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tensor::Tensor2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Gaussian,
    LatinHypercube,
    Halton,
    Domain,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Gaussian => "gaussian",
            SamplerKind::LatinHypercube => "latin-hypercube",
            SamplerKind::Halton => "halton",
            SamplerKind::Domain => "domain",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(SamplerKind::Gaussian),
            "latin-hypercube" => Ok(SamplerKind::LatinHypercube),
            "halton" => Ok(SamplerKind::Halton),
            "domain" => Ok(SamplerKind::Domain),
            other => Err(Error::invalid(format!("unknown sampler kind {other:?}"))),
        }
    }
}

/// Optional constraints: per-feature location/scale for the domain sampler,
/// a shared clip box, and simplex renormalization for compositional data.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainConstraints {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub bounds: Option<(f64, f64)>,
    pub simplex_renormalize: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub dimension: usize,
    pub constraints: Option<DomainConstraints>,
}

impl SamplerSpec {
    pub fn gaussian(dimension: usize) -> Self {
        SamplerSpec {
            kind: SamplerKind::Gaussian,
            dimension,
            constraints: None,
        }
    }

    pub fn halton(dimension: usize, lo: f64, hi: f64) -> Self {
        Self::boxed(SamplerKind::Halton, dimension, lo, hi)
    }

    pub fn latin_hypercube(dimension: usize, lo: f64, hi: f64) -> Self {
        Self::boxed(SamplerKind::LatinHypercube, dimension, lo, hi)
    }

    fn boxed(kind: SamplerKind, dimension: usize, lo: f64, hi: f64) -> Self {
        SamplerSpec {
            kind,
            dimension,
            constraints: Some(DomainConstraints {
                mean: vec![],
                std: vec![],
                bounds: Some((lo, hi)),
                simplex_renormalize: false,
            }),
        }
    }

    pub fn domain(
        mean: Vec<f64>,
        std: Vec<f64>,
        bounds: Option<(f64, f64)>,
        simplex_renormalize: bool,
    ) -> Self {
        SamplerSpec {
            kind: SamplerKind::Domain,
            dimension: mean.len(),
            constraints: Some(DomainConstraints {
                mean,
                std,
                bounds,
                simplex_renormalize,
            }),
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.constraints.as_ref().and_then(|c| c.bounds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::invalid("sampler dimension must be positive"));
        }
        if let Some((lo, hi)) = self.bounds() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "clip bounds must be a finite box with lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        match self.kind {
            SamplerKind::Gaussian => Ok(()),
            SamplerKind::Halton | SamplerKind::LatinHypercube => {
                if self.bounds().is_none() {
                    return Err(Error::invalid(format!(
                        "{} sampling requires finite box bounds",
                        self.kind.name()
                    )));
                }
                Ok(())
            }
            SamplerKind::Domain => {
                let c = self
                    .constraints
                    .as_ref()
                    .ok_or_else(|| Error::invalid("domain sampler requires constraints"))?;
                if c.mean.len() != self.dimension || c.std.len() != self.dimension {
                    return Err(Error::invalid(format!(
                        "domain sampler needs {} per-feature means and stds, got {} and {}",
                        self.dimension,
                        c.mean.len(),
                        c.std.len()
                    )));
                }
                if c.std.iter().any(|&s| s < 0.0) {
                    return Err(Error::invalid("feature stds must be nonnegative"));
                }
                if c.simplex_renormalize && c.bounds != Some((0.0, 1.0)) {
                    return Err(Error::invalid(
                        "simplex renormalization requires clip bounds [0, 1]",
                    ));
                }
                Ok(())
            }
        }
    }
}

/// First `n` primes, used as Halton bases.
fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut candidate = 2u64;
    while primes.len() < n {
        if primes.iter().all(|&p| !candidate.is_multiple_of(p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// Radical inverse of `index` in the given base; the Halton coordinate.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut frac = 1.0 / base as f64;
    while index > 0 {
        result += (index % base) as f64 * frac;
        index /= base;
        frac /= base as f64;
    }
    result
}

/// Draw an `n x d` batch. Halton is index-deterministic; the other kinds are
/// deterministic in the seed.
pub fn sample(spec: &SamplerSpec, n: usize, seed: u64) -> Result<Tensor2> {
    sample_stream(spec, n, seed, 0)
}

/// Like [`sample`], but continues the low-discrepancy sequence after
/// `offset` previously consumed points instead of restarting it.  Only the
/// Halton sampler is a sequence; the stochastic kinds ignore `offset` and
/// should be given fresh seeds instead.
pub fn sample_stream(spec: &SamplerSpec, n: usize, seed: u64, offset: u64) -> Result<Tensor2> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let d = spec.dimension;
    let mut rng = rng_from_seed(seed);
    match spec.kind {
        SamplerKind::Gaussian => {
            let data = (0..n * d)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            Tensor2::from_vec(n, d, data)
        }
        SamplerKind::Halton => {
            let (lo, hi) = spec.bounds().expect("validated above");
            let bases = first_primes(d);
            let mut data = Vec::with_capacity(n * d);
            for i in offset + 1..=offset + n as u64 {
                for &b in &bases {
                    data.push(lo + (hi - lo) * radical_inverse(i, b));
                }
            }
            Tensor2::from_vec(n, d, data)
        }
        SamplerKind::LatinHypercube => {
            let (lo, hi) = spec.bounds().expect("validated above");
            let mut data = vec![0.0; n * d];
            let mut strata: Vec<usize> = (0..n).collect();
            for j in 0..d {
                strata.shuffle(&mut rng);
                for (i, &s) in strata.iter().enumerate() {
                    let u: f64 = rng.random();
                    data[i * d + j] = lo + (hi - lo) * (s as f64 + u) / n as f64;
                }
            }
            Tensor2::from_vec(n, d, data)
        }
        SamplerKind::Domain => {
            let c = spec.constraints.as_ref().expect("validated above");
            let mut data = Vec::with_capacity(n * d);
            for _ in 0..n {
                for j in 0..d {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let mut v = c.mean[j] + c.std[j] * z;
                    if let Some((lo, hi)) = c.bounds {
                        v = v.clamp(lo, hi);
                    }
                    data.push(v);
                }
            }
            if c.simplex_renormalize {
                for row in data.chunks_mut(d) {
                    let s: f64 = row.iter().sum();
                    if s <= 0.0 {
                        return Err(Error::numeric(
                            "cannot renormalize a row with nonpositive sum onto the simplex",
                        ));
                    }
                    for v in row {
                        *v /= s;
                    }
                }
            }
            Tensor2::from_vec(n, d, data)
        }
    }
}
