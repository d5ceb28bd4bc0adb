//! Gaussian Unitary Ensemble sampling and moment identities.
//!
//! The ensemble density is `exp(-Tr(A^2) / (4 sigma^2))`. Diagonal entries are
//! real normals with variance `2 sigma^2`; off-diagonal entries have real and
//! imaginary parts with variance `sigma^2` each. The default
//! `sigma^2 = 1/2` gives diagonal variance 1 and complex off-diagonal
//! variance 1.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector, HermitianOperator, Projector, C64};
use crate::rng::RandomStream;

pub const DEFAULT_SIGMA: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GueSpec {
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl GueSpec {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            sigma: DEFAULT_SIGMA,
            seed: 0,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidArgument("GUE dimension must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn stream(&self) -> RandomStream {
        RandomStream::new(self.seed)
    }

    pub fn diagonal_variance(&self) -> f64 {
        2.0 * self.sigma * self.sigma
    }
}

pub fn sample_gue(spec: &GueSpec, stream: &mut RandomStream) -> HermitianOperator {
    let d = spec.dim;
    let s2 = spec.sigma * spec.sigma;
    let diag_sd = (2.0 * s2).sqrt();
    let mut m = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = C64::new(stream.normal(diag_sd), 0.0);
        for j in (i + 1)..d {
            let z = stream.complex_normal(s2);
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    HermitianOperator::from_hermitian_unchecked(m)
}

/// The expectations over the ensemble checked by [`moment_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentIdentity {
    /// `E[n^dagger A m] = 0`
    Mean,
    /// `E[|n^dagger A m|^2] = 2 sigma^2 |n|^2 |m|^2`
    AbsSquare,
    /// `E[n^dagger A P A m] = 2 r sigma^2 n^dagger m` with `r = rank(P)`
    ProjectedMean,
    /// `E[|n^dagger A P A m|^2] = 4 sigma^4 [r^2 |n^dagger m|^2 + |n^dagger P m|^2 + r |n|^2 |m|^2]`
    ProjectedAbsSquare,
    /// `E[(Re n^dagger A m)^2] = sigma^2 (|n|^2 |m|^2 + Re[(n^dagger m)^2])`
    RealPartSquare,
}

impl MomentIdentity {
    pub const ALL: [MomentIdentity; 5] = [
        MomentIdentity::Mean,
        MomentIdentity::AbsSquare,
        MomentIdentity::ProjectedMean,
        MomentIdentity::ProjectedAbsSquare,
        MomentIdentity::RealPartSquare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MomentIdentity::Mean => "mean",
            MomentIdentity::AbsSquare => "abs-square",
            MomentIdentity::ProjectedMean => "projected-mean",
            MomentIdentity::ProjectedAbsSquare => "projected-abs-square",
            MomentIdentity::RealPartSquare => "real-part-square",
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            MomentIdentity::Mean => "E[n'Am]",
            MomentIdentity::AbsSquare => "E[|n'Am|^2]",
            MomentIdentity::ProjectedMean => "E[n'APAm]",
            MomentIdentity::ProjectedAbsSquare => "E[|n'APAm|^2]",
            MomentIdentity::RealPartSquare => "E[(Re n'Am)^2]",
        }
    }

    pub fn analytic(self, n: &ComplexVector, m: &ComplexVector, p: &Projector, sigma: f64) -> C64 {
        let s2 = sigma * sigma;
        let r = p.rank() as f64;
        let nn = n.norm_squared();
        let mm = m.norm_squared();
        let nm = n.dotc(m);
        match self {
            MomentIdentity::Mean => C64::new(0.0, 0.0),
            MomentIdentity::AbsSquare => C64::new(2.0 * s2 * nn * mm, 0.0),
            MomentIdentity::ProjectedMean => nm * (2.0 * r * s2),
            MomentIdentity::ProjectedAbsSquare => {
                let npm = n.dotc(&p.apply(m)).norm_sqr();
                C64::new(4.0 * s2 * s2 * (r * r * nm.norm_sqr() + npm + r * nn * mm), 0.0)
            }
            MomentIdentity::RealPartSquare => C64::new(s2 * (nn * mm + (nm * nm).re), 0.0),
        }
    }

    fn sample(self, a: &ComplexMatrix, n: &ComplexVector, m: &ComplexVector, p: &Projector) -> C64 {
        let am = a * m;
        match self {
            MomentIdentity::Mean => n.dotc(&am),
            MomentIdentity::AbsSquare => C64::new(n.dotc(&am).norm_sqr(), 0.0),
            MomentIdentity::RealPartSquare => C64::new(n.dotc(&am).re.powi(2), 0.0),
            MomentIdentity::ProjectedMean => n.dotc(&(a * p.apply(&am))),
            MomentIdentity::ProjectedAbsSquare => C64::new(n.dotc(&(a * p.apply(&am))).norm_sqr(), 0.0),
        }
    }
}

impl fmt::Display for MomentIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MomentIdentity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MomentIdentity::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::UnknownIdentity(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MomentCheck {
    pub identity: MomentIdentity,
    pub analytic: C64,
    pub estimate: C64,
    pub standard_error: f64,
    pub samples: usize,
}

impl MomentCheck {
    /// Zero-mean identities pass within four standard errors of zero; the
    /// others within 5% relative error.
    pub fn passes(&self) -> bool {
        if self.analytic.norm() < 1e-12 {
            self.estimate.norm() <= 4.0 * self.standard_error
        } else {
            (self.estimate - self.analytic).norm() <= 0.05 * self.analytic.norm()
        }
    }
}

/// Monte Carlo estimate of one identity next to its closed form.
pub fn moment_oracle(
    identity: MomentIdentity,
    n: &ComplexVector,
    m: &ComplexVector,
    projector: &Projector,
    sigma: f64,
    samples: usize,
    stream: &mut RandomStream,
) -> Result<MomentCheck> {
    let d = n.len();
    if m.len() != d || projector.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if m.len() != d { m.len() } else { projector.dim() },
        });
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let spec = GueSpec::new(d).with_sigma(sigma);
    spec.validate()?;

    let mut sum = C64::new(0.0, 0.0);
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let a = sample_gue(&spec, stream);
        let z = identity.sample(a.matrix(), n, m, projector);
        sum += z;
        sum_sq += z.norm_sqr();
    }
    let count = samples as f64;
    let mean = sum / count;
    let var = ((sum_sq - count * mean.norm_sqr()) / (count - 1.0)).max(0.0);
    Ok(MomentCheck {
        identity,
        analytic: identity.analytic(n, m, projector, sigma),
        estimate: mean,
        standard_error: (var / count).sqrt(),
        samples,
    })
}

/// Runs every identity at dimension `dim` with vectors and a half-rank
/// projector drawn from `seed`. `m` is built to overlap `n` so the
/// non-zero identities are well away from zero.
pub fn verify_identities(dim: usize, sigma: f64, samples: usize, seed: u64) -> Result<Vec<MomentCheck>> {
    if dim < 2 {
        return Err(Error::InvalidArgument("identity check needs dimension >= 2".into()));
    }
    let mut setup = RandomStream::new(seed);
    let n = setup.unit_vector(dim);
    let m = {
        let v = &n + setup.unit_vector(dim);
        let norm = v.norm();
        v / C64::new(norm, 0.0)
    };
    let projector = Projector::onto_columns(&setup.orthonormal_columns(dim, dim / 2));

    MomentIdentity::ALL
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let mut stream = RandomStream::substream(seed, i as u64 + 1);
            moment_oracle(id, &n, &m, &projector, sigma, samples, &mut stream)
        })
        .collect()
}
