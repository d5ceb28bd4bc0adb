//! Seeded random streams.
//!
//! Every stream is a ChaCha20 generator (`rand_chacha::ChaCha20Rng`) keyed by
//! a 64-bit seed. Independent substreams for parallel work share the key and
//! select a distinct ChaCha stream number, so sample `i` of a Monte Carlo loop
//! always sees the same numbers regardless of how the loop is scheduled.
//! Normal deviates use the ziggurat sampler from `rand_distr`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::linalg::{ComplexMatrix, ComplexVector, C64};

#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha20Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    /// Stream number `index` under the key derived from `seed`.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { rng }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn normal(&mut self, std_dev: f64) -> f64 {
        std_dev * self.standard_normal()
    }

    /// Complex normal with independent real and imaginary parts, each of
    /// variance `var_per_part`.
    pub fn complex_normal(&mut self, var_per_part: f64) -> C64 {
        let s = var_per_part.sqrt();
        C64::new(self.normal(s), self.normal(s))
    }

    pub fn complex_gaussian_vector(&mut self, d: usize) -> ComplexVector {
        DVector::from_fn(d, |_, _| self.complex_normal(0.5))
    }

    /// Uniformly distributed point on the unit sphere of `C^d`.
    pub fn unit_vector(&mut self, d: usize) -> ComplexVector {
        loop {
            let v = self.complex_gaussian_vector(d);
            let n = v.norm();
            if n > 1e-300 {
                return v / C64::new(n, 0.0);
            }
        }
    }

    /// `count` orthonormal columns in `C^d`, distributed unitarily invariantly
    /// (the first columns of a Haar unitary).
    pub fn orthonormal_columns(&mut self, d: usize, count: usize) -> ComplexMatrix {
        assert!(count <= d, "cannot fit {count} orthonormal vectors in dimension {d}");
        let mut cols: Vec<ComplexVector> = Vec::with_capacity(count);
        while cols.len() < count {
            let mut v = self.complex_gaussian_vector(d);
            // Two Gram-Schmidt passes keep the residual overlaps at roundoff.
            for _ in 0..2 {
                for c in &cols {
                    let proj = c.dotc(&v);
                    v.axpy(-proj, c, C64::new(1.0, 0.0));
                }
            }
            let n = v.norm();
            if n > 1e-8 {
                cols.push(v / C64::new(n, 0.0));
            }
        }
        ComplexMatrix::from_columns(&cols)
    }

    pub fn haar_unitary(&mut self, d: usize) -> ComplexMatrix {
        self.orthonormal_columns(d, d)
    }
}

/// SplitMix64 finalizer, used to derive child seeds from a parent seed.
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
