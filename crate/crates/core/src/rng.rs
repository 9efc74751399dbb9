//! Counter-addressed random streams.
//!
//! Every step of every trajectory owns an independent generator seeded by
//! hashing `(master_seed, trajectory, step)`. Draws can therefore be produced
//! in any order, by any worker, and are bit-reproducible. The master seed is
//! the only source of run-to-run variation.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

/// Address of one step's random inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub trajectory: u64,
    pub step: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, trajectory: u64, step: u64) -> Self {
        StreamKey {
            master_seed,
            trajectory,
            step,
        }
    }

    pub fn with_step(self, step: u64) -> Self {
        StreamKey { step, ..self }
    }

    #[inline]
    fn rng(&self) -> SplitMix64 {
        let t = splitmix64(self.trajectory ^ 0x6a09_e667_f3bc_c908);
        let s = splitmix64(self.step ^ 0xbb67_ae85_84ca_a73b);
        let z = splitmix64(splitmix64(self.master_seed ^ t).wrapping_add(s));
        SplitMix64::seed_from_u64(z)
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One step's random inputs: a Gaussian vector `R`, Rademacher signs `χ`
/// (Milstein-type noise integrator) and `χ̂₁, χ̂₂` (stage-type noise
/// integrator). The iterated-integral tables `J` and `Ĵ` are functions of
/// these and are computed on demand.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoiseDraws {
    pub gaussian: Vec<f64>,
    pub chi: Vec<f64>,
    pub chi_hat1: f64,
    pub chi_hat2: f64,
}

#[inline]
fn sign(bit: u64) -> f64 {
    if bit & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

impl NoiseDraws {
    pub fn zeros(d: usize) -> Self {
        NoiseDraws {
            gaussian: vec![0.0; d],
            chi: vec![1.0; d],
            chi_hat1: 1.0,
            chi_hat2: 1.0,
        }
    }

    pub fn from_parts(gaussian: Vec<f64>, chi: Vec<f64>, chi_hat1: f64, chi_hat2: f64) -> Self {
        assert_eq!(gaussian.len(), chi.len(), "R and χ must have the same length");
        NoiseDraws {
            gaussian,
            chi,
            chi_hat1,
            chi_hat2,
        }
    }

    pub fn dim(&self) -> usize {
        self.gaussian.len()
    }

    /// Overwrites `self` with the draws addressed by `key`. Allocation free.
    #[inline]
    pub fn refill(&mut self, key: StreamKey) {
        let mut rng = key.rng();
        for r in self.gaussian.iter_mut() {
            *r = rng.sample(StandardNormal);
        }
        let mut word: u64 = rng.random();
        self.chi_hat1 = sign(word);
        self.chi_hat2 = sign(word >> 1);
        let mut used = 2;
        for c in self.chi.iter_mut() {
            if used == 64 {
                word = rng.random();
                used = 0;
            }
            *c = sign(word >> used);
            used += 1;
        }
    }

    /// `J_{a,b}` of the Milstein-type integrator.
    #[inline]
    pub fn j(&self, a: usize, b: usize) -> f64 {
        let r = &self.gaussian;
        if a == b {
            0.5 * (r[a] * r[a] - 1.0)
        } else if a > b {
            0.5 * (r[a] * r[b] - self.chi[a])
        } else {
            0.5 * (r[a] * r[b] + self.chi[b])
        }
    }

    /// `Ĵ_{a,b}` of the stage-type integrator.
    #[inline]
    pub fn j_hat(&self, a: usize, b: usize) -> f64 {
        let r = &self.gaussian;
        if a == b {
            0.5 * self.chi_hat1 * (r[a] * r[a] - 1.0)
        } else if a > b {
            0.5 * r[b] * (1.0 + self.chi_hat2)
        } else {
            0.5 * r[b] * (1.0 - self.chi_hat2)
        }
    }

    /// Dense row-major `J` table.
    pub fn j_table(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|k| self.j(k / d, k % d)).collect()
    }

    /// Dense row-major `Ĵ` table.
    pub fn j_hat_table(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|k| self.j_hat(k / d, k % d)).collect()
    }
}

/// All random inputs for one step.
pub fn draw(key: StreamKey, d: usize) -> NoiseDraws {
    let mut n = NoiseDraws::zeros(d);
    n.refill(key);
    n
}

/// The Gaussian part of [`draw`] for the same key.
pub fn gaussian_vector(key: StreamKey, d: usize) -> Vec<f64> {
    let mut rng = key.rng();
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}
