//! Counter-based Gaussian noise.
//!
//! Every draw is addressed by `(particle, block, inner step, component)`
//! and computed statelessly from the seed, so the same address yields the
//! same value regardless of evaluation order, thread schedule or
//! platform. This makes the N = 1 coupling between the single-path and
//! multi-particle drivers and the worker-count independence of the
//! parallel driver exact by construction.
//!
//! Each address is chained through a 64-bit finalizer (the SplitMix64
//! mixing function) and the resulting uniform is mapped through the
//! normal quantile function.

use crate::numeric::inv_normal_cdf;
use crate::wasserstein::uniform_open01;

/// Deterministic, addressable stream of standard normals.
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream {
    seed: u64,
}

const DOMAIN_INCREMENT: u64 = 0x9e37_79b9_7f4a_7c15;
const DOMAIN_INITIAL: u64 = 0xc2b2_ae3d_27d4_eb4f;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn chain(mut h: u64, word: u64) -> u64 {
    h = mix64(h ^ word.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1));
    h
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn normal_at(&self, domain: u64, a: u64, b: u64, c: u64, d: u64) -> f64 {
        let mut h = mix64(self.seed ^ domain);
        h = chain(h, a);
        h = chain(h, b);
        h = chain(h, c);
        h = chain(h, d);
        inv_normal_cdf(uniform_open01(h))
    }

    /// The inner-step increment xi for `(particle, block, inner step, component)`.
    #[inline]
    pub fn increment(&self, particle: usize, block: usize, inner_step: usize, component: usize) -> f64 {
        self.normal_at(
            DOMAIN_INCREMENT,
            particle as u64,
            block as u64,
            inner_step as u64,
            component as u64,
        )
    }

    /// Standard normal reserved for initial-state sampling.
    #[inline]
    pub fn initial(&self, particle: usize, component: usize) -> f64 {
        self.normal_at(DOMAIN_INITIAL, particle as u64, component as u64, 0, 0)
    }
}
