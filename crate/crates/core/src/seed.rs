//! Seed derivation and portable random streams.
//!
//! Every random stream in the toolkit is a ChaCha20 generator whose 32-byte
//! key is the SHA-256 digest of a master seed plus a list of labelled parts
//! (each length-prefixed). Gaussian variates come from the Box–Muller
//! transform applied to 53-bit uniforms drawn from that generator, so a
//! stream is fully determined by `(seed, parts)` and does not depend on
//! the order in which other streams are consumed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// Digest of `(master, parts...)`.
pub fn derive_key(master: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"item-align/v1");
    hasher.update(master.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hasher.finalize().into()
}

/// A 64-bit seed derived from `(master, parts...)`.
pub fn derive_seed(master: u64, parts: &[&[u8]]) -> u64 {
    let key = derive_key(master, parts);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}

/// A ChaCha20 stream keyed by `(master, parts...)`.
pub fn stream(master: u64, parts: &[&[u8]]) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive_key(master, parts))
}

/// Uniform variate in `(0, 1]` with 53 bits of resolution.
pub fn uniform_open0(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal variates via Box–Muller, caching the second value.
pub struct Gaussian<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> Gaussian<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = uniform_open0(&mut self.rng);
        let u2 = uniform_open0(&mut self.rng);
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn fill(&mut self, out: &mut [f64], scale: f64) {
        for v in out {
            *v = self.sample() * scale;
        }
    }

    pub fn into_inner(self) -> R {
        self.rng
    }
}
