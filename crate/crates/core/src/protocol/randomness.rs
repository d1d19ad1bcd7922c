use std::collections::HashMap;

use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::paillier::{draw_randomizer, PaillierPublicKey};
use crate::singlemod::draw_blinding;

/// Identifies one random draw made during a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Draw {
    /// Blinding factor for a coefficient encryption.
    Coefficient { coef: usize },
    /// Blinding factor or randomizer for a state encryption. `key_owner` is
    /// the agent whose public key is used, `None` under the shared key.
    State {
        agent: usize,
        coord: usize,
        step: usize,
        key_owner: Option<usize>,
    },
}

/// Source of the blinding factors and randomizers used by the protocols.
pub trait Randomness {
    /// Blinding factor in `[1, 2^bits)`.
    fn blinding(&mut self, draw: Draw, bits: u64) -> BigInt;
    /// Unit of `Z_alpha` for the given public key.
    fn randomizer(&mut self, draw: Draw, pk: &PaillierPublicKey) -> BigInt;
}

/// ChaCha20 stream keyed by a 64-bit seed.
#[derive(Clone, Debug)]
pub struct SeededRandomness {
    rng: ChaCha20Rng,
}

impl SeededRandomness {
    pub fn new(seed: u64) -> Self {
        SeededRandomness {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

impl Randomness for SeededRandomness {
    fn blinding(&mut self, _draw: Draw, bits: u64) -> BigInt {
        draw_blinding(bits, &mut self.rng)
    }

    fn randomizer(&mut self, _draw: Draw, pk: &PaillierPublicKey) -> BigInt {
        draw_randomizer(pk, &mut self.rng)
    }
}

/// Fixed values for selected draws; every other draw comes from a seeded
/// stream.
#[derive(Clone, Debug)]
pub struct ScriptedRandomness {
    script: HashMap<Draw, BigInt>,
    fallback: SeededRandomness,
}

impl ScriptedRandomness {
    pub fn new(seed: u64) -> Self {
        ScriptedRandomness {
            script: HashMap::new(),
            fallback: SeededRandomness::new(seed),
        }
    }

    pub fn with(mut self, draw: Draw, value: impl Into<BigInt>) -> Self {
        self.script.insert(draw, value.into());
        self
    }
}

impl Randomness for ScriptedRandomness {
    fn blinding(&mut self, draw: Draw, bits: u64) -> BigInt {
        match self.script.get(&draw) {
            Some(v) => v.clone(),
            None => self.fallback.blinding(draw, bits),
        }
    }

    fn randomizer(&mut self, draw: Draw, pk: &PaillierPublicKey) -> BigInt {
        match self.script.get(&draw) {
            Some(v) => v.clone(),
            None => self.fallback.randomizer(draw, pk),
        }
    }
}
