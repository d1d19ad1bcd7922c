//! Key files written by `hegrad keygen`. Integers are decimal strings.

use std::path::Path;

use hegrad_core::paillier::PaillierKeypair;
use hegrad_core::singlemod::SingleModKey;
use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const KEYS_SCHEMA: &str = "hegrad.keys/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Primes {
    pub p: String,
    pub q: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum KeyMaterial {
    Alg1 { modulus: String },
    Alg2 { keypairs: Vec<Primes> },
}

// `deny_unknown_fields` does not combine with `flatten`; the tagged enum
// rejects stray fields instead.
#[derive(Debug, Serialize, Deserialize)]
pub struct KeyFile {
    pub schema: String,
    #[serde(flatten)]
    pub material: KeyMaterial,
}

/// Key generator for `seed`, on a separate stream from the protocol draws.
pub fn key_rng(seed: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub fn check_bits(bits: u64) -> Result<(), CliError> {
    if (16..=8192).contains(&bits) {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "--bits must lie in [16, 8192], got {bits}"
        )))
    }
}

fn int(s: &str) -> Result<BigInt, CliError> {
    s.parse()
        .map_err(|_| CliError::Validation(format!("key file: {s:?} is not an integer")))
}

pub fn singlemod_key(rng: &mut ChaCha20Rng, bits: u64) -> Result<SingleModKey, CliError> {
    SingleModKey::generate(bits, rng).map_err(|e| CliError::Validation(e.to_string()))
}

pub fn paillier_keys(rng: &mut ChaCha20Rng, bits: u64, count: usize) -> Result<Vec<PaillierKeypair>, CliError> {
    (0..count)
        .map(|_| PaillierKeypair::generate(bits, rng).map_err(|e| CliError::Validation(e.to_string())))
        .collect()
}

pub fn to_file(material: KeyMaterial) -> String {
    let file = KeyFile {
        schema: KEYS_SCHEMA.into(),
        material,
    };
    serde_json::to_string_pretty(&file).expect("key file serializes") + "\n"
}

pub fn describe_singlemod(key: &SingleModKey) -> KeyMaterial {
    KeyMaterial::Alg1 {
        modulus: key.modulus().to_string(),
    }
}

pub fn describe_paillier(keys: &[PaillierKeypair]) -> KeyMaterial {
    KeyMaterial::Alg2 {
        keypairs: keys
            .iter()
            .map(|k| {
                let (p, q) = k.primes();
                Primes {
                    p: p.to_string(),
                    q: q.to_string(),
                }
            })
            .collect(),
    }
}

pub fn load(path: &Path) -> Result<KeyMaterial, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file: KeyFile =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if file.schema != KEYS_SCHEMA {
        return Err(CliError::Validation(format!(
            "{}: unsupported schema {:?}",
            path.display(),
            file.schema
        )));
    }
    Ok(file.material)
}

pub fn load_singlemod(path: &Path) -> Result<SingleModKey, CliError> {
    match load(path)? {
        KeyMaterial::Alg1 { modulus } => {
            SingleModKey::from_modulus(int(&modulus)?).map_err(|e| CliError::Validation(e.to_string()))
        }
        KeyMaterial::Alg2 { .. } => Err(CliError::Validation("key file holds public-key material".into())),
    }
}

pub fn load_paillier(path: &Path) -> Result<Vec<PaillierKeypair>, CliError> {
    match load(path)? {
        KeyMaterial::Alg2 { keypairs } => keypairs
            .iter()
            .map(|k| {
                PaillierKeypair::from_primes(int(&k.p)?, int(&k.q)?).map_err(|e| CliError::Validation(e.to_string()))
            })
            .collect(),
        KeyMaterial::Alg1 { .. } => Err(CliError::Validation("key file holds a private-key modulus".into())),
    }
}
