//! Signing abstraction for transition messages.
//!
//! The protocol logic only needs an unforgeable, per-(endpoint-pair,
//! version) authenticator; it never inspects signature internals. The
//! default implementation is an HMAC-SHA-256 tag under pre-shared
//! per-version keys derived from a pair master secret, standing in for the
//! active PQC signature scheme (real primitives are used unmodified in
//! deployment and are out of scope here).

use sha2::{Digest, Sha256};

use super::wire::TAG_LEN;

/// Sign/verify handle, keyed per (endpoint pair, version).
pub trait Signer {
    fn sign(&self, message: &[u8]) -> Vec<u8>;
    fn verify(&self, message: &[u8], signature: &[u8]) -> bool;
}

const BLOCK_LEN: usize = 64;

fn hmac_sha256(key: &[u8; 32], message: &[u8]) -> [u8; TAG_LEN] {
    let mut ipad = [0x36u8; BLOCK_LEN];
    let mut opad = [0x5cu8; BLOCK_LEN];
    for (i, b) in key.iter().enumerate() {
        ipad[i] ^= b;
        opad[i] ^= b;
    }
    let mut inner = Sha256::new();
    inner.update(ipad);
    inner.update(message);
    let inner = inner.finalize();
    let mut outer = Sha256::new();
    outer.update(opad);
    outer.update(inner);
    let mut tag = [0u8; TAG_LEN];
    tag.copy_from_slice(&outer.finalize());
    tag
}

fn eq_constant_time(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut acc = 0u8;
    for (x, y) in a.iter().zip(b) {
        acc |= x ^ y;
    }
    acc == 0
}

/// Keyed-tag signer: HMAC-SHA-256 under a 256-bit key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyedTagSigner {
    key: [u8; 32],
}

impl KeyedTagSigner {
    pub fn new(key: [u8; 32]) -> Self {
        Self { key }
    }
}

impl Signer for KeyedTagSigner {
    fn sign(&self, message: &[u8]) -> Vec<u8> {
        hmac_sha256(&self.key, message).to_vec()
    }

    fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        eq_constant_time(&hmac_sha256(&self.key, message), signature)
    }
}

/// Pre-shared pair secret from which per-version signing keys are derived.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyStore {
    master: [u8; 32],
}

impl KeyStore {
    pub fn new(master: [u8; 32]) -> Self {
        Self { master }
    }

    pub fn from_seed(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"caap-pair-master");
        h.update(seed.to_be_bytes());
        let mut master = [0u8; 32];
        master.copy_from_slice(&h.finalize());
        Self { master }
    }

    /// Signer for one protocol version.
    pub fn signer_for(&self, version: u64) -> KeyedTagSigner {
        let mut h = Sha256::new();
        h.update(b"caap-version-key");
        h.update(self.master);
        h.update(version.to_be_bytes());
        let mut key = [0u8; 32];
        key.copy_from_slice(&h.finalize());
        KeyedTagSigner::new(key)
    }
}
