//! Canonical wire encodings of the transition-protocol messages.
//!
//! Every message is a fixed-order sequence of length-prefixed fields
//! (`u16` big-endian length, then the bytes): version counter (8 bytes,
//! big-endian), context digest (32 bytes), nonce (16 bytes), signature tag
//! (32 bytes). Signatures cover the domain-separated concatenation of the
//! preceding fields, never the signature itself. Decoding is total: any
//! truncation, bad length, or trailing garbage is an error, not a panic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{ContextDigest, DIGEST_LEN};

/// Nonce length in bytes (128-bit uniform random).
pub const NONCE_LEN: usize = 16;

/// Signature tag length in bytes.
pub const TAG_LEN: usize = 32;

/// Freshness nonce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Nonce(pub [u8; NONCE_LEN]);

impl Nonce {
    pub fn random(rng: &mut impl rand::Rng) -> Self {
        let mut bytes = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut bytes);
        Nonce(bytes)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("message truncated")]
    Truncated,
    #[error("field length {got} does not match expected {expected}")]
    FieldLength { expected: usize, got: usize },
    #[error("trailing bytes after message")]
    TrailingBytes,
}

fn put_field(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u16).to_be_bytes());
    out.extend_from_slice(bytes);
}

fn take_field<'a>(buf: &mut &'a [u8], expected: usize) -> Result<&'a [u8], WireError> {
    if buf.len() < 2 {
        return Err(WireError::Truncated);
    }
    let len = u16::from_be_bytes([buf[0], buf[1]]) as usize;
    if len != expected {
        return Err(WireError::FieldLength {
            expected,
            got: len,
        });
    }
    if buf.len() < 2 + len {
        return Err(WireError::Truncated);
    }
    let (field, rest) = buf[2..].split_at(len);
    *buf = rest;
    Ok(field)
}

fn finish(buf: &[u8]) -> Result<(), WireError> {
    if buf.is_empty() {
        Ok(())
    } else {
        Err(WireError::TrailingBytes)
    }
}

/// Signed upgrade proposal: `(proposed_version, H(context), nonce)` plus the
/// tag over exactly those fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMessage {
    pub proposed_version: u64,
    pub context_digest: ContextDigest,
    pub nonce: Nonce,
    pub signature: Vec<u8>,
}

impl TransitionMessage {
    /// Bytes the signature covers.
    pub fn signed_payload(
        proposed_version: u64,
        context_digest: &ContextDigest,
        nonce: &Nonce,
    ) -> Vec<u8> {
        let mut out = Vec::with_capacity(80);
        out.extend_from_slice(b"caap/proposal/v1");
        put_field(&mut out, &proposed_version.to_be_bytes());
        put_field(&mut out, context_digest.as_bytes());
        put_field(&mut out, &nonce.0);
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(96);
        put_field(&mut out, &self.proposed_version.to_be_bytes());
        put_field(&mut out, self.context_digest.as_bytes());
        put_field(&mut out, &self.nonce.0);
        put_field(&mut out, &self.signature);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut buf = bytes;
        let version = take_field(&mut buf, 8)?;
        let digest = take_field(&mut buf, DIGEST_LEN)?;
        let nonce = take_field(&mut buf, NONCE_LEN)?;
        let sig = take_field(&mut buf, TAG_LEN)?;
        finish(buf)?;
        let mut d = [0u8; DIGEST_LEN];
        d.copy_from_slice(digest);
        let mut n = [0u8; NONCE_LEN];
        n.copy_from_slice(nonce);
        Ok(Self {
            proposed_version: u64::from_be_bytes(version.try_into().expect("8-byte field")),
            context_digest: ContextDigest(d),
            nonce: Nonce(n),
            signature: sig.to_vec(),
        })
    }
}

/// Signed acknowledgment echoing the proposal nonce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub nonce: Nonce,
    pub confirmed_version: u64,
    pub signature: Vec<u8>,
}

impl Ack {
    pub fn signed_payload(nonce: &Nonce, confirmed_version: u64) -> Vec<u8> {
        let mut out = Vec::with_capacity(48);
        out.extend_from_slice(b"caap/ack/v1");
        put_field(&mut out, &nonce.0);
        put_field(&mut out, &confirmed_version.to_be_bytes());
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(72);
        put_field(&mut out, &self.nonce.0);
        put_field(&mut out, &self.confirmed_version.to_be_bytes());
        put_field(&mut out, &self.signature);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut buf = bytes;
        let nonce = take_field(&mut buf, NONCE_LEN)?;
        let version = take_field(&mut buf, 8)?;
        let sig = take_field(&mut buf, TAG_LEN)?;
        finish(buf)?;
        let mut n = [0u8; NONCE_LEN];
        n.copy_from_slice(nonce);
        Ok(Self {
            nonce: Nonce(n),
            confirmed_version: u64::from_be_bytes(version.try_into().expect("8-byte field")),
            signature: sig.to_vec(),
        })
    }
}

/// Signed finalisation the proposer sends after committing; carries the
/// atomic-confirmation step that lets the receiver finish the two-phase
/// exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finalize {
    pub nonce: Nonce,
    pub version: u64,
    pub signature: Vec<u8>,
}

impl Finalize {
    pub fn signed_payload(nonce: &Nonce, version: u64) -> Vec<u8> {
        let mut out = Vec::with_capacity(48);
        out.extend_from_slice(b"caap/finalize/v1");
        put_field(&mut out, &nonce.0);
        put_field(&mut out, &version.to_be_bytes());
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(72);
        put_field(&mut out, &self.nonce.0);
        put_field(&mut out, &self.version.to_be_bytes());
        put_field(&mut out, &self.signature);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let mut buf = bytes;
        let nonce = take_field(&mut buf, NONCE_LEN)?;
        let version = take_field(&mut buf, 8)?;
        let sig = take_field(&mut buf, TAG_LEN)?;
        finish(buf)?;
        let mut n = [0u8; NONCE_LEN];
        n.copy_from_slice(nonce);
        Ok(Self {
            nonce: Nonce(n),
            version: u64::from_be_bytes(version.try_into().expect("8-byte field")),
            signature: sig.to_vec(),
        })
    }
}
