//! Hashing, keys, signatures and addresses.
//!
//! Every byte-string newtype renders as lowercase hex, both through
//! `Display` and through serde, so exported files never carry raw bytes.

mod merkle;

pub use merkle::{merkle_root, merkle_verify, MerkleError, MerkleProof, MerkleTree};

use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, Verifier};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Output length of [`hash`] in bytes.
pub const DIGEST_LEN: usize = 32;
/// Address length in bytes.
pub const ADDRESS_LEN: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("malformed public key")]
    MalformedKey,
    #[error("signature does not verify")]
    BadSignature,
    #[error("invalid hex: {0}")]
    Hex(String),
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
}

macro_rules! hex_bytes {
    ($name:ident, $len:expr) => {
        impl $name {
            pub fn as_bytes(&self) -> &[u8] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
                let raw = hex::decode(s).map_err(|e| CryptoError::Hex(e.to_string()))?;
                let bytes: [u8; $len] = raw.as_slice().try_into().map_err(|_| {
                    CryptoError::Length {
                        expected: $len,
                        actual: raw.len(),
                    }
                })?;
                Ok(Self(bytes))
            }
        }

        impl AsRef<[u8]> for $name {
            fn as_ref(&self) -> &[u8] {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let hex = self.to_hex();
                write!(f, "{}({}..)", stringify!($name), &hex[..8])
            }
        }

        impl FromStr for $name {
            type Err = CryptoError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::from_hex(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                // Lowercase is the only accepted rendering.
                if s.bytes().any(|b| b.is_ascii_uppercase()) {
                    return Err(serde::de::Error::custom("hex must be lowercase"));
                }
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

/// A SHA-256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);
hex_bytes!(Digest, DIGEST_LEN);

impl Digest {
    pub const ZERO: Digest = Digest([0; DIGEST_LEN]);
}

/// Account identifier: the first 20 bytes of the hash of a public key.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; ADDRESS_LEN]);
hex_bytes!(Address, ADDRESS_LEN);

impl Address {
    pub const ZERO: Address = Address([0; ADDRESS_LEN]);

    pub fn from_public_key(key: &PublicKey) -> Address {
        let digest = hash(&key.0);
        let mut out = [0u8; ADDRESS_LEN];
        out.copy_from_slice(&digest.0[..ADDRESS_LEN]);
        Address(out)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey(pub [u8; 32]);
hex_bytes!(PublicKey, 32);

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 64]);
hex_bytes!(Signature, 64);

impl Signature {
    pub const EMPTY: Signature = Signature([0; 64]);
}

impl PublicKey {
    pub fn address(&self) -> Address {
        Address::from_public_key(self)
    }

    /// Verifies `signature` over `message`. A key that does not decode to a
    /// curve point yields [`CryptoError::MalformedKey`].
    pub fn verify(&self, message: &[u8], signature: &Signature) -> Result<(), CryptoError> {
        let key = ed25519_dalek::VerifyingKey::from_bytes(&self.0)
            .map_err(|_| CryptoError::MalformedKey)?;
        let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
        key.verify(message, &sig)
            .map_err(|_| CryptoError::BadSignature)
    }
}

/// SHA-256 of `data`.
pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash_concat(parts: &[&[u8]]) -> Digest {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest(h.finalize().into())
}

/// Boolean form of [`PublicKey::verify`].
pub fn verify(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    public_key.verify(message, signature).is_ok()
}

/// An Ed25519 key pair. The private half is never serialized.
#[derive(Clone)]
pub struct KeyPair {
    signing: ed25519_dalek::SigningKey,
}

impl KeyPair {
    pub fn from_seed(seed: [u8; 32]) -> KeyPair {
        KeyPair {
            signing: ed25519_dalek::SigningKey::from_bytes(&seed),
        }
    }

    /// Deterministic key pair for a named simulation actor.
    pub fn from_name(name: &str) -> KeyPair {
        let seed = hash_concat(&[b"govsim/actor-key/", name.as_bytes()]);
        KeyPair::from_seed(seed.0)
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.signing.verifying_key().to_bytes())
    }

    pub fn address(&self) -> Address {
        self.public_key().address()
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.signing.sign(message).to_bytes())
    }
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("public_key", &self.public_key())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_matches_sha256_vector() {
        assert_eq!(
            hash(b"").to_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            hash(b"abc").to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn hash_is_deterministic_and_separates_bytes() {
        assert_eq!(hash(b"governance"), hash(b"governance"));
        assert_ne!(hash(&[0x00]), hash(&[0x01]));
        assert_eq!(hash_concat(&[b"ab", b"c"]), hash(b"abc"));
    }

    #[test]
    fn sign_verify_contract() {
        let kp = KeyPair::from_name("alice");
        let other = KeyPair::from_name("bob");
        let msg = b"transfer 10".to_vec();
        let sig = kp.sign(&msg);
        assert!(verify(&kp.public_key(), &msg, &sig));

        let mut flipped = msg.clone();
        flipped[0] ^= 0x01;
        assert!(!verify(&kp.public_key(), &flipped, &sig));
        assert!(!verify(&other.public_key(), &msg, &sig));
    }

    #[test]
    fn rfc8032_test_vector_one() {
        let seed = hex::decode("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60")
            .unwrap();
        let kp = KeyPair::from_seed(seed.try_into().unwrap());
        assert_eq!(
            kp.public_key().to_hex(),
            "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a"
        );
        assert_eq!(
            kp.sign(b"").to_hex(),
            "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e06522490155\
             5fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b"
        );
    }

    #[test]
    fn malformed_key_is_an_error_not_a_panic() {
        // y = 2 is not on the curve.
        let mut raw = [0u8; 32];
        raw[0] = 2;
        let bad = PublicKey(raw);
        let sig = KeyPair::from_name("x").sign(b"m");
        assert_eq!(bad.verify(b"m", &sig), Err(CryptoError::MalformedKey));
        assert!(!verify(&bad, b"m", &sig));
    }

    #[test]
    fn address_is_prefix_of_key_hash() {
        let kp = KeyPair::from_name("carol");
        let pk = kp.public_key();
        assert_eq!(&pk.address().0[..], &hash(&pk.0).0[..20]);
        assert_ne!(pk.address(), KeyPair::from_name("dave").address());
    }

    #[test]
    fn hex_serde_rejects_uppercase_and_bad_length() {
        let d = hash(b"x");
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<Digest>(&json).unwrap(), d);
        assert!(serde_json::from_str::<Digest>(&json.to_uppercase()).is_err());
        assert!(serde_json::from_str::<Address>(&json).is_err());
    }

    #[test]
    fn verification_is_pure() {
        let kp = KeyPair::from_name("erin");
        let sig = kp.sign(b"payload");
        let first = verify(&kp.public_key(), b"payload", &sig);
        for _ in 0..5 {
            assert_eq!(verify(&kp.public_key(), b"payload", &sig), first);
        }
    }
}
