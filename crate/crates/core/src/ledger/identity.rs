use std::fmt;
use std::str::FromStr;

use ed25519_dalek::{Signer, SigningKey, Verifier, VerifyingKey};
use rand::rngs::OsRng;
use serde::{Deserialize, Serialize};

use super::hash::{decode_lower_hex, Digest, HexError, PublicKey, Signature};

/// Member identifier: the SHA-256 digest of the member's public key.
pub type MemberId = Digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    Owner,
    Manager,
    Developer,
    Tester,
    Client,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::Owner, Role::Manager, Role::Developer, Role::Tester, Role::Client];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Owner => "Owner",
            Role::Manager => "Manager",
            Role::Developer => "Developer",
            Role::Tester => "Tester",
            Role::Client => "Client",
        }
    }

    /// Owner and Manager act for the delivery team.
    pub fn is_team_lead(&self) -> bool {
        matches!(self, Role::Owner | Role::Manager)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown role {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Identity {
    pub member_id: MemberId,
    pub public_key: PublicKey,
    pub role: Role,
    pub org: String,
}

impl Identity {
    pub fn from_public_key(public_key: PublicKey, role: Role, org: impl Into<String>) -> Identity {
        Identity { member_id: member_id_of(&public_key), public_key, role, org: org.into() }
    }

    /// `member_id == digest(public_key)`
    pub fn is_consistent(&self) -> bool {
        self.member_id == member_id_of(&self.public_key)
    }
}

pub fn member_id_of(public_key: &PublicKey) -> MemberId {
    Digest::of(&public_key.0)
}

/// An Ed25519 signing key.
#[derive(Clone)]
pub struct SecretKey(SigningKey);

impl SecretKey {
    pub fn generate() -> SecretKey {
        SecretKey(SigningKey::generate(&mut OsRng))
    }

    pub fn from_bytes(bytes: [u8; 32]) -> SecretKey {
        SecretKey(SigningKey::from_bytes(&bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<SecretKey, HexError> {
        decode_lower_hex::<32>(s).map(SecretKey::from_bytes)
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(self.0.verifying_key().to_bytes())
    }

    pub fn member_id(&self) -> MemberId {
        member_id_of(&self.public_key())
    }

    pub fn sign(&self, message: &[u8]) -> Signature {
        Signature(self.0.sign(message).to_bytes())
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SecretKey(pub={})", self.public_key())
    }
}

/// Verifies an Ed25519 signature. Malformed keys simply fail verification.
pub fn verify_signature(public_key: &PublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(key) = VerifyingKey::from_bytes(&public_key.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    key.verify(message, &sig).is_ok()
}

/// Creates a fresh keypair from the OS random source.
pub fn generate_identity(role: Role, org: &str) -> (Identity, SecretKey) {
    let secret = SecretKey::generate();
    (Identity::from_public_key(secret.public_key(), role, org), secret)
}

/// On-disk key file: identity plus secret key, hex encoded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyFile {
    pub identity: Identity,
    pub secret_key: String,
}

impl KeyFile {
    pub fn new(identity: &Identity, secret: &SecretKey) -> KeyFile {
        KeyFile { identity: identity.clone(), secret_key: secret.to_hex() }
    }

    pub fn secret(&self) -> Result<SecretKey, HexError> {
        SecretKey::from_hex(&self.secret_key)
    }
}
