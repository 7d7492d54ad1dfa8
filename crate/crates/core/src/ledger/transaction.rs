use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::hash::{Digest, PublicKey, Signature};
use super::identity::{verify_signature, MemberId, SecretKey};
use crate::canonical::{to_canonical_bytes, Doc};

/// The signed part of a transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxBody {
    pub project_id: String,
    pub contract: String,
    pub operation: String,
    pub args: Doc,
    pub submitter: MemberId,
    pub client_timestamp: u64,
    pub nonce: u64,
}

impl TxBody {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        // args must already be float-free; anything else is a programming error
        to_canonical_bytes(self).expect("transaction body is canonical-encodable")
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.canonical_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transaction {
    pub tx_id: Digest,
    pub body: TxBody,
    pub signature: Signature,
}

impl Transaction {
    pub fn submitter(&self) -> &MemberId {
        &self.body.submitter
    }

    /// Whether `tx_id` matches the digest of the canonical body.
    pub fn id_matches(&self) -> bool {
        self.tx_id == self.body.digest()
    }
}

/// Fills in `tx_id` and `signature` for a body.
pub fn sign_transaction(body: TxBody, secret: &SecretKey) -> Transaction {
    let bytes = body.canonical_bytes();
    let tx_id = Digest::of(&bytes);
    let signature = secret.sign(&bytes);
    Transaction { tx_id, body, signature }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TxRejection {
    #[error("submitter is not registered")]
    UnknownSubmitter,
    #[error("signature or transaction digest does not verify")]
    BadSignature,
    #[error("nonce already used by this submitter in this project")]
    ReplayedNonce,
    #[error("orderer queue is full")]
    QueueFull,
}

impl TxRejection {
    pub fn code(&self) -> &'static str {
        match self {
            TxRejection::UnknownSubmitter => "UnknownSubmitter",
            TxRejection::BadSignature => "BadSignature",
            TxRejection::ReplayedNonce => "ReplayedNonce",
            TxRejection::QueueFull => "QueueFull",
        }
    }
}

/// Key lookup and replay tracking used by transaction verification.
pub trait KeyRegistry {
    fn public_key(&self, member: &MemberId) -> Option<PublicKey>;
    fn nonce_seen(&self, project_id: &str, member: &MemberId, nonce: u64) -> bool;
}

/// Checks digest, signature and nonce freshness, in that order.
pub fn verify_transaction(tx: &Transaction, registry: &impl KeyRegistry) -> Result<(), TxRejection> {
    let key = registry.public_key(tx.submitter()).ok_or(TxRejection::UnknownSubmitter)?;
    verify_with_key(tx, &key)?;
    if registry.nonce_seen(&tx.body.project_id, tx.submitter(), tx.body.nonce) {
        return Err(TxRejection::ReplayedNonce);
    }
    Ok(())
}

/// Digest and signature check against an explicit key.
pub fn verify_with_key(tx: &Transaction, key: &PublicKey) -> Result<(), TxRejection> {
    let bytes = tx.body.canonical_bytes();
    if Digest::of(&bytes) != tx.tx_id || !verify_signature(key, &bytes, &tx.signature) {
        return Err(TxRejection::BadSignature);
    }
    Ok(())
}
