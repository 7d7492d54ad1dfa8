//! Core data model: identities, signed transactions, hash-chained blocks and
//! the replicated document store.

pub mod block;
pub mod chain;
pub mod hash;
pub mod identity;
pub mod state;
pub mod transaction;

pub use block::{compute_merkle_root, Block, BlockHeader};
pub use chain::{verify_chain, verify_encoded_chain, AuditReport, Chain, ChainError, Violation};
pub use hash::{Digest, HexError, PublicKey, Signature};
pub use identity::{generate_identity, member_id_of, Identity, KeyFile, MemberId, Role, SecretKey};
pub use state::StateStore;
pub use transaction::{sign_transaction, verify_transaction, KeyRegistry, Transaction, TxBody, TxRejection};
