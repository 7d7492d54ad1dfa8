use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::block::{txs_digest, Block};
use super::hash::{Digest, PublicKey};
use crate::canonical::decode_canonical;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChainError {
    #[error("prev_hash does not match the current tip")]
    BadLinkage,
    #[error("height does not follow the current tip")]
    BadHeight,
    #[error("block timestamp is not strictly increasing")]
    NonMonotonicTimestamp,
    #[error("merkle root does not match transactions")]
    BadMerkleRoot,
    #[error("transaction list digest does not match header")]
    BadTxsDigest,
    #[error("transaction id does not match its body")]
    BadTxId,
    #[error("orderer signature does not verify")]
    BadOrdererSignature,
    #[error("stored block bytes do not decode canonically")]
    Undecodable,
    #[error("stored block record fails its length check or checksum")]
    DamagedRecord,
}

impl ChainError {
    pub fn code(&self) -> &'static str {
        match self {
            ChainError::BadLinkage => "BadLinkage",
            ChainError::BadHeight => "BadHeight",
            ChainError::NonMonotonicTimestamp => "NonMonotonicTimestamp",
            ChainError::BadMerkleRoot => "BadMerkleRoot",
            ChainError::BadTxsDigest => "BadTxsDigest",
            ChainError::BadTxId => "BadTxId",
            ChainError::BadOrdererSignature => "BadOrdererSignature",
            ChainError::Undecodable => "Undecodable",
            ChainError::DamagedRecord => "DamagedRecord",
        }
    }
}

/// Checks that do not depend on the predecessor block.
fn content_faults(block: &Block, orderer_key: &PublicKey) -> Vec<ChainError> {
    let mut faults = Vec::new();
    if block.header.tx_count != block.txs.len() as u64 || block.header.txs_digest != txs_digest(&block.txs) {
        faults.push(ChainError::BadTxsDigest);
    }
    if block.txs.iter().any(|tx| !tx.id_matches()) {
        faults.push(ChainError::BadTxId);
    }
    if block.header.merkle_root != block.recompute_merkle_root() {
        faults.push(ChainError::BadMerkleRoot);
    }
    if !block.signature_valid(orderer_key) {
        faults.push(ChainError::BadOrdererSignature);
    }
    faults
}

/// Checks linking `block` onto `prev` (or genesis rules when `prev` is None).
fn linkage_faults(block: &Block, prev: Option<&Block>) -> Vec<ChainError> {
    let mut faults = Vec::new();
    match prev {
        None => {
            if block.header.height != 0 {
                faults.push(ChainError::BadHeight);
            }
            if block.header.prev_hash != Digest::ZERO {
                faults.push(ChainError::BadLinkage);
            }
        }
        Some(prev) => {
            if block.header.height != prev.header.height.wrapping_add(1) {
                faults.push(ChainError::BadHeight);
            }
            if block.header.prev_hash != prev.hash() {
                faults.push(ChainError::BadLinkage);
            }
            if block.header.block_timestamp <= prev.header.block_timestamp {
                faults.push(ChainError::NonMonotonicTimestamp);
            }
        }
    }
    faults
}

/// An append-only, fully validated sequence of blocks.
#[derive(Debug, Clone)]
pub struct Chain {
    orderer_key: PublicKey,
    blocks: Vec<Block>,
}

impl Chain {
    pub fn new(orderer_key: PublicKey) -> Chain {
        Chain { orderer_key, blocks: Vec::new() }
    }

    pub fn orderer_key(&self) -> &PublicKey {
        &self.orderer_key
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn tip(&self) -> Option<&Block> {
        self.blocks.last()
    }

    pub fn get(&self, height: u64) -> Option<&Block> {
        self.blocks.get(usize::try_from(height).ok()?)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Validates `block` against the tip without storing it.
    pub fn check_next(&self, block: &Block) -> Result<(), ChainError> {
        let mut faults = linkage_faults(block, self.tip());
        faults.extend(content_faults(block, &self.orderer_key));
        match faults.into_iter().next() {
            Some(f) => Err(f),
            None => Ok(()),
        }
    }

    /// Stores the block after checking linkage, height, timestamp, merkle root
    /// and orderer signature. State is not touched here.
    pub fn append_block(&mut self, block: Block) -> Result<(), ChainError> {
        self.check_next(&block)?;
        self.blocks.push(block);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub height: u64,
    pub kind: ChainError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub blocks_checked: u64,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_intact(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// Audits a whole chain, reporting every fault rather than stopping at the
/// first. Position `i` in the slice is expected to hold height `i`.
pub fn verify_chain(blocks: &[Block], orderer_key: &PublicKey) -> AuditReport {
    let mut report = AuditReport { blocks_checked: blocks.len() as u64, violations: Vec::new() };
    for (i, block) in blocks.iter().enumerate() {
        let prev = if i == 0 { None } else { Some(&blocks[i - 1]) };
        let mut faults = linkage_faults(block, prev);
        if block.header.height != i as u64 && !faults.contains(&ChainError::BadHeight) {
            faults.push(ChainError::BadHeight);
        }
        faults.extend(content_faults(block, orderer_key));
        faults.sort();
        faults.dedup();
        report.violations.extend(faults.into_iter().map(|kind| Violation { height: i as u64, kind }));
    }
    report
}

/// Audits blocks in their stored byte form. Bytes that fail to decode, or do
/// not re-encode to themselves, are reported as `Undecodable` at that position.
pub fn verify_encoded_chain(encoded: &[Vec<u8>], orderer_key: &PublicKey) -> AuditReport {
    let mut report = AuditReport { blocks_checked: encoded.len() as u64, violations: Vec::new() };
    let mut prev: Option<Block> = None;
    for (i, bytes) in encoded.iter().enumerate() {
        let height = i as u64;
        let block = match decode_canonical::<Block>(bytes) {
            Ok(b) => b,
            Err(_) => {
                report.violations.push(Violation { height, kind: ChainError::Undecodable });
                prev = None;
                continue;
            }
        };
        let mut faults = if i == 0 || prev.is_some() {
            linkage_faults(&block, prev.as_ref())
        } else {
            Vec::new()
        };
        if block.header.height != height && !faults.contains(&ChainError::BadHeight) {
            faults.push(ChainError::BadHeight);
        }
        faults.extend(content_faults(&block, orderer_key));
        faults.sort();
        faults.dedup();
        report.violations.extend(faults.into_iter().map(|kind| Violation { height, kind }));
        prev = Some(block);
    }
    report
}
