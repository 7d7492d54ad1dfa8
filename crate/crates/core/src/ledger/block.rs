use serde::{Deserialize, Serialize};

use super::hash::{Digest, PublicKey, Signature};
use super::identity::{verify_signature, SecretKey};
use super::transaction::Transaction;
use crate::canonical::to_canonical_bytes;

/// Binary merkle root over transaction ids.
///
/// Each level pairs adjacent nodes as `digest(left ‖ right)`; an odd node is
/// paired with itself. A single leaf therefore yields `digest(h ‖ h)` and an
/// empty list yields the digest of the empty byte string.
pub fn compute_merkle_root(tx_ids: &[Digest]) -> Digest {
    if tx_ids.is_empty() {
        return Digest::of(b"");
    }
    let mut level: Vec<Digest> = tx_ids.to_vec();
    loop {
        level = level
            .chunks(2)
            .map(|pair| Digest::of_pair(&pair[0], pair.get(1).unwrap_or(&pair[0])))
            .collect();
        if level.len() == 1 {
            return level[0];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockHeader {
    pub height: u64,
    pub prev_hash: Digest,
    pub block_timestamp: u64,
    pub merkle_root: Digest,
    /// Digest of the canonical transaction list, signatures included.
    pub txs_digest: Digest,
    pub tx_count: u64,
}

impl BlockHeader {
    pub fn hash(&self) -> Digest {
        Digest::of(&to_canonical_bytes(self).expect("header is canonical-encodable"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub header: BlockHeader,
    pub txs: Vec<Transaction>,
    pub orderer_signature: Signature,
}

pub fn txs_digest(txs: &[Transaction]) -> Digest {
    Digest::of(&to_canonical_bytes(txs).expect("transactions are canonical-encodable"))
}

impl Block {
    /// Assembles and signs a block on top of `prev`.
    pub fn build(
        height: u64,
        prev_hash: Digest,
        block_timestamp: u64,
        txs: Vec<Transaction>,
        orderer: &SecretKey,
    ) -> Block {
        let ids: Vec<Digest> = txs.iter().map(|t| t.tx_id).collect();
        let header = BlockHeader {
            height,
            prev_hash,
            block_timestamp,
            merkle_root: compute_merkle_root(&ids),
            txs_digest: txs_digest(&txs),
            tx_count: txs.len() as u64,
        };
        let orderer_signature = orderer.sign(&header.hash().0);
        Block { header, txs, orderer_signature }
    }

    pub fn hash(&self) -> Digest {
        self.header.hash()
    }

    pub fn height(&self) -> u64 {
        self.header.height
    }

    pub fn recompute_merkle_root(&self) -> Digest {
        let ids: Vec<Digest> = self.txs.iter().map(|t| t.tx_id).collect();
        compute_merkle_root(&ids)
    }

    pub fn signature_valid(&self, orderer_key: &PublicKey) -> bool {
        verify_signature(orderer_key, &self.hash().0, &self.orderer_signature)
    }

    pub fn encode(&self) -> Vec<u8> {
        to_canonical_bytes(self).expect("block is canonical-encodable")
    }
}
