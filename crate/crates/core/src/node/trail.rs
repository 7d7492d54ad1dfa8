//! Chain-scan reports built from a peer's RPC: the per-project audit trail
//! and a re-verification of every served block.

use serde::{Deserialize, Serialize};

use super::NodeClient;
use crate::client::{ChainAccess, ClientError};
use crate::contracts::phase_of;
use crate::ledger::{verify_chain, AuditReport, Block, Digest, MemberId, PublicKey};

/// One committed, valid phase action of a project.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailEntry {
    pub height: u64,
    pub index: u32,
    pub tx_id: Digest,
    pub phase: String,
    pub contract: String,
    pub operation: String,
    pub submitter: MemberId,
    pub block_timestamp: u64,
}

/// Every valid phase transaction of `project_id`, in block order. Depends
/// only on chain contents, so any two synced peers produce the same trail.
pub fn audit_trail(client: &NodeClient, project_id: &str) -> Result<Vec<TrailEntry>, ClientError> {
    let head = client.head_height()?;
    let mut out = Vec::new();
    for height in 0..=head {
        let view = client.query_block(height)?.ok_or_else(|| ClientError::Unavailable(format!("block {height} vanished")))?;
        for (i, (tx, res)) in view.block.txs.iter().zip(&view.results).enumerate() {
            if tx.body.project_id != project_id || !res.valid {
                continue;
            }
            let Some(phase) = phase_of(&tx.body.contract) else { continue };
            out.push(TrailEntry {
                height,
                index: i as u32,
                tx_id: tx.tx_id,
                phase: phase.to_string(),
                contract: tx.body.contract.clone(),
                operation: tx.body.operation.clone(),
                submitter: tx.body.submitter,
                block_timestamp: view.block.header.block_timestamp,
            });
        }
    }
    Ok(out)
}

/// Fetches every block a peer serves and verifies the chain from scratch.
pub fn verify_remote_chain(client: &NodeClient, orderer_key: &PublicKey) -> Result<AuditReport, ClientError> {
    let head = client.head_height()?;
    let mut blocks: Vec<Block> = Vec::with_capacity(head as usize + 1);
    for height in 0..=head {
        let view = client.query_block(height)?.ok_or_else(|| ClientError::Unavailable(format!("block {height} vanished")))?;
        blocks.push(view.block);
    }
    Ok(verify_chain(&blocks, orderer_key))
}
