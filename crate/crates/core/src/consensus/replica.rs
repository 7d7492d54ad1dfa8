use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::canonical::Doc;
use crate::contracts::{self, Audience, BlockContext};
use crate::ledger::{Block, Chain, ChainError, Digest, PublicKey, StateStore};

/// A committed notification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub block_height: u64,
    /// Emitting transaction; the zero digest for end-of-block hook events.
    pub tx_id: Digest,
    pub project_id: String,
    pub contract: String,
    pub event_name: String,
    pub payload: Doc,
    pub audience: Audience,
}

/// Outcome of one transaction within a committed block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxResult {
    pub valid: bool,
    pub error: Option<String>,
    pub output: Doc,
}

/// Per-block execution record, including the validity bitmap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockOutcome {
    pub height: u64,
    pub results: Vec<TxResult>,
    pub events: Vec<Event>,
}

impl BlockOutcome {
    pub fn validity(&self) -> Vec<bool> {
        self.results.iter().map(|r| r.valid).collect()
    }
}

/// Executes every transaction of an already-validated block in order, then
/// runs the end-of-block hook. Invalid transactions leave the state unchanged
/// and are marked in the bitmap; they never reject the block.
pub fn apply_block(state: &mut StateStore, block: &Block, orderer_key: &PublicKey) -> BlockOutcome {
    let ctx = BlockContext { height: block.header.height, timestamp: block.header.block_timestamp };
    let mut results = Vec::with_capacity(block.txs.len());
    let mut events = Vec::new();
    for tx in &block.txs {
        match contracts::execute_transaction(state, tx, ctx, orderer_key) {
            Ok(res) => {
                events.extend(res.events.into_iter().map(|e| Event {
                    block_height: ctx.height,
                    tx_id: tx.tx_id,
                    project_id: e.project_id,
                    contract: e.contract,
                    event_name: e.event_name,
                    payload: e.payload,
                    audience: e.audience,
                }));
                results.push(TxResult { valid: true, error: None, output: res.output });
            }
            Err(err) => results.push(TxResult {
                valid: false,
                error: Some(format!("{}: {err}", err.code())),
                output: Doc::Null,
            }),
        }
    }
    events.extend(contracts::on_block(state, ctx).into_iter().map(|e| Event {
        block_height: ctx.height,
        tx_id: Digest::ZERO,
        project_id: e.project_id,
        contract: e.contract,
        event_name: e.event_name,
        payload: e.payload,
        audience: e.audience,
    }));
    state.set_version(ctx.height);
    BlockOutcome { height: ctx.height, results, events }
}

/// Where a committed transaction landed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxLocation {
    pub height: u64,
    pub index: u32,
    pub valid: bool,
    pub error: Option<String>,
    pub output: Doc,
}

impl TxLocation {
    /// The stable error code, e.g. `"NothingDue"`.
    pub fn error_code(&self) -> Option<&str> {
        self.error.as_deref().map(|e| e.split(':').next().unwrap_or(e))
    }
}

/// One peer's replica: chain, world state, per-block outcomes and events.
#[derive(Debug, Clone)]
pub struct Replica {
    chain: Chain,
    state: StateStore,
    outcomes: Vec<BlockOutcome>,
    tx_index: HashMap<Digest, (u64, u32)>,
}

impl Replica {
    pub fn new(orderer_key: PublicKey) -> Replica {
        Replica { chain: Chain::new(orderer_key), state: StateStore::new(), outcomes: Vec::new(), tx_index: HashMap::new() }
    }

    /// Rebuilds a replica by replaying stored blocks.
    pub fn replay(orderer_key: PublicKey, blocks: impl IntoIterator<Item = Block>) -> Result<Replica, (u64, ChainError)> {
        let mut r = Replica::new(orderer_key);
        for block in blocks {
            let h = block.header.height;
            r.validate_and_commit(block).map_err(|e| (h, e))?;
        }
        Ok(r)
    }

    /// Structural validation, then ordered execution. Structural faults reject
    /// the whole block; contract errors only mark transactions invalid.
    pub fn validate_and_commit(&mut self, block: Block) -> Result<&BlockOutcome, ChainError> {
        self.chain.check_next(&block)?;
        let outcome = apply_block(&mut self.state, &block, self.chain.orderer_key());
        for (i, tx) in block.txs.iter().enumerate() {
            self.tx_index.entry(tx.tx_id).or_insert((outcome.height, i as u32));
        }
        self.chain.append_block(block)?;
        self.outcomes.push(outcome);
        Ok(self.outcomes.last().expect("just pushed"))
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn state(&self) -> &StateStore {
        &self.state
    }

    pub fn orderer_key(&self) -> &PublicKey {
        self.chain.orderer_key()
    }

    /// Number of committed blocks.
    pub fn len(&self) -> u64 {
        self.chain.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.chain.is_empty()
    }

    pub fn tip_height(&self) -> Option<u64> {
        self.chain.tip().map(|b| b.header.height)
    }

    pub fn outcome(&self, height: u64) -> Option<&BlockOutcome> {
        self.outcomes.get(usize::try_from(height).ok()?)
    }

    pub fn state_digest(&self) -> Digest {
        state_digest(&self.state)
    }

    pub fn locate(&self, tx_id: &Digest) -> Option<TxLocation> {
        let (height, index) = *self.tx_index.get(tx_id)?;
        let r = &self.outcome(height)?.results[index as usize];
        Some(TxLocation { height, index, valid: r.valid, error: r.error.clone(), output: r.output.clone() })
    }

    /// Events committed at or after `since_height` visible to `audience`
    /// (all events when `audience` is None).
    pub fn events_since(&self, since_height: u64, audience: Option<Audience>) -> Vec<Event> {
        self.outcomes
            .iter()
            .skip(usize::try_from(since_height).unwrap_or(usize::MAX))
            .flat_map(|o| o.events.iter())
            .filter(|e| audience.is_none_or(|a| a.admits(e.audience)))
            .cloned()
            .collect()
    }
}

/// Digest of the canonical encoding of every document in key order.
pub fn state_digest(state: &StateStore) -> Digest {
    state.digest()
}
