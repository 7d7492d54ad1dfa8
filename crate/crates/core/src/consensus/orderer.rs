use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::replica::Replica;
use crate::contracts::{self, Call};
use crate::ledger::{Block, ChainError, Digest, Identity, MemberId, SecretKey, Transaction, TxRejection};

/// Batching parameters for the single orderer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingPolicy {
    pub max_batch_size: usize,
    pub max_batch_wait_ms: u64,
    /// Bound on queued, not yet cut transactions.
    pub queue_capacity: usize,
    /// When set, an empty block is cut after this much idle time so
    /// deadline hooks keep firing without traffic.
    pub heartbeat_ms: Option<u64>,
}

impl Default for OrderingPolicy {
    fn default() -> Self {
        OrderingPolicy { max_batch_size: 500, max_batch_wait_ms: 250, queue_capacity: 10_000, heartbeat_ms: Some(1_000) }
    }
}

impl OrderingPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_batch_size == 0 {
            return Err("max_batch_size must be at least 1".into());
        }
        if self.max_batch_wait_ms == 0 {
            return Err("max_batch_wait_ms must be at least 1".into());
        }
        if self.queue_capacity == 0 {
            return Err("queue_capacity must be at least 1".into());
        }
        if self.heartbeat_ms == Some(0) {
            return Err("heartbeat_ms must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Queued {
    pub tx: Transaction,
    pub enqueued_at: u64,
}

/// Pops the next batch if the size or age trigger fires. FIFO order.
pub fn cut_batch(queue: &mut VecDeque<Queued>, policy: &OrderingPolicy, now: u64) -> Option<Vec<Transaction>> {
    let oldest = queue.front()?.enqueued_at;
    let full = queue.len() >= policy.max_batch_size;
    let aged = now.saturating_sub(oldest) >= policy.max_batch_wait_ms;
    if !full && !aged {
        return None;
    }
    let n = queue.len().min(policy.max_batch_size);
    Some(queue.drain(..n).map(|q| q.tx).collect())
}

/// Genesis contents: identities, token allocations and the time divisor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenesisSpec {
    pub identities: Vec<Identity>,
    pub allocations: std::collections::BTreeMap<MemberId, u64>,
    pub time_scale_divisor: u64,
}

/// Builds the height-0 block carrying the orderer-signed genesis transaction.
pub fn genesis_block(orderer: &SecretKey, spec: &GenesisSpec, timestamp: u64) -> Block {
    let tx = Call::genesis(&spec.allocations, &spec.identities, spec.time_scale_divisor).sign("", orderer, timestamp, 0);
    Block::build(0, Digest::ZERO, timestamp, vec![tx], orderer)
}

/// Sequencing backend. Only the single-orderer implementation exists.
pub trait OrderingService {
    fn submit(&mut self, tx: Transaction, now: u64) -> Result<(), TxRejection>;
    /// Cuts at most one block if a trigger fires.
    fn poll(&mut self, now: u64) -> Option<Block>;
    /// Next height the service will assign.
    fn next_height(&self) -> u64;
}

/// Solo orderer. It keeps its own replica so submissions can be checked
/// against committed registrations and nonces; nonces of queued
/// transactions are reserved to reject replays before they are cut.
pub struct SoloOrderer {
    key: SecretKey,
    policy: OrderingPolicy,
    queue: VecDeque<Queued>,
    reserved: HashSet<(String, MemberId, u64)>,
    replica: Replica,
    last_cut_wall: u64,
}

impl SoloOrderer {
    /// Starts a fresh chain from `spec`.
    pub fn genesis(key: SecretKey, policy: OrderingPolicy, spec: &GenesisSpec, now: u64) -> SoloOrderer {
        let block = genesis_block(&key, spec, now);
        let mut replica = Replica::new(key.public_key());
        replica.validate_and_commit(block).expect("genesis block is well formed");
        SoloOrderer { key, policy, queue: VecDeque::new(), reserved: HashSet::new(), replica, last_cut_wall: now }
    }

    /// Resumes from previously cut blocks.
    pub fn resume(key: SecretKey, policy: OrderingPolicy, blocks: Vec<Block>, now: u64) -> Result<SoloOrderer, (u64, ChainError)> {
        let replica = Replica::replay(key.public_key(), blocks)?;
        Ok(SoloOrderer { key, policy, queue: VecDeque::new(), reserved: HashSet::new(), replica, last_cut_wall: now })
    }

    pub fn replica(&self) -> &Replica {
        &self.replica
    }

    pub fn policy(&self) -> &OrderingPolicy {
        &self.policy
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn public_key(&self) -> crate::ledger::PublicKey {
        self.key.public_key()
    }

    /// Milliseconds until the next trigger could fire, for sleeping loops.
    pub fn next_wakeup(&self, now: u64) -> u64 {
        let batch = self
            .queue
            .front()
            .map(|q| (q.enqueued_at + self.policy.max_batch_wait_ms).saturating_sub(now));
        let beat = self.policy.heartbeat_ms.map(|h| (self.last_cut_wall + h).saturating_sub(now));
        match (batch, beat) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => self.policy.max_batch_wait_ms,
        }
    }

    fn seal(&mut self, txs: Vec<Transaction>, now: u64) -> Block {
        let tip = self.replica.chain().tip().expect("orderer chain has genesis");
        let ts = now.max(tip.header.block_timestamp + 1);
        let block = Block::build(tip.header.height + 1, tip.hash(), ts, txs, &self.key);
        for tx in &block.txs {
            self.reserved.remove(&(tx.body.project_id.clone(), tx.body.submitter, tx.body.nonce));
        }
        self.replica.validate_and_commit(block.clone()).expect("orderer-built block extends its own chain");
        self.last_cut_wall = now;
        block
    }
}

impl OrderingService for SoloOrderer {
    fn submit(&mut self, tx: Transaction, now: u64) -> Result<(), TxRejection> {
        contracts::authenticate(self.replica.state(), &tx, self.replica.orderer_key())?;
        let slot = (tx.body.project_id.clone(), tx.body.submitter, tx.body.nonce);
        if self.reserved.contains(&slot) {
            return Err(TxRejection::ReplayedNonce);
        }
        if self.queue.len() >= self.policy.queue_capacity {
            return Err(TxRejection::QueueFull);
        }
        self.reserved.insert(slot);
        self.queue.push_back(Queued { tx, enqueued_at: now });
        Ok(())
    }

    fn poll(&mut self, now: u64) -> Option<Block> {
        if let Some(txs) = cut_batch(&mut self.queue, &self.policy, now) {
            return Some(self.seal(txs, now));
        }
        let idle = self.queue.is_empty()
            && self.policy.heartbeat_ms.is_some_and(|h| now.saturating_sub(self.last_cut_wall) >= h);
        idle.then(|| self.seal(Vec::new(), now))
    }

    fn next_height(&self) -> u64 {
        self.replica.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{generate_identity, Role};
    use std::collections::BTreeMap;

    fn queued(n: usize, at: u64) -> VecDeque<Queued> {
        let (_, sk) = generate_identity(Role::Developer, "org1");
        (0..n)
            .map(|i| Queued { tx: Call::transfer(&sk.member_id(), 0).sign("p", &sk, 0, i as u64), enqueued_at: at })
            .collect()
    }

    #[test]
    fn size_trigger_and_enumeration() {
        let policy = OrderingPolicy::default();
        let mut q = queued(1_250, 0);
        let sizes: Vec<usize> = std::iter::from_fn(|| cut_batch(&mut q, &policy, 250).map(|b| b.len())).collect();
        assert_eq!(sizes, vec![500, 500, 250]);
    }

    #[test]
    fn age_trigger() {
        let policy = OrderingPolicy::default();
        let mut q = queued(1, 1_000);
        assert!(cut_batch(&mut q, &policy, 1_249).is_none());
        assert_eq!(cut_batch(&mut q, &policy, 1_250).unwrap().len(), 1);
        assert!(cut_batch(&mut q, &policy, 10_000).is_none());
    }

    #[test]
    fn full_batch_cuts_immediately_in_fifo_order() {
        let policy = OrderingPolicy::default();
        let mut q = queued(500, 7);
        let ids: Vec<Digest> = q.iter().map(|x| x.tx.tx_id).collect();
        let batch = cut_batch(&mut q, &policy, 7).unwrap();
        assert_eq!(batch.iter().map(|t| t.tx_id).collect::<Vec<_>>(), ids);
    }

    fn orderer_with_member(policy: OrderingPolicy) -> (SoloOrderer, SecretKey) {
        let (id, sk) = generate_identity(Role::Developer, "org1");
        let spec = GenesisSpec {
            identities: vec![id],
            allocations: BTreeMap::from([(sk.member_id(), 1_000)]),
            time_scale_divisor: 1,
        };
        (SoloOrderer::genesis(SecretKey::generate(), policy, &spec, 1_000), sk)
    }

    #[test]
    fn duplicate_submission_is_a_replay() {
        let (mut o, sk) = orderer_with_member(OrderingPolicy::default());
        let tx = Call::transfer(&sk.member_id(), 1).sign("", &sk, 0, 1);
        assert_eq!(o.submit(tx.clone(), 1_000), Ok(()));
        assert_eq!(o.submit(tx.clone(), 1_000), Err(TxRejection::ReplayedNonce));
        let block = o.poll(1_250).unwrap();
        assert_eq!(block.txs.len(), 1);
        // Still rejected once committed.
        assert_eq!(o.submit(tx, 2_000), Err(TxRejection::ReplayedNonce));
    }

    #[test]
    fn stalled_orderer_overflows() {
        let policy = OrderingPolicy { queue_capacity: 1_000, heartbeat_ms: None, ..OrderingPolicy::default() };
        let (mut o, sk) = orderer_with_member(policy);
        let mut full = 0;
        for n in 0..10_000u64 {
            let tx = Call::transfer(&sk.member_id(), 0).sign("", &sk, 0, n);
            if o.submit(tx, 1_000) == Err(TxRejection::QueueFull) {
                full += 1;
            }
        }
        assert_eq!(full, 9_000);
        assert_eq!(o.queue_len(), 1_000);
    }

    #[test]
    fn unknown_submitter_rejected() {
        let (mut o, _) = orderer_with_member(OrderingPolicy::default());
        let stranger = SecretKey::generate();
        let tx = Call::transfer(&stranger.member_id(), 0).sign("", &stranger, 0, 0);
        assert_eq!(o.submit(tx, 1_000), Err(TxRejection::UnknownSubmitter));
    }

    #[test]
    fn heartbeat_cuts_empty_blocks_with_increasing_time() {
        let policy = OrderingPolicy { heartbeat_ms: Some(100), ..OrderingPolicy::default() };
        let (mut o, _) = orderer_with_member(policy);
        assert!(o.poll(1_050).is_none());
        let b = o.poll(1_100).unwrap();
        assert!(b.txs.is_empty());
        assert_eq!(b.header.height, 1);
        assert!(b.header.block_timestamp > 1_000);
        assert_eq!(o.next_height(), 2);
    }
}
