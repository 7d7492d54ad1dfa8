//! A synchronous network with a manual clock: one orderer and one replica per
//! organization, with blocks delivered to every peer as soon as they are cut.
//! Used by tests and examples that need exact control over block time.

use super::orderer::{GenesisSpec, OrderingPolicy, OrderingService, SoloOrderer};
use super::replica::{BlockOutcome, Replica, TxLocation};
use super::NetworkTopology;
use crate::ledger::{Block, Digest, SecretKey, Transaction, TxRejection};

pub struct LocalNetwork {
    topology: NetworkTopology,
    orderer: SoloOrderer,
    peers: Vec<Replica>,
    now: u64,
}

impl LocalNetwork {
    pub fn new(topology: NetworkTopology, policy: OrderingPolicy, orderer_key: SecretKey, genesis: &GenesisSpec, start_ms: u64) -> LocalNetwork {
        let orderer = SoloOrderer::genesis(orderer_key, policy, genesis, start_ms);
        let genesis_block = orderer.replica().chain().blocks()[0].clone();
        let peers = topology
            .orgs
            .iter()
            .map(|_| {
                let mut r = Replica::new(orderer.public_key());
                r.validate_and_commit(genesis_block.clone()).expect("genesis");
                r
            })
            .collect();
        LocalNetwork { topology, orderer, peers, now: start_ms }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    pub fn orderer(&self) -> &SoloOrderer {
        &self.orderer
    }

    pub fn peers(&self) -> &[Replica] {
        &self.peers
    }

    pub fn peer(&self, i: usize) -> &Replica {
        &self.peers[i]
    }

    pub fn submit(&mut self, tx: Transaction) -> Result<Digest, TxRejection> {
        let id = tx.tx_id;
        self.orderer.submit(tx, self.now)?;
        Ok(id)
    }

    fn deliver(&mut self, block: &Block) {
        for p in &mut self.peers {
            p.validate_and_commit(block.clone()).expect("peer accepts orderer block");
        }
    }

    /// Moves the clock forward by `ms`, cutting and delivering every block
    /// whose trigger fires along the way. Returns the delivered blocks.
    pub fn advance(&mut self, ms: u64) -> Vec<Block> {
        let end = self.now + ms;
        let mut out = Vec::new();
        loop {
            while let Some(b) = self.orderer.poll(self.now) {
                self.deliver(&b);
                out.push(b);
            }
            if self.now >= end {
                return out;
            }
            let step = self.orderer.next_wakeup(self.now).max(1);
            self.now = (self.now + step).min(end);
        }
    }

    /// Advances just far enough for every queued transaction to be cut.
    pub fn flush(&mut self) -> Vec<Block> {
        let mut out = Vec::new();
        while self.orderer.queue_len() > 0 {
            let step = self.orderer.next_wakeup(self.now).max(1);
            out.extend(self.advance(step));
        }
        out
    }

    /// Submits, flushes, and reports where the transaction landed.
    pub fn commit(&mut self, tx: Transaction) -> Result<TxLocation, TxRejection> {
        let id = self.submit(tx)?;
        self.flush();
        Ok(self.peers[0].locate(&id).expect("flushed transaction is committed"))
    }

    pub fn last_outcome(&self) -> Option<&BlockOutcome> {
        let r = &self.peers[0];
        r.outcome(r.tip_height()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::{query, Call};
    use crate::ledger::{generate_identity, Role};
    use std::collections::BTreeMap;

    fn network() -> (LocalNetwork, Vec<SecretKey>) {
        let people: Vec<_> = (0..4).map(|i| generate_identity(Role::Developer, &format!("org{}", i + 1))).collect();
        let genesis = GenesisSpec {
            identities: people.iter().map(|(id, _)| id.clone()).collect(),
            allocations: people.iter().map(|(_, sk)| (sk.member_id(), 10_000)).collect::<BTreeMap<_, _>>(),
            time_scale_divisor: 1,
        };
        let net = LocalNetwork::new(NetworkTopology::default(), OrderingPolicy::default(), SecretKey::generate(), &genesis, 1_000);
        (net, people.into_iter().map(|(_, sk)| sk).collect())
    }

    #[test]
    fn peers_agree_and_invalid_tx_is_marked() {
        let (mut net, keys) = network();
        let before = net.peer(0).state_digest();
        let good = Call::transfer(&keys[1].member_id(), 500).sign("", &keys[0], 0, 1);
        let too_much = Call::transfer(&keys[1].member_id(), 1_000_000).sign("", &keys[2], 0, 1);
        net.submit(good).unwrap();
        net.submit(too_much).unwrap();
        let blocks = net.flush();
        assert_eq!(blocks.len(), 1);
        let outcome = net.last_outcome().unwrap();
        assert_eq!(outcome.validity(), vec![true, false]);
        let digests: Vec<Digest> = net.peers().iter().map(Replica::state_digest).collect();
        assert!(digests.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(digests[0], before);
        assert_eq!(query::token_balance(net.peer(3).state(), &keys[1].member_id()), 10_500);
        assert_eq!(query::total_supply(net.peer(2).state()), 40_000);
    }

    #[test]
    fn invalid_only_block_leaves_state_but_adds_nothing_else() {
        let (mut net, keys) = network();
        net.advance(0);
        let d0 = net.peer(0).state_digest();
        let bad = Call::transfer(&keys[1].member_id(), 1_000_000).sign("", &keys[0], 0, 1);
        let loc = net.commit(bad).unwrap();
        assert!(!loc.valid);
        assert_eq!(loc.error_code(), Some("InsufficientBalance"));
        assert_eq!(net.peer(0).state_digest(), d0);
    }

    #[test]
    fn replay_reproduces_digest() {
        let (mut net, keys) = network();
        for n in 0..50 {
            let tx = Call::transfer(&keys[(n + 1) % 4].member_id(), 7).sign("", &keys[n % 4], 0, n as u64);
            net.submit(tx).unwrap();
            net.advance(100);
        }
        net.flush();
        let blocks = net.peer(0).chain().blocks().to_vec();
        let replayed = Replica::replay(net.orderer().public_key(), blocks).unwrap();
        assert_eq!(replayed.state_digest(), net.peer(1).state_digest());
        assert_eq!(replayed.state().canonical_bytes(), net.peer(2).state().canonical_bytes());
    }
}
