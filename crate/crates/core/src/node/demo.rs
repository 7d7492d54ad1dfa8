use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::config::{NetworkConfig, TransportKind};
use super::orderer::{OrdererNode, OrdererOptions};
use super::peer::{PeerNode, PeerOptions};
use super::{NodeClient, NodeError};
use crate::client::{Clock, SystemClock};
use crate::consensus::transport::{LoopbackTransport, TcpTransport, Transport};
use crate::ledger::{Digest, SecretKey};

pub fn transport_for(kind: TransportKind) -> Arc<dyn Transport> {
    match kind {
        TransportKind::Tcp => Arc::new(TcpTransport),
        TransportKind::Loopback => Arc::new(LoopbackTransport::new()),
    }
}

/// One orderer and one peer per organization running in this process.
pub struct DemoNetwork {
    config: NetworkConfig,
    transport: Arc<dyn Transport>,
    orderer_key: SecretKey,
    clock: Arc<dyn Clock>,
    orderer: Option<OrdererNode>,
    peers: Vec<Option<PeerNode>>,
}

impl DemoNetwork {
    /// Starts every node of `config` with the system clock.
    pub fn start(config: NetworkConfig, orderer_key: SecretKey) -> Result<DemoNetwork, NodeError> {
        DemoNetwork::start_with(config, orderer_key, transport_for_config, Arc::new(SystemClock))
    }

    pub fn start_with(
        config: NetworkConfig,
        orderer_key: SecretKey,
        transport: impl FnOnce(&NetworkConfig) -> Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
    ) -> Result<DemoNetwork, NodeError> {
        config.validate().map_err(NodeError::Config)?;
        if orderer_key.public_key() != config.orderer_public_key {
            return Err(NodeError::Config("orderer key does not match orderer_public_key".into()));
        }
        let transport = transport(&config);
        let mut net = DemoNetwork { peers: Vec::new(), orderer: None, config, transport, orderer_key, clock };
        net.start_orderer()?;
        for i in 0..net.config.orgs.len() {
            net.peers.push(None);
            net.start_peer(i)?;
        }
        Ok(net)
    }

    /// A loopback network of `orgs` organizations in a fresh directory.
    pub fn loopback(orgs: usize, data_dir: &Path, tune: impl FnOnce(&mut NetworkConfig)) -> Result<(DemoNetwork, SecretKey), NodeError> {
        let key = SecretKey::generate();
        let mut cfg = NetworkConfig::loopback(orgs, &key, &data_dir.display().to_string());
        tune(&mut cfg);
        let net = DemoNetwork::start(cfg, key.clone())?;
        Ok((net, key))
    }

    fn start_orderer(&mut self) -> Result<(), NodeError> {
        let node = OrdererNode::start(OrdererOptions {
            data_dir: self.config.orderer_dir(),
            endpoint: self.config.orderer_endpoint.clone(),
            key: self.orderer_key.clone(),
            policy: self.config.policy.clone(),
            genesis: self.config.genesis_spec(),
            transport: self.transport.clone(),
            clock: self.clock.clone(),
        })?;
        // An ephemeral TCP port ("host:0") is only known after binding.
        self.config.orderer_endpoint = node.endpoint().to_string();
        self.orderer = Some(node);
        Ok(())
    }

    /// Starts (or restarts) the peer of org `i`.
    pub fn start_peer(&mut self, i: usize) -> Result<(), NodeError> {
        let org = self.config.orgs[i].clone();
        let node = PeerNode::start(PeerOptions {
            org: org.name.clone(),
            data_dir: self.config.peer_dir(&org.name),
            endpoint: org.peer_endpoint,
            orderer_endpoint: self.config.orderer_endpoint.clone(),
            orderer_key: self.config.orderer_public_key,
            transport: self.transport.clone(),
        })?;
        self.config.orgs[i].peer_endpoint = node.endpoint().to_string();
        self.peers[i] = Some(node);
        Ok(())
    }

    /// Stops the peer of org `i`, leaving its data directory in place.
    pub fn stop_peer(&mut self, i: usize) {
        if let Some(p) = self.peers[i].take() {
            p.stop();
        }
    }

    /// The effective config, with bound endpoints filled in.
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn transport(&self) -> Arc<dyn Transport> {
        self.transport.clone()
    }

    pub fn orderer(&self) -> &OrdererNode {
        self.orderer.as_ref().expect("orderer running")
    }

    pub fn peer(&self, i: usize) -> &PeerNode {
        self.peers[i].as_ref().expect("peer running")
    }

    pub fn running_peers(&self) -> impl Iterator<Item = &PeerNode> {
        self.peers.iter().flatten()
    }

    /// A fresh RPC client for org `i`'s peer.
    pub fn client(&self, i: usize) -> NodeClient {
        NodeClient::new(self.transport.clone(), &self.config.orgs[i].peer_endpoint)
    }

    pub fn peer_dir(&self, i: usize) -> PathBuf {
        self.config.peer_dir(&self.config.orgs[i].name)
    }

    /// Waits until every running peer holds the orderer's blocks.
    pub fn wait_synced(&self, timeout: Duration) -> bool {
        let target = self.orderer().len();
        self.running_peers().all(|p| p.wait_for_len(target, timeout))
    }

    /// State digests of the running peers, sampled at a moment when they
    /// all hold the same number of blocks, at least the orderer's count at
    /// the time of the call.
    pub fn settled_digests(&self, timeout: Duration) -> Option<Vec<Digest>> {
        let target = self.orderer().len();
        let deadline = Instant::now() + timeout;
        while Instant::now() < deadline {
            let snap: Vec<(u64, Digest)> = self.running_peers().map(|p| p.with_replica(|r| (r.len(), r.state_digest()))).collect();
            if snap.iter().all(|(len, _)| *len == snap[0].0 && *len >= target) {
                return Some(snap.into_iter().map(|(_, d)| d).collect());
            }
            std::thread::sleep(Duration::from_millis(10));
        }
        None
    }

    /// Stops peers, then the orderer.
    pub fn shutdown(self) {
        drop(self)
    }
}

fn transport_for_config(cfg: &NetworkConfig) -> Arc<dyn Transport> {
    transport_for(cfg.transport)
}

impl Drop for DemoNetwork {
    fn drop(&mut self) {
        for p in self.peers.iter_mut() {
            if let Some(p) = p.take() {
                p.stop();
            }
        }
        if let Some(o) = self.orderer.take() {
            o.stop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::rpc;
    use crate::client::{submit_and_wait, ChainAccess, ClientError, RetryPolicy};
    use crate::contracts::Call;
    use crate::ledger::{generate_identity, Role};
    use serde_json::json;

    fn funded(cfg: &mut NetworkConfig, n: usize) -> Vec<SecretKey> {
        let people: Vec<_> = (0..n).map(|i| generate_identity(Role::Developer, &format!("org{}", i % 4 + 1))).collect();
        cfg.identities = people.iter().map(|(id, _)| id.clone()).collect();
        cfg.allocations = people.iter().map(|(_, sk)| (sk.member_id(), 1_000)).collect();
        cfg.policy.max_batch_wait_ms = 20;
        cfg.policy.heartbeat_ms = Some(100);
        people.into_iter().map(|(_, sk)| sk).collect()
    }

    #[test]
    fn genesis_sync_rpc_and_restart() {
        let dir = tempfile::tempdir().unwrap();
        let mut keys = Vec::new();
        let (mut net, _) = DemoNetwork::loopback(4, dir.path(), |c| keys = funded(c, 2)).unwrap();
        assert!(net.wait_synced(Duration::from_secs(5)));
        let d = net.settled_digests(Duration::from_secs(5)).unwrap();
        assert!(d.windows(2).all(|w| w[0] == w[1]));

        let client = net.client(1);
        let tx = Call::transfer(&keys[1].member_id(), 25).sign("", &keys[0], 0, 1);
        let loc = submit_and_wait(&client, &tx, RetryPolicy::default()).unwrap();
        assert!(loc.valid);
        // Inclusion oracle: the block at the reported height holds the tx and its bit.
        let view = client.query_block(loc.height).unwrap().unwrap();
        assert_eq!(view.block.txs[loc.index as usize].tx_id, tx.tx_id);
        assert!(view.validity()[loc.index as usize]);
        // Replaying the same tx is refused at submission.
        assert_eq!(client.submit(&tx), Err(ClientError::Rejected(crate::ledger::TxRejection::ReplayedNonce)));

        let missing = client.call(rpc::QUERY_STATE, json!({ "key": "no/such/key" })).unwrap_err();
        assert_eq!(missing.code(), rpc::NOT_FOUND);
        assert_eq!(client.call("frobnicate", json!({})).unwrap_err().code(), rpc::METHOD_NOT_FOUND);
        assert_eq!(client.call(rpc::QUERY_BLOCK, json!({ "height": "x" })).unwrap_err().code(), rpc::BAD_PARAMS);

        let blob = vec![9u8; 300 * 1024];
        let cid = client.castore_put(&blob).unwrap();
        assert_eq!(net.client(1).castore_get(&cid).unwrap(), blob);

        // Restart one peer while the chain keeps growing.
        let before = net.peer(2).with_replica(|r| r.len());
        net.stop_peer(2);
        let tx2 = Call::transfer(&keys[0].member_id(), 5).sign("", &keys[1], 0, 2);
        submit_and_wait(&net.client(0), &tx2, RetryPolicy::default()).unwrap();
        net.start_peer(2).unwrap();
        assert!(net.peer(2).len() >= before);
        assert!(net.wait_synced(Duration::from_secs(5)));
        let d = net.settled_digests(Duration::from_secs(5)).unwrap();
        assert!(d.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn corrupt_block_log_refuses_to_start() {
        let dir = tempfile::tempdir().unwrap();
        let (mut net, _) = DemoNetwork::loopback(1, dir.path(), |c| {
            funded(c, 1);
        })
        .unwrap();
        assert!(net.wait_synced(Duration::from_secs(5)));
        net.stop_peer(0);
        let log = net.peer_dir(0).join("blocks").join("blocks.log");
        let mut bytes = std::fs::read(&log).unwrap();
        bytes[20] ^= 0x01;
        std::fs::write(&log, &bytes).unwrap();
        match net.start_peer(0) {
            Err(NodeError::CorruptChain { height, .. }) => assert_eq!(height, 0),
            Err(e) => panic!("unexpected {e}"),
            Ok(()) => panic!("corrupt chain accepted"),
        }
    }

    #[test]
    fn second_bind_is_port_in_use() {
        let dir = tempfile::tempdir().unwrap();
        let (net, _) = DemoNetwork::loopback(1, dir.path(), |_| {}).unwrap();
        let err = PeerNode::start(PeerOptions {
            org: "org9".into(),
            data_dir: dir.path().join("other"),
            endpoint: net.config().orgs[0].peer_endpoint.clone(),
            orderer_endpoint: net.config().orderer_endpoint.clone(),
            orderer_key: net.config().orderer_public_key,
            transport: net.transport(),
        })
        .err()
        .unwrap();
        assert_eq!(err.code(), "PortInUse");
    }
}
