//! End-to-end benchmark runs against an in-process demo network.
//!
//! Setup creates a `bench` project (a manager and a client accept its
//! terms), adds one developer per write worker, and records `key_count`
//! metric samples whose state keys the read rounds query.

use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::report::BenchReport;
use super::resources::{ProbeTarget, ResourceMonitor};
use super::round::{run_round, AdapterError, RoundSpec, SutAdapter, WriteOp, Workload};
use crate::canonical::{from_doc, parse_doc, to_canonical_bytes};
use crate::client::{submit_and_wait, ChainAccess, ClientError, NonceSource, RetryPolicy};
use crate::consensus::OrderingPolicy;
use crate::contracts::{keys, Agreement, Call, PaymentTrigger, Side};
use crate::ledger::{generate_identity, Identity, Role, SecretKey, Transaction};
use crate::node::{DemoNetwork, NetworkConfig, NodeClient, NodeError, TransportKind};

pub const BENCH_PROJECT: &str = "bench";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchNetwork {
    pub transport: TransportKind,
    pub orgs: usize,
    /// TCP only: the orderer binds `host:base_port`, peer `i` binds
    /// `host:base_port+1+i`.
    #[serde(default = "default_host")]
    pub host: String,
    #[serde(default = "default_base_port")]
    pub base_port: u16,
    #[serde(default)]
    pub policy: OrderingPolicy,
}

fn default_host() -> String {
    "127.0.0.1".into()
}
fn default_base_port() -> u16 {
    7050
}
fn default_interval() -> u64 {
    1_000
}
fn default_allocation() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub network: BenchNetwork,
    /// Each run uses a fresh subdirectory of this.
    pub data_dir: String,
    /// Index of the org whose peer receives the load.
    #[serde(default)]
    pub target_peer: usize,
    /// Metric records created before the first round, the read key space.
    pub key_count: u64,
    /// Genesis balance of each write worker, in cents.
    #[serde(default = "default_allocation")]
    pub write_allocation_cents: u64,
    #[serde(default = "default_interval")]
    pub sample_interval_ms: u64,
    /// Rounds run in order; `index` is assigned from the position.
    pub rounds: Vec<RoundSpec>,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error("bench setup failed: {0}")]
    Setup(String),
}

impl From<ClientError> for BenchError {
    fn from(e: ClientError) -> BenchError {
        BenchError::Setup(e.to_string())
    }
}

impl BenchConfig {
    pub fn new(network: BenchNetwork, data_dir: &str, key_count: u64, rounds: Vec<RoundSpec>) -> BenchConfig {
        BenchConfig {
            network,
            data_dir: data_dir.into(),
            target_peer: 0,
            key_count,
            write_allocation_cents: default_allocation(),
            sample_interval_ms: default_interval(),
            rounds,
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<BenchConfig, String> {
        let doc = parse_doc(bytes).map_err(|e| e.to_string())?;
        let mut cfg: BenchConfig = from_doc(&doc).map_err(|e| e.to_string())?;
        for (i, r) in cfg.rounds.iter_mut().enumerate() {
            r.index = i as u32;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_canonical(&self) -> Vec<u8> {
        to_canonical_bytes(self).expect("rates are decimal strings, so the config holds no floats")
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.network.orgs == 0 {
            return Err("at least one org is required".into());
        }
        if self.target_peer >= self.network.orgs {
            return Err(format!("target_peer {} is not one of {} orgs", self.target_peer, self.network.orgs));
        }
        if self.key_count == 0 {
            return Err("key_count must be positive".into());
        }
        self.network.policy.validate()?;
        for r in &self.rounds {
            r.validate().map_err(|e| format!("{}: {e}", r.name()))?;
        }
        Ok(())
    }

    fn write_workers(&self) -> u32 {
        self.rounds.iter().filter(|r| matches!(r.workload, Workload::SubmitWrite { .. })).map(|r| r.workers).max().unwrap_or(0)
    }
}

/// Participants of the bench project.
struct Cast {
    owner: SecretKey,
    client: (Identity, SecretKey),
    writers: Vec<(Identity, SecretKey)>,
}

fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Brings up the network described by `cfg` under `dir`.
pub fn start_network(cfg: &BenchConfig, dir: &Path, identities: Vec<Identity>, allocations: Vec<(Identity, u64)>) -> Result<DemoNetwork, BenchError> {
    let key = SecretKey::generate();
    let dir_s = dir.display().to_string();
    let mut net = match cfg.network.transport {
        TransportKind::Tcp => NetworkConfig::tcp(cfg.network.orgs, &cfg.network.host, cfg.network.base_port, &key, &dir_s),
        TransportKind::Loopback => NetworkConfig::loopback(cfg.network.orgs, &key, &dir_s),
    };
    net.policy = cfg.network.policy.clone();
    net.identities = identities;
    net.allocations = allocations.into_iter().map(|(id, c)| (id.member_id, c)).collect();
    Ok(DemoNetwork::start(net, key)?)
}

/// Runs every round of `cfg` on a fresh network and collects the report.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    cfg.validate().map_err(BenchError::Config)?;
    let dir = PathBuf::from(&cfg.data_dir).join(format!("run-{}", unix_ms()));
    let (owner_id, owner) = generate_identity(Role::Manager, "org1");
    let client = generate_identity(Role::Client, "org2");
    let writers: Vec<_> = (0..cfg.write_workers()).map(|i| generate_identity(Role::Developer, &format!("org{}", i as usize % cfg.network.orgs + 1))).collect();
    let identities = [owner_id.clone(), client.0.clone()].into_iter().chain(writers.iter().map(|w| w.0.clone())).collect();
    let allocations = writers.iter().map(|w| (w.0.clone(), cfg.write_allocation_cents)).collect();
    let net = start_network(cfg, &dir, identities, allocations)?;
    if !net.wait_synced(Duration::from_secs(30)) {
        return Err(BenchError::Setup("peers did not reach the orderer's genesis block".into()));
    }
    let cast = Cast { owner, client, writers };
    let nonces = NonceSource::from_clock();
    setup_project(&net.client(cfg.target_peer), &cast, cfg.key_count, &nonces)?;
    run_rounds(&net, cfg, &cast, &nonces)
}

fn setup_project(chain: &NodeClient, cast: &Cast, key_count: u64, nonces: &NonceSource) -> Result<(), BenchError> {
    let retry = RetryPolicy::default();
    let commit = |tx: Transaction| -> Result<(), BenchError> {
        let loc = submit_and_wait(chain, &tx, retry)?;
        if loc.valid {
            Ok(())
        } else {
            Err(BenchError::Setup(format!("{}: {}", tx.body.operation, loc.error.unwrap_or_default())))
        }
    };
    let sign = |call: Call, key: &SecretKey| call.sign(BENCH_PROJECT, key, unix_ms(), nonces.next());

    let terms = br#"{"Project Budget": "$1000", "Payment After 1 Iteration": "$100", "In Case of Non Payment": "Stop Project's Functions"}"#;
    let agreement = Agreement::from_terms_json(std::str::from_utf8(terms).expect("ascii")).map_err(BenchError::Setup)?;
    debug_assert_eq!(agreement.trigger, PaymentTrigger::PerIteration);
    let terms_cid = chain.castore_put(terms)?;
    commit(sign(Call::create_project(BENCH_PROJECT, &terms_cid, &agreement), &cast.owner))?;
    commit(sign(Call::add_member(&cast.client.0), &cast.owner))?;
    for (id, _) in &cast.writers {
        commit(sign(Call::add_member(id), &cast.owner))?;
    }
    commit(sign(Call::accept_terms(Side::Team), &cast.owner))?;
    commit(sign(Call::accept_terms(Side::Client), &cast.client.1))?;

    // Submit the key space in bulk, then wait for all of it.
    let mut pending = Vec::new();
    for seq in 0..key_count {
        let tx = sign(Call::record_metric("bench.key", seq as i64, 0), &cast.owner);
        submit_with_backoff(chain, &tx)?;
        pending.push(tx.tx_id);
    }
    for id in pending {
        let loc = chain.wait_tx(&id, Duration::from_secs(60))?;
        if !loc.valid {
            return Err(BenchError::Setup(format!("metric record: {}", loc.error.unwrap_or_default())));
        }
    }
    Ok(())
}

fn submit_with_backoff(chain: &NodeClient, tx: &Transaction) -> Result<(), ClientError> {
    let mut wait = Duration::from_millis(20);
    loop {
        match chain.submit(tx) {
            Err(e) if e.is_transient() && wait < Duration::from_secs(5) => {
                std::thread::sleep(wait);
                wait *= 2;
            }
            other => return other,
        }
    }
}

fn probe_targets(net: &DemoNetwork) -> Vec<ProbeTarget> {
    let mut out: Vec<ProbeTarget> = net
        .running_peers()
        .map(|p| ProbeTarget {
            name: format!("/{}.example.com", p.name()),
            thread_prefix: format!("{}/", p.name()),
            traffic: p.traffic(),
            disk: Some(p.disk()),
        })
        .collect();
    let o = net.orderer();
    out.push(ProbeTarget {
        name: "/orderer.example.com".into(),
        thread_prefix: format!("{}/", crate::node::orderer::ORDERER_NAME),
        traffic: o.traffic(),
        disk: Some(o.disk()),
    });
    out
}

fn run_rounds(net: &DemoNetwork, cfg: &BenchConfig, cast: &Cast, nonces: &NonceSource) -> Result<BenchReport, BenchError> {
    let mut report = BenchReport { rounds: Vec::new(), resources: Vec::new() };
    let interval = Duration::from_millis(cfg.sample_interval_ms);
    for spec in &cfg.rounds {
        let clients: Vec<NodeClient> = (0..spec.workers).map(|_| net.client(cfg.target_peer).with_timeout(Duration::from_secs(10))).collect();
        let monitor = ResourceMonitor::start(&spec.name(), probe_targets(net), interval).map_err(BenchError::Setup)?;
        log::info!("running {}", spec.name());
        let metrics = match &spec.workload {
            Workload::QueryState { key_pattern, key_count } => {
                run_round(spec, &ReadAdapter { clients: &clients, pattern: key_pattern, key_count: *key_count })
            }
            Workload::SubmitWrite { write } => {
                run_round(spec, &WriteAdapter { clients: &clients, writers: &cast.writers, write, nonces })
            }
        };
        report.resources.push(monitor.finish());
        report.rounds.push(metrics);
    }
    Ok(report)
}

/// The read key pattern that hits the metric records made during setup.
pub fn metric_key_pattern() -> String {
    keys::metric(BENCH_PROJECT, 0).replace("0000000000", "{n}")
}

fn adapter_err(e: ClientError) -> AdapterError {
    match e {
        ClientError::Unavailable(m) => AdapterError::Unavailable(m),
        other => AdapterError::Failed(other.to_string()),
    }
}

/// Keyed state reads; a missing key counts as a failure.
pub struct ReadAdapter<'a> {
    pub clients: &'a [NodeClient],
    pub pattern: &'a str,
    pub key_count: u64,
}

impl SutAdapter for ReadAdapter<'_> {
    fn execute(&self, worker: u32, seq: u64) -> Result<(), AdapterError> {
        let key = Workload::key_for(self.pattern, self.key_count, seq);
        match self.clients[worker as usize].query_state(&key).map_err(adapter_err)? {
            Some(_) => Ok(()),
            None => Err(AdapterError::Failed(format!("{key} not found"))),
        }
    }
}

/// Signed writes confirmed by commit; an invalid commit counts as a failure.
struct WriteAdapter<'a> {
    clients: &'a [NodeClient],
    writers: &'a [(Identity, SecretKey)],
    write: &'a WriteOp,
    nonces: &'a NonceSource,
}

impl SutAdapter for WriteAdapter<'_> {
    fn execute(&self, worker: u32, seq: u64) -> Result<(), AdapterError> {
        let w = worker as usize;
        let (_, key) = &self.writers[w];
        let call = match self.write {
            WriteOp::Transfer { cents } => Call::transfer(&self.writers[(w + 1) % self.writers.len()].0.member_id, *cents),
            WriteOp::RecordMetric { metric_name } => Call::record_metric(metric_name, seq as i64, 0),
        };
        let tx = call.sign(BENCH_PROJECT, key, unix_ms(), self.nonces.next());
        let chain = &self.clients[w];
        chain.submit(&tx).map_err(adapter_err)?;
        let loc = chain.wait_tx(&tx.tx_id, Duration::from_secs(30)).map_err(adapter_err)?;
        if loc.valid {
            Ok(())
        } else {
            Err(AdapterError::Failed(loc.error.unwrap_or_default()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::schedule::{Rate, Termination, Tps};
    use super::*;

    fn config(dir: &Path) -> BenchConfig {
        let network = BenchNetwork {
            transport: TransportKind::Loopback,
            orgs: 2,
            host: default_host(),
            base_port: 0,
            policy: OrderingPolicy { max_batch_wait_ms: 20, ..OrderingPolicy::default() },
        };
        let rounds = vec![
            RoundSpec {
                index: 0,
                label: "QueryPrivateData".into(),
                workload: Workload::QueryState { key_pattern: metric_key_pattern(), key_count: 20 },
                termination: Termination::TxNumber { count: 60 },
                rate: Rate::FixedRate { tps: Tps::whole(200) },
                workers: 2,
            },
            RoundSpec {
                index: 1,
                label: "Transfer".into(),
                workload: Workload::SubmitWrite { write: WriteOp::Transfer { cents: 1 } },
                termination: Termination::TxDuration { seconds: 1 },
                rate: Rate::LinearRate { start_tps: Tps::whole(10), end_tps: Tps::whole(30) },
                workers: 8,
            },
        ];
        let mut cfg = BenchConfig::new(network, &dir.display().to_string(), 20, rounds);
        cfg.sample_interval_ms = 100;
        cfg
    }

    #[test]
    fn config_file_roundtrip_and_checks() {
        let cfg = config(Path::new("/tmp/b"));
        assert_eq!(BenchConfig::from_bytes(&cfg.to_canonical()).unwrap(), cfg);
        let mut bad = cfg.clone();
        bad.target_peer = 5;
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.rounds[0].rate = Rate::FixedRate { tps: Tps::from_milli(0) };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn read_and_write_rounds_on_demo_network() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_bench(&config(dir.path())).unwrap();
        let read = &report.rounds[0];
        assert_eq!((read.succ, read.fail), (60, 0));
        let write = &report.rounds[1];
        // (10+30)/2 tps over 1 s.
        assert_eq!(write.attempted(), 20);
        assert_eq!(write.fail, 0);
        assert_eq!(report.resources.len(), 2);
        let names: Vec<&str> = report.resources[1].processes.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["/peer0.org1.example.com", "/peer0.org2.example.com", "/orderer.example.com"]);
        // Writes reach the orderer; the block log grows.
        let orderer = &report.resources[1].processes[2];
        assert!(orderer.traffic_in_mb > 0.0 && orderer.disc_write_b > 0);
    }
}
