//! Builds a short chain in memory, writes it to a block log, flips one byte,
//! and audits both copies.

use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use devchain::client::{submit_and_wait, ChainAccess, LocalChain, RetryPolicy};
use devchain::consensus::{GenesisSpec, LocalNetwork, NetworkTopology, OrderingPolicy};
use devchain::contracts::Call;
use devchain::ledger::{generate_identity, Role, SecretKey};
use devchain::node::{audit_block_log, BlockLog, DiskCounters};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (alice, alice_key) = generate_identity(Role::Manager, "org1");
    let (bob, _) = generate_identity(Role::Developer, "org2");
    let genesis = GenesisSpec {
        identities: vec![alice.clone(), bob.clone()],
        allocations: BTreeMap::from([(alice.member_id, 10_000)]),
        time_scale_divisor: 1,
    };
    let orderer_key = SecretKey::generate();
    let orderer_pk = orderer_key.public_key();
    let policy = OrderingPolicy { heartbeat_ms: None, ..OrderingPolicy::default() };
    let chain = LocalChain::new(LocalNetwork::new(NetworkTopology::with_orgs(2), policy, orderer_key, &genesis, 1_700_000_000_000));

    for nonce in 1..=5 {
        let tx = Call::transfer(&bob.member_id, 100 * nonce).sign("", &alice_key, 0, nonce);
        let loc = submit_and_wait(&chain, &tx, RetryPolicy::default())?;
        println!("transfer {nonce} -> block {} (valid: {})", loc.height, loc.valid);
    }
    println!("head height {}", chain.head_height()?);

    let dir = tempfile::tempdir()?;
    let (mut log, _) = BlockLog::open(dir.path(), Arc::new(DiskCounters::default()))?;
    for block in chain.network().lock().peer(0).chain().blocks() {
        log.append(block)?;
    }
    drop(log);
    let report = audit_block_log(dir.path(), &orderer_pk)?;
    println!("clean log: {} blocks, {} violations", report.blocks_checked, report.violations.len());

    let path = dir.path().join("blocks.log");
    let mut bytes = fs::read(&path)?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    fs::write(&path, bytes)?;
    let report = audit_block_log(dir.path(), &orderer_pk)?;
    println!("tampered log: {} violations", report.violations.len());
    for v in report.violations.iter().take(3) {
        println!("  block {}: {}", v.height, v.kind);
    }
    Ok(())
}
