//! Starts an orderer and three org peers on local TCP ports, submits through
//! different peers, stops one peer while traffic continues, and shows that it
//! catches up from its own block log plus the orderer stream on restart.

use std::collections::BTreeMap;
use std::time::Duration;

use devchain::client::{submit_and_wait, NonceSource, RetryPolicy};
use devchain::contracts::Call;
use devchain::ledger::{generate_identity, Role, SecretKey};
use devchain::node::{DemoNetwork, NetworkConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let orderer_key = SecretKey::generate();
    let mut cfg = NetworkConfig::tcp(3, "127.0.0.1", 0, &orderer_key, &dir.path().display().to_string());
    cfg.orderer_endpoint = "127.0.0.1:0".into();
    for org in &mut cfg.orgs {
        org.peer_endpoint = "127.0.0.1:0".into();
    }
    let (alice, alice_key) = generate_identity(Role::Developer, "org1");
    let (bob, _) = generate_identity(Role::Developer, "org2");
    cfg.identities = vec![alice.clone(), bob.clone()];
    cfg.allocations = BTreeMap::from([(alice.member_id, 100_000)]);

    let mut net = DemoNetwork::start(cfg, orderer_key)?;
    println!("orderer on {}", net.config().orderer_endpoint);
    for org in &net.config().orgs {
        println!("{} peer on {}", org.name, org.peer_endpoint);
    }

    let nonces = NonceSource::starting_at(1);
    let pay = |net: &DemoNetwork, peer: usize, cents: u64| -> Result<u64, Box<dyn std::error::Error>> {
        let tx = Call::transfer(&bob.member_id, cents).sign("", &alice_key, 0, nonces.next());
        Ok(submit_and_wait(&net.client(peer), &tx, RetryPolicy::default())?.height)
    };
    for i in 0..6 {
        let h = pay(&net, i % 3, 100)?;
        println!("transfer via org{} committed in block {h}", i % 3 + 1);
    }

    net.stop_peer(2);
    println!("org3 peer stopped");
    for _ in 0..4 {
        pay(&net, 0, 50)?;
    }
    println!("orderer now holds {} blocks", net.orderer().len());

    net.start_peer(2)?;
    let synced = net.wait_synced(Duration::from_secs(10));
    println!("org3 peer restarted, synced: {synced}");
    let digests = net.settled_digests(Duration::from_secs(10)).unwrap_or_default();
    for (i, d) in digests.iter().enumerate() {
        println!("org{} state digest {d}", i + 1);
    }
    println!("all equal: {}", digests.windows(2).all(|w| w[0] == w[1]));
    net.shutdown();
    Ok(())
}
