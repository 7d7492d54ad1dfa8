//! Walks one project through initiation, a gated deploy, a missed payment
//! and the freeze that follows, on an in-memory network with a manual clock.

use std::collections::BTreeMap;

use devchain::castore::ContentId;
use devchain::client::{query_typed, submit_and_wait, LocalChain, RetryPolicy};
use devchain::consensus::{GenesisSpec, LocalNetwork, NetworkTopology, OrderingPolicy};
use devchain::contracts::{keys, Agreement, BuildSubmission, Call, PaymentTrigger, Project, Side, Verdict};
use devchain::ledger::{generate_identity, Identity, Role, SecretKey};

struct Member {
    identity: Identity,
    key: SecretKey,
}

fn member(role: Role, org: &str) -> Member {
    let (identity, key) = generate_identity(role, org);
    Member { identity, key }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manager = member(Role::Manager, "org1");
    let client = member(Role::Client, "org2");
    let dev = member(Role::Developer, "org1");
    let tester = member(Role::Tester, "org3");
    let genesis = GenesisSpec {
        identities: [&manager, &client, &dev, &tester].iter().map(|m| m.identity.clone()).collect(),
        allocations: BTreeMap::from([(client.identity.member_id, 1_000_000)]),
        time_scale_divisor: 1,
    };
    let policy = OrderingPolicy { heartbeat_ms: None, ..OrderingPolicy::default() };
    let chain = LocalChain::new(LocalNetwork::new(NetworkTopology::with_orgs(3), policy, SecretKey::generate(), &genesis, 0));

    let mut nonce = 0;
    let mut run = |who: &Member, call: Call| {
        nonce += 1;
        let tx = call.sign("shop", &who.key, 0, nonce);
        let loc = submit_and_wait(&chain, &tx, RetryPolicy::default()).expect("committed");
        let outcome = loc.error.clone().unwrap_or_else(|| "ok".into());
        println!("block {:>2}  {:<10}{outcome}", loc.height, format!("{:?}", who.identity.role));
    };

    let agreement = Agreement::new(300_000, 100_000, PaymentTrigger::PerIteration);
    run(&manager, Call::create_project("Web shop", &ContentId::of(b"terms"), &agreement));
    for m in [&client, &dev, &tester] {
        run(&manager, Call::add_member(&m.identity));
    }
    run(&manager, Call::accept_terms(Side::Team));
    run(&client, Call::accept_terms(Side::Client));

    let build = BuildSubmission {
        name: "shop".into(),
        version: "1.0.1".into(),
        time: "09:30:00".into(),
        date: "2024-03-01".into(),
        package_cid: Some(ContentId::of(b"package bytes")),
        review: Verdict::Pass,
        unit: Verdict::Pass,
        integration: Verdict::Pass,
    };
    run(&dev, Call::record_build(&build));
    // Deploy is refused until a tester attests all three gate flags.
    run(&tester, Call::deploy("shop", "1.0.1", "/srv/shop"));
    run(&tester, Call::attest_gate("shop", "1.0.1", true, true, true));
    run(&tester, Call::deploy("shop", "1.0.1", "/srv/shop"));

    let project: Project = query_typed(&chain, &keys::project("shop"))?.expect("project");
    println!("status {:?}, next installment due at {:?} ms", project.status, project.next_due);

    // Let the due date and grace period lapse with no payment.
    let due = project.next_due.unwrap_or(0);
    let now = chain.network().lock().now();
    chain.network().lock().advance(due + agreement.grace_ms + 1 - now);
    run(&dev, Call::record_metric("p99_ms", 180, 0));
    println!("status {:?}", query_typed::<Project>(&chain, &keys::project("shop"))?.expect("project").status);

    run(&client, Call::pay_installment());
    println!("status {:?}", query_typed::<Project>(&chain, &keys::project("shop"))?.expect("project").status);
    Ok(())
}
