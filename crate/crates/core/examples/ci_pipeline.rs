//! Runs the CI pipeline twice against a replicated in-process network: once
//! on a commit that trips the review check, once on the fix. The passing
//! build is gated, deployed to a local directory, and shown in the trail.

use std::time::Duration;

use devchain::castore::CaStore;
use devchain::client::{query_typed, submit_and_wait, NonceSource, RetryPolicy, SystemClock};
use devchain::contracts::{keys, Agreement, Audience, Call, PaymentTrigger, RepoHead, Side};
use devchain::ledger::{generate_identity, Role};
use devchain::node::{audit_trail, DemoNetwork};
use devchain::pipeline::{execute_deploy, run_pipeline, CheckRule, CiContext, PackageSpec, PipelineConfig, RuleKind, Stage, StageSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let (manager, manager_key) = generate_identity(Role::Manager, "org1");
    let (client, client_key) = generate_identity(Role::Client, "org2");
    let (dev, dev_key) = generate_identity(Role::Developer, "org1");
    let (tester, tester_key) = generate_identity(Role::Tester, "org2");
    let members = [manager.clone(), client.clone(), dev.clone(), tester.clone()];
    let (net, _) = DemoNetwork::loopback(2, &dir.path().join("net"), |cfg| cfg.identities = members.to_vec())?;
    let chain = net.client(0);
    let nonces = NonceSource::from_clock();
    let send = |key, call: Call| -> Result<u64, Box<dyn std::error::Error>> {
        let tx = call.sign("shop", key, 0, nonces.next());
        let loc = submit_and_wait(&chain, &tx, RetryPolicy::default())?;
        match loc.error {
            Some(e) => Err(e.into()),
            None => Ok(loc.output["head_seq"].as_u64().unwrap_or(0)),
        }
    };

    let terms = chain.castore_put(b"budget 900, 300 per iteration")?;
    send(&manager_key, Call::create_project("Web shop", &terms, &Agreement::new(90_000, 30_000, PaymentTrigger::PerIteration)))?;
    for m in [&client, &dev, &tester] {
        send(&manager_key, Call::add_member(m))?;
    }
    send(&manager_key, Call::accept_terms(Side::Team))?;
    send(&client_key, Call::accept_terms(Side::Client))?;

    let pipeline = PipelineConfig {
        stages: vec![
            StageSpec { stage: Stage::Review, checks: vec![CheckRule { rule: RuleKind::ForbiddenPattern { pattern: "password =".into() }, description: "no inline secrets".into() }] },
            StageSpec { stage: Stage::Unit, checks: vec![CheckRule { rule: RuleKind::RequiredPath { path: "tests".into() }, description: "tests exist".into() }] },
            StageSpec { stage: Stage::Integration, checks: vec![CheckRule { rule: RuleKind::MaxFileBytes { limit: 64 * 1024 }, description: "small sources".into() }] },
        ],
        package: PackageSpec { name: "shop".into(), version_template: "0.1.<head_seq>".into(), include_paths: vec!["src".into()] },
        deploy_target: "staging".into(),
    };
    let config = pipeline.to_canonical();
    let store = CaStore::open(dir.path().join("work"))?;
    let ctx = CiContext { store: &store, chain: &chain, signer: &dev_key, nonces: &nonces, clock: &SystemClock, retry: RetryPolicy::default() };
    let mut alerts = net.client(1).subscribe_events(0, Some(Audience::Developers))?;

    let mut parent = None;
    for source in ["let password = \"hunter2\";\n", "let secret = std::env::var(\"PW\");\n"] {
        let tree = store.put_files([("devchain.pipeline", config.as_slice()), ("src/main.rs", source.as_bytes()), ("tests/cart.rs", b"".as_slice())])?;
        let commit = store.commit(parent, tree, dev.member_id, "work", 0)?;
        parent = Some(commit);
        chain.push_closure(&store, &commit)?;
        let seq = send(&dev_key, Call::record_repo_head(&commit))?;
        let head: RepoHead = query_typed(&chain, &keys::head("shop", seq))?.expect("head recorded");
        let run = run_pipeline(&ctx, "shop", &head, &pipeline)?;
        println!("head {seq}: build {} recorded in block {}", run.submission.version, run.height);
        for s in &run.stages {
            println!("  {:?}: {:?}", s.stage, s.verdict);
        }
        if let Some(package) = run.package_cid {
            chain.push_closure(&store, &package)?;
            send(&tester_key, Call::attest_gate("shop", &run.submission.version, true, true, true))?;
            let deployed = execute_deploy(&ctx, "shop", "shop", &run.submission.version, &dir.path().join("staging"))?;
            println!("  deployed to {} in block {}", deployed.path.display(), deployed.height);
        }
    }
    while let Some(ev) = alerts.next_timeout(Duration::from_millis(300))? {
        if ev.event_name == "Alert" {
            println!("alert in block {}: {}", ev.block_height, ev.payload);
        }
    }

    for e in audit_trail(&net.client(1), "shop")? {
        println!("{:>3}.{}  {:<12} {}", e.height, e.index, e.phase, e.operation);
    }
    net.shutdown();
    Ok(())
}
