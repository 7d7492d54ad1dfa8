//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints exactly one `PASS` or `FAIL` line, then exits non-zero if any
//! failed.

mod support;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use devchain::bench::{
    metric_key_pattern, render_report, run_bench, BenchConfig, BenchNetwork, Rate, ReportFormat, RoundMetrics, RoundSpec, Termination,
    Tps, Workload, PERF_COLUMNS,
};
use devchain::castore::{CaStore, ContentId, EntryKind, TreeEntry};
use devchain::cli::{exit, run_with};
use devchain::client::{query_typed, ChainAccess, ClientError, NonceSource, RetryPolicy, SystemClock};
use devchain::consensus::OrderingPolicy;
use devchain::contracts::{
    keys, Agreement, Audience, BuildRecord, BuildStatus, Call, PaymentReceipt, PaymentTrigger, PlanKind, ProjectStatus, RepoHead,
    Severity, Side, TokenBalance, Verdict,
};
use devchain::ledger::{Identity, Role, Transaction};
use devchain::node::{audit_trail, BlockLog, DemoNetwork, DiskCounters, NodeClient, TransportKind};
use devchain::pipeline::{
    execute_deploy, run_pipeline, CheckRule, CiContext, PackageSpec, PipelineConfig, RuleKind, Stage, StageSpec,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::Value;
use support::{active_project, local_chain, project, submission, Actor};
use tempfile::TempDir;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 8] = [
        ("1 tamper evidence", 60, tamper_evidence),
        ("2 replica consistency", 120, replica_consistency),
        ("3 contract state machines", 30, contract_state_machines),
        ("4 payment timing", 300, payment_timing),
        ("5 content store", 60, content_store),
        ("6 benchmark harness", 120, benchmark_harness),
        ("7 end-to-end lifecycle", 60, end_to_end_lifecycle),
        ("8 CI failure path", 30, ci_failure_path),
    ];
    panic::set_hook(Box::new(|_| {}));
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        let result = result.and_then(|d| if secs <= budget as f64 { Ok(d) } else { Err(format!("{d}; over the {budget} s budget")) });
        match result {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1} s): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1} s): {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).unwrap().as_millis() as u64
}

fn cli(args: &[&str]) -> (i32, Value) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(["devchain", "--json"].into_iter().chain(args.iter().copied()), &mut out, &mut err);
    let doc = serde_json::from_slice(&out).unwrap_or(Value::Null);
    (code, doc)
}

/// Submits, retrying while the orderer queue is full.
fn submit(chain: &dyn ChainAccess, tx: &Transaction) -> Result<(), ClientError> {
    let mut backoff = Duration::from_millis(5);
    loop {
        match chain.submit(tx) {
            Err(e) if e.is_transient() => {
                thread::sleep(backoff);
                backoff = (backoff * 2).min(Duration::from_millis(200));
            }
            other => return other,
        }
    }
}

// 1 -------------------------------------------------------------------------

fn tamper_evidence() -> Outcome {
    let owner = Actor::new(Role::Manager, "org1");
    let client = Actor::new(Role::Client, "org2");
    let dev = Actor::new(Role::Developer, "org1");
    let chain = local_chain(&[&owner, &client, &dev], 1_000_000, 1, 1_700_000_000_000);
    active_project(&chain, "tamper", &owner, &client, &[&dev], &Agreement::new(100_000, 10_000, PaymentTrigger::PerTwoWeeks));
    // One transaction per block until the chain holds 100 blocks.
    let mut i = 0;
    while chain.head_height().unwrap() < 99 {
        match i % 3 {
            0 => dev.ok(&chain, "tamper", Call::record_metric("latency_ms", i, 1)),
            1 => owner.ok(&chain, "", Call::transfer(&dev.id(), 1 + i as u64)),
            _ => dev.ok(&chain, "tamper", Call::raise_alert(Severity::Low, &format!("note {i}"))),
        };
        i += 1;
    }
    let (blocks, orderer_key) = {
        let net = chain.network().lock();
        (net.peer(0).chain().blocks().to_vec(), net.orderer().public_key())
    };
    ensure!(blocks.len() == 100, "built {} blocks", blocks.len());

    let dir = TempDir::new().unwrap();
    let clean = dir.path().join("clean");
    let (mut log, _) = BlockLog::open(&clean, Arc::new(DiskCounters::default())).unwrap();
    for b in &blocks {
        log.append(b).unwrap();
    }
    drop(log);
    let key_hex = orderer_key.to_string();
    let verify = |d: &Path| cli(&["audit", "verify-chain", "--data-dir", d.to_str().unwrap(), "--orderer-key", &key_hex]);

    let (code, doc) = verify(&clean);
    let clean_violations = doc["result"]["violations"].as_array().map_or(usize::MAX, |v| v.len());
    ensure!(code == exit::OK && clean_violations == 0, "untampered chain: exit {code}, {clean_violations} violations");
    ensure!(doc["result"]["blocks_checked"] == 100, "checked {}", doc["result"]["blocks_checked"]);

    let original = fs::read(clean.join("blocks.log")).unwrap();
    let tampered = dir.path().join("tampered");
    fs::create_dir_all(&tampered).unwrap();
    let mut rng = StdRng::seed_from_u64(0x7a3e_2001);
    let trials = 1000;
    let mut flagged = 0;
    let mut misses = Vec::new();
    for _ in 0..trials {
        let mut bytes = original.clone();
        let pos = rng.gen_range(0..bytes.len());
        bytes[pos] ^= rng.gen_range(1..=255u8);
        fs::write(tampered.join("blocks.log"), &bytes).unwrap();
        let (code, doc) = verify(&tampered);
        let n = doc["result"]["violations"].as_array().map_or(0, |v| v.len());
        if code == exit::INTEGRITY && n >= 1 {
            flagged += 1;
        } else if misses.len() < 5 {
            misses.push(pos);
        }
    }
    ensure!(flagged == trials, "{flagged}/{trials} mutations flagged; missed offsets {misses:?}");
    Ok(format!("{flagged}/{trials} single-byte mutations of a {}-byte, 100-block log flagged; clean log has 0 violations", original.len()))
}

// 2 -------------------------------------------------------------------------

fn replica_consistency() -> Outcome {
    let dir = TempDir::new().unwrap();
    let owner = Actor::new(Role::Owner, "org1");
    let client = Actor::new(Role::Client, "org2");
    let devs: Vec<Actor> = (0..4).map(|i| Actor::new(Role::Developer, &format!("org{}", i % 4 + 1))).collect();
    let tester = Actor::new(Role::Tester, "org3");
    let late = Actor::new(Role::Developer, "org4");
    let mut everyone: Vec<&Actor> = vec![&owner, &client, &tester];
    everyone.extend(devs.iter());
    let (net, _) = DemoNetwork::loopback(4, dir.path(), |cfg| {
        cfg.policy = OrderingPolicy { max_batch_wait_ms: 20, ..OrderingPolicy::default() };
        let g = support::genesis(&everyone, 50_000, 1);
        cfg.identities = g.identities;
        cfg.allocations = g.allocations;
    })
    .map_err(|e| e.to_string())?;
    let c0 = net.client(0);
    let members: Vec<&Actor> = devs.iter().chain([&tester]).collect();
    active_project(&c0, "mix", &owner, &client, &members, &Agreement::new(1_000_000, 1_000, PaymentTrigger::PerTwoWeeks));

    let total = 5000;
    let per_peer = total / 4;
    let results: Vec<Result<(usize, Vec<Transaction>), String>> = thread::scope(|s| {
        let handles: Vec<_> = (0..4)
            .map(|p| {
                let chain = net.client(p);
                let (devs, owner, client, late) = (&devs, &owner, &client, &late);
                s.spawn(move || {
                    let mut rng = StdRng::seed_from_u64(p as u64);
                    let me = &devs[p];
                    let mut sent = Vec::with_capacity(per_peer);
                    for k in 0..per_peer {
                        let tx = match rng.gen_range(0..10) {
                            0..=2 => me.sign("", Call::transfer(&devs[rng.gen_range(0..4)].id(), rng.gen_range(1..2_000))),
                            3..=5 => me.sign("mix", Call::record_metric("cpu", rng.gen_range(-500..500), 2)),
                            6 => me.sign("mix", Call::raise_alert(Severity::Medium, &format!("peer {p} #{k}"))),
                            7 => me.sign("mix", Call::record_plan(&ContentId::of(&k.to_le_bytes()), PlanKind::Notes)),
                            // Deterministically invalid: wrong role, wrong side, unknown project.
                            8 => client.sign("mix", Call::accept_terms(Side::Team)),
                            _ => match k % 3 {
                                0 => owner.sign("nowhere", Call::record_metric("x", 1, 0)),
                                1 => late.sign("", Call::register(&late.identity)),
                                _ => me.sign("mix", Call::attest_gate("none", "0", true, true, true)),
                            },
                        };
                        submit(&chain, &tx).map_err(|e| format!("peer {p}: {e}"))?;
                        sent.push(tx);
                    }
                    Ok((p, sent))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut valid = 0;
    let mut invalid = 0;
    for r in results {
        let (p, sent) = r?;
        let chain = net.client(p);
        for tx in &sent {
            let loc = chain.wait_tx(&tx.tx_id, Duration::from_secs(60)).map_err(|e| e.to_string())?;
            if loc.valid {
                valid += 1;
            } else {
                invalid += 1;
            }
        }
    }
    ensure!(valid + invalid == total, "{} of {total} committed", valid + invalid);
    let digests = net.settled_digests(Duration::from_secs(30)).ok_or("peers did not settle")?;
    ensure!(digests.len() == 4, "{} peers reported", digests.len());
    ensure!(digests.windows(2).all(|w| w[0] == w[1]), "digests differ: {digests:?}");
    let heights: BTreeSet<u64> = net.running_peers().map(|p| p.len()).collect();
    ensure!(heights.len() == 1, "heights differ: {heights:?}");
    Ok(format!(
        "{total} txs ({valid} valid, {invalid} invalid) over {} blocks; 4 peers agree on state digest {}",
        heights.iter().next().unwrap(),
        &digests[0].to_string()[..12]
    ))
}

// 3 -------------------------------------------------------------------------

fn contract_state_machines() -> Outcome {
    let owner = Actor::new(Role::Manager, "org1");
    let client = Actor::new(Role::Client, "org2");
    let tester = Actor::new(Role::Tester, "org3");
    let dev = Actor::new(Role::Developer, "org1");
    let chain = local_chain(&[&owner, &client, &tester, &dev], 10_000_000, 1, 1_700_000_000_000);
    let agreement = Agreement::new(100_000, 25_000, PaymentTrigger::PerTwoWeeks);
    let mut checks = 0;

    // Terms need both acceptances, in any order and with repeats.
    let sequences: [&[Side]; 7] = [&[], &[Side::Team], &[Side::Client], &[Side::Team, Side::Client], &[Side::Client, Side::Team], &[Side::Team, Side::Team], &[Side::Client, Side::Client]];
    for (i, seq) in sequences.iter().enumerate() {
        let id = format!("accept{i}");
        owner.ok(&chain, &id, Call::create_project("p", &support::terms_cid(), &agreement));
        owner.ok(&chain, &id, Call::add_member(&client.identity));
        for side in seq.iter() {
            let who = if *side == Side::Team { &owner } else { &client };
            who.commit(&chain, &id, Call::accept_terms(*side));
        }
        let both = seq.contains(&Side::Team) && seq.contains(&Side::Client);
        let status = project(&chain, &id).status;
        ensure!((status == ProjectStatus::Active) == both, "{seq:?} left the project {status:?}");
        checks += 1;
    }
    let loc = client.commit(&chain, "accept0", Call::accept_terms(Side::Team));
    ensure!(!loc.valid, "a client accepted for the team");
    let loc = owner.commit(&chain, "accept0", Call::accept_terms(Side::Client));
    ensure!(!loc.valid, "the owner accepted for the client");
    checks += 2;

    // Duplicate member keys.
    owner.ok(&chain, "dupes", Call::create_project("p", &support::terms_cid(), &agreement));
    owner.ok(&chain, "dupes", Call::add_member(&dev.identity));
    let same_key = Identity { role: Role::Tester, org: "org4".into(), ..dev.identity.clone() };
    for id in [&dev.identity, &same_key] {
        let loc = owner.commit(&chain, "dupes", Call::add_member(id));
        ensure!(loc.error_code() == Some("DuplicateKey"), "re-adding a key gave {:?}", loc.error);
        checks += 1;
    }

    // The agreement is fixed once the project is active.
    let changed = Agreement::new(200_000, 50_000, PaymentTrigger::PerIteration);
    owner.ok(&chain, "accept3", Call::add_member(&tester.identity));
    owner.ok(&chain, "accept3", Call::add_member(&dev.identity));
    let loc = owner.commit(&chain, "accept3", Call::amend_agreement(&changed));
    ensure!(loc.error_code() == Some("AgreementFrozen"), "amending an active agreement gave {:?}", loc.error);
    let stored: Agreement = query_typed(&chain, &keys::agreement("accept3")).unwrap().unwrap();
    ensure!(stored == agreement, "agreement changed after activation");
    owner.ok(&chain, "accept1", Call::amend_agreement(&changed));
    checks += 2;

    // Deployed is reachable only with three passing stages and three true flags.
    let mut deployed = 0;
    for stages in 0..8u8 {
        for flags in 0..8u8 {
            let verdict = |bit: u8| if stages & bit != 0 { Verdict::Pass } else { Verdict::Fail };
            let version = format!("{stages}.{flags}");
            dev.ok(&chain, "accept3", Call::record_build(&submission(&version, [verdict(1), verdict(2), verdict(4)])));
            tester.commit(&chain, "accept3", Call::attest_gate("app", &version, flags & 1 != 0, flags & 2 != 0, flags & 4 != 0));
            let loc = tester.commit(&chain, "accept3", Call::deploy("app", &version, "/srv/app"));
            let record: BuildRecord = query_typed(&chain, &keys::build("accept3", "app", &version)).unwrap().unwrap();
            let expected = stages == 7 && flags == 7;
            ensure!(loc.valid == expected, "stages {stages:03b} flags {flags:03b}: deploy valid = {}", loc.valid);
            ensure!((record.status == BuildStatus::Deployed) == expected, "stages {stages:03b} flags {flags:03b}: {:?}", record.status);
            deployed += loc.valid as u32;
            checks += 1;
        }
    }
    ensure!(deployed == 1, "{deployed} deployments");

    // Freeze after the deadline plus grace, unfreeze on payment.
    let due = project(&chain, "accept3").next_due.ok_or("no due date after activation")?;
    let grace = Agreement::new(1, 1, PaymentTrigger::PerTwoWeeks).grace_ms;
    // A block is cut one batch wait after submission.
    let wait = OrderingPolicy::default().max_batch_wait_ms;
    let stamp = |h: u64| chain.network().lock().peer(0).chain().blocks()[h as usize].header.block_timestamp;
    let now = chain.network().lock().now();
    chain.network().lock().advance(due + grace - wait - now);
    let loc = dev.ok(&chain, "accept3", Call::record_metric("tick", 1, 0));
    ensure!(stamp(loc.height) == due + grace, "block at {} for deadline {}", stamp(loc.height), due + grace);
    ensure!(project(&chain, "accept3").status == ProjectStatus::Active, "froze at the deadline itself");
    chain.network().lock().advance(1);
    let loc = dev.commit(&chain, "accept3", Call::record_metric("tick", 2, 0));
    ensure!(stamp(loc.height) > due + grace, "second block not past the deadline");
    ensure!(project(&chain, "accept3").status == ProjectStatus::Frozen, "did not freeze past deadline plus grace");
    let loc = dev.commit(&chain, "accept3", Call::record_metric("tick", 3, 0));
    ensure!(!loc.valid, "a frozen project accepted a metric");
    client.ok(&chain, "accept3", Call::pay_installment());
    ensure!(project(&chain, "accept3").status == ProjectStatus::Active, "payment did not unfreeze");
    checks += 4;

    // Token conservation against an independent balance model.
    let actors = [&owner, &client, &tester, &dev];
    let balance = |a: &Actor| query_typed::<TokenBalance>(&chain, &keys::token(&a.id())).unwrap().map_or(0, |b| b.cents);
    let mut model: Vec<u64> = actors.iter().map(|a| balance(a)).collect();
    let total: u64 = model.iter().sum();
    let mut rng = StdRng::seed_from_u64(33);
    for _ in 0..1000 {
        let (from, to) = (rng.gen_range(0..4), rng.gen_range(0..4));
        let cents = rng.gen_range(0..=model[from] + 5_000);
        let loc = actors[from].commit(&chain, "", Call::transfer(&actors[to].id(), cents));
        let ok = cents <= model[from];
        ensure!(loc.valid == ok, "transfer of {cents} with balance {}: valid = {}", model[from], loc.valid);
        if ok {
            model[from] -= cents;
            model[to] += cents;
        }
    }
    let actual: Vec<u64> = actors.iter().map(|a| balance(a)).collect();
    ensure!(actual == model, "balances {actual:?} differ from model {model:?}");
    ensure!(actual.iter().sum::<u64>() == total, "supply changed");
    checks += 1;

    Ok(format!("{checks} model checks, 1000 transfers conserve {total} cents"))
}

// 4 -------------------------------------------------------------------------

struct Schedule {
    id: String,
    owner: Actor,
    client: Actor,
    /// Fractions of each period at which the client pays; empty means never.
    pay_at: Vec<f64>,
}

fn payment_timing() -> Outcome {
    const PERIOD_MS: u64 = 14_000;
    const GRACE_MS: u64 = 2_000;
    const HEARTBEAT_MS: u64 = 250;
    let mut rng = StdRng::seed_from_u64(0x14d);
    let schedules: Vec<Schedule> = (0..20)
        .map(|i| Schedule {
            id: format!("pay{i:02}"),
            owner: Actor::new(Role::Manager, "org1"),
            client: Actor::new(Role::Client, "org2"),
            pay_at: if i % 2 == 0 { vec![] } else { vec![rng.gen_range(0.1..0.8), rng.gen_range(0.1..0.8)] },
        })
        .collect();

    let dir = TempDir::new().unwrap();
    let (net, _) = DemoNetwork::loopback(4, dir.path(), |cfg| {
        cfg.time_scale_divisor = 86_400;
        cfg.policy = OrderingPolicy { max_batch_wait_ms: 50, heartbeat_ms: Some(HEARTBEAT_MS), ..OrderingPolicy::default() };
        let actors: Vec<&Actor> = schedules.iter().flat_map(|s| [&s.owner, &s.client]).collect();
        let g = support::genesis(&actors, 1_000_000, 86_400);
        cfg.identities = g.identities;
        cfg.allocations = g.allocations;
    })
    .map_err(|e| e.to_string())?;
    let scaled = devchain::contracts::ChainConfig { orderer: Default::default(), time_scale_divisor: 86_400 };
    let agreement = Agreement::new(100_000, 10_000, PaymentTrigger::PerTwoWeeks);
    ensure!(scaled.scale(agreement.period_ms) == PERIOD_MS && scaled.scale(agreement.grace_ms) == GRACE_MS, "unexpected scaling");

    // Each schedule runs on its own thread: set up, then pay on time or never.
    let outcomes: Vec<Result<(u64, Vec<u64>), String>> = thread::scope(|s| {
        let handles: Vec<_> = schedules
            .iter()
            .enumerate()
            .map(|(i, sch)| {
                let chain = net.client(i % 4);
                let agreement = &agreement;
                s.spawn(move || {
                    active_project(&chain, &sch.id, &sch.owner, &sch.client, &[], agreement);
                    let first_due = project(&chain, &sch.id).next_due.ok_or("no due date")?;
                    let mut paid_blocks = Vec::new();
                    for (k, frac) in sch.pay_at.iter().enumerate() {
                        let due = first_due + k as u64 * PERIOD_MS;
                        let at = due - PERIOD_MS + (frac * PERIOD_MS as f64) as u64;
                        thread::sleep(Duration::from_millis(at.saturating_sub(unix_ms())));
                        let loc = sch.client.ok(&chain, &sch.id, Call::pay_installment());
                        let receipt: PaymentReceipt = query_typed(&chain, &keys::payment(&sch.id, k as u64 + 1)).unwrap().unwrap();
                        if receipt.block_timestamp > due {
                            return Err(format!("{}: payment {k} landed at {} after due {due}", sch.id, receipt.block_timestamp));
                        }
                        paid_blocks.push(loc.height);
                    }
                    Ok((first_due, paid_blocks))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut dues = Vec::new();
    for o in outcomes {
        dues.push(o?.0);
    }

    // Watch past the last deadline of every schedule: second period for
    // paying schedules, first for the rest.
    let watch_until = schedules
        .iter()
        .zip(&dues)
        .map(|(s, due)| due + s.pay_at.len() as u64 * PERIOD_MS + GRACE_MS + 1_000)
        .max()
        .unwrap();
    thread::sleep(Duration::from_millis(watch_until.saturating_sub(unix_ms())));

    let peer = net.client(0);
    let events = peer.events_since(0, None).map_err(|e| e.to_string())?;
    let mut worst_gap = 0;
    for (sch, due) in schedules.iter().zip(&dues) {
        let freezes: Vec<_> = events.iter().filter(|e| e.event_name == "ProjectFrozen" && e.project_id == sch.id).collect();
        if !sch.pay_at.is_empty() {
            // Paid periods never freeze. The first unpaid period may, once its deadline passes.
            let covered = due + sch.pay_at.len() as u64 * PERIOD_MS + GRACE_MS;
            for f in &freezes {
                let at = f.payload["block_timestamp"].as_u64().unwrap_or(0);
                ensure!(at > covered, "{} froze at {at} although paid through {covered}", sch.id);
            }
            continue;
        }
        ensure!(freezes.len() == 1, "{}: {} freeze events", sch.id, freezes.len());
        let deadline = due + GRACE_MS;
        let h = freezes[0].block_height;
        let stamp = |h: u64| peer.query_block(h).ok().flatten().map(|v| v.block.header.block_timestamp).ok_or(format!("no block {h}"));
        let (frozen_at, before) = (stamp(h)?, stamp(h - 1)?);
        ensure!(frozen_at > deadline && before <= deadline, "{}: froze in block at {frozen_at}, previous {before}, deadline {deadline}", sch.id);
        // The first block past the deadline is at most one cut interval away.
        let gap = frozen_at - deadline;
        ensure!(gap <= HEARTBEAT_MS + 100, "{}: froze {gap} ms after deadline", sch.id);
        worst_gap = worst_gap.max(gap);
    }
    Ok(format!("10 unpaid schedules froze in the first block past deadline+grace (worst {worst_gap} ms late); 10 paid schedules never froze"))
}

// 5 -------------------------------------------------------------------------

fn content_store() -> Outcome {
    let dir = TempDir::new().unwrap();
    let store = CaStore::open(dir.path().join("s")).map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(5);
    let sizes = [0usize, 1, 256 * 1024, 256 * 1024 + 1, 5 * 1024 * 1024];
    for &n in &sizes {
        let mut bytes = vec![0u8; n];
        rng.fill(&mut bytes[..]);
        let cid = store.put_blob(&bytes).map_err(|e| e.to_string())?;
        ensure!(store.get(&cid).map_err(|e| e.to_string())? == bytes, "{n}-byte blob changed");
        ensure!(store.logical_size(&cid).map_err(|e| e.to_string())? == n as u64, "{n}-byte blob size");
    }

    // Tree identity does not depend on insertion order.
    let files: Vec<(String, Vec<u8>)> = (0..40)
        .map(|i| {
            let path = match i % 4 {
                0 => format!("f{i}.txt"),
                1 => format!("src/m{i}.rs"),
                2 => format!("src/deep/x{i}"),
                _ => format!("docs/{i}/readme"),
            };
            (path, format!("content {i}").into_bytes())
        })
        .collect();
    let mut roots = HashSet::new();
    let mut order = files.clone();
    for _ in 0..100 {
        order.shuffle(&mut rng);
        roots.insert(store.put_files(order.iter().map(|(p, b)| (p.as_str(), b.as_slice()))).map_err(|e| e.to_string())?);
    }
    ensure!(roots.len() == 1, "{} distinct tree ids over 100 orders", roots.len());

    // gc keeps everything reachable from pins, over random DAGs. The test
    // tracks the DAG itself and does not ask the store what is reachable.
    let mut collected = 0;
    let mut kept = 0;
    for trial in 0..20 {
        let store = CaStore::open(dir.path().join(format!("gc{trial}"))).map_err(|e| e.to_string())?;
        let mut edges: BTreeMap<ContentId, Vec<ContentId>> = BTreeMap::new();
        let mut blobs = Vec::new();
        for b in 0..rng.gen_range(5..30) {
            let big = rng.gen_bool(0.1);
            let mut bytes = vec![0u8; if big { 300 * 1024 } else { rng.gen_range(0..200) }];
            rng.fill(&mut bytes[..]);
            bytes.extend_from_slice(format!("{trial}/{b}").as_bytes());
            let cid = store.put_blob(&bytes).map_err(|e| e.to_string())?;
            edges.insert(cid, Vec::new());
            blobs.push(cid);
        }
        let mut trees: Vec<ContentId> = Vec::new();
        for _ in 0..rng.gen_range(1..12) {
            let mut entries = Vec::new();
            let mut children = Vec::new();
            for (j, b) in blobs.iter().enumerate().filter(|_| rng.gen_bool(0.3)) {
                entries.push(TreeEntry { path: format!("b{j}"), kind: EntryKind::Blob, cid: *b, size_bytes: store.logical_size(b).unwrap() });
                children.push(*b);
            }
            for (j, t) in trees.iter().enumerate().filter(|_| rng.gen_bool(0.3)) {
                entries.push(TreeEntry { path: format!("t{j}"), kind: EntryKind::Tree, cid: *t, size_bytes: 0 });
                children.push(*t);
            }
            let cid = store.put_tree(entries).map_err(|e| e.to_string())?;
            edges.entry(cid).or_default().extend(children);
            trees.push(cid);
        }
        let mut commits: Vec<ContentId> = Vec::new();
        for c in 0..rng.gen_range(0..5) {
            let tree = *trees.choose(&mut rng).unwrap();
            let parent = commits.last().copied().filter(|_| rng.gen_bool(0.7));
            let cid = store.commit(parent, tree, Default::default(), &format!("c{c}"), c).map_err(|e| e.to_string())?;
            edges.insert(cid, parent.into_iter().chain([tree]).collect());
            commits.push(cid);
        }
        let nodes: Vec<ContentId> = edges.keys().copied().collect();
        let pins: Vec<ContentId> = nodes.iter().copied().filter(|_| rng.gen_bool(0.25)).collect();
        for p in &pins {
            store.pin(p).map_err(|e| e.to_string())?;
        }
        let mut reachable: HashSet<ContentId> = HashSet::new();
        let mut stack = pins.clone();
        while let Some(c) = stack.pop() {
            if reachable.insert(c) {
                stack.extend(edges[&c].iter().copied());
            }
        }
        let report = store.gc().map_err(|e| e.to_string())?;
        for c in &reachable {
            ensure!(!report.removed.contains(c), "trial {trial}: gc removed pinned-reachable {c}");
            ensure!(store.get(c).is_ok() || store.read_tree(c).is_ok() || store.read_commit(c).is_ok(), "trial {trial}: {c} unreadable");
        }
        for c in nodes.iter().filter(|c| !reachable.contains(c)) {
            ensure!(!store.contains(c), "trial {trial}: unreachable {c} survived gc");
        }
        collected += report.removed.len();
        kept += reachable.len();
    }
    Ok(format!(
        "sizes {sizes:?} roundtrip; 1 tree id over 100 orders; 20 random DAGs kept {kept} pin-reachable objects and collected {collected}"
    ))
}

// 6 -------------------------------------------------------------------------

const PAPER_HEADER: &str = "Name\tSucc\tFail\tSend Rate (TPS)\tMax Latency (s)\tMin Latency (s)\tAvg Latency (s)\tThroughput (TPS)";
const PAPER_ROUND0: &str = "Round0-QueryPrivateData-TxNumber-FixedRate\t2500\t0\t143.7\t0.30\t0.01\t0.02\t143.6";

fn table_rows(markdown: &str) -> Vec<String> {
    markdown
        .lines()
        .filter(|l| l.starts_with('|') && !l.contains("---"))
        .map(|l| l.trim().trim_matches('|').split('|').map(str::trim).collect::<Vec<_>>().join("\t"))
        .collect()
}

fn benchmark_harness() -> Outcome {
    let dir = TempDir::new().unwrap();
    let network = BenchNetwork {
        transport: TransportKind::Loopback,
        orgs: 4,
        host: "127.0.0.1".into(),
        base_port: 7050,
        policy: OrderingPolicy::default(),
    };
    let round = RoundSpec {
        index: 0,
        label: "QueryPrivateData".into(),
        workload: Workload::QueryState { key_pattern: metric_key_pattern(), key_count: 100 },
        termination: Termination::TxNumber { count: 2500 },
        rate: Rate::FixedRate { tps: Tps::whole(100) },
        workers: 4,
    };
    let cfg = BenchConfig::new(network, &dir.path().display().to_string(), 100, vec![round]);
    let report = run_bench(&cfg).map_err(|e| e.to_string())?;
    let m = report.rounds.first().ok_or("no round metrics")?;
    ensure!(m.name == "Round0-QueryPrivateData-TxNumber-FixedRate", "round name {}", m.name);
    ensure!(m.succ + m.fail == 2500, "succ {} + fail {} != 2500", m.succ, m.fail);
    ensure!((m.send_rate_tps - 100.0).abs() <= 5.0, "send rate {:.2} TPS", m.send_rate_tps);
    ensure!(m.min_latency_s <= m.avg_latency_s && m.avg_latency_s <= m.max_latency_s, "latency order {m:?}");
    ensure!(m.throughput_tps <= m.send_rate_tps * 1.01, "throughput {:.2} above send rate {:.2}", m.throughput_tps, m.send_rate_tps);

    let markdown = String::from_utf8(render_report(&report.rounds, &report.resources, ReportFormat::Markdown)).unwrap();
    ensure!(markdown.lines().next() == Some("### Summary of performance metrics"), "report heading");
    let rows = table_rows(&markdown);
    ensure!(rows.first().map(String::as_str) == Some(PAPER_HEADER), "header {:?}", rows.first());
    ensure!(PERF_COLUMNS.join("\t") == PAPER_HEADER, "column constants drifted");

    let paper = RoundMetrics {
        name: "Round0-QueryPrivateData-TxNumber-FixedRate".into(),
        succ: 2500,
        fail: 0,
        send_rate_tps: 143.7,
        max_latency_s: 0.30,
        min_latency_s: 0.01,
        avg_latency_s: 0.02,
        throughput_tps: 143.6,
        partial: false,
    };
    let rendered = String::from_utf8(render_report(&[paper], &[], ReportFormat::Markdown)).unwrap();
    let rows = table_rows(&rendered);
    ensure!(rows.get(1).map(String::as_str) == Some(PAPER_ROUND0), "Round0 row {:?}", rows.get(1));
    Ok(format!(
        "{} succ / {} fail, send {:.1} TPS, throughput {:.1} TPS, latency {:.3}/{:.3}/{:.3} s; header and Round0 row match",
        m.succ, m.fail, m.send_rate_tps, m.throughput_tps, m.min_latency_s, m.avg_latency_s, m.max_latency_s
    ))
}

// 7 -------------------------------------------------------------------------

fn passing_pipeline() -> PipelineConfig {
    PipelineConfig {
        stages: vec![
            StageSpec {
                stage: Stage::Review,
                checks: vec![CheckRule { rule: RuleKind::ForbiddenPattern { pattern: "DO NOT SHIP".into() }, description: "release blockers".into() }],
            },
            StageSpec {
                stage: Stage::Unit,
                checks: vec![CheckRule { rule: RuleKind::RequiredPath { path: "tests".into() }, description: "has tests".into() }],
            },
            StageSpec {
                stage: Stage::Integration,
                checks: vec![CheckRule { rule: RuleKind::MaxFileBytes { limit: 1 << 20 }, description: "no huge files".into() }],
            },
        ],
        package: PackageSpec { name: "svc".into(), version_template: "2.0.<head_seq>".into(), include_paths: vec!["src".into(), "tests".into()] },
        deploy_target: "prod".into(),
    }
}

/// Snapshots `files` into `store`, uploads them, and records the head.
fn push_repo(store: &CaStore, chain: &NodeClient, dev: &Actor, project: &str, files: &[(&str, &[u8])]) -> Result<RepoHead, String> {
    let tree = store.put_files(files.iter().copied()).map_err(|e| e.to_string())?;
    let commit = store.commit(None, tree, dev.id(), "work", unix_ms()).map_err(|e| e.to_string())?;
    chain.push_closure(store, &commit).map_err(|e| e.to_string())?;
    let loc = dev.ok(chain, project, Call::record_repo_head(&commit));
    let seq = loc.output["head_seq"].as_u64().ok_or("no head_seq")?;
    query_typed(chain, &keys::head(project, seq)).map_err(|e| e.to_string())?.ok_or_else(|| "head missing".to_string())
}

fn end_to_end_lifecycle() -> Outcome {
    let dir = TempDir::new().unwrap();
    let owner = Actor::new(Role::Manager, "org1");
    let client = Actor::new(Role::Client, "org2");
    let dev = Actor::new(Role::Developer, "org1");
    let ci = Actor::new(Role::Developer, "org3");
    let tester = Actor::new(Role::Tester, "org4");
    let (net, _) = DemoNetwork::loopback(4, dir.path().join("net").as_path(), |cfg| {
        cfg.policy = OrderingPolicy { max_batch_wait_ms: 20, ..OrderingPolicy::default() };
        let g = support::genesis(&[&owner, &client, &dev, &ci, &tester], 500_000, 1);
        cfg.identities = g.identities;
        cfg.allocations = g.allocations;
    })
    .map_err(|e| e.to_string())?;
    let chain = net.client(1);
    let p = "e2e";

    let terms = chain.castore_put(br#"{"Project Budget": "$900", "Payment After 1 Iteration": "$300"}"#).map_err(|e| e.to_string())?;
    owner.ok(&chain, p, Call::create_project("E2E", &terms, &Agreement::new(90_000, 30_000, PaymentTrigger::PerIteration)));
    for m in [&client, &dev, &ci, &tester] {
        owner.ok(&chain, p, Call::add_member(&m.identity));
    }
    owner.ok(&chain, p, Call::accept_terms(Side::Team));
    client.ok(&chain, p, Call::accept_terms(Side::Client));
    let notes = chain.castore_put(b"sprint 1 planning notes").map_err(|e| e.to_string())?;
    dev.ok(&chain, p, Call::record_plan(&notes, PlanKind::Notes));

    let dev_store = CaStore::open(dir.path().join("dev")).map_err(|e| e.to_string())?;
    let config = passing_pipeline().to_canonical();
    let files: [(&str, &[u8]); 4] =
        [("devchain.pipeline", &config), ("src/lib.rs", b"pub fn add(a: u8, b: u8) -> u8 { a + b }\n"), ("tests/add.rs", b"#[test] fn t() {}\n"), ("README", b"svc\n")];
    let head = push_repo(&dev_store, &chain, &dev, p, &files)?;

    let ci_store = CaStore::open(dir.path().join("ci")).map_err(|e| e.to_string())?;
    chain.fetch_closure(&ci_store, &head.commit_cid).map_err(|e| e.to_string())?;
    let commit = ci_store.read_commit(&head.commit_cid).map_err(|e| e.to_string())?;
    let pipeline = PipelineConfig::from_tree(&ci_store, &commit.tree_cid)?;
    let nonces = NonceSource::from_clock();
    let ctx = CiContext { store: &ci_store, chain: &chain, signer: &ci.key, nonces: &nonces, clock: &SystemClock, retry: RetryPolicy::default() };
    let run = run_pipeline(&ctx, p, &head, &pipeline).map_err(|e| e.to_string())?;
    ensure!(run.passed(), "pipeline failed: {:?}", run.stages);
    let package_cid = run.package_cid.ok_or("no package")?;
    chain.push_closure(&ci_store, &package_cid).map_err(|e| e.to_string())?;
    let version = run.submission.version.clone();

    tester.ok(&chain, p, Call::attest_gate("svc", &version, true, true, true));

    let ops_store = CaStore::open(dir.path().join("ops")).map_err(|e| e.to_string())?;
    chain.fetch_closure(&ops_store, &package_cid).map_err(|e| e.to_string())?;
    let ops_ctx = CiContext { store: &ops_store, ..ctx };
    let target = dir.path().join("prod");
    let deployed = execute_deploy(&ops_ctx, p, "svc", &version, &target).map_err(|e| e.to_string())?;
    let placed = fs::read(&deployed.path).map_err(|e| e.to_string())?;
    let built = ci_store.get(&package_cid).map_err(|e| e.to_string())?;
    ensure!(placed == built, "deployed package differs from the CI package");

    client.ok(&chain, p, Call::pay_installment());

    // One on-chain record per phase artifact.
    let count = |prefix: String| chain.query_prefix(&prefix).map(|v| v.len()).unwrap_or(usize::MAX);
    let records = [
        ("plans", count(keys::plan_prefix(p))),
        ("heads", count(keys::head_prefix(p))),
        ("builds", count(keys::build_prefix(p))),
        ("payments", count(keys::payment_prefix(p))),
    ];
    ensure!(records.iter().all(|(_, n)| *n == 1), "record counts {records:?}");
    let build: BuildRecord = query_typed(&chain, &keys::build(p, "svc", &version)).unwrap().unwrap();
    ensure!(build.status == BuildStatus::Deployed && build.gate.is_some(), "build ended {:?}", build.status);

    let trail = audit_trail(&chain, p).map_err(|e| e.to_string())?;
    let ops: Vec<String> = trail.iter().map(|e| format!("{}:{}", e.phase, e.operation)).collect();
    let expected = [
        "Initiation:create_project",
        "Initiation:add_member",
        "Initiation:add_member",
        "Initiation:add_member",
        "Initiation:add_member",
        "Initiation:accept_terms",
        "Initiation:accept_terms",
        "Development:record_plan",
        "Development:record_repo_head",
        "CI/CD:record_build",
        "Deployment:attest_gate",
        "Deployment:deploy",
        "Payments:pay_installment",
    ];
    ensure!(ops == expected, "trail {ops:?}");
    ensure!(trail.windows(2).all(|w| (w[0].height, w[0].index) < (w[1].height, w[1].index)), "trail out of order");

    // Another synced peer reconstructs the same trail.
    ensure!(net.wait_synced(Duration::from_secs(10)), "peers did not sync");
    let other = audit_trail(&net.client(3), p).map_err(|e| e.to_string())?;
    ensure!(other == trail, "peers disagree on the trail");
    Ok(format!("{} phase records in order; package {} deployed byte-identical ({} bytes)", trail.len(), package_cid, placed.len()))
}

// 8 -------------------------------------------------------------------------

fn ci_failure_path() -> Outcome {
    let dir = TempDir::new().unwrap();
    let owner = Actor::new(Role::Manager, "org1");
    let client = Actor::new(Role::Client, "org2");
    let dev = Actor::new(Role::Developer, "org1");
    let (net, _) = DemoNetwork::loopback(4, dir.path().join("net").as_path(), |cfg| {
        cfg.policy = OrderingPolicy { max_batch_wait_ms: 20, ..OrderingPolicy::default() };
        let g = support::genesis(&[&owner, &client, &dev], 0, 1);
        cfg.identities = g.identities;
    })
    .map_err(|e| e.to_string())?;
    let chain = net.client(0);
    let p = "cifail";
    active_project(&chain, p, &owner, &client, &[&dev], &Agreement::new(10_000, 1_000, PaymentTrigger::PerIteration));

    let store = CaStore::open(dir.path().join("dev")).map_err(|e| e.to_string())?;
    let config = passing_pipeline().to_canonical();
    let files: [(&str, &[u8]); 3] = [("devchain.pipeline", &config), ("src/lib.rs", b"// DO NOT SHIP\n"), ("tests/t.rs", b"")];
    let head = push_repo(&store, &chain, &dev, p, &files)?;

    // Subscribe as a developer before the run; check state at the moment the
    // alert arrives.
    let from = chain.head_height().map_err(|e| e.to_string())? + 1;
    let mut stream = net.client(2).subscribe_events(from, Some(Audience::Developers)).map_err(|e| e.to_string())?;
    let observer = net.client(2);
    let watcher = thread::spawn(move || -> Result<(u64, BuildStatus, u64), String> {
        let deadline = Instant::now() + Duration::from_secs(20);
        while Instant::now() < deadline {
            let Some(ev) = stream.next_timeout(Duration::from_secs(1)).map_err(|e| e.to_string())? else { continue };
            if ev.event_name != "Alert" || ev.project_id != "cifail" {
                continue;
            }
            let seen_height = observer.head_height().map_err(|e| e.to_string())?;
            let record: BuildRecord = query_typed(&observer, &keys::build("cifail", "svc", "2.0.1"))
                .map_err(|e| e.to_string())?
                .ok_or("alert delivered before its build record was committed")?;
            return Ok((ev.block_height, record.status, seen_height));
        }
        Err("no Alert event within 20 s".into())
    });

    let nonces = NonceSource::from_clock();
    let ctx = CiContext { store: &store, chain: &chain, signer: &dev.key, nonces: &nonces, clock: &SystemClock, retry: RetryPolicy::default() };
    let pipeline = PipelineConfig::from_tree(&store, &store.read_commit(&head.commit_cid).unwrap().tree_cid)?;
    let run = run_pipeline(&ctx, p, &head, &pipeline).map_err(|e| e.to_string())?;
    ensure!(!run.passed() && run.package_cid.is_none(), "pipeline passed");
    let (alert_height, status, seen_height) = watcher.join().unwrap()?;
    ensure!(status == BuildStatus::Failed, "record status {status:?}");
    ensure!(alert_height == run.height, "alert in block {alert_height}, build recorded in {}", run.height);
    ensure!(seen_height >= alert_height, "alert arrived while the peer was at height {seen_height}");

    // A client-audience subscriber never sees the developer alert.
    let mut client_stream = net.client(1).subscribe_events(from, Some(Audience::Parties)).map_err(|e| e.to_string())?;
    while let Some(ev) = client_stream.next_timeout(Duration::from_millis(500)).map_err(|e| e.to_string())? {
        ensure!(ev.event_name != "Alert", "Alert leaked to a Parties subscriber");
    }
    Ok(format!("Failed record in block {}; Alert delivered to the Developer subscriber after commit", run.height))
}
