use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use super::{
    AuditCmd, BuildCmd, Cli, CliError, Command, GateCmd, Global, MonitorCmd, NetworkCmd, Output, PlanCmd, PlanKindArg, ProjectCmd,
    RepoCmd, ServeRole, TransportArg, WalletCmd,
};
use crate::bench::{render_report, run_bench, BenchConfig, ReportFormat};
use crate::canonical::{from_doc, parse_doc, to_canonical_bytes};
use crate::castore::{CaStore, ContentId};
use crate::client::{query_typed, submit_and_wait, ChainAccess, NonceSource, RetryPolicy, SystemClock};
use crate::consensus::TxLocation;
use crate::contracts::{keys, parse_dollars, Agreement, BuildRecord, Call, PaymentTrigger, PlanKind, Project, RepoHead, Severity, Side, TokenBalance};
use crate::ledger::{generate_identity, Identity, KeyFile, MemberId, PublicKey, Role, SecretKey};
use crate::node::config::read_secret;
use crate::node::demo::transport_for;
use crate::node::{
    audit_block_log, audit_trail, verify_remote_chain, DemoNetwork, NetworkConfig, NodeClient, OrdererNode, OrdererOptions, PeerNode,
    PeerOptions, TransportKind,
};
use crate::pipeline::{execute_deploy, run_pipeline, CiContext, PipelineConfig};

pub(super) fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<Output, CliError> {
    let s = Session { g: &cli.global };
    match &cli.command {
        Command::Keygen { role, org, out } => keygen(role, org, out),
        Command::Register => {
            let (identity, key) = s.key()?;
            let loc = s.commit(&key, "", Call::register(&identity))?;
            Ok(tx_output(format!("registered {}", identity.member_id), &loc))
        }
        Command::Network(NetworkCmd::Init {
            orgs,
            transport,
            host,
            base_port,
            data_dir,
            identities,
            fund,
            time_scale_divisor,
            batch_wait_ms,
            heartbeat_ms,
            out,
        }) => {
            let mut key = SecretKey::generate();
            let mut cfg = match transport {
                TransportArg::Tcp => NetworkConfig::tcp(*orgs, host, *base_port, &key, data_dir),
                TransportArg::Loopback => NetworkConfig::loopback(*orgs, &key, data_dir),
            };
            cfg.time_scale_divisor = *time_scale_divisor;
            if let Some(ms) = batch_wait_ms {
                cfg.policy.max_batch_wait_ms = *ms;
            }
            if heartbeat_ms.is_some() {
                cfg.policy.heartbeat_ms = *heartbeat_ms;
            }
            for path in identities {
                let id = read_identity(path)?;
                if *fund > 0 {
                    cfg.allocations.insert(id.member_id, *fund);
                }
                cfg.identities.push(id);
            }
            cfg.validate().map_err(|e| CliError::new("BadConfig", e))?;
            let key_path = cfg.orderer_key_path();
            if key_path.exists() {
                // Keep an existing orderer identity; the chain on disk is signed by it.
                key = read_secret(&key_path).map_err(|e| CliError::new("BadConfig", e))?;
                cfg.orderer_public_key = key.public_key();
            } else {
                write_private(&key_path, key.to_hex().as_bytes())?;
            }
            write_file(out, &cfg.to_canonical())?;
            Ok(Output::ok(
                format!("wrote {} ({} orgs, orderer key {})", out.display(), cfg.orgs.len(), key_path.display()),
                json!({ "config": out, "orderer_key_path": key_path, "orderer_public_key": cfg.orderer_public_key }),
            ))
        }
        Command::Serve { role, org, config } => serve(&s, *role, org.as_deref(), config.as_deref(), out),
        Command::Project(cmd) => project(&s, cmd),
        Command::Plan(PlanCmd::Record { project, file, kind }) => {
            let (_, key) = s.key()?;
            let client = s.client()?;
            let bytes = read_file(file)?;
            let cid = client.castore_put(&bytes)?;
            client.castore_pin(&cid)?;
            let kind = match kind {
                PlanKindArg::Recording => PlanKind::Recording,
                PlanKindArg::Notes => PlanKind::Notes,
            };
            let loc = s.commit_with(&client, &key, project, Call::record_plan(&cid, kind))?;
            let mut o = tx_output(format!("plan artifact {cid} recorded"), &loc);
            o.json["artifact_cid"] = json!(cid);
            Ok(o)
        }
        Command::Repo(cmd) => repo(&s, cmd),
        Command::Build(BuildCmd::Run { project, config, head_seq }) => build(&s, project, config.as_deref(), *head_seq),
        Command::Gate(GateCmd::Attest { project, name, version, quality, security, compliance }) => {
            let (_, key) = s.key()?;
            let loc = s.commit(&key, project, Call::attest_gate(name, version, *quality, *security, *compliance))?;
            let status = loc.output.get("status").cloned().unwrap_or(Value::Null);
            Ok(tx_output(format!("{name}@{version} gate recorded, status {}", status.as_str().unwrap_or("?")), &loc))
        }
        Command::Deploy { project, name, version, target } => {
            let (_, key) = s.key()?;
            let client = s.client()?;
            let store = s.store()?;
            let record: BuildRecord = query_typed(&client, &keys::build(project, name, version))?
                .ok_or_else(|| CliError::new("BuildNotFound", format!("{name}@{version}")))?;
            if let Some(cid) = record.package_cid {
                client.fetch_closure(&store, &cid)?;
            }
            let nonces = NonceSource::from_clock();
            let ctx = ci_context(&store, &client, &key, &nonces);
            let d = execute_deploy(&ctx, project, name, version, target)?;
            Ok(Output::ok(
                format!("deployed {} (package {}, block {})", d.path.display(), d.package_cid, d.height),
                json!({ "path": d.path, "package_cid": d.package_cid, "height": d.height, "iteration": d.iteration }),
            ))
        }
        Command::Monitor(MonitorCmd::Metric { project, name, value }) => {
            let (_, key) = s.key()?;
            let (scaled, scale) = parse_scaled(value)?;
            let loc = s.commit(&key, project, Call::record_metric(name, scaled, scale))?;
            Ok(tx_output(format!("metric {name}={value} recorded"), &loc))
        }
        Command::Monitor(MonitorCmd::Alert { project, severity, description }) => {
            let (_, key) = s.key()?;
            let severity: Severity = severity.parse().map_err(CliError::bad_input)?;
            let loc = s.commit(&key, project, Call::raise_alert(severity, description))?;
            Ok(tx_output("alert raised".to_string(), &loc))
        }
        Command::Pay { project } => {
            let (_, key) = s.key()?;
            let loc = s.commit(&key, project, Call::pay_installment())?;
            Ok(tx_output(format!("installment paid in block {}", loc.height), &loc))
        }
        Command::Wallet(WalletCmd::Balance { member }) => {
            let member: MemberId = match member {
                Some(m) => m.parse().map_err(|_| CliError::bad_input(format!("bad member id {m:?}")))?,
                None => s.key()?.0.member_id,
            };
            let client = s.client()?;
            let cents = query_typed::<TokenBalance>(&client, &keys::token(&member))?.map_or(0, |b| b.cents);
            Ok(Output::ok(
                format!("{member}: ${}.{:02}", cents / 100, cents % 100),
                json!({ "member_id": member, "cents": cents }),
            ))
        }
        Command::Audit(cmd) => audit(&s, cmd),
        Command::Bench { config, out } => {
            let cfg = BenchConfig::from_bytes(&read_file(config)?).map_err(|e| CliError::new("BadConfig", e))?;
            let report = run_bench(&cfg)?;
            let format = if out.extension().is_some_and(|e| e == "json") { ReportFormat::Json } else { ReportFormat::Markdown };
            write_file(out, &render_report(&report.rounds, &report.resources, format))?;
            let markdown = render_report(&report.rounds, &[], ReportFormat::Markdown);
            Ok(Output::ok(
                format!("{}\nreport written to {}", String::from_utf8_lossy(&markdown).trim_end(), out.display()),
                serde_json::to_value(&report).map_err(|e| CliError::new("Internal", e.to_string()))?,
            ))
        }
    }
}

struct Session<'a> {
    g: &'a Global,
}

impl Session<'_> {
    fn network(&self) -> Result<NetworkConfig, CliError> {
        NetworkConfig::load(&self.g.network).map_err(|e| CliError::new("BadConfig", e))
    }

    fn key(&self) -> Result<(Identity, SecretKey), CliError> {
        let path = self.g.key.as_ref().ok_or_else(|| CliError::bad_input("this command needs --key <key file>"))?;
        let kf: KeyFile = read_doc(path)?;
        let secret = kf.secret().map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))?;
        if secret.public_key() != kf.identity.public_key {
            return Err(CliError::bad_input(format!("{}: secret key does not match identity", path.display())));
        }
        Ok((kf.identity, secret))
    }

    fn client(&self) -> Result<NodeClient, CliError> {
        let cfg = self.network()?;
        if cfg.transport == TransportKind::Loopback {
            return Err(CliError::new("BadConfig", "loopback networks are reachable only from inside their process"));
        }
        let org = match &self.g.peer {
            Some(name) => cfg.org(name).ok_or_else(|| CliError::bad_input(format!("no org named {name}")))?,
            None => cfg.orgs.first().ok_or_else(|| CliError::new("BadConfig", "network has no orgs"))?,
        };
        Ok(NodeClient::new(transport_for(cfg.transport), &org.peer_endpoint))
    }

    fn store(&self) -> Result<CaStore, CliError> {
        Ok(CaStore::open(&self.g.store)?)
    }

    fn commit(&self, key: &SecretKey, project: &str, call: Call) -> Result<TxLocation, CliError> {
        self.commit_with(&self.client()?, key, project, call)
    }

    fn commit_with(&self, client: &NodeClient, key: &SecretKey, project: &str, call: Call) -> Result<TxLocation, CliError> {
        let tx = call.sign(project, key, now_ms(), NonceSource::from_clock().next());
        let loc = submit_and_wait(client, &tx, RetryPolicy::default())?;
        if !loc.valid {
            return Err(CliError::from_invalid(loc.error.as_deref().unwrap_or("Invalid")));
        }
        Ok(loc)
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn tx_output(human: String, loc: &TxLocation) -> Output {
    Output::ok(human, json!({ "height": loc.height, "index": loc.index, "output": loc.output }))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))
}

fn read_doc<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = read_file(path)?;
    let doc = parse_doc(&bytes).map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))?;
    from_doc(&doc).map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))
}

/// Accepts a bare identity document or a key file.
fn read_identity(path: &Path) -> Result<Identity, CliError> {
    read_doc::<KeyFile>(path).map(|k| k.identity).or_else(|_| read_doc::<Identity>(path))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes).map_err(|e| CliError::new("Io", format!("{}: {e}", path.display())))
}

/// Writes a secret, readable by the owner only where the platform allows.
fn write_private(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(path).map_err(|e| CliError::new("Io", format!("{}: {e}", path.display())))?;
    f.write_all(bytes)?;
    Ok(())
}

fn keygen(role: &str, org: &str, out: &Path) -> Result<Output, CliError> {
    let role: Role = role.parse().map_err(CliError::bad_input)?;
    if org.is_empty() {
        return Err(CliError::bad_input("org must not be empty"));
    }
    let (identity, secret) = generate_identity(role, org);
    let bytes = to_canonical_bytes(&KeyFile::new(&identity, &secret)).map_err(|e| CliError::new("Internal", e.to_string()))?;
    write_private(out, &bytes)?;
    Ok(Output::ok(
        format!("{} {} {} -> {}", identity.member_id, identity.role.as_str(), identity.org, out.display()),
        json!({ "identity": identity, "key_file": out }),
    ))
}

/// `12.5` -> (125, 1).
fn parse_scaled(value: &str) -> Result<(i64, u32), CliError> {
    let bad = || CliError::bad_input(format!("bad metric value {value:?}"));
    let (neg, digits) = value.strip_prefix('-').map_or((false, value), |v| (true, v));
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() || !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) || frac.len() > 18 {
        return Err(bad());
    }
    let n: i64 = format!("{int}{frac}").parse().map_err(|_| bad())?;
    Ok((if neg { -n } else { n }, frac.len() as u32))
}

fn serve(s: &Session<'_>, role: ServeRole, org: Option<&str>, config: Option<&Path>, out: &mut dyn Write) -> Result<Output, CliError> {
    let cfg = match config {
        Some(path) => NetworkConfig::load(path).map_err(|e| CliError::new("BadConfig", e))?,
        None => s.network()?,
    };
    cfg.validate().map_err(|e| CliError::new("BadConfig", e))?;
    let transport = transport_for(cfg.transport);
    let orderer_key = || read_secret(&cfg.orderer_key_path()).map_err(|e| CliError::new("BadConfig", e));
    // Each arm keeps its node alive in `_running` while this thread parks.
    let (_running, banner): (Box<dyn std::any::Any>, String) = match role {
        ServeRole::Orderer => {
            let node = OrdererNode::start(OrdererOptions {
                data_dir: cfg.orderer_dir(),
                endpoint: cfg.orderer_endpoint.clone(),
                key: orderer_key()?,
                policy: cfg.policy.clone(),
                genesis: cfg.genesis_spec(),
                transport,
                clock: Arc::new(SystemClock),
            })?;
            let banner = format!("orderer serving on {} at height {}", node.endpoint(), node.len());
            (Box::new(node), banner)
        }
        ServeRole::Peer => {
            let name = org.or(s.g.peer.as_deref()).ok_or_else(|| CliError::bad_input("serve --role peer needs --org"))?;
            let org = cfg.org(name).ok_or_else(|| CliError::bad_input(format!("no org named {name}")))?.clone();
            let node = PeerNode::start(PeerOptions {
                org: org.name.clone(),
                data_dir: cfg.peer_dir(&org.name),
                endpoint: org.peer_endpoint,
                orderer_endpoint: cfg.orderer_endpoint.clone(),
                orderer_key: cfg.orderer_public_key,
                transport,
            })?;
            let banner = format!("{} serving on {} at height {}", node.name(), node.endpoint(), node.len());
            (Box::new(node), banner)
        }
        ServeRole::All => {
            let key = orderer_key()?;
            let net = DemoNetwork::start(cfg, key)?;
            let banner = std::iter::once(format!("orderer serving on {}", net.config().orderer_endpoint))
                .chain(net.running_peers().map(|p| format!("{} serving on {}", p.name(), p.endpoint())))
                .collect::<Vec<_>>()
                .join("\n");
            (Box::new(net), banner)
        }
    };
    let _ = writeln!(out, "{banner}");
    let _ = out.flush();
    loop {
        std::thread::park();
    }
}

fn project(s: &Session<'_>, cmd: &ProjectCmd) -> Result<Output, CliError> {
    match cmd {
        ProjectCmd::Create { project, name, terms_file, budget, installment, trigger } => {
            let (_, key) = s.key()?;
            let client = s.client()?;
            let terms = read_file(terms_file)?;
            let text = String::from_utf8_lossy(&terms);
            let dollars = |v: &Option<String>| v.as_deref().map(parse_dollars).transpose().map_err(CliError::bad_input);
            let trigger: Option<PaymentTrigger> = trigger.as_deref().map(str::parse).transpose().map_err(CliError::bad_input)?;
            let mut agreement = match (Agreement::from_terms_json(&text), dollars(budget)?, dollars(installment)?, trigger) {
                (Ok(a), ..) => a,
                (Err(_), Some(b), Some(i), Some(t)) => Agreement::new(b, i, t),
                (Err(e), ..) => {
                    return Err(CliError::bad_input(format!("{}: {e} (or pass --budget, --installment and --trigger)", terms_file.display())))
                }
            };
            if let Some(b) = dollars(budget)? {
                agreement.project_budget_cents = b;
            }
            if let Some(i) = dollars(installment)? {
                agreement.installment_cents = i;
            }
            if let Some(t) = trigger {
                agreement.trigger = t;
            }
            agreement.validate().map_err(|e| CliError::new("InvalidAgreement", e))?;
            let terms_cid = client.castore_put(&terms)?;
            client.castore_pin(&terms_cid)?;
            let loc = s.commit_with(&client, &key, project, Call::create_project(name, &terms_cid, &agreement))?;
            let mut o = tx_output(format!("project {project} created (Draft), terms {terms_cid}"), &loc);
            o.json["terms_cid"] = json!(terms_cid);
            o.json["agreement"] = json!(agreement);
            Ok(o)
        }
        ProjectCmd::AddMember { project, identity } => {
            let (_, key) = s.key()?;
            let member = read_identity(identity)?;
            let loc = s.commit(&key, project, Call::add_member(&member))?;
            Ok(tx_output(format!("added {} ({}) to {project}", member.member_id, member.role.as_str()), &loc))
        }
        ProjectCmd::AcceptTerms { project, side } => {
            let (_, key) = s.key()?;
            let side: Side = side.parse().map_err(CliError::bad_input)?;
            let loc = s.commit(&key, project, Call::accept_terms(side))?;
            let status = loc.output.get("status").and_then(Value::as_str).unwrap_or("?").to_string();
            Ok(tx_output(format!("{side} accepted; project is {status}"), &loc))
        }
        ProjectCmd::Show { project } => {
            let client = s.client()?;
            let p: Project = query_typed(&client, &keys::project(project))?
                .ok_or_else(|| CliError::new("ProjectNotFound", project.clone()))?;
            let agreement: Option<Agreement> = query_typed(&client, &keys::agreement(project))?;
            Ok(Output::ok(
                format!("{} {:?} owner {} paid {} cents", p.project_id, p.status, p.owner, p.paid_cents),
                json!({ "project": p, "agreement": agreement }),
            ))
        }
    }
}

fn repo(s: &Session<'_>, cmd: &RepoCmd) -> Result<Output, CliError> {
    match cmd {
        RepoCmd::Snapshot { dir, message, parent } => {
            let (identity, _) = s.key()?;
            let store = s.store()?;
            let parent = parent.as_deref().map(parse_cid).transpose()?;
            let tree = store.snapshot_dir(dir)?;
            let commit = store.commit(parent, tree, identity.member_id, message, now_ms())?;
            Ok(Output::ok(format!("{commit}"), json!({ "commit_cid": commit, "tree_cid": tree })))
        }
        RepoCmd::Push { project, commit } => {
            let (_, key) = s.key()?;
            let client = s.client()?;
            let store = s.store()?;
            let cid = parse_cid(commit)?;
            let uploaded = client.push_closure(&store, &cid)?;
            client.castore_pin(&cid)?;
            let loc = s.commit_with(&client, &key, project, Call::record_repo_head(&cid))?;
            let seq = loc.output.get("head_seq").and_then(Value::as_u64).unwrap_or(0);
            let mut o = tx_output(format!("head {seq} of {project} is {cid} ({uploaded} objects uploaded)"), &loc);
            o.json["uploaded"] = json!(uploaded);
            Ok(o)
        }
    }
}

fn parse_cid(s: &str) -> Result<ContentId, CliError> {
    ContentId::parse(s).map_err(|_| CliError::new("MalformedCid", format!("{s:?} is not a content id")))
}

fn ci_context<'a>(store: &'a CaStore, chain: &'a dyn ChainAccess, key: &'a SecretKey, nonces: &'a NonceSource) -> CiContext<'a> {
    CiContext { store, chain, signer: key, nonces, clock: &SystemClock, retry: RetryPolicy::default() }
}

fn build(s: &Session<'_>, project: &str, config: Option<&Path>, head_seq: Option<u64>) -> Result<Output, CliError> {
    let (_, key) = s.key()?;
    let client = s.client()?;
    let store = s.store()?;
    let seq = match head_seq {
        Some(n) => n,
        None => {
            let p: Project = query_typed(&client, &keys::project(project))?
                .ok_or_else(|| CliError::new("ProjectNotFound", project.to_string()))?;
            p.head_seq
        }
    };
    let head: RepoHead = query_typed(&client, &keys::head(project, seq))?
        .ok_or_else(|| CliError::new("NotFound", format!("{project} has no repository head {seq}")))?;
    client.fetch_closure(&store, &head.commit_cid)?;
    let pipeline = match config {
        Some(path) => PipelineConfig::load(path),
        None => {
            let commit = store.read_commit(&head.commit_cid)?;
            PipelineConfig::from_tree(&store, &commit.tree_cid)
        }
    }
    .map_err(|e| CliError::new("BadConfig", e))?;

    let nonces = NonceSource::from_clock();
    let run = run_pipeline(&ci_context(&store, &client, &key, &nonces), project, &head, &pipeline)?;
    if let Some(pkg) = run.package_cid {
        client.push_closure(&store, &pkg)?;
        client.castore_pin(&pkg)?;
    }
    let b = &run.submission;
    let mut human = format!("{}@{} {} {} from head {}\n", b.name, b.version, b.date, b.time, run.head_seq);
    for st in &run.stages {
        human.push_str(&format!("  {:?}: {:?}\n", st.stage, st.verdict));
        for f in &st.failures {
            match &f.path {
                Some(path) => human.push_str(&format!("    {} ({path})\n", f.rule)),
                None => human.push_str(&format!("    {}\n", f.rule)),
            }
        }
    }
    match run.package_cid {
        Some(cid) => human.push_str(&format!("package {cid}, recorded in block {}", run.height)),
        None => human.push_str(&format!("no package; failure recorded in block {}", run.height)),
    }
    let failure = (!run.passed()).then(|| CliError::new("BuildFailed", format!("{}@{} failed its checks", b.name, b.version)));
    let json = serde_json::to_value(&run).map_err(|e| CliError::new("Internal", e.to_string()))?;
    Ok(Output { human, json, failure })
}

fn audit(s: &Session<'_>, cmd: &AuditCmd) -> Result<Output, CliError> {
    match cmd {
        AuditCmd::VerifyChain { data_dir, orderer_key } => {
            let key: PublicKey = match orderer_key {
                Some(hex) => hex.parse().map_err(|_| CliError::bad_input("bad --orderer-key"))?,
                None => s.network()?.orderer_public_key,
            };
            let (report, source) = match data_dir {
                Some(dir) => {
                    let blocks = block_dir(dir);
                    let report = audit_block_log(&blocks, &key).map_err(|e| CliError::new("Io", format!("{}: {e}", blocks.display())))?;
                    (report, blocks.display().to_string())
                }
                None => {
                    let client = s.client()?;
                    (verify_remote_chain(&client, &key)?, client.endpoint().to_string())
                }
            };
            let mut human = format!("{}: {} blocks checked, {} violations", source, report.blocks_checked, report.violations.len());
            for v in &report.violations {
                human.push_str(&format!("\n  height {}: {}", v.height, v.kind.code()));
            }
            let failure = report
                .first_violation()
                .map(|v| CliError::new("ChainViolation", format!("first violation at height {}: {}", v.height, v.kind.code())));
            let violations: Vec<Value> = report.violations.iter().map(|v| json!({ "height": v.height, "kind": v.kind.code() })).collect();
            Ok(Output {
                human,
                json: json!({ "source": source, "blocks_checked": report.blocks_checked, "violations": violations }),
                failure,
            })
        }
        AuditCmd::Trail { project } => {
            let client = s.client()?;
            let trail = audit_trail(&client, project)?;
            let human = trail
                .iter()
                .map(|e| format!("{:>6}.{:<3} {:<12} {}.{} by {}", e.height, e.index, e.phase, e.contract, e.operation, e.submitter))
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Output::ok(
                if human.is_empty() { format!("no phase transactions for {project}") } else { human },
                serde_json::to_value(&trail).map_err(|e| CliError::new("Internal", e.to_string()))?,
            ))
        }
    }
}

/// A node data directory holds its log under `blocks/`; the log directory
/// itself is accepted too.
fn block_dir(dir: &Path) -> PathBuf {
    if dir.join("blocks.log").exists() {
        dir.to_path_buf()
    } else {
        dir.join("blocks")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_metric_values() {
        assert_eq!(parse_scaled("12.5").unwrap(), (125, 1));
        assert_eq!(parse_scaled("-0.031").unwrap(), (-31, 3));
        assert_eq!(parse_scaled("7").unwrap(), (7, 0));
        assert!(parse_scaled("1e3").is_err());
        assert!(parse_scaled(".5").is_err());
    }
}
