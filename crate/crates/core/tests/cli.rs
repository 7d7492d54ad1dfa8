//! Drives the operator CLI against a TCP network running in this process.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use devchain::castore::{CaStore, ContentId};
use devchain::cli::{exit, run_with};
use devchain::ledger::{KeyFile, SecretKey};
use devchain::node::{DemoNetwork, NetworkConfig};
use devchain::pipeline::{CheckRule, PackageSpec, PipelineConfig, RuleKind, Stage, StageSpec, CONFIG_FILE};
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Run {
    fn json(&self) -> Value {
        serde_json::from_str(self.stdout.trim()).unwrap_or_else(|e| panic!("{e}: {}", self.stdout))
    }
}

fn cli(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(std::iter::once("devchain").chain(args.iter().copied()), &mut out, &mut err);
    Run { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

/// A network with ephemeral ports whose effective config is written to disk.
struct Harness {
    dir: TempDir,
    net: Option<DemoNetwork>,
    network_file: String,
}

impl Harness {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    /// Runs a command as the holder of `key` with its own object store.
    fn as_(&self, key: &str, args: &[&str]) -> Run {
        let (k, s) = (self.p(&format!("{key}.key")), self.p(&format!("store-{key}")));
        let mut full = vec!["--network", &self.network_file, "--key", &k, "--store", &s];
        full.extend_from_slice(args);
        cli(&full)
    }

    fn json_as(&self, key: &str, args: &[&str]) -> Value {
        let mut full = vec!["--json"];
        full.extend_from_slice(args);
        let r = self.as_(key, &full);
        assert_eq!(r.code, 0, "{args:?}: {} {}", r.stdout, r.stderr);
        r.json()["result"].clone()
    }
}

fn keygen(dir: &Path, name: &str, role: &str, org: &str) -> KeyFile {
    let out = dir.join(format!("{name}.key"));
    let r = cli(&["keygen", "--role", role, "--org", org, "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let text = fs::read(&out).unwrap();
    serde_json::from_slice(&text).unwrap()
}

fn start() -> Harness {
    let dir = TempDir::new().unwrap();
    let owner = keygen(dir.path(), "owner", "Manager", "org1");
    let client = keygen(dir.path(), "client", "Client", "org2");
    let dev = keygen(dir.path(), "dev", "Developer", "org1");
    let tester = keygen(dir.path(), "tester", "Tester", "org2");

    let key = SecretKey::generate();
    let mut cfg = NetworkConfig::tcp(2, "127.0.0.1", 0, &key, &dir.path().join("data").display().to_string());
    cfg.orderer_endpoint = "127.0.0.1:0".into();
    for org in &mut cfg.orgs {
        org.peer_endpoint = "127.0.0.1:0".into();
    }
    cfg.policy.max_batch_wait_ms = 20;
    cfg.identities = vec![owner.identity, client.identity.clone(), dev.identity, tester.identity];
    cfg.allocations.insert(client.identity.member_id, 500_000);
    let net = DemoNetwork::start(cfg, key).unwrap();
    let network_file = dir.path().join("devchain.network");
    fs::write(&network_file, net.config().to_canonical()).unwrap();
    Harness { network_file: network_file.display().to_string(), dir, net: Some(net) }
}

fn pipeline_config() -> PipelineConfig {
    PipelineConfig {
        stages: vec![
            StageSpec {
                stage: Stage::Review,
                checks: vec![CheckRule {
                    rule: RuleKind::ForbiddenPattern { pattern: "TODO(secret)".into() },
                    description: "no leaked secrets".into(),
                }],
            },
            StageSpec {
                stage: Stage::Unit,
                checks: vec![CheckRule { rule: RuleKind::RequiredPath { path: "src".into() }, description: "sources".into() }],
            },
        ],
        package: PackageSpec { name: "webapp".into(), version_template: "1.0.<head_seq>".into(), include_paths: vec!["src".into()] },
        deploy_target: "staging".into(),
    }
}

#[test]
fn lifecycle_through_the_cli() {
    let h = start();
    let project = ["--project", "shop"];

    fs::write(h.path("terms.json"), r#"{"Project Budget": "$1,000", "Payment After 1 Iteration": "$250"}"#).unwrap();
    let created = h.json_as("owner", &["project", "create", project[0], project[1], "--name", "Shop", "--terms-file", &h.p("terms.json")]);
    assert_eq!(created["agreement"]["installment_cents"], 25_000);

    for who in ["client", "dev", "tester"] {
        h.json_as("owner", &["project", "add-member", "--project", "shop", "--identity", &h.p(&format!("{who}.key"))]);
    }
    h.json_as("owner", &["project", "accept-terms", "--project", "shop", "--side", "team"]);
    let accepted = h.json_as("client", &["project", "accept-terms", "--project", "shop", "--side", "client"]);
    assert_eq!(accepted["output"]["status"], "Active");

    fs::write(h.path("notes.md"), "kickoff notes\n").unwrap();
    h.json_as("dev", &["plan", "record", "--project", "shop", "--file", &h.p("notes.md")]);

    let repo = h.path("repo");
    fs::create_dir_all(repo.join("src")).unwrap();
    fs::write(repo.join("src/main.rs"), "fn main() {}\n").unwrap();
    fs::write(repo.join(CONFIG_FILE), pipeline_config().to_canonical()).unwrap();
    let snap = h.json_as("dev", &["repo", "snapshot", "--dir", repo.to_str().unwrap(), "--message", "first"]);
    let commit = snap["commit_cid"].as_str().unwrap().to_string();
    let pushed = h.json_as("dev", &["repo", "push", "--project", "shop", "--commit", &commit]);
    assert_eq!(pushed["output"]["head_seq"], 1);

    // The CI runner starts from an empty store and fetches the head.
    let built = h.json_as("dev", &["build", "run", "--project", "shop"]);
    assert_eq!(built["submission"]["version"], "1.0.1");
    let package: ContentId = built["package_cid"].as_str().unwrap().parse().unwrap();

    let denied = h.as_("client", &["gate", "attest", "--project", "shop", "--name", "webapp", "--version", "1.0.1"]);
    assert_eq!(denied.code, exit::USAGE, "boolean verdicts are required");
    let args = ["gate", "attest", "--project", "shop", "--name", "webapp", "--version", "1.0.1", "--quality", "true", "--security", "true", "--compliance", "true"];
    assert_eq!(h.as_("client", &args).code, exit::UNAUTHORIZED);
    let gate = h.json_as("tester", &args);
    assert_eq!(gate["output"]["status"], "GatePassed");

    let target = h.path("staging");
    let deployed = h.json_as("tester", &["deploy", "--project", "shop", "--name", "webapp", "--version", "1.0.1", "--target", target.to_str().unwrap()]);
    assert_eq!(deployed["iteration"], 1);
    let placed = fs::read(target.join("webapp-1.0.1.pkg")).unwrap();
    let dev_store = CaStore::open(&h.path("store-dev")).unwrap();
    assert_eq!(placed, dev_store.get(&package).unwrap());

    h.json_as("dev", &["monitor", "metric", "--project", "shop", "--name", "p99_ms", "--value", "12.75"]);
    h.json_as("dev", &["monitor", "alert", "--project", "shop", "--severity", "high", "--description", "latency spike"]);

    let paid = h.json_as("client", &["pay", "--project", "shop"]);
    assert!(paid["height"].as_u64().unwrap() > 0);
    let again = h.as_("client", &["pay", "--project", "shop"]);
    assert_eq!(again.code, exit::NOTHING_DUE, "{}", again.stderr);

    let owner_balance = h.json_as("owner", &["wallet", "balance"]);
    assert_eq!(owner_balance["cents"], 25_000);
    let shown = h.json_as("owner", &["project", "show", "--project", "shop"]);
    assert_eq!(shown["project"]["paid_cents"], 25_000);

    let trail = h.json_as("owner", &["audit", "trail", "--project", "shop"]);
    let phases: Vec<&str> = trail.as_array().unwrap().iter().map(|e| e["phase"].as_str().unwrap()).collect();
    let mut sorted = phases.clone();
    sorted.dedup();
    assert!(phases.len() >= 12 && sorted.first() == Some(&"Initiation"), "{phases:?}");

    let online = h.as_("owner", &["audit", "verify-chain"]);
    assert_eq!(online.code, 0, "{}", online.stderr);
    assert!(online.stdout.contains(", 0 violations"), "{}", online.stdout);

    let net = h.net.as_ref().unwrap();
    assert!(net.wait_synced(Duration::from_secs(10)));
    let offline = h.as_("owner", &["audit", "verify-chain", "--data-dir", net.peer_dir(1).to_str().unwrap()]);
    assert_eq!(offline.code, 0, "{}", offline.stderr);
}

#[test]
fn failed_build_sets_its_exit_code() {
    let h = start();
    fs::write(h.path("terms.json"), r#"{"Project Budget": "$100", "Payment After 2 Weeks": "$50"}"#).unwrap();
    h.json_as("owner", &["project", "create", "--project", "p1", "--name", "P", "--terms-file", &h.p("terms.json")]);
    h.json_as("owner", &["project", "add-member", "--project", "p1", "--identity", &h.p("client.key")]);
    h.json_as("owner", &["project", "add-member", "--project", "p1", "--identity", &h.p("dev.key")]);
    h.json_as("owner", &["project", "accept-terms", "--project", "p1", "--side", "team"]);
    h.json_as("client", &["project", "accept-terms", "--project", "p1", "--side", "client"]);

    let repo = h.path("repo");
    fs::create_dir_all(repo.join("src")).unwrap();
    fs::write(repo.join("src/lib.rs"), "// TODO(secret): hunter2\n").unwrap();
    fs::write(h.path("pipeline.cfg"), pipeline_config().to_canonical()).unwrap();
    let commit = h.json_as("dev", &["repo", "snapshot", "--dir", repo.to_str().unwrap()])["commit_cid"].as_str().unwrap().to_string();
    h.json_as("dev", &["repo", "push", "--project", "p1", "--commit", &commit]);

    let r = h.as_("dev", &["build", "run", "--project", "p1", "--config", &h.p("pipeline.cfg")]);
    assert_eq!(r.code, exit::BUILD_FAILED, "{} {}", r.stdout, r.stderr);
    assert!(r.stdout.contains("no leaked secrets") || r.stdout.contains("TODO(secret)"), "{}", r.stdout);
    assert!(r.stdout.contains("failure recorded"), "{}", r.stdout);
}

#[test]
fn input_errors_map_to_exit_codes() {
    assert_eq!(cli(&["no-such-command"]).code, exit::USAGE);
    assert_eq!(cli(&["--help"]).code, exit::OK);

    let dir = TempDir::new().unwrap();
    let key = dir.path().join("k.key");
    assert_eq!(cli(&["keygen", "--role", "Wizard", "--org", "org1", "--out", key.to_str().unwrap()]).code, exit::BAD_INPUT);
    assert_eq!(cli(&["keygen", "--role", "tester", "--org", "org1", "--out", key.to_str().unwrap()]).code, exit::OK);
    // Key files are never overwritten.
    assert_eq!(cli(&["keygen", "--role", "tester", "--org", "org1", "--out", key.to_str().unwrap()]).code, exit::INTERNAL);

    let missing = dir.path().join("absent.network");
    let r = cli(&["--json", "--network", missing.to_str().unwrap(), "project", "show", "--project", "x"]);
    assert_eq!(r.code, exit::BAD_INPUT);
    assert_eq!(r.json()["error"]["code"], "BadConfig");
}

#[test]
fn network_init_writes_a_loadable_config() {
    let dir = TempDir::new().unwrap();
    let a = keygen(dir.path(), "a", "Owner", "org1");
    let out = dir.path().join("net.cfg");
    let data = dir.path().join("data");
    let ident = dir.path().join("a.key");
    let args = [
        "network", "init", "--orgs", "3", "--base-port", "9100", "--data-dir", data.to_str().unwrap(),
        "--identity", ident.to_str().unwrap(), "--fund", "700", "--time-scale-divisor", "86400",
        "--out", out.to_str().unwrap(),
    ];
    let r = cli(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let cfg = NetworkConfig::load(&out).unwrap();
    assert_eq!(cfg.orgs.len(), 3);
    assert_eq!(cfg.orgs[2].peer_endpoint, "127.0.0.1:9103");
    assert_eq!(cfg.time_scale_divisor, 86400);
    assert_eq!(cfg.allocations.get(&a.identity.member_id), Some(&700));
    let key = devchain::node::config::read_secret(&cfg.orderer_key_path()).unwrap();
    assert_eq!(key.public_key(), cfg.orderer_public_key);

    // A second init keeps the existing orderer key.
    assert_eq!(cli(&args).code, 0);
    assert_eq!(NetworkConfig::load(&out).unwrap().orderer_public_key, key.public_key());
}
