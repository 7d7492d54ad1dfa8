//! The `devchain` operator CLI. Every lifecycle phase has a command; each
//! prints a short human summary, or one JSON document with `--json`, and
//! exits with a code that identifies the error class (see [`exit`]).

mod commands;
mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

pub use error::{exit, CliError};

/// Network config used when `--network` is not given.
pub const DEFAULT_NETWORK_FILE: &str = "devchain.network";
/// Local object store used by `repo`, `build` and `deploy` when `--store` is not given.
pub const DEFAULT_STORE_DIR: &str = ".devchain/castore";

#[derive(Debug, Parser)]
#[command(name = "devchain", version, about = "Permissioned ledger for distributed DevOps")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Network config file.
    #[arg(long, global = true, default_value = DEFAULT_NETWORK_FILE)]
    pub network: PathBuf,
    /// Key file of the acting member.
    #[arg(long, global = true)]
    pub key: Option<PathBuf>,
    /// Org whose peer to talk to (default: the first org).
    #[arg(long, global = true)]
    pub peer: Option<String>,
    /// Local content store.
    #[arg(long, global = true, default_value = DEFAULT_STORE_DIR)]
    pub store: PathBuf,
    /// Print one JSON document instead of text.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a member key pair.
    Keygen {
        #[arg(long)]
        role: String,
        #[arg(long)]
        org: String,
        #[arg(long, default_value = "devchain.key")]
        out: PathBuf,
    },
    /// Register the acting member's identity on chain.
    Register,
    #[command(subcommand)]
    /// Network config and orderer key setup.
    Network(NetworkCmd),
    /// Run a node until killed.
    Serve {
        #[arg(long, value_enum)]
        role: ServeRole,
        /// Org of the peer to run.
        #[arg(long)]
        org: Option<String>,
        /// Network config (overrides --network).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    #[command(subcommand)]
    /// Project creation, membership and terms.
    Project(ProjectCmd),
    #[command(subcommand)]
    /// Planning recordings and notes.
    Plan(PlanCmd),
    #[command(subcommand)]
    /// Repository snapshots and heads.
    Repo(RepoCmd),
    #[command(subcommand)]
    /// CI pipeline runs.
    Build(BuildCmd),
    #[command(subcommand)]
    /// Deployment gate attestations.
    Gate(GateCmd),
    /// Place a gate-passed package at a target directory.
    Deploy {
        #[arg(long)]
        project: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        version: String,
        #[arg(long)]
        target: PathBuf,
    },
    #[command(subcommand)]
    /// Post-deployment metrics and alerts.
    Monitor(MonitorCmd),
    /// Pay the installment that is due.
    Pay {
        #[arg(long)]
        project: String,
    },
    #[command(subcommand)]
    /// Token balances.
    Wallet(WalletCmd),
    #[command(subcommand)]
    /// Chain verification and project trails.
    Audit(AuditCmd),
    /// Run a benchmark and write its report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Report path; `.json` selects JSON, anything else Markdown.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ServeRole {
    Peer,
    Orderer,
    /// The orderer and every peer in one process.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportArg {
    Tcp,
    Loopback,
}

#[derive(Debug, Subcommand)]
pub enum NetworkCmd {
    /// Write a network config and the orderer key.
    Init {
        #[arg(long, default_value_t = 4)]
        orgs: usize,
        #[arg(long, value_enum, default_value = "tcp")]
        transport: TransportArg,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 7050)]
        base_port: u16,
        #[arg(long, default_value = "devchain-data")]
        data_dir: String,
        /// Identity or key files registered at genesis.
        #[arg(long = "identity")]
        identities: Vec<PathBuf>,
        /// Genesis balance, in cents, for each `--identity`.
        #[arg(long, default_value_t = 0)]
        fund: u64,
        /// Contract periods are divided by this; 86400 turns days into seconds.
        #[arg(long, default_value_t = 1)]
        time_scale_divisor: u64,
        #[arg(long)]
        batch_wait_ms: Option<u64>,
        #[arg(long)]
        heartbeat_ms: Option<u64>,
        #[arg(long, default_value = DEFAULT_NETWORK_FILE)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ProjectCmd {
    /// Create a project from a terms file; flags override its amounts.
    Create {
        #[arg(long)]
        project: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        terms_file: PathBuf,
        /// Dollars, e.g. `1000` or `$1,000.50`.
        #[arg(long)]
        budget: Option<String>,
        #[arg(long)]
        installment: Option<String>,
        /// `per-iteration` or `per-two-weeks`.
        #[arg(long)]
        trigger: Option<String>,
    },
    /// Add a member; Owner or Manager role only.
    AddMember {
        #[arg(long)]
        project: String,
        /// Identity or key file of the new member.
        #[arg(long)]
        identity: PathBuf,
    },
    /// Accept the terms for the team or the client side.
    AcceptTerms {
        #[arg(long)]
        project: String,
        #[arg(long)]
        side: String,
    },
    /// Show a project and its agreement.
    Show {
        #[arg(long)]
        project: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanKindArg {
    Recording,
    Notes,
}

#[derive(Debug, Subcommand)]
pub enum PlanCmd {
    /// Store a planning artifact and anchor its content id.
    Record {
        #[arg(long)]
        project: String,
        #[arg(long)]
        file: PathBuf,
        #[arg(long, value_enum, default_value = "notes")]
        kind: PlanKindArg,
    },
}

#[derive(Debug, Subcommand)]
pub enum RepoCmd {
    /// Snapshot a directory into the local store as a commit.
    Snapshot {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value = "snapshot")]
        message: String,
        #[arg(long)]
        parent: Option<String>,
    },
    /// Upload a commit and record it as the project's repository head.
    Push {
        #[arg(long)]
        project: String,
        #[arg(long)]
        commit: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum BuildCmd {
    /// Run the pipeline over a repository head and record the result.
    Run {
        #[arg(long)]
        project: String,
        /// Pipeline config; defaults to the one in the repository root.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Head to build (default: the latest).
        #[arg(long)]
        head_seq: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum GateCmd {
    /// Record the three gate flags for a built package.
    Attest {
        #[arg(long)]
        project: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        version: String,
        #[arg(long, action = clap::ArgAction::Set)]
        quality: bool,
        #[arg(long, action = clap::ArgAction::Set)]
        security: bool,
        #[arg(long, action = clap::ArgAction::Set)]
        compliance: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum MonitorCmd {
    /// Record one metric sample.
    Metric {
        #[arg(long)]
        project: String,
        #[arg(long)]
        name: String,
        /// Decimal value, e.g. `0.25`.
        #[arg(long, allow_hyphen_values = true)]
        value: String,
    },
    /// Raise an alert for the developers.
    Alert {
        #[arg(long)]
        project: String,
        #[arg(long)]
        severity: String,
        #[arg(long)]
        description: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum WalletCmd {
    /// Show a member's balance in cents.
    Balance {
        /// Member id (default: the acting member).
        #[arg(long)]
        member: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AuditCmd {
    /// Verify hash links, signatures and roots of every block.
    VerifyChain {
        /// Audit a node's block log on disk instead of asking a peer.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Orderer public key (hex); defaults to the network config's.
        #[arg(long)]
        orderer_key: Option<String>,
    },
    /// Phase-ordered history of a project, rebuilt from the chain.
    Trail {
        #[arg(long)]
        project: String,
    },
}

/// Result of a command: text and JSON forms, plus the failure that sets
/// the exit code when the command ran but its outcome is an error (a failed
/// build, a chain with violations).
pub struct Output {
    pub human: String,
    pub json: Value,
    pub failure: Option<CliError>,
}

impl Output {
    pub fn ok(human: impl Into<String>, json: Value) -> Output {
        Output { human: human.into(), json, failure: None }
    }
}

/// Entry point of the binary.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Parses `args` and runs the command, writing to the given streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let json_mode = cli.global.json;
    match commands::dispatch(&cli, out) {
        Ok(output) => {
            let failure = output.failure.clone();
            if json_mode {
                let mut doc = json!({ "ok": failure.is_none(), "result": output.json });
                if let Some(f) = &failure {
                    doc["error"] = json!({ "code": f.code, "message": f.message });
                }
                let _ = writeln!(out, "{doc}");
            } else {
                let _ = writeln!(out, "{}", output.human.trim_end());
                if let Some(f) = &failure {
                    let _ = writeln!(err, "error: {f}");
                }
            }
            failure.map_or(exit::OK, |f| f.exit_code())
        }
        Err(e) => {
            if json_mode {
                let _ = writeln!(out, "{}", json!({ "ok": false, "error": { "code": e.code, "message": e.message } }));
            } else {
                let _ = writeln!(err, "error: {e}");
            }
            e.exit_code()
        }
    }
}
