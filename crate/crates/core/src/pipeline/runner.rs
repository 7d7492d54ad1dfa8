use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{run_stage, PipelineConfig, Stage, StageResult};
use super::package::make_package;
use crate::castore::{CaStore, ContentId, StoreError};
use crate::client::{query_typed, submit_and_wait, ChainAccess, ClientError, Clock, NonceSource, RetryPolicy};
use crate::consensus::TxLocation;
use crate::contracts::{keys, BuildRecord, BuildStatus, BuildSubmission, Call, Project, RepoHead, Verdict};
use crate::ledger::SecretKey;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("repository head {0} is missing or incomplete in the store")]
    DanglingRepoHead(ContentId),
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error("store: {0}")]
    Store(#[from] StoreError),
    #[error("could not reach the chain: {0}")]
    SubmitFailure(ClientError),
    #[error("transaction committed as invalid: {0}")]
    Invalid(String),
    #[error("build {0} not found on chain")]
    BuildNotFound(String),
    #[error("build {0} has not passed the gate")]
    GateNotPassed(String),
    #[error("package {0} failed verification")]
    IntegrityFailure(ContentId),
    #[error("cannot write deploy target {0}: {1}")]
    TargetUnwritable(String, String),
}

impl PipelineError {
    pub fn code(&self) -> &str {
        match self {
            PipelineError::DanglingRepoHead(_) => "DanglingRepoHead",
            PipelineError::Config(_) => "BadConfig",
            PipelineError::Store(e) => e.code(),
            PipelineError::SubmitFailure(_) => "SubmitFailure",
            PipelineError::Invalid(code) => code.split(':').next().unwrap_or(code),
            PipelineError::BuildNotFound(_) => "BuildNotFound",
            PipelineError::GateNotPassed(_) => "GateNotPassed",
            PipelineError::IntegrityFailure(_) => "IntegrityFailure",
            PipelineError::TargetUnwritable(..) => "TargetUnwritable",
        }
    }
}

/// Everything a runner needs: its store, the chain, and the CI identity.
pub struct CiContext<'a> {
    pub store: &'a CaStore,
    pub chain: &'a dyn ChainAccess,
    pub signer: &'a SecretKey,
    pub nonces: &'a NonceSource,
    pub clock: &'a dyn Clock,
    pub retry: RetryPolicy,
}

impl CiContext<'_> {
    fn commit(&self, project_id: &str, call: Call) -> Result<TxLocation, PipelineError> {
        let tx = call.sign(project_id, self.signer, self.clock.now_ms(), self.nonces.next());
        let loc = submit_and_wait(self.chain, &tx, self.retry).map_err(PipelineError::SubmitFailure)?;
        if !loc.valid {
            return Err(PipelineError::Invalid(loc.error.unwrap_or_default()));
        }
        Ok(loc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub project_id: String,
    pub head_seq: u64,
    pub commit_cid: ContentId,
    pub stages: Vec<StageResult>,
    pub submission: BuildSubmission,
    pub package_cid: Option<ContentId>,
    pub height: u64,
}

impl PipelineRun {
    pub fn passed(&self) -> bool {
        self.submission.all_pass()
    }
}

/// `HH:MM:SS` and `YYYY-MM-DD` in UTC.
pub fn time_and_date(ms: u64) -> (String, String) {
    let t = chrono::DateTime::from_timestamp_millis(ms as i64).unwrap_or_default();
    (t.format("%H:%M:%S").to_string(), t.format("%Y-%m-%d").to_string())
}

/// Runs Review, Unit and Integration over the commit's tree, packages on
/// success, and records the outcome on chain. All three check stages always
/// run so the record carries a verdict for each; a failure skips packaging.
pub fn run_pipeline(
    ctx: &CiContext<'_>,
    project_id: &str,
    head: &RepoHead,
    config: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    config.validate().map_err(PipelineError::Config)?;
    let commit = ctx.store.read_commit(&head.commit_cid).map_err(|_| PipelineError::DanglingRepoHead(head.commit_cid))?;
    let files = ctx.store.list_files(&commit.tree_cid).map_err(|_| PipelineError::DanglingRepoHead(head.commit_cid))?;
    if files.iter().any(|(_, cid, _)| ctx.store.get(cid).is_err()) {
        return Err(PipelineError::DanglingRepoHead(head.commit_cid));
    }

    let stages = Stage::ALL
        .iter()
        .map(|s| run_stage(ctx.store, &commit.tree_cid, *s, config.checks_for(*s)))
        .collect::<Result<Vec<_>, _>>()?;
    let all_pass = stages.iter().all(|s| s.verdict == Verdict::Pass);
    let package_cid = if all_pass {
        let bytes = make_package(ctx.store, &commit.tree_cid, &config.package.include_paths)?;
        Some(ctx.store.put_blob(&bytes)?)
    } else {
        None
    };
    let (time, date) = time_and_date(ctx.clock.now_ms());
    let submission = BuildSubmission {
        name: config.package.name.clone(),
        version: config.version_for(head.head_seq),
        time,
        date,
        package_cid,
        review: stages[0].verdict,
        unit: stages[1].verdict,
        integration: stages[2].verdict,
    };
    let loc = ctx.commit(project_id, Call::record_build(&submission))?;
    Ok(PipelineRun {
        project_id: project_id.to_string(),
        head_seq: head.head_seq,
        commit_cid: head.commit_cid,
        stages,
        submission,
        package_cid,
        height: loc.height,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployOutcome {
    pub path: PathBuf,
    pub package_cid: ContentId,
    pub height: u64,
    pub iteration: u64,
}

/// File name a package is placed under at the deploy target.
pub fn deployed_file_name(name: &str, version: &str) -> String {
    format!("{name}-{version}.pkg")
}

/// Places a gate-passed package at `target` and records the deployment.
/// Nothing is written unless the chain already shows `GatePassed`, and the
/// placed file is removed again if the deploy transaction does not commit
/// as valid.
pub fn execute_deploy(
    ctx: &CiContext<'_>,
    project_id: &str,
    name: &str,
    version: &str,
    target: &Path,
) -> Result<DeployOutcome, PipelineError> {
    let label = format!("{name}@{version}");
    let record: BuildRecord = query_typed(ctx.chain, &keys::build(project_id, name, version))
        .map_err(PipelineError::SubmitFailure)?
        .ok_or_else(|| PipelineError::BuildNotFound(label.clone()))?;
    let gate_ok = record.gate.as_ref().is_some_and(|g| g.all_true());
    if record.status != BuildStatus::GatePassed || !gate_ok {
        return Err(PipelineError::GateNotPassed(label));
    }
    let package_cid = record.package_cid.ok_or_else(|| PipelineError::GateNotPassed(label.clone()))?;
    let bytes = ctx.store.get(&package_cid).map_err(|e| match e {
        StoreError::IntegrityFailure(_) => PipelineError::IntegrityFailure(package_cid),
        other => PipelineError::Store(other),
    })?;

    let unwritable = |e: std::io::Error| PipelineError::TargetUnwritable(target.display().to_string(), e.to_string());
    fs::create_dir_all(target).map_err(unwritable)?;
    let path = target.join(deployed_file_name(name, version));
    let existed = path.exists();
    let tmp = target.join(format!(".{}.tmp", deployed_file_name(name, version)));
    fs::write(&tmp, &bytes).map_err(unwritable)?;
    fs::rename(&tmp, &path).map_err(unwritable)?;

    match ctx.commit(project_id, Call::deploy(name, version, &target.display().to_string())) {
        Ok(loc) => {
            let iteration = loc.output.get("iteration").and_then(|v| v.as_u64()).unwrap_or(0);
            Ok(DeployOutcome { path, package_cid, height: loc.height, iteration })
        }
        Err(e) => {
            if !existed {
                let _ = fs::remove_file(&path);
            }
            Err(match e {
                PipelineError::Invalid(code) if code.starts_with("GateNotPassed") => PipelineError::GateNotPassed(label),
                other => other,
            })
        }
    }
}

/// Turns repository-head updates into pipeline triggers, exactly once per
/// `head_seq`. `RepoHeadUpdated` events say when to look; the heads are read
/// from state, so lost or repeated events are harmless.
#[derive(Debug, Clone)]
pub struct RepoWatcher {
    pub project_id: String,
    last_seq: u64,
}

impl RepoWatcher {
    pub fn new(project_id: &str) -> RepoWatcher {
        RepoWatcher { project_id: project_id.to_string(), last_seq: 0 }
    }

    /// Starts after heads already handled elsewhere.
    pub fn starting_after(project_id: &str, head_seq: u64) -> RepoWatcher {
        RepoWatcher { project_id: project_id.to_string(), last_seq: head_seq }
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Heads not yet handed out, in `head_seq` order, read from state.
    pub fn poll(&mut self, chain: &dyn ChainAccess) -> Result<Vec<RepoHead>, ClientError> {
        let Some(project) = query_typed::<Project>(chain, &keys::project(&self.project_id))? else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for seq in self.last_seq + 1..=project.head_seq {
            if let Some(head) = query_typed::<RepoHead>(chain, &keys::head(&self.project_id, seq))? {
                out.push(head);
            }
        }
        self.last_seq = self.last_seq.max(project.head_seq);
        Ok(out)
    }

    /// Accepts a head sequence number from a possibly repeated event stream.
    pub fn accept(&mut self, head_seq: u64) -> bool {
        if head_seq <= self.last_seq {
            return false;
        }
        self.last_seq = head_seq;
        true
    }
}
