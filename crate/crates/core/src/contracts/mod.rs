//! Deterministic contract engine and the DevOps phase contracts.
//!
//! Contracts are pure functions of `(state, transaction, block context)`. No
//! clocks, randomness or I/O are reachable from contract code. Each
//! transaction runs against a write overlay; the overlay is merged into the
//! state only when the contract returns `Ok`, so a failed transaction leaves
//! the store untouched.

mod calls;
mod cicd;
mod deployment;
mod development;
mod initiation;
pub mod keys;
mod monitoring;
mod payment;
pub mod query;
mod system;
pub mod types;

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{from_doc, to_doc, Doc};
use crate::ledger::transaction::verify_with_key;
use crate::ledger::{member_id_of, Identity, KeyRegistry, MemberId, PublicKey, StateStore, Transaction, TxRejection};

pub use calls::Call;
pub use types::*;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContractError {
    #[error("unknown submitter")]
    UnknownSubmitter,
    #[error("bad signature")]
    BadSignature,
    #[error("replayed nonce")]
    ReplayedNonce,
    #[error("unknown operation {0}")]
    UnknownOperation(String),
    #[error("bad arguments: {0}")]
    BadArgs(String),
    #[error("project not found")]
    ProjectNotFound,
    #[error("project id already exists")]
    DuplicateProjectId,
    #[error("invalid agreement: {0}")]
    InvalidAgreement(String),
    #[error("agreement is frozen after activation")]
    AgreementFrozen,
    #[error("public key already registered")]
    DuplicateKey,
    #[error("submitter is not authorized for this operation")]
    Unauthorized,
    #[error("submitter role does not match the accepting side")]
    WrongSide,
    #[error("project is already active")]
    AlreadyActive,
    #[error("project is not active")]
    ProjectNotActive,
    #[error("malformed content id")]
    MalformedCid,
    #[error("build name@version already recorded")]
    DuplicateNameVersion,
    #[error("build not found")]
    BuildNotFound,
    #[error("build is not in Built status")]
    BuildNotBuilt,
    #[error("build has not passed the deployment gate")]
    GateNotPassed,
    #[error("insufficient balance")]
    InsufficientBalance,
    #[error("no installment is due")]
    NothingDue,
}

impl ContractError {
    /// Stable error code used in validity records, RPC errors and CLI output.
    pub fn code(&self) -> &'static str {
        match self {
            ContractError::UnknownSubmitter => "UnknownSubmitter",
            ContractError::BadSignature => "BadSignature",
            ContractError::ReplayedNonce => "ReplayedNonce",
            ContractError::UnknownOperation(_) => "UnknownOperation",
            ContractError::BadArgs(_) => "BadArgs",
            ContractError::ProjectNotFound => "ProjectNotFound",
            ContractError::DuplicateProjectId => "DuplicateProjectId",
            ContractError::InvalidAgreement(_) => "InvalidAgreement",
            ContractError::AgreementFrozen => "AgreementFrozen",
            ContractError::DuplicateKey => "DuplicateKey",
            ContractError::Unauthorized => "Unauthorized",
            ContractError::WrongSide => "WrongSide",
            ContractError::AlreadyActive => "AlreadyActive",
            ContractError::ProjectNotActive => "ProjectNotActive",
            ContractError::MalformedCid => "MalformedCid",
            ContractError::DuplicateNameVersion => "DuplicateNameVersion",
            ContractError::BuildNotFound => "BuildNotFound",
            ContractError::BuildNotBuilt => "BuildNotBuilt",
            ContractError::GateNotPassed => "GateNotPassed",
            ContractError::InsufficientBalance => "InsufficientBalance",
            ContractError::NothingDue => "NothingDue",
        }
    }
}

impl From<TxRejection> for ContractError {
    fn from(r: TxRejection) -> Self {
        match r {
            TxRejection::UnknownSubmitter => ContractError::UnknownSubmitter,
            TxRejection::ReplayedNonce => ContractError::ReplayedNonce,
            TxRejection::BadSignature | TxRejection::QueueFull => ContractError::BadSignature,
        }
    }
}

/// Who an event is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Audience {
    AllMembers,
    Developers,
    Parties,
}

impl Audience {
    /// Subscribers filtering on `self` also receive AllMembers events.
    pub fn admits(&self, event_audience: Audience) -> bool {
        event_audience == Audience::AllMembers || event_audience == *self
    }
}

/// An event before it is stamped with block height and transaction id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDraft {
    /// Empty for events outside any project.
    pub project_id: String,
    pub contract: String,
    pub event_name: String,
    pub payload: Doc,
    pub audience: Audience,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockContext {
    pub height: u64,
    pub timestamp: u64,
}

/// Successful execution: the contract's return value and emitted events.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecResult {
    pub output: Doc,
    pub events: Vec<EventDraft>,
}

/// Read-your-writes overlay over the committed state for one transaction.
pub struct TxContext<'a> {
    base: &'a StateStore,
    writes: BTreeMap<String, Option<Doc>>,
    events: Vec<EventDraft>,
    contract: &'a str,
    pub block: BlockContext,
    pub submitter: MemberId,
    pub project_id: &'a str,
}

impl<'a> TxContext<'a> {
    fn new(base: &'a StateStore, tx: &'a Transaction, block: BlockContext) -> TxContext<'a> {
        TxContext {
            base,
            writes: BTreeMap::new(),
            events: Vec::new(),
            contract: &tx.body.contract,
            block,
            submitter: tx.body.submitter,
            project_id: &tx.body.project_id,
        }
    }

    fn for_hook(base: &'a StateStore, block: BlockContext, contract: &'a str, project_id: &'a str) -> TxContext<'a> {
        TxContext {
            base,
            writes: BTreeMap::new(),
            events: Vec::new(),
            contract,
            block,
            submitter: MemberId::ZERO,
            project_id,
        }
    }

    pub fn get_doc(&self, key: &str) -> Option<&Doc> {
        match self.writes.get(key) {
            Some(w) => w.as_ref(),
            None => self.base.get(key),
        }
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, ContractError> {
        self.get_doc(key)
            .map(|d| from_doc(d).map_err(|e| ContractError::BadArgs(format!("corrupt document {key}: {e}"))))
            .transpose()
    }

    pub fn exists(&self, key: &str) -> bool {
        self.get_doc(key).is_some()
    }

    pub fn put<T: Serialize>(&mut self, key: String, value: &T) -> Result<(), ContractError> {
        let doc = to_doc(value).map_err(|e| ContractError::BadArgs(e.to_string()))?;
        self.writes.insert(key, Some(doc));
        Ok(())
    }

    pub fn delete(&mut self, key: String) {
        self.writes.insert(key, None);
    }

    pub fn emit<T: Serialize>(&mut self, event_name: &str, audience: Audience, payload: &T) {
        let payload = to_doc(payload).unwrap_or(Doc::Null);
        self.events.push(EventDraft {
            project_id: self.project_id.to_string(),
            contract: self.contract.to_string(),
            event_name: event_name.to_string(),
            payload,
            audience,
        });
    }

    pub fn chain_config(&self) -> Result<ChainConfig, ContractError> {
        self.get(keys::CHAIN_CONFIG)?
            .ok_or_else(|| ContractError::BadArgs("chain has no genesis configuration".into()))
    }

    /// Loads the transaction's project.
    pub fn project(&self) -> Result<Project, ContractError> {
        self.get(&keys::project(self.project_id))?.ok_or(ContractError::ProjectNotFound)
    }

    pub fn save_project(&mut self, project: &Project) -> Result<(), ContractError> {
        self.put(keys::project(&project.project_id), project)
    }

    pub fn member(&self, member: &MemberId) -> Result<Option<Member>, ContractError> {
        self.get(&keys::member(self.project_id, member))
    }

    /// The submitter's project membership, or `Unauthorized`.
    pub fn submitter_member(&self) -> Result<Member, ContractError> {
        self.member(&self.submitter)?.ok_or(ContractError::Unauthorized)
    }

    /// Project, required to be Active, with the submitter a member.
    pub fn active_project(&self) -> Result<(Project, Member), ContractError> {
        let project = self.project()?;
        if project.status != ProjectStatus::Active {
            return Err(ContractError::ProjectNotActive);
        }
        let member = self.submitter_member()?;
        Ok((project, member))
    }

    pub fn balance(&self, member: &MemberId) -> Result<u64, ContractError> {
        Ok(self.get::<TokenBalance>(&keys::token(member))?.map(|b| b.cents).unwrap_or(0))
    }

    pub fn set_balance(&mut self, member: &MemberId, cents: u64) -> Result<(), ContractError> {
        self.put(keys::token(member), &TokenBalance { cents })
    }

    /// Moves tokens; conserves total supply.
    pub fn transfer(&mut self, from: &MemberId, to: &MemberId, cents: u64) -> Result<(), ContractError> {
        if cents == 0 || from == to {
            return if self.balance(from)? >= cents { Ok(()) } else { Err(ContractError::InsufficientBalance) };
        }
        let from_balance = self.balance(from)?;
        if from_balance < cents {
            return Err(ContractError::InsufficientBalance);
        }
        let to_balance = self.balance(to)?;
        let credited = to_balance.checked_add(cents).ok_or_else(|| ContractError::BadArgs("balance overflow".into()))?;
        self.set_balance(from, from_balance - cents)?;
        self.set_balance(to, credited)
    }

    fn finish(self) -> (BTreeMap<String, Option<Doc>>, Vec<EventDraft>) {
        (self.writes, self.events)
    }
}

fn apply_writes(state: &mut StateStore, writes: BTreeMap<String, Option<Doc>>) {
    for (k, v) in writes {
        match v {
            Some(doc) => state.put(k, doc),
            None => state.delete(&k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBalance {
    pub cents: u64,
}

pub(crate) fn args<T: DeserializeOwned>(doc: &Doc) -> Result<T, ContractError> {
    from_doc(doc).map_err(|e| ContractError::BadArgs(e.to_string()))
}

/// Key registry backed by committed state.
pub struct StateRegistry<'a> {
    state: &'a StateStore,
    orderer_key: &'a PublicKey,
}

impl<'a> StateRegistry<'a> {
    pub fn new(state: &'a StateStore, orderer_key: &'a PublicKey) -> StateRegistry<'a> {
        StateRegistry { state, orderer_key }
    }
}

impl KeyRegistry for StateRegistry<'_> {
    fn public_key(&self, member: &MemberId) -> Option<PublicKey> {
        if *member == member_id_of(self.orderer_key) {
            return Some(*self.orderer_key);
        }
        let doc = self.state.get(&keys::registry(member))?;
        from_doc::<Identity>(doc).ok().map(|id| id.public_key)
    }

    fn nonce_seen(&self, project_id: &str, member: &MemberId, nonce: u64) -> bool {
        self.state.contains(&keys::nonce(project_id, member, nonce))
    }
}

/// Authenticates a transaction against committed state.
///
/// Self-registration (`identity.register`) carries its own public key and is
/// accepted from a not-yet-registered submitter when the key hashes to the
/// submitter id.
pub fn authenticate(state: &StateStore, tx: &Transaction, orderer_key: &PublicKey) -> Result<(), TxRejection> {
    let registry = StateRegistry::new(state, orderer_key);
    match registry.public_key(tx.submitter()) {
        Some(key) => verify_with_key(tx, &key)?,
        None => {
            let key = self_registration_key(tx).ok_or(TxRejection::UnknownSubmitter)?;
            verify_with_key(tx, &key)?;
        }
    }
    if registry.nonce_seen(&tx.body.project_id, tx.submitter(), tx.body.nonce) {
        return Err(TxRejection::ReplayedNonce);
    }
    Ok(())
}

fn self_registration_key(tx: &Transaction) -> Option<PublicKey> {
    if tx.body.contract != system::IDENTITY || tx.body.operation != "register" {
        return None;
    }
    let id: Identity = from_doc(tx.body.args.get("identity")?).ok()?;
    (id.is_consistent() && id.member_id == tx.body.submitter).then_some(id.public_key)
}

/// Runs one transaction. On success the overlay is merged into `state` and
/// the nonce is consumed; on failure `state` is unchanged.
pub fn execute_transaction(
    state: &mut StateStore,
    tx: &Transaction,
    block: BlockContext,
    orderer_key: &PublicKey,
) -> Result<ExecResult, ContractError> {
    authenticate(state, tx, orderer_key)?;
    let mut ctx = TxContext::new(state, tx, block);
    let output = dispatch(&mut ctx, tx, orderer_key)?;
    let nonce_key = keys::nonce(&tx.body.project_id, tx.submitter(), tx.body.nonce);
    ctx.writes.insert(nonce_key, Some(Doc::Bool(true)));
    let (writes, events) = ctx.finish();
    apply_writes(state, writes);
    Ok(ExecResult { output, events })
}

fn dispatch(ctx: &mut TxContext<'_>, tx: &Transaction, orderer_key: &PublicKey) -> Result<Doc, ContractError> {
    let op = tx.body.operation.as_str();
    let a = &tx.body.args;
    match tx.body.contract.as_str() {
        system::IDENTITY => system::identity(ctx, op, a),
        system::TOKEN => system::token(ctx, op, a, orderer_key),
        initiation::CONTRACT => initiation::execute(ctx, op, a),
        development::CONTRACT => development::execute(ctx, op, a),
        cicd::CONTRACT => cicd::execute(ctx, op, a),
        deployment::CONTRACT => deployment::execute(ctx, op, a),
        monitoring::CONTRACT => monitoring::execute(ctx, op, a),
        payment::CONTRACT => payment::execute(ctx, op, a),
        other => Err(ContractError::UnknownOperation(format!("{other}.{op}"))),
    }
}

/// Deterministic end-of-block hook: freezes projects whose installment is
/// past due beyond the grace period.
pub fn on_block(state: &mut StateStore, block: BlockContext) -> Vec<EventDraft> {
    let due_ids: Vec<String> = state
        .scan_prefix(keys::DUE_PREFIX)
        .map(|(k, _)| k[keys::DUE_PREFIX.len()..].to_string())
        .collect();
    let mut events = Vec::new();
    for id in due_ids {
        let mut ctx = TxContext::for_hook(state, block, payment::CONTRACT, &id);
        // A hook failure would mean corrupt state; skip that project rather
        // than diverge between replicas.
        if payment::on_block(&mut ctx, &id).is_ok() {
            let (writes, emitted) = ctx.finish();
            apply_writes(state, writes);
            events.extend(emitted);
        }
    }
    events
}

/// The contract phase an operation belongs to, for audit trails.
pub fn phase_of(contract: &str) -> Option<&'static str> {
    match contract {
        initiation::CONTRACT => Some("Initiation"),
        development::CONTRACT => Some("Development"),
        cicd::CONTRACT => Some("CI/CD"),
        deployment::CONTRACT => Some("Deployment"),
        monitoring::CONTRACT => Some("Monitoring"),
        payment::CONTRACT => Some("Payments"),
        _ => None,
    }
}

pub mod names {
    //! Contract names as they appear in transactions.
    pub use super::cicd::CONTRACT as CICD;
    pub use super::deployment::CONTRACT as DEPLOYMENT;
    pub use super::development::CONTRACT as DEVELOPMENT;
    pub use super::initiation::CONTRACT as INITIATION;
    pub use super::monitoring::CONTRACT as MONITORING;
    pub use super::payment::CONTRACT as PAYMENT;
    pub use super::system::{IDENTITY, TOKEN};
}
