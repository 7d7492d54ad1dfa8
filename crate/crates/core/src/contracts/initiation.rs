//! Project initiation: creation, membership and two-party terms consensus.

use serde::Deserialize;
use serde_json::json;

use super::keys;
use super::types::*;
use super::{args, Audience, ContractError, TxContext};
use crate::canonical::Doc;
use crate::castore::ContentId;
use crate::ledger::{Identity, Role};

pub const CONTRACT: &str = "initiation";

#[derive(Deserialize)]
struct CreateArgs {
    name: String,
    terms_cid: String,
    agreement: Agreement,
}

#[derive(Deserialize)]
struct AddMemberArgs {
    identity: Identity,
}

#[derive(Deserialize)]
struct AcceptArgs {
    side: Side,
}

#[derive(Deserialize)]
struct AmendArgs {
    agreement: Agreement,
}

pub(super) fn execute(ctx: &mut TxContext<'_>, op: &str, a: &Doc) -> Result<Doc, ContractError> {
    match op {
        "create_project" => create_project(ctx, args(a)?),
        "add_member" => add_member(ctx, args(a)?),
        "accept_terms" => accept_terms(ctx, args(a)?),
        "amend_agreement" => amend_agreement(ctx, args(a)?),
        other => Err(ContractError::UnknownOperation(format!("{CONTRACT}.{other}"))),
    }
}

fn create_project(ctx: &mut TxContext<'_>, a: CreateArgs) -> Result<Doc, ContractError> {
    let id = ctx.project_id.to_string();
    if !keys::valid_project_id(&id) {
        return Err(ContractError::BadArgs(format!("invalid project id {id:?}")));
    }
    let creator: Identity =
        ctx.get(&keys::registry(&ctx.submitter))?.ok_or(ContractError::UnknownSubmitter)?;
    if !creator.role.is_team_lead() {
        return Err(ContractError::Unauthorized);
    }
    if ctx.exists(&keys::project(&id)) {
        return Err(ContractError::DuplicateProjectId);
    }
    a.agreement.validate().map_err(ContractError::InvalidAgreement)?;
    let terms_cid = ContentId::parse(&a.terms_cid).map_err(|_| ContractError::MalformedCid)?;

    let project = Project {
        project_id: id.clone(),
        name: a.name,
        owner: ctx.submitter,
        status: ProjectStatus::Draft,
        terms_cid,
        team_accepted: false,
        client_accepted: false,
        iteration_counter: 0,
        plan_count: 0,
        head_seq: 0,
        metric_count: 0,
        alert_count: 0,
        payment_count: 0,
        paid_cents: 0,
        next_due: None,
        dues_outstanding: 0,
    };
    ctx.save_project(&project)?;
    ctx.put(keys::agreement(&id), &a.agreement)?;
    let owner = Member {
        member_id: creator.member_id,
        public_key: creator.public_key,
        role: creator.role,
        org: creator.org,
    };
    ctx.put(keys::member(&id, &owner.member_id), &owner)?;
    ctx.put(keys::member_key(&id, &owner.public_key), &owner.member_id)?;
    ctx.emit("ProjectCreated", Audience::AllMembers, &json!({ "project_id": id, "owner": owner.member_id }));
    Ok(json!({ "project_id": id, "status": ProjectStatus::Draft }))
}

fn add_member(ctx: &mut TxContext<'_>, a: AddMemberArgs) -> Result<Doc, ContractError> {
    let project = ctx.project()?;
    if !matches!(project.status, ProjectStatus::Draft | ProjectStatus::Active) {
        return Err(ContractError::ProjectNotActive);
    }
    if !ctx.submitter_member()?.role.is_team_lead() {
        return Err(ContractError::Unauthorized);
    }
    let identity = a.identity;
    if !identity.is_consistent() {
        return Err(ContractError::BadArgs("member_id does not match public key".into()));
    }
    let id = project.project_id.as_str();
    if ctx.exists(&keys::member_key(id, &identity.public_key)) || ctx.exists(&keys::member(id, &identity.member_id)) {
        return Err(ContractError::DuplicateKey);
    }
    let member = Member {
        member_id: identity.member_id,
        public_key: identity.public_key,
        role: identity.role,
        org: identity.org.clone(),
    };
    ctx.put(keys::member(id, &member.member_id), &member)?;
    ctx.put(keys::member_key(id, &member.public_key), &member.member_id)?;
    let reg = keys::registry(&identity.member_id);
    if !ctx.exists(&reg) {
        ctx.put(reg, &identity)?;
    }
    ctx.emit(
        "MemberAdded",
        Audience::AllMembers,
        &json!({ "member_id": member.member_id, "role": member.role, "org": member.org }),
    );
    Ok(json!({ "member_id": member.member_id }))
}

fn accept_terms(ctx: &mut TxContext<'_>, a: AcceptArgs) -> Result<Doc, ContractError> {
    let mut project = ctx.project()?;
    match project.status {
        ProjectStatus::Draft => {}
        ProjectStatus::Active | ProjectStatus::Frozen => return Err(ContractError::AlreadyActive),
        ProjectStatus::Closed => return Err(ContractError::ProjectNotActive),
    }
    let member = ctx.submitter_member()?;
    match a.side {
        Side::Team if member.role.is_team_lead() => project.team_accepted = true,
        Side::Client if member.role == Role::Client => project.client_accepted = true,
        _ => return Err(ContractError::WrongSide),
    }
    ctx.emit(
        "TermsAccepted",
        Audience::Parties,
        &json!({ "side": a.side, "member_id": member.member_id }),
    );
    if project.team_accepted && project.client_accepted {
        project.status = ProjectStatus::Active;
        let agreement: Agreement =
            ctx.get(&keys::agreement(&project.project_id))?.ok_or(ContractError::ProjectNotFound)?;
        if agreement.trigger == PaymentTrigger::PerTwoWeeks {
            let cfg = ctx.chain_config()?;
            let due = ctx.block.timestamp.saturating_add(cfg.scale(agreement.period_ms));
            project.next_due = Some(due);
            ctx.put(keys::due(&project.project_id), &json!({ "next_due": due }))?;
        }
        ctx.emit(
            "TermsConsensus",
            Audience::AllMembers,
            &json!({ "project_id": project.project_id, "next_due": project.next_due }),
        );
    }
    ctx.save_project(&project)?;
    Ok(json!({ "status": project.status }))
}

fn amend_agreement(ctx: &mut TxContext<'_>, a: AmendArgs) -> Result<Doc, ContractError> {
    let mut project = ctx.project()?;
    if project.status != ProjectStatus::Draft {
        return Err(ContractError::AgreementFrozen);
    }
    if !ctx.submitter_member()?.role.is_team_lead() {
        return Err(ContractError::Unauthorized);
    }
    a.agreement.validate().map_err(ContractError::InvalidAgreement)?;
    ctx.put(keys::agreement(&project.project_id), &a.agreement)?;
    // changed terms need fresh consent from both sides
    project.team_accepted = false;
    project.client_accepted = false;
    ctx.save_project(&project)?;
    ctx.emit("AgreementAmended", Audience::Parties, &json!({ "project_id": project.project_id }));
    Ok(json!({ "status": project.status }))
}
