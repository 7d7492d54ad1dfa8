//! Continuous deployment: the quality/security/compliance gate and the
//! `Deployed` transition.

use serde::Deserialize;
use serde_json::json;

use super::keys;
use super::types::{Agreement, BuildRecord, BuildStatus, GateFlags, PaymentTrigger, Project};
use super::{args, Audience, ContractError, TxContext};
use crate::canonical::Doc;
use crate::ledger::Role;

pub const CONTRACT: &str = "deployment";

#[derive(Deserialize)]
struct GateArgs {
    name: String,
    version: String,
    quality: bool,
    security: bool,
    compliance: bool,
}

#[derive(Deserialize)]
struct DeployArgs {
    name: String,
    version: String,
    target: String,
}

pub(super) fn execute(ctx: &mut TxContext<'_>, op: &str, a: &Doc) -> Result<Doc, ContractError> {
    match op {
        "attest_gate" => attest_gate(ctx, args(a)?),
        "deploy" => deploy(ctx, args(a)?),
        other => Err(ContractError::UnknownOperation(format!("{CONTRACT}.{other}"))),
    }
}

fn load_build(ctx: &TxContext<'_>, project: &Project, name: &str, version: &str) -> Result<(String, BuildRecord), ContractError> {
    let key = keys::build(&project.project_id, name, version);
    let build = ctx.get::<BuildRecord>(&key)?.ok_or(ContractError::BuildNotFound)?;
    Ok((key, build))
}

fn attest_gate(ctx: &mut TxContext<'_>, a: GateArgs) -> Result<Doc, ContractError> {
    let (project, member) = ctx.active_project()?;
    if !matches!(member.role, Role::Manager | Role::Tester) {
        return Err(ContractError::Unauthorized);
    }
    let (key, mut build) = load_build(ctx, &project, &a.name, &a.version)?;
    if build.status != BuildStatus::Built {
        return Err(ContractError::BuildNotBuilt);
    }
    let flags = GateFlags { quality: a.quality, security: a.security, compliance: a.compliance, attester: ctx.submitter };
    if flags.all_true() && build.stages_pass() {
        build.status = BuildStatus::GatePassed;
    }
    build.gate = Some(flags.clone());
    ctx.put(key, &build)?;
    ctx.emit(
        "GateAttested",
        Audience::AllMembers,
        &json!({ "name": build.name, "version": build.version, "flags": flags, "status": build.status }),
    );
    Ok(json!({ "status": build.status }))
}

fn deploy(ctx: &mut TxContext<'_>, a: DeployArgs) -> Result<Doc, ContractError> {
    let (mut project, _) = ctx.active_project()?;
    let (key, mut build) = load_build(ctx, &project, &a.name, &a.version)?;
    let gate_ok = build.gate.as_ref().is_some_and(GateFlags::all_true);
    if build.status != BuildStatus::GatePassed || !gate_ok || !build.stages_pass() {
        return Err(ContractError::GateNotPassed);
    }
    build.status = BuildStatus::Deployed;
    build.deployed_target = Some(a.target.clone());
    ctx.put(key, &build)?;

    project.iteration_counter += 1;
    let agreement: Agreement = ctx.get(&keys::agreement(&project.project_id))?.ok_or(ContractError::ProjectNotFound)?;
    if agreement.trigger == PaymentTrigger::PerIteration {
        // Each completed iteration owes one installment, up to the budget.
        let committed = project
            .paid_cents
            .saturating_add(project.dues_outstanding.saturating_mul(agreement.installment_cents));
        if committed < agreement.project_budget_cents {
            project.dues_outstanding += 1;
            if project.next_due.is_none() {
                let cfg = ctx.chain_config()?;
                let due = ctx.block.timestamp.saturating_add(cfg.scale(agreement.grace_ms));
                project.next_due = Some(due);
                ctx.put(keys::due(&project.project_id), &json!({ "next_due": due }))?;
            }
        }
    }
    ctx.save_project(&project)?;
    ctx.emit(
        "Deployed",
        Audience::AllMembers,
        &json!({
            "name": build.name,
            "version": build.version,
            "target": a.target,
            "iteration": project.iteration_counter,
            "next_due": project.next_due,
        }),
    );
    Ok(json!({ "status": BuildStatus::Deployed, "iteration": project.iteration_counter }))
}
