//! Payments: installment collection, due-date scheduling and the freeze on
//! non-payment.
//!
//! Deadlines are block times. Agreement durations are divided by the chain's
//! `time_scale_divisor` before use, so test networks can compress a two-week
//! period into seconds without changing contract code.

use serde_json::json;

use super::keys;
use super::types::{Agreement, PaymentReceipt, PaymentTrigger, ProjectStatus};
use super::{Audience, ContractError, TxContext};
use crate::canonical::Doc;
use crate::ledger::Role;

pub const CONTRACT: &str = "payment";

pub(super) fn execute(ctx: &mut TxContext<'_>, op: &str, _a: &Doc) -> Result<Doc, ContractError> {
    match op {
        "pay_installment" => pay_installment(ctx),
        other => Err(ContractError::UnknownOperation(format!("{CONTRACT}.{other}"))),
    }
}

fn pay_installment(ctx: &mut TxContext<'_>) -> Result<Doc, ContractError> {
    let mut project = ctx.project()?;
    let member = ctx.submitter_member()?;
    if member.role != Role::Client {
        return Err(ContractError::Unauthorized);
    }
    if !matches!(project.status, ProjectStatus::Active | ProjectStatus::Frozen) {
        return Err(ContractError::NothingDue);
    }
    let Some(due_was) = project.next_due else {
        return Err(ContractError::NothingDue);
    };
    let agreement: Agreement =
        ctx.get(&keys::agreement(&project.project_id))?.ok_or(ContractError::ProjectNotFound)?;
    let remaining = agreement.project_budget_cents.saturating_sub(project.paid_cents);
    if remaining == 0 {
        return Err(ContractError::NothingDue);
    }
    let amount = agreement.installment_cents.min(remaining);
    let owner = project.owner;
    ctx.transfer(&member.member_id, &owner, amount)?;

    project.paid_cents += amount;
    project.payment_count += 1;
    let cfg = ctx.chain_config()?;
    let exhausted = project.paid_cents >= agreement.project_budget_cents;
    project.next_due = match agreement.trigger {
        PaymentTrigger::PerTwoWeeks if !exhausted => Some(due_was.saturating_add(cfg.scale(agreement.period_ms))),
        PaymentTrigger::PerTwoWeeks => None,
        PaymentTrigger::PerIteration => {
            project.dues_outstanding = project.dues_outstanding.saturating_sub(1);
            if project.dues_outstanding > 0 && !exhausted {
                Some(ctx.block.timestamp.saturating_add(cfg.scale(agreement.grace_ms)))
            } else {
                None
            }
        }
    };
    if exhausted {
        project.dues_outstanding = 0;
    }
    match project.next_due {
        Some(due) => ctx.put(keys::due(&project.project_id), &json!({ "next_due": due }))?,
        None => ctx.delete(keys::due(&project.project_id)),
    }
    let unfroze = project.status == ProjectStatus::Frozen;
    if unfroze {
        project.status = ProjectStatus::Active;
    }
    let receipt = PaymentReceipt {
        seq: project.payment_count,
        amount_cents: amount,
        from: member.member_id,
        to: owner,
        height: ctx.block.height,
        block_timestamp: ctx.block.timestamp,
        paid_total_cents: project.paid_cents,
        next_due: project.next_due,
    };
    ctx.put(keys::payment(&project.project_id, receipt.seq), &receipt)?;
    ctx.save_project(&project)?;
    ctx.emit("PaymentMade", Audience::Parties, &receipt);
    if unfroze {
        ctx.emit("ProjectUnfrozen", Audience::AllMembers, &json!({ "project_id": project.project_id }));
    }
    crate::canonical::to_doc(&receipt).map_err(|e| ContractError::BadArgs(e.to_string()))
}

/// Freezes `project_id` if its installment is overdue beyond the grace period.
pub(super) fn on_block(ctx: &mut TxContext<'_>, project_id: &str) -> Result<(), ContractError> {
    let mut project = ctx
        .get::<super::Project>(&keys::project(project_id))?
        .ok_or(ContractError::ProjectNotFound)?;
    let Some(next_due) = project.next_due else {
        ctx.delete(keys::due(project_id));
        return Ok(());
    };
    if project.status != ProjectStatus::Active {
        return Ok(());
    }
    let agreement: Agreement = ctx.get(&keys::agreement(project_id))?.ok_or(ContractError::ProjectNotFound)?;
    let grace = ctx.chain_config()?.scale(agreement.grace_ms);
    let deadline = next_due.saturating_add(grace);
    if ctx.block.timestamp > deadline {
        project.status = ProjectStatus::Frozen;
        ctx.save_project(&project)?;
        ctx.emit(
            "ProjectFrozen",
            Audience::AllMembers,
            &json!({
                "project_id": project_id,
                "next_due": next_due,
                "deadline": deadline,
                "block_timestamp": ctx.block.timestamp,
                "action": agreement.nonpayment_action,
            }),
        );
    }
    Ok(())
}
