//! Continuous integration records: stage verdicts and the package content id.

use serde_json::json;

use super::keys;
use super::types::{BuildRecord, BuildStatus, BuildSubmission, Verdict};
use super::{args, Audience, ContractError, TxContext};
use crate::canonical::Doc;

pub const CONTRACT: &str = "cicd";

pub const FAILURE_ALERT: &str = "remove the error in the code and update the repo";

pub(super) fn execute(ctx: &mut TxContext<'_>, op: &str, a: &Doc) -> Result<Doc, ContractError> {
    match op {
        "record_build" => record_build(ctx, args(a)?),
        other => Err(ContractError::UnknownOperation(format!("{CONTRACT}.{other}"))),
    }
}

fn record_build(ctx: &mut TxContext<'_>, b: BuildSubmission) -> Result<Doc, ContractError> {
    let (project, _) = ctx.active_project()?;
    if !keys::valid_build_part(&b.name) || !keys::valid_build_part(&b.version) {
        return Err(ContractError::BadArgs("invalid build name or version".into()));
    }
    let key = keys::build(&project.project_id, &b.name, &b.version);
    if ctx.exists(&key) {
        return Err(ContractError::DuplicateNameVersion);
    }
    let all_pass = b.all_pass();
    if all_pass && b.package_cid.is_none() {
        return Err(ContractError::BadArgs("a passing build must carry a package".into()));
    }
    let status = if all_pass { BuildStatus::Built } else { BuildStatus::Failed };
    let record = BuildRecord {
        name: b.name,
        version: b.version,
        time: b.time,
        date: b.date,
        package_cid: b.package_cid,
        review: b.review,
        unit: b.unit,
        integration: b.integration,
        status,
        gate: None,
        deployed_target: None,
        recorded_height: ctx.block.height,
    };
    ctx.put(key, &record)?;
    if all_pass {
        ctx.emit(
            "BuildRecorded",
            Audience::AllMembers,
            &json!({ "name": record.name, "version": record.version, "package_cid": record.package_cid }),
        );
    } else {
        let failed: Vec<&str> = [("Review", record.review), ("Unit", record.unit), ("Integration", record.integration)]
            .into_iter()
            .filter(|(_, v)| *v == Verdict::Fail)
            .map(|(s, _)| s)
            .collect();
        ctx.emit(
            "Alert",
            Audience::Developers,
            &json!({
                "kind": "BuildFailed",
                "name": record.name,
                "version": record.version,
                "failed_stages": failed,
                "message": FAILURE_ALERT,
            }),
        );
    }
    Ok(json!({ "status": status }))
}
