//! Continuous development: planning artifacts and repository heads. Only
//! content ids go on chain; the bytes live in the content store.

use serde::Deserialize;
use serde_json::json;

use super::keys;
use super::types::{PlanKind, PlanRecord, RepoHead};
use super::{args, Audience, ContractError, TxContext};
use crate::canonical::Doc;
use crate::castore::ContentId;

pub const CONTRACT: &str = "development";

#[derive(Deserialize)]
struct PlanArgs {
    artifact_cid: String,
    kind: PlanKind,
}

#[derive(Deserialize)]
struct HeadArgs {
    commit_cid: String,
}

pub(super) fn execute(ctx: &mut TxContext<'_>, op: &str, a: &Doc) -> Result<Doc, ContractError> {
    match op {
        "record_plan" => {
            let a: PlanArgs = args(a)?;
            let (mut project, _) = ctx.active_project()?;
            let artifact_cid = ContentId::parse(&a.artifact_cid).map_err(|_| ContractError::MalformedCid)?;
            project.plan_count += 1;
            let record = PlanRecord {
                record_id: project.plan_count,
                artifact_cid,
                kind: a.kind,
                recorded_by: ctx.submitter,
                height: ctx.block.height,
            };
            ctx.put(keys::plan(&project.project_id, record.record_id), &record)?;
            ctx.save_project(&project)?;
            ctx.emit(
                "PlanRecorded",
                Audience::AllMembers,
                &json!({ "record_id": record.record_id, "artifact_cid": artifact_cid, "kind": a.kind }),
            );
            Ok(json!({ "record_id": record.record_id }))
        }
        "record_repo_head" => {
            let a: HeadArgs = args(a)?;
            let (mut project, _) = ctx.active_project()?;
            let commit_cid = ContentId::parse(&a.commit_cid).map_err(|_| ContractError::MalformedCid)?;
            project.head_seq += 1;
            let head = RepoHead {
                head_seq: project.head_seq,
                commit_cid,
                pushed_by: ctx.submitter,
                height: ctx.block.height,
            };
            ctx.put(keys::head(&project.project_id, head.head_seq), &head)?;
            ctx.save_project(&project)?;
            ctx.emit(
                "RepoHeadUpdated",
                Audience::Developers,
                &json!({ "project_id": project.project_id, "head_seq": head.head_seq, "commit_cid": commit_cid }),
            );
            Ok(json!({ "head_seq": head.head_seq }))
        }
        other => Err(ContractError::UnknownOperation(format!("{CONTRACT}.{other}"))),
    }
}
