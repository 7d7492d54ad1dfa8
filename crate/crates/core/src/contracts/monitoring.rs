//! Continuous monitoring: metric samples and alerts. An alert's record and its
//! notification event are produced by the same transaction, so the record is
//! committed no later than any subscriber can observe the event.

use serde::Deserialize;
use serde_json::json;

use super::keys;
use super::types::{AlertRecord, MetricRecord, Severity};
use super::{args, Audience, ContractError, TxContext};
use crate::canonical::Doc;

pub const CONTRACT: &str = "monitoring";

#[derive(Deserialize)]
struct MetricArgs {
    metric_name: String,
    scaled_value: i64,
    scale: u32,
}

#[derive(Deserialize)]
struct AlertArgs {
    severity: Severity,
    description: String,
}

pub(super) fn execute(ctx: &mut TxContext<'_>, op: &str, a: &Doc) -> Result<Doc, ContractError> {
    match op {
        "record_metric" => {
            let a: MetricArgs = args(a)?;
            let (mut project, _) = ctx.active_project()?;
            if a.metric_name.is_empty() || a.scale > 18 {
                return Err(ContractError::BadArgs("metric name empty or scale above 18".into()));
            }
            project.metric_count += 1;
            let record = MetricRecord {
                seq: project.metric_count,
                metric_name: a.metric_name,
                scaled_value: a.scaled_value,
                scale: a.scale,
                height: ctx.block.height,
                recorded_by: ctx.submitter,
            };
            ctx.put(keys::metric(&project.project_id, record.seq), &record)?;
            ctx.save_project(&project)?;
            Ok(json!({ "seq": record.seq }))
        }
        "raise_alert" => {
            let a: AlertArgs = args(a)?;
            let (mut project, _) = ctx.active_project()?;
            project.alert_count += 1;
            let record = AlertRecord {
                alert_id: project.alert_count,
                severity: a.severity,
                description: a.description,
                raised_by: ctx.submitter,
                height: ctx.block.height,
            };
            ctx.put(keys::alert(&project.project_id, record.alert_id), &record)?;
            ctx.save_project(&project)?;
            ctx.emit(
                "Alert",
                Audience::Developers,
                &json!({
                    "kind": "Monitoring",
                    "alert_id": record.alert_id,
                    "severity": record.severity,
                    "description": record.description,
                }),
            );
            Ok(json!({ "alert_id": record.alert_id }))
        }
        other => Err(ContractError::UnknownOperation(format!("{CONTRACT}.{other}"))),
    }
}
