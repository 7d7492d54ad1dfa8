use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::types::{Agreement, BuildSubmission, PlanKind, Severity, Side};
use super::{cicd, deployment, development, initiation, monitoring, payment, system};
use crate::canonical::{to_doc, Doc};
use crate::castore::ContentId;
use crate::ledger::{sign_transaction, Identity, MemberId, SecretKey, Transaction, TxBody};

/// A contract invocation: `(contract, operation, args)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub contract: String,
    pub operation: String,
    pub args: Doc,
}

impl Call {
    pub fn new(contract: &str, operation: &str, args: Doc) -> Call {
        Call { contract: contract.into(), operation: operation.into(), args }
    }

    /// Signs the call as a transaction for `project_id`.
    pub fn sign(self, project_id: &str, secret: &SecretKey, client_timestamp: u64, nonce: u64) -> Transaction {
        let body = TxBody {
            project_id: project_id.into(),
            contract: self.contract,
            operation: self.operation,
            args: self.args,
            submitter: secret.member_id(),
            client_timestamp,
            nonce,
        };
        sign_transaction(body, secret)
    }

    pub fn register(identity: &Identity) -> Call {
        Call::new(system::IDENTITY, "register", json!({ "identity": to_doc(identity).expect("identity") }))
    }

    pub fn genesis(
        allocations: &BTreeMap<MemberId, u64>,
        identities: &[Identity],
        time_scale_divisor: u64,
    ) -> Call {
        Call::new(
            system::TOKEN,
            "genesis",
            json!({
                "allocations": to_doc(allocations).expect("allocations"),
                "identities": to_doc(identities).expect("identities"),
                "time_scale_divisor": time_scale_divisor,
            }),
        )
    }

    pub fn transfer(to: &MemberId, cents: u64) -> Call {
        Call::new(system::TOKEN, "transfer", json!({ "to": to, "cents": cents }))
    }

    pub fn create_project(name: &str, terms_cid: &ContentId, agreement: &Agreement) -> Call {
        Call::new(
            initiation::CONTRACT,
            "create_project",
            json!({ "name": name, "terms_cid": terms_cid, "agreement": to_doc(agreement).expect("agreement") }),
        )
    }

    pub fn add_member(identity: &Identity) -> Call {
        Call::new(initiation::CONTRACT, "add_member", json!({ "identity": to_doc(identity).expect("identity") }))
    }

    pub fn accept_terms(side: Side) -> Call {
        Call::new(initiation::CONTRACT, "accept_terms", json!({ "side": side }))
    }

    pub fn amend_agreement(agreement: &Agreement) -> Call {
        Call::new(initiation::CONTRACT, "amend_agreement", json!({ "agreement": to_doc(agreement).expect("agreement") }))
    }

    pub fn record_plan(artifact_cid: &ContentId, kind: PlanKind) -> Call {
        Call::new(development::CONTRACT, "record_plan", json!({ "artifact_cid": artifact_cid, "kind": kind }))
    }

    pub fn record_repo_head(commit_cid: &ContentId) -> Call {
        Call::new(development::CONTRACT, "record_repo_head", json!({ "commit_cid": commit_cid }))
    }

    pub fn record_build(build: &BuildSubmission) -> Call {
        Call::new(cicd::CONTRACT, "record_build", to_doc(build).expect("build"))
    }

    pub fn attest_gate(name: &str, version: &str, quality: bool, security: bool, compliance: bool) -> Call {
        Call::new(
            deployment::CONTRACT,
            "attest_gate",
            json!({ "name": name, "version": version, "quality": quality, "security": security, "compliance": compliance }),
        )
    }

    pub fn deploy(name: &str, version: &str, target: &str) -> Call {
        Call::new(deployment::CONTRACT, "deploy", json!({ "name": name, "version": version, "target": target }))
    }

    pub fn record_metric(metric_name: &str, scaled_value: i64, scale: u32) -> Call {
        Call::new(
            monitoring::CONTRACT,
            "record_metric",
            json!({ "metric_name": metric_name, "scaled_value": scaled_value, "scale": scale }),
        )
    }

    pub fn raise_alert(severity: Severity, description: &str) -> Call {
        Call::new(monitoring::CONTRACT, "raise_alert", json!({ "severity": severity, "description": description }))
    }

    pub fn pay_installment() -> Call {
        Call::new(payment::CONTRACT, "pay_installment", json!({}))
    }
}
