//! State key namespace.

use crate::ledger::{MemberId, PublicKey};

pub const CHAIN_CONFIG: &str = "config/chain";

pub fn project(id: &str) -> String {
    format!("project/{id}")
}

pub fn agreement(id: &str) -> String {
    format!("project/{id}/agreement")
}

pub fn member(id: &str, member: &MemberId) -> String {
    format!("project/{id}/member/{member}")
}

pub fn member_prefix(id: &str) -> String {
    format!("project/{id}/member/")
}

pub fn member_key(id: &str, key: &PublicKey) -> String {
    format!("project/{id}/key/{key}")
}

pub fn build(id: &str, name: &str, version: &str) -> String {
    format!("project/{id}/build/{name}@{version}")
}

pub fn build_prefix(id: &str) -> String {
    format!("project/{id}/build/")
}

// Sequenced records are zero padded so that key order is insertion order.

pub fn plan(id: &str, seq: u64) -> String {
    format!("project/{id}/plan/{seq:010}")
}

pub fn plan_prefix(id: &str) -> String {
    format!("project/{id}/plan/")
}

pub fn head(id: &str, seq: u64) -> String {
    format!("project/{id}/head/{seq:010}")
}

pub fn head_prefix(id: &str) -> String {
    format!("project/{id}/head/")
}

pub fn metric(id: &str, seq: u64) -> String {
    format!("project/{id}/metric/{seq:010}")
}

pub fn metric_prefix(id: &str) -> String {
    format!("project/{id}/metric/")
}

pub fn alert(id: &str, seq: u64) -> String {
    format!("project/{id}/alert/{seq:010}")
}

pub fn alert_prefix(id: &str) -> String {
    format!("project/{id}/alert/")
}

pub fn payment(id: &str, seq: u64) -> String {
    format!("project/{id}/payment/{seq:010}")
}

pub fn payment_prefix(id: &str) -> String {
    format!("project/{id}/payment/")
}

pub fn token(member: &MemberId) -> String {
    format!("token/{member}")
}

pub fn registry(member: &MemberId) -> String {
    format!("registry/{member}")
}

pub fn nonce(project_id: &str, member: &MemberId, nonce: u64) -> String {
    format!("nonce/{member}/{project_id}/{nonce}")
}

pub const DUE_PREFIX: &str = "duelist/";

pub fn due(id: &str) -> String {
    format!("{DUE_PREFIX}{id}")
}

/// Project ids become key path segments, so they are restricted.
pub fn valid_project_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'))
}

/// Build names and versions share one key segment `name@version`.
pub fn valid_build_part(s: &str) -> bool {
    !s.is_empty() && s.len() <= 128 && !s.contains(['/', '@']) && !s.chars().any(char::is_control)
}
