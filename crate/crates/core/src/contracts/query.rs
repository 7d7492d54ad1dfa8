//! Typed reads over committed state.

use serde::de::DeserializeOwned;

use super::keys;
use super::types::*;
use super::TokenBalance;
use crate::canonical::from_doc;
use crate::ledger::{Identity, MemberId, StateStore};

fn typed<T: DeserializeOwned>(state: &StateStore, key: &str) -> Option<T> {
    state.get(key).and_then(|d| from_doc(d).ok())
}

fn typed_prefix<T: DeserializeOwned>(state: &StateStore, prefix: &str) -> Vec<T> {
    state.scan_prefix(prefix).filter_map(|(_, d)| from_doc(d).ok()).collect()
}

pub fn project(state: &StateStore, id: &str) -> Option<Project> {
    typed(state, &keys::project(id))
}

pub fn agreement(state: &StateStore, id: &str) -> Option<Agreement> {
    typed(state, &keys::agreement(id))
}

pub fn member(state: &StateStore, id: &str, member: &MemberId) -> Option<Member> {
    typed(state, &keys::member(id, member))
}

pub fn members(state: &StateStore, id: &str) -> Vec<Member> {
    typed_prefix(state, &keys::member_prefix(id))
}

pub fn build(state: &StateStore, id: &str, name: &str, version: &str) -> Option<BuildRecord> {
    typed(state, &keys::build(id, name, version))
}

pub fn plans(state: &StateStore, id: &str) -> Vec<PlanRecord> {
    typed_prefix(state, &keys::plan_prefix(id))
}

pub fn heads(state: &StateStore, id: &str) -> Vec<RepoHead> {
    typed_prefix(state, &keys::head_prefix(id))
}

pub fn latest_head(state: &StateStore, id: &str) -> Option<RepoHead> {
    let p = project(state, id)?;
    typed(state, &keys::head(id, p.head_seq))
}

pub fn metrics(state: &StateStore, id: &str) -> Vec<MetricRecord> {
    typed_prefix(state, &keys::metric_prefix(id))
}

pub fn alerts(state: &StateStore, id: &str) -> Vec<AlertRecord> {
    typed_prefix(state, &keys::alert_prefix(id))
}

pub fn payments(state: &StateStore, id: &str) -> Vec<PaymentReceipt> {
    typed_prefix(state, &keys::payment_prefix(id))
}

pub fn token_balance(state: &StateStore, member: &MemberId) -> u64 {
    typed::<TokenBalance>(state, &keys::token(member)).map(|b| b.cents).unwrap_or(0)
}

pub fn total_supply(state: &StateStore) -> u64 {
    state
        .scan_prefix("token/")
        .filter_map(|(_, d)| from_doc::<TokenBalance>(d).ok())
        .map(|b| b.cents)
        .sum()
}

pub fn identity(state: &StateStore, member: &MemberId) -> Option<Identity> {
    typed(state, &keys::registry(member))
}

pub fn chain_config(state: &StateStore) -> Option<ChainConfig> {
    typed(state, keys::CHAIN_CONFIG)
}
