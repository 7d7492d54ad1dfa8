//! Chain-level contracts: identity enrollment and the stable token.

use std::collections::BTreeMap;

use serde::Deserialize;
use serde_json::json;

use super::keys;
use super::types::ChainConfig;
use super::{args, Audience, ContractError, TxContext};
use crate::canonical::Doc;
use crate::ledger::{member_id_of, Identity, MemberId, PublicKey};

pub const IDENTITY: &str = "identity";
pub const TOKEN: &str = "token";

#[derive(Deserialize)]
struct RegisterArgs {
    identity: Identity,
}

pub(super) fn identity(ctx: &mut TxContext<'_>, op: &str, a: &Doc) -> Result<Doc, ContractError> {
    match op {
        "register" => {
            let RegisterArgs { identity } = args(a)?;
            if !identity.is_consistent() || identity.member_id != ctx.submitter {
                return Err(ContractError::BadArgs("identity does not match submitter key".into()));
            }
            let key = keys::registry(&identity.member_id);
            if ctx.exists(&key) {
                return Err(ContractError::DuplicateKey);
            }
            ctx.put(key, &identity)?;
            ctx.emit("IdentityRegistered", Audience::AllMembers, &json!({ "member_id": identity.member_id }));
            Ok(json!({ "member_id": identity.member_id }))
        }
        other => Err(ContractError::UnknownOperation(format!("{IDENTITY}.{other}"))),
    }
}

#[derive(Deserialize)]
struct TransferArgs {
    to: MemberId,
    cents: u64,
}

#[derive(Deserialize)]
struct GenesisArgs {
    allocations: BTreeMap<MemberId, u64>,
    #[serde(default)]
    identities: Vec<Identity>,
    time_scale_divisor: u64,
}

pub(super) fn token(
    ctx: &mut TxContext<'_>,
    op: &str,
    a: &Doc,
    orderer_key: &PublicKey,
) -> Result<Doc, ContractError> {
    match op {
        "transfer" => {
            let TransferArgs { to, cents } = args(a)?;
            let from = ctx.submitter;
            ctx.transfer(&from, &to, cents)?;
            if cents > 0 && from != to {
                ctx.emit("TokenTransferred", Audience::Parties, &json!({ "from": from, "to": to, "cents": cents }));
            }
            Ok(json!({ "balance": ctx.balance(&from)? }))
        }
        "genesis" => {
            let orderer = member_id_of(orderer_key);
            if ctx.block.height != 0 || ctx.submitter != orderer || ctx.exists(keys::CHAIN_CONFIG) {
                return Err(ContractError::Unauthorized);
            }
            let g: GenesisArgs = args(a)?;
            if g.time_scale_divisor == 0 {
                return Err(ContractError::BadArgs("time_scale_divisor must be at least 1".into()));
            }
            ctx.put(
                keys::CHAIN_CONFIG.to_string(),
                &ChainConfig { orderer, time_scale_divisor: g.time_scale_divisor },
            )?;
            for id in &g.identities {
                if !id.is_consistent() {
                    return Err(ContractError::BadArgs(format!("inconsistent identity {}", id.member_id)));
                }
                ctx.put(keys::registry(&id.member_id), id)?;
            }
            for (member, cents) in &g.allocations {
                ctx.set_balance(member, *cents)?;
            }
            let supply = g
                .allocations
                .values()
                .try_fold(0u64, |acc, c| acc.checked_add(*c))
                .ok_or_else(|| ContractError::BadArgs("token supply overflows".into()))?;
            Ok(json!({ "supply": supply }))
        }
        other => Err(ContractError::UnknownOperation(format!("{TOKEN}.{other}"))),
    }
}
