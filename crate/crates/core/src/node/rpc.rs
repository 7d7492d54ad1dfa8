//! RPC vocabulary shared by the node server and [`super::NodeClient`].
//!
//! Requests and responses travel as `RpcRequest`/`RpcResponse` frames on the
//! peer's endpoint. Every request gets exactly one response carrying either a
//! result document or `{code, message}`.
//!
//! | method          | params                         | result                        |
//! |-----------------|--------------------------------|-------------------------------|
//! | `submit_tx`     | `{tx}`                         | `{tx_id}`                     |
//! | `wait_tx`       | `{tx_id, timeout_ms}`          | tx location                   |
//! | `query_state`   | `{key}`                        | document                      |
//! | `query_prefix`  | `{prefix}`                     | `[[key, document], ...]`      |
//! | `query_block`   | `{height}`                     | `{block, results}`            |
//! | `query_tx`      | `{tx_id}`                      | tx location                   |
//! | `query_events`  | `{since, audience}`            | `[event, ...]`                |
//! | `castore_put`   | `{data, raw}` (base64 data)    | `{cid}`                       |
//! | `castore_get`   | `{cid, raw}`                   | `{data}`                      |
//! | `castore_has`   | `{cid}`                        | bool                          |
//! | `castore_pin`   | `{cid}`                        | `{}`                          |
//! | `head_height`   | `{}`                           | height                        |
//! | `state_digest`  | `{}`                           | `{height, digest}`            |
//! | `node_info`     | `{}`                           | `{name, role, height, ...}`   |
//!
//! With `raw` set, castore calls move single stored objects as-is; otherwise
//! they move whole blobs, chunked and reassembled on the server.

use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::canonical::{from_doc, Doc};
use crate::consensus::wire::RpcError;
use crate::consensus::{BlockOutcome, TxResult};
use crate::ledger::Block;

pub const SUBMIT_TX: &str = "submit_tx";
pub const WAIT_TX: &str = "wait_tx";
pub const QUERY_STATE: &str = "query_state";
pub const QUERY_PREFIX: &str = "query_prefix";
pub const QUERY_BLOCK: &str = "query_block";
pub const QUERY_TX: &str = "query_tx";
pub const QUERY_EVENTS: &str = "query_events";
pub const CASTORE_PUT: &str = "castore_put";
pub const CASTORE_GET: &str = "castore_get";
pub const CASTORE_HAS: &str = "castore_has";
pub const CASTORE_PIN: &str = "castore_pin";
pub const HEAD_HEIGHT: &str = "head_height";
pub const STATE_DIGEST: &str = "state_digest";
pub const NODE_INFO: &str = "node_info";

pub const METHOD_NOT_FOUND: &str = "MethodNotFound";
pub const BAD_PARAMS: &str = "BadParams";
pub const NOT_FOUND: &str = "NotFound";
pub const TIMEOUT: &str = "Timeout";
pub const UNAVAILABLE: &str = "Unavailable";

/// A committed block with its validity bitmap and per-tx results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockView {
    pub block: Block,
    pub results: Vec<TxResult>,
}

impl BlockView {
    pub fn new(block: Block, outcome: &BlockOutcome) -> BlockView {
        BlockView { block, results: outcome.results.clone() }
    }

    pub fn validity(&self) -> Vec<bool> {
        self.results.iter().map(|r| r.valid).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDigest {
    pub height: u64,
    pub digest: crate::ledger::Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub name: String,
    pub role: String,
    pub height: u64,
    pub orderer_public_key: crate::ledger::PublicKey,
}

pub fn params<T: DeserializeOwned>(doc: &Doc) -> Result<T, RpcError> {
    from_doc(doc).map_err(|e| RpcError::new(BAD_PARAMS, e.to_string()))
}

pub fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub fn unb64(s: &str) -> Result<Vec<u8>, RpcError> {
    base64::engine::general_purpose::STANDARD.decode(s).map_err(|e| RpcError::new(BAD_PARAMS, e.to_string()))
}
