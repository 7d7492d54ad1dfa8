use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use serde_json::json;

use super::rpc::{self, BlockView, NodeInfo, StateDigest};
use crate::canonical::{from_doc, to_doc, Doc};
use crate::castore::{CaStore, ContentId, StructuredObject};
use crate::client::{ChainAccess, ClientError};
use crate::consensus::transport::{Conn, FrameReader, TrafficCounters, Transport};
use crate::consensus::wire::{Frame, MessageType, RpcRequest, RpcResponse, Subscription, WireError};
use crate::consensus::{Event, TxLocation};
use crate::contracts::Audience;
use crate::ledger::{Digest, Transaction, TxRejection};

/// Client for one peer's RPC endpoint. One connection, reopened on failure;
/// every call is bounded by `timeout`.
pub struct NodeClient {
    transport: Arc<dyn Transport>,
    endpoint: String,
    conn: Mutex<Option<Conn>>,
    next_id: AtomicU64,
    timeout: Duration,
    counters: Arc<TrafficCounters>,
}

fn rejection(code: &str) -> Option<TxRejection> {
    [TxRejection::UnknownSubmitter, TxRejection::BadSignature, TxRejection::ReplayedNonce, TxRejection::QueueFull]
        .into_iter()
        .find(|r| r.code() == code)
}

fn wire_err(e: WireError) -> ClientError {
    if e.is_timeout() {
        ClientError::Timeout("rpc response".into())
    } else {
        ClientError::Unavailable(e.to_string())
    }
}

fn malformed(e: impl std::fmt::Display) -> ClientError {
    ClientError::Remote { code: "Malformed".into(), message: e.to_string() }
}

impl NodeClient {
    pub fn new(transport: Arc<dyn Transport>, endpoint: &str) -> NodeClient {
        NodeClient {
            transport,
            endpoint: endpoint.to_string(),
            conn: Mutex::new(None),
            next_id: AtomicU64::new(1),
            timeout: Duration::from_secs(30),
            counters: TrafficCounters::new(),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> NodeClient {
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn traffic(&self) -> Arc<TrafficCounters> {
        self.counters.clone()
    }

    /// One request, one response. Transport failures drop the connection so
    /// the next call reconnects.
    pub fn call(&self, method: &str, params: Doc) -> Result<Doc, ClientError> {
        self.call_with_timeout(method, params, self.timeout)
    }

    fn call_with_timeout(&self, method: &str, params: Doc, timeout: Duration) -> Result<Doc, ClientError> {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let frame = Frame::encode(MessageType::RpcRequest, &RpcRequest { id, method: method.into(), params }).map_err(malformed)?;
        let mut slot = self.conn.lock();
        if slot.is_none() {
            let conn = self
                .transport
                .connect(&self.endpoint, self.counters.clone())
                .map_err(|e| ClientError::Unavailable(format!("{}: {e}", self.endpoint)))?;
            *slot = Some(conn);
        }
        let conn = slot.as_mut().expect("connected above");
        let reply = conn
            .reader
            .set_timeout(Some(timeout))
            .map_err(WireError::from)
            .and_then(|_| conn.call(&frame))
            .and_then(|f| f.decode::<RpcResponse>(MessageType::RpcResponse));
        let resp = match reply {
            Ok(r) if r.id == id => r,
            Ok(_) => {
                *slot = None;
                return Err(ClientError::Unavailable("response id mismatch".into()));
            }
            Err(e) => {
                *slot = None;
                return Err(wire_err(e));
            }
        };
        match (resp.result, resp.error) {
            (_, Some(err)) => Err(ClientError::Remote { code: err.code, message: err.message }),
            (Some(r), None) => Ok(r),
            (None, None) => Err(malformed("response carries neither result nor error")),
        }
    }

    fn call_typed<T: DeserializeOwned>(&self, method: &str, params: Doc) -> Result<T, ClientError> {
        from_doc(&self.call(method, params)?).map_err(malformed)
    }

    fn call_opt<T: DeserializeOwned>(&self, method: &str, params: Doc) -> Result<Option<T>, ClientError> {
        match self.call(method, params) {
            Ok(d) => from_doc(&d).map(Some).map_err(malformed),
            Err(ClientError::Remote { code, .. }) if code == rpc::NOT_FOUND => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn query_block(&self, height: u64) -> Result<Option<BlockView>, ClientError> {
        self.call_opt(rpc::QUERY_BLOCK, json!({ "height": height }))
    }

    pub fn query_tx(&self, tx_id: &Digest) -> Result<Option<TxLocation>, ClientError> {
        self.call_opt(rpc::QUERY_TX, json!({ "tx_id": tx_id }))
    }

    pub fn query_prefix(&self, prefix: &str) -> Result<Vec<(String, Doc)>, ClientError> {
        self.call_typed(rpc::QUERY_PREFIX, json!({ "prefix": prefix }))
    }

    pub fn state_digest(&self) -> Result<StateDigest, ClientError> {
        self.call_typed(rpc::STATE_DIGEST, json!({}))
    }

    pub fn node_info(&self) -> Result<NodeInfo, ClientError> {
        self.call_typed(rpc::NODE_INFO, json!({}))
    }

    /// Stores a whole blob on the peer.
    pub fn castore_put(&self, bytes: &[u8]) -> Result<ContentId, ClientError> {
        let r = self.call(rpc::CASTORE_PUT, json!({ "data": rpc::b64(bytes), "raw": false }))?;
        from_doc(&r["cid"]).map_err(malformed)
    }

    /// Reads a whole blob, reassembled and verified by the peer, and checks
    /// it again here.
    pub fn castore_get(&self, cid: &ContentId) -> Result<Vec<u8>, ClientError> {
        let bytes = self.get_raw_or_blob(cid, false)?;
        if ContentId::of(&bytes) == *cid {
            return Ok(bytes);
        }
        self.verify_blob(cid, bytes)
    }

    fn verify_blob(&self, cid: &ContentId, bytes: Vec<u8>) -> Result<Vec<u8>, ClientError> {
        let manifest = self.get_raw_or_blob(cid, true)?;
        match StructuredObject::decode(&manifest) {
            Some(StructuredObject::BlobManifest(m)) if m.blob_id == ContentId::of(&bytes) => Ok(bytes),
            _ => Err(ClientError::Remote { code: "IntegrityFailure".into(), message: format!("{cid} does not match") }),
        }
    }

    fn get_raw_or_blob(&self, cid: &ContentId, raw: bool) -> Result<Vec<u8>, ClientError> {
        let r = self.call(rpc::CASTORE_GET, json!({ "cid": cid, "raw": raw }))?;
        rpc::unb64(r["data"].as_str().unwrap_or_default()).map_err(|e| malformed(e.message))
    }

    pub fn castore_pin(&self, cid: &ContentId) -> Result<(), ClientError> {
        self.call(rpc::CASTORE_PIN, json!({ "cid": cid })).map(|_| ())
    }

    /// Copies `root` and everything it references from the local store to
    /// the peer, leaves first, skipping objects the peer already has.
    pub fn push_closure(&self, local: &CaStore, root: &ContentId) -> Result<usize, ClientError> {
        let mut sent = 0;
        let mut stack = vec![(*root, false)];
        while let Some((cid, expanded)) = stack.pop() {
            if self.call_typed::<bool>(rpc::CASTORE_HAS, json!({ "cid": cid }))? {
                continue;
            }
            let bytes = local.get_object(&cid).map_err(|e| ClientError::Remote { code: e.code().into(), message: e.to_string() })?;
            let refs = StructuredObject::decode(&bytes).map(|o| o.references()).unwrap_or_default();
            if !expanded && !refs.is_empty() {
                stack.push((cid, true));
                stack.extend(refs.into_iter().map(|c| (c, false)));
                continue;
            }
            let r = self.call(rpc::CASTORE_PUT, json!({ "data": rpc::b64(&bytes), "raw": true }))?;
            let stored: ContentId = from_doc(&r["cid"]).map_err(malformed)?;
            if stored != cid {
                return Err(ClientError::Remote { code: "IntegrityFailure".into(), message: format!("{cid} stored as {stored}") });
            }
            sent += 1;
        }
        Ok(sent)
    }

    /// Copies `root` and everything it references from the peer into the
    /// local store, verifying every object.
    pub fn fetch_closure(&self, local: &CaStore, root: &ContentId) -> Result<usize, ClientError> {
        let mut fetched = 0;
        let mut stack = vec![*root];
        while let Some(cid) = stack.pop() {
            if local.contains(&cid) {
                continue;
            }
            let bytes = self.get_raw_or_blob(&cid, true)?;
            if let Some(obj) = StructuredObject::decode(&bytes) {
                stack.extend(obj.references());
            }
            local.put_verified(&cid, &bytes).map_err(|e| ClientError::Remote { code: e.code().into(), message: e.to_string() })?;
            fetched += 1;
        }
        Ok(fetched)
    }

    /// Opens a separate connection streaming committed events.
    pub fn subscribe_events(&self, from_height: u64, audience: Option<Audience>) -> Result<EventStream, ClientError> {
        let mut conn = self
            .transport
            .connect(&self.endpoint, self.counters.clone())
            .map_err(|e| ClientError::Unavailable(e.to_string()))?;
        let sub = Frame::encode(MessageType::EventSub, &Subscription::Events { from_height, audience }).map_err(malformed)?;
        conn.writer.write(&sub).map_err(wire_err)?;
        let closer = conn.closer();
        let (reader, _, _) = conn.split();
        Ok(EventStream { reader, closer })
    }
}

/// Events pushed by a peer after they commit.
pub struct EventStream {
    reader: FrameReader,
    closer: crate::consensus::transport::Closer,
}

impl EventStream {
    /// Next event, or `None` if nothing arrives within `timeout`.
    pub fn next_timeout(&mut self, timeout: Duration) -> Result<Option<Event>, ClientError> {
        self.reader.set_timeout(Some(timeout)).map_err(|e| ClientError::Unavailable(e.to_string()))?;
        match self.reader.read() {
            Ok(Some(f)) => f.decode(MessageType::Event).map(Some).map_err(malformed),
            Ok(None) => Err(ClientError::Unavailable("event stream closed".into())),
            Err(e) if e.is_timeout() => Ok(None),
            Err(e) => Err(wire_err(e)),
        }
    }
}

impl Drop for EventStream {
    fn drop(&mut self) {
        self.closer.close();
    }
}

impl ChainAccess for NodeClient {
    fn submit(&self, tx: &Transaction) -> Result<(), ClientError> {
        let params = json!({ "tx": to_doc(tx).map_err(malformed)? });
        match self.call(rpc::SUBMIT_TX, params) {
            Ok(_) => Ok(()),
            Err(ClientError::Remote { code, message }) => match rejection(&code) {
                Some(r) => Err(ClientError::Rejected(r)),
                None if code == rpc::UNAVAILABLE => Err(ClientError::Unavailable(message)),
                None => Err(ClientError::Remote { code, message }),
            },
            Err(e) => Err(e),
        }
    }

    fn wait_tx(&self, tx_id: &Digest, timeout: Duration) -> Result<TxLocation, ClientError> {
        let params = json!({ "tx_id": tx_id, "timeout_ms": timeout.as_millis() as u64 });
        let doc = self
            .call_with_timeout(rpc::WAIT_TX, params, timeout + Duration::from_secs(5))
            .map_err(|e| match e {
                ClientError::Remote { code, .. } if code == rpc::TIMEOUT => ClientError::Timeout(tx_id.to_hex()),
                other => other,
            })?;
        from_doc(&doc).map_err(malformed)
    }

    fn query_state(&self, key: &str) -> Result<Option<Doc>, ClientError> {
        self.call_opt(rpc::QUERY_STATE, json!({ "key": key }))
    }

    fn events_since(&self, from_height: u64, audience: Option<Audience>) -> Result<Vec<Event>, ClientError> {
        self.call_typed(rpc::QUERY_EVENTS, json!({ "since": from_height, "audience": audience }))
    }

    fn head_height(&self) -> Result<u64, ClientError> {
        self.call_typed(rpc::HEAD_HEIGHT, json!({}))
    }
}
