use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex, RwLock};
use serde::Deserialize;
use serde_json::json;

use super::rpc::{self, params, BlockView, NodeInfo, StateDigest};
use super::server::{accept_loop, Lifecycle};
use super::storage::{BlockLog, DiskCounters};
use super::NodeError;
use crate::canonical::{to_doc, Doc};
use crate::castore::{CaStore, ContentId};
use crate::consensus::transport::{Conn, FrameWriter, TrafficCounters, Transport};
use crate::consensus::wire::{Ack, Frame, MessageType, RpcError, RpcRequest, RpcResponse, Subscription};
use crate::consensus::Replica;
use crate::contracts::Audience;
use crate::ledger::{Block, Digest, PublicKey, Transaction};

pub struct PeerOptions {
    pub org: String,
    pub data_dir: PathBuf,
    pub endpoint: String,
    pub orderer_endpoint: String,
    pub orderer_key: PublicKey,
    pub transport: Arc<dyn Transport>,
}

/// Name under which a peer's threads run and its resources are reported.
pub fn peer_name(org: &str) -> String {
    format!("peer0.{org}")
}

pub(crate) struct PeerShared {
    name: String,
    replica: RwLock<Replica>,
    log: Mutex<BlockLog>,
    height: Mutex<u64>,
    committed: Condvar,
    store: CaStore,
    orderer_endpoint: String,
    to_orderer: Mutex<Option<Conn>>,
    transport: Arc<dyn Transport>,
    counters: Arc<TrafficCounters>,
    disk: Arc<DiskCounters>,
    life: Arc<Lifecycle>,
}

/// A running peer: replica, block log, artifact store and RPC server.
pub struct PeerNode {
    shared: Arc<PeerShared>,
    endpoint: String,
}

impl PeerNode {
    /// Replays the local block log, binds the RPC endpoint and starts
    /// following the orderer.
    pub fn start(opts: PeerOptions) -> Result<PeerNode, NodeError> {
        let disk = Arc::new(DiskCounters::default());
        let (log, blocks) = BlockLog::open(&opts.data_dir.join("blocks"), disk.clone())?;
        let replica = Replica::replay(opts.orderer_key, blocks)
            .map_err(|(height, e)| NodeError::CorruptChain { height, reason: e.to_string() })?;
        let store = CaStore::open(opts.data_dir.join("castore")).map_err(|e| NodeError::Io(e.to_string()))?;
        let counters = TrafficCounters::new();
        let listener = opts.transport.listen(&opts.endpoint, counters.clone()).map_err(|e| NodeError::bind(&opts.endpoint, e))?;
        let endpoint = listener.endpoint();
        let name = peer_name(&opts.org);
        let life = Arc::new(Lifecycle::default());
        let shared = Arc::new(PeerShared {
            name: name.clone(),
            height: Mutex::new(replica.len()),
            replica: RwLock::new(replica),
            log: Mutex::new(log),
            committed: Condvar::new(),
            store,
            orderer_endpoint: opts.orderer_endpoint,
            to_orderer: Mutex::new(None),
            transport: opts.transport,
            counters,
            disk,
            life: life.clone(),
        });
        log::info!("{name}: replayed {} blocks, serving on {endpoint}", *shared.height.lock());

        let s = shared.clone();
        life.spawn(format!("{name}/sync"), move || s.follow_orderer());
        let s = shared.clone();
        accept_loop(life, listener, name, Arc::new(move |conn| s.serve(conn)));
        Ok(PeerNode { shared, endpoint })
    }

    pub fn name(&self) -> &str {
        &self.shared.name
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// Number of committed blocks.
    pub fn len(&self) -> u64 {
        self.shared.replica.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state_digest(&self) -> Digest {
        self.shared.replica.read().state_digest()
    }

    /// Runs `f` against the replica under a read lock.
    pub fn with_replica<R>(&self, f: impl FnOnce(&Replica) -> R) -> R {
        f(&self.shared.replica.read())
    }

    pub fn store(&self) -> &CaStore {
        &self.shared.store
    }

    pub fn traffic(&self) -> Arc<TrafficCounters> {
        self.shared.counters.clone()
    }

    pub fn disk(&self) -> Arc<DiskCounters> {
        self.shared.disk.clone()
    }

    /// Blocks until at least `len` blocks are committed.
    pub fn wait_for_len(&self, len: u64, timeout: Duration) -> bool {
        self.shared.wait_until(timeout, |r| r.len() >= len)
    }

    /// Stops all threads and closes every connection.
    pub fn stop(self) {
        self.shared.life.shutdown();
        *self.shared.to_orderer.lock() = None;
    }
}

impl PeerShared {
    fn notify(&self) {
        *self.height.lock() = self.replica.read().len();
        self.committed.notify_all();
    }

    /// Waits for a predicate over the replica, waking on each commit.
    fn wait_until(&self, timeout: Duration, pred: impl Fn(&Replica) -> bool) -> bool {
        let deadline = Instant::now() + timeout;
        loop {
            let mut h = self.height.lock();
            if pred(&self.replica.read()) {
                return true;
            }
            let now = Instant::now();
            if now >= deadline || self.life.stopping() {
                return false;
            }
            let step = (deadline - now).min(Duration::from_millis(200));
            self.committed.wait_for(&mut h, step);
        }
    }

    fn follow_orderer(&self) {
        let mut backoff = Duration::from_millis(50);
        while !self.life.stopping() {
            match self.sync_once() {
                Ok(()) => backoff = Duration::from_millis(50),
                Err(e) => {
                    log::debug!("{}: orderer stream ended: {e}", self.name);
                    std::thread::sleep(backoff);
                    backoff = (backoff * 2).min(Duration::from_secs(1));
                }
            }
        }
    }

    fn sync_once(&self) -> Result<(), String> {
        let conn = self.transport.connect(&self.orderer_endpoint, self.counters.clone()).map_err(|e| e.to_string())?;
        let Some(id) = self.life.track(conn.closer()) else { return Ok(()) };
        let result = (|| {
            let (mut reader, mut writer, _) = conn.split();
            let from_height = self.replica.read().len();
            let sub = Frame::encode(MessageType::EventSub, &Subscription::Blocks { from_height }).map_err(|e| e.to_string())?;
            writer.write(&sub).map_err(|e| e.to_string())?;
            while let Some(frame) = reader.read().map_err(|e| e.to_string())? {
                let block: Block = frame.decode(MessageType::Block).map_err(|e| e.to_string())?;
                self.commit(block)?;
            }
            Err("orderer closed the stream".to_string())
        })();
        self.life.untrack(id);
        result
    }

    /// Persists then applies one block. Blocks already held are skipped.
    fn commit(&self, block: Block) -> Result<(), String> {
        let mut replica = self.replica.write();
        if block.header.height < replica.len() {
            return Ok(());
        }
        replica.chain().check_next(&block).map_err(|e| format!("rejected block {}: {e}", block.header.height))?;
        self.log.lock().append(&block).map_err(|e| e.to_string())?;
        replica.validate_and_commit(block).map_err(|e| e.to_string())?;
        drop(replica);
        self.notify();
        Ok(())
    }

    fn serve(&self, conn: Conn) {
        let (mut reader, mut writer, _) = conn.split();
        loop {
            let frame = match reader.read() {
                Ok(Some(f)) => f,
                Ok(None) => return,
                Err(e) => {
                    log::debug!("{}: connection dropped: {e}", self.name);
                    return;
                }
            };
            let ok = match frame.kind {
                MessageType::RpcRequest => match frame.decode::<RpcRequest>(MessageType::RpcRequest) {
                    Ok(req) => {
                        let resp = match self.dispatch(&req) {
                            Ok(result) => RpcResponse { id: req.id, result: Some(result), error: None },
                            Err(error) => RpcResponse { id: req.id, result: None, error: Some(error) },
                        };
                        send(&mut writer, MessageType::RpcResponse, &resp)
                    }
                    Err(e) => {
                        let resp = RpcResponse { id: 0, result: None, error: Some(RpcError::new(rpc::BAD_PARAMS, e.to_string())) };
                        send(&mut writer, MessageType::RpcResponse, &resp)
                    }
                },
                MessageType::SubmitTx => match frame.decode::<Transaction>(MessageType::SubmitTx) {
                    Ok(tx) => {
                        let ack = match self.forward(&tx) {
                            Ok(ack) => ack,
                            Err(e) => Ack { tx_id: tx.tx_id, accepted: false, code: Some(e.code) },
                        };
                        send(&mut writer, MessageType::Ack, &ack)
                    }
                    Err(_) => false,
                },
                MessageType::EventSub => {
                    if let Ok(Subscription::Events { from_height, audience }) = frame.decode(MessageType::EventSub) {
                        self.stream_events(&mut writer, from_height, audience);
                    }
                    return;
                }
                _ => false,
            };
            if !ok {
                return;
            }
        }
    }

    /// Pushes committed events until the subscriber goes away. Events are
    /// only ever read from committed block outcomes.
    fn stream_events(&self, writer: &mut FrameWriter, from_height: u64, audience: Option<Audience>) {
        let mut cursor = from_height;
        while !self.life.stopping() {
            let (len, events) = {
                let r = self.replica.read();
                (r.len(), if cursor < r.len() { r.events_since(cursor, audience) } else { Vec::new() })
            };
            for e in &events {
                if !send(writer, MessageType::Event, e) {
                    return;
                }
            }
            cursor = cursor.max(len);
            let mut h = self.height.lock();
            if *h <= cursor {
                self.committed.wait_for(&mut h, Duration::from_millis(250));
            }
        }
    }

    fn forward(&self, tx: &Transaction) -> Result<Ack, RpcError> {
        let frame = Frame::encode(MessageType::SubmitTx, tx).map_err(|e| RpcError::new(rpc::BAD_PARAMS, e.to_string()))?;
        let mut slot = self.to_orderer.lock();
        for _ in 0..2 {
            if slot.is_none() {
                let conn = self
                    .transport
                    .connect(&self.orderer_endpoint, self.counters.clone())
                    .map_err(|e| RpcError::new(rpc::UNAVAILABLE, format!("orderer: {e}")))?;
                *slot = Some(conn);
            }
            let conn = slot.as_mut().expect("connected above");
            match conn.call(&frame).and_then(|f| f.decode::<Ack>(MessageType::Ack)) {
                Ok(ack) => return Ok(ack),
                Err(e) => {
                    log::debug!("{}: orderer submit failed: {e}", self.name);
                    *slot = None;
                }
            }
        }
        Err(RpcError::new(rpc::UNAVAILABLE, "orderer connection lost"))
    }

    fn dispatch(&self, req: &RpcRequest) -> Result<Doc, RpcError> {
        let p = &req.params;
        match req.method.as_str() {
            rpc::SUBMIT_TX => {
                #[derive(Deserialize)]
                struct P {
                    tx: Transaction,
                }
                let P { tx } = params(p)?;
                let ack = self.forward(&tx)?;
                match ack.code {
                    None if ack.accepted => Ok(json!({ "tx_id": tx.tx_id })),
                    code => Err(RpcError::new(code.unwrap_or_else(|| "Rejected".into()), "submission rejected")),
                }
            }
            rpc::WAIT_TX => {
                #[derive(Deserialize)]
                struct P {
                    tx_id: Digest,
                    timeout_ms: u64,
                }
                let P { tx_id, timeout_ms } = params(p)?;
                let timeout = Duration::from_millis(timeout_ms.min(300_000));
                if !self.wait_until(timeout, |r| r.locate(&tx_id).is_some()) {
                    return Err(RpcError::new(rpc::TIMEOUT, format!("{tx_id} not committed within {timeout_ms} ms")));
                }
                let loc = self.replica.read().locate(&tx_id).expect("located above");
                Ok(doc(&loc))
            }
            rpc::QUERY_TX => {
                #[derive(Deserialize)]
                struct P {
                    tx_id: Digest,
                }
                let P { tx_id } = params(p)?;
                let loc = self.replica.read().locate(&tx_id).ok_or_else(|| not_found(&tx_id.to_hex()))?;
                Ok(doc(&loc))
            }
            rpc::QUERY_STATE => {
                #[derive(Deserialize)]
                struct P {
                    key: String,
                }
                let P { key } = params(p)?;
                self.replica.read().state().get(&key).cloned().ok_or_else(|| not_found(&key))
            }
            rpc::QUERY_PREFIX => {
                #[derive(Deserialize)]
                struct P {
                    prefix: String,
                }
                let P { prefix } = params(p)?;
                let r = self.replica.read();
                let rows: Vec<Doc> = r.state().scan_prefix(&prefix).map(|(k, v)| json!([k, v])).collect();
                Ok(Doc::Array(rows))
            }
            rpc::QUERY_BLOCK => {
                #[derive(Deserialize)]
                struct P {
                    height: u64,
                }
                let P { height } = params(p)?;
                let r = self.replica.read();
                let block = r.chain().get(height).cloned().ok_or_else(|| not_found(&format!("block {height}")))?;
                let outcome = r.outcome(height).expect("outcome per committed block");
                Ok(doc(&BlockView::new(block, outcome)))
            }
            rpc::QUERY_EVENTS => {
                #[derive(Deserialize)]
                struct P {
                    since: u64,
                    #[serde(default)]
                    audience: Option<Audience>,
                }
                let P { since, audience } = params(p)?;
                Ok(doc(&self.replica.read().events_since(since, audience)))
            }
            rpc::CASTORE_PUT => {
                #[derive(Deserialize)]
                struct P {
                    data: String,
                    #[serde(default)]
                    raw: bool,
                }
                let P { data, raw } = params(p)?;
                let bytes = rpc::unb64(&data)?;
                let cid = if raw { self.store.put_object(&bytes) } else { self.store.put_blob(&bytes) }.map_err(store_err)?;
                Ok(json!({ "cid": cid }))
            }
            rpc::CASTORE_GET => {
                #[derive(Deserialize)]
                struct P {
                    cid: ContentId,
                    #[serde(default)]
                    raw: bool,
                }
                let P { cid, raw } = params(p)?;
                let bytes = if raw { self.store.get_object(&cid) } else { self.store.get(&cid) }.map_err(store_err)?;
                Ok(json!({ "data": rpc::b64(&bytes) }))
            }
            rpc::CASTORE_HAS => {
                #[derive(Deserialize)]
                struct P {
                    cid: ContentId,
                }
                let P { cid } = params(p)?;
                Ok(Doc::Bool(self.store.contains(&cid)))
            }
            rpc::CASTORE_PIN => {
                #[derive(Deserialize)]
                struct P {
                    cid: ContentId,
                }
                let P { cid } = params(p)?;
                self.store.pin(&cid).map_err(store_err)?;
                Ok(json!({}))
            }
            rpc::HEAD_HEIGHT => {
                let r = self.replica.read();
                r.tip_height().map(Doc::from).ok_or_else(|| RpcError::new(rpc::UNAVAILABLE, "no blocks yet"))
            }
            rpc::STATE_DIGEST => {
                let r = self.replica.read();
                Ok(doc(&StateDigest { height: r.tip_height().unwrap_or(0), digest: r.state_digest() }))
            }
            rpc::NODE_INFO => {
                let r = self.replica.read();
                Ok(doc(&NodeInfo {
                    name: self.name.clone(),
                    role: "peer".into(),
                    height: r.tip_height().unwrap_or(0),
                    orderer_public_key: *r.orderer_key(),
                }))
            }
            other => Err(RpcError::new(rpc::METHOD_NOT_FOUND, format!("unknown method {other:?}"))),
        }
    }
}

fn doc<T: serde::Serialize>(value: &T) -> Doc {
    to_doc(value).expect("node responses hold no floats")
}

fn not_found(what: &str) -> RpcError {
    RpcError::new(rpc::NOT_FOUND, format!("{what} not found"))
}

fn store_err(e: crate::castore::StoreError) -> RpcError {
    RpcError::new(e.code(), e.to_string())
}

pub(crate) fn send<T: serde::Serialize>(writer: &mut FrameWriter, kind: MessageType, value: &T) -> bool {
    match Frame::encode(kind, value) {
        Ok(f) => writer.write(&f).is_ok(),
        Err(e) => {
            log::error!("cannot encode {kind:?} frame: {e}");
            false
        }
    }
}
