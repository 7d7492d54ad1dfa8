use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use parking_lot::{Condvar, Mutex};

use super::peer::send;
use super::rpc::{self, NodeInfo};
use super::server::{accept_loop, Lifecycle};
use super::storage::{BlockLog, DiskCounters};
use super::NodeError;
use crate::canonical::to_doc;
use crate::client::Clock;
use crate::consensus::transport::{Conn, FrameWriter, TrafficCounters, Transport};
use crate::consensus::wire::{Ack, MessageType, RpcError, RpcRequest, RpcResponse, Subscription};
use crate::consensus::{GenesisSpec, OrderingPolicy, OrderingService, SoloOrderer};
use crate::ledger::{Block, SecretKey, Transaction};

pub const ORDERER_NAME: &str = "orderer";

pub struct OrdererOptions {
    pub data_dir: PathBuf,
    pub endpoint: String,
    pub key: SecretKey,
    pub policy: OrderingPolicy,
    /// Used only when the block log is empty.
    pub genesis: GenesisSpec,
    pub transport: Arc<dyn Transport>,
    pub clock: Arc<dyn Clock>,
}

struct OrdererShared {
    orderer: Mutex<SoloOrderer>,
    log: Mutex<BlockLog>,
    /// Number of cut blocks; subscribers wait on `cut`.
    height: Mutex<u64>,
    cut: Condvar,
    /// Wakes the cutter early when a submission fills a batch.
    wake: Mutex<bool>,
    wake_cv: Condvar,
    clock: Arc<dyn Clock>,
    counters: Arc<TrafficCounters>,
    disk: Arc<DiskCounters>,
    life: Arc<Lifecycle>,
}

/// The single ordering node: accepts `SubmitTx`, cuts blocks on the batch
/// policy, persists them and streams them to subscribed peers.
pub struct OrdererNode {
    shared: Arc<OrdererShared>,
    endpoint: String,
}

impl OrdererNode {
    pub fn start(opts: OrdererOptions) -> Result<OrdererNode, NodeError> {
        opts.policy.validate().map_err(NodeError::Config)?;
        let disk = Arc::new(DiskCounters::default());
        let (mut log, blocks) = BlockLog::open(&opts.data_dir.join("blocks"), disk.clone())?;
        let now = opts.clock.now_ms();
        let orderer = if blocks.is_empty() {
            let o = SoloOrderer::genesis(opts.key, opts.policy, &opts.genesis, now);
            log.append(o.replica().chain().get(0).expect("genesis"))?;
            o
        } else {
            SoloOrderer::resume(opts.key, opts.policy, blocks, now)
                .map_err(|(height, e)| NodeError::CorruptChain { height, reason: e.to_string() })?
        };
        let counters = TrafficCounters::new();
        let listener = opts.transport.listen(&opts.endpoint, counters.clone()).map_err(|e| NodeError::bind(&opts.endpoint, e))?;
        let endpoint = listener.endpoint();
        let life = Arc::new(Lifecycle::default());
        let shared = Arc::new(OrdererShared {
            height: Mutex::new(orderer.replica().len()),
            orderer: Mutex::new(orderer),
            log: Mutex::new(log),
            cut: Condvar::new(),
            wake: Mutex::new(false),
            wake_cv: Condvar::new(),
            clock: opts.clock,
            counters,
            disk,
            life: life.clone(),
        });
        log::info!("orderer: {} blocks on disk, serving on {endpoint}", *shared.height.lock());

        let s = shared.clone();
        life.spawn(format!("{ORDERER_NAME}/cut"), move || s.cut_loop());
        let s = shared.clone();
        accept_loop(life, listener, ORDERER_NAME.into(), Arc::new(move |conn| s.serve(conn)));
        Ok(OrdererNode { shared, endpoint })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn len(&self) -> u64 {
        *self.shared.height.lock()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_orderer<R>(&self, f: impl FnOnce(&SoloOrderer) -> R) -> R {
        f(&self.shared.orderer.lock())
    }

    pub fn traffic(&self) -> Arc<TrafficCounters> {
        self.shared.counters.clone()
    }

    pub fn disk(&self) -> Arc<DiskCounters> {
        self.shared.disk.clone()
    }

    pub fn stop(self) {
        self.shared.life.shutdown();
    }
}

impl OrdererShared {
    fn cut_loop(&self) {
        while !self.life.stopping() {
            let now = self.clock.now_ms();
            let (cut, wait_ms) = {
                let mut o = self.orderer.lock();
                let mut cut = 0;
                while let Some(block) = o.poll(now) {
                    if let Err(e) = self.log.lock().append(&block) {
                        log::error!("orderer: cannot persist block {}: {e}", block.header.height);
                    }
                    cut += 1;
                }
                (cut, o.next_wakeup(now))
            };
            if cut > 0 {
                *self.height.lock() += cut;
                self.cut.notify_all();
            }
            let mut woken = self.wake.lock();
            if !*woken {
                self.wake_cv.wait_for(&mut woken, Duration::from_millis(wait_ms.clamp(1, 100)));
            }
            *woken = false;
        }
    }

    fn submit(&self, tx: Transaction) -> Ack {
        let tx_id = tx.tx_id;
        let mut o = self.orderer.lock();
        let result = o.submit(tx, self.clock.now_ms());
        let full = o.queue_len() >= o.policy().max_batch_size;
        drop(o);
        if full {
            *self.wake.lock() = true;
            self.wake_cv.notify_one();
        }
        match result {
            Ok(()) => Ack { tx_id, accepted: true, code: None },
            Err(r) => Ack { tx_id, accepted: false, code: Some(r.code().into()) },
        }
    }

    fn serve(&self, conn: Conn) {
        let (mut reader, mut writer, _) = conn.split();
        while let Ok(Some(frame)) = reader.read() {
            let ok = match frame.kind {
                MessageType::SubmitTx => match frame.decode::<Transaction>(MessageType::SubmitTx) {
                    Ok(tx) => send(&mut writer, MessageType::Ack, &self.submit(tx)),
                    Err(_) => false,
                },
                MessageType::EventSub => {
                    if let Ok(Subscription::Blocks { from_height }) = frame.decode(MessageType::EventSub) {
                        self.stream_blocks(&mut writer, from_height);
                    }
                    return;
                }
                MessageType::RpcRequest => match frame.decode::<RpcRequest>(MessageType::RpcRequest) {
                    Ok(req) => send(&mut writer, MessageType::RpcResponse, &self.rpc(&req)),
                    Err(_) => false,
                },
                _ => false,
            };
            if !ok {
                return;
            }
        }
    }

    fn stream_blocks(&self, writer: &mut FrameWriter, mut next: u64) {
        while !self.life.stopping() {
            let pending: Vec<Block> = {
                let o = self.orderer.lock();
                o.replica().chain().blocks().iter().skip(next as usize).take(64).cloned().collect()
            };
            for b in &pending {
                if !send(writer, MessageType::Block, b) {
                    return;
                }
                next = b.header.height + 1;
            }
            if pending.is_empty() {
                let mut h = self.height.lock();
                if *h <= next {
                    self.cut.wait_for(&mut h, Duration::from_millis(250));
                }
            }
        }
    }

    fn rpc(&self, req: &RpcRequest) -> RpcResponse {
        let o = self.orderer.lock();
        let result = match req.method.as_str() {
            rpc::HEAD_HEIGHT => Ok(o.replica().tip_height().unwrap_or(0).into()),
            rpc::NODE_INFO => Ok(to_doc(&NodeInfo {
                name: ORDERER_NAME.into(),
                role: "orderer".into(),
                height: o.replica().tip_height().unwrap_or(0),
                orderer_public_key: o.public_key(),
            })
            .expect("no floats")),
            other => Err(RpcError::new(rpc::METHOD_NOT_FOUND, format!("orderer does not serve {other:?}"))),
        };
        match result {
            Ok(r) => RpcResponse { id: req.id, result: Some(r), error: None },
            Err(e) => RpcResponse { id: req.id, result: None, error: Some(e) },
        }
    }
}
