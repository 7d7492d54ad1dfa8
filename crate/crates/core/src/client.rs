//! What off-chain tools need from a chain: submit, wait, read state and
//! events. Implemented by the node RPC client and by an in-process adapter
//! over [`LocalNetwork`].

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use parking_lot::Mutex;
use serde::de::DeserializeOwned;
use thiserror::Error;

use crate::canonical::{from_doc, Doc};
use crate::consensus::{Event, LocalNetwork, TxLocation};
use crate::contracts::Audience;
use crate::ledger::{Digest, Transaction, TxRejection};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("rejected at submission: {0}")]
    Rejected(TxRejection),
    #[error("chain unavailable: {0}")]
    Unavailable(String),
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("{code}: {message}")]
    Remote { code: String, message: String },
}

impl ClientError {
    pub fn code(&self) -> &str {
        match self {
            ClientError::Rejected(r) => r.code(),
            ClientError::Unavailable(_) => "Unavailable",
            ClientError::Timeout(_) => "Timeout",
            ClientError::Remote { code, .. } => code,
        }
    }

    /// Worth retrying with the same transaction.
    pub fn is_transient(&self) -> bool {
        matches!(self, ClientError::Unavailable(_) | ClientError::Timeout(_) | ClientError::Rejected(TxRejection::QueueFull))
    }
}

pub trait ChainAccess: Send + Sync {
    fn submit(&self, tx: &Transaction) -> Result<(), ClientError>;
    /// Blocks until `tx_id` is committed (valid or not).
    fn wait_tx(&self, tx_id: &Digest, timeout: Duration) -> Result<TxLocation, ClientError>;
    fn query_state(&self, key: &str) -> Result<Option<Doc>, ClientError>;
    /// Committed events at or after `from_height`.
    fn events_since(&self, from_height: u64, audience: Option<Audience>) -> Result<Vec<Event>, ClientError>;
    fn head_height(&self) -> Result<u64, ClientError>;
}

/// Typed state read.
pub fn query_typed<T: DeserializeOwned>(chain: &dyn ChainAccess, key: &str) -> Result<Option<T>, ClientError> {
    chain
        .query_state(key)?
        .map(|d| from_doc(&d).map_err(|e| ClientError::Remote { code: "Malformed".into(), message: e.to_string() }))
        .transpose()
}

/// Bounded exponential backoff for transient failures.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
    pub commit_timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 6, initial_backoff: Duration::from_millis(50), commit_timeout: Duration::from_secs(30) }
    }
}

/// Submits and waits for commit, retrying transient failures. A retry that
/// meets `ReplayedNonce` means an earlier attempt got through, so the
/// original transaction is awaited instead.
pub fn submit_and_wait(chain: &dyn ChainAccess, tx: &Transaction, retry: RetryPolicy) -> Result<TxLocation, ClientError> {
    let mut backoff = retry.initial_backoff;
    let mut last = ClientError::Unavailable("no attempt made".into());
    for attempt in 0..retry.attempts.max(1) {
        match chain.submit(tx) {
            Ok(()) => return chain.wait_tx(&tx.tx_id, retry.commit_timeout),
            Err(ClientError::Rejected(TxRejection::ReplayedNonce)) if attempt > 0 => {
                return chain.wait_tx(&tx.tx_id, retry.commit_timeout)
            }
            Err(e) if e.is_transient() => {
                log::warn!("submit {} failed ({e}); retrying in {backoff:?}", tx.tx_id);
                last = e;
                std::thread::sleep(backoff);
                backoff = backoff.saturating_mul(2);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Strictly increasing nonces seeded from the wall clock, so a restarted
/// client does not reuse nonces of an earlier run.
#[derive(Debug)]
pub struct NonceSource(AtomicU64);

impl NonceSource {
    pub fn from_clock() -> NonceSource {
        let micros = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_micros() as u64).unwrap_or(0);
        NonceSource(AtomicU64::new(micros))
    }

    pub fn starting_at(n: u64) -> NonceSource {
        NonceSource(AtomicU64::new(n))
    }

    pub fn next(&self) -> u64 {
        self.0.fetch_add(1, Ordering::Relaxed)
    }
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(ms: u64) -> ManualClock {
        ManualClock(AtomicU64::new(ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst)
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// [`ChainAccess`] over an in-process network. Waiting flushes the orderer
/// queue by advancing the network's manual clock, so commits are immediate.
#[derive(Clone)]
pub struct LocalChain {
    net: Arc<Mutex<LocalNetwork>>,
    peer: usize,
}

impl LocalChain {
    pub fn new(net: LocalNetwork) -> LocalChain {
        LocalChain { net: Arc::new(Mutex::new(net)), peer: 0 }
    }

    /// Another handle reading from a different peer.
    pub fn via_peer(&self, peer: usize) -> LocalChain {
        LocalChain { net: self.net.clone(), peer }
    }

    pub fn network(&self) -> &Arc<Mutex<LocalNetwork>> {
        &self.net
    }
}

impl ChainAccess for LocalChain {
    fn submit(&self, tx: &Transaction) -> Result<(), ClientError> {
        self.net.lock().submit(tx.clone()).map(|_| ()).map_err(ClientError::Rejected)
    }

    fn wait_tx(&self, tx_id: &Digest, _timeout: Duration) -> Result<TxLocation, ClientError> {
        let mut net = self.net.lock();
        if let Some(loc) = net.peer(self.peer).locate(tx_id) {
            return Ok(loc);
        }
        net.flush();
        net.peer(self.peer).locate(tx_id).ok_or_else(|| ClientError::Timeout(tx_id.to_hex()))
    }

    fn query_state(&self, key: &str) -> Result<Option<Doc>, ClientError> {
        Ok(self.net.lock().peer(self.peer).state().get(key).cloned())
    }

    fn events_since(&self, from_height: u64, audience: Option<Audience>) -> Result<Vec<Event>, ClientError> {
        Ok(self.net.lock().peer(self.peer).events_since(from_height, audience))
    }

    fn head_height(&self) -> Result<u64, ClientError> {
        Ok(self.net.lock().peer(self.peer).tip_height().unwrap_or(0))
    }
}
