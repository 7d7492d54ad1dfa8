//! Thread bookkeeping shared by peer and orderer daemons.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use parking_lot::Mutex;

use crate::consensus::transport::{Closer, Conn, Listener};

/// Stop flag, open connections and spawned threads of one node.
#[derive(Default)]
pub(crate) struct Lifecycle {
    stop: AtomicBool,
    conns: Mutex<HashMap<u64, Closer>>,
    next_conn: AtomicU64,
    threads: Mutex<Vec<JoinHandle<()>>>,
}

impl Lifecycle {
    pub fn stopping(&self) -> bool {
        self.stop.load(Ordering::SeqCst)
    }

    pub fn spawn(&self, name: String, f: impl FnOnce() + Send + 'static) {
        let handle = std::thread::Builder::new().name(name).spawn(f).expect("spawn node thread");
        self.threads.lock().push(handle);
    }

    /// Registers a connection so shutdown can close it. Returns `None` if the
    /// node is already stopping, in which case the connection is closed.
    pub fn track(&self, closer: Closer) -> Option<u64> {
        let mut conns = self.conns.lock();
        if self.stopping() {
            closer.close();
            return None;
        }
        let id = self.next_conn.fetch_add(1, Ordering::Relaxed);
        conns.insert(id, closer);
        Some(id)
    }

    pub fn untrack(&self, id: u64) {
        self.conns.lock().remove(&id);
    }

    /// Stops accepting, closes every connection and joins every thread.
    pub fn shutdown(&self) {
        self.stop.store(true, Ordering::SeqCst);
        for (_, c) in self.conns.lock().drain() {
            c.close();
        }
        loop {
            let batch: Vec<_> = std::mem::take(&mut *self.threads.lock());
            if batch.is_empty() {
                break;
            }
            for h in batch {
                let _ = h.join();
            }
        }
    }
}

/// Accepts connections until shutdown, one handler thread per connection.
pub(crate) fn accept_loop(
    life: Arc<Lifecycle>,
    listener: Box<dyn Listener>,
    thread_name: String,
    handler: Arc<dyn Fn(Conn) + Send + Sync>,
) {
    let life2 = life.clone();
    life.spawn(format!("{thread_name}/acc"), move || {
        while !life2.stopping() {
            let conn = match listener.accept(Duration::from_millis(100)) {
                Ok(Some(c)) => c,
                Ok(None) => continue,
                Err(e) => {
                    log::error!("{thread_name}: accept failed: {e}");
                    std::thread::sleep(Duration::from_millis(100));
                    continue;
                }
            };
            let Some(id) = life2.track(conn.closer()) else { break };
            let handler = handler.clone();
            let life3 = life2.clone();
            life2.spawn(format!("{thread_name}/conn"), move || {
                handler(conn);
                life3.untrack(id);
            });
        }
    });
}
