//! Stream transports: TCP and an in-process loopback with identical framing
//! semantics. Every connection counts the frame bytes it moves so resource
//! reports can read traffic at the application layer.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, RecvTimeoutError, Sender};
use parking_lot::{Condvar, Mutex};

use super::wire::{read_frame, write_frame, Frame, WireError};

/// Byte counters shared by every connection of one node.
#[derive(Debug, Default)]
pub struct TrafficCounters {
    bytes_in: AtomicU64,
    bytes_out: AtomicU64,
}

impl TrafficCounters {
    pub fn new() -> Arc<TrafficCounters> {
        Arc::new(TrafficCounters::default())
    }

    pub fn bytes_in(&self) -> u64 {
        self.bytes_in.load(Ordering::Relaxed)
    }

    pub fn bytes_out(&self) -> u64 {
        self.bytes_out.load(Ordering::Relaxed)
    }
}

trait ReadHalf: Read + Send {
    fn set_timeout(&mut self, timeout: Option<Duration>) -> io::Result<()>;
}

trait CloseHandle: Send + Sync {
    fn close(&self);
}

pub struct FrameReader {
    inner: Box<dyn ReadHalf>,
    counters: Arc<TrafficCounters>,
}

impl FrameReader {
    pub fn read(&mut self) -> Result<Option<Frame>, WireError> {
        let frame = read_frame(&mut self.inner)?;
        if let Some(f) = &frame {
            self.counters.bytes_in.fetch_add(f.wire_len() as u64, Ordering::Relaxed);
        }
        Ok(frame)
    }

    /// Bounds how long `read` blocks before returning a timeout error.
    pub fn set_timeout(&mut self, timeout: Option<Duration>) -> io::Result<()> {
        self.inner.set_timeout(timeout)
    }
}

pub struct FrameWriter {
    inner: Box<dyn Write + Send>,
    counters: Arc<TrafficCounters>,
}

impl FrameWriter {
    pub fn write(&mut self, frame: &Frame) -> Result<(), WireError> {
        let n = write_frame(&mut self.inner, frame)?;
        self.counters.bytes_out.fetch_add(n as u64, Ordering::Relaxed);
        Ok(())
    }
}

/// Closes both directions of a connection from any thread.
#[derive(Clone)]
pub struct Closer(Arc<dyn CloseHandle>);

impl Closer {
    pub fn close(&self) {
        self.0.close()
    }
}

pub struct Conn {
    pub reader: FrameReader,
    pub writer: FrameWriter,
    closer: Closer,
}

impl Conn {
    pub fn closer(&self) -> Closer {
        self.closer.clone()
    }

    pub fn split(self) -> (FrameReader, FrameWriter, Closer) {
        (self.reader, self.writer, self.closer)
    }

    /// One request frame, one reply frame.
    pub fn call(&mut self, frame: &Frame) -> Result<Frame, WireError> {
        self.writer.write(frame)?;
        self.reader.read()?.ok_or_else(|| io::Error::from(io::ErrorKind::UnexpectedEof).into())
    }
}

pub trait Listener: Send {
    /// Waits up to `timeout` for a connection.
    fn accept(&self, timeout: Duration) -> io::Result<Option<Conn>>;
    fn endpoint(&self) -> String;
}

pub trait Transport: Send + Sync {
    fn listen(&self, endpoint: &str, counters: Arc<TrafficCounters>) -> io::Result<Box<dyn Listener>>;
    fn connect(&self, endpoint: &str, counters: Arc<TrafficCounters>) -> io::Result<Conn>;
}

// ---- TCP ----

#[derive(Debug, Default, Clone, Copy)]
pub struct TcpTransport;

struct TcpRead(TcpStream);

impl Read for TcpRead {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.0.read(buf)
    }
}

impl ReadHalf for TcpRead {
    fn set_timeout(&mut self, timeout: Option<Duration>) -> io::Result<()> {
        self.0.set_read_timeout(timeout)
    }
}

impl CloseHandle for TcpStream {
    fn close(&self) {
        let _ = self.shutdown(Shutdown::Both);
    }
}

fn tcp_conn(stream: TcpStream, counters: Arc<TrafficCounters>) -> io::Result<Conn> {
    stream.set_nodelay(true)?;
    let reader = FrameReader { inner: Box::new(TcpRead(stream.try_clone()?)), counters: counters.clone() };
    let closer = Closer(Arc::new(stream.try_clone()?));
    let writer = FrameWriter { inner: Box::new(stream), counters };
    Ok(Conn { reader, writer, closer })
}

struct TcpListen {
    inner: TcpListener,
    counters: Arc<TrafficCounters>,
}

impl Listener for TcpListen {
    fn accept(&self, timeout: Duration) -> io::Result<Option<Conn>> {
        let deadline = Instant::now() + timeout;
        loop {
            match self.inner.accept() {
                Ok((stream, _)) => {
                    stream.set_nonblocking(false)?;
                    return tcp_conn(stream, self.counters.clone()).map(Some);
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                    if Instant::now() >= deadline {
                        return Ok(None);
                    }
                    std::thread::sleep(Duration::from_millis(2));
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn endpoint(&self) -> String {
        self.inner.local_addr().map(|a| a.to_string()).unwrap_or_default()
    }
}

impl Transport for TcpTransport {
    fn listen(&self, endpoint: &str, counters: Arc<TrafficCounters>) -> io::Result<Box<dyn Listener>> {
        let inner = TcpListener::bind(endpoint)?;
        inner.set_nonblocking(true)?;
        Ok(Box::new(TcpListen { inner, counters }))
    }

    fn connect(&self, endpoint: &str, counters: Arc<TrafficCounters>) -> io::Result<Conn> {
        tcp_conn(TcpStream::connect(endpoint)?, counters)
    }
}

// ---- loopback ----

#[derive(Default)]
struct PipeState {
    buf: VecDeque<u8>,
    closed: bool,
}

#[derive(Default)]
struct Pipe {
    state: Mutex<PipeState>,
    ready: Condvar,
}

impl Pipe {
    fn close(&self) {
        self.state.lock().closed = true;
        self.ready.notify_all();
    }
}

struct PipeReader {
    pipe: Arc<Pipe>,
    timeout: Option<Duration>,
}

impl Read for PipeReader {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if out.is_empty() {
            return Ok(0);
        }
        let deadline = self.timeout.map(|t| Instant::now() + t);
        let mut st = self.pipe.state.lock();
        while st.buf.is_empty() {
            if st.closed {
                return Ok(0);
            }
            match deadline {
                Some(d) => {
                    if self.pipe.ready.wait_until(&mut st, d).timed_out() && st.buf.is_empty() && !st.closed {
                        return Err(io::ErrorKind::WouldBlock.into());
                    }
                }
                None => self.pipe.ready.wait(&mut st),
            }
        }
        let n = out.len().min(st.buf.len());
        for (dst, src) in out.iter_mut().zip(st.buf.drain(..n)) {
            *dst = src;
        }
        Ok(n)
    }
}

impl ReadHalf for PipeReader {
    fn set_timeout(&mut self, timeout: Option<Duration>) -> io::Result<()> {
        self.timeout = timeout;
        Ok(())
    }
}

impl Drop for PipeReader {
    fn drop(&mut self) {
        self.pipe.close();
    }
}

struct PipeWriter(Arc<Pipe>);

impl Write for PipeWriter {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        let mut st = self.0.state.lock();
        if st.closed {
            return Err(io::ErrorKind::BrokenPipe.into());
        }
        st.buf.extend(data);
        drop(st);
        self.0.ready.notify_all();
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Drop for PipeWriter {
    fn drop(&mut self) {
        self.0.close();
    }
}

struct PipePair(Arc<Pipe>, Arc<Pipe>);

impl CloseHandle for PipePair {
    fn close(&self) {
        self.0.close();
        self.1.close();
    }
}

fn pipe_conn(inbound: Arc<Pipe>, outbound: Arc<Pipe>, counters: Arc<TrafficCounters>) -> Conn {
    Conn {
        closer: Closer(Arc::new(PipePair(inbound.clone(), outbound.clone()))),
        reader: FrameReader { inner: Box::new(PipeReader { pipe: inbound, timeout: None }), counters: counters.clone() },
        writer: FrameWriter { inner: Box::new(PipeWriter(outbound)), counters },
    }
}

/// In-process network. Endpoints are arbitrary names; binding a name twice
/// fails with `AddrInUse`, connecting to an unbound name with
/// `ConnectionRefused`.
#[derive(Clone, Default)]
pub struct LoopbackTransport {
    listeners: Arc<Mutex<HashMap<String, Sender<(Arc<Pipe>, Arc<Pipe>)>>>>,
}

impl LoopbackTransport {
    pub fn new() -> LoopbackTransport {
        LoopbackTransport::default()
    }
}

struct LoopbackListen {
    endpoint: String,
    incoming: Receiver<(Arc<Pipe>, Arc<Pipe>)>,
    registry: LoopbackTransport,
    counters: Arc<TrafficCounters>,
}

impl Listener for LoopbackListen {
    fn accept(&self, timeout: Duration) -> io::Result<Option<Conn>> {
        match self.incoming.recv_timeout(timeout) {
            Ok((inbound, outbound)) => Ok(Some(pipe_conn(inbound, outbound, self.counters.clone()))),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(io::ErrorKind::NotConnected.into()),
        }
    }

    fn endpoint(&self) -> String {
        self.endpoint.clone()
    }
}

impl Drop for LoopbackListen {
    fn drop(&mut self) {
        self.registry.listeners.lock().remove(&self.endpoint);
    }
}

impl Transport for LoopbackTransport {
    fn listen(&self, endpoint: &str, counters: Arc<TrafficCounters>) -> io::Result<Box<dyn Listener>> {
        let mut map = self.listeners.lock();
        if map.contains_key(endpoint) {
            return Err(io::ErrorKind::AddrInUse.into());
        }
        let (tx, rx) = crossbeam_channel::unbounded();
        map.insert(endpoint.to_string(), tx);
        Ok(Box::new(LoopbackListen { endpoint: endpoint.to_string(), incoming: rx, registry: self.clone(), counters }))
    }

    fn connect(&self, endpoint: &str, counters: Arc<TrafficCounters>) -> io::Result<Conn> {
        let sender = self.listeners.lock().get(endpoint).cloned().ok_or(io::ErrorKind::ConnectionRefused)?;
        let to_server = Arc::new(Pipe::default());
        let to_client = Arc::new(Pipe::default());
        sender
            .send((to_server.clone(), to_client.clone()))
            .map_err(|_| io::Error::from(io::ErrorKind::ConnectionRefused))?;
        Ok(pipe_conn(to_client, to_server, counters))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::wire::MessageType;

    fn echo_roundtrip(t: &dyn Transport, endpoint: &str) {
        let server_counters = TrafficCounters::new();
        let client_counters = TrafficCounters::new();
        let listener = t.listen(endpoint, server_counters.clone()).unwrap();
        let ep = listener.endpoint();
        let server = std::thread::spawn(move || {
            let mut conn = listener.accept(Duration::from_secs(5)).unwrap().unwrap();
            while let Some(f) = conn.reader.read().unwrap() {
                conn.writer.write(&f).unwrap();
            }
        });
        let mut conn = t.connect(&ep, client_counters.clone()).unwrap();
        let mut sent = 0;
        for size in [0usize, 1, 1000, 70_000] {
            let f = Frame { kind: MessageType::RpcRequest, payload: vec![7; size] };
            sent += f.wire_len() as u64;
            assert_eq!(conn.call(&f).unwrap(), f);
        }
        drop(conn);
        server.join().unwrap();
        // Frame-count oracle: counters equal the sum of frame lengths.
        assert_eq!(client_counters.bytes_out(), sent);
        assert_eq!(client_counters.bytes_in(), sent);
        assert_eq!(server_counters.bytes_in(), sent);
        assert_eq!(server_counters.bytes_out(), sent);
    }

    #[test]
    fn loopback_echo() {
        echo_roundtrip(&LoopbackTransport::new(), "echo");
    }

    #[test]
    fn tcp_echo() {
        echo_roundtrip(&TcpTransport, "127.0.0.1:0");
    }

    #[test]
    fn loopback_binding_rules() {
        let t = LoopbackTransport::new();
        let l = t.listen("a", TrafficCounters::new()).unwrap();
        assert_eq!(t.listen("a", TrafficCounters::new()).err().unwrap().kind(), io::ErrorKind::AddrInUse);
        assert_eq!(t.connect("b", TrafficCounters::new()).err().unwrap().kind(), io::ErrorKind::ConnectionRefused);
        drop(l);
        assert!(t.listen("a", TrafficCounters::new()).is_ok());
    }

    #[test]
    fn loopback_read_timeout() {
        let t = LoopbackTransport::new();
        let _l = t.listen("x", TrafficCounters::new()).unwrap();
        let mut c = t.connect("x", TrafficCounters::new()).unwrap();
        c.reader.set_timeout(Some(Duration::from_millis(20))).unwrap();
        assert!(c.reader.read().unwrap_err().is_timeout());
    }
}
