//! Append-only block log with an offset index.
//!
//! Record layout in `blocks.log`:
//!
//! ```text
//! len u32 BE | !len u32 BE | canonical block bytes (len) | sha256(bytes) 32
//! ```
//!
//! The complemented length makes a damaged length field distinguishable from
//! a torn final write. A record running past end of file is a torn tail from
//! a crash and is truncated on open; anything else that fails to check is
//! corruption. `blocks.idx` holds one u64 BE offset per height and is rebuilt
//! from the log whenever it disagrees.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

use crate::canonical::decode_canonical;
use crate::ledger::{verify_encoded_chain, AuditReport, Block, ChainError, Digest, PublicKey, Violation};

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("block log corrupt at record {index} (offset {offset}): {reason}")]
    Corrupt { index: u64, offset: u64, reason: String },
}

/// Disk byte counters, shared with resource sampling.
#[derive(Debug, Default)]
pub struct DiskCounters {
    pub written: AtomicU64,
    pub read: AtomicU64,
}

pub struct BlockLog {
    dir: PathBuf,
    log: File,
    index: File,
    offsets: Vec<u64>,
    end: u64,
    counters: Arc<DiskCounters>,
}

const HEADER: usize = 8;
const TRAILER: usize = 32;

impl BlockLog {
    /// Opens or creates the log in `dir` and returns it with every stored
    /// block, after truncating a torn tail.
    pub fn open(dir: &Path, counters: Arc<DiskCounters>) -> Result<(BlockLog, Vec<Block>), LogError> {
        fs::create_dir_all(dir)?;
        let log_path = dir.join("blocks.log");
        let mut log = OpenOptions::new().read(true).append(true).create(true).open(&log_path)?;
        let mut data = Vec::new();
        log.seek(SeekFrom::Start(0))?;
        log.read_to_end(&mut data)?;
        counters.read.fetch_add(data.len() as u64, Ordering::Relaxed);

        let mut blocks = Vec::new();
        let mut offsets = Vec::new();
        let mut pos = 0usize;
        while pos < data.len() {
            let index = blocks.len() as u64;
            let corrupt = |reason: &str| LogError::Corrupt { index, offset: pos as u64, reason: reason.to_string() };
            if data.len() - pos < HEADER {
                break; // torn header
            }
            let len = u32::from_be_bytes(data[pos..pos + 4].try_into().expect("4"));
            let check = u32::from_be_bytes(data[pos + 4..pos + 8].try_into().expect("4"));
            if len != !check {
                return Err(corrupt("length field damaged"));
            }
            let body_end = pos + HEADER + len as usize;
            if body_end + TRAILER > data.len() {
                break; // torn body
            }
            let body = &data[pos + HEADER..body_end];
            if Digest::of(body).as_bytes()[..] != data[body_end..body_end + TRAILER] {
                return Err(corrupt("checksum mismatch"));
            }
            let block: Block = decode_canonical(body).map_err(|e| corrupt(&format!("undecodable block: {e}")))?;
            offsets.push(pos as u64);
            blocks.push(block);
            pos = body_end + TRAILER;
        }
        if pos < data.len() {
            log::warn!("truncating torn tail of {} bytes in {}", data.len() - pos, log_path.display());
            log.set_len(pos as u64)?;
            log.sync_all()?;
        }

        let index_path = dir.join("blocks.idx");
        let stored_index = fs::read(&index_path).unwrap_or_default();
        let expected: Vec<u8> = offsets.iter().flat_map(|o| o.to_be_bytes()).collect();
        if stored_index != expected {
            fs::write(&index_path, &expected)?;
        }
        let index = OpenOptions::new().append(true).create(true).open(&index_path)?;
        Ok((BlockLog { dir: dir.to_path_buf(), log, index, offsets, end: pos as u64, counters }, blocks))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> u64 {
        self.offsets.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Appends and syncs one block.
    pub fn append(&mut self, block: &Block) -> Result<(), LogError> {
        let body = block.encode();
        let len = u32::try_from(body.len()).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "block too large"))?;
        let mut rec = Vec::with_capacity(HEADER + body.len() + TRAILER);
        rec.extend_from_slice(&len.to_be_bytes());
        rec.extend_from_slice(&(!len).to_be_bytes());
        rec.extend_from_slice(&body);
        rec.extend_from_slice(Digest::of(&body).as_bytes());
        self.log.write_all(&rec)?;
        self.log.sync_data()?;
        self.index.write_all(&self.end.to_be_bytes())?;
        self.offsets.push(self.end);
        self.end += rec.len() as u64;
        self.counters.written.fetch_add((rec.len() + 8) as u64, Ordering::Relaxed);
        Ok(())
    }

    /// Reads one block back from disk through the index.
    pub fn read_block(&self, height: u64) -> Result<Option<Block>, LogError> {
        let Some(&offset) = self.offsets.get(height as usize) else { return Ok(None) };
        let mut f = File::open(self.dir.join("blocks.log"))?;
        f.seek(SeekFrom::Start(offset))?;
        let mut head = [0u8; HEADER];
        f.read_exact(&mut head)?;
        let len = u32::from_be_bytes(head[..4].try_into().expect("4")) as usize;
        let mut body = vec![0u8; len];
        f.read_exact(&mut body)?;
        self.counters.read.fetch_add((HEADER + len) as u64, Ordering::Relaxed);
        let block = decode_canonical(&body)
            .map_err(|e| LogError::Corrupt { index: height, offset, reason: e.to_string() })?;
        Ok(Some(block))
    }
}

/// Audits a block log directory without trusting or repairing it. Records
/// that fail framing or checksum are reported as `DamagedRecord`; the bodies
/// that can still be delimited go through full chain verification. A record
/// whose length cannot be trusted ends the scan, since nothing after it can
/// be located.
pub fn audit_block_log(dir: &Path, orderer_key: &PublicKey) -> Result<AuditReport, io::Error> {
    let data = fs::read(dir.join("blocks.log"))?;
    let mut bodies: Vec<Vec<u8>> = Vec::new();
    let mut damaged = Vec::new();
    let mut pos = 0usize;
    while pos < data.len() {
        let height = bodies.len() as u64;
        if data.len() - pos < HEADER {
            damaged.push(Violation { height, kind: ChainError::DamagedRecord });
            break;
        }
        let len = u32::from_be_bytes(data[pos..pos + 4].try_into().expect("4"));
        let check = u32::from_be_bytes(data[pos + 4..pos + 8].try_into().expect("4"));
        let body_end = pos + HEADER + len as usize;
        if len != !check || body_end + TRAILER > data.len() {
            damaged.push(Violation { height, kind: ChainError::DamagedRecord });
            break;
        }
        let body = &data[pos + HEADER..body_end];
        if Digest::of(body).as_bytes()[..] != data[body_end..body_end + TRAILER] {
            damaged.push(Violation { height, kind: ChainError::DamagedRecord });
        }
        bodies.push(body.to_vec());
        pos = body_end + TRAILER;
    }
    let mut report = verify_encoded_chain(&bodies, orderer_key);
    report.violations.extend(damaged);
    report.violations.sort_by(|a, b| (a.height, a.kind).cmp(&(b.height, b.kind)));
    report.violations.dedup();
    Ok(report)
}
