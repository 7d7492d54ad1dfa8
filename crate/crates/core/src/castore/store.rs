use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::{Mutex, RwLock};
use thiserror::Error;

use super::cid::ContentId;
use super::objects::*;
use crate::ledger::MemberId;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("object {0} not found")]
    NotFound(ContentId),
    #[error("stored bytes of {0} do not match its address")]
    IntegrityFailure(ContentId),
    #[error("store capacity exhausted")]
    StorageFull,
    #[error("reference to missing object {0}")]
    DanglingReference(ContentId),
    #[error("path {0:?} not found")]
    PathNotFound(String),
    #[error("invalid path {0:?}")]
    InvalidPath(String),
    #[error("object {0} is not a {1}")]
    WrongKind(ContentId, &'static str),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::NotFound(_) => "NotFound",
            StoreError::IntegrityFailure(_) => "IntegrityFailure",
            StoreError::StorageFull => "StorageFull",
            StoreError::DanglingReference(_) => "DanglingReference",
            StoreError::PathNotFound(_) => "PathNotFound",
            StoreError::InvalidPath(_) => "InvalidPath",
            StoreError::WrongKind(..) => "WrongKind",
            StoreError::Io(_) => "IoError",
        }
    }
}

pub type Result<T> = std::result::Result<T, StoreError>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GcReport {
    pub removed: Vec<ContentId>,
    pub retained: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreAudit {
    pub objects_checked: usize,
    pub corrupt: Vec<ContentId>,
}

impl StoreAudit {
    pub fn is_clean(&self) -> bool {
        self.corrupt.is_empty()
    }
}

/// Node-local object store: one file per object under
/// `objects/<hex[0:2]>/<hex[2:4]>/<hex>`, plus an append-only `pins` log.
///
/// Writes go to a temporary file and are renamed into place, so concurrent
/// puts of the same bytes are harmless. `gc` takes the store lock
/// exclusively; puts share it; reads take no lock.
pub struct CaStore {
    root: PathBuf,
    capacity: Option<u64>,
    used: AtomicU64,
    gc_lock: RwLock<()>,
    pins: Mutex<BTreeSet<ContentId>>,
}

impl CaStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<CaStore> {
        CaStore::open_with_capacity(root, None)
    }

    /// A store refusing writes that would take it past `capacity` bytes.
    pub fn open_with_capacity(root: impl Into<PathBuf>, capacity: Option<u64>) -> Result<CaStore> {
        let root = root.into();
        fs::create_dir_all(root.join("objects"))?;
        fs::create_dir_all(root.join("tmp"))?;
        let store = CaStore {
            root,
            capacity,
            used: AtomicU64::new(0),
            gc_lock: RwLock::new(()),
            pins: Mutex::new(BTreeSet::new()),
        };
        let used = store.list_objects()?.iter().map(|c| store.file_len(c)).sum();
        store.used.store(used, Ordering::Relaxed);
        *store.pins.lock() = store.load_pins()?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn object_path(&self, cid: &ContentId) -> PathBuf {
        let hex = cid.hex();
        self.root.join("objects").join(&hex[0..2]).join(&hex[2..4]).join(hex)
    }

    fn file_len(&self, cid: &ContentId) -> u64 {
        fs::metadata(self.object_path(cid)).map(|m| m.len()).unwrap_or(0)
    }

    /// Bytes currently held in object files.
    pub fn stored_bytes(&self) -> u64 {
        self.used.load(Ordering::Relaxed)
    }

    pub fn contains(&self, cid: &ContentId) -> bool {
        self.object_path(cid).is_file()
    }

    // ---- raw objects ----

    /// Stores bytes verbatim as one object.
    pub fn put_object(&self, bytes: &[u8]) -> Result<ContentId> {
        let cid = ContentId::of(bytes);
        self.write_object(&cid, bytes)?;
        Ok(cid)
    }

    /// Stores bytes fetched from elsewhere after checking they match `cid`.
    pub fn put_verified(&self, cid: &ContentId, bytes: &[u8]) -> Result<()> {
        if ContentId::of(bytes) != *cid {
            return Err(StoreError::IntegrityFailure(*cid));
        }
        self.write_object(cid, bytes)
    }

    fn write_object(&self, cid: &ContentId, bytes: &[u8]) -> Result<()> {
        let _shared = self.gc_lock.read();
        let path = self.object_path(cid);
        if path.is_file() {
            return Ok(());
        }
        let len = bytes.len() as u64;
        let prev = self.used.fetch_add(len, Ordering::SeqCst);
        if self.capacity.is_some_and(|cap| prev + len > cap) {
            self.used.fetch_sub(len, Ordering::SeqCst);
            return Err(StoreError::StorageFull);
        }
        let written = (|| -> io::Result<()> {
            fs::create_dir_all(path.parent().expect("object path has parent"))?;
            let tmp = self.root.join("tmp").join(format!("{}.{}", cid.hex(), rand::random::<u64>()));
            let mut f = File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        })();
        if let Err(e) = written {
            self.used.fetch_sub(len, Ordering::SeqCst);
            return Err(match e.kind() {
                io::ErrorKind::StorageFull => StoreError::StorageFull,
                _ => StoreError::Io(e),
            });
        }
        Ok(())
    }

    /// Reads one object and re-verifies its digest.
    pub fn get_object(&self, cid: &ContentId) -> Result<Vec<u8>> {
        let bytes = match fs::read(self.object_path(cid)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(*cid)),
            Err(e) => return Err(e.into()),
        };
        if ContentId::of(&bytes) != *cid {
            return Err(StoreError::IntegrityFailure(*cid));
        }
        Ok(bytes)
    }

    pub fn get_structured(&self, cid: &ContentId) -> Result<Option<StructuredObject>> {
        Ok(StructuredObject::decode(&self.get_object(cid)?))
    }

    // ---- blobs ----

    /// Stores a blob. Blobs above one chunk, and small blobs that would
    /// otherwise be mistaken for a chunk manifest, are stored as chunks plus
    /// a `blob-manifest` object whose address is returned.
    pub fn put_blob(&self, bytes: &[u8]) -> Result<ContentId> {
        let looks_like_manifest = matches!(StructuredObject::decode(bytes), Some(StructuredObject::BlobManifest(_)));
        if bytes.len() <= CHUNK_SIZE && !looks_like_manifest {
            return self.put_object(bytes);
        }
        let chunk_cids = bytes.chunks(CHUNK_SIZE).map(|c| self.put_object(c)).collect::<Result<Vec<_>>>()?;
        let manifest = ChunkedBlobManifest { total_size: bytes.len() as u64, chunk_cids, blob_id: ContentId::of(bytes) };
        self.put_object(&StructuredObject::BlobManifest(manifest).encode())
    }

    /// Returns blob bytes, reassembling and verifying chunked blobs. Trees and
    /// commits come back as their canonical encoding.
    pub fn get(&self, cid: &ContentId) -> Result<Vec<u8>> {
        let raw = self.get_object(cid)?;
        let Some(StructuredObject::BlobManifest(m)) = StructuredObject::decode(&raw) else {
            return Ok(raw);
        };
        let mut out = Vec::with_capacity(usize::try_from(m.total_size).unwrap_or(0));
        for c in &m.chunk_cids {
            out.extend(self.get_object(c)?);
        }
        if out.len() as u64 != m.total_size || ContentId::of(&out) != m.blob_id {
            return Err(StoreError::IntegrityFailure(*cid));
        }
        Ok(out)
    }

    /// Logical size of a blob or tree.
    pub fn logical_size(&self, cid: &ContentId) -> Result<u64> {
        let raw = self.get_object(cid)?;
        Ok(match StructuredObject::decode(&raw) {
            Some(StructuredObject::BlobManifest(m)) => m.total_size,
            Some(StructuredObject::Tree(t)) => t.size_bytes(),
            _ => raw.len() as u64,
        })
    }

    // ---- trees and commits ----

    /// Stores a tree from explicit entries. Entries are sorted by name, so
    /// insertion order never changes the address.
    pub fn put_tree(&self, mut entries: Vec<TreeEntry>) -> Result<ContentId> {
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        for w in entries.windows(2) {
            if w[0].path == w[1].path {
                return Err(StoreError::InvalidPath(w[0].path.clone()));
            }
        }
        for e in &entries {
            if !valid_component(&e.path) {
                return Err(StoreError::InvalidPath(e.path.clone()));
            }
            if !self.contains(&e.cid) {
                return Err(StoreError::DanglingReference(e.cid));
            }
        }
        self.put_object(&StructuredObject::Tree(TreeManifest { entries }).encode())
    }

    /// Builds nested trees from `(relative path, bytes)` pairs.
    pub fn put_files<P: AsRef<str>, B: AsRef<[u8]>>(&self, files: impl IntoIterator<Item = (P, B)>) -> Result<ContentId> {
        let mut root = DirNode::default();
        for (path, bytes) in files {
            let path = path.as_ref();
            let parts = split_path(path).filter(|p| !p.is_empty()).ok_or_else(|| StoreError::InvalidPath(path.into()))?;
            let (name, dirs) = parts.split_last().expect("non-empty");
            let mut node = &mut root;
            for d in dirs {
                node = node.dirs.entry((*d).to_string()).or_default();
            }
            let bytes = bytes.as_ref();
            let cid = self.put_blob(bytes)?;
            node.files.insert((*name).to_string(), (cid, bytes.len() as u64));
        }
        self.put_dir_node(&root)
    }

    fn put_dir_node(&self, node: &DirNode) -> Result<ContentId> {
        let mut entries = Vec::new();
        for (name, sub) in &node.dirs {
            if node.files.contains_key(name) {
                return Err(StoreError::InvalidPath(name.clone()));
            }
            let cid = self.put_dir_node(sub)?;
            entries.push(TreeEntry { path: name.clone(), kind: EntryKind::Tree, cid, size_bytes: self.logical_size(&cid)? });
        }
        for (name, (cid, size)) in &node.files {
            entries.push(TreeEntry { path: name.clone(), kind: EntryKind::Blob, cid: *cid, size_bytes: *size });
        }
        self.put_tree(entries)
    }

    /// Snapshots a directory on disk. Symlinks and special files are skipped.
    pub fn snapshot_dir(&self, dir: &Path) -> Result<ContentId> {
        let mut node = DirNode::default();
        self.read_dir_into(dir, &mut node)?;
        self.put_dir_node(&node)
    }

    fn read_dir_into(&self, dir: &Path, node: &mut DirNode) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !valid_component(&name) {
                continue;
            }
            let ty = entry.file_type()?;
            if ty.is_dir() {
                self.read_dir_into(&entry.path(), node.dirs.entry(name).or_default())?;
            } else if ty.is_file() {
                let bytes = fs::read(entry.path())?;
                let cid = self.put_blob(&bytes)?;
                node.files.insert(name, (cid, bytes.len() as u64));
            }
        }
        Ok(())
    }

    pub fn read_tree(&self, cid: &ContentId) -> Result<TreeManifest> {
        match self.get_structured(cid)? {
            Some(StructuredObject::Tree(t)) => Ok(t),
            _ => Err(StoreError::WrongKind(*cid, "tree")),
        }
    }

    pub fn commit(&self, parent: Option<ContentId>, tree_cid: ContentId, author: MemberId, message: &str, authored_at: u64) -> Result<ContentId> {
        for c in parent.iter().chain([&tree_cid]) {
            if !self.contains(c) {
                return Err(StoreError::DanglingReference(*c));
            }
        }
        self.read_tree(&tree_cid)?;
        let commit = CommitObject { parent_cid: parent, tree_cid, author, message: message.to_string(), authored_at };
        self.put_object(&StructuredObject::Commit(commit).encode())
    }

    pub fn read_commit(&self, cid: &ContentId) -> Result<CommitObject> {
        match self.get_structured(cid)? {
            Some(StructuredObject::Commit(c)) => Ok(c),
            _ => Err(StoreError::WrongKind(*cid, "commit")),
        }
    }

    /// Commits from `head` back to the root.
    pub fn log(&self, head: &ContentId) -> Result<Vec<(ContentId, CommitObject)>> {
        let mut out = Vec::new();
        let mut next = Some(*head);
        while let Some(cid) = next {
            let c = self.read_commit(&cid)?;
            next = c.parent_cid;
            out.push((cid, c));
        }
        Ok(out)
    }

    /// Descends tree manifests along `path`; the empty path is the tree itself.
    pub fn resolve_path(&self, tree_cid: &ContentId, path: &str) -> Result<ContentId> {
        let parts = split_path(path).ok_or_else(|| StoreError::InvalidPath(path.into()))?;
        let mut cur = *tree_cid;
        for (i, part) in parts.iter().enumerate() {
            let tree = self.read_tree(&cur).map_err(|e| match e {
                StoreError::WrongKind(..) => StoreError::PathNotFound(path.into()),
                other => other,
            })?;
            let entry = tree.find(part).ok_or_else(|| StoreError::PathNotFound(path.into()))?;
            if entry.kind == EntryKind::Blob && i + 1 < parts.len() {
                return Err(StoreError::PathNotFound(path.into()));
            }
            cur = entry.cid;
        }
        Ok(cur)
    }

    /// Every blob under a tree as `(path, cid, size)`, sorted by path.
    pub fn list_files(&self, tree_cid: &ContentId) -> Result<Vec<(String, ContentId, u64)>> {
        let mut out = Vec::new();
        self.walk_files(tree_cid, "", &mut out)?;
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    fn walk_files(&self, tree_cid: &ContentId, prefix: &str, out: &mut Vec<(String, ContentId, u64)>) -> Result<()> {
        for e in self.read_tree(tree_cid)?.entries {
            let path = if prefix.is_empty() { e.path.clone() } else { format!("{prefix}/{}", e.path) };
            match e.kind {
                EntryKind::Blob => out.push((path, e.cid, e.size_bytes)),
                EntryKind::Tree => self.walk_files(&e.cid, &path, out)?,
            }
        }
        Ok(())
    }

    /// Writes a tree's files under `dest`.
    pub fn checkout(&self, tree_cid: &ContentId, dest: &Path) -> Result<()> {
        fs::create_dir_all(dest)?;
        for e in self.read_tree(tree_cid)?.entries {
            let target = dest.join(&e.path);
            match e.kind {
                EntryKind::Blob => fs::write(target, self.get(&e.cid)?)?,
                EntryKind::Tree => self.checkout(&e.cid, &target)?,
            }
        }
        Ok(())
    }

    // ---- pins, gc, audit ----

    fn pins_path(&self) -> PathBuf {
        self.root.join("pins")
    }

    fn load_pins(&self) -> Result<BTreeSet<ContentId>> {
        let mut set = BTreeSet::new();
        let text = match fs::read_to_string(self.pins_path()) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(set),
            Err(e) => return Err(e.into()),
        };
        // A torn final line from a crash is ignored.
        for line in text.lines() {
            let (op, rest) = line.split_at(line.len().min(1));
            let Ok(cid) = ContentId::parse(rest) else { continue };
            match op {
                "+" => set.insert(cid),
                "-" => set.remove(&cid),
                _ => continue,
            };
        }
        Ok(set)
    }

    fn append_pin_log(&self, op: char, cid: &ContentId) -> Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.pins_path())?;
        writeln!(f, "{op}{cid}")?;
        f.sync_data()?;
        Ok(())
    }

    pub fn pin(&self, cid: &ContentId) -> Result<()> {
        if !self.contains(cid) {
            return Err(StoreError::NotFound(*cid));
        }
        let mut pins = self.pins.lock();
        if pins.insert(*cid) {
            self.append_pin_log('+', cid)?;
        }
        Ok(())
    }

    pub fn unpin(&self, cid: &ContentId) -> Result<()> {
        let mut pins = self.pins.lock();
        if !pins.remove(cid) {
            return Err(StoreError::NotFound(*cid));
        }
        self.append_pin_log('-', cid)
    }

    pub fn pins(&self) -> Vec<ContentId> {
        self.pins.lock().iter().copied().collect()
    }

    /// Every object reachable from the pinned roots.
    pub fn reachable(&self) -> HashSet<ContentId> {
        let mut seen = HashSet::new();
        let mut stack: Vec<ContentId> = self.pins();
        while let Some(cid) = stack.pop() {
            if !seen.insert(cid) {
                continue;
            }
            // Missing or corrupt objects cannot name children; keep walking.
            if let Ok(Some(obj)) = self.get_structured(&cid) {
                stack.extend(obj.references());
            }
        }
        seen
    }

    /// Removes every object not reachable from a pin.
    pub fn gc(&self) -> Result<GcReport> {
        let _exclusive = self.gc_lock.write();
        let keep = self.reachable();
        let mut report = GcReport::default();
        for cid in self.list_objects()? {
            if keep.contains(&cid) {
                report.retained += 1;
                continue;
            }
            let len = self.file_len(&cid);
            fs::remove_file(self.object_path(&cid))?;
            self.used.fetch_sub(len, Ordering::SeqCst);
            report.removed.push(cid);
        }
        Ok(report)
    }

    /// Re-digests every stored object.
    pub fn audit(&self) -> Result<StoreAudit> {
        let mut report = StoreAudit::default();
        for cid in self.list_objects()? {
            report.objects_checked += 1;
            if matches!(self.get_object(&cid), Err(StoreError::IntegrityFailure(_))) {
                report.corrupt.push(cid);
            }
        }
        Ok(report)
    }

    pub fn list_objects(&self) -> Result<Vec<ContentId>> {
        let mut out = Vec::new();
        let objects = self.root.join("objects");
        for a in fs::read_dir(&objects)? {
            let a = a?;
            if !a.file_type()?.is_dir() {
                continue;
            }
            for b in fs::read_dir(a.path())? {
                let b = b?;
                if !b.file_type()?.is_dir() {
                    continue;
                }
                for f in fs::read_dir(b.path())? {
                    let name = f?.file_name();
                    if let Ok(d) = crate::ledger::Digest::from_hex(&name.to_string_lossy()) {
                        out.push(ContentId::from_digest(d));
                    }
                }
            }
        }
        out.sort();
        Ok(out)
    }
}

#[derive(Default)]
struct DirNode {
    dirs: BTreeMap<String, DirNode>,
    files: BTreeMap<String, (ContentId, u64)>,
}
