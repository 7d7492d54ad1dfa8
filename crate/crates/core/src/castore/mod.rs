//! Content-addressed object store: blobs with transparent chunking, tree and
//! commit objects for repository snapshots, pinning and garbage collection.

mod cid;
pub mod objects;
mod store;

pub use cid::{ContentId, MalformedCid};
pub use objects::{ChunkedBlobManifest, CommitObject, EntryKind, StructuredObject, TreeEntry, TreeManifest, CHUNK_SIZE};
pub use store::{CaStore, GcReport, StoreAudit, StoreError};
