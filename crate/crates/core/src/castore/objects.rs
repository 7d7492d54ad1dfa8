//! Structured objects: chunked-blob manifests, trees and commits. Each is a
//! canonical document with a `kind` discriminator, stored as an ordinary
//! object so its address is the digest of its encoding.

use serde::{Deserialize, Serialize};

use super::cid::ContentId;
use crate::canonical::{decode_canonical, to_canonical_bytes};
use crate::ledger::MemberId;

pub const CHUNK_SIZE: usize = 256 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Blob,
    Tree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeEntry {
    /// A single path component; nesting goes through `Tree` entries.
    pub path: String,
    pub kind: EntryKind,
    pub cid: ContentId,
    /// Logical bytes below this entry.
    pub size_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeManifest {
    pub entries: Vec<TreeEntry>,
}

impl TreeManifest {
    pub fn size_bytes(&self) -> u64 {
        self.entries.iter().map(|e| e.size_bytes).sum()
    }

    pub fn find(&self, name: &str) -> Option<&TreeEntry> {
        self.entries.binary_search_by(|e| e.path.as_str().cmp(name)).ok().map(|i| &self.entries[i])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitObject {
    pub parent_cid: Option<ContentId>,
    pub tree_cid: ContentId,
    pub author: MemberId,
    pub message: String,
    pub authored_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChunkedBlobManifest {
    pub total_size: u64,
    pub chunk_cids: Vec<ContentId>,
    /// Address the reassembled bytes would have as a single object.
    pub blob_id: ContentId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum StructuredObject {
    #[serde(rename = "blob-manifest")]
    BlobManifest(ChunkedBlobManifest),
    #[serde(rename = "tree")]
    Tree(TreeManifest),
    #[serde(rename = "commit")]
    Commit(CommitObject),
}

impl StructuredObject {
    pub fn encode(&self) -> Vec<u8> {
        to_canonical_bytes(self).expect("structured objects hold no floats")
    }

    /// Recognizes canonical structured objects; anything else is a plain blob.
    pub fn decode(bytes: &[u8]) -> Option<StructuredObject> {
        if bytes.first() != Some(&b'{') {
            return None;
        }
        decode_canonical(bytes).ok()
    }

    /// Objects this one points at.
    pub fn references(&self) -> Vec<ContentId> {
        match self {
            StructuredObject::BlobManifest(m) => m.chunk_cids.clone(),
            StructuredObject::Tree(t) => t.entries.iter().map(|e| e.cid).collect(),
            StructuredObject::Commit(c) => c.parent_cid.iter().copied().chain([c.tree_cid]).collect(),
        }
    }
}

/// Accepts one path component: non-empty, no separators, not `.` or `..`.
pub fn valid_component(name: &str) -> bool {
    !name.is_empty() && name != "." && name != ".." && !name.contains('/') && !name.contains('\\') && !name.contains('\0')
}

/// Splits a relative `a/b/c` path; the empty path yields no components.
pub fn split_path(path: &str) -> Option<Vec<&str>> {
    if path.is_empty() {
        return Some(Vec::new());
    }
    if path.starts_with('/') {
        return None;
    }
    let parts: Vec<&str> = path.split('/').collect();
    parts.iter().all(|p| valid_component(p)).then_some(parts)
}
