//! Deterministic package archive.
//!
//! ```text
//! magic   "DCPKG\x01"                    6 bytes
//! count   u32 big-endian
//! entry*  path_len u16 BE | path utf-8 | mode u32 BE (always 0o644)
//!         | mtime u64 BE (always 0) | size u64 BE | bytes
//! ```
//! Entries are sorted by path and carry no host metadata, so equal trees give
//! byte-identical archives.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::castore::{CaStore, ContentId, EntryKind, StoreError};

pub const MAGIC: &[u8; 6] = b"DCPKG\x01";
pub const FILE_MODE: u32 = 0o644;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed package: {0}")]
pub struct MalformedPackage(pub &'static str);

/// Archives the files under `include_paths` of a tree. A path naming a
/// directory includes everything below it.
pub fn make_package(store: &CaStore, tree_cid: &ContentId, include_paths: &[String]) -> Result<Vec<u8>, StoreError> {
    let mut files: BTreeMap<String, ContentId> = BTreeMap::new();
    for inc in include_paths {
        let inc = inc.trim_end_matches('/');
        let cid = store.resolve_path(tree_cid, inc)?;
        if is_tree(store, tree_cid, inc)? {
            for (p, c, _) in store.list_files(&cid)? {
                let full = if inc.is_empty() { p } else { format!("{inc}/{p}") };
                files.insert(full, c);
            }
        } else {
            files.insert(inc.to_string(), cid);
        }
    }
    let mut entries = Vec::with_capacity(files.len());
    for (path, cid) in files {
        entries.push((path, store.get(&cid)?));
    }
    Ok(encode_package(&entries))
}

fn is_tree(store: &CaStore, root: &ContentId, path: &str) -> Result<bool, StoreError> {
    if path.is_empty() {
        return Ok(true);
    }
    let (parent, name) = path.rsplit_once('/').unwrap_or(("", path));
    let parent_cid = store.resolve_path(root, parent)?;
    let tree = store.read_tree(&parent_cid)?;
    Ok(tree.find(name).is_some_and(|e| e.kind == EntryKind::Tree))
}

/// Encodes `(path, bytes)` entries; the caller's order is replaced by path order.
pub fn encode_package(entries: &[(String, Vec<u8>)]) -> Vec<u8> {
    let mut sorted: Vec<&(String, Vec<u8>)> = entries.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(sorted.len() as u32).to_be_bytes());
    for (path, bytes) in sorted {
        out.extend_from_slice(&(path.len() as u16).to_be_bytes());
        out.extend_from_slice(path.as_bytes());
        out.extend_from_slice(&FILE_MODE.to_be_bytes());
        out.extend_from_slice(&0u64.to_be_bytes());
        out.extend_from_slice(&(bytes.len() as u64).to_be_bytes());
        out.extend_from_slice(bytes);
    }
    out
}

pub fn extract_package(mut data: &[u8]) -> Result<Vec<(String, Vec<u8>)>, MalformedPackage> {
    fn take<'a>(data: &mut &'a [u8], n: usize) -> Result<&'a [u8], MalformedPackage> {
        if data.len() < n {
            return Err(MalformedPackage("truncated"));
        }
        let (head, rest) = data.split_at(n);
        *data = rest;
        Ok(head)
    }
    if take(&mut data, 6)? != MAGIC {
        return Err(MalformedPackage("bad magic"));
    }
    let count = u32::from_be_bytes(take(&mut data, 4)?.try_into().expect("4 bytes"));
    let mut out = Vec::new();
    for _ in 0..count {
        let plen = u16::from_be_bytes(take(&mut data, 2)?.try_into().expect("2 bytes")) as usize;
        let path = std::str::from_utf8(take(&mut data, plen)?).map_err(|_| MalformedPackage("path not utf-8"))?;
        take(&mut data, 12)?;
        let size = u64::from_be_bytes(take(&mut data, 8)?.try_into().expect("8 bytes"));
        let bytes = take(&mut data, usize::try_from(size).map_err(|_| MalformedPackage("size"))?)?;
        out.push((path.to_string(), bytes.to_vec()));
    }
    if !data.is_empty() {
        return Err(MalformedPackage("trailing bytes"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_archive_is_valid() {
        let bytes = encode_package(&[]);
        assert_eq!(bytes, b"DCPKG\x01\0\0\0\0");
        assert!(extract_package(&bytes).unwrap().is_empty());
    }

    #[test]
    fn roundtrip_against_tree_content() {
        let dir = tempfile::tempdir().unwrap();
        let store = CaStore::open(dir.path()).unwrap();
        let files = [("src/a.rs", &b"a"[..]), ("src/b/c.rs", b"cc"), ("docs/x", b"x"), ("Cargo.toml", b"[p]")];
        let tree = store.put_files(files).unwrap();
        let pkg = make_package(&store, &tree, &["src".into(), "Cargo.toml".into()]).unwrap();
        assert_eq!(make_package(&store, &tree, &["Cargo.toml".into(), "src/".into()]).unwrap(), pkg);
        let got = extract_package(&pkg).unwrap();
        let want: Vec<(String, Vec<u8>)> = vec![
            ("Cargo.toml".into(), b"[p]".to_vec()),
            ("src/a.rs".into(), b"a".to_vec()),
            ("src/b/c.rs".into(), b"cc".to_vec()),
        ];
        assert_eq!(got, want);
        let whole = extract_package(&make_package(&store, &tree, &[String::new()]).unwrap()).unwrap();
        assert_eq!(whole.len(), 4);
        assert!(matches!(
            make_package(&store, &tree, &["missing".into()]),
            Err(StoreError::PathNotFound(_))
        ));
    }

    #[test]
    fn truncation_detected() {
        let pkg = encode_package(&[("f".into(), vec![1, 2, 3])]);
        for cut in 0..pkg.len() {
            assert!(extract_package(&pkg[..cut]).is_err(), "{cut}");
        }
    }
}
